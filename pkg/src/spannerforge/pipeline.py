"""Iterative min-max-degree 2-spanner approximation.

For each candidate degree budget lam (ascending) the loop: solves the lifted
LP for the remaining demands, buys every edge with x >= 1/4, flips one coin
per dense block (probability z_empty) and rounds the conditioned block into a
star purchase around its center, then drops every demand now spanned by the
accumulated edge set.  The best valid spanner over all budgets wins.

Rounding routes per block: the caterpillar pipeline when the derived factor
allows it (weakly-faithful outputs are amplified by unioning repeated runs),
the small-degree bucket sampler otherwise or as the failure fallback.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, replace
from typing import Iterable, Mapping

from .graphs import (Graph, GraphError, ParamTuple, decompose,
                     is_two_spanner, neighborhood_subgraph, spanner_cost)
from .lp import solve
from .params import ParameterError, derive_params
from .relax import (build_ld2s_lp, edge_element, lift_evaluator,
                    vertex_element)
from .rounding import (DEFAULT_CONSTANTS, RoundedSubgraph, RoundingConstants,
                       RoundingFailure, amplify_weakly_faithful,
                       faithful_smes, general_from_bipartite,
                       small_degree_rounding)
from .seeds import child_seed, rng_for

Edge = tuple[int, int]

X_THRESHOLD = 0.25  # Algorithm constant, surfaced read-only in reports.

__all__ = [
    "BlockOutcome",
    "BudgetReport",
    "InfeasibleBudget",
    "IterationReport",
    "PipelineConfig",
    "PipelineReport",
    "approximate_ld2s",
    "candidate_tuples",
    "render_report",
    "run_iteration",
]


class InfeasibleBudget(RuntimeError):
    """The LP refused this degree budget; the caller should raise it."""

    def __init__(self, lam: float):
        super().__init__(f"no fractional spanner within degree budget {lam}")
        self.lam = lam


@dataclass(frozen=True)
class PipelineConfig:
    q: int = 2
    lambda_search: str = "all"        # or "powers-of-two"
    max_iterations: int = 64
    seed: int = 0
    constants: RoundingConstants = DEFAULT_CONSTANTS
    tuple_multiplicity: int = 1       # block copies per parameter tuple
    tuple_grid: bool = False          # add a power-of-two parameter grid
    lp_method: str = "auto"

    def __post_init__(self):
        if self.q < 2:
            raise ValueError(f"q must be >= 2, got {self.q}")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.lambda_search not in ("all", "powers-of-two"):
            raise ValueError(f"unknown lambda search {self.lambda_search!r}")
        if self.tuple_multiplicity < 1:
            raise ValueError("tuple_multiplicity must be >= 1")


@dataclass(frozen=True)
class BlockOutcome:
    center: int
    slot: int
    tau: ParamTuple
    coin: float            # z_empty value read from the LP solution
    fired: bool
    route: str             # "faithful" | "small-degree" | "fallback" | "skipped"
    vertices_bought: int
    edges_bought: int
    note: str = ""


@dataclass(frozen=True)
class IterationReport:
    lam: float
    iteration: int
    demands_before: tuple[Edge, ...]
    demands_after: tuple[Edge, ...]
    satisfied: tuple[Edge, ...]
    x_threshold: float
    x_edges: tuple[Edge, ...]
    new_edges: tuple[Edge, ...]
    outcomes: tuple[BlockOutcome, ...]
    degree_added: Mapping[int, int]
    degree_added_by_type: Mapping[str, int]

    def __post_init__(self):
        before = set(self.demands_before)
        if not set(self.demands_after) <= before:
            raise GraphError("demand set grew during an iteration")
        if not set(self.satisfied) <= before:
            raise GraphError("satisfied demands were never pending")


@dataclass(frozen=True)
class BudgetReport:
    lam: int
    status: str            # "complete" | "incomplete" | "infeasible"
    cost: int | None
    iterations: tuple[IterationReport, ...]


@dataclass(frozen=True)
class PipelineReport:
    n: int
    m: int
    delta: int
    lambda_search: str
    q: int
    seed: int
    budgets: tuple[BudgetReport, ...]
    best_lam: int | None
    best_cost: int | None
    best_edges: tuple[Edge, ...]
    status: str            # "complete" | "incomplete"


def candidate_tuples(g: Graph, demands: Iterable[Edge], lam: int,
                     cfg: PipelineConfig) -> list[ParamTuple]:
    """Parameter tuples for the per-center blocks at this budget.

    Tuples come from decomposing each center's demand neighborhood into
    nearly-regular pieces, keeping those whose vertex budget k0+k1 fits
    inside lam (a candidate subgraph has at most lam vertices); the single
    edge tuple is always available, and the optional grid adds every
    power-of-two combination that fits.
    """
    demand_set = {(min(a, b), max(a, b)) for a, b in demands}
    seen: set[ParamTuple] = set()
    any_demand_neighborhood = False
    for u in range(g.n):
        local, _ = neighborhood_subgraph(g, demand_set, u)
        if local.m == 0:
            continue
        any_demand_neighborhood = True
        for tau, _piece in decompose(local, max(1, local.n),
                                     seed=child_seed(cfg.seed, f"L:{u}")):
            if tau.k0 + tau.k1 <= lam:
                seen.add(tau)
    if any_demand_neighborhood and lam >= 2:
        seen.add(ParamTuple(1, 1, 1, 1))
    if cfg.tuple_grid:
        powers = [1 << i for i in range(max(1, int(lam)).bit_length())]
        for k0 in powers:
            for k1 in powers:
                if k1 > k0 or k0 + k1 > lam:
                    continue
                for d0 in powers:
                    if d0 > k1:
                        continue
                    for d1 in powers:
                        if d1 <= k0:
                            seen.add(ParamTuple(k0, k1, d0, d1))
    ordered = sorted(seen)
    return [tau for tau in ordered for _ in range(cfg.tuple_multiplicity)]


def block_rounder(tau: ParamTuple, q: int,
                  constants: RoundingConstants = DEFAULT_CONSTANTS,
                  route_sink: list[str] | None = None):
    """Rounder for one bipartite instance: caterpillar walk when the derived
    parameters allow it, amplified to faithful if needed, with the
    small-degree sampler as the routed fallback."""

    def rounder(cover, y, s):
        try:
            params = derive_params(cover.n, tau.k0, tau.k1, tau.d0, tau.d1, q)
            use_small = params.small_degree_mode
        except ParameterError:
            use_small = True
        route = "small-degree"
        if not use_small:
            try:
                out = faithful_smes(cover, tau, q, y, s, constants)
                if out.guarantee == "weakly-faithful" and out.phi < 1.0:
                    out = amplify_weakly_faithful(
                        lambda s2: faithful_smes(cover, tau, q, y, s2, constants),
                        out.phi, child_seed(s, "amplify"))
                if route_sink is not None:
                    route_sink.append("faithful")
                return out
            except RoundingFailure:
                route = "fallback"
        if route_sink is not None:
            route_sink.append(route)
        y_vertex = {v: y((vertex_element(v),)) for v in cover.vertices}
        y_edge = {e: y((edge_element(*e),)) for e in cover.edges}
        return small_degree_rounding(cover, tau, y_vertex, y_edge, s)

    return rounder


def _round_block(local: Graph, tau: ParamTuple, q: int, y_eval,
                 seed: int, constants: RoundingConstants
                 ) -> tuple[RoundedSubgraph, str]:
    """Route one conditioned block through the appropriate rounder."""
    routes: list[str] = []
    folded = general_from_bipartite(
        local, y_eval, block_rounder(tau, q, constants, routes), seed)
    return folded, routes[-1]


def round_smes_instance(g: Graph, tau: ParamTuple, q: int, values=None,
                        seed: int = 0,
                        constants: RoundingConstants = DEFAULT_CONSTANTS
                        ) -> tuple[RoundedSubgraph, str]:
    """Round one dense-subgraph instance on a general graph via its cover.

    values may be a mapping over lifted variable names (double-cover ids) or
    an evaluator; None means the all-ones assignment.
    """
    y_eval = (lambda elements: 1.0) if values is None else values
    return _round_block(g, tau, q, y_eval, seed, constants)


def run_iteration(g: Graph, demands: Iterable[Edge], lam: int, q: int,
                  cfg: PipelineConfig, seed: int, *,
                  existing: Iterable[Edge] = ()
                  ) -> tuple[set[Edge], set[Edge], IterationReport]:
    """One round: solve, harvest big x edges, round fired blocks, settle.

    existing carries the edges bought by earlier iterations; demand removal
    checks the full accumulated edge set.  Raises InfeasibleBudget when the
    LP has no feasible point at this budget.
    """
    demand_set = {(min(a, b), max(a, b)) for a, b in demands}
    held: set[Edge] = {(min(a, b), max(a, b)) for a, b in existing}
    L = candidate_tuples(g, demand_set, lam, cfg)
    lp, index = build_ld2s_lp(g, demand_set, lam, q, L)
    sol = solve(lp, method=cfg.lp_method)
    if sol.status == "infeasible":
        raise InfeasibleBudget(lam)

    x_edges = sorted(e for e, name in index.x_edge.items()
                     if sol.values.get(name, 0.0) >= X_THRESHOLD - 1e-9)
    new_edges: set[Edge] = set()
    added_by_type = {"direct": Counter(), "center": Counter(),
                     "member": Counter()}
    for e in x_edges:
        if e not in held and e not in new_edges:
            new_edges.add(e)
            added_by_type["direct"][e[0]] += 1
            added_by_type["direct"][e[1]] += 1

    outcomes: list[BlockOutcome] = []
    for blk in index.blocks:
        z0 = sol.values.get(blk.smes.z_empty, 0.0)
        if z0 <= 1e-9:
            outcomes.append(BlockOutcome(blk.center, blk.slot, blk.tau,
                                         0.0, False, "skipped", 0, 0))
            continue
        coin = rng_for(seed, f"coin:{blk.center}:{blk.slot}").random()
        if coin >= z0:
            outcomes.append(BlockOutcome(blk.center, blk.slot, blk.tau,
                                         z0, False, "skipped", 0, 0))
            continue
        y_eval = lift_evaluator(sol.values, prefix=blk.smes.prefix,
                                scale=1.0 / z0)
        folded, route = _round_block(
            blk.local, blk.tau, q, y_eval,
            child_seed(seed, f"round:{blk.center}:{blk.slot}"), cfg.constants)
        bought = 0
        for v_local in sorted(folded.vertices):
            w = blk.orig_ids[v_local]
            e = (min(blk.center, w), max(blk.center, w))
            if not g.has_edge(*e):
                raise GraphError(f"rounded member {w} is not adjacent "
                                 f"to center {blk.center}")
            if e not in held and e not in new_edges:
                new_edges.add(e)
                added_by_type["center"][blk.center] += 1
                added_by_type["member"][w] += 1
                bought += 1
        outcomes.append(BlockOutcome(
            blk.center, blk.slot, blk.tau, z0, True, route,
            len(folded.vertices), bought,
            note=f"{folded.guarantee}; " + "; ".join(folded.notes)))

    ok, unspanned = is_two_spanner(g, held | new_edges, demand_set)
    after = tuple(sorted(unspanned))
    satisfied = tuple(sorted(demand_set - set(after)))
    degree_added: Counter = Counter()
    for counter in added_by_type.values():
        degree_added.update(counter)
    report = IterationReport(
        lam=float(lam), iteration=0,
        demands_before=tuple(sorted(demand_set)), demands_after=after,
        satisfied=satisfied, x_threshold=X_THRESHOLD,
        x_edges=tuple(x_edges), new_edges=tuple(sorted(new_edges)),
        outcomes=tuple(outcomes), degree_added=dict(degree_added),
        degree_added_by_type={t: max(c.values(), default=0)
                              for t, c in added_by_type.items()})
    return new_edges, set(satisfied), report


def _candidate_budgets(delta: int, mode: str) -> list[int]:
    if delta <= 0:
        return []
    if mode == "all":
        return list(range(1, delta + 1))
    budgets = []
    lam = 1
    while lam < delta:
        budgets.append(lam)
        lam *= 2
    budgets.append(delta)
    return budgets


def approximate_ld2s(g: Graph,
                     cfg: PipelineConfig = PipelineConfig()
                     ) -> tuple[Graph, PipelineReport]:
    """Best valid spanner over the ascending budget sweep.

    Every edge of g is a demand.  The full budget lam = max degree always
    admits the all-ones LP point, so the sweep cannot come back empty.
    """
    if g.n == 0:
        raise GraphError("host graph has no vertices")
    delta = g.max_degree()
    budget_reports: list[BudgetReport] = []
    best_edges: set[Edge] | None = None
    best_lam = None
    for lam in _candidate_budgets(delta, cfg.lambda_search):
        held: set[Edge] = set()
        demands = set(g.edges)
        iterations: list[IterationReport] = []
        status = "complete"
        for it in range(1, cfg.max_iterations + 1):
            if not demands:
                break
            try:
                new_edges, _, rep = run_iteration(
                    g, demands, lam, cfg.q, cfg,
                    child_seed(cfg.seed, f"lam{lam}:it{it}"), existing=held)
            except InfeasibleBudget:
                status = "infeasible"
                break
            rep = replace(rep, iteration=it)
            iterations.append(rep)
            held |= new_edges
            demands = set(rep.demands_after)
        if status != "infeasible" and demands:
            status = "incomplete"
        cost = None
        if status == "complete":
            ok, bad = is_two_spanner(g, held, g.edges)
            assert ok, f"unspanned demands survived: {bad}"
            cost = spanner_cost(held)
            if best_edges is None or cost < spanner_cost(best_edges):
                best_edges = set(held)
                best_lam = lam
        budget_reports.append(BudgetReport(lam, status, cost,
                                           tuple(iterations)))
    if g.m == 0:
        best_edges, best_lam = set(), 0
    if best_edges is None:
        raise RuntimeError("no budget produced a valid spanner; "
                           "the full-degree budget should always work")
    spanner = Graph(g.n, sorted(best_edges))
    report = PipelineReport(
        n=g.n, m=g.m, delta=delta, lambda_search=cfg.lambda_search,
        q=cfg.q, seed=cfg.seed, budgets=tuple(budget_reports),
        best_lam=best_lam, best_cost=spanner_cost(spanner),
        best_edges=tuple(sorted(best_edges)), status="complete")
    return spanner, report


def _outcome_dict(o: BlockOutcome) -> dict:
    return {"center": o.center, "slot": o.slot, "tau": list(o.tau),
            "coin": round(o.coin, 12), "fired": o.fired, "route": o.route,
            "vertices_bought": o.vertices_bought,
            "edges_bought": o.edges_bought, "note": o.note}


def _iteration_dict(r: IterationReport) -> dict:
    return {
        "iteration": r.iteration,
        "demands_before": [list(e) for e in r.demands_before],
        "demands_after": [list(e) for e in r.demands_after],
        "satisfied": [list(e) for e in r.satisfied],
        "x_threshold": r.x_threshold,
        "x_edges": [list(e) for e in r.x_edges],
        "new_edges": [list(e) for e in r.new_edges],
        "outcomes": [_outcome_dict(o) for o in r.outcomes],
        "degree_added": {str(v): d for v, d in sorted(r.degree_added.items())},
        "degree_added_by_type": dict(sorted(r.degree_added_by_type.items())),
    }


def render_report(report: PipelineReport) -> str:
    """Deterministic JSON rendering of a pipeline run."""
    payload = {
        "n": report.n, "m": report.m, "delta": report.delta,
        "lambda_search": report.lambda_search, "q": report.q,
        "seed": report.seed, "status": report.status,
        "best": {"lam": report.best_lam, "cost": report.best_cost,
                 "edges": [list(e) for e in report.best_edges]},
        "budgets": [
            {"lam": b.lam, "status": b.status, "cost": b.cost,
             "iterations": [_iteration_dict(r) for r in b.iterations]}
            for b in report.budgets],
    }
    return json.dumps(payload, indent=2, sort_keys=True)
