"""LP relaxation builders.

Four related systems over a common lifted-variable vocabulary:

* ``build_kp_lp``: the classic degree/covering relaxation of the min-max-degree
  2-spanner problem (variables x_e, x_{u,v;w}, lam).
* ``build_bipartite_smes_lp``: the lifted system for nearly-regular dense
  subgraphs of a bipartite host. One variable y_T per subset T of vertices and
  edges with |T| <= q; size, degree-window, edge-closure and monotonicity rows.
* ``build_smes_lp``: the same system over the bipartite double cover of a
  general graph, plus folding variables z linking the two covers.
* ``build_ld2s_lp``: per-vertex embedded dense-subgraph blocks tied to global
  spanner-edge variables x, with degree budget lam.

``integral_lift`` turns a concrete subgraph into a 0/1 assignment of the
lifted variables, which is how the builders are unit-tested: the lift is
feasible exactly when the subgraph passes the nearly-regular checker.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import Callable, Iterable, Mapping, Sequence

from .graphs import (
    BipartiteGraph,
    Graph,
    GraphError,
    ParamTuple,
    decompose,
    double_cover,
    is_two_spanner,
    neighborhood_subgraph,
    slack_constant,
    spanner_cost,
)
from .lp import LinearProgram

# An element of a lifted subset: ("v", vertex) or ("e", lo, hi).
Element = tuple


def vertex_element(v: int) -> Element:
    return ("v", int(v))


def edge_element(u: int, w: int) -> Element:
    return ("e", min(u, w), max(u, w))


def _element_key(el: Element):
    if el[0] == "v":
        return (0, el[1], -1)
    return (1, el[1], el[2])


def canonical_subset(elements: Iterable[Element]) -> tuple[Element, ...]:
    return tuple(sorted(set(elements), key=_element_key))


def element_name(el: Element) -> str:
    if el[0] == "v":
        return f"v{el[1]}"
    return f"e{el[1]}_{el[2]}"


def subset_name(subset: Sequence[Element], prefix: str = "") -> str:
    body = "__".join(element_name(el) for el in subset) if subset else "empty"
    return f"y_{prefix}{body}"


def subset_count(n_vertices: int, n_edges: int, q: int) -> int:
    total = n_vertices + n_edges
    return sum(math.comb(total, i) for i in range(q + 1))


def _ground_elements(gp: BipartiteGraph) -> list[Element]:
    ground = [vertex_element(v) for v in gp.vertices]
    ground += [edge_element(u, w) for u, w in gp.edges]
    return sorted(ground, key=_element_key)


# ---------------------------------------------------------------------------
# Baseline degree/covering relaxation


def build_kp_lp(g: Graph) -> LinearProgram:
    """Fractional 2-spanner relaxation: minimize the degree bound lam.

    x_{u,v} buys edge {u,v}; x_{u,v;w} routes demand {u,v} through the common
    neighbor w, so it is capped by both legs of the 2-path.
    """
    lp = LinearProgram("kp")
    lam = lp.add_variable("lam", 0.0, math.inf)
    xname = {}
    for u, v in g.edges:
        xname[(u, v)] = lp.add_variable(f"x_{u}_{v}", 0.0, 1.0)
    for u, v in g.edges:
        cover = {xname[(u, v)]: 1.0}
        for w in sorted(set(g.neighbors(u)) & set(g.neighbors(v))):
            t = lp.add_variable(f"x_{u}_{v}__{w}", 0.0, 1.0)
            cover[t] = 1.0
            leg_a = xname[(min(u, w), max(u, w))]
            leg_b = xname[(min(v, w), max(v, w))]
            lp.add_row(f"leg_a_{u}_{v}__{w}", {t: 1.0, leg_a: -1.0}, "<=", 0.0)
            lp.add_row(f"leg_b_{u}_{v}__{w}", {t: 1.0, leg_b: -1.0}, "<=", 0.0)
        lp.add_row(f"cover_{u}_{v}", cover, ">=", 1.0)
    for u in range(g.n):
        nbrs = g.neighbors(u)
        if not nbrs:
            continue
        row = {xname[(min(u, v), max(u, v))]: 1.0 for v in nbrs}
        row[lam] = -1.0
        lp.add_row(f"deg_{u}", row, "<=", 0.0)
    lp.set_objective({lam: 1.0}, "min")
    return lp


# ---------------------------------------------------------------------------
# Lifted bipartite system


def _add_bipartite_system(lp: LinearProgram, gp: BipartiteGraph, tau: ParamTuple,
                          q: int, prefix: str = "",
                          pin_empty: float | None = None) -> Callable[..., str]:
    """Add the lifted subset system for gp/tau at level q under a name prefix.

    Returns a function mapping an element iterable to its variable name.
    """
    if q < 2:
        raise ValueError(f"lift level q must be at least 2, got {q}")
    slack = slack_constant(max(1, gp.n))
    ground = _ground_elements(gp)
    subsets: list[tuple[Element, ...]] = [()]
    for r in range(1, q + 1):
        subsets.extend(combinations(ground, r))
    # Rows below look names up millions of times on larger hosts; build the
    # table once instead of re-rendering the string per coefficient.
    names = {T: subset_name(T, prefix) for T in subsets}
    for T in subsets:
        lp.add_variable(names[T], 0.0, 1.0)

    def name(elements: Iterable[Element]) -> str:
        return names[canonical_subset(elements)]

    degree_caps = (tau.d0, tau.d1)
    side_sizes = (tau.k0, tau.k1)
    for T in subsets:
        tname = subset_name(T, prefix)
        if len(T) <= q - 1:
            # Side-size rows: picking over V_b multiplies mass by k_b.
            for b in (0, 1):
                coeffs: dict[str, float] = {}
                for v in gp.side(b):
                    nm = name(T + (vertex_element(v),))
                    coeffs[nm] = coeffs.get(nm, 0.0) + 1.0
                coeffs[tname] = coeffs.get(tname, 0.0) - float(side_sizes[b])
                lp.add_row(f"{prefix}size{b}__{tname}", coeffs, "=", 0.0)
            # Degree windows for each vertex already present in T.
            for el in T:
                if el[0] != "v":
                    continue
                v = el[1]
                d_b = float(degree_caps[gp.side_of(v)])
                incident: dict[str, float] = {}
                for u in gp.neighbors(v):
                    nm = name(T + (edge_element(u, v),))
                    incident[nm] = incident.get(nm, 0.0) + 1.0
                upper = dict(incident)
                upper[tname] = upper.get(tname, 0.0) - d_b
                lp.add_row(f"{prefix}degup_{element_name(el)}__{tname}", upper, "<=", 0.0)
                lower = dict(incident)
                lower[tname] = lower.get(tname, 0.0) - slack * d_b
                lp.add_row(f"{prefix}deglow_{element_name(el)}__{tname}", lower, ">=", 0.0)
            # Monotonicity: adding any one element cannot increase mass.
            for el in ground:
                if el in T:
                    continue
                sup = name(T + (el,))
                lp.add_row(f"{prefix}mono_{element_name(el)}__{tname}",
                           {sup: 1.0, tname: -1.0}, "<=", 0.0)
        if len(T) <= q - 2:
            # Edge closure: an edge in T pins both endpoints.
            for el in T:
                if el[0] != "e":
                    continue
                a, b2 = el[1], el[2]
                for i, extra in enumerate(((vertex_element(a),),
                                           (vertex_element(b2),),
                                           (vertex_element(a), vertex_element(b2)))):
                    sup = name(T + extra)
                    if sup != tname:
                        lp.add_row(f"{prefix}closure{i}_{element_name(el)}__{tname}",
                                   {sup: 1.0, tname: -1.0}, "=", 0.0)
    if pin_empty is not None:
        lp.add_row(f"{prefix}pin_empty",
                   {subset_name((), prefix): 1.0}, "=", float(pin_empty))
    return name


def build_bipartite_smes_lp(gp: BipartiteGraph, tau: ParamTuple, q: int,
                            pin_empty: float | None = None) -> LinearProgram:
    """Lifted dense-subgraph system over a bipartite host.

    The empty-set variable is only capped at 1; the all-zero point is always
    feasible, so standalone infeasibility questions should pin it via
    pin_empty=1.0.
    """
    lp = LinearProgram("bipartite_smes")
    _add_bipartite_system(lp, gp, tau, q, "", pin_empty)
    return lp


@dataclass(frozen=True)
class SmESBlock:
    """Name map for one dense-subgraph block: the lifted y system lives on the
    double cover, the z variables fold it back onto the base graph."""

    prefix: str
    base: Graph
    cover: BipartiteGraph
    tau: ParamTuple
    q: int
    z_empty: str
    z_vertex: dict[int, str]
    z_edge: dict[tuple[int, int], str]

    def y_name(self, elements: Iterable[Element]) -> str:
        return subset_name(canonical_subset(elements), self.prefix)


def _add_smes_block(lp: LinearProgram, base: Graph, tau: ParamTuple, q: int,
                    prefix: str = "", id_of: Callable[[int], int] | None = None,
                    pin_empty: float | None = None) -> SmESBlock:
    if id_of is None:
        id_of = lambda v: v
    cover = double_cover(base)
    yname = _add_bipartite_system(lp, cover, tau, q, prefix, pin_empty)
    z_empty = lp.add_variable(f"z_{prefix}empty", 0.0, 1.0)
    lp.add_row(f"{prefix}zlink_empty",
               {z_empty: 1.0, yname(()): -1.0}, "=", 0.0)
    z_vertex: dict[int, str] = {}
    for v in range(base.n):
        ext = id_of(v)
        zv = lp.add_variable(f"z_{prefix}v{ext}", 0.0, 1.0)
        z_vertex[ext] = zv
        lp.add_row(f"{prefix}zlink_v{ext}",
                   {zv: 1.0,
                    yname((vertex_element(2 * v),)): -1.0,
                    yname((vertex_element(2 * v + 1),)): -1.0}, "=", 0.0)
        lp.add_row(f"{prefix}zcap_v{ext}", {zv: 1.0, z_empty: -1.0}, "<=", 0.0)
    z_edge: dict[tuple[int, int], str] = {}
    for u, v in base.edges:
        a, b = sorted((id_of(u), id_of(v)))
        ze = lp.add_variable(f"z_{prefix}e{a}_{b}", 0.0, 1.0)
        z_edge[(a, b)] = ze
        lp.add_row(f"{prefix}zlink_e{a}_{b}",
                   {ze: 1.0,
                    yname((edge_element(2 * u, 2 * v + 1),)): -1.0,
                    yname((edge_element(2 * v, 2 * u + 1),)): -1.0}, "=", 0.0)
        lp.add_row(f"{prefix}zcap0_e{a}_{b}",
                   {ze: 1.0, z_vertex[id_of(u)]: -1.0}, "<=", 0.0)
        lp.add_row(f"{prefix}zcap1_e{a}_{b}",
                   {ze: 1.0, z_vertex[id_of(v)]: -1.0}, "<=", 0.0)
    return SmESBlock(prefix, base, cover, tau, q, z_empty, z_vertex, z_edge)


def build_smes_lp(g: Graph, tau: ParamTuple, q: int,
                  pin_empty: float | None = None) -> tuple[LinearProgram, SmESBlock]:
    """Dense-subgraph system for a general graph via its double cover."""
    lp = LinearProgram("smes")
    block = _add_smes_block(lp, g, tau, q, "", None, pin_empty)
    return lp, block


# ---------------------------------------------------------------------------
# Spanner relaxation with embedded blocks


def degree_budget_cap(max_degree: int) -> float:
    """Polylog budget shared by the block-count and folding rows."""
    return 16.0 * (1.0 + math.log(max(1, max_degree))) ** 3


@dataclass(frozen=True)
class LD2SBlock:
    center: int
    slot: int
    tau: ParamTuple
    local: Graph
    orig_ids: tuple[int, ...]
    smes: SmESBlock  # z maps are keyed by original vertex ids


@dataclass
class LD2SIndex:
    lam: float
    cap: float
    x_edge: dict[tuple[int, int], str]
    blocks: list[LD2SBlock]

    def blocks_at(self, center: int) -> list[LD2SBlock]:
        return [b for b in self.blocks if b.center == center]

    def block(self, center: int, slot: int) -> LD2SBlock | None:
        for b in self.blocks:
            if b.center == center and b.slot == slot:
                return b
        return None


def _block_is_hopeless(cover: BipartiteGraph, tau: ParamTuple) -> bool:
    """True when no positive-mass assignment can exist for this block.

    A vertex of cover degree below the window floor is forced to zero mass,
    and the side-size row then caps total side mass below k_b.
    """
    slack = slack_constant(max(1, cover.n))
    for b, (k_b, d_b) in enumerate(((tau.k0, tau.d0), (tau.k1, tau.d1))):
        qualified = sum(1 for v in cover.side(b)
                        if cover.degree(v) >= slack * d_b - 1e-6)
        if qualified < k_b:
            return True
    return False


def build_ld2s_lp(g: Graph, demands: Iterable[tuple[int, int]], lam: float,
                  q: int, L: Sequence[ParamTuple],
                  prune_blocks: bool = True) -> tuple[LinearProgram, LD2SIndex]:
    """Spanner system: edge variables x, per-vertex dense-subgraph blocks.

    lam is a fixed degree budget, not a variable; feasibility is probed per
    budget by the caller. The objective maximizes total edge mass so the
    solver returns a deterministic extreme point with large x values.
    """
    demand_set = {(min(a, b), max(a, b)) for a, b in demands}
    for e in demand_set:
        if not g.has_edge(*e):
            raise GraphError(f"demand {e} is not an edge of the host graph")
    if lam < 0:
        raise GraphError(f"degree budget must be nonnegative, got {lam}")
    lp = LinearProgram("ld2s")
    cap = degree_budget_cap(g.max_degree())
    x_edge = {}
    for u, v in g.edges:
        x_edge[(u, v)] = lp.add_variable(f"x_{u}_{v}", 0.0, 1.0)
    blocks: list[LD2SBlock] = []
    for u in range(g.n):
        local, orig = neighborhood_subgraph(g, demand_set, u)
        if local.m == 0:
            continue
        cover = double_cover(local)
        for slot, tau in enumerate(L):
            if prune_blocks and _block_is_hopeless(cover, tau):
                continue
            prefix = f"u{u}c{slot}__"
            smes = _add_smes_block(lp, local, tau, q, prefix,
                                   id_of=lambda i, orig=orig: orig[i])
            blocks.append(LD2SBlock(u, slot, tau, local, orig, smes))
    index = LD2SIndex(float(lam), cap, x_edge, blocks)

    for u in range(g.n):
        at_u = index.blocks_at(u)
        if at_u:
            lp.add_row(f"blockmass_{u}",
                       {b.smes.z_empty: 1.0 for b in at_u}, "<=", cap)
        nbrs = g.neighbors(u)
        if nbrs:
            row = {x_edge[(min(u, v), max(u, v))]: 1.0 for v in nbrs}
            lp.add_row(f"budget_{u}", row, "<=", float(lam))
    for u, v in g.edges:
        coeffs: dict[str, float] = {}
        for b in index.blocks_at(u):
            if v in b.smes.z_vertex:
                nm = b.smes.z_vertex[v]
                coeffs[nm] = coeffs.get(nm, 0.0) + 1.0
        for b in index.blocks_at(v):
            if u in b.smes.z_vertex:
                nm = b.smes.z_vertex[u]
                coeffs[nm] = coeffs.get(nm, 0.0) + 1.0
        if coeffs:
            coeffs[x_edge[(u, v)]] = -cap
            lp.add_row(f"fold_{u}_{v}", coeffs, "<=", 0.0)
    for a, b2 in sorted(demand_set):
        coeffs = {x_edge[(a, b2)]: 1.0}
        for w in sorted(set(g.neighbors(a)) & set(g.neighbors(b2))):
            for blk in index.blocks_at(w):
                ze = blk.smes.z_edge.get((a, b2))
                if ze is not None:
                    coeffs[ze] = coeffs.get(ze, 0.0) + 1.0
        lp.add_row(f"span_{a}_{b2}", coeffs, "=", 1.0)
    lp.set_objective({nm: 1.0 for nm in x_edge.values()}, "max")
    return lp, index


# ---------------------------------------------------------------------------
# Integral lifts


def integral_lift(gp: BipartiteGraph, vertices: Iterable[int],
                  edges: Iterable[tuple[int, int]], q: int,
                  prefix: str = "") -> dict[str, float]:
    """0/1 assignment of all lifted variables for a concrete subgraph.

    y_T = 1 exactly when every vertex and edge of T belongs to the selection;
    in particular the empty set always gets 1.
    """
    chosen = {vertex_element(v) for v in vertices}
    chosen |= {edge_element(u, w) for u, w in edges}
    ground = _ground_elements(gp)
    assignment: dict[str, float] = {}
    subsets: list[tuple[Element, ...]] = [()]
    for r in range(1, q + 1):
        subsets.extend(combinations(ground, r))
    for T in subsets:
        assignment[subset_name(T, prefix)] = 1.0 if all(el in chosen for el in T) else 0.0
    return assignment


def lift_is_feasible(lp: LinearProgram, assignment: Mapping[str, float],
                     tol: float = 1e-7) -> bool:
    return lp.violation(assignment) <= tol


def lift_evaluator(values: Mapping[str, float], prefix: str = "",
                   scale: float = 1.0):
    """Callable view of a lifted assignment: elements -> scaled subset value.

    Missing subsets read as 0; the scaled value is clamped to [0, 1] so that
    conditioning rescales stay valid probabilities.
    """
    def evaluate(elements: Iterable[Element]) -> float:
        raw = values.get(subset_name(canonical_subset(elements), prefix), 0.0)
        return min(1.0, max(0.0, raw * scale))

    return evaluate


def variable_manifest(gp: BipartiteGraph, q: int, prefix: str = "") -> str:
    """Debug listing: one line per lifted variable, name then members."""
    ground = _ground_elements(gp)
    lines = [f"{subset_name((), prefix)}\t(empty)"]
    for r in range(1, q + 1):
        for T in combinations(ground, r):
            lines.append(f"{subset_name(T, prefix)}\t" +
                         " ".join(element_name(el) for el in T))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Feasibility certificates from concrete spanners


def assign_spanned_demands(g: Graph, demands: Iterable[tuple[int, int]],
                           spanner_edges: Iterable[tuple[int, int]]) -> dict[int, list[tuple[int, int]]]:
    """Give every demand not bought outright to one witness midpoint.

    The midpoint is the smallest common spanner-neighbor; raises if some
    demand is not spanned at all.
    """
    h_edges = {(min(u, v), max(u, v)) for u, v in spanner_edges}
    ok, violations = is_two_spanner(g, h_edges, demands)
    if not ok:
        raise GraphError(f"not a 2-spanner of the demands, e.g. {violations[0]}")
    h_adj: dict[int, set[int]] = {v: set() for v in range(g.n)}
    for u, v in h_edges:
        h_adj[u].add(v)
        h_adj[v].add(u)
    per_center: dict[int, list[tuple[int, int]]] = {}
    for a, b in sorted({(min(x, y), max(x, y)) for x, y in demands}):
        if (a, b) in h_edges:
            continue
        w = min(h_adj[a] & h_adj[b])
        per_center.setdefault(w, []).append((a, b))
    return per_center


def spanner_certificate(g: Graph, demands: Iterable[tuple[int, int]],
                        spanner_edges: Iterable[tuple[int, int]], q: int,
                        seed: int = 0):
    """Build the spanner LP together with an explicit feasible point.

    Decomposes each midpoint's demand star into nearly-regular pieces, sizes
    the tuple list L accordingly, and lifts the pieces into the matching
    blocks. Returns (lp, index, assignment, lam, L); the assignment is a
    substitution witness, no solve involved.
    """
    h_edges = {(min(u, v), max(u, v)) for u, v in spanner_edges}
    demand_set = {(min(a, b), max(a, b)) for a, b in demands}
    lam = max(1, spanner_cost(h_edges)) if demand_set else 0
    per_center = assign_spanned_demands(g, demand_set, h_edges)

    # Decompose each center's assigned demands inside its neighborhood graph.
    center_pieces: dict[int, list[tuple[ParamTuple, BipartiteGraph]]] = {}
    for w, assigned in sorted(per_center.items()):
        local, orig = neighborhood_subgraph(g, demand_set, w)
        to_local = {v: i for i, v in enumerate(orig)}
        star = Graph(local.n, [(to_local[a], to_local[b]) for a, b in assigned])
        center_pieces[w] = decompose(star, lam, seed=seed)

    tau_need: dict[ParamTuple, int] = {}
    for pieces in center_pieces.values():
        seen: dict[ParamTuple, int] = {}
        for tau, _ in pieces:
            seen[tau] = seen.get(tau, 0) + 1
        for tau, count in seen.items():
            tau_need[tau] = max(tau_need.get(tau, 0), count)
    L: list[ParamTuple] = []
    for tau in sorted(tau_need):
        L.extend([tau] * tau_need[tau])

    lp, index = build_ld2s_lp(g, demand_set, lam, q, L)
    assignment = {name: 1.0 for e, name in index.x_edge.items() if e in h_edges}
    slots_of: dict[ParamTuple, list[int]] = {}
    for i, tau in enumerate(L):
        slots_of.setdefault(tau, []).append(i)
    for w, pieces in center_pieces.items():
        used: dict[ParamTuple, int] = {}
        for tau, piece in pieces:
            rank = used.get(tau, 0)
            used[tau] = rank + 1
            blk = index.block(w, slots_of[tau][rank])
            assert blk is not None, "certificate block was pruned away"
            # Pieces already use the local ids of the center's neighborhood
            # graph; side 0 goes to the even cover copy.
            cover_vertices = ([2 * v for v in piece.side0]
                              + [2 * v + 1 for v in piece.side1])
            cover_edges = [(2 * u, 2 * v + 1) for u, v in piece.edges]
            assignment.update(integral_lift(blk.smes.cover, cover_vertices,
                                            cover_edges, q, blk.smes.prefix))
            assignment[blk.smes.z_empty] = 1.0
            for v in piece.vertices:
                assignment[blk.smes.z_vertex[blk.orig_ids[v]]] = 1.0
            for u, v in piece.edges:
                a, b = sorted((blk.orig_ids[u], blk.orig_ids[v]))
                assignment[blk.smes.z_edge[(a, b)]] = 1.0
    return lp, index, assignment, lam, L
