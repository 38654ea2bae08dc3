"""Randomized rounding of lifted dense-subgraph solutions.

Three rounding paths share one output type:

- small_degree_rounding: one heavy LP-value bucket plus two subsamples,
  always applicable, guarantee degrades with d0.
- high_degree_rounding: direct per-side sampling, used when some bipartite
  stage graph has max degree above the derived trigger.
- faithful_smes: the caterpillar bucketing pipeline; walks the template steps,
  fires one of the two halting rules, and post-processes the skewed output
  into a faithful or weakly-faithful one.

All lifted values are accessed through an evaluator callable mapping a
collection of ground elements (see relax.vertex_element / edge_element) to the
subset value; a plain name->value mapping with unprefixed names is also
accepted.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Mapping, NamedTuple, Sequence

from .graphs import BipartiteGraph, Graph, GraphError, ParamTuple, double_cover
from .params import (CaterpillarTemplate, ParameterError, build_caterpillar,
                     derive_params)
from .relax import canonical_subset, edge_element, subset_name, vertex_element
from .seeds import child_seed, rng_for

Edge = tuple[int, int]
Evaluator = Callable[[Iterable[tuple]], float]

__all__ = [
    "BucketStep",
    "BucketingTrace",
    "DEFAULT_CONSTANTS",
    "EmbeddingLimitError",
    "HSubgraph",
    "RoundedSubgraph",
    "RoundingConstants",
    "RoundingFailure",
    "amplify_weakly_faithful",
    "bucket_caterpillars",
    "check_simplified_conditions",
    "faithful_smes",
    "general_from_bipartite",
    "high_degree_rounding",
    "skewed_to_faithful",
    "small_degree_rounding",
]


@dataclass(frozen=True)
class RoundingConstants:
    """Every soft-constant knob of the rounding stage in one place."""

    step1_constant: float = 1.0      # multiplier on the max-degree trigger
    prune_constant: float = 1.0      # multiplier on the d_b/polylog retention bar
    embedding_cap: int = 10_000_000  # hard cap on enumerated embeddings

    def polylog(self, n: int) -> float:
        return (1.0 + math.log(max(1, n))) ** 2


DEFAULT_CONSTANTS = RoundingConstants()


class RoundingFailure(RuntimeError):
    """The caterpillar stage could not produce an output; trace attached."""

    def __init__(self, message: str, trace: "BucketingTrace | None" = None):
        super().__init__(message)
        self.trace = trace


class EmbeddingLimitError(RuntimeError):
    """Embedding enumeration exceeded the configured cap."""


@dataclass(frozen=True)
class RoundedSubgraph:
    """A sampled subgraph plus bookkeeping about how it was produced.

    guarantee is one of "faithful", "weakly-faithful", "skewed"; phi is the
    weak-faithfulness rate (1.0 unless weakly-faithful). sides carries the
    per-side vertex split when the host was bipartite.
    """

    vertices: frozenset[int]
    edges: frozenset[Edge]
    mode: str
    guarantee: str
    phi: float = 1.0
    clamps: int = 0
    sides: tuple[frozenset[int], frozenset[int]] | None = None
    notes: tuple[str, ...] = ()

    def __post_init__(self):
        for u, w in self.edges:
            if u not in self.vertices or w not in self.vertices:
                raise GraphError(f"edge ({u},{w}) endpoint outside the vertex set")
        if self.sides is not None:
            s0, s1 = self.sides
            if s0 & s1:
                raise GraphError("side sets overlap")
            if (s0 | s1) != self.vertices:
                raise GraphError("side sets do not cover the vertex set")


def _normalize_evaluator(y) -> Evaluator:
    if callable(y):
        return y
    values: Mapping[str, float] = y

    def evaluate(elements):
        return values.get(subset_name(canonical_subset(elements)), 0.0)

    return evaluate


def _scale_class(x: float) -> int:
    """floor(log2(x)) for x > 0, exact at powers of two."""
    mantissa, exponent = math.frexp(x)
    return exponent - 1


def _heaviest(groups: Mapping, weight_of) -> tuple:
    """Group with the largest total weight; ties go to the smallest key."""
    best_key = None
    best = -math.inf
    for key in sorted(groups):
        total = sum(weight_of(item) for item in groups[key])
        if total > best:
            best_key, best = key, total
    return best_key, groups[best_key]


# ---------------------------------------------------------------------------
# Direct rounding paths


def small_degree_rounding(graph: BipartiteGraph, tau: ParamTuple,
                          y_vertex: Mapping[int, float],
                          y_edge: Mapping[Edge, float],
                          seed: int) -> RoundedSubgraph:
    """One heavy bucket, a side-1 vertex sample, then an edge subsample.

    Applicable to any parameters; the per-item inclusion probabilities stay
    within ~d0 times the LP values. Guarantees |E*| <= m = k0*d0 outright.
    """
    rng = rng_for(seed, "small-degree")
    m = tau.m
    buckets: dict[tuple[int, int, int], list[Edge]] = {}
    for edge in graph.edges:
        u, w = edge
        ye = y_edge.get(edge, 0.0)
        yu = y_vertex.get(u, 0.0)
        yw = y_vertex.get(w, 0.0)
        if min(ye, yu, yw) <= 0.0:
            continue
        key = (_scale_class(ye), _scale_class(yu), _scale_class(yw))
        buckets.setdefault(key, []).append(edge)
    if not buckets:
        return RoundedSubgraph(frozenset(), frozenset(), mode="small-degree",
                               guarantee="faithful",
                               sides=(frozenset(), frozenset()),
                               notes=("empty: no positive edge mass",))
    _, heavy = _heaviest(buckets, lambda e: y_edge.get(e, 0.0))
    heavy = sorted(heavy)
    u1 = sorted({w for _, w in heavy})
    chosen_u1 = set(rng.sample(u1, min(tau.k1, len(u1))))
    hit = [e for e in heavy if e[1] in chosen_u1]
    kept: list[Edge] = []
    if hit:
        target = len(hit) * (m / len(heavy)) * (len(u1) / tau.k1)
        take = max(0, min(len(hit), math.floor(target + 1e-9), m))
        kept = sorted(rng.sample(hit, take))
    assert len(kept) <= m
    vertices = frozenset(v for e in kept for v in e)
    side0 = frozenset(v for v in vertices if graph.side_of(v) == 0)
    return RoundedSubgraph(vertices, frozenset(kept), mode="small-degree",
                           guarantee="faithful",
                           sides=(side0, vertices - side0))


def high_degree_rounding(graph: BipartiteGraph, side_of_s: int, tau: ParamTuple,
                         f: float, y_vertex: Mapping[int, float],
                         y_edge: Mapping[Edge, float], seed: int, *,
                         degree_trigger: float | None = None,
                         constants: RoundingConstants = DEFAULT_CONSTANTS
                         ) -> RoundedSubgraph:
    """Sample ~k_b*f vertices per side, then keep edges at y_e/(y_u y_w f^2).

    graph's side 0 is the S side; side_of_s says which instance side (hence
    which k_b) that is. Only sound above the max-degree trigger; when
    degree_trigger is given the precondition is enforced.
    """
    if side_of_s not in (0, 1):
        raise GraphError(f"side_of_s must be 0 or 1, got {side_of_s}")
    max_degree = max((graph.degree(v) for v in graph.vertices), default=0)
    if degree_trigger is not None and max_degree < degree_trigger:
        raise GraphError(
            f"degree trigger not met: max degree {max_degree} < {degree_trigger:.6g}")
    # Average-vs-max degree stays within the polylog window per side, over
    # the vertices actually covered by an edge.
    polylog = constants.polylog(graph.n)
    for b in (0, 1):
        degrees = [graph.degree(v) for v in graph.side(b) if graph.degree(v) > 0]
        if degrees and max(degrees) > polylog * (sum(degrees) / len(degrees)) + 1e-9:
            raise GraphError(
                f"side {b} degree spread {max(degrees)} vs mean "
                f"{sum(degrees) / len(degrees):.3g} exceeds the polylog window")

    k_s = tau.k0 if side_of_s == 0 else tau.k1
    k_w = tau.k1 if side_of_s == 0 else tau.k0
    notes: list[str] = []
    rng = rng_for(seed, "high-degree")
    chosen: list[set[int]] = []
    for side_vertices, k_b, label in ((graph.side0, k_s, "S"), (graph.side1, k_w, "W")):
        want = math.ceil(k_b * f - 1e-9)
        take = min(want, len(side_vertices))
        if take < want:
            notes.append(f"{label} side capped at {take} of {want}")
        chosen.append(set(rng.sample(sorted(side_vertices), take)))
    chosen_s, chosen_w = chosen

    clamps = 0
    kept: list[Edge] = []
    for edge in graph.edges:
        u, w = edge
        if u not in chosen_s or w not in chosen_w:
            continue
        ye = y_edge.get(edge, 0.0)
        if ye <= 0.0:
            continue
        yu = y_vertex.get(u, 0.0)
        yw = y_vertex.get(w, 0.0)
        if yu <= 0.0 or yw <= 0.0:
            raise GraphError(f"edge ({u},{w}) has positive value but a zero endpoint")
        p = ye / (yu * yw * f * f)
        if p > 1.0:
            p = 1.0
            clamps += 1
        if rng.random() < p:
            kept.append(edge)
    return RoundedSubgraph(frozenset(chosen_s | chosen_w), frozenset(kept),
                           mode="high-degree", guarantee="faithful",
                           clamps=clamps,
                           sides=(frozenset(chosen_s), frozenset(chosen_w)),
                           notes=tuple(notes))


# ---------------------------------------------------------------------------
# Caterpillar bucketing


class _Extension(NamedTuple):
    embedding: tuple[int, ...]
    weight: float            # value of the extended prefix edge set
    lam: tuple[int, ...]     # leaf tuple before this step's edge
    u: int                   # backbone tip image
    w: int                   # new vertex image
    vertex_value: float      # y of the new vertex
    edge_value: float        # y of the new host edge
    leaf_value: float        # y of lam + new vertex, as a vertex set


@dataclass(frozen=True)
class HSubgraph:
    """Per-leaf-tuple stage subgraph: tip images, new images, final edges."""

    u_vertices: tuple[int, ...]
    w_vertices: tuple[int, ...]
    edges: tuple[Edge, ...]


@dataclass(frozen=True)
class BucketStep:
    t: int
    kind: str                                     # "B" or "H"
    side_of_s: int                                # host side of S_t
    s_vertices: tuple[int, ...]                   # S_t
    embeddings: tuple[tuple[int, ...], ...]       # B_t
    weight: float                                 # sum of prefix values over B_t
    lambdas: tuple[tuple[int, ...], ...]          # leaf tuples present in B_t
    kept_lambdas: tuple[tuple[int, ...], ...]     # survivors of the prune
    survivors: tuple[tuple[int, ...], ...]        # B_{t+1}
    w_vertices: tuple[int, ...]                   # W_t
    e_edges: tuple[Edge, ...]                     # E_t
    h_subgraphs: Mapping[tuple[int, ...], HSubgraph]
    retention: Mapping[tuple[int, ...], float]    # extended/base weight per d_b
    m_prime: float
    k0_prime: float
    k1_prime: float
    g_t: BipartiteGraph = field(compare=False)
    g_max_degree: int = 0
    stage_notes: tuple[str, ...] = ()


@dataclass(frozen=True)
class BucketingTrace:
    template: CaterpillarTemplate
    tau: ParamTuple
    host_n: int
    steps: tuple[BucketStep, ...]
    failure: str | None = None

    def describe(self) -> str:
        lines = [f"caterpillar ({self.template.r},{self.template.s}) "
                 f"on host n={self.host_n}, tau={tuple(self.tau)}"]
        for step in self.steps:
            lines.append(
                f"step {step.t} [{step.kind}] side={step.side_of_s}: "
                f"|B|={len(step.embeddings)} weight={step.weight:.6g} "
                f"|S|={len(step.s_vertices)}")
            for note in step.stage_notes:
                lines.append(f"  {note}")
            lines.append(
                f"  kept {len(step.kept_lambdas)}/{len(step.lambdas)} leaf tuples; "
                f"|B next|={len(step.survivors)} |W|={len(step.w_vertices)} "
                f"|E|={len(step.e_edges)} maxdeg={step.g_max_degree}")
            lines.append(
                f"  expectations: m'={step.m_prime:.6g} "
                f"k0'={step.k0_prime:.6g} k1'={step.k1_prime:.6g}")
        if self.failure:
            lines.append(f"failure: {self.failure}")
        return "\n".join(lines)


def _assert_factor_two(values: Sequence[float], label: str) -> None:
    if values:
        low, high = min(values), max(values)
        assert high <= 2.0 * low * (1.0 + 1e-9), \
            f"{label} spread {high}/{low} exceeds factor 2"


def bucket_caterpillars(graph: BipartiteGraph, tau: ParamTuple, y,
                        template: CaterpillarTemplate,
                        constants: RoundingConstants = DEFAULT_CONSTANTS
                        ) -> BucketingTrace:
    """Enumerate template embeddings step by step, keeping one uniform bucket.

    Embeddings are homomorphic (vertices may repeat). Each step extends the
    backbone tip by one host edge, selects the heaviest factor-2 bucket on
    four LP values and two multiplicity counts, then prunes leaf tuples whose
    surviving weight dropped below d_b/polylog of their incoming weight.
    """
    y = _normalize_evaluator(y)
    polylog = constants.polylog(graph.n)
    steps_out: list[BucketStep] = []
    failure: str | None = None

    # Initialization: heaviest factor-2 bucket of side-0 vertices by value.
    init_buckets: dict[int, list[tuple[int, float]]] = {}
    for v in graph.side(0):
        value = y((vertex_element(v),))
        if value > 0.0:
            init_buckets.setdefault(_scale_class(value), []).append((v, value))
    if not init_buckets:
        return BucketingTrace(template, tau, graph.n, (),
                              failure="no positive vertex mass on side 0")
    _, first = _heaviest(init_buckets, lambda item: item[1])
    weights = {(v,): value for v, value in first}
    embeddings: tuple[tuple[int, ...], ...] = tuple(sorted(weights))
    s_vertices = tuple(v for (v,) in embeddings)
    enumerated = len(embeddings)

    for t in range(1, template.s + 1):
        kind = template.steps[t - 1]
        side_of_s = template.side_of_tip(t)
        tip_slot = template.rightmost[t - 1]
        leaf_slots = template.leaf_slots(t)
        d_b = tau.d0 if side_of_s == 0 else tau.d1
        step_weight = sum(weights[emb] for emb in embeddings)

        base_lambda_weight: dict[tuple[int, ...], float] = {}
        for emb in embeddings:
            lam = tuple(emb[j] for j in leaf_slots)
            base_lambda_weight[lam] = base_lambda_weight.get(lam, 0.0) + weights[emb]
        lambdas = tuple(sorted(base_lambda_weight))

        prefix_edges = template.edges[:t]
        extensions: list[_Extension] = []
        for emb in embeddings:
            u = emb[tip_slot]
            lam = tuple(emb[j] for j in leaf_slots)
            for w in graph.neighbors(u):
                enumerated += 1
                if enumerated > constants.embedding_cap:
                    raise EmbeddingLimitError(
                        f"embedding enumeration exceeded {constants.embedding_cap}")
                new_emb = emb + (w,)
                value = y(tuple(edge_element(new_emb[p], new_emb[c])
                                for p, c in prefix_edges))
                if value <= 0.0:
                    continue
                vertex_value = y((vertex_element(w),))
                edge_value = y((edge_element(u, w),))
                leaf_value = y(tuple(vertex_element(x) for x in lam)
                               + (vertex_element(w),))
                # The level-2 system has no edge-closure rows, so positive
                # prefix mass can sit on a zero-mass vertex or leaf; such
                # extensions are never sampleable and must not share a
                # scale class with real ones.
                if min(vertex_value, edge_value, leaf_value) <= 0.0:
                    continue
                extensions.append(_Extension(
                    embedding=new_emb, weight=value, lam=lam, u=u, w=w,
                    vertex_value=vertex_value, edge_value=edge_value,
                    leaf_value=leaf_value))
        if not extensions:
            failure = f"step {t}: no positive-weight extensions"
            break

        notes = [f"extensions: {len(extensions)}"]
        stage1_groups: dict[tuple[int, int, int, int], list[_Extension]] = {}
        for ext in extensions:
            key = (_scale_class(ext.vertex_value), _scale_class(ext.edge_value),
                   _scale_class(ext.leaf_value), _scale_class(ext.weight))
            stage1_groups.setdefault(key, []).append(ext)
        key1, stage1 = _heaviest(stage1_groups, lambda ext: ext.weight)
        notes.append(f"stage1: {len(stage1_groups)} buckets, kept {key1} "
                     f"with {len(stage1)} embeddings")

        group_counts = Counter((ext.lam, ext.u, ext.w) for ext in stage1)
        stage2_groups: dict[int, list[_Extension]] = {}
        for ext in stage1:
            cls = _scale_class(group_counts[(ext.lam, ext.u, ext.w)])
            stage2_groups.setdefault(cls, []).append(ext)
        key2, stage2 = _heaviest(stage2_groups, lambda ext: ext.weight)
        notes.append(f"stage2: {len(stage2_groups)} buckets, kept {key2} "
                     f"with {len(stage2)} embeddings")

        pair_counts = Counter((ext.lam, ext.w) for ext in stage2)
        stage3_groups: dict[int, list[_Extension]] = {}
        for ext in stage2:
            cls = _scale_class(pair_counts[(ext.lam, ext.w)])
            stage3_groups.setdefault(cls, []).append(ext)
        key3, stage3 = _heaviest(stage3_groups, lambda ext: ext.weight)
        notes.append(f"stage3: {len(stage3_groups)} buckets, kept {key3} "
                     f"with {len(stage3)} embeddings")

        extended_lambda_weight: dict[tuple[int, ...], float] = {}
        for ext in stage3:
            extended_lambda_weight[ext.lam] = \
                extended_lambda_weight.get(ext.lam, 0.0) + ext.weight
        bar = constants.prune_constant * d_b / polylog
        retention = {lam: extended / (d_b * base_lambda_weight[lam])
                     for lam, extended in sorted(extended_lambda_weight.items())}
        kept_lambdas = tuple(
            lam for lam, extended in sorted(extended_lambda_weight.items())
            if extended >= bar * base_lambda_weight[lam] - 1e-12)
        survivors = [ext for ext in stage3 if ext.lam in set(kept_lambdas)]
        if not survivors:
            failure = f"step {t}: every leaf tuple fell below the retention bar"
            break

        # Post-selection uniformity, by construction of the factor-2 classes.
        _assert_factor_two([ext.vertex_value for ext in survivors], "vertex value")
        _assert_factor_two([ext.edge_value for ext in survivors], "edge value")
        _assert_factor_two([ext.leaf_value for ext in survivors], "leaf value")
        _assert_factor_two([ext.weight for ext in survivors], "prefix value")
        survivor_groups = Counter((ext.lam, ext.u, ext.w) for ext in survivors)
        _assert_factor_two(list(survivor_groups.values()), "final-edge multiplicity")
        survivor_pairs = Counter((ext.lam, ext.w) for ext in survivors)
        _assert_factor_two(list(survivor_pairs.values()), "new-vertex multiplicity")

        h_members: dict[tuple[int, ...], set[Edge]] = {lam: set() for lam in kept_lambdas}
        for ext in survivors:
            h_members[ext.lam].add((ext.u, ext.w))
        h_subgraphs = {}
        for lam in kept_lambdas:
            pairs = sorted(h_members[lam])
            h_subgraphs[lam] = HSubgraph(
                u_vertices=tuple(sorted({u for u, _ in pairs})),
                w_vertices=tuple(sorted({w for _, w in pairs})),
                edges=tuple(pairs))
        e_edges = tuple(sorted({(ext.u, ext.w) for ext in survivors}))
        w_vertices = tuple(sorted({ext.w for ext in survivors}))
        g_t = BipartiteGraph(s_vertices, w_vertices, e_edges)
        g_max_degree = max((g_t.degree(v) for v in g_t.vertices), default=0)

        m_prime = sum(len(h.edges) for h in h_subgraphs.values()) / len(kept_lambdas)
        mean_u = sum(len(h.u_vertices) for h in h_subgraphs.values()) / len(kept_lambdas)
        mean_w = sum(len(h.w_vertices) for h in h_subgraphs.values()) / len(kept_lambdas)
        k0_prime, k1_prime = (mean_u, mean_w) if side_of_s == 0 else (mean_w, mean_u)

        steps_out.append(BucketStep(
            t=t, kind=kind, side_of_s=side_of_s, s_vertices=s_vertices,
            embeddings=embeddings, weight=step_weight, lambdas=lambdas,
            kept_lambdas=kept_lambdas,
            survivors=tuple(ext.embedding for ext in survivors),
            w_vertices=w_vertices, e_edges=e_edges, h_subgraphs=h_subgraphs,
            retention=retention, m_prime=m_prime, k0_prime=k0_prime,
            k1_prime=k1_prime, g_t=g_t, g_max_degree=g_max_degree,
            stage_notes=tuple(notes)))

        weights = {ext.embedding: ext.weight for ext in survivors}
        embeddings = tuple(sorted(weights))
        if kind == "B":
            s_vertices = w_vertices
        else:
            tip_next = template.rightmost[t]
            s_vertices = tuple(sorted({emb[tip_next] for emb in embeddings}))

    return BucketingTrace(template, tau, graph.n, tuple(steps_out), failure)


# ---------------------------------------------------------------------------
# The conditions, the skew fix-up, and the full pipeline


def check_simplified_conditions(k0_prime: float, k1_prime: float,
                                m_prime: float, tau: ParamTuple,
                                f: float) -> bool:
    """Closed-inequality test for the three average-degree conditions."""
    if m_prime <= 0.0 or k0_prime <= 0.0 or k1_prime <= 0.0:
        return False
    cond1 = m_prime / k0_prime >= tau.d0 / f - 1e-12
    cond2 = m_prime / k1_prime >= tau.d1 / f - 1e-12
    cond3 = (m_prime * (tau.k0 * f / k0_prime) * (tau.k1 * f / k1_prime)
             >= tau.m - 1e-9)
    return cond1 and cond2 and cond3


def skewed_to_faithful(result: RoundedSubgraph, k0_prime: float,
                       k1_prime: float, m_prime: float, tau: ParamTuple,
                       f: float, seed: int) -> RoundedSubgraph:
    """Convert a skewed proportional rounding into a (weakly) faithful one.

    Case 1 (both sides oversampled): trim each side to the k_b f / k_b' rate
    and equalize the edge rate down to m/(m' rho). Case 2: keep the side with
    the smaller k_b'/k_b ratio whole, subsample the other so the two rates
    match; the output is weakly faithful with phi = min_b k_b'/(k_b f).
    Either way side b never exceeds k_b*f vertices.
    """
    if result.sides is None:
        raise GraphError("skewed_to_faithful needs per-side vertex sets")
    if min(k0_prime, k1_prime, m_prime) <= 0.0:
        raise GraphError("skewed parameters must be positive")
    side0, side1 = (sorted(s) for s in result.sides)
    rng = rng_for(seed, "faithful")
    caps = (math.floor(tau.k0 * f + 1e-9), math.floor(tau.k1 * f + 1e-9))
    notes = list(result.notes)

    def sample_side(members: list[int], rate: float, cap: int) -> set[int]:
        want = math.ceil(rate * len(members) - 1e-9)
        take = min(len(members), want, cap)
        if take < want:
            notes.append(f"side sample capped at {take} of {want}")
        return set(rng.sample(members, take))

    if k0_prime >= tau.k0 * f - 1e-9 and k1_prime >= tau.k1 * f - 1e-9:
        keep0 = sample_side(side0, tau.k0 * f / k0_prime, caps[0])
        keep1 = sample_side(side1, tau.k1 * f / k1_prime, caps[1])
        rho = (tau.k0 * f / k0_prime) * (tau.k1 * f / k1_prime)
        p_edge = min(1.0, tau.m / (m_prime * rho))
        kept_edges = []
        for edge in sorted(result.edges):
            if edge[0] in keep0 and edge[1] in keep1:
                if p_edge >= 1.0 or rng.random() < p_edge:
                    kept_edges.append(edge)
        guarantee, phi = "faithful", 1.0
    else:
        ratios = (k0_prime / tau.k0, k1_prime / tau.k1)
        whole = 0 if ratios[0] <= ratios[1] else 1
        other = 1 - whole
        primes = (k0_prime, k1_prime)
        rate = ratios[whole] / ratios[other]
        whole_members = side0 if whole == 0 else side1
        other_members = side1 if whole == 0 else side0
        kept_whole = set(whole_members)
        if len(kept_whole) > caps[whole]:
            notes.append(f"whole side trimmed to the cap {caps[whole]}")
            kept_whole = set(rng.sample(sorted(kept_whole), caps[whole]))
        # The matched-rate subsample rounds down; the cap still applies.
        take_other = min(len(other_members),
                         math.floor(rate * len(other_members) + 1e-9),
                         caps[other])
        kept_other = set(rng.sample(other_members, take_other))
        keep0, keep1 = (kept_whole, kept_other) if whole == 0 else (kept_other, kept_whole)
        kept_edges = [e for e in sorted(result.edges)
                      if e[0] in keep0 and e[1] in keep1]
        guarantee = "weakly-faithful"
        phi = min(1.0, primes[whole] / ((tau.k0 if whole == 0 else tau.k1) * f))
    assert len(keep0) <= caps[0] and len(keep1) <= caps[1]
    return RoundedSubgraph(frozenset(keep0 | keep1), frozenset(kept_edges),
                           mode=result.mode, guarantee=guarantee, phi=phi,
                           clamps=result.clamps,
                           sides=(frozenset(keep0), frozenset(keep1)),
                           notes=tuple(notes))


def faithful_smes(graph: BipartiteGraph, tau: ParamTuple, q: int, y, seed: int,
                  constants: RoundingConstants = DEFAULT_CONSTANTS
                  ) -> RoundedSubgraph:
    """Caterpillar rounding: walk the trace, fire a halting rule, fix skew.

    Raises RoundingFailure (trace attached) when no step fires; callers fall
    back to small_degree_rounding and report it.
    """
    params = derive_params(graph.n, tau.k0, tau.k1, tau.d0, tau.d1, q)
    if params.small_degree_mode:
        raise ParameterError(
            f"factor {params.f:.4g} exceeds d0={tau.d0}: "
            "use small_degree_rounding for this instance")
    y = _normalize_evaluator(y)
    template = build_caterpillar(params.r, params.s)
    trace = bucket_caterpillars(graph, tau, y, template, constants)
    if not trace.steps:
        raise RoundingFailure(f"bucketing failed: {trace.failure}", trace)

    for step in trace.steps:
        trigger = constants.step1_constant * params.degree_bound
        if step.g_max_degree >= trigger:
            y_vertex = {v: y((vertex_element(v),)) for v in step.g_t.vertices}
            y_edge = {e: y((edge_element(*e),)) for e in step.g_t.edges}
            result = high_degree_rounding(
                step.g_t, step.side_of_s, tau, params.f, y_vertex, y_edge,
                child_seed(seed, f"step1:{step.t}"),
                degree_trigger=trigger, constants=constants)
            note = f"degree trigger at step {step.t}"
            if step.side_of_s == 1:
                # Stage graph had S on host side 1: restore host side order.
                result = replace(
                    result, sides=(result.sides[1], result.sides[0]),
                    edges=frozenset((w, u) for u, w in result.edges),
                    notes=result.notes + (note,))
            else:
                result = replace(result, notes=result.notes + (note,))
            return result
        if step.kept_lambdas and check_simplified_conditions(
                step.k0_prime, step.k1_prime, step.m_prime, tau, params.f):
            rng = rng_for(seed, f"step3:{step.t}")
            lam = step.kept_lambdas[rng.randrange(len(step.kept_lambdas))]
            h = step.h_subgraphs[lam]
            if step.side_of_s == 0:
                side0, side1 = h.u_vertices, h.w_vertices
                edges = h.edges
            else:
                side0, side1 = h.w_vertices, h.u_vertices
                edges = tuple((w, u) for u, w in h.edges)
            skewed = RoundedSubgraph(
                frozenset(side0) | frozenset(side1), frozenset(edges),
                mode="caterpillar", guarantee="skewed",
                sides=(frozenset(side0), frozenset(side1)),
                notes=(f"leaf tuple {lam} at step {step.t}",))
            return skewed_to_faithful(skewed, step.k0_prime, step.k1_prime,
                                      step.m_prime, tau, params.f,
                                      child_seed(seed, f"faithful:{step.t}"))
    detail = f"; {trace.failure}" if trace.failure else ""
    raise RoundingFailure(f"no halting rule fired through step "
                          f"{template.s}{detail}", trace)


def amplify_weakly_faithful(round_once: Callable[[int], RoundedSubgraph],
                            phi: float, seed: int) -> RoundedSubgraph:
    """Union of ceil(1/phi) independent runs of a weakly-faithful rounder."""
    if not 0.0 < phi <= 1.0:
        raise ValueError(f"phi must be in (0, 1], got {phi}")
    runs = max(1, math.ceil(1.0 / phi - 1e-9))
    vertices: set[int] = set()
    edges: set[Edge] = set()
    sides: list[set[int]] | None = [set(), set()]
    clamps = 0
    mode = "amplified"
    for i in range(runs):
        sub = round_once(child_seed(seed, f"amplify:{i}"))
        vertices |= sub.vertices
        edges |= sub.edges
        clamps += sub.clamps
        mode = sub.mode
        if sub.sides is None:
            sides = None
        elif sides is not None:
            sides[0] |= sub.sides[0]
            sides[1] |= sub.sides[1]
    return RoundedSubgraph(
        frozenset(vertices), frozenset(edges), mode=mode,
        guarantee="faithful", phi=1.0, clamps=clamps,
        sides=None if sides is None else (frozenset(sides[0]), frozenset(sides[1])),
        notes=(f"union of {runs} runs at phi={phi:.6g}",))


def general_from_bipartite(g: Graph, y,
                           rounder: Callable[[BipartiteGraph, Evaluator, int],
                                             RoundedSubgraph],
                           seed: int) -> RoundedSubgraph:
    """Round on the bipartite double cover and fold the two copies back.

    A base vertex is chosen when either of its copies is; each base edge has
    two cover copies, so the folded edge count is at least half the cover's.
    """
    cover = double_cover(g)
    sub = rounder(cover, _normalize_evaluator(y), child_seed(seed, "cover"))
    vertices = frozenset(c // 2 for c in sub.vertices)
    edges = set()
    for a, b in sub.edges:
        u, w = a // 2, b // 2
        edges.add((min(u, w), max(u, w)))
    assert len(edges) >= len(sub.edges) / 2.0
    return RoundedSubgraph(vertices, frozenset(edges), mode=sub.mode,
                           guarantee=sub.guarantee, phi=sub.phi,
                           clamps=sub.clamps, sides=None,
                           notes=sub.notes + ("folded from the double cover",))
