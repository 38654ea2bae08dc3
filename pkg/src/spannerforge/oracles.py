"""Ground-truth solvers, instance generators, and Monte-Carlo rounding checks.

The brute-force solvers here are deliberately independent of the LP machinery:
they enumerate or branch over raw edge/vertex subsets so they can serve as
referees for the approximation pipeline.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping

import networkx as nx

from .graphs import Graph, GraphError
from .params import ParameterError
from .relax import edge_element, vertex_element
from .rounding import (DEFAULT_CONSTANTS, RoundedSubgraph, RoundingConstants,
                       _normalize_evaluator)
from .seeds import rng_for, trial_seed

Edge = tuple[int, int]

Z_95 = 1.959963984540054
VERDICT_SLACK = 1.5

# Size guards for the exact solvers. The decision search handles more than the
# raw subset enumeration, but both are exponential in the worst case.
LD2S_VERTEX_CAP = 16
LD2S_EDGE_CAP = 48
LD2S_ENUM_EDGE_CAP = 24
SMES_VERTEX_CAP = 20


def wilson_bounds(successes: int, trials: int, z: float = Z_95) -> tuple[float, float]:
    """Wilson score interval for a binomial rate."""
    if trials < 1:
        raise ValueError("wilson_bounds needs at least one trial")
    if not 0 <= successes <= trials:
        raise ValueError("successes out of range")
    p_hat = successes / trials
    z2 = z * z
    denom = 1.0 + z2 / trials
    center = (p_hat + z2 / (2 * trials)) / denom
    half = z * math.sqrt(p_hat * (1 - p_hat) / trials + z2 / (4 * trials * trials)) / denom
    return max(0.0, center - half), min(1.0, center + half)


# ---------------------------------------------------------------------------
# exact minimum max-degree 2-spanner


def _normalize_demands(g: Graph, demands) -> list[Edge]:
    if demands is None:
        return list(g.edges)
    out = set()
    for (u, v) in demands:
        if not g.has_edge(u, v):
            raise GraphError(f"demand ({u}, {v}) is not an edge of the graph")
        out.add((min(u, v), max(u, v)))
    return sorted(out)


def _spanner_decision(g: Graph, demands: list[Edge], cap: int) -> set[Edge] | None:
    """Find an edge set of max degree <= cap covering every demand, or None."""
    adj = [set(g.neighbors(v)) for v in range(g.n)]
    common = {(u, v): sorted(adj[u] & adj[v]) for (u, v) in demands}

    # a vertex with degree <= cap reaches at most cap^2 others within 2 hops
    partners = [0] * g.n
    for (u, v) in demands:
        partners[u] += 1
        partners[v] += 1
    if max(partners) > cap * cap:
        return None

    chosen: set[Edge] = set()
    deg = [0] * g.n

    def covered(u: int, v: int) -> bool:
        if (u, v) in chosen:
            return True
        for w in common[(u, v)]:
            e1 = (u, w) if u < w else (w, u)
            e2 = (w, v) if w < v else (v, w)
            if e1 in chosen and e2 in chosen:
                return True
        return False

    def options(u: int, v: int) -> list[tuple[Edge, ...]]:
        opts: list[tuple[Edge, ...]] = []
        if deg[u] < cap and deg[v] < cap:
            opts.append(((u, v),))
        seen = {frozenset(opts[0])} if opts else set()
        for w in common[(u, v)]:
            e1 = (u, w) if u < w else (w, u)
            e2 = (w, v) if w < v else (v, w)
            need = tuple(e for e in (e1, e2) if e not in chosen)
            if not need:
                continue
            gain: dict[int, int] = {}
            for (a, b) in need:
                gain[a] = gain.get(a, 0) + 1
                gain[b] = gain.get(b, 0) + 1
            if any(deg[x] + dx > cap for x, dx in gain.items()):
                continue
            key = frozenset(need)
            if key not in seen:
                seen.add(key)
                opts.append(need)
        return opts

    def solve() -> bool:
        branch_opts = None
        for (u, v) in demands:
            if covered(u, v):
                continue
            opts = options(u, v)
            if not opts:
                return False
            if branch_opts is None or len(opts) < len(branch_opts):
                branch_opts = opts
                if len(opts) == 1:
                    break
        if branch_opts is None:
            return True
        for opt in sorted(branch_opts, key=len):
            for (a, b) in opt:
                chosen.add((a, b))
                deg[a] += 1
                deg[b] += 1
            if solve():
                return True
            for (a, b) in opt:
                chosen.discard((a, b))
                deg[a] -= 1
                deg[b] -= 1
        return False

    return set(chosen) if solve() else None


def _moore_witness(cap: int) -> list[Edge] | None:
    """Diameter-2 cap-regular graph on cap^2+1 vertices, or None if none exists.

    Any such graph decomposes into a root, its cap neighbors, and groups of
    cap-1 second-layer vertices per neighbor, with a perfect matching between
    every pair of groups; matchings out of the first group can be fixed to the
    identity by relabeling. Enumerating the rest settles existence.
    """
    n = cap * cap + 1
    if cap == 1:
        return [(0, 1)]
    groups: dict[int, list[int]] = {}
    nxt = cap + 1
    for i in range(1, cap + 1):
        groups[i] = list(range(nxt, nxt + cap - 1))
        nxt += cap - 1
    base: list[Edge] = [(0, i) for i in range(1, cap + 1)]
    for i in range(1, cap + 1):
        base.extend((i, x) for x in groups[i])
    pairs = [(i, j) for i in range(1, cap + 1) for j in range(i + 1, cap + 1)]
    free = [(i, j) for (i, j) in pairs if i != 1]
    identity = tuple(range(cap - 1))
    perms = list(itertools.permutations(range(cap - 1)))
    full = (1 << n) - 1
    for combo in itertools.product(perms, repeat=len(free)):
        matchings = dict(zip(free, combo))
        edges = list(base)
        for (i, j) in pairs:
            sigma = matchings.get((i, j), identity)
            edges.extend((groups[i][a], groups[j][sigma[a]]) for a in range(cap - 1))
        adj = [0] * n
        for (u, v) in edges:
            adj[u] |= 1 << v
            adj[v] |= 1 << u
        good = True
        for v in range(n):
            ball = adj[v] | (1 << v)
            rest = adj[v]
            while rest:
                w = (rest & -rest).bit_length() - 1
                ball |= adj[w]
                rest &= rest - 1
            if ball != full:
                good = False
                break
        if good:
            return sorted((min(u, v), max(u, v)) for (u, v) in edges)
    return None


def _diameter2_witness(n: int, cap: int, seed: int,
                       rounds: int = 20000) -> list[Edge] | None:
    """Hill-climb toward a max-degree-cap graph of diameter <= 2."""
    rng = rng_for(seed, f"diam2:{n}:{cap}")
    adj = [0] * n
    deg = [0] * n
    edges: set[Edge] = set()
    verts = list(range(n))
    for _ in range(10 * n * cap):
        u, v = rng.sample(verts, 2)
        e = (min(u, v), max(u, v))
        if e in edges or deg[u] >= cap or deg[v] >= cap:
            continue
        edges.add(e)
        adj[u] |= 1 << v
        adj[v] |= 1 << u
        deg[u] += 1
        deg[v] += 1
    full = (1 << n) - 1

    def bad_pairs() -> int:
        bad = 0
        for v in range(n):
            ball = adj[v] | (1 << v)
            rest = adj[v]
            while rest:
                w = (rest & -rest).bit_length() - 1
                ball |= adj[w]
                rest &= rest - 1
            bad += bin(full & ~ball).count("1")
        return bad // 2

    cur = bad_pairs()
    for _ in range(rounds):
        if cur == 0:
            return sorted(edges)
        u0, v0 = rng.choice(sorted(edges))
        edges.discard((u0, v0))
        adj[u0] &= ~(1 << v0)
        adj[v0] &= ~(1 << u0)
        deg[u0] -= 1
        deg[v0] -= 1
        cands = [(min(a, b), max(a, b))
                 for a in range(n) for b in range(a + 1, n)
                 if deg[a] < cap and deg[b] < cap
                 and (min(a, b), max(a, b)) not in edges]
        a, b = rng.choice(cands)
        edges.add((a, b))
        adj[a] |= 1 << b
        adj[b] |= 1 << a
        deg[a] += 1
        deg[b] += 1
        new = bad_pairs()
        if new <= cur:
            cur = new
        else:
            edges.discard((a, b))
            adj[a] &= ~(1 << b)
            adj[b] &= ~(1 << a)
            deg[a] -= 1
            deg[b] -= 1
            edges.add((u0, v0))
            adj[u0] |= 1 << v0
            adj[v0] |= 1 << u0
            deg[u0] += 1
            deg[v0] += 1
    return None if cur else sorted(edges)


def _clique_ld2s(n: int) -> tuple[int, tuple[Edge, ...]]:
    """Exact optimum for a complete graph with full demands.

    Every pair is a demand, so a witness is exactly a diameter-2 graph with
    bounded max degree, and n <= cap^2 + 1 is a hard counting bound. Two
    boundary sizes need exact knowledge rather than search: n == cap^2 + 1
    forces a Moore graph, and n == cap^2 is unattainable for cap >= 3
    (Erdos-Fajtlowicz-Hoffman; for cap == 3 the parity of the degree sum
    already rules it out).
    """
    cap = max(1, math.isqrt(n - 2) + 1) if n > 2 else 1
    while cap * cap + 1 < n:
        cap += 1
    while True:
        if n == cap * cap + 1:
            witness = _moore_witness(cap)
            if witness is not None:
                return cap, tuple(witness)
            cap += 1
            continue
        if n == cap * cap and cap >= 3:
            # Hill-climbing cannot certify nonexistence; skip the doomed cap.
            cap += 1
            continue
        for attempt in range(64):
            witness = _diameter2_witness(n, cap, seed=attempt)
            if witness is not None:
                return cap, tuple(witness)
        raise GraphError(
            f"witness search failed for the complete graph on {n} vertices "
            f"at degree {cap}")


def brute_ld2s(g: Graph, demands=None) -> tuple[int, tuple[Edge, ...]]:
    """Exact minimum max-degree over 2-spanners of g covering the demands.

    Returns (optimum, witness edges). The witness always attains the optimum
    exactly. Complete graphs with full demands take a counting-based fast
    path; everything else runs an ascending-degree decision search.
    """
    demand_list = _normalize_demands(g, demands)
    if not demand_list:
        return 0, ()
    all_pairs = g.n * (g.n - 1) // 2
    if g.m == all_pairs and len(demand_list) == all_pairs and g.n >= 5:
        return _clique_ld2s(g.n)
    if g.n > LD2S_VERTEX_CAP or g.m > LD2S_EDGE_CAP:
        raise GraphError(
            f"instance too large for the exact solver "
            f"(n={g.n} > {LD2S_VERTEX_CAP} or m={g.m} > {LD2S_EDGE_CAP})")
    for cap in range(1, g.max_degree() + 1):
        witness = _spanner_decision(g, demand_list, cap)
        if witness is not None:
            return cap, tuple(sorted(witness))
    raise GraphError("no spanner found below the trivial degree bound")


def brute_ld2s_exhaustive(g: Graph, demands=None) -> tuple[int, tuple[Edge, ...]]:
    """Raw 2^|E| cross-check for brute_ld2s; practical only for small m."""
    if g.m > LD2S_ENUM_EDGE_CAP:
        raise GraphError(
            f"subset enumeration capped at {LD2S_ENUM_EDGE_CAP} edges (m={g.m})")
    demand_list = _normalize_demands(g, demands)
    if not demand_list:
        return 0, ()
    edges = list(g.edges)
    m = len(edges)
    best_deg = g.max_degree()
    best_mask = (1 << m) - 1
    for mask in range(1 << m):
        adj = [0] * g.n
        deg = [0] * g.n
        worst = 0
        rest = mask
        while rest:
            i = (rest & -rest).bit_length() - 1
            rest &= rest - 1
            u, v = edges[i]
            adj[u] |= 1 << v
            adj[v] |= 1 << u
            deg[u] += 1
            deg[v] += 1
            worst = max(worst, deg[u], deg[v])
            if worst >= best_deg:
                break
        if worst >= best_deg:
            continue
        if all(adj[u] & (1 << v) or adj[u] & adj[v] for (u, v) in demand_list):
            best_deg = worst
            best_mask = mask
    witness = tuple(sorted(edges[i] for i in range(m) if best_mask >> i & 1))
    return best_deg, witness


# ---------------------------------------------------------------------------
# exact smallest m-edge subgraph


def brute_smes(g: Graph, m: int) -> tuple[int, tuple[int, ...]]:
    """Fewest vertices whose induced subgraph has at least m edges.

    Returns (optimum size, witness vertex tuple). Subsets are enumerated in
    increasing size, so the first hit is optimal.
    """
    if g.n > SMES_VERTEX_CAP:
        raise GraphError(
            f"subset enumeration capped at {SMES_VERTEX_CAP} vertices (n={g.n})")
    if m > g.m:
        raise GraphError(f"cannot cover {m} edges; the graph has only {g.m}")
    if m <= 0:
        return 0, ()
    adj = [0] * g.n
    for (u, v) in g.edges:
        adj[u] |= 1 << v
        adj[v] |= 1 << u
    for k in range(2, g.n + 1):
        for combo in itertools.combinations(range(g.n), k):
            mask = 0
            for v in combo:
                mask |= 1 << v
            count = sum(bin(adj[v] & mask).count("1") for v in combo) // 2
            if count >= m:
                return k, combo
    raise GraphError("unreachable: the full vertex set covers every edge")


# ---------------------------------------------------------------------------
# log-density instance generator


@dataclass(frozen=True)
class GeneratedInstance:
    """A generated host graph plus the planted structure, if any."""

    graph: Graph
    mode: str
    n: int
    alpha: float
    k: int
    beta: float
    seed: int
    plant_vertices: tuple[int, ...] = ()
    plant_edges: tuple[Edge, ...] = ()

    def metadata(self) -> dict:
        return {
            "mode": self.mode,
            "n": self.n,
            "alpha": self.alpha,
            "k": self.k,
            "beta": self.beta,
            "seed": self.seed,
            "edges": self.graph.m,
            "plant_vertices": list(self.plant_vertices),
            "plant_edges": [list(e) for e in self.plant_edges],
        }


def _near_regular_edges(members: tuple[int, ...], target: int,
                        seed: int) -> list[Edge]:
    """target distinct edges on members with degree spread at most one.

    Havel-Hakimi realizes the near-regular degree sequence, then seeded
    double-edge swaps and a random member relabeling scatter the placement.
    """
    k = len(members)
    if target == k * (k - 1) // 2:
        return [(members[i], members[j])
                for i in range(k) for j in range(i + 1, k)]
    base, extra = divmod(2 * target, k)
    rng = rng_for(seed, "plant-edges")
    skeleton = nx.havel_hakimi_graph([base + 1] * extra + [base] * (k - extra))
    if target >= 2 and k >= 4:
        try:
            nx.double_edge_swap(skeleton, nswap=10 * target,
                                max_tries=1000 * target,
                                seed=rng.randrange(2**31))
        except nx.NetworkXAlgorithmError:
            pass  # near-complete plants admit few swaps; relabeling still mixes
    relabel = list(members)
    rng.shuffle(relabel)
    edges = {(min(relabel[u], relabel[v]), max(relabel[u], relabel[v]))
             for (u, v) in skeleton.edges()}
    if len(edges) != target:
        raise GraphError("could not realize a simple near-regular plant")
    return sorted(edges)


def gen_dense_vs_random(n: int, alpha: float, k: int = 0, beta: float = 0.0,
                        mode: str = "random", seed: int = 0) -> GeneratedInstance:
    """Erdos-Renyi host at edge probability n^(alpha-1), optionally with a
    planted k-vertex subgraph carrying ceil(k^(1+beta)) near-regular edges."""
    if n < 1:
        raise ParameterError("n must be positive")
    if not 0 < alpha < 1:
        raise ParameterError("alpha must lie in (0, 1)")
    if mode not in ("random", "planted"):
        raise ParameterError(f"unknown mode {mode!r}")
    p = n ** (alpha - 1.0)
    rng = rng_for(seed, "er-edges")
    edges = {(u, v) for u in range(n) for v in range(u + 1, n)
             if rng.random() < p}
    if mode == "random":
        return GeneratedInstance(Graph(n, sorted(edges)), mode, n, alpha,
                                 k, beta, seed)
    if not 0 < beta < 1:
        raise ParameterError("beta must lie in (0, 1)")
    if not 1 <= k <= n:
        raise ParameterError("k must lie in [1, n]")
    target = math.ceil(k ** (1.0 + beta))
    if target > k * (k - 1) // 2:
        raise ParameterError(
            f"plant needs {target} edges but only {k * (k - 1) // 2} fit")
    members = tuple(sorted(rng_for(seed, "plant-vertices").sample(range(n), k)))
    plant = _near_regular_edges(members, target, seed)
    edges.update(plant)
    return GeneratedInstance(Graph(n, sorted(edges)), mode, n, alpha, k, beta,
                             seed, members, tuple(plant))


# ---------------------------------------------------------------------------
# connected-graph census


_ATLAS_CACHE: dict[int, tuple[Graph, ...]] = {}


def enumerate_connected_graphs(n: int) -> tuple[Graph, ...]:
    """All connected graphs on n vertices, one per isomorphism class (n <= 7)."""
    if not 1 <= n <= 7:
        raise GraphError("census available for 1 <= n <= 7 only")
    if n not in _ATLAS_CACHE:
        found = []
        for ag in nx.graph_atlas_g():
            if ag.number_of_nodes() != n:
                continue
            if not nx.is_connected(ag):
                continue
            found.append(Graph(n, sorted((min(u, v), max(u, v))
                                         for (u, v) in ag.edges())))
        _ATLAS_CACHE[n] = tuple(found)
    return _ATLAS_CACHE[n]


# ---------------------------------------------------------------------------
# Monte-Carlo faithfulness estimation


@dataclass(frozen=True)
class ConditionVerdict:
    name: str
    passed: bool
    margin: float
    detail: str = ""


@dataclass(frozen=True)
class FaithfulnessReport:
    """Empirical inclusion rates and the four faithfulness verdicts.

    Rates map each vertex/edge to (count, estimate, ci_low, ci_high). The
    margin of a verdict is the worst slack against its bound; positive means
    the bound held with room to spare.
    """

    trials: int
    f: float
    phi: float
    host_n: int
    vertex_mass: float
    edge_mass: float
    vertex_rates: Mapping[int, tuple[int, float, float, float]]
    edge_rates: Mapping[Edge, tuple[int, float, float, float]]
    max_vertices: int
    mean_vertices: float
    mean_edges: float
    conditions: tuple[ConditionVerdict, ...]
    uniformity: ConditionVerdict

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.conditions)

    def as_dict(self) -> dict:
        return {
            "trials": self.trials,
            "f": self.f,
            "phi": self.phi,
            "host_n": self.host_n,
            "vertex_mass": self.vertex_mass,
            "edge_mass": self.edge_mass,
            "max_vertices": self.max_vertices,
            "mean_vertices": self.mean_vertices,
            "mean_edges": self.mean_edges,
            "vertex_rates": {str(v): list(r) for v, r in
                             sorted(self.vertex_rates.items())},
            "edge_rates": {f"{u},{w}": list(r) for (u, w), r in
                           sorted(self.edge_rates.items())},
            "conditions": [
                {"name": c.name, "passed": c.passed, "margin": c.margin,
                 "detail": c.detail}
                for c in self.conditions],
            "uniformity": {"name": self.uniformity.name,
                           "passed": self.uniformity.passed,
                           "margin": self.uniformity.margin,
                           "detail": self.uniformity.detail},
            "passed": self.passed,
        }

    def describe(self) -> str:
        lines = [f"trials={self.trials} f={self.f:.6g} phi={self.phi:.6g}"
                 f" max|V*|={self.max_vertices}"
                 f" mean|V*|={self.mean_vertices:.4f}"
                 f" mean|E*|={self.mean_edges:.4f}"]
        for c in self.conditions + (self.uniformity,):
            state = "pass" if c.passed else "FAIL"
            lines.append(f"  {c.name}: {state} margin={c.margin:.6g}"
                         + (f" ({c.detail})" if c.detail else ""))
        return "\n".join(lines)


def _instance_vertices(instance) -> tuple[int, ...]:
    if hasattr(instance, "vertices"):
        return tuple(instance.vertices)
    return tuple(range(instance.n))


def estimate_faithfulness(rounder: Callable, instance, lp_values, f: float,
                          trials: int, seed: int, *, phi: float = 1.0,
                          constants: RoundingConstants = DEFAULT_CONSTANTS,
                          jobs: int = 1) -> FaithfulnessReport:
    """Run a rounder many times and test the faithfulness conditions.

    rounder(instance, evaluator, trial_seed) must return a RoundedSubgraph.
    Vertex rates are compared against phi*f*zeta_v, edge rates against
    phi*zeta_e (both with a noise allowance on the Wilson upper bound); the
    vertex-count cap is enforced on every trial; mean edge coverage is
    compared against the polylog-discounted LP edge mass.
    """
    if trials < 100:
        raise ValueError("need at least 100 trials for stable intervals")
    if f <= 0:
        raise ValueError("f must be positive")
    if not 0 < phi <= 1:
        raise ValueError("phi must lie in (0, 1]")
    evaluator = _normalize_evaluator(lp_values)
    verts = _instance_vertices(instance)
    edges = [tuple(e) for e in instance.edges]
    zeta_v = {v: float(evaluator((vertex_element(v),))) for v in verts}
    zeta_e = {e: float(evaluator((edge_element(*e),))) for e in edges}

    def one(t: int) -> RoundedSubgraph:
        return rounder(instance, evaluator, trial_seed(seed, t))

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            outputs = list(pool.map(one, range(trials)))
    else:
        outputs = [one(t) for t in range(trials)]

    v_count = {v: 0 for v in verts}
    e_count = {e: 0 for e in edges}
    max_v = 0
    sum_v = 0
    sum_e = 0
    for out in outputs:
        max_v = max(max_v, len(out.vertices))
        sum_v += len(out.vertices)
        sum_e += len(out.edges)
        for v in out.vertices:
            if v in v_count:
                v_count[v] += 1
        for (u, w) in out.edges:
            if (u, w) in e_count:
                e_count[(u, w)] += 1
            elif (w, u) in e_count:
                e_count[(w, u)] += 1

    def rates(counts):
        out = {}
        for key, c in counts.items():
            lo, hi = wilson_bounds(c, trials)
            out[key] = (c, c / trials, lo, hi)
        return out

    vertex_rates = rates(v_count)
    edge_rates = rates(e_count)
    mean_v = sum_v / trials
    mean_e = sum_e / trials
    vertex_mass = sum(zeta_v.values())
    edge_mass = sum(zeta_e.values())
    host_n = instance.n

    def prob_verdict(name, rate_map, bounds):
        worst_margin = math.inf
        worst = ""
        ok = True
        for key, (count, _, _, hi) in rate_map.items():
            if count == 0:
                continue  # an empty count cannot witness a violation
            bound = VERDICT_SLACK * bounds[key]
            margin = bound - hi
            if margin < worst_margin:
                worst_margin = margin
                worst = f"worst at {key}: upper {hi:.4f} vs bound {bound:.4f}"
            if hi > bound + 1e-12:
                ok = False
        if worst_margin is math.inf:
            worst_margin = 0.0
            worst = "nothing was ever included"
        return ConditionVerdict(name, ok, worst_margin, worst)

    cond1 = prob_verdict("vertex-rate", vertex_rates,
                         {v: phi * f * zeta_v[v] for v in verts})
    cond2 = prob_verdict("edge-rate", edge_rates,
                         {e: phi * zeta_e[e] for e in edges})
    cap3 = phi * f * vertex_mass
    cond3 = ConditionVerdict(
        "vertex-count-cap", max_v <= cap3 + 1e-9, cap3 - max_v,
        f"max |V*| {max_v} vs cap {cap3:.4f}")
    floor4 = phi * edge_mass / constants.polylog(host_n)
    cond4 = ConditionVerdict(
        "edge-coverage", mean_e >= floor4 - 1e-12, mean_e - floor4,
        f"mean |E*| {mean_e:.4f} vs floor {floor4:.4f}")

    support = [v for v in verts if zeta_v[v] > 0] or list(verts)
    cap_u = VERDICT_SLACK * constants.polylog(host_n) * \
        (mean_v / max(1, len(support)))
    uni_ok = True
    uni_margin = math.inf
    uni_detail = ""
    for v, (count, _, _, hi) in vertex_rates.items():
        if count == 0:
            continue
        margin = cap_u - hi
        if margin < uni_margin:
            uni_margin = margin
            uni_detail = f"worst at {v}: upper {hi:.4f} vs cap {cap_u:.4f}"
        if hi > cap_u + 1e-12:
            uni_ok = False
    if uni_margin is math.inf:
        uni_margin = 0.0
        uni_detail = "nothing was ever included"
    uniformity = ConditionVerdict("per-vertex-cap", uni_ok, uni_margin,
                                  uni_detail)

    return FaithfulnessReport(
        trials=trials, f=f, phi=phi, host_n=host_n,
        vertex_mass=vertex_mass, edge_mass=edge_mass,
        vertex_rates=vertex_rates, edge_rates=edge_rates,
        max_vertices=max_v, mean_vertices=mean_v, mean_edges=mean_e,
        conditions=(cond1, cond2, cond3, cond4), uniformity=uniformity)
