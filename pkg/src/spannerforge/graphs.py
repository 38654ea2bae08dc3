"""Graph core: immutable graph types, 2-spanner checking, the bipartite double
cover, and the nearly-regular extraction / decomposition used by everything
downstream.

Vertex ids are dense 0-based integers. The double cover of a graph on n
vertices lives on 2n ids, encoding (v, side) as 2*v + side.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

from .seeds import rng_for

TOL = 1e-7


class GraphError(ValueError):
    """Malformed graph input or an operation's domain was violated."""


def slack_constant(n: int) -> float:
    """Degree slack used by the nearly-regular window: 1/(6*max(1, ln n))."""
    if n < 1:
        raise GraphError(f"graph order must be positive, got {n}")
    return 1.0 / (6.0 * max(1.0, math.log(n)))


def _norm_edge(u: int, v: int) -> tuple[int, int]:
    if u == v:
        raise GraphError(f"self-loop at vertex {u}")
    return (u, v) if u < v else (v, u)


class Graph:
    """Simple undirected graph on vertices 0..n-1."""

    __slots__ = ("n", "edges", "_adj", "_eset")

    def __init__(self, n: int, edges: Iterable[tuple[int, int]] = ()):
        if n < 0:
            raise GraphError(f"negative vertex count {n}")
        seen: set[tuple[int, int]] = set()
        for u, v in edges:
            if not (0 <= u < n and 0 <= v < n):
                raise GraphError(f"edge ({u},{v}) out of range for n={n}")
            seen.add(_norm_edge(u, v))
        self.n = n
        self.edges: tuple[tuple[int, int], ...] = tuple(sorted(seen))
        self._eset = frozenset(self.edges)
        adj: dict[int, list[int]] = {v: [] for v in range(n)}
        for u, v in self.edges:
            adj[u].append(v)
            adj[v].append(u)
        self._adj = {v: tuple(sorted(ns)) for v, ns in adj.items()}

    @property
    def m(self) -> int:
        return len(self.edges)

    def neighbors(self, v: int) -> tuple[int, ...]:
        return self._adj[v]

    def degree(self, v: int) -> int:
        return len(self._adj[v])

    def max_degree(self) -> int:
        return max((len(ns) for ns in self._adj.values()), default=0)

    def has_edge(self, u: int, v: int) -> bool:
        return _norm_edge(u, v) in self._eset

    def _edge_set(self) -> frozenset[tuple[int, int]]:
        return self._eset

    def __eq__(self, other) -> bool:
        return isinstance(other, Graph) and self.n == other.n and self.edges == other.edges

    def __hash__(self) -> int:
        return hash((self.n, self.edges))

    def __repr__(self) -> str:
        return f"Graph(n={self.n}, m={self.m})"

    # Small constructors used all over the tests.
    @classmethod
    def complete(cls, n: int) -> "Graph":
        return cls(n, [(i, j) for i in range(n) for j in range(i + 1, n)])

    @classmethod
    def cycle(cls, n: int) -> "Graph":
        if n < 3:
            raise GraphError("cycle needs >= 3 vertices")
        return cls(n, [(i, (i + 1) % n) for i in range(n)])

    @classmethod
    def path(cls, n: int) -> "Graph":
        return cls(n, [(i, i + 1) for i in range(n - 1)])

    @classmethod
    def star(cls, leaves: int) -> "Graph":
        return cls(leaves + 1, [(0, i) for i in range(1, leaves + 1)])

    @classmethod
    def complete_bipartite(cls, a: int, b: int) -> "Graph":
        return cls(a + b, [(i, a + j) for i in range(a) for j in range(b)])


class BipartiteGraph:
    """Bipartite graph with an explicit side partition.

    Vertex ids need not be contiguous: decomposition pieces keep the ids of
    their host graph. Edges are stored oriented (side-0 endpoint, side-1
    endpoint).
    """

    __slots__ = ("side0", "side1", "edges", "_adj", "_side_of")

    def __init__(self, side0: Iterable[int], side1: Iterable[int],
                 edges: Iterable[tuple[int, int]] = ()):
        s0 = tuple(sorted(set(side0)))
        s1 = tuple(sorted(set(side1)))
        if set(s0) & set(s1):
            raise GraphError("bipartition sides overlap")
        side_of = {v: 0 for v in s0}
        side_of.update({v: 1 for v in s1})
        norm: set[tuple[int, int]] = set()
        for u, w in edges:
            if u not in side_of or w not in side_of:
                raise GraphError(f"edge ({u},{w}) has an endpoint outside both sides")
            if side_of[u] == side_of[w]:
                raise GraphError(f"edge ({u},{w}) does not cross the bipartition")
            norm.add((u, w) if side_of[u] == 0 else (w, u))
        self.side0 = s0
        self.side1 = s1
        self.edges: tuple[tuple[int, int], ...] = tuple(sorted(norm))
        self._side_of = side_of
        adj: dict[int, list[int]] = {v: [] for v in s0 + s1}
        for u, w in self.edges:
            adj[u].append(w)
            adj[w].append(u)
        self._adj = {v: tuple(sorted(ns)) for v, ns in adj.items()}

    @property
    def vertices(self) -> tuple[int, ...]:
        return tuple(sorted(self.side0 + self.side1))

    @property
    def n(self) -> int:
        return len(self.side0) + len(self.side1)

    @property
    def m(self) -> int:
        return len(self.edges)

    def side_of(self, v: int) -> int:
        return self._side_of[v]

    def side(self, b: int) -> tuple[int, ...]:
        return self.side0 if b == 0 else self.side1

    def neighbors(self, v: int) -> tuple[int, ...]:
        return self._adj[v]

    def degree(self, v: int) -> int:
        return len(self._adj[v])

    def has_edge(self, u: int, w: int) -> bool:
        if u in self._side_of and w in self._side_of and self._side_of[u] == 1:
            u, w = w, u
        return (u, w) in set(self.edges)

    def __eq__(self, other) -> bool:
        return (isinstance(other, BipartiteGraph) and self.side0 == other.side0
                and self.side1 == other.side1 and self.edges == other.edges)

    def __hash__(self) -> int:
        return hash((self.side0, self.side1, self.edges))

    def __repr__(self) -> str:
        return f"BipartiteGraph(|V0|={len(self.side0)}, |V1|={len(self.side1)}, m={self.m})"


class ParamTuple(NamedTuple):
    """Nearly-regular parameter tuple (side sizes k0 >= k1, degree caps d0, d1)."""

    k0: int
    k1: int
    d0: int
    d1: int

    @property
    def m(self) -> int:
        # Edge target of the associated subgraph problem.
        return self.k0 * self.d0


@dataclass(frozen=True)
class NearlyRegularWitness:
    """Output certificate of regularize: the extracted piece plus the numbers
    needed to re-check it without the original call context."""

    tau: ParamTuple
    piece: BipartiteGraph
    slack: float
    source_edge_count: int
    cut_edge_count: int
    retained_edge_count: int
    seed: int

    def verify(self) -> bool:
        return is_nearly_regular(self.piece, self.piece.vertices, self.piece.edges,
                                 self.tau, slack=self.slack)


# ---------------------------------------------------------------------------
# Basic operations


def read_graph_text(text: str) -> Graph:
    """Parse the package graph format: line 1 'n m', then m lines 'u v'."""
    lines = [ln for ln in (raw.strip() for raw in text.splitlines()) if ln and not ln.startswith("#")]
    if not lines:
        raise GraphError("empty graph file")
    head = lines[0].split()
    if len(head) != 2:
        raise GraphError(f"line 1: expected 'n m', got {lines[0]!r}")
    try:
        n, m = int(head[0]), int(head[1])
    except ValueError as exc:
        raise GraphError(f"line 1: non-integer header {lines[0]!r}") from exc
    if len(lines) - 1 != m:
        raise GraphError(f"header declares {m} edges but file has {len(lines) - 1} edge lines")
    edges = []
    for i, ln in enumerate(lines[1:], start=2):
        parts = ln.split()
        if len(parts) != 2:
            raise GraphError(f"line {i}: expected 'u v', got {ln!r}")
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError as exc:
            raise GraphError(f"line {i}: non-integer endpoint in {ln!r}") from exc
        if not (0 <= u < n and 0 <= v < n):
            raise GraphError(f"line {i}: endpoint out of range 0..{n - 1}")
        if u == v:
            raise GraphError(f"line {i}: self-loop at {u}")
        edges.append((u, v))
    return Graph(n, edges)


def write_graph_text(g: Graph) -> str:
    out = [f"{g.n} {g.m}"]
    out.extend(f"{u} {v}" for u, v in g.edges)
    return "\n".join(out) + "\n"


def neighborhood_subgraph(g: Graph, demands: Iterable[tuple[int, int]],
                          u: int) -> tuple[Graph, tuple[int, ...]]:
    """Demand edges among the neighbors of u, relabelled to 0..deg(u)-1.

    Returns (subgraph, original_ids) where original_ids[i] is the host id of
    subgraph vertex i.
    """
    if not (0 <= u < g.n):
        raise GraphError(f"vertex {u} out of range")
    nbrs = g.neighbors(u)
    index = {v: i for i, v in enumerate(nbrs)}
    dset = {_norm_edge(a, b) for a, b in demands}
    sub_edges = [(index[a], index[b]) for a, b in dset if a in index and b in index]
    return Graph(len(nbrs), sub_edges), nbrs


def double_cover(g: Graph) -> BipartiteGraph:
    """Bipartite double cover on ids 2v (side 0) and 2v+1 (side 1)."""
    side0 = [2 * v for v in range(g.n)]
    side1 = [2 * v + 1 for v in range(g.n)]
    edges = []
    for u, v in g.edges:
        edges.append((2 * u, 2 * v + 1))
        edges.append((2 * v, 2 * u + 1))
    return BipartiteGraph(side0, side1, edges)


def _edge_set_of(h) -> frozenset[tuple[int, int]]:
    if isinstance(h, Graph):
        return h._edge_set()
    return frozenset(_norm_edge(u, v) for u, v in h)


def is_two_spanner(g: Graph, h, demands) -> tuple[bool, list[tuple[int, int]]]:
    """Check that every demand edge is in h or spanned by a 2-path in h.

    h may be a Graph or an edge collection; it must be a subset of E(G).
    Returns (ok, sorted list of unspanned demands).
    """
    h_edges = _edge_set_of(h)
    g_edges = g._edge_set()
    bad = h_edges - g_edges
    if bad:
        raise GraphError(f"spanner edge {sorted(bad)[0]} not in the host graph")
    h_adj: dict[int, set[int]] = {v: set() for v in range(g.n)}
    for u, v in h_edges:
        h_adj[u].add(v)
        h_adj[v].add(u)
    violations = []
    for a, b in sorted(_edge_set_of(demands)):
        if (a, b) not in g_edges:
            raise GraphError(f"demand ({a},{b}) not in the host graph")
        if (a, b) in h_edges or (h_adj[a] & h_adj[b]):
            continue
        violations.append((a, b))
    return (not violations), violations


def spanner_cost(h) -> int:
    """Maximum degree of an edge set (the LD2S objective)."""
    if isinstance(h, Graph):
        return h.max_degree()
    deg: dict[int, int] = {}
    for u, v in _edge_set_of(h):
        deg[u] = deg.get(u, 0) + 1
        deg[v] = deg.get(v, 0) + 1
    return max(deg.values(), default=0)


# ---------------------------------------------------------------------------
# Nearly-regular machinery


def is_nearly_regular(host: BipartiteGraph, vertices: Iterable[int],
                      edges: Iterable[tuple[int, int]], tau: ParamTuple,
                      slack: float | None = None, tol: float = TOL) -> bool:
    """Is the selection (vertices, edges) a tau-nearly-regular subgraph of host?

    Side-b must have exactly k_b chosen vertices and every chosen vertex's
    degree (within the chosen edges) must lie in [slack*d_b - tol, d_b].
    """
    if slack is None:
        slack = slack_constant(max(1, host.n))
    vset = set(vertices)
    host_edges = set(host.edges)
    eset = set()
    for u, w in edges:
        if host.side_of(u) == 1:
            u, w = w, u
        if (u, w) not in host_edges:
            return False
        if u not in vset or w not in vset:
            return False
        eset.add((u, w))
    k = [0, 0]
    for v in vset:
        if v not in host._side_of:
            return False
        k[host.side_of(v)] += 1
    if k[0] != tau.k0 or k[1] != tau.k1:
        return False
    deg = {v: 0 for v in vset}
    for u, w in eset:
        deg[u] += 1
        deg[w] += 1
    caps = (tau.d0, tau.d1)
    for v in vset:
        d_b = caps[host.side_of(v)]
        if deg[v] > d_b or deg[v] < slack * d_b - tol:
            return False
    return True


def _heaviest_bucket(items: Sequence[int], degree: dict[int, int]) -> tuple[list[int], int]:
    """Factor-2 degree buckets; returns (members of the bucket seeing the most
    edges, its max degree). Zero-degree vertices are ignored."""
    buckets: dict[int, list[int]] = {}
    for v in items:
        d = degree[v]
        if d <= 0:
            continue
        buckets.setdefault((d - 1).bit_length(), []).append(v)
    if not buckets:
        return [], 0
    # Weight = incident edge count; deterministic tie-break on the bucket key.
    best_key = max(buckets, key=lambda k: (sum(degree[v] for v in buckets[k]), -k))
    members = sorted(buckets[best_key])
    return members, max(degree[v] for v in members)


def _prune_to_window(u0: list[int], u1: list[int],
                     edges: set[tuple[int, int]], d0: int, d1: int,
                     slack: float) -> tuple[list[int], list[int], set[tuple[int, int]]]:
    """Iteratively drop side-0 vertices at degree <= slack*d0 and side-1
    vertices at degree <= d1/6 until both windows hold."""
    s0, s1 = set(u0), set(u1)
    cur = {e for e in edges if e[0] in s0 and e[1] in s1}
    deg: dict[int, int] = {v: 0 for v in s0 | s1}
    for u, w in cur:
        deg[u] += 1
        deg[w] += 1
    changed = True
    while changed and cur:
        changed = False
        drop0 = {v for v in s0 if deg[v] <= slack * d0 + TOL}
        drop1 = {v for v in s1 if deg[v] <= d1 / 6.0 + TOL}
        if drop0 == s0 or drop1 == s1:
            # A side would empty; stop with the current state.
            break
        if drop0 or drop1:
            changed = True
            s0 -= drop0
            s1 -= drop1
            gone = {e for e in cur if e[0] in drop0 or e[1] in drop1}
            for u, w in gone:
                deg[u] -= 1
                deg[w] -= 1
            cur -= gone
    s0 = {v for v in s0 if deg[v] > 0}
    s1 = {v for v in s1 if deg[v] > 0}
    return sorted(s0), sorted(s1), cur


def _two_coloring(h: Graph) -> list[int] | None:
    """Proper 2-coloring per component, or None if an odd cycle exists."""
    color = [-1] * h.n
    for start in range(h.n):
        if color[start] != -1:
            continue
        color[start] = 0
        queue = [start]
        while queue:
            v = queue.pop()
            for w in h.neighbors(v):
                if color[w] == -1:
                    color[w] = 1 - color[v]
                    queue.append(w)
                elif color[w] == color[v]:
                    return None
    return color


def regularize(h: Graph, seed: int = 0) -> tuple[NearlyRegularWitness, BipartiteGraph]:
    """Extract a nearly-regular bipartite piece retaining a polylog fraction of
    the edges: best of 32 seeded random cuts (plus an exact 2-coloring when the
    input is bipartite), factor-2 degree bucketing on each side, then iterative
    pruning into the degree windows."""
    if h.m == 0:
        raise GraphError("regularize needs at least one edge")
    n = h.n
    slack = slack_constant(n)
    best = None  # (order_key, s0, s1, d0, d1, cut_size)
    best_cut = 0
    cuts: list[list[int]] = []
    coloring = _two_coloring(h)
    if coloring is not None:
        cuts.append(coloring)  # keeps every edge; dominates any random cut
    for cut_index in range(32):
        rng = rng_for(seed, f"regularize-cut-{cut_index}")
        cuts.append([rng.randrange(2) for _ in range(n)])
    for cut_index, side in enumerate(cuts):
        crossing = [e for e in h.edges if side[e[0]] != side[e[1]]]
        best_cut = max(best_cut, len(crossing))
        if not crossing:
            continue
        part = [[v for v in range(n) if side[v] == 0], [v for v in range(n) if side[v] == 1]]
        for orient in (0, 1):
            a_side, b_side = part[orient], part[1 - orient]
            oriented = {(u, w) if side[u] == orient else (w, u) for u, w in crossing}
            deg_a: dict[int, int] = {v: 0 for v in a_side}
            for u, _ in oriented:
                deg_a[u] += 1
            u0, d0 = _heaviest_bucket(a_side, deg_a)
            if not u0:
                continue
            u0set = set(u0)
            sub = {e for e in oriented if e[0] in u0set}
            deg_b: dict[int, int] = {v: 0 for v in b_side}
            for _, w in sub:
                deg_b[w] += 1
            u1, d1 = _heaviest_bucket(b_side, deg_b)
            if not u1:
                continue
            s0, s1, kept = _prune_to_window(u0, u1, sub, d0, d1, slack)
            if not kept:
                continue
            key = (len(kept), -cut_index, -orient)
            if best is None or key > best[0]:
                best = (key, s0, s1, d0, d1, len(crossing))
    if best_cut * 3 < h.m:
        raise AssertionError(
            f"best of 32 random cuts kept {best_cut}/{h.m} edges, below the |E|/3 bound")
    if best is None:
        raise AssertionError("regularize found no non-empty piece; bucketing bug")
    _, s0, s1, _d0, _d1, cut_size = best
    side0, side1 = (s0, s1) if len(s0) >= len(s1) else (s1, s0)
    set0, set1 = set(side0), set(side1)
    piece_edges = [e for e in h.edges
                   if (e[0] in set0 and e[1] in set1) or (e[1] in set0 and e[0] in set1)]
    piece = BipartiteGraph(side0, side1, piece_edges)
    # Bucket caps can overshoot after pruning; record the realized maxima so the
    # tuple never claims a degree larger than the other side's size.
    real_d0 = max(piece.degree(v) for v in piece.side0)
    real_d1 = max(piece.degree(v) for v in piece.side1)
    tau = ParamTuple(len(side0), len(side1), real_d0, real_d1)
    witness = NearlyRegularWitness(
        tau=tau, piece=piece, slack=slack, source_edge_count=h.m,
        cut_edge_count=cut_size, retained_edge_count=piece.m, seed=seed)
    if not witness.verify():
        raise AssertionError("regularize produced a piece failing its own check")
    return witness, piece


def decompose_cap(n: int) -> int:
    return int(16 * (1 + math.log(max(1, n))) ** 3)


def decompose(h: Graph, lam: int, seed: int = 0) -> list[tuple[ParamTuple, BipartiteGraph]]:
    """Greedily peel nearly-regular pieces until no edges remain.

    Pieces are edge-disjoint and their union is E(h); the piece count is capped
    at 16*(1+ln n)^3 and exceeding it aborts (it would mean a retention bug,
    not an input condition).
    """
    if lam < 1:
        raise GraphError(f"degree budget must be >= 1, got {lam}")
    n = h.n
    cap = decompose_cap(n)
    pieces: list[tuple[ParamTuple, BipartiteGraph]] = []
    residual = h
    step = 0
    while residual.m > 0:
        if step >= cap:
            raise RuntimeError(
                f"decompose exceeded the {cap}-piece cap at n={n}; regularize retention bug")
        witness, piece = regularize(residual, seed=seed + step)
        for name, val in zip(("k0", "k1", "d0", "d1"), witness.tau):
            if val > lam:
                raise GraphError(
                    f"piece parameter {name}={val} exceeds the degree budget {lam}")
        pieces.append((witness.tau, piece))
        taken = {tuple(sorted(e)) for e in piece.edges}
        residual = Graph(n, [e for e in residual.edges if e not in taken])
        step += 1
    return pieces
