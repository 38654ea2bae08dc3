"""Approximation-parameter derivation and caterpillar templates.

The dense-subgraph rounding is organized around (r, s)-caterpillar trees:
s construction steps, each either extending the backbone path or hanging a
single-edge hair off its right end. The step pattern and the target
approximation factor f both fall out of a single exponent alpha = r/s that is
derived from the instance parameters (n, k0, k1, d0, d1) and the lift level q.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

__all__ = [
    "CaterpillarTemplate",
    "DerivedParams",
    "ParameterError",
    "build_caterpillar",
    "derive_params",
]


class ParameterError(ValueError):
    """Instance parameters fall outside the supported regime."""


# Relative tolerance on the fixed-point residual f = (k1 f / d0)^alpha.
_RESIDUAL_TOL = 1e-9
# Guard subtracted before ceil() so exact integers do not round up on noise.
_CEIL_GUARD = 1e-9


@dataclass(frozen=True)
class DerivedParams:
    """Rounding parameters derived from one nearly-regular instance."""

    n: int
    k0: int
    k1: int
    d0: int
    d1: int
    q: int
    gamma: float
    alpha: Fraction
    f: float
    degree_bound: float
    small_degree_mode: bool

    @property
    def r(self) -> int:
        return self.alpha.numerator

    @property
    def s(self) -> int:
        return self.alpha.denominator


def derive_params(n: int, k0: int, k1: int, d0: int, d1: int,
                  q: int) -> DerivedParams:
    """Derive gamma, alpha = r/s, the factor f and the degree trigger.

    f is the unique solution of f = (k1 f / d0)^alpha, computed in closed form
    as (k1/d0)^(a/(q-a)) for alpha = a/q; the residual is re-checked to 1e-9
    relative. degree_bound = n d0 / (k1 f^2) is the max-degree trigger for the
    direct sampling path, and small_degree_mode flags f > d0 (where the plain
    degree-factor rounding is the better tool).
    """
    for name, value in (("n", n), ("k0", k0), ("k1", k1), ("d0", d0),
                        ("d1", d1), ("q", q)):
        if not isinstance(value, int):
            raise ParameterError(f"{name} must be an integer, got {value!r}")
    if not 1 <= k1 <= k0 <= n:
        raise ParameterError(f"need 1 <= k1 <= k0 <= n, got k0={k0}, k1={k1}, n={n}")
    if not 1 <= d0 <= k1:
        raise ParameterError(f"need 1 <= d0 <= k1, got d0={d0}, k1={k1}")
    if d1 < 1:
        raise ParameterError(f"need d1 >= 1, got {d1}")
    if q < 2:
        raise ParameterError(f"need q >= 2, got {q}")

    if k1 == d0:
        gamma = 0.0
    else:
        gamma = math.log(k1 / d0) / math.log(n)
    root = math.sqrt(2.0 * gamma + gamma * gamma / 4.0)
    a = math.ceil(q * (1.0 + gamma / 2.0 - root) - _CEIL_GUARD)
    if a <= 0:
        raise ParameterError(
            f"degenerate parameters: exponent collapsed to {a}/{q} at "
            f"gamma={gamma:.6f} (side/degree ratio too close to n)")
    if a >= q:
        if k1 != d0:
            raise ParameterError(
                f"degenerate parameters: alpha rounded to {a}/{q} with "
                f"k1={k1} != d0={d0}, so the factor fixed point has no solution")
        a = q
        f = 1.0
    else:
        f = (k1 / d0) ** (a / (q - a))
    alpha = Fraction(a, q)

    target = (k1 * f / d0) ** (a / q)
    if abs(f - target) > _RESIDUAL_TOL * f:
        raise ParameterError(
            f"fixed-point residual {abs(f - target):.3e} exceeds tolerance")

    degree_bound = n * d0 / (k1 * f * f)
    return DerivedParams(n=n, k0=k0, k1=k1, d0=d0, d1=d1, q=q, gamma=gamma,
                         alpha=alpha, f=f, degree_bound=degree_bound,
                         small_degree_mode=f > d0)


@dataclass(frozen=True)
class CaterpillarTemplate:
    """An (r, s)-caterpillar tree, built left to right.

    Vertex 0 is the leftmost backbone vertex; step t (1-based) adds vertex t
    and one edge hanging off the current backbone tip. Backbone steps move the
    tip, hair steps leave it in place.
    """

    r: int
    s: int
    steps: tuple[str, ...]
    edges: tuple[tuple[int, int], ...]
    rightmost: tuple[int, ...]
    depths: tuple[int, ...]

    @property
    def hair_count(self) -> int:
        return self.steps.count("H")

    @property
    def n_vertices(self) -> int:
        return self.s + 1

    @property
    def edge_parent_sides(self) -> tuple[int, ...]:
        """Bipartition side of each edge's attach point (vertex 0 on side 0)."""
        return tuple(self.depths[parent] % 2 for parent, _ in self.edges)

    def leaf_slots(self, t: int) -> tuple[int, ...]:
        """Template vertices that are leaves of the (t-1)-edge prefix.

        The backbone tip is excluded: it is the extension point, not a leaf
        tuple member. At t=1 the prefix is the single vertex 0, which plays
        both roles.
        """
        if not 1 <= t <= self.s:
            raise ValueError(f"step {t} out of range 1..{self.s}")
        return (0,) + tuple(j for j in range(1, t) if self.steps[j - 1] == "H")

    def side_of_tip(self, t: int) -> int:
        """Bipartition side of the backbone tip entering step t."""
        if not 1 <= t <= self.s:
            raise ValueError(f"step {t} out of range 1..{self.s}")
        return self.depths[self.rightmost[t - 1]] % 2


def build_caterpillar(r: int, s: int) -> CaterpillarTemplate:
    """Construct the (r, s)-caterpillar template.

    Step t is a hair exactly when the open interval ((t-1)r/s, tr/s) contains
    an integer; coprimality makes the endpoints non-integral except at t=s,
    so there are exactly r-1 hairs.
    """
    if not isinstance(r, int) or not isinstance(s, int):
        raise ParameterError(f"caterpillar exponent must be integral, got ({r!r}, {s!r})")
    if not 1 <= r <= s:
        raise ParameterError(f"need 1 <= r <= s, got ({r}, {s})")
    if math.gcd(r, s) != 1:
        raise ParameterError(f"caterpillar exponent {r}/{s} is not in lowest terms")

    steps: list[str] = []
    edges: list[tuple[int, int]] = []
    rightmost = [0]
    depths = [0]
    tip = 0
    for t in range(1, s + 1):
        edges.append((tip, t))
        depths.append(depths[tip] + 1)
        # Smallest integer above (t-1)r/s, compared against tr/s exactly.
        next_int = ((t - 1) * r) // s + 1
        if next_int * s < t * r:
            steps.append("H")
        else:
            steps.append("B")
            tip = t
        rightmost.append(tip)
    return CaterpillarTemplate(r=r, s=s, steps=tuple(steps),
                               edges=tuple(edges), rightmost=tuple(rightmost),
                               depths=tuple(depths))
