"""Parameter derivation and caterpillar template tests."""

from __future__ import annotations

import math
from fractions import Fraction

import pytest

from spannerforge.params import (CaterpillarTemplate, ParameterError,
                                 build_caterpillar, derive_params)

WORST_CASE_EXPONENT = 3.0 - 2.0 * math.sqrt(2.0)


class TestDeriveParams:
    def test_balanced_instance_collapses_to_unit_factor(self):
        p = derive_params(16, 4, 4, 4, 4, 3)
        assert p.gamma == 0.0
        assert p.alpha == Fraction(1)
        assert (p.r, p.s) == (1, 1)
        assert p.f == 1.0
        assert p.degree_bound == 16.0
        assert not p.small_degree_mode

    def test_half_gamma_at_q4(self):
        # log_64(8/1) = 1/2, so q*(1 + 1/4 - sqrt(17/16)) = 0.87689... -> a=1.
        p = derive_params(64, 8, 8, 1, 1, 4)
        assert abs(p.gamma - 0.5) <= 1e-12
        assert p.alpha == Fraction(1, 4)
        assert (p.r, p.s) == (1, 4)
        assert abs(p.f - 2.0) <= 1e-9
        assert abs(p.degree_bound - 2.0) <= 1e-9
        assert p.small_degree_mode  # f=2 > d0=1

    def test_half_gamma_at_q6_rounds_to_one_third(self):
        p = derive_params(64, 8, 8, 1, 1, 6)
        assert p.alpha == Fraction(1, 3)
        assert abs(p.f - math.sqrt(8.0)) <= 1e-9
        assert abs(p.degree_bound - 1.0) <= 1e-9

    def test_doubling_instance(self):
        # The unit-test workhorse for the deep rounding path.
        p = derive_params(40, 8, 8, 4, 4, 4)
        assert p.alpha == Fraction(1, 2)
        assert p.f == 2.0
        assert p.degree_bound == 5.0
        assert not p.small_degree_mode

    def test_gamma_one_is_degenerate(self):
        with pytest.raises(ParameterError):
            derive_params(16, 16, 16, 1, 1, 4)

    def test_tiny_gamma_rounds_to_full_exponent(self):
        # gamma = 1/29 puts q*alpha0 just above q-1, so a rounds to q while
        # k1 != d0 leaves the fixed point unsolvable.
        with pytest.raises(ParameterError):
            derive_params(2 ** 29, 2, 2, 1, 1, 4)

    @pytest.mark.parametrize("args", [
        (8, 4, 5, 2, 2, 3),   # k1 > k0
        (8, 4, 2, 3, 2, 3),   # d0 > k1
        (8, 4, 2, 2, 2, 1),   # q < 2
        (4, 8, 2, 2, 2, 3),   # k0 > n
        (8, 4, 2, 2, 0, 3),   # d1 < 1
        (8, 0, 0, 0, 1, 3),   # empty sides
    ])
    def test_precondition_violations(self, args):
        with pytest.raises(ParameterError):
            derive_params(*args)

    def test_rejects_non_integers(self):
        with pytest.raises(ParameterError):
            derive_params(8.0, 4, 2, 2, 2, 3)

    def test_grid_properties(self):
        checked = 0
        for n in (8, 16, 40, 64):
            for k0 in (1, 2, 3, 4, 6, 8):
                if k0 > n:
                    continue
                for k1 in range(1, k0 + 1):
                    for d0 in range(1, k1 + 1):
                        for q in (2, 3, 4):
                            try:
                                p = derive_params(n, k0, k1, d0, max(1, d0), q)
                            except ParameterError:
                                continue
                            checked += 1
                            residual = abs(p.f - (k1 * p.f / d0) ** float(p.alpha))
                            assert residual <= 1e-9 * p.f
                            assert math.gcd(p.r, p.s) == 1
                            assert p.s <= q and q % p.s == 0
                            assert p.f >= 1.0
                            bound = n ** (WORST_CASE_EXPONENT + 4.0 / q)
                            assert p.f <= bound * (1.0 + 1e-9)
                            expected_trigger = n * d0 / (k1 * p.f * p.f)
                            assert abs(p.degree_bound - expected_trigger) <= 1e-12 * max(1.0, expected_trigger)
                            assert p.small_degree_mode == (p.f > d0)
        assert checked >= 100


class TestCaterpillar:
    def test_pure_path(self):
        t = build_caterpillar(1, 3)
        assert t.steps == ("B", "B", "B")
        assert t.edges == ((0, 1), (1, 2), (2, 3))
        assert t.rightmost == (0, 1, 2, 3)
        assert t.depths == (0, 1, 2, 3)
        assert t.hair_count == 0

    def test_two_thirds(self):
        t = build_caterpillar(2, 3)
        assert t.steps == ("B", "H", "B")
        assert t.edges == ((0, 1), (1, 2), (1, 3))
        assert t.rightmost == (0, 1, 1, 3)
        assert t.depths == (0, 1, 2, 2)
        assert t.edge_parent_sides == (0, 1, 1)
        assert t.side_of_tip(1) == 0
        assert t.side_of_tip(2) == 1
        assert t.side_of_tip(3) == 1

    def test_three_quarters(self):
        t = build_caterpillar(3, 4)
        assert t.steps == ("B", "H", "H", "B")
        assert t.edges == ((0, 1), (1, 2), (1, 3), (1, 4))
        assert t.hair_count == 2

    def test_single_edge(self):
        t = build_caterpillar(1, 1)
        assert t.steps == ("B",)
        assert t.n_vertices == 2

    def test_leaf_slots(self):
        t = build_caterpillar(2, 3)
        assert t.leaf_slots(1) == (0,)
        assert t.leaf_slots(2) == (0,)
        assert t.leaf_slots(3) == (0, 2)
        with pytest.raises(ValueError):
            t.leaf_slots(4)
        with pytest.raises(ValueError):
            t.leaf_slots(0)

    def test_exhaustive_small_templates(self):
        for s in range(1, 8):
            for r in range(1, s + 1):
                if math.gcd(r, s) != 1:
                    continue
                t = build_caterpillar(r, s)
                assert len(t.steps) == s
                assert len(t.edges) == s
                assert t.hair_count == r - 1
                assert t.steps[0] == "B"
                for step_index, (parent, child) in enumerate(t.edges, start=1):
                    assert 0 <= parent < child == step_index
                    assert t.depths[child] == t.depths[parent] + 1
                # Independent oracle for hair placement via exact rationals.
                for step_index, kind in enumerate(t.steps, start=1):
                    lo = Fraction(r * (step_index - 1), s)
                    hi = Fraction(r * step_index, s)
                    contains = math.floor(lo) + 1 < hi
                    assert kind == ("H" if contains else "B")

    @pytest.mark.parametrize("r,s", [(2, 4), (0, 1), (4, 3), (3, 9)])
    def test_rejects_bad_exponents(self, r, s):
        with pytest.raises(ParameterError):
            build_caterpillar(r, s)

    def test_rejects_non_integers(self):
        with pytest.raises(ParameterError):
            build_caterpillar(1.5, 3)

    def test_template_is_frozen(self):
        t = build_caterpillar(1, 2)
        assert isinstance(t, CaterpillarTemplate)
        with pytest.raises(AttributeError):
            t.r = 2
