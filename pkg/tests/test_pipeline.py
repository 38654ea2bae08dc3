"""Pipeline tests: frozen tiny instances plus measured loop invariants."""

import json
import math
import random

import pytest

from spannerforge.graphs import Graph, GraphError, ParamTuple, is_two_spanner
from spannerforge.pipeline import (InfeasibleBudget, PipelineConfig,
                                   approximate_ld2s, candidate_tuples,
                                   render_report, run_iteration)


def random_graph(n, p, seed):
    rng = random.Random(seed)
    edges = [(i, j) for i in range(n) for j in range(i + 1, n)
             if rng.random() < p]
    return Graph(n, edges)


class TestPipelineConfig:
    def test_defaults_valid(self):
        cfg = PipelineConfig()
        assert cfg.q == 2 and cfg.max_iterations == 64

    @pytest.mark.parametrize("kwargs", [
        {"q": 1},
        {"max_iterations": 0},
        {"lambda_search": "binary"},
        {"tuple_multiplicity": 0},
    ])
    def test_invalid_fields_rejected(self, kwargs):
        with pytest.raises(ValueError):
            PipelineConfig(**kwargs)


class TestCandidateTuples:
    def test_single_edge_tuple_present_from_lambda_two(self):
        g = Graph(2, [(0, 1)])
        cfg = PipelineConfig()
        # no demand lives inside any neighborhood of a 2-path, but the
        # single-edge tuple needs an actual demand neighborhood: a triangle
        # provides one.
        tri = Graph.complete(3)
        assert ParamTuple(1, 1, 1, 1) in candidate_tuples(tri, tri.edges, 2, cfg)
        assert candidate_tuples(tri, tri.edges, 1, cfg) == []
        # an edge with no demands between neighbors yields no blocks at all
        assert candidate_tuples(g, g.edges, 2, cfg) == []

    def test_k5_tuples_by_budget(self):
        g = Graph.complete(5)
        cfg = PipelineConfig(seed=0)
        assert candidate_tuples(g, g.edges, 2, cfg) == [ParamTuple(1, 1, 1, 1)]
        at4 = candidate_tuples(g, g.edges, 4, cfg)
        assert ParamTuple(2, 2, 2, 2) in at4
        assert at4 == sorted(at4)
        assert all(t.k0 + t.k1 <= 4 for t in at4)

    def test_multiplicity_duplicates_blocks(self):
        g = Graph.complete(3)
        cfg = PipelineConfig(seed=0, tuple_multiplicity=2)
        tuples = candidate_tuples(g, g.edges, 2, cfg)
        assert tuples == [ParamTuple(1, 1, 1, 1)] * 2

    def test_grid_adds_power_of_two_tuples(self):
        g = Graph.complete(3)
        base = candidate_tuples(g, g.edges, 4, PipelineConfig(seed=0))
        grid = candidate_tuples(g, g.edges, 4,
                                PipelineConfig(seed=0, tuple_grid=True))
        assert set(base) <= set(grid)
        assert ParamTuple(2, 1, 1, 2) in grid
        assert all(t.k0 + t.k1 <= 4 for t in grid)


class TestRunIteration:
    def test_single_edge_resolved_at_budget_one(self):
        g = Graph(2, [(0, 1)])
        cfg = PipelineConfig(seed=1)
        new, satisfied, rep = run_iteration(g, g.edges, 1, 2, cfg, seed=1)
        assert new == {(0, 1)}
        assert satisfied == {(0, 1)}
        assert rep.demands_after == ()
        assert rep.x_edges == ((0, 1),)
        assert rep.x_threshold == 0.25

    def test_triangle_done_in_one_round(self):
        g = Graph.complete(3)
        cfg = PipelineConfig(seed=1)
        new, satisfied, rep = run_iteration(g, g.edges, 2, 2, cfg, seed=1)
        assert rep.demands_after == ()
        assert set(rep.x_edges) == set(g.edges)  # max-mass optimum is x=1

    def test_zero_coin_blocks_stay_idle(self):
        # At the full budget the optimum forces x=1 everywhere, which pins
        # every block's mass to zero through the span equalities.
        g = Graph.complete(3)
        cfg = PipelineConfig(seed=1)
        _, _, rep = run_iteration(g, g.edges, 2, 2, cfg, seed=1)
        assert rep.outcomes  # blocks exist
        assert all(not o.fired and o.route == "skipped" for o in rep.outcomes)
        assert all(o.coin == 0.0 for o in rep.outcomes)

    def test_infeasible_budget_signals(self):
        g = Graph.path(3)
        cfg = PipelineConfig(seed=1)
        with pytest.raises(InfeasibleBudget):
            run_iteration(g, g.edges, 1, 2, cfg, seed=1)

    def test_existing_edges_not_rebought(self):
        g = Graph.complete(3)
        cfg = PipelineConfig(seed=1)
        new, satisfied, rep = run_iteration(g, [(0, 1)], 2, 2, cfg, seed=1,
                                            existing=[(0, 1)])
        assert (0, 1) in rep.x_edges
        assert (0, 1) not in new
        assert satisfied == {(0, 1)}

    def test_demand_must_be_graph_edge(self):
        g = Graph.path(3)
        with pytest.raises(GraphError):
            run_iteration(g, [(0, 2)], 2, 2, PipelineConfig(), seed=0)


class TestApproximateLD2S:
    def test_single_edge(self):
        g = Graph(2, [(0, 1)])
        h, rep = approximate_ld2s(g, PipelineConfig(seed=1))
        assert h.edges == g.edges
        assert rep.best_cost == 1 and rep.best_lam == 1

    def test_star_is_forced(self):
        g = Graph.star(6)
        h, rep = approximate_ld2s(g, PipelineConfig(seed=2))
        assert h.edges == g.edges
        assert rep.best_cost == 6

    @pytest.mark.parametrize("n", [4, 5])
    def test_trees_return_themselves(self, n):
        g = Graph.path(n)
        h, rep = approximate_ld2s(g, PipelineConfig(seed=3))
        assert h.edges == g.edges
        assert rep.best_cost == 2

    def test_k5_within_analysis_envelope(self):
        g = Graph.complete(5)
        h, rep = approximate_ld2s(g, PipelineConfig(seed=4))
        ok, bad = is_two_spanner(g, h, g.edges)
        assert ok, bad
        # brute-force optimum is 2 (the 5-cycle); the guarantee envelope is
        # c * Delta^(3-2*sqrt(2)) * polylog slack above it.
        envelope = 2 * 4 ** (3 - 2 * math.sqrt(2)) * (1 + math.log(5)) ** 2
        assert 2 <= rep.best_cost <= envelope

    def test_empty_graph_yields_empty_spanner(self):
        g = Graph(3, [])
        h, rep = approximate_ld2s(g, PipelineConfig(seed=0))
        assert h.edges == ()
        assert rep.best_cost == 0 and rep.status == "complete"

    def test_no_vertices_rejected(self):
        with pytest.raises(GraphError):
            approximate_ld2s(Graph(0, []), PipelineConfig())

    def test_full_budget_always_lands(self):
        # even with a single iteration allowed, lam = Delta finishes because
        # the LP optimum there puts every edge above the threshold.
        g = random_graph(9, 0.5, seed=7)
        cfg = PipelineConfig(seed=7, max_iterations=1,
                             lambda_search="powers-of-two")
        h, rep = approximate_ld2s(g, cfg)
        ok, _ = is_two_spanner(g, h, g.edges)
        assert ok
        full = [b for b in rep.budgets if b.lam == g.max_degree()]
        assert full and full[0].status == "complete"
        assert len(full[0].iterations) == 1

    def test_batch_invariants(self):
        # Validity, monotone progress, and the per-type degree growth window
        # across a seeded batch.
        checked_iterations = 0
        satisfied_fractions = []
        for seed in range(12):
            g = random_graph(4 + seed % 5, 0.5, seed=100 + seed)
            if g.m == 0:
                continue
            cfg = PipelineConfig(seed=seed, lambda_search="powers-of-two",
                                 max_iterations=6)
            h, rep = approximate_ld2s(g, cfg)
            ok, bad = is_two_spanner(g, h, g.edges)
            assert ok, (seed, bad)
            delta = g.max_degree()
            polylog = (1.0 + math.log(max(1, g.n))) ** 2
            f_delta = max(1.0, delta) ** (3 - 2 * math.sqrt(2))
            for budget in rep.budgets:
                for rep_it in budget.iterations:
                    checked_iterations += 1
                    before = set(rep_it.demands_before)
                    after = set(rep_it.demands_after)
                    assert after <= before
                    assert set(rep_it.satisfied) == before - after
                    bound = 16.0 * f_delta * budget.lam * polylog
                    for worst in rep_it.degree_added_by_type.values():
                        assert worst <= bound
                    if before:
                        satisfied_fractions.append(
                            len(rep_it.satisfied) / len(before))
            assert rep.best_cost is not None
        assert checked_iterations > 0
        polylog_floor = 1.0 / (1.0 + math.log(12)) ** 2
        mean_fraction = sum(satisfied_fractions) / len(satisfied_fractions)
        assert mean_fraction >= polylog_floor

    def test_deterministic_reports(self):
        g = random_graph(8, 0.4, seed=5)
        cfg = PipelineConfig(seed=11, lambda_search="powers-of-two",
                             max_iterations=4)
        _, rep_a = approximate_ld2s(g, cfg)
        _, rep_b = approximate_ld2s(g, cfg)
        assert render_report(rep_a) == render_report(rep_b)


class TestRenderReport:
    def test_report_is_valid_json_with_expected_fields(self):
        g = Graph.complete(4)
        h, rep = approximate_ld2s(g, PipelineConfig(seed=6))
        payload = json.loads(render_report(rep))
        assert payload["n"] == 4 and payload["m"] == 6
        assert payload["best"]["cost"] == rep.best_cost
        assert sorted(tuple(e) for e in payload["best"]["edges"]) == \
            sorted(h.edges)
        some_iter = payload["budgets"][-1]["iterations"][0]
        assert some_iter["x_threshold"] == 0.25
        assert "degree_added_by_type" in some_iter
