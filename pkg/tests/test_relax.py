"""Relaxation builder tests.

The load-bearing check is lift/checker agreement: a subgraph's 0/1 lift
satisfies the bipartite system exactly when the subgraph passes the
nearly-regular checker. Frozen constants were derived by substituting the
candidate point into each row by hand.
"""

import math
import random

import pytest

from spannerforge.graphs import (
    BipartiteGraph,
    Graph,
    GraphError,
    ParamTuple,
    double_cover,
    is_nearly_regular,
    slack_constant,
)
from spannerforge.lp import parse_lp_text, export_lp_text, solve, structurally_equal
from spannerforge.relax import (
    build_bipartite_smes_lp,
    build_kp_lp,
    build_ld2s_lp,
    build_smes_lp,
    canonical_subset,
    edge_element,
    integral_lift,
    lift_evaluator,
    lift_is_feasible,
    spanner_certificate,
    subset_count,
    subset_name,
    variable_manifest,
    vertex_element,
)


def k22_host():
    return BipartiteGraph([0, 1], [2, 3], [(0, 2), (0, 3), (1, 2), (1, 3)])


def path_host():
    # Two-edge path 0-2-1 with the middle vertex alone on side 1.
    return BipartiteGraph([0, 1], [2], [(0, 2), (1, 2)])


class TestNaming:
    def test_canonical_order_and_names(self):
        T = canonical_subset([edge_element(5, 2), vertex_element(3), vertex_element(0)])
        assert T == (("v", 0), ("v", 3), ("e", 2, 5))
        assert subset_name(T) == "y_v0__v3__e2_5"
        assert subset_name(()) == "y_empty"
        assert subset_name(T, "u1c0__") == "y_u1c0__v0__v3__e2_5"

    def test_duplicates_collapse(self):
        T = canonical_subset([vertex_element(1), vertex_element(1)])
        assert T == (("v", 1),)

    def test_subset_count(self):
        assert subset_count(3, 2, 2) == 1 + 5 + 10
        assert subset_count(4, 4, 3) == 1 + 8 + 28 + 56


class TestDegreeCoverRelaxation:
    @pytest.mark.parametrize("delta", [2, 3, 4])
    def test_complete_graph_budget_is_one(self, delta):
        # On K_{delta+1} the uniform point x = 1/delta is optimal: summing the
        # covering rows against the 2-path leg caps forces lam >= 1.
        g = Graph.complete(delta + 1)
        lp = build_kp_lp(g)
        uniform = {name: 1.0 / delta for name in lp.variables if name != "lam"}
        uniform["lam"] = 1.0
        assert lp.violation(uniform) <= 1e-9
        sol = solve(lp)
        assert sol.status == "optimal"
        assert abs(sol.objective_value - 1.0) <= 1e-7

    def test_single_edge(self):
        lp = build_kp_lp(Graph(2, [(0, 1)]))
        sol = solve(lp)
        assert abs(sol.objective_value - 1.0) <= 1e-7
        assert abs(sol.values["x_0_1"] - 1.0) <= 1e-7

    def test_triangle_variable_count(self):
        lp = build_kp_lp(Graph.complete(3))
        # 3 edge vars, one routing var per edge, and the budget.
        assert lp.n_vars == 7


class TestBipartiteSystem:
    def test_q_below_two_rejected(self):
        with pytest.raises(ValueError):
            build_bipartite_smes_lp(k22_host(), ParamTuple(1, 1, 1, 1), 1)

    def test_variable_count_and_round_trip(self):
        lp = build_bipartite_smes_lp(path_host(), ParamTuple(2, 1, 1, 2), 2)
        assert lp.n_vars == subset_count(3, 2, 2) == 16
        assert structurally_equal(lp, parse_lp_text(export_lp_text(lp)))

    def test_all_ones_lift_on_k22(self):
        host = k22_host()
        lp = build_bipartite_smes_lp(host, ParamTuple(2, 2, 2, 2), 2)
        lift = integral_lift(host, host.vertices, host.edges, 2)
        assert lift_is_feasible(lp, lift)

    def test_all_zero_always_feasible(self):
        # The empty variable is deliberately left unconstrained below 1, so
        # the zero point satisfies every row of any instance.
        lp = build_bipartite_smes_lp(k22_host(), ParamTuple(3, 3, 2, 2), 2)
        assert lp.violation({}) <= 1e-12
        assert solve(lp).status == "feasible"

    def test_side_size_infeasible_when_pinned(self):
        # k_b = 3 against sides of size 2: the size row at the empty set needs
        # three units of singleton mass but only two variables exist.
        lp = build_bipartite_smes_lp(k22_host(), ParamTuple(3, 3, 2, 2), 2,
                                     pin_empty=1.0)
        assert solve(lp).status == "infeasible"

    def test_degree_floor_infeasible_when_pinned(self):
        # slack(4)*17 = 2.0438... exceeds the max degree 2 of K_{2,2}, so the
        # degree floor kills all singleton mass and the size row fails.
        assert slack_constant(4) * 17 > 2
        lp = build_bipartite_smes_lp(k22_host(), ParamTuple(2, 2, 17, 17), 2,
                                     pin_empty=1.0)
        assert solve(lp).status == "infeasible"

    def test_wide_degree_window_accepts_low_degree(self):
        # d_b = 5 with slack(4)*5 = 0.601 below the realized degree 2: the
        # window is wide, so the all-ones lift stays feasible and the checker
        # agrees.
        host = k22_host()
        tau = ParamTuple(2, 2, 5, 5)
        lp = build_bipartite_smes_lp(host, tau, 2)
        lift = integral_lift(host, host.vertices, host.edges, 2)
        assert lift_is_feasible(lp, lift)
        assert is_nearly_regular(host, host.vertices, host.edges, tau)

    def test_missing_edge_breaks_tight_window(self):
        # Both endpoints of a single-edge host without the edge: degree 0
        # misses the floor slack(2)*1 = 1/6.
        host = BipartiteGraph([0], [1], [(0, 1)])
        tau = ParamTuple(1, 1, 1, 1)
        lp = build_bipartite_smes_lp(host, tau, 2)
        bad = integral_lift(host, [0, 1], [], 2)
        assert not lift_is_feasible(lp, bad)
        assert not is_nearly_regular(host, [0, 1], [], tau)
        good = integral_lift(host, [0, 1], [(0, 1)], 2)
        assert lift_is_feasible(lp, good)

    def test_closure_row_census(self):
        host = BipartiteGraph([0], [1], [(0, 1)])
        lp2 = build_bipartite_smes_lp(host, ParamTuple(1, 1, 1, 1), 2)
        assert sum(1 for r in lp2.rows if "closure" in r.label) == 0
        lp3 = build_bipartite_smes_lp(host, ParamTuple(1, 1, 1, 1), 3)
        assert sum(1 for r in lp3.rows if "closure" in r.label) == 3

    def test_monotonicity_rows_catch_inversions(self):
        lp = build_bipartite_smes_lp(path_host(), ParamTuple(2, 1, 1, 2), 2)
        assert lp.violation({"y_v0": 1.0}) >= 1.0 - 1e-12

    def test_manifest_lists_every_variable(self):
        host = path_host()
        text = variable_manifest(host, 2)
        lines = text.strip().splitlines()
        assert len(lines) == subset_count(3, 2, 2)
        assert lines[0].startswith("y_empty")


class TestLiftCheckerAgreement:
    def test_random_selections_agree(self):
        rng = random.Random(411)
        cases = 0
        for _ in range(40):
            a = rng.randint(2, 4)
            b = rng.randint(1, 3)
            edges = [(i, a + j) for i in range(a) for j in range(b)
                     if rng.random() < 0.65]
            if not edges:
                continue
            host = BipartiteGraph(range(a), range(a, a + b), edges)
            sel0 = [v for v in host.side0 if rng.random() < 0.7]
            sel1 = [v for v in host.side1 if rng.random() < 0.7]
            chosen = set(sel0) | set(sel1)
            sel_edges = [e for e in host.edges
                         if e[0] in chosen and e[1] in chosen and rng.random() < 0.8]
            tau = ParamTuple(rng.randint(0, a), rng.randint(0, b),
                             rng.randint(1, 3), rng.randint(1, 3))
            q = rng.choice([2, 3])
            lp = build_bipartite_smes_lp(host, tau, q)
            lift = integral_lift(host, sel0 + sel1, sel_edges, q)
            agrees = lift_is_feasible(lp, lift) == is_nearly_regular(
                host, sel0 + sel1, sel_edges, tau)
            assert agrees, (a, b, edges, sel0, sel1, sel_edges, tau, q)
            cases += 1
        assert cases >= 30


class TestFoldedSystem:
    def test_single_edge_lift(self):
        g = Graph(2, [(0, 1)])
        lp, block = build_smes_lp(g, ParamTuple(1, 1, 1, 1), 2)
        # Choose copy 1 of vertex 0 and copy 2 of vertex 1 plus their edge.
        assignment = integral_lift(block.cover, [0, 3], [(0, 3)], 2)
        assignment[block.z_empty] = 1.0
        assignment[block.z_vertex[0]] = 1.0
        assignment[block.z_vertex[1]] = 1.0
        assignment[block.z_edge[(0, 1)]] = 1.0
        assert lp.violation(assignment) <= 1e-7

    def test_edge_mass_below_endpoint_mass(self):
        g = Graph(2, [(0, 1)])
        lp, block = build_smes_lp(g, ParamTuple(1, 1, 1, 1), 2,
                                  pin_empty=1.0)
        lp.set_objective({name: 1.0 for name in block.z_edge.values()}, "max")
        sol = solve(lp)
        assert sol.status == "optimal"
        for (u, v), ze in block.z_edge.items():
            assert sol.values[ze] <= sol.values[block.z_vertex[u]] + 1e-7
            assert sol.values[ze] <= sol.values[block.z_vertex[v]] + 1e-7

    def test_triangle_path_lift(self):
        # Lift of the 2-path 0-1-2 inside the triangle, midpoint on side 1:
        # ends map to even cover ids 0 and 4, the midpoint to odd id 3.
        g = Graph.complete(3)
        tau = ParamTuple(2, 1, 1, 2)
        lp, block = build_smes_lp(g, tau, 2)
        assignment = integral_lift(block.cover, [0, 4, 3], [(0, 3), (4, 3)], 2)
        assignment[block.z_empty] = 1.0
        for v in (0, 1, 2):
            assignment[block.z_vertex[v]] = 1.0
        assignment[block.z_edge[(0, 1)]] = 1.0
        assignment[block.z_edge[(1, 2)]] = 1.0
        assert lp.violation(assignment) <= 1e-7


class TestSpannerSystem:
    def test_single_edge_budget_one(self):
        g = Graph(2, [(0, 1)])
        lp, index = build_ld2s_lp(g, [(0, 1)], 1, 2, [])
        sol = solve(lp)
        assert sol.status == "optimal"
        assert abs(sol.values[index.x_edge[(0, 1)]] - 1.0) <= 1e-7

    def test_single_edge_budget_zero_infeasible(self):
        g = Graph(2, [(0, 1)])
        lp, _ = build_ld2s_lp(g, [(0, 1)], 0, 2, [])
        assert solve(lp).status == "infeasible"

    def test_no_demands_degenerate(self):
        g = Graph.complete(3)
        lp, _ = build_ld2s_lp(g, [], 0, 2, [])
        sol = solve(lp)
        assert sol.status == "optimal"
        assert all(abs(v) <= 1e-9 for v in sol.values.values())

    def test_demand_outside_host_rejected(self):
        with pytest.raises(GraphError):
            build_ld2s_lp(Graph(3, [(0, 1)]), [(1, 2)], 1, 2, [])

    def test_pruning_preserves_optimum(self):
        g = Graph.complete(3)
        L = [ParamTuple(1, 1, 1, 1)]
        kept, _ = build_ld2s_lp(g, g.edges, 2, 2, L, prune_blocks=True)
        full, _ = build_ld2s_lp(g, g.edges, 2, 2, L, prune_blocks=False)
        a = solve(kept)
        b = solve(full)
        assert a.status == b.status == "optimal"
        assert abs(a.objective_value - b.objective_value) <= 1e-6

    def test_k5_certificate_and_solve(self):
        # The 5-cycle spans every chord of K_5 with max degree 2; its
        # certificate must satisfy the lam=2 system by substitution, and the
        # solver must agree the system is feasible.
        g = Graph.complete(5)
        c5 = [(0, 1), (1, 2), (2, 3), (3, 4), (0, 4)]
        lp, index, assignment, lam, L = spanner_certificate(g, g.edges, c5, 2)
        assert lam == 2
        assert L == [ParamTuple(1, 1, 1, 1)]
        assert lp.violation(assignment) <= 1e-7
        sol = solve(lp)
        assert sol.status == "optimal"

    def test_certificate_rejects_non_spanner(self):
        g = Graph.complete(4)
        with pytest.raises(GraphError):
            spanner_certificate(g, g.edges, [(0, 1)], 2)


class TestLiftEvaluator:
    def test_reads_canonical_names_with_default_zero(self):
        gp = k22_host()
        values = integral_lift(gp, [0, 2], [(0, 2)], q=2)
        y = lift_evaluator(values)
        assert y((vertex_element(0),)) == 1.0
        assert y((edge_element(2, 0),)) == 1.0  # order-insensitive
        assert y((vertex_element(1),)) == 0.0
        assert y(()) == 1.0

    def test_prefix_and_scale_with_clamp(self):
        values = {subset_name((vertex_element(7),), "blk_"): 0.4}
        y = lift_evaluator(values, prefix="blk_", scale=2.0)
        assert y((vertex_element(7),)) == pytest.approx(0.8)
        capped = lift_evaluator({subset_name((), "blk_"): 0.9},
                                prefix="blk_", scale=2.0)
        assert capped(()) == 1.0  # scaled values clamp into [0, 1]
