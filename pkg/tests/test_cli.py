"""CLI tests: exit codes, artifact layout, determinism, golden help text."""

import csv
import io
import json
import pathlib

import pytest

from spannerforge.cli import dispatch, render_csv
from spannerforge.graphs import Graph, read_graph_text, write_graph_text
from spannerforge.lp import parse_lp_text, structurally_equal

GOLDEN = pathlib.Path(__file__).parent / "golden"


@pytest.fixture(autouse=True)
def fixed_terminal(monkeypatch):
    # argparse wraps help text at the terminal width
    monkeypatch.setenv("COLUMNS", "80")


def write_graph(path, g):
    path.write_text(write_graph_text(g))
    return str(path)


def manifest_without_clock(path):
    payload = json.loads(pathlib.Path(path).read_text())
    payload.pop("wall_clock_seconds")
    return payload


class TestHelpGolden:
    @pytest.mark.parametrize("name,argv", [
        ("top", ["--help"]),
        ("gen", ["gen", "--help"]),
        ("solve_ld2s", ["solve-ld2s", "--help"]),
        ("solve_smes", ["solve-smes", "--help"]),
        ("oracle", ["oracle", "--help"]),
        ("faithfulness", ["faithfulness", "--help"]),
        ("gap_demo", ["gap-demo", "--help"]),
        ("export_lp", ["export-lp", "--help"]),
    ])
    def test_help_matches_golden(self, name, argv, capsys):
        assert dispatch(argv) == 0
        out = capsys.readouterr().out
        expected = (GOLDEN / f"help_{name}.txt").read_text()
        assert out == expected

    def test_no_arguments_is_usage_error(self, capsys):
        assert dispatch([]) == 2


class TestGen:
    def test_writes_graph_meta_and_manifest(self, tmp_path, capsys):
        out = tmp_path / "g.txt"
        rc = dispatch(["gen", "--n", "10", "--alpha", "0.5",
                       "--out", str(out), "--seed", "4"])
        assert rc == 0
        g = read_graph_text(out.read_text())
        assert g.n == 10
        meta = json.loads((tmp_path / "g.txt.meta.json").read_text())
        assert meta["mode"] == "random" and meta["edges"] == g.m
        manifest = json.loads((tmp_path / "g.txt.manifest.json").read_text())
        assert manifest["command"] == "gen"
        assert manifest["outputs"] == [str(out), str(out) + ".meta.json"]
        assert "wrote" in capsys.readouterr().out

    def test_planted_metadata(self, tmp_path):
        out = tmp_path / "p.txt"
        rc = dispatch(["gen", "--n", "30", "--alpha", "0.4", "--k", "8",
                       "--beta", "0.5", "--mode", "planted",
                       "--out", str(out), "--seed", "1"])
        assert rc == 0
        meta = json.loads((tmp_path / "p.txt.meta.json").read_text())
        assert len(meta["plant_vertices"]) == 8
        assert len(meta["plant_edges"]) == 23  # ceil(8^1.5)

    def test_deterministic_bytes(self, tmp_path):
        a, b = tmp_path / "a.txt", tmp_path / "b.txt"
        for out in (a, b):
            assert dispatch(["gen", "--n", "14", "--alpha", "0.6",
                             "--out", str(out), "--seed", "9"]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_bad_alpha_is_domain_error(self, tmp_path, capsys):
        rc = dispatch(["gen", "--n", "10", "--alpha", "1.5",
                       "--out", str(tmp_path / "x.txt")])
        assert rc == 1
        assert "error:" in capsys.readouterr().err


class TestSolveLd2s:
    def test_single_edge_spanner_is_the_edge(self, tmp_path, capsys):
        graph = write_graph(tmp_path / "e.txt", Graph(2, [(0, 1)]))
        out = tmp_path / "h.txt"
        rc = dispatch(["solve-ld2s", "--graph", graph, "--out", str(out),
                       "--report", str(tmp_path / "r.json")])
        assert rc == 0
        assert "cost=1" in capsys.readouterr().out
        h = read_graph_text(out.read_text())
        assert h.edges == ((0, 1),)
        report = json.loads((tmp_path / "r.json").read_text())
        assert report["best"]["cost"] == 1
        manifest = json.loads((tmp_path / "h.txt.manifest.json").read_text())
        assert manifest["input_hash"] != ""

    def test_missing_graph_file(self, capsys):
        assert dispatch(["solve-ld2s", "--graph", "/nope/missing.txt"]) == 1

    def test_report_bytes_reproducible(self, tmp_path):
        graph = write_graph(tmp_path / "g.txt", Graph.complete(4))
        reports = []
        for name in ("r1.json", "r2.json"):
            rc = dispatch(["solve-ld2s", "--graph", graph, "--seed", "5",
                           "--report", str(tmp_path / name)])
            assert rc == 0
            reports.append((tmp_path / name).read_bytes())
        assert reports[0] == reports[1]


class TestSolveSmes:
    def test_round_trip_payload(self, tmp_path, capsys):
        graph = write_graph(tmp_path / "g.txt", Graph.complete_bipartite(3, 3))
        out = tmp_path / "s.json"
        rc = dispatch(["solve-smes", "--graph", graph, "--tau", "2,2,2,2",
                       "--out", str(out), "--seed", "2"])
        assert rc == 0
        stdout = capsys.readouterr().out
        assert "guarantee=" in stdout and "route=" in stdout
        payload = json.loads(out.read_text())
        assert set(payload) >= {"route", "mode", "guarantee", "phi",
                                "vertices", "edges", "notes"}
        assert all(len(e) == 2 for e in payload["edges"])

    def test_malformed_tau(self, tmp_path, capsys):
        graph = write_graph(tmp_path / "g.txt", Graph.complete(3))
        rc = dispatch(["solve-smes", "--graph", graph, "--tau", "2,2"])
        assert rc == 2


class TestOracle:
    def test_ld2s_prints_two_for_k4(self, tmp_path, capsys):
        graph = write_graph(tmp_path / "k4.txt", Graph.complete(4))
        assert dispatch(["oracle", "ld2s", "--graph", graph]) == 0
        assert capsys.readouterr().out.strip() == "2"

    def test_smes_with_witness(self, tmp_path, capsys):
        graph = write_graph(tmp_path / "c4.txt", Graph.cycle(4))
        rc = dispatch(["oracle", "smes", "--graph", graph, "--m", "2",
                       "--witness", "--out", str(tmp_path / "o.json")])
        assert rc == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert lines[0] == "3"
        assert len(json.loads(lines[1])) == 3
        payload = json.loads((tmp_path / "o.json").read_text())
        assert payload["optimum"] == 3 and payload["m"] == 2

    def test_smes_needs_m(self, tmp_path, capsys):
        graph = write_graph(tmp_path / "g.txt", Graph.complete(3))
        assert dispatch(["oracle", "smes", "--graph", graph]) == 2
        assert "usage error" in capsys.readouterr().err

    def test_m_rejected_for_ld2s(self, tmp_path):
        graph = write_graph(tmp_path / "g.txt", Graph.complete(3))
        assert dispatch(["oracle", "ld2s", "--graph", graph, "--m", "1"]) == 2

    def test_infeasible_target_is_domain_error(self, tmp_path):
        graph = write_graph(tmp_path / "g.txt", Graph.complete(3))
        assert dispatch(["oracle", "smes", "--graph", graph,
                         "--m", "99"]) == 1

    def test_malformed_file_reports_line(self, tmp_path, capsys):
        bad = tmp_path / "bad.txt"
        bad.write_text("3 1\n0 9\n")
        assert dispatch(["oracle", "ld2s", "--graph", str(bad)]) == 1
        assert "line 2" in capsys.readouterr().err


class TestFaithfulness:
    def test_report_written_and_parallel_identical(self, tmp_path, capsys):
        graph = write_graph(tmp_path / "g.txt", Graph.complete_bipartite(3, 3))
        outs = []
        for name, jobs in (("f1.json", "1"), ("f2.json", "2")):
            rc = dispatch(["faithfulness", "--graph", graph,
                           "--tau", "2,2,2,2", "--trials", "100",
                           "--seed", "6", "--jobs", jobs,
                           "--out", str(tmp_path / name)])
            assert rc == 0
            outs.append((tmp_path / name).read_bytes())
        assert outs[0] == outs[1]
        report = json.loads(outs[0])
        assert len(report["conditions"]) == 4
        assert capsys.readouterr().out.count("trials=100") == 2

    def test_underivable_f_needs_flag(self, tmp_path, capsys):
        graph = write_graph(tmp_path / "g.txt", Graph.complete(4))
        # a plant larger than the doubled host has no derivable factor
        rc = dispatch(["faithfulness", "--graph", graph, "--tau", "9,9,2,2",
                       "--q", "2", "--trials", "100"])
        assert rc == 2
        assert "--f" in capsys.readouterr().err


class TestGapDemo:
    def test_delta_four_csv_frozen(self, tmp_path):
        out = tmp_path / "gap.csv"
        rc = dispatch(["gap-demo", "--deltas", "4", "--out", str(out)])
        assert rc == 0
        text = out.read_text()
        assert text == ("delta,lp_value,brute_opt,ratio\n"
                        "4,1.000000000,2,2.000000000\n")

    def test_stdout_when_no_out(self, capsys):
        assert dispatch(["gap-demo", "--deltas", "4"]) == 0
        assert "delta,lp_value,brute_opt,ratio" in capsys.readouterr().out

    def test_csv_round_trip(self, tmp_path):
        out = tmp_path / "gap.csv"
        assert dispatch(["gap-demo", "--deltas", "4", "--out",
                         str(out)]) == 0
        text = out.read_text()
        rows = list(csv.reader(io.StringIO(text)))
        rebuilt = render_csv(rows[0],
                             [(int(r[0]), float(r[1]), int(r[2]), float(r[3]))
                              for r in rows[1:]])
        assert rebuilt == text

    def test_empty_deltas_header_only(self, tmp_path):
        out = tmp_path / "gap.csv"
        assert dispatch(["gap-demo", "--deltas", "", "--out", str(out)]) == 0
        assert out.read_text() == "delta,lp_value,brute_opt,ratio\n"


class TestExportLp:
    def test_kp_round_trips(self, tmp_path):
        graph = write_graph(tmp_path / "g.txt", Graph.complete(4))
        out = tmp_path / "kp.lp"
        rc = dispatch(["export-lp", "--builder", "kp", "--graph", graph,
                       "--out", str(out)])
        assert rc == 0
        parsed = parse_lp_text(out.read_text())
        from spannerforge.relax import build_kp_lp
        assert structurally_equal(parsed, build_kp_lp(Graph.complete(4)))

    def test_smes_needs_tau(self, tmp_path):
        graph = write_graph(tmp_path / "g.txt", Graph.complete(3))
        assert dispatch(["export-lp", "--builder", "smes",
                         "--graph", graph]) == 2

    def test_ld2s_needs_lam(self, tmp_path):
        graph = write_graph(tmp_path / "g.txt", Graph.complete(3))
        assert dispatch(["export-lp", "--builder", "ld2s",
                         "--graph", graph]) == 2

    def test_ld2s_writes_parseable_lp(self, tmp_path):
        graph = write_graph(tmp_path / "g.txt", Graph.complete(3))
        out = tmp_path / "l.lp"
        rc = dispatch(["export-lp", "--builder", "ld2s", "--graph", graph,
                       "--lam", "2", "--out", str(out)])
        assert rc == 0
        parsed = parse_lp_text(out.read_text())
        assert len(parsed.variables) > 0


class TestConfigPrecedence:
    def test_config_supplies_defaults_flags_win(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("# settings\nseed=7\nalpha=0.5\nn=10\n")
        out = tmp_path / "g.txt"
        rc = dispatch(["gen", "--n", "12", "--alpha", "0.5",
                       "--out", str(out), "--config", str(cfg)])
        assert rc == 0
        g = read_graph_text(out.read_text())
        assert g.n == 12  # the flag beat the config file
        manifest = json.loads((tmp_path / "g.txt.manifest.json").read_text())
        assert manifest["seed"] == 7  # the config filled the gap

    def test_unknown_config_key(self, tmp_path, capsys):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("wibble=3\n")
        rc = dispatch(["gen", "--n", "10", "--alpha", "0.5",
                       "--out", str(tmp_path / "g.txt"),
                       "--config", str(cfg)])
        assert rc == 2
        assert "wibble" in capsys.readouterr().err

    def test_malformed_config_line(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("just-a-word\n")
        rc = dispatch(["gen", "--n", "10", "--alpha", "0.5",
                       "--out", str(tmp_path / "g.txt"),
                       "--config", str(cfg)])
        assert rc == 2


class TestManifest:
    def test_custom_manifest_path(self, tmp_path):
        out = tmp_path / "g.txt"
        man = tmp_path / "custom.json"
        rc = dispatch(["gen", "--n", "8", "--alpha", "0.5",
                       "--out", str(out), "--manifest", str(man)])
        assert rc == 0
        payload = json.loads(man.read_text())
        assert payload["command"] == "gen"
        assert not (tmp_path / "g.txt.manifest.json").exists()

    def test_reruns_identical_after_clock_strip(self, tmp_path):
        graph = write_graph(tmp_path / "g.txt", Graph.complete(4))
        manifests = []
        for name in ("m1.json", "m2.json"):
            rc = dispatch(["solve-ld2s", "--graph", graph, "--seed", "3",
                           "--report", str(tmp_path / "r.json"),
                           "--manifest", str(tmp_path / name)])
            assert rc == 0
            manifests.append(manifest_without_clock(tmp_path / name))
        assert manifests[0] == manifests[1]


class TestRenderCsv:
    def test_formats(self):
        text = render_csv(("a", "b", "c"), [(1, 0.5, True), (2, 1.25, False)])
        assert text == "a,b,c\n1,0.500000000,1\n2,1.250000000,0\n"

    def test_empty_rows(self):
        assert render_csv(("x",), []) == "x\n"
