"""Command-line front door.

Subcommands cover instance generation, the approximation pipeline, single
dense-subgraph roundings, exact oracles, Monte-Carlo faithfulness runs, the
integrality-gap demo, and LP export. Every run that writes files also writes
one manifest describing it; identical argv and seed reproduce identical
output bytes (the manifest's wall-clock field aside).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
import time
from dataclasses import dataclass

from .graphs import Graph, GraphError, ParamTuple, read_graph_text, write_graph_text
from .lp import LPError, export_lp_text, solve
from .oracles import (brute_ld2s, brute_smes, estimate_faithfulness,
                      gen_dense_vs_random)
from .params import ParameterError, derive_params
from .pipeline import (PipelineConfig, approximate_ld2s, block_rounder,
                       candidate_tuples, render_report, round_smes_instance)
from .relax import (build_kp_lp, build_ld2s_lp, build_smes_lp,
                    canonical_subset, edge_element, vertex_element)
from .rounding import (EmbeddingLimitError, RoundingFailure,
                       _normalize_evaluator, general_from_bipartite)


class UsageError(ValueError):
    """Bad flag combinations or config keys; maps to exit code 2."""


@dataclass(frozen=True)
class RunManifest:
    command: str
    settings: dict
    seed: int
    input_hash: str
    outputs: tuple[str, ...]
    wall_clock_seconds: float

    def to_json(self) -> str:
        payload = {
            "command": self.command,
            "settings": self.settings,
            "seed": self.seed,
            "input_hash": self.input_hash,
            "outputs": list(self.outputs),
            "wall_clock_seconds": self.wall_clock_seconds,
        }
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def render_csv(header, rows) -> str:
    """Stable CSV text: header row, fixed 9-decimal reals."""

    def fmt(cell) -> str:
        if isinstance(cell, bool):
            return "1" if cell else "0"
        if isinstance(cell, float):
            return f"{cell:.9f}"
        return str(cell)

    lines = [",".join(header)]
    lines.extend(",".join(fmt(c) for c in row) for row in rows)
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# parsing helpers


def _parse_tau(raw: str) -> ParamTuple:
    parts = raw.split(",")
    if len(parts) != 4:
        raise argparse.ArgumentTypeError("expected k0,k1,d0,d1")
    try:
        k0, k1, d0, d1 = (int(p) for p in parts)
    except ValueError as exc:
        raise argparse.ArgumentTypeError("tuple entries must be integers") from exc
    return ParamTuple(k0, k1, d0, d1)


def _parse_int_list(raw: str) -> tuple[int, ...]:
    try:
        return tuple(int(p) for p in raw.split(",") if p)
    except ValueError as exc:
        raise argparse.ArgumentTypeError("expected a comma-separated int list") from exc


_CONFIG_TYPES = {
    "n": int, "alpha": float, "k": int, "beta": float, "mode": str,
    "out": str, "report": str, "graph": str, "q": int,
    "lambda_search": str, "max_iterations": int, "lp_method": str,
    "tau": _parse_tau, "values": str, "m": int, "f": float, "phi": float,
    "trials": int, "jobs": int, "deltas": _parse_int_list, "builder": str,
    "lam": int, "witness": lambda raw: raw.lower() in ("1", "true", "yes"),
    "seed": int, "manifest": str,
}


def read_config(path: str) -> dict:
    """Plain key=value lines; blank lines and # comments ignored."""
    settings = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key=value")
            key, _, value = line.partition("=")
            settings[key.strip().replace("-", "_")] = value.strip()
    return settings


def _apply_config(args: argparse.Namespace, argv: list[str]) -> None:
    if not args.config:
        return
    explicit = set()
    for token in argv:
        if token.startswith("--"):
            explicit.add(token[2:].split("=")[0].replace("-", "_"))
    for key, raw in read_config(args.config).items():
        if key not in _CONFIG_TYPES:
            raise UsageError(f"unknown config key {key!r}")
        if not hasattr(args, key) or key in explicit:
            continue  # flags beat the config file
        setattr(args, key, _CONFIG_TYPES[key](raw))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spannerforge",
        description="Low-degree 2-spanner and dense-subgraph toolkit.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=0,
                       help="master seed; all randomness derives from it")
        p.add_argument("--config", default=None,
                       help="key=value settings file (flags take precedence)")
        p.add_argument("--manifest", default=None,
                       help="manifest path (default: first output + .manifest.json)")

    p = sub.add_parser("gen", help="generate a random or planted host graph")
    p.add_argument("--n", type=int, required=True, help="vertex count")
    p.add_argument("--alpha", type=float, required=True,
                   help="edge probability exponent: p = n^(alpha-1)")
    p.add_argument("--k", type=int, default=0, help="plant size (planted mode)")
    p.add_argument("--beta", type=float, default=0.0,
                   help="plant log-density (planted mode)")
    p.add_argument("--mode", choices=("random", "planted"), default="random",
                   help="whether to embed a dense plant")
    p.add_argument("--out", required=True, help="graph file to write")
    common(p)

    p = sub.add_parser("solve-ld2s", help="approximate the lowest-degree 2-spanner")
    p.add_argument("--graph", required=True, help="input graph file")
    p.add_argument("--q", type=int, default=2, help="lift level")
    p.add_argument("--lambda-search", choices=("all", "powers-of-two"),
                   default="all", dest="lambda_search",
                   help="degree budget sweep order")
    p.add_argument("--max-iterations", type=int, default=64,
                   dest="max_iterations",
                   help="rounding rounds per budget")
    p.add_argument("--lp-method", choices=("auto", "simplex", "external"),
                   default="auto", dest="lp_method", help="LP backend")
    p.add_argument("--out", default=None, help="spanner graph file")
    p.add_argument("--report", default=None, help="JSON run report path")
    common(p)

    p = sub.add_parser("solve-smes",
                       help="round one dense-subgraph instance on a graph")
    p.add_argument("--graph", required=True, help="input graph file")
    p.add_argument("--tau", type=_parse_tau, required=True,
                   help="target shape k0,k1,d0,d1")
    p.add_argument("--q", type=int, default=2, help="lift level")
    p.add_argument("--values", default=None,
                   help="JSON file of lifted variable values (default all ones)")
    p.add_argument("--out", default=None, help="JSON result path")
    common(p)

    p = sub.add_parser("oracle", help="exact brute-force optimum")
    p.add_argument("problem", choices=("ld2s", "smes"),
                   help="which optimum to compute")
    p.add_argument("--graph", required=True, help="input graph file")
    p.add_argument("--m", type=int, default=None,
                   help="edge target (smes only)")
    p.add_argument("--witness", action="store_true",
                   help="also print the witness")
    p.add_argument("--out", default=None, help="JSON result path")
    common(p)

    p = sub.add_parser("faithfulness",
                       help="Monte-Carlo check of the rounding guarantees")
    p.add_argument("--graph", required=True, help="input graph file")
    p.add_argument("--tau", type=_parse_tau, required=True,
                   help="target shape k0,k1,d0,d1")
    p.add_argument("--q", type=int, default=2, help="lift level")
    p.add_argument("--f", type=float, default=None,
                   help="faithfulness factor (default: derived)")
    p.add_argument("--phi", type=float, default=1.0,
                   help="weak-faithfulness rate to test at")
    p.add_argument("--trials", type=int, default=1000,
                   help="Monte-Carlo sample count")
    p.add_argument("--jobs", type=int, default=1,
                   help="parallel workers for the trials")
    p.add_argument("--values", default=None,
                   help="JSON file of lifted variable values (default all ones)")
    p.add_argument("--out", default=None, help="JSON report path")
    common(p)

    p = sub.add_parser("gap-demo",
                       help="LP value vs exact optimum on complete graphs")
    p.add_argument("--deltas", type=_parse_int_list, default=(4, 9, 16),
                   help="comma-separated max degrees")
    p.add_argument("--lp-method", choices=("auto", "simplex", "external"),
                   default="auto", dest="lp_method", help="LP backend")
    p.add_argument("--out", default=None, help="CSV path (default stdout)")
    common(p)

    p = sub.add_parser("export-lp", help="emit a relaxation as LP text")
    p.add_argument("--builder", choices=("kp", "smes", "ld2s"), required=True,
                   help="which relaxation to emit")
    p.add_argument("--graph", required=True, help="input graph file")
    p.add_argument("--tau", type=_parse_tau, default=None,
                   help="target shape (smes builder)")
    p.add_argument("--q", type=int, default=2, help="lift level")
    p.add_argument("--lam", type=int, default=None,
                   help="degree budget (ld2s builder)")
    p.add_argument("--out", default=None, help="LP text path (default stdout)")
    common(p)

    return parser


# ---------------------------------------------------------------------------
# shared plumbing


def _load_graph(path: str) -> Graph:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise GraphError(f"cannot read {path}: {exc}") from exc
    try:
        return read_graph_text(text)
    except GraphError as exc:
        raise GraphError(f"{path}: {exc}") from exc


def _load_values(path: str | None):
    if path is None:
        return None
    with open(path, "r", encoding="utf-8") as fh:
        table = json.load(fh)
    if not isinstance(table, dict):
        raise GraphError(f"{path}: expected a JSON object of name -> value")
    return {str(k): float(v) for k, v in table.items()}


def _hash_inputs(paths) -> str:
    digest = hashlib.sha256()
    for path in paths:
        with open(path, "rb") as fh:
            digest.update(fh.read())
    return digest.hexdigest() if paths else ""


def _write(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


# ---------------------------------------------------------------------------
# subcommand handlers; each returns (settings, input paths, output paths)


def _cmd_gen(args):
    inst = gen_dense_vs_random(args.n, args.alpha, args.k, args.beta,
                               args.mode, args.seed)
    _write(args.out, write_graph_text(inst.graph))
    meta_path = args.out + ".meta.json"
    _write(meta_path, json.dumps(inst.metadata(), indent=2, sort_keys=True) + "\n")
    print(f"wrote {args.out} (n={inst.graph.n} m={inst.graph.m})")
    settings = {"n": args.n, "alpha": args.alpha, "k": args.k,
                "beta": args.beta, "mode": args.mode}
    return settings, [], [args.out, meta_path]


def _cmd_solve_ld2s(args):
    g = _load_graph(args.graph)
    cfg = PipelineConfig(q=args.q, lambda_search=args.lambda_search,
                         max_iterations=args.max_iterations, seed=args.seed,
                         lp_method=args.lp_method)
    spanner, report = approximate_ld2s(g, cfg)
    print(f"cost={report.best_cost} lam={report.best_lam} "
          f"status={report.status} edges={spanner.m}")
    outputs = []
    if args.out:
        _write(args.out, write_graph_text(spanner))
        outputs.append(args.out)
    if args.report:
        _write(args.report, render_report(report) + "\n")
        outputs.append(args.report)
    settings = {"q": args.q, "lambda_search": args.lambda_search,
                "max_iterations": args.max_iterations,
                "lp_method": args.lp_method}
    return settings, [args.graph], outputs


def _cmd_solve_smes(args):
    g = _load_graph(args.graph)
    values = _load_values(args.values)
    sub, route = round_smes_instance(g, args.tau, args.q, values, args.seed)
    print(f"route={route} mode={sub.mode} guarantee={sub.guarantee} "
          f"phi={sub.phi:.6g} vertices={len(sub.vertices)} "
          f"edges={len(sub.edges)}")
    outputs = []
    if args.out:
        payload = {
            "route": route, "mode": sub.mode, "guarantee": sub.guarantee,
            "phi": sub.phi, "clamps": sub.clamps,
            "vertices": sorted(sub.vertices),
            "edges": sorted([list(e) for e in sub.edges]),
            "notes": list(sub.notes),
        }
        _write(args.out, json.dumps(payload, indent=2, sort_keys=True) + "\n")
        outputs.append(args.out)
    settings = {"tau": list(args.tau), "q": args.q,
                "values": args.values or ""}
    return settings, [args.graph], outputs


def _cmd_oracle(args):
    g = _load_graph(args.graph)
    if args.problem == "ld2s":
        if args.m is not None:
            raise UsageError("--m applies to the smes oracle only")
        opt, witness = brute_ld2s(g)
        witness_payload = [list(e) for e in witness]
    else:
        if args.m is None:
            raise UsageError("the smes oracle needs --m")
        opt, verts = brute_smes(g, args.m)
        witness_payload = list(verts)
    print(opt)
    if args.witness:
        print(json.dumps(witness_payload))
    outputs = []
    if args.out:
        payload = {"problem": args.problem, "optimum": opt,
                   "witness": witness_payload}
        if args.problem == "smes":
            payload["m"] = args.m
        _write(args.out, json.dumps(payload, indent=2, sort_keys=True) + "\n")
        outputs.append(args.out)
    settings = {"problem": args.problem, "m": args.m}
    return settings, [args.graph], outputs


def _folded_zeta(table: dict):
    """Base-graph view of double-cover values: a base item's allowance is the
    sum of its two cover copies, the same union bound the fold itself obeys."""
    cover = _normalize_evaluator(table)

    def zeta(elements):
        els = canonical_subset(elements)
        if len(els) == 1 and els[0][0] == "v":
            v = els[0][1]
            return min(1.0, cover((vertex_element(2 * v),))
                       + cover((vertex_element(2 * v + 1),)))
        if len(els) == 1 and els[0][0] == "e":
            _, u, w = els[0]
            return min(1.0, cover((edge_element(2 * u, 2 * w + 1),))
                       + cover((edge_element(2 * w, 2 * u + 1),)))
        return cover(els)

    return zeta


def _cmd_faithfulness(args):
    g = _load_graph(args.graph)
    values = _load_values(args.values)
    tau = args.tau
    f = args.f
    if f is None:
        try:
            f = derive_params(2 * g.n, tau.k0, tau.k1, tau.d0, tau.d1,
                              args.q).f
        except ParameterError as exc:
            raise UsageError(
                f"cannot derive f ({exc}); pass --f explicitly") from exc
    cover_eval = (lambda elements: 1.0) if values is None \
        else _normalize_evaluator(values)
    zeta_view = (lambda elements: 1.0) if values is None \
        else _folded_zeta(values)
    rounder = block_rounder(tau, args.q)

    def run_once(instance, vals, seed):
        # the rounder reads double-cover variables, not the base-side view
        return general_from_bipartite(instance, cover_eval, rounder, seed)

    report = estimate_faithfulness(run_once, g, zeta_view, f=f,
                                   trials=args.trials, seed=args.seed,
                                   phi=args.phi, jobs=args.jobs)
    print(report.describe())
    print("PASS" if report.passed else "FAIL")
    outputs = []
    if args.out:
        _write(args.out,
               json.dumps(report.as_dict(), indent=2, sort_keys=True) + "\n")
        outputs.append(args.out)
    settings = {"tau": list(tau), "q": args.q, "f": f, "phi": args.phi,
                "trials": args.trials, "jobs": args.jobs,
                "values": args.values or ""}
    return settings, [args.graph], outputs


def _cmd_gap_demo(args):
    rows = []
    for delta in args.deltas:
        if delta < 1:
            raise UsageError("every delta must be positive")
        g = Graph.complete(delta + 1)
        sol = solve(build_kp_lp(g), method=args.lp_method)
        if sol.status != "optimal":
            raise LPError(f"relaxation at delta={delta} came back {sol.status}")
        opt, _ = brute_ld2s(g)
        rows.append((delta, sol.objective_value, opt,
                     opt / sol.objective_value))
    text = render_csv(("delta", "lp_value", "brute_opt", "ratio"), rows)
    outputs = []
    if args.out:
        _write(args.out, text)
        outputs.append(args.out)
        print(f"wrote {args.out} ({len(rows)} rows)")
    else:
        print(text, end="")
    settings = {"deltas": list(args.deltas), "lp_method": args.lp_method}
    return settings, [], outputs


def _cmd_export_lp(args):
    g = _load_graph(args.graph)
    if args.builder == "kp":
        lp = build_kp_lp(g)
    elif args.builder == "smes":
        if args.tau is None:
            raise UsageError("the smes builder needs --tau")
        lp, _ = build_smes_lp(g, args.tau, args.q)
    else:
        if args.lam is None:
            raise UsageError("the ld2s builder needs --lam")
        cfg = PipelineConfig(q=args.q, seed=args.seed)
        tuples = candidate_tuples(g, g.edges, args.lam, cfg)
        lp, _ = build_ld2s_lp(g, g.edges, args.lam, args.q, tuples)
    text = export_lp_text(lp)
    outputs = []
    if args.out:
        _write(args.out, text)
        outputs.append(args.out)
        print(f"wrote {args.out} ({len(lp.variables)} variables)")
    else:
        print(text, end="")
    settings = {"builder": args.builder, "q": args.q,
                "tau": list(args.tau) if args.tau else None, "lam": args.lam}
    return settings, [args.graph], outputs


_HANDLERS = {
    "gen": _cmd_gen,
    "solve-ld2s": _cmd_solve_ld2s,
    "solve-smes": _cmd_solve_smes,
    "oracle": _cmd_oracle,
    "faithfulness": _cmd_faithfulness,
    "gap-demo": _cmd_gap_demo,
    "export-lp": _cmd_export_lp,
}

_DOMAIN_ERRORS = (GraphError, ParameterError, LPError, RoundingFailure,
                  EmbeddingLimitError, OSError, json.JSONDecodeError,
                  ValueError)


def dispatch(argv) -> int:
    """Run one subcommand; returns the process exit code."""
    argv = list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    start = time.perf_counter()
    try:
        _apply_config(args, argv)
        settings, inputs, outputs = _HANDLERS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except _DOMAIN_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    manifest_path = args.manifest
    if manifest_path is None and outputs:
        manifest_path = outputs[0] + ".manifest.json"
    if manifest_path:
        manifest = RunManifest(
            command=args.command, settings=settings, seed=args.seed,
            input_hash=_hash_inputs(inputs), outputs=tuple(outputs),
            wall_clock_seconds=round(time.perf_counter() - start, 6))
        try:
            _write(manifest_path, manifest.to_json())
        except OSError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
    return 0


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
