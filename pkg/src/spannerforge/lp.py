"""LP engine.

A LinearProgram is a sparse row/bound container with an optional linear
objective. Small systems are solved by an in-house bounded-variable primal
simplex with Bland's rule; larger ones are delegated to scipy's HiGHS backend.
Any solve can instead be redirected to an external command via the
SPANNERFORGE_LP_CMD environment variable: the command is invoked with the path
of an exported LP text file and must print a status line ("optimal",
"feasible" or "infeasible") followed by "name value" assignment lines.

Running this module as a script (``python -m spannerforge.lp FILE``) solves an
exported LP file and prints a solution in exactly that format, so the module
doubles as the reference external solver.
"""

from __future__ import annotations

import math
import os
import shlex
import subprocess
import sys
import tempfile
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

TOLERANCE = 1e-7
_SIMPLEX_LIMIT = 120  # beyond this many rows or variables, use HiGHS


class LPError(Exception):
    """Malformed program, solver breakdown, or an unsolvable request."""


@dataclass
class Row:
    label: str
    coeffs: dict[str, float]
    sense: str  # '<=', '>=' or '='
    rhs: float


class LinearProgram:
    """Sparse LP with per-variable finite lower bounds (uppers may be +inf)."""

    def __init__(self, name: str = "lp"):
        self.name = name
        self.variables: list[str] = []
        self._index: dict[str, int] = {}
        self.lower: list[float] = []
        self.upper: list[float] = []
        self.rows: list[Row] = []
        self.objective: tuple[str, dict[str, float]] | None = None

    def add_variable(self, name: str, lo: float = 0.0, hi: float = 1.0) -> str:
        if name in self._index:
            raise LPError(f"duplicate variable {name!r}")
        if not math.isfinite(lo):
            raise LPError(f"variable {name!r} needs a finite lower bound")
        if hi < lo:
            raise LPError(f"variable {name!r} has empty bound range [{lo}, {hi}]")
        self._index[name] = len(self.variables)
        self.variables.append(name)
        self.lower.append(float(lo))
        self.upper.append(float(hi))
        return name

    def has_variable(self, name: str) -> bool:
        return name in self._index

    def add_row(self, label: str, coeffs: Mapping[str, float], sense: str, rhs: float) -> None:
        if sense not in ("<=", ">=", "="):
            raise LPError(f"unknown sense {sense!r}")
        clean = {}
        for name, c in coeffs.items():
            if name not in self._index:
                raise LPError(f"row {label!r} uses unknown variable {name!r}")
            if c != 0.0:
                clean[name] = float(c)
        self.rows.append(Row(label, clean, sense, float(rhs)))

    def set_objective(self, coeffs: Mapping[str, float], sense: str = "min") -> None:
        if sense not in ("min", "max"):
            raise LPError(f"objective sense must be min or max, got {sense!r}")
        for name in coeffs:
            if name not in self._index:
                raise LPError(f"objective uses unknown variable {name!r}")
        self.objective = (sense, {k: float(v) for k, v in coeffs.items() if v != 0.0})

    @property
    def n_vars(self) -> int:
        return len(self.variables)

    def violation(self, values: Mapping[str, float]) -> float:
        """Largest absolute constraint/bound violation at the given point."""
        worst = 0.0
        for name, lo, hi in zip(self.variables, self.lower, self.upper):
            x = values.get(name, 0.0)
            worst = max(worst, lo - x, x - hi if math.isfinite(hi) else 0.0)
        for row in self.rows:
            lhs = sum(c * values.get(name, 0.0) for name, c in row.coeffs.items())
            if row.sense == "<=":
                worst = max(worst, lhs - row.rhs)
            elif row.sense == ">=":
                worst = max(worst, row.rhs - lhs)
            else:
                worst = max(worst, abs(lhs - row.rhs))
        return worst

    def objective_value(self, values: Mapping[str, float]) -> float | None:
        if self.objective is None:
            return None
        _, coeffs = self.objective
        return sum(c * values.get(name, 0.0) for name, c in coeffs.items())


@dataclass
class LPSolution:
    status: str  # 'optimal', 'feasible' or 'infeasible'
    values: dict[str, float] = field(default_factory=dict)
    max_violation: float = math.inf
    objective_value: float | None = None


# ---------------------------------------------------------------------------
# Bounded-variable primal simplex (Bland's rule)


def _simplex(lp: LinearProgram, tol: float) -> LPSolution:
    n = lp.n_vars
    m = len(lp.rows)
    # Standardize: every row becomes an equality with a slack column.
    # '>=' rows are negated first so inequality slacks live in [0, inf).
    total = n + m + m  # structurals, slacks, artificials
    A = np.zeros((m, total))
    b = np.zeros(m)
    lo = np.zeros(total)
    hi = np.zeros(total)
    lo[:n] = lp.lower
    hi[:n] = lp.upper
    for i, row in enumerate(lp.rows):
        sign = -1.0 if row.sense == ">=" else 1.0
        for name, c in row.coeffs.items():
            A[i, lp._index[name]] = sign * c
        b[i] = sign * row.rhs
        A[i, n + i] = 1.0
        hi[n + i] = 0.0 if row.sense == "=" else math.inf

    x = np.concatenate([np.array(lo[: n + m]), np.zeros(m)])
    at_upper = np.zeros(total, dtype=bool)
    resid = b - A[:, :n] @ x[:n]
    basis: list[int] = []
    for i in range(m):
        if hi[n + i] == math.inf and resid[i] >= 0:
            x[n + i] = resid[i]  # the row's own slack absorbs the residual
            basis.append(n + i)
        else:
            a = n + m + i
            A[i, a] = 1.0 if resid[i] >= 0 else -1.0
            x[a] = abs(resid[i])
            hi[a] = math.inf
            basis.append(a)
    basis_set = set(basis)
    in_basis = np.zeros(total, dtype=bool)
    in_basis[basis] = True

    def refresh_basics() -> np.ndarray:
        xn = np.where(at_upper, hi, lo)
        xn[in_basis] = 0.0
        return np.linalg.solve(A[:, basis], b - A @ xn)

    def run_phase(cost: np.ndarray, max_iter: int = 20000) -> None:
        for _ in range(max_iter):
            B = A[:, basis]
            try:
                xb = refresh_basics()
            except np.linalg.LinAlgError as exc:
                raise LPError("singular basis in simplex") from exc
            x[basis] = xb
            y = np.linalg.solve(B.T, cost[basis])
            entering = -1
            direction = 0.0
            for j in range(total):
                if in_basis[j] or lo[j] == hi[j]:
                    continue
                r = cost[j] - y @ A[:, j]
                if not at_upper[j] and r < -tol:
                    entering, direction = j, 1.0
                    break
                if at_upper[j] and r > tol:
                    entering, direction = j, -1.0
                    break
            if entering < 0:
                return
            d = np.linalg.solve(B, A[:, entering])
            # Ratio test: basic pos changes by -direction*d[pos] per unit step.
            theta = hi[entering] - lo[entering]
            leaving = -1
            leave_to_upper = False
            for pos in range(m):
                delta = -direction * d[pos]
                j = basis[pos]
                limit = None
                to_upper = False
                if delta > tol and math.isfinite(hi[j]):
                    limit = (hi[j] - x[j]) / delta
                    to_upper = True
                elif delta < -tol:
                    limit = (x[j] - lo[j]) / (-delta)
                if limit is None:
                    continue
                better = limit < theta - 1e-12
                tied = abs(limit - theta) <= 1e-12 and (leaving < 0 or j < basis[leaving])
                if better or tied:
                    theta = min(theta, limit)
                    leaving, leave_to_upper = pos, to_upper
            if theta == math.inf:
                raise LPError("unbounded direction in simplex (missing bound?)")
            theta = max(theta, 0.0)
            x[basis] += -direction * d * theta
            x[entering] = (lo[entering] + theta) if direction > 0 else (hi[entering] - theta)
            if leaving < 0:
                at_upper[entering] = not at_upper[entering]
                x[entering] = hi[entering] if at_upper[entering] else lo[entering]
                continue
            out = basis[leaving]
            x[out] = hi[out] if leave_to_upper else lo[out]
            at_upper[out] = leave_to_upper
            basis[leaving] = entering
            basis_set.discard(out)
            basis_set.add(entering)
            in_basis[out] = False
            in_basis[entering] = True
            at_upper[entering] = False  # basic flag is meaningless, keep clean
        raise LPError("simplex iteration limit exceeded")

    phase1 = np.zeros(total)
    phase1[n + m:] = 1.0
    run_phase(phase1)
    art_sum = float(np.sum(x[n + m:]))
    if art_sum > 1e-6:
        return LPSolution(status="infeasible")
    hi[n + m:] = 0.0  # artificials may stay basic at zero but can never move

    if lp.objective is not None:
        sense, coeffs = lp.objective
        cost = np.zeros(total)
        for name, c in coeffs.items():
            cost[lp._index[name]] = c if sense == "min" else -c
        run_phase(cost)

    values = {name: float(x[lp._index[name]]) for name in lp.variables}
    status = "optimal" if lp.objective is not None else "feasible"
    return LPSolution(status=status, values=values,
                      max_violation=lp.violation(values),
                      objective_value=lp.objective_value(values))


# ---------------------------------------------------------------------------
# HiGHS delegation


def _scipy_solve(lp: LinearProgram, tol: float) -> LPSolution:
    from scipy import sparse
    from scipy.optimize import linprog

    n = lp.n_vars
    c = np.zeros(n)
    if lp.objective is not None:
        sense, coeffs = lp.objective
        for name, v in coeffs.items():
            c[lp._index[name]] = v if sense == "min" else -v

    def build(rows: list[Row], flip: bool) -> tuple[sparse.csr_matrix, np.ndarray] | tuple[None, None]:
        if not rows:
            return None, None
        data, ri, ci, rhs = [], [], [], []
        for k, row in enumerate(rows):
            sign = -1.0 if (flip and row.sense == ">=") else 1.0
            for name, v in row.coeffs.items():
                ri.append(k)
                ci.append(lp._index[name])
                data.append(sign * v)
            rhs.append(sign * row.rhs)
        mat = sparse.csr_matrix((data, (ri, ci)), shape=(len(rows), n))
        return mat, np.array(rhs)

    ub_rows = [r for r in lp.rows if r.sense in ("<=", ">=")]
    eq_rows = [r for r in lp.rows if r.sense == "="]
    A_ub, b_ub = build(ub_rows, flip=True)
    A_eq, b_eq = build(eq_rows, flip=False)
    bounds = [(l, None if not math.isfinite(u) else u) for l, u in zip(lp.lower, lp.upper)]
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq,
                  bounds=bounds, method="highs")
    if res.status == 2:
        return LPSolution(status="infeasible")
    if res.status != 0:
        raise LPError(f"HiGHS failed: {res.message}")
    values = {name: float(res.x[i]) for i, name in enumerate(lp.variables)}
    status = "optimal" if lp.objective is not None else "feasible"
    return LPSolution(status=status, values=values,
                      max_violation=lp.violation(values),
                      objective_value=lp.objective_value(values))


# ---------------------------------------------------------------------------
# External command escape hatch


def _external_solve(lp: LinearProgram, command: str) -> LPSolution:
    with tempfile.NamedTemporaryFile("w", suffix=".lp", delete=False) as handle:
        handle.write(export_lp_text(lp))
        path = handle.name
    try:
        proc = subprocess.run(shlex.split(command) + [path],
                              capture_output=True, text=True, timeout=600)
    finally:
        os.unlink(path)
    if proc.returncode != 0:
        raise LPError(f"external solver failed: {proc.stderr.strip()[:500]}")
    lines = [ln.strip() for ln in proc.stdout.splitlines() if ln.strip()]
    if not lines:
        raise LPError("external solver produced no output")
    status = lines[0].lower()
    if status not in ("optimal", "feasible", "infeasible"):
        raise LPError(f"external solver status {lines[0]!r} not understood")
    if status == "infeasible":
        return LPSolution(status="infeasible")
    values = {name: 0.0 for name in lp.variables}
    for ln in lines[1:]:
        parts = ln.split()
        if len(parts) != 2:
            raise LPError(f"bad assignment line from external solver: {ln!r}")
        if parts[0] in values:
            values[parts[0]] = float(parts[1])
    return LPSolution(status=status, values=values,
                      max_violation=lp.violation(values),
                      objective_value=lp.objective_value(values))


def solve(lp: LinearProgram, tol: float = TOLERANCE, method: str = "auto") -> LPSolution:
    """Solve the program.

    method: 'auto' (external if SPANNERFORGE_LP_CMD is set, else simplex for
    small systems and HiGHS for large ones), 'simplex', 'highs' or 'external'.
    """
    if method == "auto":
        if os.environ.get("SPANNERFORGE_LP_CMD"):
            method = "external"
        elif lp.n_vars <= _SIMPLEX_LIMIT and len(lp.rows) <= _SIMPLEX_LIMIT:
            method = "simplex"
        else:
            method = "highs"
    if method == "external":
        command = os.environ.get("SPANNERFORGE_LP_CMD")
        if not command:
            raise LPError("method 'external' needs SPANNERFORGE_LP_CMD")
        sol = _external_solve(lp, command)
    elif method == "simplex":
        sol = _simplex(lp, tol)
    elif method == "highs":
        sol = _scipy_solve(lp, tol)
    else:
        raise LPError(f"unknown method {method!r}")
    if sol.status != "infeasible" and sol.max_violation > max(tol, 1e-6):
        raise LPError(
            f"solver returned a point violating constraints by {sol.max_violation:.3g}")
    return sol


# ---------------------------------------------------------------------------
# LP text format


def _fmt(value: float) -> str:
    return repr(float(value))


def export_lp_text(lp: LinearProgram) -> str:
    """Serialize in the common objective/subject-to/bounds text layout."""
    out: list[str] = [f"\\ {lp.name}"]
    sense, coeffs = lp.objective if lp.objective is not None else ("min", {})
    out.append("Maximize" if sense == "max" else "Minimize")
    terms = " ".join(f"+ {_fmt(c)} {name}" for name, c in sorted(coeffs.items()))
    out.append(f" obj: {terms}".rstrip())
    out.append("Subject To")
    for row in lp.rows:
        terms = " ".join(f"+ {_fmt(c)} {name}" for name, c in sorted(row.coeffs.items()))
        out.append(f" {row.label}: {terms} {row.sense} {_fmt(row.rhs)}")
    out.append("Bounds")
    for name, lo, hi in zip(lp.variables, lp.lower, lp.upper):
        if math.isfinite(hi):
            out.append(f" {_fmt(lo)} <= {name} <= {_fmt(hi)}")
        else:
            out.append(f" {name} >= {_fmt(lo)}")
    out.append("End")
    return "\n".join(out) + "\n"


def parse_lp_text(text: str) -> LinearProgram:
    lines = [ln.rstrip() for ln in text.splitlines()]
    lp = LinearProgram()
    section = None
    sense = "min"
    pending_rows: list[tuple[str, dict[str, float], str, float]] = []
    objective: dict[str, float] = {}
    have_objective = False
    for raw in lines:
        ln = raw.strip()
        if not ln:
            continue
        if ln.startswith("\\"):
            lp.name = ln[1:].strip() or lp.name
            continue
        low = ln.lower()
        if low in ("minimize", "maximize"):
            section = "objective"
            sense = "min" if low == "minimize" else "max"
            continue
        if low == "subject to":
            section = "rows"
            continue
        if low == "bounds":
            section = "bounds"
            continue
        if low == "end":
            break
        if section == "objective":
            label, terms = _split_label(ln)
            coeffs, _, _ = _parse_terms(terms, allow_sense=False)
            objective.update(coeffs)
            have_objective = have_objective or bool(coeffs)
        elif section == "rows":
            label, body = _split_label(ln)
            coeffs, row_sense, rhs = _parse_terms(body, allow_sense=True)
            if row_sense is None:
                raise LPError(f"constraint without sense: {ln!r}")
            pending_rows.append((label or f"c{len(pending_rows)}", coeffs, row_sense, rhs))
        elif section == "bounds":
            tokens = ln.split()
            if len(tokens) == 5 and tokens[1] == "<=" and tokens[3] == "<=":
                lp.add_variable(tokens[2], float(tokens[0]), float(tokens[4]))
            elif len(tokens) == 3 and tokens[1] == ">=":
                lp.add_variable(tokens[0], float(tokens[2]), math.inf)
            else:
                raise LPError(f"bad bounds line: {ln!r}")
        else:
            raise LPError(f"content outside any section: {ln!r}")
    for label, coeffs, row_sense, rhs in pending_rows:
        lp.add_row(label, coeffs, row_sense, rhs)
    if have_objective:
        lp.set_objective(objective, sense)
    return lp


def _split_label(ln: str) -> tuple[str, str]:
    if ":" in ln:
        label, rest = ln.split(":", 1)
        return label.strip(), rest.strip()
    return "", ln


def _parse_terms(body: str, allow_sense: bool) -> tuple[dict[str, float], str | None, float]:
    tokens = body.split()
    coeffs: dict[str, float] = {}
    sense = None
    rhs = 0.0
    i = 0
    sign = 1.0
    while i < len(tokens):
        tok = tokens[i]
        if tok in ("<=", ">=", "="):
            if not allow_sense:
                raise LPError(f"unexpected sense token {tok!r}")
            sense = tok
            rhs = float(tokens[i + 1])
            i += 2
            continue
        if tok == "+":
            sign = 1.0
            i += 1
            continue
        if tok == "-":
            sign = -1.0
            i += 1
            continue
        coef = sign * float(tok)
        name = tokens[i + 1]
        coeffs[name] = coeffs.get(name, 0.0) + coef
        sign = 1.0
        i += 2
    return coeffs, sense, rhs


def structurally_equal(a: LinearProgram, b: LinearProgram) -> bool:
    return (a.variables == b.variables and a.lower == b.lower and a.upper == b.upper
            and [(r.label, sorted(r.coeffs.items()), r.sense, r.rhs) for r in a.rows]
            == [(r.label, sorted(r.coeffs.items()), r.sense, r.rhs) for r in b.rows]
            and a.objective == b.objective)


def _main(argv: list[str]) -> int:
    if len(argv) != 1:
        print("usage: python -m spannerforge.lp FILE.lp", file=sys.stderr)
        return 2
    with open(argv[0], "r", encoding="utf-8") as handle:
        lp = parse_lp_text(handle.read())
    sol = _scipy_solve(lp, TOLERANCE)
    print(sol.status)
    if sol.status != "infeasible":
        for name in lp.variables:
            print(f"{name} {sol.values[name]!r}")
    return 0


if __name__ == "__main__":
    raise SystemExit(_main(sys.argv[1:]))
