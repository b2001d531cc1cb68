"""Command-line front end.

Exit codes: 0 success, 1 unreadable or invalid problem file, 2 infeasible
constraint, 3 internal solver failure, 4 command not applicable to the
problem (for example a secular curve for a constant secular function).
"""
from __future__ import annotations

import argparse
import ast
import csv
import io
import json
import math
import operator
import re
import sys

import jsonschema
import numpy as np

from .config import SolverConfig
from .errors import InfeasibleConstraint, NotApplicable, QuadconError
from .oracle import brute_force_min
from .problem import ProblemSpec, Sense
from .solution_sets import _jsonable
from .solver import solve
from .canonical import secular_curve

EXIT_OK, EXIT_PARSE, EXIT_INFEASIBLE, EXIT_INTERNAL, EXIT_NOT_APPLICABLE = 0, 1, 2, 3, 4

_number_or_expr = {"oneOf": [{"type": "number"}, {"type": "string", "minLength": 1}]}

PROBLEM_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "ProblemFile",
    "type": "object",
    "required": ["A", "B", "t", "b", "k"],
    "additionalProperties": False,
    "properties": {
        "A": {"type": "array", "minItems": 1, "items": {"type": "array", "items": _number_or_expr}},
        "B": {"type": "array", "minItems": 1, "items": {"type": "array", "items": _number_or_expr}},
        "t": {"type": "array", "items": _number_or_expr},
        "b": {"type": "array", "items": _number_or_expr},
        "k": _number_or_expr,
        "sense": {"enum": ["eq", "le"]},
        "kappa": {"type": "number"},
        "config": {
            "type": "object",
            "additionalProperties": False,
            "properties": {name: {"type": "number", "exclusiveMinimum": 0}
                           for name in SolverConfig.__dataclass_fields__},
        },
    },
}


class ProblemFileError(Exception):
    pass


_BINARY = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
           ast.Div: operator.truediv, ast.Pow: operator.pow}
_UNARY = {ast.UAdd: operator.pos, ast.USub: operator.neg}
_FUNCS = {"sqrt": math.sqrt, "abs": abs}


def evaluate_expression(text: str, variables: dict) -> float:
    """Arithmetic on numbers and named parameters; nothing else is evaluated."""

    def walk(node):
        if isinstance(node, ast.Expression):
            return walk(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.BinOp) and type(node.op) in _BINARY:
            return _BINARY[type(node.op)](walk(node.left), walk(node.right))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _UNARY:
            return _UNARY[type(node.op)](walk(node.operand))
        if isinstance(node, ast.Name):
            if node.id not in variables:
                raise ProblemFileError(f"unknown name {node.id!r} in expression {text!r}")
            return float(variables[node.id])
        if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id in _FUNCS:
            return float(_FUNCS[node.func.id](*[walk(a) for a in node.args]))
        raise ProblemFileError(f"unsupported syntax in expression {text!r}")

    try:
        tree = ast.parse(text, mode="eval")
    except SyntaxError as exc:
        raise ProblemFileError(f"cannot parse expression {text!r}: {exc.msg}") from exc
    try:
        return walk(tree)
    except ZeroDivisionError as exc:
        raise ProblemFileError(f"division by zero in expression {text!r}") from exc


def _resolve(value, variables):
    if isinstance(value, list):
        return [_resolve(v, variables) for v in value]
    if isinstance(value, str):
        return evaluate_expression(value, variables)
    return float(value)


def load_document(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ProblemFileError(f"{path}: {exc.strerror}") from exc
    try:
        doc = json.loads(text, parse_constant=lambda c: (_ for _ in ()).throw(ValueError(c)))
    except json.JSONDecodeError as exc:
        raise ProblemFileError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    except ValueError as exc:
        raise ProblemFileError(f"{path}: non-finite literal {exc} is not allowed") from exc
    try:
        jsonschema.validate(doc, PROBLEM_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ProblemFileError(f"{path}: {where}: {exc.message}") from exc
    return doc


def build_problem(doc: dict, overrides: dict | None = None) -> tuple[ProblemSpec, SolverConfig]:
    """``overrides`` may set ``kappa`` or replace entries (already resolved numbers)."""
    overrides = overrides or {}
    variables = {"kappa": overrides.get("kappa", doc.get("kappa", 0.0))}
    values = {key: _resolve(doc[key], variables) for key in ("A", "B", "t", "b", "k")}
    for key, value in overrides.items():
        if key == "kappa":
            continue
        _assign(values, key, value)
    for key in ("A", "B"):
        rows = values[key]
        if any(len(row) != len(rows) for row in rows):
            raise ProblemFileError(f"{key} must be square")
    flat = [v for key in ("A", "B") for row in values[key] for v in row] + values["t"] + values["b"] + [values["k"]]
    if not all(math.isfinite(v) for v in flat):
        raise ProblemFileError("problem entries must be finite")
    cfg = SolverConfig().with_overrides(**doc.get("config", {}))
    try:
        problem = ProblemSpec(values["A"], values["B"], values["t"], values["b"], values["k"],
                              Sense(doc.get("sense", "eq")))
    except QuadconError as exc:
        raise ProblemFileError(str(exc)) from exc
    return problem, cfg


_ENTRY = re.compile(r"^(A|B)\[(\d+),(\d+)\]$|^(t|b)\[(\d+)\]$|^k$")


def parse_param(spec: str, n: int) -> str:
    if spec == "kappa" or spec == "k":
        return spec
    m = _ENTRY.match(spec)
    if m:
        indices = [int(i) for i in m.groups() if i is not None and i.isdigit()]
        if any(i >= n for i in indices):
            raise ProblemFileError(f"parameter {spec!r} is out of range for n={n}")
        return spec
    raise ProblemFileError(f"cannot address parameter {spec!r}; use k, kappa, A[i,j], B[i,j], t[i] or b[i]")


def _assign(values: dict, key: str, value: float) -> None:
    m = _ENTRY.match(key)
    if m is None:
        raise ProblemFileError(f"cannot address parameter {key!r}")
    if key == "k":
        values["k"] = value
    elif m.group(1):
        i, j = int(m.group(2)), int(m.group(3))
        matrix = values[m.group(1)]
        matrix[i][j] = value
        matrix[j][i] = value
    else:
        values[m.group(4)][int(m.group(5))] = value


def _fmt(x) -> str:
    return "%.17g" % x


def _parse_range(text: str, parts: int) -> list[float]:
    pieces = text.split(":")
    if len(pieces) != parts:
        raise ProblemFileError(f"expected {parts} colon-separated values, got {text!r}")
    try:
        return [float(p) for p in pieces]
    except ValueError as exc:
        raise ProblemFileError(f"bad range {text!r}") from exc


def _parse_tols(items) -> dict:
    out = {}
    for item in items or []:
        name, _, value = item.partition("=")
        if name not in SolverConfig.__dataclass_fields__:
            raise ProblemFileError(f"unknown tolerance {name!r}")
        try:
            out[name] = type(getattr(SolverConfig(), name))(float(value))
        except ValueError as exc:
            raise ProblemFileError(f"bad value for {name}: {value!r}") from exc
    return out


def format_text(outcome, samples) -> str:
    sol = outcome.solution_set
    lines = [f"L = {sol.infimum:.12g}", f"attained = {str(sol.attained).lower()}",
             f"solution set = {sol.describe()}"]
    rep = sol.representative
    if rep is not None:
        lines.append("x_hat = (" + ", ".join(f"{v:.12g}" for v in rep) + ")")
    drcf = outcome.details.get("drcf")
    if drcf and drcf.get("lambda_hat") is not None:
        lines.append(f"lambda_hat = {drcf['lambda_hat']:.12g}")
    lines.append("trace:")
    for entry in outcome.trace:
        margins = ", ".join(f"{k}={v:.6g}" for k, v in entry.margins.items())
        lines.append(f"  {entry.stage}: {entry.choice}" + (f" [{margins}]" if margins else ""))
    for w in outcome.warnings:
        lines.append(f"warning: {w}")
    if samples:
        lines.append("samples:")
        for x in samples:
            lines.append("  (" + ", ".join(f"{v:.12g}" for v in x) + ")")
    return "\n".join(lines) + "\n"


def _error(stream, code: str, message: str, exit_code: int, case: str | None = None) -> int:
    payload = f"error[{code}]"
    if case is not None:
        payload += f" case={case}"
    stream.write(f"{payload}: {message}\n")
    return exit_code


def cmd_solve(args, out, err) -> int:
    doc = load_document(args.problem)
    problem, cfg = build_problem(doc)
    cfg = cfg.with_overrides(**_parse_tols(args.tol))
    if args.ineq:
        problem = problem.replace(sense=Sense.LESS_EQUAL)
    outcome = solve(problem, cfg)
    samples = []
    if args.samples:
        samples = outcome.sample(args.samples, args.seed) if outcome.attained else \
            outcome.approach_points(1e-6, args.samples, args.seed)
    if args.json:
        payload = outcome.to_dict()
        payload["samples"] = [s.tolist() for s in samples]
        out.write(json.dumps(_jsonable(payload), indent=2) + "\n")
    else:
        out.write(format_text(outcome, samples))
    return EXIT_OK


def cmd_secular(args, out, err) -> int:
    doc = load_document(args.problem)
    problem, cfg = build_problem(doc)
    outcome = solve(problem.replace(sense=Sense.EQUALITY), cfg)
    drcf = outcome.details.get("_drcf_outcome")
    if drcf is None:
        raise NotApplicable("the problem never reaches the secular-function stage")
    ctx = drcf.context
    lo, hi, steps = _parse_range(args.grid, 3)
    rows = secular_curve(ctx, lo, hi, int(steps))
    buf = io.StringIO()
    poles = " ".join(_fmt(1.0 / g) for g in ctx.gammas)
    lam = drcf.lam if drcf.regime.value == "A" else None
    buf.write(f"# poles={poles};lambda_hat={'' if lam is None else _fmt(lam)}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["lambda", "f"])
    for lam_i, f_i in rows:
        writer.writerow([_fmt(lam_i), _fmt(f_i)])
    _emit(buf.getvalue(), args.out, out)
    return EXIT_OK


_MARGIN_KEYS = re.compile(r"^(k1|c0_norm|C10_max|k_star|epsilon|delta_\d+|b_norm|b0_norm|B_max)$")


def _margin_minimum(outcome) -> tuple[str, float]:
    """Smallest nonzero tolerance-tested quantity: the nearest classification boundary.

    Exact zeros are skipped since they are structural (for example no null
    block) rather than close calls.
    """
    values = [(abs(v), k) for entry in outcome.trace for k, v in entry.margins.items()
              if _MARGIN_KEYS.match(k) and np.isfinite(v) and v != 0.0]
    if not values:
        return "", float("nan")
    v, k = min(values)
    return k, v


def _margin_row(outcome) -> list[str]:
    name, value = _margin_minimum(outcome)
    return [name, _fmt(value)]


def cmd_sweep(args, out, err) -> int:
    doc = load_document(args.problem)
    param = parse_param(args.param, len(doc["t"]))
    a, b = _parse_range(args.range, 2)
    steps = int(args.steps)
    grid = [a] if steps == 1 else list(np.linspace(a, b, steps))
    if args.values:
        grid = [float(v) for v in args.values.split(",")]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["param", "value", "infimum", "attained", "classification", "representative",
                     "margin_name", "min_margin", "error"])
    for value in grid:
        row = [param, _fmt(value)]
        try:
            problem, cfg = build_problem(doc, {param: float(value)})
            outcome = solve(problem, cfg)
            rep = outcome.representative
            labels = ";".join(f"{e.stage}:{e.choice}" for e in outcome.trace
                              if e.stage in ("psd_classification", "lagrangian_class", "solution_regime",
                                             "constraint_form", "inequality_branch", "attainment"))
            labels += f";set:{outcome.solution_set.describe()}"
            row += [_fmt(outcome.infimum), str(outcome.attained).lower(), labels,
                    "" if rep is None else " ".join(_fmt(v) for v in rep),
                    *_margin_row(outcome), ""]
        except (QuadconError, ProblemFileError) as exc:
            row += ["", "", "", "", "", "", f"{getattr(exc, 'code', 'parse_error')}: {exc}"]
        writer.writerow(row)
    _emit(buf.getvalue(), args.out, out)
    return EXIT_OK


def cmd_oracle(args, out, err) -> int:
    doc = load_document(args.problem)
    problem, _ = build_problem(doc)
    result = brute_force_min(problem, grid_range=args.range, resolution=args.resolution,
                             polish_steps=args.polish_steps)
    out.write(json.dumps(_jsonable(result.to_dict()), indent=2) + "\n")
    return EXIT_OK


def cmd_schema(args, out, err) -> int:
    out.write(json.dumps(PROBLEM_SCHEMA, indent=2) + "\n")
    return EXIT_OK


def _emit(text: str, path: str | None, out) -> None:
    if path:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        out.write(text)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="quadcon", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve a problem file")
    p.add_argument("problem")
    p.add_argument("--ineq", action="store_true", help="treat the constraint as Q(x) <= 0")
    fmt = p.add_mutually_exclusive_group()
    fmt.add_argument("--json", action="store_true")
    fmt.add_argument("--text", action="store_true")
    p.add_argument("--samples", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", action="append", metavar="NAME=VALUE")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("secular", help="export the secular function as CSV")
    p.add_argument("problem")
    p.add_argument("--grid", default="-3:0.45:200", metavar="LO:HI:STEPS",
                   help="write a negative start as --grid=-3:0.45:200")
    p.add_argument("--out")
    p.set_defaults(func=cmd_secular)

    p = sub.add_parser("sweep", help="solve along a one-parameter family")
    p.add_argument("problem")
    p.add_argument("--param", required=True)
    p.add_argument("--range", default="0:1", metavar="A:B", help="write a negative start as --range=-1:1")
    p.add_argument("--steps", type=int, default=11)
    p.add_argument("--values", help="comma-separated explicit values (overrides --range/--steps)")
    p.add_argument("--out")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("oracle", help="brute-force reference minimum (n <= 3)")
    p.add_argument("problem")
    p.add_argument("--range", type=float, default=10.0)
    p.add_argument("--resolution", type=int, default=201)
    p.add_argument("--polish-steps", type=int, default=200)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("schema", help="print the problem-file JSON schema")
    p.set_defaults(func=cmd_schema)
    return parser


def main(argv=None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, out, err)
    except ProblemFileError as exc:
        return _error(err, "parse_error", str(exc), EXIT_PARSE)
    except InfeasibleConstraint as exc:
        return _error(err, exc.code, str(exc), EXIT_INFEASIBLE, exc.case)
    except NotApplicable as exc:
        return _error(err, exc.code, str(exc), EXIT_NOT_APPLICABLE)
    except QuadconError as exc:
        return _error(err, exc.code, str(exc), EXIT_INTERNAL)
    except Exception as exc:  # noqa: BLE001 - last-resort mapping to the internal-error exit code
        return _error(err, "internal_error", f"{type(exc).__name__}: {exc}", EXIT_INTERNAL)


if __name__ == "__main__":
    sys.exit(main())
