"""Command-line interface.

Every command prints one JSON document on stdout::

    {"command": ..., "version": ..., "verdict" | "value": ..., "diagnostics": {...}}

Exit codes: 0 success, 1 negative verdict, 2 input error, 3 internal error.
``ADDITIVE_LAB_SEED`` seeds all random generation (default 0).

Usage:
    additive-lab construct wild.json
    additive-lab classify --expr "3*x" --interval 0 1
    additive-lab classify --hamel wild.json --interval 0 1 --probes auto
    additive-lab density --hamel wild.json --window 0 1 -5 5 --cells 10 --height 200
    additive-lab torus-check --values grid.csv --q 4
    additive-lab axioms --functional point-eval
"""

from __future__ import annotations

import argparse
import csv
import enum
import json
import os
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from . import hamel
from .core import AdditiveLabError, GridSpec, Oracle, OracleFailure, Parallelepiped, format_rational, midpoint_nodes
from .estimator import (
    AlphaSearchPolicy,
    ComponentVerdict,
    Inconclusive,
    Linear,
    NonlinearWitness,
    classify,
    classify_vector_valued,
    exp_integral,
    mean_value_estimate,
)
from .expr import compile_expression
from .framework import check_axioms, functional_labels, get_functional
from .torus import (
    AdditivityViolation,
    NonzeroValue,
    TorusPoint,
    TorusWitness,
    Zero,
    read_values_csv,
    torsion_vanishing,
    torus_classify,
    unit_fraction_policy,
)

EXIT_OK, EXIT_NEGATIVE, EXIT_INPUT, EXIT_INTERNAL = 0, 1, 2, 3


class InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise InputError(message)


def seed() -> int:
    raw = os.environ.get("ADDITIVE_LAB_SEED", "0")
    try:
        return int(raw)
    except ValueError:
        raise InputError(f"ADDITIVE_LAB_SEED must be an integer, got {raw!r}") from None


# -- JSON conversion ---------------------------------------------------------

def jsonable(obj, basis: hamel.HamelBasis | None = None):
    if isinstance(obj, hamel.QVector):
        if basis is None:
            return {f"#{i}": format_rational(q) for i, q in obj.items()}
        return hamel.qvector_to_json(basis, obj)
    if isinstance(obj, TorusPoint):
        return [format_rational(a) for a in obj.coords]
    if isinstance(obj, Fraction):
        return format_rational(obj)
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return [jsonable(x, basis) for x in obj.tolist()]
    if isinstance(obj, enum.Enum):
        return obj.value
    if isinstance(obj, dict):
        return {str(k): jsonable(v, basis) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(x, basis) for x in obj]
    return obj


def verdict_json(v, basis=None) -> dict:
    if isinstance(v, Linear):
        return {"verdict": "linear", "c": list(v.c)}
    if isinstance(v, NonlinearWitness):
        return {"verdict": "nonlinear", "witness": {
            "point": jsonable(v.point, basis), "alpha": format_rational(v.alpha),
            "phase": jsonable(v.phase), "phase_distance": abs(v.phase - 1), "residual": v.residual}}
    if isinstance(v, Inconclusive):
        return {"verdict": "inconclusive", "reason": v.reason}
    raise TypeError(f"not a verdict: {v!r}")


def _payload(command: str, body: dict, diagnostics: dict | None = None, basis=None) -> dict:
    out = {"command": command, "version": __version__}
    out.update(body)
    out["diagnostics"] = jsonable(diagnostics or {}, basis)
    return out


# -- shared argument handling ------------------------------------------------

def _add_domain_args(p: argparse.ArgumentParser) -> None:
    g = p.add_mutually_exclusive_group()
    g.add_argument("--interval", nargs=2, metavar=("A", "B"), help="1-D domain [A, B]")
    g.add_argument("--box", nargs="+", metavar="A1 B1", help="axis-aligned box: a1 b1 a2 b2 ...")


def _add_search_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--grid", type=int, help="nodes per axis (default 4096 in 1-D, 64 otherwise)")
    p.add_argument("--max-den", type=int, default=32, help="largest alpha denominator")
    p.add_argument("--tau", type=float, default=0.1, help="alpha acceptance threshold (fraction of volume)")


def _float_domain(args) -> Parallelepiped:
    if getattr(args, "box", None):
        vals = [float(x) for x in args.box]
        if len(vals) % 2:
            raise InputError("--box needs pairs a_k b_k")
        lo, hi = vals[0::2], vals[1::2]
        if any(b <= a for a, b in zip(lo, hi)):
            raise InputError("--box needs a_k < b_k on every axis")
        return Parallelepiped.box(lo, hi)
    if getattr(args, "interval", None):
        a, b = (float(Fraction(x)) for x in args.interval)
        if b <= a:
            raise InputError("--interval needs A < B")
        return Parallelepiped.interval(a, b)
    return Parallelepiped.interval(0.0, 1.0)


def _grid(args, n: int) -> GridSpec:
    return GridSpec.uniform(n, args.grid) if args.grid else GridSpec.default(n)


def _policy(args) -> AlphaSearchPolicy:
    return AlphaSearchPolicy(args.max_den, args.tau)


def _load_hamel(path: str) -> hamel.AdditiveMap:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    return hamel.loads(text)


def _hamel_domain(args, basis: hamel.HamelBasis) -> Parallelepiped:
    a, b = (Fraction(x) for x in (args.interval or ("0", "1")))
    if getattr(args, "box", None):
        raise InputError("Hamel sources are one-dimensional; use --interval")
    return hamel.interval_domain(basis, a, b, args.along or 0)


def _float_probes(spec: str, I: Parallelepiped, rng) -> list:
    count = 16 if spec == "auto" else _count(spec)
    return list(rng.uniform(-5.0, 5.0, (count, I.dim)))


def _count(spec: str) -> int:
    try:
        n = int(spec)
    except ValueError:
        raise InputError(f"--probes must be 'auto' or a positive integer, got {spec!r}") from None
    if n < 1:
        raise InputError("--probes must be positive")
    return n


def _node_key(x) -> tuple:
    return tuple(round(float(v), 10) for v in np.atleast_1d(x))


def csv_oracle(path: str, I: Parallelepiped, grid: GridSpec) -> tuple[Oracle, list]:
    """Lookup oracle over the rows of a ``x1,...,xn,value`` file.

    Every midpoint node of ``grid`` on ``I`` and every generator point must
    be present; extra rows are allowed (and double as probes).
    """
    n = I.dim
    table: dict[tuple, float] = {}
    points = []
    try:
        with open(path, newline="") as fh:
            for lineno, row in enumerate(csv.reader(fh), start=1):
                if not row:
                    continue
                if lineno == 1 and row[0].strip().lower().startswith("x"):
                    if len(row) != n + 1:
                        raise InputError(f"{path}: header has {len(row) - 1} coordinates, domain has {n}")
                    continue
                if len(row) != n + 1:
                    raise InputError(f"{path}:{lineno}: expected {n + 1} fields, got {len(row)}")
                try:
                    vals = [float(c) for c in row]
                except ValueError:
                    raise InputError(f"{path}:{lineno}: non-numeric field") from None
                key = _node_key(vals[:n])
                if key not in table:
                    points.append(np.array(vals[:n]))
                table[key] = vals[n]
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    for node in midpoint_nodes(I, grid):
        if _node_key(node) not in table:
            raise InputError(f"missing grid node {tuple(float(v) for v in node)}")
    for gen in I.generator_matrix():
        if _node_key(gen) not in table:
            raise InputError(f"missing value at generator point {tuple(float(v) for v in gen)}")

    def fn(X):
        out = np.empty(len(X))
        for k, x in enumerate(X):
            key = _node_key(x)
            if key not in table:
                raise OracleFailure(f"no sample at {key}", node=key)
            out[k] = table[key]
        return out

    return Oracle(fn, n, label=f"csv:{path}"), points


# -- commands ----------------------------------------------------------------

def cmd_construct(args):
    f = _load_hamel(args.path)
    rng = np.random.default_rng(seed())
    m = len(f.basis)
    pairs = [(hamel.random_qvector(rng, m), hamel.random_qvector(rng, m)) for _ in range(1000)]
    report = hamel.check_additive(f, pairs)
    if args.output:
        Path(args.output).write_text(hamel.dumps(f))
    code = EXIT_OK if report.passed else EXIT_INTERNAL
    return code, _payload("construct", {"value": hamel.to_json_dict(f)},
                          {"self_test": {"passed": report.passed, "checked": report.checked}})


def cmd_classify(args):
    rng = np.random.default_rng(seed())
    basis = None
    if args.hamel:
        f_map = _load_hamel(args.hamel)
        basis = f_map.basis
        I = _hamel_domain(args, basis)
        f = hamel.hamel_oracle(f_map)
        if args.probes == "auto":
            probes = hamel.auto_probes(basis, rng)
        else:
            probes = hamel.auto_probes(basis, rng, n_random=_count(args.probes))
    else:
        I = _float_domain(args)
        if args.csv:
            if not args.grid:
                raise InputError("--csv needs --grid matching the sampled nodes")
            f, probes = csv_oracle(args.csv, I, _grid(args, I.dim))
        else:
            f = compile_expression(args.expr, I.dim)
            probes = _float_probes(args.probes, I, rng)
    verdict = classify(f, I, probes, _grid(args, I.dim), _policy(args))
    code = EXIT_OK if isinstance(verdict, Linear) else EXIT_NEGATIVE
    return code, _payload("classify", verdict_json(verdict, basis), verdict.diagnostics, basis)


def cmd_classify_vec(args):
    rng = np.random.default_rng(seed())
    sources = []
    for comp in args.component:
        kind, _, body = comp.partition(":")
        if kind not in ("expr", "hamel") or not body:
            raise InputError(f"--component must be expr:<expression> or hamel:<path>, got {comp!r}")
        sources.append((kind, body))
    maps = [_load_hamel(body) for kind, body in sources if kind == "hamel"]
    basis = None
    if maps:
        basis = maps[0].basis
        if any(m.basis != basis for m in maps[1:]):
            raise InputError("all Hamel components must share one basis")
        I = _hamel_domain(args, basis)
        embed = hamel.hamel_oracle(maps[0]).embed
        probes = hamel.auto_probes(basis, rng)
        it = iter(maps)
        comps = [hamel.hamel_oracle(next(it)) if kind == "hamel" else compile_expression(body, 1).lift(embed)
                 for kind, body in sources]
    else:
        I = _float_domain(args)
        comps = [compile_expression(body, I.dim) for _, body in sources]
        probes = _float_probes(args.probes, I, rng)
    result = classify_vector_valued(comps, I, probes, _grid(args, I.dim), _policy(args))
    if isinstance(result, ComponentVerdict):
        body = verdict_json(result.verdict, basis)
        body["component"] = result.index
        return EXIT_NEGATIVE, _payload("classify-vec", body, result.verdict.diagnostics, basis)
    return EXIT_OK, _payload("classify-vec", {"verdict": "linear", "A": result.tolist()})


def cmd_density(args):
    f = _load_hamel(args.hamel)
    report = hamel.density_witness(f, args.window, args.cells, args.height)
    rows = sorted(report.representatives.items())
    if args.points_out:
        with open(args.points_out, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "y", "cell_i", "cell_j"])
            for (i, j), (x, y, _) in rows:
                w.writerow([repr(x), repr(y), i, j])
    value = {"coverage": report.coverage, "covered": report.covered, "cells": report.cells,
             "height": report.height}
    diag = {"examined": report.examined, "saturated_at": report.saturated_at, "points_out": args.points_out}
    return EXIT_OK, _payload("density", {"value": value}, diag)


def _torsion_json(v) -> dict:
    if isinstance(v, Zero):
        return {"verdict": "zero"}
    if isinstance(v, AdditivityViolation):
        return {"verdict": "additivity_violation", "x": jsonable(v.x), "y": jsonable(v.y), "defect": v.defect}
    if isinstance(v, NonzeroValue):
        return {"verdict": "nonzero_value", "x": jsonable(v.x), "value": v.value}
    if isinstance(v, TorusWitness):
        return {"verdict": "witness", "reason": v.reason, "point": jsonable(v.point),
                "alpha": format_rational(v.alpha), "phase": jsonable(v.phase), "value": v.value}
    return verdict_json(v)


def cmd_torus_check(args):
    if not args.values and not args.expr:
        raise InputError("torus-check needs --values and/or --expr")
    results = {}
    zero = True
    if args.values:
        try:
            table = read_values_csv(Path(args.values).read_text())
        except OSError as exc:
            raise InputError(f"cannot read {args.values}: {exc.strerror}") from None
        if not table:
            raise InputError(f"{args.values}: no rows")
        v = torsion_vanishing(table, args.q)
        results["torsion"] = _torsion_json(v)
        zero &= isinstance(v, Zero)
    if args.expr:
        rng = np.random.default_rng(seed())
        f = compile_expression(args.expr, args.dim, domain="torus")
        probes = [TorusPoint([Fraction(j, 8)] * args.dim) for j in range(1, 8)]
        probes += [TorusPoint(Fraction(int(rng.integers(0, d)), d) for d in rng.integers(2, 101, args.dim))
                   for _ in range(8)]
        grid = _grid(args, args.dim)
        v = torus_classify(f, probes, grid, unit_fraction_policy(args.max_den, args.tau))
        results["classify"] = _torsion_json(v)
        zero &= isinstance(v, Zero)
    body = {"verdict": "zero" if zero else "nonzero", **results}
    return (EXIT_OK if zero else EXIT_NEGATIVE), _payload("torus-check", body)


def cmd_axioms(args):
    I = _float_domain(args)
    F = get_functional(args.functional, I, _grid(args, I.dim), _policy(args))
    report = check_axioms(F, seed=seed())
    axioms = [{"axiom": e.axiom, "status": e.status, "witness": e.witness} for e in report.entries]
    body = {"verdict": "pass" if report.passed else "fail", "functional": F.label, "axioms": axioms}
    return (EXIT_OK if report.passed else EXIT_NEGATIVE), _payload("axioms", jsonable(body))


def cmd_mean_value(args):
    I = _float_domain(args)
    f = compile_expression(args.expr, I.dim)
    if len(args.y) != I.dim:
        raise InputError(f"--y needs {I.dim} coordinates")
    est = mean_value_estimate(f, I, np.array(args.y), _grid(args, I.dim))
    return EXIT_OK, _payload("mean-value", {"value": est}, {"volume": I.volume()})


def cmd_exp_integral(args):
    I = _float_domain(args)
    f = compile_expression(args.expr, I.dim)
    try:
        alpha = Fraction(args.alpha)
    except (ValueError, ZeroDivisionError):
        raise InputError(f"bad --alpha {args.alpha!r}") from None
    val = exp_integral(f, I, alpha, _grid(args, I.dim))
    return EXIT_OK, _payload("exp-integral", {"value": [val.real, val.imag]},
                             {"abs": abs(val), "volume": I.volume()})


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="additive-lab", description="Additive-function construction and linearity tests.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", parser_class=_Parser, required=True)

    c = sub.add_parser("construct", help="validate and canonicalize a Hamel JSON file")
    c.add_argument("path")
    c.add_argument("--output", help="also write the canonical JSON here")
    c.set_defaults(handler=cmd_construct)

    c = sub.add_parser("classify", help="linear coefficient or nonlinearity witness")
    src = c.add_mutually_exclusive_group(required=True)
    src.add_argument("--expr")
    src.add_argument("--hamel")
    src.add_argument("--csv")
    _add_domain_args(c)
    _add_search_args(c)
    c.add_argument("--along", help="basis label giving the interval direction (Hamel sources)")
    c.add_argument("--probes", default="auto")
    c.set_defaults(handler=cmd_classify)

    c = sub.add_parser("classify-vec", help="componentwise classification of f: R^n -> R^m")
    c.add_argument("--component", action="append", required=True, help="expr:<expression> or hamel:<path>")
    _add_domain_args(c)
    _add_search_args(c)
    c.add_argument("--along")
    c.add_argument("--probes", default="auto")
    c.set_defaults(handler=cmd_classify_vec)

    c = sub.add_parser("density", help="graph-density coverage of a Hamel function")
    c.add_argument("--hamel", required=True)
    c.add_argument("--window", nargs=4, type=float, required=True, metavar=("X0", "X1", "Y0", "Y1"))
    c.add_argument("--cells", type=int, default=10)
    c.add_argument("--height", type=int, default=50)
    c.add_argument("--points-out", default="density_points.csv")
    c.set_defaults(handler=cmd_density)

    c = sub.add_parser("torus-check", help="torsion and phase checks for torus homomorphisms")
    c.add_argument("--values", help="CSV of x1,...,xn,value with p/q coordinates")
    c.add_argument("--q", type=int, default=None)
    c.add_argument("--expr", help="expression in x (or x1..xn) on [0,1)^n")
    c.add_argument("--dim", type=int, default=1)
    _add_search_args(c)
    c.set_defaults(handler=cmd_torus_check)

    c = sub.add_parser("axioms", help="check the regularity-functional axioms (a)-(e)")
    c.add_argument("--functional", default="integral", choices=functional_labels())
    _add_domain_args(c)
    _add_search_args(c)
    c.set_defaults(handler=cmd_axioms)

    c = sub.add_parser("mean-value", help="[Q(g, y) - Q(g, 0)] / vol(I)")
    c.add_argument("--expr", required=True)
    c.add_argument("--y", nargs="+", type=float, required=True)
    _add_domain_args(c)
    c.add_argument("--grid", type=int)
    c.set_defaults(handler=cmd_mean_value)

    c = sub.add_parser("exp-integral", help="midpoint integral of exp(i alpha g)")
    c.add_argument("--expr", required=True)
    c.add_argument("--alpha", default="1")
    _add_domain_args(c)
    c.add_argument("--grid", type=int)
    c.set_defaults(handler=cmd_exp_integral)
    return p


def _emit(payload: dict, stream=None) -> None:
    stream = stream or sys.stdout
    stream.write(json.dumps(payload, indent=2) + "\n")


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    command = None
    try:
        args = parser.parse_args(argv)
        command = args.command
        if command == "torus-check" and args.values and args.q is None:
            raise InputError("--values needs --q")
        code, payload = args.handler(args)
    except (InputError, AdditiveLabError, ValueError, json.JSONDecodeError) as exc:
        loc = getattr(exc, "location", None)
        diag = {"error": str(exc)}
        if loc:
            diag["location"] = loc
        _emit(_payload(command or "", {"value": None}, diag))
        return EXIT_INPUT
    except Exception as exc:  # noqa: BLE001 - crash contract: exit 3 with a JSON body
        _emit(_payload(command or "", {"value": None}, {"error": f"{type(exc).__name__}: {exc}"}))
        return EXIT_INTERNAL
    _emit(payload)
    return code


if __name__ == "__main__":
    sys.exit(main())
