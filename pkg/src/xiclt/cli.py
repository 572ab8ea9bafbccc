"""Command-line interface: ``xiclt <subcommand> ...``.

Reports are JSON on stdout (or ``--out``). Exit status is 0 on success, 1 on
a domain error (for example all-equal Y values) and 2 on usage or input
errors; the error class name is printed on stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .errors import InputError, NonFiniteValue, ParseError, TooFewRows, XiError
from .estimator import reorder_by_x, xi_n
from .inference import moon_bootstrap_ci, normal_ci
from .model import Sample, load_model
from .sim import run_clt_experiment
from .theory import general_vstat_moments, mc_theory, model_theory
from .vstat import BUILTIN_KERNELS, decompose_xi


def _is_number(field: str) -> bool:
    try:
        float(field)
    except ValueError:
        return False
    return True


def ingest_csv(path: str | Path) -> Sample:
    """Read a two-column numeric CSV, with an optional header line.

    The first line is taken as a header when it has two fields and at least
    one of them is not a number. Rows are reported by their line number.

    Raises
    ------
    ParseError
        Unreadable file, wrong number of fields, or a non-numeric entry.
    NonFiniteValue
        NaN or infinite entry.
    TooFewRows
        Fewer than two data rows.
    """
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc.strerror}") from exc
    rows: list[tuple[float, float]] = []
    for lineno, fields in enumerate(csv.reader(text.splitlines()), start=1):
        if not fields or all(not f.strip() for f in fields):
            continue
        fields = [f.strip() for f in fields]
        if len(fields) != 2:
            raise ParseError(f"row {lineno}: expected 2 comma-separated fields, found {len(fields)}", row=lineno)
        if lineno == 1 and not all(_is_number(f) for f in fields):
            continue
        vals = []
        for col, f in enumerate(fields, start=1):
            try:
                v = float(f)
            except ValueError:
                raise ParseError(f"row {lineno}, column {col}: not a number: {f!r}", row=lineno, column=col) from None
            if not math.isfinite(v):
                raise NonFiniteValue(f"row {lineno}, column {col}: non-finite value {f!r}", row=lineno, column=col)
            vals.append(v)
        rows.append((vals[0], vals[1]))
    if len(rows) < 2:
        raise TooFewRows(f"need at least 2 data rows, found {len(rows)}")
    return Sample.from_pairs(rows)


def _jsonable(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, float) and not math.isfinite(obj):
        return None if math.isnan(obj) else ("Infinity" if obj > 0 else "-Infinity")
    return obj


def dumps(report: dict[str, Any]) -> str:
    """JSON text for a report; floats use the shortest exact round-trip form."""
    return json.dumps(_jsonable(report), allow_nan=False)


def _cmd_xi(args) -> dict[str, Any]:
    s = ingest_csv(args.input)
    return {"xi_n": xi_n(reorder_by_x(s, args.seed)), "n": s.n, "seed": args.seed}


def _cmd_decompose(args) -> dict[str, Any]:
    s = ingest_csv(args.input)
    d = decompose_xi(reorder_by_x(s, args.seed)).to_dict()
    d["seed"] = args.seed
    return d


def _cmd_theory(args) -> dict[str, Any]:
    model = load_model(args.model)
    if args.mc:
        rep = mc_theory(model, args.outer, args.inner, args.seed)
        rep.meta["model"] = model.name
    else:
        rep = model_theory(model, args.outer, args.inner, args.seed)
    d = rep.to_dict()
    d["seed"] = args.seed
    return d


def _cmd_ci(args) -> dict[str, Any]:
    s = ingest_csv(args.input)
    if args.method == "plugin":
        res = normal_ci(s, args.level, args.seed)
    else:
        res = moon_bootstrap_ci(s, args.m, args.B, args.level, args.seed)
    d = res.to_dict()
    d["seed"] = args.seed
    return d


def _cmd_simulate(args) -> dict[str, Any]:
    model = load_model(args.model)
    res = run_clt_experiment(model, args.n, args.reps, args.seed)
    if args.hist:
        res.write_histogram_csv(args.hist)
    return res.to_dict()


def _cmd_vstat_moments(args) -> dict[str, Any]:
    model = load_model(args.model)
    d = general_vstat_moments(BUILTIN_KERNELS[args.kernel], model, args.outer, args.inner, args.seed).to_dict()
    d["model"] = model.name
    d["seed"] = args.seed
    return d


def _seed(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="xiclt", description="Chatterjee's xi: estimate, limiting theory, intervals, simulation.")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--seed", type=_seed, default=0, help="random seed (default 0)")
        sp.add_argument("--out", help="write the JSON report here instead of stdout")
        sp.set_defaults(func=func)
        return sp

    sp = add("xi", _cmd_xi, "xi_n of a two-column CSV sample")
    sp.add_argument("--input", required=True)

    sp = add("decompose", _cmd_decompose, "check the kernel rewriting of xi_n on a sample")
    sp.add_argument("--input", required=True)

    sp = add("theory", _cmd_theory, "limiting mean and variance for a model")
    sp.add_argument("--model", required=True, help="model JSON file or builtin name")
    sp.add_argument("--mc", action="store_true", help="force Monte Carlo even when an exact PMF exists")
    sp.add_argument("--outer", type=int, default=10_000)
    sp.add_argument("--inner", type=int, default=1_000)

    sp = add("ci", _cmd_ci, "confidence interval for xi from a sample")
    sp.add_argument("--input", required=True)
    sp.add_argument("--method", choices=["plugin", "bootstrap"], default="bootstrap")
    sp.add_argument("--m", type=int, default=None, help="bootstrap resample size (default ceil(n^(2/3)))")
    sp.add_argument("--B", type=int, default=500)
    sp.add_argument("--level", type=float, default=0.9)

    sp = add("simulate", _cmd_simulate, "repeated-sampling check of the normal limit")
    sp.add_argument("--model", required=True)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--reps", type=int, required=True)
    sp.add_argument("--hist", help="write the histogram as CSV (bin_left, bin_right, count)")

    sp = add("vstat-moments", _cmd_vstat_moments, "Monte Carlo mean and limiting variance of a pair V-statistic")
    sp.add_argument("--model", required=True)
    sp.add_argument("--kernel", choices=sorted(BUILTIN_KERNELS), required=True)
    sp.add_argument("--outer", type=int, default=10_000)
    sp.add_argument("--inner", type=int, default=1_000)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        text = dumps(args.func(args))
    except InputError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except XiError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    if args.out:
        Path(args.out).write_text(text + "\n")
    else:
        print(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
