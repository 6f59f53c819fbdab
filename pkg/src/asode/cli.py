"""Command-line front end.

Subcommands: solve (one problem, one method), bench (the full benchmark
matrix), order-study (fixed-step convergence slopes), stability-region
(|R| grid as CSV), coeffs (derived coefficient tables).

Every subcommand accepts plain flags plus an optional key=value config
file; flags override file entries, and unknown file keys are rejected.
Exit codes: 0 success, 1 usage or configuration error, 2 numerical
failure.  CSV output uses 17 significant digits so runs can be compared
bit-for-bit across implementations; wall-clock readings never enter CSV.
"""

from __future__ import annotations

import argparse
import csv
import sys
import time
from typing import Optional

import numpy as np

from . import benchmark
from .analysis import stability_region_scan
from .coefficients import (
    DEFAULT_A,
    derive_embedded,
    derive_scheme,
    solve_design_quartic,
)
from .exceptions import DegenerateParameter, SolverError, UnknownProblem
from .problems import BUILTIN_NAMES, Tolerances, builtin
from .reference_rk import TABLEAUS, rk_integrate
from .stepper import ControllerConfig, integrate

SOLVE_METHODS = ("asode3",) + tuple(sorted(TABLEAUS))


class ConfigError(Exception):
    """Invalid command line, config file, or flag value."""


def _g17(x) -> str:
    return f"{float(x):.17g}"


def _conv_float(text: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"expected a number, got {text!r}") from None


def _conv_positive_float(text: str) -> float:
    val = _conv_float(text)
    if not val > 0.0:
        raise ConfigError(f"expected a positive number, got {text!r}")
    return val


def _conv_positive_int(text: str) -> int:
    try:
        val = int(text)
    except ValueError:
        raise ConfigError(f"expected an integer, got {text!r}") from None
    if val < 1:
        raise ConfigError(f"expected a positive integer, got {text!r}")
    return val


def _conv_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}")


def _conv_method(text: str) -> str:
    if text not in SOLVE_METHODS:
        raise ConfigError(f"unknown method {text!r}; "
                          f"choose from {', '.join(SOLVE_METHODS)}")
    return text


def _conv_which(text: str) -> str:
    if text not in ("main", "embedded"):
        raise ConfigError(f"unknown stability function {text!r}; "
                          f"choose 'main' or 'embedded'")
    return text


# per-subcommand config schema: key -> (converter for file values, default)
_SOLVE_SCHEMA = {
    "problem": (str, None),
    "method": (_conv_method, "asode3"),
    "tol": (_conv_positive_float, 1e-4),
    "tol_file": (str, None),
    "h0": (_conv_positive_float, None),
    "t_end": (_conv_float, None),
    "trace": (str, None),
    "stability_control": (_conv_bool, True),
}
_BENCH_SCHEMA = {
    "csv": (str, None),
}
_ORDER_SCHEMA = {
    "problem": (str, "powerlaw"),
    "h0": (_conv_positive_float, 0.02),
    "ref_tol": (_conv_positive_float, 1e-10),
}
_REGION_SCHEMA = {
    "x_min": (_conv_float, -3.0),
    "x_max": (_conv_float, 0.5),
    "x_points": (_conv_positive_int, 71),
    "z_min": (_conv_float, -5.0),
    "z_max": (_conv_float, 1.0),
    "z_points": (_conv_positive_int, 121),
    "which": (_conv_which, "main"),
    "out": (str, None),
}
_COEFFS_SCHEMA = {
    "a": (_conv_float, DEFAULT_A),
    "csv": (str, None),
}


def _load_config_file(path: str) -> dict:
    try:
        with open(path) as fh:
            raw_lines = fh.read().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from None
    entries = {}
    for lineno, raw in enumerate(raw_lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, "
                              f"got {line!r}")
        key, value = line.split("=", 1)
        key = key.strip().replace("-", "_")
        if not key:
            raise ConfigError(f"{path}:{lineno}: empty key")
        if key in entries:
            raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
        entries[key] = value.strip()
    return entries


def _resolve(args: argparse.Namespace, schema: dict) -> dict:
    """Merge flag values over config-file entries over schema defaults."""
    file_entries = (_load_config_file(args.config)
                    if getattr(args, "config", None) else {})
    unknown = sorted(set(file_entries) - set(schema))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    cfg = {}
    for key, (convert, default) in schema.items():
        flag_value = getattr(args, key)
        if flag_value is not None:
            cfg[key] = flag_value
        elif key in file_entries:
            cfg[key] = convert(file_entries[key])
        else:
            cfg[key] = default
    return cfg


def _load_tol_file(path: str, n: int) -> Tolerances:
    """Per-component tolerances: one 'atol rtol' pair per line."""
    try:
        with open(path) as fh:
            raw_lines = fh.read().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read tolerance file: {exc}") from None
    rows = [ln.split("#", 1)[0].split() for ln in raw_lines]
    rows = [r for r in rows if r]
    if len(rows) != n:
        raise ConfigError(f"tolerance file has {len(rows)} rows but the "
                          f"problem has {n} components")
    try:
        pairs = [(float(r[0]), float(r[1])) for r in rows if len(r) == 2]
        if len(pairs) != len(rows):
            raise ValueError("row width")
        return Tolerances(atol=np.array([p[0] for p in pairs]),
                          rtol=np.array([p[1] for p in pairs]))
    except ValueError as exc:
        raise ConfigError(
            f"tolerance file rows must be 'atol rtol' pairs ({exc})"
        ) from None


def _write_trace_csv(path: str, rows, n: int) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "h", "err", "v"]
                        + [f"y{i}" for i in range(1, n + 1)])
        for t, h, err, v, y in rows:
            writer.writerow([_g17(t), _g17(h), _g17(err),
                             "" if v is None else _g17(v)]
                            + [_g17(c) for c in y])


def cmd_solve(args: argparse.Namespace) -> int:
    cfg = _resolve(args, _SOLVE_SCHEMA)
    if cfg["problem"] is None:
        raise ConfigError("--problem is required (flag or config file)")
    problem = builtin(cfg["problem"])
    if cfg["tol_file"] is not None:
        tol = _load_tol_file(cfg["tol_file"], problem.n)
    else:
        tol = Tolerances.uniform(cfg["tol"], problem.n)
    want_trace = cfg["trace"] is not None

    start = time.perf_counter()
    if cfg["method"] == "asode3":
        scheme = derive_scheme()
        embedded = derive_embedded(scheme)
        controller = ControllerConfig(
            stability_control=cfg["stability_control"])
        result = integrate(problem, scheme, embedded, tol, controller,
                           collect_trace=want_trace, t_end=cfg["t_end"],
                           h0=cfg["h0"])
        t, y, stats, trace = result.t, result.y, result.stats, result.trace
    else:
        tableau = TABLEAUS[cfg["method"]]
        t_stop = cfg["t_end"] if cfg["t_end"] is not None else problem.t_end
        h0 = cfg["h0"] if cfg["h0"] is not None else problem.h0
        out = rk_integrate(tableau, problem.full, tuple(problem.y0),
                           (problem.t0, t_stop), tol, h0,
                           collect_trace=want_trace)
        trace = out[3] if want_trace else None
        t, y, stats = out[0], out[1], out[2]
    wall = time.perf_counter() - start

    if want_trace:
        _write_trace_csv(cfg["trace"], trace, problem.n)
    print(f"problem:         {cfg['problem']}")
    print(f"method:          {cfg['method']}")
    if cfg["tol_file"] is not None:
        print(f"tol:             per-component from {cfg['tol_file']}")
    else:
        print(f"tol:             {cfg['tol']:g}")
    if cfg["method"] == "asode3":
        state = "on" if cfg["stability_control"] else "off"
        print(f"stability ctrl:  {state}")
    print(f"reached t:       {_g17(t)}")
    print(f"final state:     {' '.join(_g17(c) for c in y)}")
    for key, value in (("phi_evals", stats.phi_evals),
                       ("g_evals", stats.g_evals),
                       ("factorizations", stats.factorizations),
                       ("solves", stats.linear_solves),
                       ("steps_accepted", stats.steps_accepted),
                       ("steps_rejected", stats.steps_rejected)):
        print(f"{key + ':':<17}{value}")
    print(f"wall_seconds:    {wall:.3f}")
    if want_trace:
        print(f"trace:           {cfg['trace']}")
    return 0


def cmd_bench(args: argparse.Namespace) -> int:
    cfg = _resolve(args, _BENCH_SCHEMA)
    slopes = benchmark.verify_comparator_orders()
    print("comparator fixed-step order check: "
          + ", ".join(f"{name} slope {slope:.3f}"
                      for name, slope in sorted(slopes.items())))
    try:
        results = benchmark.run_matrix()
    except ValueError as exc:     # bad ASODE_THREADS is a config problem
        raise ConfigError(str(exc)) from None
    print(benchmark.format_table(results))
    if cfg["csv"] is not None:
        benchmark.write_csv(results, cfg["csv"])
        print(f"wrote {cfg['csv']}")
    failed = [r for r in results if not r.ok]
    if failed:
        for r in failed:
            print(f"FAIL {r.problem}/{r.tol:g}/{r.method}: {r.error}",
                  file=sys.stderr)
        return 2
    return 0


def cmd_order_study(args: argparse.Namespace) -> int:
    cfg = _resolve(args, _ORDER_SCHEMA)
    study = benchmark.order_study(cfg["problem"], cfg["h0"], cfg["ref_tol"])
    methods = tuple(study.errors)
    print(f"problem: {study.problem}")
    header = "h".ljust(12) + "".join(m.rjust(16) for m in methods)
    print(header)
    for i, h in enumerate(study.hs):
        row = f"{h:<12g}" + "".join(
            f"{study.errors[m][i]:>16.6e}" for m in methods)
        print(row)
    for m in methods:
        print(f"{m} slope: {study.slopes[m]:.3f}")
    return 0


def cmd_stability_region(args: argparse.Namespace) -> int:
    cfg = _resolve(args, _REGION_SCHEMA)
    if not cfg["x_min"] <= cfg["x_max"]:
        raise ConfigError("x_min must not exceed x_max")
    if not cfg["z_min"] <= cfg["z_max"]:
        raise ConfigError("z_min must not exceed z_max")
    xs = np.linspace(cfg["x_min"], cfg["x_max"], cfg["x_points"])
    zs = np.linspace(cfg["z_min"], cfg["z_max"], cfg["z_points"])
    grid = stability_region_scan(xs, zs, cfg["which"])
    dest = open(cfg["out"], "w", newline="") if cfg["out"] else sys.stdout
    try:
        writer = csv.writer(dest)
        writer.writerow([""] + [_g17(x) for x in xs])
        for z, row in zip(zs, grid):
            writer.writerow([_g17(z)] + [_g17(v) for v in row])
    finally:
        if cfg["out"]:
            dest.close()
    inside = int(np.count_nonzero(grid <= 1.0))
    if cfg["out"]:
        print(f"wrote {cfg['out']}")
        print(f"{inside} of {grid.size} grid points have |R| <= 1")
    return 0


def cmd_coeffs(args: argparse.Namespace) -> int:
    cfg = _resolve(args, _COEFFS_SCHEMA)
    scheme = derive_scheme(cfg["a"])
    embedded = derive_embedded(scheme)
    rows = [("a", scheme.a), ("gamma", scheme.gamma)]
    rows += [(f"p{i}", v) for i, v in enumerate(scheme.p, start=1)]
    rows += [("alpha42", scheme.alpha4[1]), ("alpha43", scheme.alpha4[2]),
             ("beta42", scheme.beta4[1]), ("beta43", scheme.beta4[2]),
             ("beta63", scheme.beta6[2]), ("beta64", scheme.beta6[3]),
             ("beta65", scheme.beta6[4])]
    rows += [(f"r{i}", v) for i, v in enumerate(embedded.r, start=1)]
    width = max(len(name) for name, _ in rows)
    for name, value in rows:
        print(f"{name:<{width}}  {_g17(value)}")
    quartic = solve_design_quartic()
    print(f"{'design quartic roots:':<{width}}  "
          + " ".join(_g17(r) for r in quartic.roots))
    if cfg["csv"] is not None:
        with open(cfg["csv"], "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["name", "value"])
            for name, value in rows:
                writer.writerow([name, _g17(value)])
        print(f"wrote {cfg['csv']}")
    return 0


class _Parser(argparse.ArgumentParser):
    """Routes argparse usage errors to exit code 1 instead of 2."""

    def error(self, message):
        raise ConfigError(message)


def build_parser() -> _Parser:
    parser = _Parser(prog="asode",
                     description="Additive third-order solver for stiff "
                                 "split systems, with benchmark and "
                                 "analysis commands.")
    sub = parser.add_subparsers(dest="command", metavar="command")

    p_solve = sub.add_parser(
        "solve", help="integrate one built-in problem")
    p_solve.add_argument("--problem", default=None,
                         help=f"one of: {', '.join(BUILTIN_NAMES)}")
    p_solve.add_argument("--method", default=None, choices=SOLVE_METHODS)
    p_solve.add_argument("--tol", type=float, default=None,
                         help="uniform absolute and relative tolerance")
    p_solve.add_argument("--tol-file", default=None,
                         help="per-component tolerances, one 'atol rtol' "
                              "pair per line (overrides --tol)")
    p_solve.add_argument("--h0", type=float, default=None,
                         help="initial stepsize (default: the problem's)")
    p_solve.add_argument("--t-end", type=float, default=None,
                         help="override the problem's end time")
    p_solve.add_argument("--trace", default=None,
                         help="write per-step CSV trace to this path")
    p_solve.add_argument("--stability-control", default=None,
                         action=argparse.BooleanOptionalAction,
                         help="stepsize cap from the explicit-part "
                              "stability estimate (asode3 only)")
    p_solve.add_argument("--config", default=None,
                         help="key=value file; flags override it")
    p_solve.set_defaults(func=cmd_solve)

    p_bench = sub.add_parser(
        "bench", help="run the full benchmark matrix")
    p_bench.add_argument("--csv", default=None,
                         help="also write the matrix as CSV to this path")
    p_bench.add_argument("--config", default=None)
    p_bench.set_defaults(func=cmd_bench)

    p_order = sub.add_parser(
        "order-study", help="fixed-step convergence slopes")
    p_order.add_argument("--problem", default=None)
    p_order.add_argument("--h0", type=float, default=None,
                         help="coarsest step of the h, h/2, h/4, h/8 ladder")
    p_order.add_argument("--ref-tol", type=float, default=None,
                         help="tolerance of the reference run for problems "
                              "without a closed-form solution")
    p_order.add_argument("--config", default=None)
    p_order.set_defaults(func=cmd_order_study)

    p_region = sub.add_parser(
        "stability-region", help="|R| over an (x, z) grid as CSV")
    p_region.add_argument("--x-min", type=float, default=None)
    p_region.add_argument("--x-max", type=float, default=None)
    p_region.add_argument("--x-points", type=int, default=None)
    p_region.add_argument("--z-min", type=float, default=None)
    p_region.add_argument("--z-max", type=float, default=None)
    p_region.add_argument("--z-points", type=int, default=None)
    p_region.add_argument("--which", default=None,
                          choices=("main", "embedded"))
    p_region.add_argument("--out", default=None,
                          help="CSV path (default: stdout)")
    p_region.add_argument("--config", default=None)
    p_region.set_defaults(func=cmd_stability_region)

    p_coeffs = sub.add_parser(
        "coeffs", help="derived scheme and estimator coefficients")
    p_coeffs.add_argument("--a", type=float, default=None,
                          help="free scheme parameter (default: the "
                               "L-stable design root)")
    p_coeffs.add_argument("--csv", default=None,
                          help="also write name,value rows to this path")
    p_coeffs.add_argument("--config", default=None)
    p_coeffs.set_defaults(func=cmd_coeffs)

    return parser


def main(argv: Optional[list] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not hasattr(args, "func"):
            parser.print_usage(sys.stderr)
            print("error: a subcommand is required", file=sys.stderr)
            return 1
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (UnknownProblem, DegenerateParameter) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SolverError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def console_main() -> None:
    sys.exit(main())


if __name__ == "__main__":
    console_main()
