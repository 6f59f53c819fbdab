"""Benchmark matrix and convergence studies over the built-in problems.

The benchmark mirrors the structure of classical stiff-solver comparison
tables: every built-in kinetics problem at two tolerances, solved by the
additive scheme with and without stability control and by the two
explicit comparators, with exact work counters per cell.  Cells are
independent, so they may run in parallel processes; results are always
assembled in matrix order, which keeps repeated runs byte-identical.
"""

from __future__ import annotations

import csv
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .coefficients import derive_embedded, derive_scheme
from .exceptions import NonFiniteState, ReferenceUnavailable, SolverError
from .problems import Tolerances, builtin
from .reference_rk import FEHLBERG45, MERSON, TABLEAUS, rk_integrate, rk_step
from .stepper import (
    ControllerConfig,
    RunStatistics,
    embedded_difference,
    integrate,
    integrate_fixed,
)

BENCH_PROBLEMS = ("example1", "example2", "example3", "example4")
BENCH_TOLS = (1e-2, 1e-4)
BENCH_METHODS = ("asode3", "asode3-nocontrol", "merson", "rkf45")

CSV_COLUMNS = ("problem", "tol", "method", "phi_evals", "g_evals",
               "factorizations", "solves", "steps_acc", "steps_rej")


class CellSpec(NamedTuple):
    problem: str
    tol: float
    method: str


@dataclass(frozen=True)
class CellResult:
    """Outcome of one benchmark cell; wall_seconds never enters the CSV."""

    problem: str
    tol: float
    method: str
    ok: bool
    error: str
    t_final: float
    y_final: tuple
    phi_evals: int
    g_evals: int
    factorizations: int
    solves: int
    steps_accepted: int
    steps_rejected: int
    wall_seconds: float


def default_matrix() -> list:
    """Every built-in benchmark problem x tolerance x method."""
    return [CellSpec(p, tol, m)
            for p in BENCH_PROBLEMS
            for tol in BENCH_TOLS
            for m in BENCH_METHODS]


def run_cell(spec: CellSpec) -> CellResult:
    """Run one cell; solver failures are captured in the result, not raised.

    A failed additive run reports zero counters (the work done before the
    failure is not observable from outside the integrator); a failed
    explicit run reports the attempts it made before giving up.
    """
    p = builtin(spec.problem)
    tol = Tolerances.uniform(spec.tol, p.n)
    stats = RunStatistics()
    ok, err_msg, t, y = True, "", math.nan, ()
    start = time.perf_counter()
    try:
        if spec.method in ("asode3", "asode3-nocontrol"):
            scheme = derive_scheme()
            emb = derive_embedded(scheme)
            cfg = ControllerConfig(
                stability_control=(spec.method == "asode3"))
            res = integrate(p, scheme, emb, tol, cfg)
            stats, t, y = res.stats, res.t, tuple(res.y)
        elif spec.method in TABLEAUS:
            t, y, stats = rk_integrate(TABLEAUS[spec.method], p.full,
                                       tuple(p.y0), (p.t0, p.t_end), tol,
                                       p.h0, stats=stats)
        else:
            raise ValueError(f"unknown benchmark method {spec.method!r}")
    except SolverError as exc:
        ok = False
        err_msg = f"{type(exc).__name__}: {exc}"
    wall = time.perf_counter() - start
    return CellResult(problem=spec.problem, tol=spec.tol, method=spec.method,
                      ok=ok, error=err_msg, t_final=t, y_final=tuple(y),
                      phi_evals=stats.phi_evals, g_evals=stats.g_evals,
                      factorizations=stats.factorizations,
                      solves=stats.linear_solves,
                      steps_accepted=stats.steps_accepted,
                      steps_rejected=stats.steps_rejected,
                      wall_seconds=wall)


def _worker_cap(n_cells: int) -> int:
    env = os.environ.get("ASODE_THREADS")
    if env is None:
        cap = os.cpu_count() or 1
    else:
        try:
            cap = int(env)
        except ValueError:
            raise ValueError(
                f"ASODE_THREADS must be a positive integer, got {env!r}"
            ) from None
        if cap < 1:
            raise ValueError(
                f"ASODE_THREADS must be a positive integer, got {env!r}")
    return max(1, min(cap, n_cells))


def run_matrix(specs: Optional[Sequence[CellSpec]] = None,
               max_workers: Optional[int] = None) -> list:
    """Run benchmark cells, in parallel processes when workers permit.

    Results come back in spec order regardless of completion order.  The
    worker count defaults to the CPU count capped by ASODE_THREADS; when
    it resolves to one, or when the platform cannot spawn worker
    processes, the cells run serially in this process.
    """
    specs = list(specs) if specs is not None else default_matrix()
    if not specs:
        return []
    workers = (max_workers if max_workers is not None
               else _worker_cap(len(specs)))
    if workers > 1:
        try:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                return list(pool.map(run_cell, specs))
        except (OSError, PermissionError):
            pass
    return [run_cell(s) for s in specs]


def format_table(results: Sequence[CellResult]) -> str:
    """Aligned text table of the benchmark matrix."""
    headers = ("problem", "tol", "method", "phi_evals", "g_evals",
               "factorizations", "solves", "steps_acc", "steps_rej",
               "status", "wall_s")
    rows = []
    for r in results:
        status = "ok" if r.ok else f"FAIL({r.error.split(':', 1)[0]})"
        rows.append((r.problem, f"{r.tol:g}", r.method, str(r.phi_evals),
                     str(r.g_evals), str(r.factorizations), str(r.solves),
                     str(r.steps_accepted), str(r.steps_rejected), status,
                     f"{r.wall_seconds:.2f}"))
    widths = [max(len(h), max((len(row[i]) for row in rows), default=0))
              for i, h in enumerate(headers)]
    right = {3, 4, 5, 6, 7, 8, 10}  # numeric columns
    def fmt(cells):
        return "  ".join(
            c.rjust(w) if i in right else c.ljust(w)
            for i, (c, w) in enumerate(zip(cells, widths))).rstrip()
    return "\n".join([fmt(headers)] + [fmt(row) for row in rows])


def write_csv(results: Sequence[CellResult], path: str) -> None:
    """Benchmark CSV with the work counters; no wall-clock columns."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for r in results:
            w.writerow([r.problem, f"{r.tol:.17g}", r.method, r.phi_evals,
                        r.g_evals, r.factorizations, r.solves,
                        r.steps_accepted, r.steps_rejected])


def verify_comparator_orders() -> dict:
    """Empirical fixed-step order check for both comparator tableaus.

    Integrates y' = -y over [0, 1] at two fixed steps and checks that the
    global-error halving slope matches each tableau's propagated order to
    within 0.3.  Runs before any benchmark is reported, so a miswired
    comparator cannot silently inflate the cost ratios.
    """
    slopes = {}
    for tab in (MERSON, FEHLBERG45):
        errors = []
        for h in (0.05, 0.025):
            y = (1.0,)
            for _ in range(round(1.0 / h)):
                y, _ = rk_step(tab, lambda s: (-s[0],), y, h)
            errors.append(abs(y[0] - math.exp(-1.0)))
        slope = math.log2(errors[0] / errors[1])
        if not (tab.order - 0.3 <= slope <= tab.order + 0.3):
            raise SolverError(
                f"comparator {tab.name} failed its fixed-step order check: "
                f"slope {slope:.3f}, expected ~{tab.order}")
        slopes[tab.name] = slope
    return slopes


@dataclass(frozen=True)
class OrderStudy:
    """Fixed-step error ladders and fitted convergence slopes."""

    problem: str
    hs: tuple
    errors: dict      # method label -> tuple of max-norm errors per h
    slopes: dict      # method label -> fitted slope of log2(err) vs log2(h)


def _fit_slope(hs, errors) -> float:
    logs = np.log2(np.maximum(np.asarray(errors, dtype=float), 1e-300))
    return float(np.polyfit(np.log2(np.asarray(hs)), logs, 1)[0])


def order_study(problem_name: str = "powerlaw", h0: float = 0.02,
                ref_tol: float = 1e-10) -> OrderStudy:
    """Convergence study at steps h0, h0/2, h0/4, h0/8.

    Measures three ladders against a reference final state: the additive
    scheme's fixed-step global error, the one-step gap between its main
    and companion solutions (one order below the solution), and Merson's
    fixed-step global error.  The reference is the problem's closed-form
    solution when it has one, otherwise an adaptive additive run at
    ref_tol; if that run fails there is nothing to measure against and
    ReferenceUnavailable is raised.
    """
    p = builtin(problem_name)
    scheme = derive_scheme()
    emb = derive_embedded(scheme)
    if p.exact is not None:
        y_ref = np.asarray(p.exact(p.t_end), dtype=float)
    else:
        try:
            res = integrate(p, scheme, emb,
                            Tolerances.uniform(ref_tol, p.n))
        except SolverError as exc:
            raise ReferenceUnavailable(
                f"no closed form for {problem_name!r} and the reference "
                f"run at tol={ref_tol:g} failed: {exc}") from exc
        y_ref = np.asarray(res.y, dtype=float)

    hs = tuple(h0 / 2.0 ** i for i in range(4))
    span = p.t_end - p.t0

    additive = []
    for h in hs:
        r = integrate_fixed(p, h, scheme, emb)
        additive.append(float(np.max(np.abs(r.y - y_ref))))

    gap = [embedded_difference(p, h, scheme, emb) for h in hs]

    explicit = []
    for h in hs:
        n = max(1, round(span / h))
        h_eff = span / n
        y = tuple(p.y0)
        for _ in range(n):
            y, _ = rk_step(MERSON, p.full, y, h_eff)
        if not all(math.isfinite(v) for v in y):
            raise NonFiniteState(
                f"merson fixed-step run diverged at h={h:g}; "
                f"pick a smaller h0 for this problem")
        explicit.append(max(abs(a - b) for a, b in zip(y, y_ref)))

    errors = {"asode3": tuple(additive), "embedded-diff": tuple(gap),
              "merson": tuple(explicit)}
    slopes = {k: _fit_slope(hs, v) for k, v in errors.items()}
    return OrderStudy(problem=problem_name, hs=hs, errors=errors,
                      slopes=slopes)
