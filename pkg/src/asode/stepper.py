"""Adaptive integration driver for the six-stage additive scheme.

At the start of every step the stiffness carrier B is evaluated at the
current state and held fixed across the stages, so the step integrates
y' = [f(y) - B*y] + B*y with a stiff part that is exactly linear.  The
matrix may be any approximation of the Jacobian (zero, diagonal, stale)
without losing third order; only the amount of stiffness left in the
non-stiff part f - B*y changes, and the stability control reacts to
that remainder.

One step attempt factors D = E - a*h*B once, performs five stage solves,
three evaluations of the full right-hand side and two stiff-part
applications, and produces both the third-order solution and the embedded
second-order one.  The scaled maximum difference between the two drives
acceptance (err <= 1) and stepsize selection.  An optional power-method
probe of the non-stiff part bounds stepsize growth by the explicit
stability interval; the probe costs two extra evaluations per step and is
reused across rejection retries of the same step by rescaling with h.

Per-step error control alone cannot see errors that all push the same
way: components with no restoring force (running integrals, neutrally
stable modes) collect the per-step bias until the global error is many
times the tolerance, while on self-damping components the same per-step
errors fade and never add up.  The drift guard tells the two cases apart
at no evaluation cost: it carries the accepted steps' main-vs-embedded
difference vectors forward, shrinking each component by its own
linearized decay factor exp(h*b_i) (b_i from the stage matrix diagonal,
growth clipped), so the running sum stays small exactly where the
dynamics forget errors.  When its scaled norm exceeds a budget, the
stepsize proposals are pressed down until the per-step bias is small
enough to respect the budget over the whole run.  Acceptance still means
err <= 1; the guard only makes the controller aim lower.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .coefficients import EmbeddedCoefficients, SchemeCoefficients
from .exceptions import (
    MaxRejectsExceeded,
    NonFiniteState,
    SingularMatrix,
    StepsizeUnderflow,
    ZeroToleranceDenominator,
)
from .linalg import DiagonalMatrix, factor
from .problems import SplitProblem, Tolerances

# err below this floor is treated as exact when inverting the error model
ERR_FLOOR = 1e-14
# stability probe skips components with denominator below this scale
PROBE_FLOOR = 1e-14
# ... and components carrying less than this share of the probe iterate:
# their ratios measure cross-coupling from larger components rather than
# growth along the dominant direction and can exceed the spectral radius
# by orders of magnitude
PROBE_SHARE_FLOOR = 0.1
# explicit-part stability interval length used by the growth cap
EXPLICIT_STABILITY_SPAN = 2.0


@dataclass
class ControllerConfig:
    """Stepsize controller settings.

    The probe coefficients must satisfy alpha21 = alpha31 + alpha32 so the
    two probe stages collapse to a power-method iteration on the non-stiff
    Jacobian.  They are kept small so the probe displacement alpha21*k1
    stays well inside the step's trust region even when the split parts
    are large and mutually canceling (near a slow manifold the first
    stage can dwarf the state); on linear problems the estimate does not
    depend on their size at all.

    drift_budget is the scaled norm (tolerance units, same scaling as
    err) the damped sum of committed step errors may reach before the
    guard starts pressing the stepsize down; it is only meaningful with
    drift_guard enabled.  Within the budget the controller is untouched.
    """

    stability_control: bool = True
    safety: float = 0.9
    h_min: float = 1e-12
    h_max: float = math.inf
    max_rejects_per_step: int = 20
    alpha21: float = 1e-5
    alpha31: float = 5e-6
    alpha32: float = 5e-6
    drift_guard: bool = True
    drift_budget: float = 30.0

    def __post_init__(self):
        if not 0.0 < self.safety <= 1.0:
            raise ValueError("safety must lie in (0, 1]")
        if self.h_min <= 0.0 or self.h_max < self.h_min:
            raise ValueError("need 0 < h_min <= h_max")
        if self.max_rejects_per_step < 1:
            raise ValueError("max_rejects_per_step must be >= 1")
        if abs(self.alpha21 - self.alpha31 - self.alpha32) > 1e-14:
            raise ValueError("probe coefficients need alpha21 = alpha31 + alpha32")
        if self.alpha32 == 0.0:
            raise ValueError("alpha32 must be nonzero")
        if self.drift_budget <= 0.0:
            raise ValueError("drift_budget must be positive")


@dataclass
class RunStatistics:
    """Work counters accumulated over an integration."""

    phi_evals: int = 0
    g_evals: int = 0
    factorizations: int = 0
    linear_solves: int = 0
    steps_accepted: int = 0
    steps_rejected: int = 0

    def as_dict(self) -> dict:
        return {
            "phi_evals": self.phi_evals,
            "g_evals": self.g_evals,
            "factorizations": self.factorizations,
            "solves": self.linear_solves,
            "steps_acc": self.steps_accepted,
            "steps_rej": self.steps_rejected,
        }


class StepWorkspace:
    """Stage and state buffers allocated once per integration."""

    def __init__(self, n: int):
        self.n = n
        self.k1 = np.zeros(n)
        self.k2 = np.zeros(n)
        self.k3 = np.zeros(n)
        self.k4 = np.zeros(n)
        self.k5 = np.zeros(n)
        self.k6 = np.zeros(n)
        self.k5_emb = np.zeros(n)
        self.y_next = np.zeros(n)
        self.y_emb = np.zeros(n)
        self.b_diag = np.zeros(n)


@dataclass
class StepReport:
    """Outcome of one step attempt."""

    accepted: bool
    err: float
    v: Optional[float]
    h_used: float
    h_next: float
    retry_underflow: bool
    y_next: Optional[np.ndarray] = field(default=None)


@dataclass(frozen=True)
class StepProposal:
    h_accept: float
    h_retry: float
    retry_underflow: bool


@dataclass
class IntegrationResult:
    t: float
    y: np.ndarray
    stats: RunStatistics
    trace: Optional[list] = field(default=None)


def error_norm(y: np.ndarray, y2: np.ndarray, tol: Tolerances) -> float:
    """Scaled maximum deviation max_i |y_i - y2_i| / (atol_i + rtol_i*|y_i|)."""
    den = tol.atol + tol.rtol * np.abs(y)
    if np.any(den == 0.0):
        raise ZeroToleranceDenominator(
            "atol + rtol*|y| vanished for some component")
    return float(np.max(np.abs(y - y2) / den))


def stability_estimate(phi, y: np.ndarray, k1: np.ndarray,
                       h: float, cfg: ControllerConfig,
                       stats: RunStatistics) -> float:
    """Power-method estimate of h times the dominant non-stiff eigenvalue.

    phi is the current step's non-stiff part.  Costs two evaluations of
    it.  Components whose denominator |d1 - k1| falls below a floor --
    either in absolute terms, 1e-14*(1 + |k1|), or relative to the
    largest component of the iterate d1 - k1 -- are skipped; if all
    components are skipped the estimate is 0 (no stability information).
    """
    d1 = h * phi(y + cfg.alpha21 * k1)
    d2 = h * phi(y + cfg.alpha31 * k1 + cfg.alpha32 * d1)
    stats.phi_evals += 2
    den = np.abs(d1 - k1)
    keep = den >= np.maximum(PROBE_SHARE_FLOOR * np.max(den),
                             PROBE_FLOOR * (1.0 + np.abs(k1)))
    if not np.any(keep):
        return 0.0
    ratio = np.max(np.abs(d2 - d1)[keep] / den[keep])
    return float(ratio / abs(cfg.alpha32))


def propose_next_h(h: float, err: float, v: Optional[float],
                   cfg: ControllerConfig,
                   pressure: float = 1.0) -> StepProposal:
    """Stepsizes suggested by the error and stability models.

    h_accept applies after an accepted step: the accuracy-predicted step
    (with safety factor) and the stability-capped step compete, and the
    result never shrinks below the current h.  A drift-guard pressure
    above 1 additionally caps h_accept at the accuracy-predicted step
    divided by the pressure -- the one case where the next step may
    shrink after an acceptance.  h_retry applies after a rejection and
    never grows; retry_underflow flags that the unclamped retry fell
    below h_min.
    """
    q1 = (1.0 / max(err, ERR_FLOOR)) ** (1.0 / 3.0)
    h_acc = cfg.safety * q1 * h
    if v is not None and v > 0.0:
        h_st = (EXPLICIT_STABILITY_SPAN / v) * h
    else:
        h_st = math.inf
    h_accept = max(h, min(h_acc, h_st))
    if pressure > 1.0:
        h_accept = min(h_accept, h_acc / pressure)
    h_accept = min(max(h_accept, cfg.h_min), cfg.h_max)
    raw_retry = cfg.safety * q1 * h
    h_retry = min(max(raw_retry, cfg.h_min), h)
    return StepProposal(h_accept=h_accept, h_retry=h_retry,
                        retry_underflow=raw_retry < cfg.h_min)


def _stages(problem: SplitProblem, y: np.ndarray, h: float,
            scheme: SchemeCoefficients, embedded: EmbeddedCoefficients,
            stats: RunStatistics, ws: StepWorkspace) -> tuple:
    """Evaluate all stages; returns (phi, k1, y_next, y_emb).

    phi is the step-local non-stiff part u -> f(u) - B*u with B held at
    its start-of-step value; y_next/y_emb live in workspace buffers.
    Work per call: 1 factorization, 5 linear solves, 3 evaluations of the
    right-hand side and 2 stiff-part applications.  Raises SingularMatrix
    when the stage matrix cannot be factored.
    """
    a42, a43 = scheme.alpha4[1], scheme.alpha4[2]
    b42, b43 = scheme.beta4[1], scheme.beta4[2]
    b63, b64, b65 = scheme.beta6[2], scheme.beta6[3], scheme.beta6[4]
    p1, p2, p3, p4, p5, p6 = scheme.p
    r1, r2, r3, r4, r5 = embedded.r

    B = problem.jac(y)
    if isinstance(B, DiagonalMatrix):
        ws.b_diag[:] = B.values
    else:
        ws.b_diag[:] = np.diagonal(B.as_dense())
    stats.factorizations += 1
    fact = factor(B, scheme.a * h)
    full = problem.full

    def phi(u):
        return np.asarray(full(u), dtype=float) - B.matvec(u)

    f0 = np.asarray(full(y), dtype=float)
    ws.k1[:] = h * (f0 - B.matvec(y))
    # the non-stiff and stiff parts are both taken at y, so their sum
    # collapses to the full right-hand side
    stats.phi_evals += 1
    stats.g_evals += 1

    ws.k2[:] = fact.solve(h * f0)
    ws.k3[:] = fact.solve(ws.k2)
    # first-stage weights of the combination rows are structurally zero
    u = y + b42 * ws.k2 + b43 * ws.k3
    w = y + a42 * ws.k2 + a43 * ws.k3
    # h*phi(u) + h*(B*w) regrouped around one right-hand-side evaluation
    rhs4 = h * np.asarray(full(u), dtype=float) + h * B.matvec(w - u)
    stats.phi_evals += 1
    stats.g_evals += 1
    ws.k4[:] = fact.solve(rhs4)
    ws.k5[:] = fact.solve(ws.k4 + scheme.gamma * ws.k3)
    u6 = y + b63 * ws.k3 + b64 * ws.k4 + b65 * ws.k5
    ws.k6[:] = h * phi(u6)
    stats.phi_evals += 1
    ws.k5_emb[:] = fact.solve(ws.k4)
    stats.linear_solves += 5

    ws.y_next[:] = (y + p1 * ws.k1 + p2 * ws.k2 + p3 * ws.k3
                    + p4 * ws.k4 + p5 * ws.k5 + p6 * ws.k6)
    ws.y_emb[:] = (y + r1 * ws.k1 + r2 * ws.k2 + r3 * ws.k3
                   + r4 * ws.k4 + r5 * ws.k5_emb)
    return phi, ws.k1, ws.y_next, ws.y_emb


def attempt_step(problem: SplitProblem, y: np.ndarray, h: float,
                 scheme: SchemeCoefficients, embedded: EmbeddedCoefficients,
                 tol: Tolerances, cfg: ControllerConfig,
                 stats: RunStatistics, ws: StepWorkspace,
                 lam: Optional[float] = None,
                 pressure: float = 1.0) -> StepReport:
    """Attempt one step of size h from state y.

    lam carries the per-unit-h stability estimate from an earlier attempt
    of the same step; when None and stability control is on, fresh probes
    are computed (two extra non-stiff evaluations).  pressure > 1 (from
    the drift guard) lowers the proposed next stepsize without touching
    acceptance.  A singular stage matrix or a non-finite result is
    reported as a rejection with the stepsize halved.
    """
    try:
        phi, k1, y_next, y_emb = _stages(problem, y, h, scheme, embedded,
                                         stats, ws)
    except SingularMatrix:
        h_next = max(0.5 * h, cfg.h_min)
        return StepReport(accepted=False, err=math.inf, v=None, h_used=h,
                          h_next=h_next, retry_underflow=0.5 * h < cfg.h_min)

    v: Optional[float] = None
    if cfg.stability_control:
        if lam is None:
            v = stability_estimate(phi, y, k1, h, cfg, stats)
        else:
            v = lam * h

    if not (np.all(np.isfinite(y_next)) and np.all(np.isfinite(y_emb))):
        h_next = max(0.5 * h, cfg.h_min)
        return StepReport(accepted=False, err=math.inf, v=v, h_used=h,
                          h_next=h_next, retry_underflow=0.5 * h < cfg.h_min)

    err = error_norm(y_next, y_emb, tol)
    proposal = propose_next_h(h, err, v, cfg, pressure=pressure)
    if err <= 1.0:
        return StepReport(accepted=True, err=err, v=v, h_used=h,
                          h_next=proposal.h_accept, retry_underflow=False,
                          y_next=y_next.copy())
    return StepReport(accepted=False, err=err, v=v, h_used=h,
                      h_next=proposal.h_retry,
                      retry_underflow=proposal.retry_underflow)


def integrate(problem: SplitProblem, scheme: SchemeCoefficients,
              embedded: EmbeddedCoefficients, tol: Tolerances,
              cfg: Optional[ControllerConfig] = None,
              collect_trace: bool = False,
              t_end: Optional[float] = None,
              y0: Optional[np.ndarray] = None,
              h0: Optional[float] = None) -> IntegrationResult:
    """Integrate from t0 to t_end with adaptive stepsize.

    The trace, when requested, records (t, h, err, v, y) per accepted
    step.  With the drift guard enabled, every accepted step folds its
    main-vs-embedded difference into a running sum whose components decay
    at their own linearized rates; once the sum's scaled norm exceeds the
    budget, subsequent stepsize proposals are divided by the overshoot
    factor.  Raises StepsizeUnderflow when a rejection pushes h below
    h_min, MaxRejectsExceeded when one step keeps failing, and
    NonFiniteState when the initial state is not finite.
    """
    cfg = cfg if cfg is not None else ControllerConfig()
    t = problem.t0
    t_stop = problem.t_end if t_end is None else float(t_end)
    y = np.array(problem.y0 if y0 is None else y0, dtype=float)
    if not np.all(np.isfinite(y)):
        raise NonFiniteState("initial state is not finite")
    h = problem.h0 if h0 is None else float(h0)
    h = min(max(h, cfg.h_min), cfg.h_max)

    stats = RunStatistics()
    ws = StepWorkspace(problem.n)
    trace: Optional[list] = [] if collect_trace else None
    span = t_stop - t
    drift = np.zeros(problem.n) if cfg.drift_guard else None
    pressure = 1.0

    while t_stop - t > 1e-14 * max(abs(span), abs(t_stop)):
        # stretch or truncate onto the endpoint when already within 0.01 %
        if h >= (t_stop - t) / 1.0001:
            h = t_stop - t
        lam: Optional[float] = None
        rejects = 0
        while True:
            report = attempt_step(problem, y, h, scheme, embedded, tol,
                                  cfg, stats, ws, lam=lam, pressure=pressure)
            if report.v is not None and lam is None and report.h_used > 0.0:
                lam = report.v / report.h_used
            if report.accepted:
                t += report.h_used
                y = report.y_next
                stats.steps_accepted += 1
                if drift is not None:
                    drift *= np.exp(np.minimum(0.0,
                                               report.h_used * ws.b_diag))
                    drift += y - ws.y_emb
                    den = tol.atol + tol.rtol * np.abs(y)
                    g_norm = float(np.max(np.abs(drift) / den))
                    pressure = max(1.0, g_norm / cfg.drift_budget)
                if trace is not None:
                    trace.append((t, report.h_used, report.err, report.v,
                                  y.copy()))
                h = report.h_next
                break
            stats.steps_rejected += 1
            rejects += 1
            if report.retry_underflow:
                raise StepsizeUnderflow(
                    f"retry stepsize fell below h_min={cfg.h_min:g} at "
                    f"t={t:.6g} (err={report.err:.3g})")
            if rejects > cfg.max_rejects_per_step:
                raise MaxRejectsExceeded(
                    f"step at t={t:.6g} rejected {rejects} times "
                    f"(h={report.h_used:.3g}, err={report.err:.3g})")
            h = report.h_next

    return IntegrationResult(t=t, y=y, stats=stats, trace=trace)


def integrate_fixed(problem: SplitProblem, h: float,
                    scheme: SchemeCoefficients,
                    embedded: EmbeddedCoefficients,
                    t_end: Optional[float] = None,
                    y0: Optional[np.ndarray] = None) -> IntegrationResult:
    """Integrate with a constant stepsize and no error control.

    The span is covered by round(span/h) equal steps (h is honored
    exactly when it divides the span).  Non-finite states abort with
    NonFiniteState; order studies use this entry point.
    """
    t = problem.t0
    t_stop = problem.t_end if t_end is None else float(t_end)
    y = np.array(problem.y0 if y0 is None else y0, dtype=float)
    span = t_stop - t
    n_steps = max(1, round(span / h))
    h_eff = span / n_steps
    stats = RunStatistics()
    ws = StepWorkspace(problem.n)
    for i in range(n_steps):
        _, _, y_next, _ = _stages(problem, y, h_eff, scheme, embedded,
                                  stats, ws)
        if not np.all(np.isfinite(y_next)):
            raise NonFiniteState(f"state became non-finite at t={t:.6g}")
        y = y_next.copy()
        t = problem.t0 + (i + 1) * h_eff
        stats.steps_accepted += 1
    return IntegrationResult(t=t, y=y, stats=stats)


def embedded_difference(problem: SplitProblem, h: float,
                        scheme: SchemeCoefficients,
                        embedded: EmbeddedCoefficients,
                        y0: Optional[np.ndarray] = None) -> float:
    """Max-norm gap between main and embedded solutions after one step."""
    y = np.array(problem.y0 if y0 is None else y0, dtype=float)
    stats = RunStatistics()
    ws = StepWorkspace(problem.n)
    _, _, y_next, y_emb = _stages(problem, y, h, scheme, embedded, stats, ws)
    return float(np.max(np.abs(y_next - y_emb)))
