"""Comparator tableau construction, stepping, probe, and driver tests."""

import dataclasses
import math

import numpy as np
import pytest

from asode.exceptions import (
    NonFiniteState,
    StepsizeUnderflow,
    ZeroToleranceDenominator,
)
from asode.problems import Tolerances, builtin
from asode.reference_rk import (
    FEHLBERG45,
    MERSON,
    TABLEAUS,
    _rk_step_full,
    linear_growth_factor,
    order_condition_residuals,
    rk_integrate,
    rk_step,
)


class TestTableauConstruction:
    def test_merson_literals(self):
        assert MERSON.stages == 5
        assert MERSON.order == 4
        assert MERSON.order_hat == 3
        assert MERSON.b == (1.0 / 6.0, 0.0, 0.0, 2.0 / 3.0, 1.0 / 6.0)
        assert MERSON.c == (0.0, 1.0 / 3.0, 1.0 / 3.0, 0.5, 1.0)

    def test_fehlberg_literals(self):
        assert FEHLBERG45.stages == 6
        assert FEHLBERG45.order == 5
        assert FEHLBERG45.order_hat == 4
        assert FEHLBERG45.c == (0.0, 0.25, 3.0 / 8.0, 12.0 / 13.0, 1.0, 0.5)

    def test_registry_names(self):
        assert set(TABLEAUS) == {"merson", "rkf45"}
        assert TABLEAUS["merson"] is MERSON
        assert TABLEAUS["rkf45"] is FEHLBERG45

    def test_estimate_weights_are_weight_difference(self):
        for tab in (MERSON, FEHLBERG45):
            for di, bi, bhi in zip(tab.d, tab.b, tab.b_hat):
                assert di == bi - bhi

    def test_order_conditions_sharp_for_merson(self):
        res4 = order_condition_residuals(MERSON.a, MERSON.b, MERSON.c, 4)
        assert max(res4) < 1e-12
        res5 = order_condition_residuals(MERSON.a, MERSON.b, MERSON.c, 5)
        assert max(res5) > 1e-3

    def test_merson_companion_is_not_order_four(self):
        res = order_condition_residuals(MERSON.a, MERSON.b_hat, MERSON.c, 4)
        assert max(res) > 1e-3

    def test_fehlberg_weights_pass_order_five(self):
        res = order_condition_residuals(FEHLBERG45.a, FEHLBERG45.b,
                                        FEHLBERG45.c, 5)
        assert max(res) < 1e-12

    @pytest.mark.parametrize("broken, match", [
        ({"a": ((), (0.4,), (1.0 / 6.0, 1.0 / 6.0), (1.0 / 8.0, 0.0, 0.375),
                (0.5, 0.0, -1.5, 2.0))}, "does not sum"),
        ({"b": (1.0 / 6.0, 0.0, 0.0, 2.0 / 3.0, 1.0 / 6.0 + 1e-3)}, "order"),
        ({"b_hat": (0.2, 0.2, 0.2, 0.2, 0.2)}, "order"),
        ({"a": ((), (1.0 / 3.0,), (1.0 / 6.0, 1.0 / 6.0),
                (1.0 / 8.0, 0.0, 0.375), (0.5, 0.0, -1.5))}, "must have"),
        ({"stability_span": 4.0}, "inside"),
        ({"stability_span": 2.0}, "understates"),
        ({"stability_span": -1.0}, "positive"),
    ])
    def test_broken_tableau_rejected(self, broken, match):
        with pytest.raises(ValueError, match=match):
            dataclasses.replace(MERSON, **broken)

    def test_growth_factor_hand_values(self):
        # Merson on y' = lambda*y multiplies the state by
        # 1 + z + z^2/2 + z^3/6 + z^4/24 + z^5/144, which at z = -1
        # telescopes to 53/144.
        assert abs(linear_growth_factor(MERSON.a, MERSON.b, 0.0) - 1.0) == 0.0
        r = linear_growth_factor(MERSON.a, MERSON.b, -1.0)
        assert abs(r - 53.0 / 144.0) < 1e-14

    def test_growth_factor_is_one_at_declared_boundary(self):
        for tab in (MERSON, FEHLBERG45):
            r = linear_growth_factor(tab.a, tab.b, -tab.stability_span)
            assert abs(abs(r) - 1.0) < 1e-6


class TestRkStep:
    def test_zero_h_is_identity(self):
        y = (1.3, -0.7, 0.0)
        f = lambda state: tuple(-2.0 * v for v in state)
        y_next, est = rk_step(MERSON, f, y, 0.0)
        assert y_next == y
        assert est == (0.0, 0.0, 0.0)

    def test_step_matches_manual_tableau_arithmetic(self):
        calls = []

        def f(y):
            val = (-y[0] ** 2 + y[1], y[0] - 2.0 * y[1])
            calls.append(val)
            return val

        h = 0.1
        y = (0.8, -0.3)
        y_next, est = rk_step(MERSON, f, y, h)
        assert len(calls) == MERSON.stages
        for m in range(2):
            manual_y = y[m] + h * sum(bi * k[m]
                                      for bi, k in zip(MERSON.b, calls))
            manual_e = h * sum(di * k[m] for di, k in zip(MERSON.d, calls))
            assert abs(y_next[m] - manual_y) < 1e-14
            assert abs(est[m] - manual_e) < 1e-14

    def test_merson_global_halving_ratio_is_order_four(self):
        errors = []
        for h in (0.05, 0.025):
            y = (1.0,)
            for _ in range(round(1.0 / h)):
                y, _ = rk_step(MERSON, lambda s: (-s[0],), y, h)
            errors.append(abs(y[0] - math.exp(-1.0)))
        ratio = errors[0] / errors[1]
        assert 14.0 <= ratio <= 18.0

    def test_fehlberg_global_halving_ratio_is_order_five(self):
        errors = []
        for h in (0.05, 0.025):
            y = (1.0,)
            for _ in range(round(1.0 / h)):
                y, _ = rk_step(FEHLBERG45, lambda s: (-s[0],), y, h)
            errors.append(abs(y[0] - math.exp(-1.0)))
        ratio = errors[0] / errors[1]
        assert 28.0 <= ratio <= 36.0

    def test_probe_reads_dominant_rate_on_diagonal_field(self):
        f = lambda y: (-80.0 * y[0], -2.0 * y[1])
        for tab in (MERSON, FEHLBERG45):
            _, _, v = _rk_step_full(tab, f, (1.0, 1.0), 0.01)
            assert abs(v - 0.8) < 1e-9 * 0.8

    def test_probe_silent_on_constant_field(self):
        f = lambda y: (3.0, -1.0)
        for tab in (MERSON, FEHLBERG45):
            _, _, v = _rk_step_full(tab, f, (0.2, 0.4), 0.05)
            assert v == 0.0


class TestRkIntegrate:
    def test_linear_decay_lands_within_five_tol(self):
        tol = Tolerances.uniform(1e-4, 1)
        t, y, stats = rk_integrate(MERSON, lambda s: (-s[0],), (1.0,),
                                   (0.0, 1.0), tol, 1e-3)
        assert abs(t - 1.0) < 1e-12
        assert abs(y[0] - math.exp(-1.0)) < 5e-4
        assert stats.steps_accepted > 0

    def test_zero_span_takes_no_steps(self):
        tol = Tolerances.uniform(1e-4, 1)
        t, y, stats = rk_integrate(MERSON, lambda s: (-s[0],), (0.7,),
                                   (1.0, 1.0), tol, 1e-3)
        assert t == 1.0
        assert y == (0.7,)
        assert stats.steps_accepted == 0
        assert stats.phi_evals == 0

    def test_every_attempt_costs_the_stage_count(self):
        for tab in (MERSON, FEHLBERG45):
            tol = Tolerances.uniform(1e-6, 1)
            _, _, stats = rk_integrate(tab, lambda s: (-s[0] ** 3,), (1.0,),
                                       (0.0, 2.0), tol, 1e-3)
            attempts = stats.steps_accepted + stats.steps_rejected
            assert stats.phi_evals == tab.stages * attempts
            assert stats.g_evals == 0
            assert stats.factorizations == 0
            assert stats.linear_solves == 0

    def test_trace_rows_follow_accepted_steps(self):
        tol = Tolerances.uniform(1e-5, 2)
        f = lambda y: (-40.0 * y[0], -y[1])
        t, y, stats, trace = rk_integrate(MERSON, f, (1.0, 1.0), (0.0, 1.0),
                                          tol, 1e-4, collect_trace=True)
        assert len(trace) == stats.steps_accepted
        times = [row[0] for row in trace]
        assert times == sorted(times)
        assert abs(times[-1] - 1.0) < 1e-12
        for row in trace:
            assert row[1] > 0.0          # h_used
            assert 0.0 <= row[2] <= 1.0  # accepted err
            assert row[3] >= 0.0         # v
            assert len(row[4]) == 2

    def test_h_max_is_respected(self):
        tol = Tolerances.uniform(1e-3, 1)
        _, _, _, trace = rk_integrate(MERSON, lambda s: (-s[0],), (1.0,),
                                      (0.0, 1.0), tol, 1e-3, h_max=0.01,
                                      collect_trace=True)
        # the endpoint stretch may lengthen the final step by up to 0.01%
        assert max(row[1] for row in trace) <= 0.01 * 1.0002

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_unresolvable_step_underflows(self):
        tol = Tolerances.uniform(1e-4, 1)
        with pytest.raises(StepsizeUnderflow):
            rk_integrate(MERSON, lambda s: (math.inf,), (1.0,), (0.0, 1.0),
                         tol, 1e-3)

    def test_non_finite_initial_state_rejected(self):
        tol = Tolerances.uniform(1e-4, 1)
        with pytest.raises(NonFiniteState):
            rk_integrate(MERSON, lambda s: (-s[0],), (math.nan,), (0.0, 1.0),
                         tol, 1e-3)

    def test_vanishing_tolerance_denominator_rejected(self):
        tol = Tolerances(atol=np.zeros(1), rtol=np.full(1, 1e-3))
        with pytest.raises(ZeroToleranceDenominator):
            rk_integrate(MERSON, lambda s: (0.0,), (0.0,), (0.0, 1.0),
                         tol, 1e-3)

    def test_tolerance_length_mismatch_rejected(self):
        tol = Tolerances.uniform(1e-4, 3)
        with pytest.raises(ValueError):
            rk_integrate(MERSON, lambda s: (-s[0],), (1.0,), (0.0, 1.0),
                         tol, 1e-3)

    def test_crude_tolerance_on_quadratic_loss_problem(self):
        # The four-component benchmark problem with quadratic loss terms
        # separates explicit drivers that track the stability boundary
        # from those that lose the trajectory into its blowup basin.
        p = builtin("example4")
        tol = Tolerances.uniform(1e-2, p.n)
        for tab in (MERSON, FEHLBERG45):
            t, y, stats = rk_integrate(tab, p.full, tuple(p.y0),
                                       (p.t0, p.t_end), tol, p.h0)
            assert abs(t - p.t_end) < 1e-10
            assert 1e3 <= stats.phi_evals <= 1e5
            assert all(math.isfinite(v) for v in y)
            assert y[1] > 0.0
