import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lrswaption.errors import ConfigurationError, DomainError
from lrswaption.model import PiecewiseConstant, SwapSpec, discount, reference_params, reference_swap, swap_value
from lrswaption.payoff import (benefit, build_payoff_table, gain, terminal_boundary, terminal_value,
                               zero_curves)

# fourth-order one-sided first-derivative stencil
STENCIL = np.array([-25.0, 48.0, -36.0, 16.0, -3.0]) / 12.0


def one_sided(f, t, h, direction):
    """Derivative of ``f`` at ``t`` from samples on one side only (direction +1 or -1)."""
    pts = t + direction * h * np.arange(5)
    return direction * STENCIL @ np.array([f(p) for p in pts]) / h


def left_limit(f, t, h=1e-2):
    # value extrapolated from the left, by the same fourth-order polynomial
    pts = t - h * np.arange(1, 6)
    w = np.array([5.0, -10.0, 10.0, -5.0, 1.0])
    return w @ np.array([f(p) for p in pts])


def jump_formulas(table, m):
    k, th, K, D = table.kappa, table.theta, table.spec.strike, table.spec.delta
    cm, cn = table.c[m - 1], table.c[m]
    e = np.exp(-k * D)
    return cm * K - cn * K * e, cm * K - (1 + th) * cn * K + th * cn * K * e


alphas = st.builds(lambda a, b: PiecewiseConstant((0.0, 1.7), (a, b)), st.floats(0.02, 0.1), st.floats(0.02, 0.1))


class TestGain:
    @given(st.floats(1.0, 2.999), st.floats(1e-3, 40), st.sampled_from(["payer", "receiver"]), alphas)
    @settings(max_examples=100)
    def test_gain_is_deflated_swap_value(self, t, x, side, alpha):
        p = reference_params().replace(alpha=alpha)
        spec = reference_swap(side)
        table = build_payoff_table(p, spec)
        oracle = discount(p, t) * (1 + x) * swap_value(p, spec.with_side("payer"), t, x)
        assert gain(table, t, x) == pytest.approx(oracle, rel=1e-10, abs=1e-15)

    def test_gain_vanishes_at_maturity(self, payer_table):
        assert gain(payer_table, 3.0, 2.0) == 0.0
        with pytest.raises(DomainError):
            gain(payer_table, 3.5, 2.0)

    @pytest.mark.parametrize("m", [1, 2, 3])
    def test_coefficients_continuous_at_payment_dates(self, payer_table, m):
        Tm = payer_table.spec.dates[m]
        for f in (payer_table.g1, payer_table.g2):
            assert abs(f(Tm, left=True) - f(Tm)) < 1e-12
            # independent of the left branch: extrapolate from points before T_m
            assert left_limit(f, Tm) == pytest.approx(f(Tm), abs=1e-10)

    @pytest.mark.parametrize("m", [1, 2, 3])
    def test_derivative_jumps(self, payer_table, m):
        Tm = payer_table.spec.dates[m]
        expect1, expect2 = jump_formulas(payer_table, m)
        j1 = one_sided(payer_table.g1, Tm, 1e-2, -1) - one_sided(payer_table.g1, Tm, 1e-2, +1)
        j2 = one_sided(payer_table.g2, Tm, 1e-2, -1) - one_sided(payer_table.g2, Tm, 1e-2, +1)
        assert j1 == pytest.approx(expect1, rel=1e-6)
        assert j2 == pytest.approx(expect2, rel=1e-6)
        assert expect1 > 0

    @given(st.floats(1.001, 2.99))
    def test_analytic_derivatives(self, t):
        table = build_payoff_table(reference_params(), reference_swap())
        h = 1e-5
        for f, df in ((table.g1, table.dg1), (table.g1hat, table.dg1hat), (table.g2, table.dg2)):
            if np.any(np.abs(t - table.spec.dates) < 3 * h):
                continue
            assert df(t) == pytest.approx((f(t + h) - f(t - h)) / (2 * h), rel=1e-6, abs=1e-12)


class TestBenefit:
    @given(st.floats(1.001, 2.99), st.floats(1e-3, 20))
    def test_benefit_is_generator_applied_to_gain(self, t, x):
        table = build_payoff_table(reference_params(), reference_swap())
        k, th = table.kappa, table.theta
        # G is linear in x, so the diffusion term drops out
        oracle = table.dg1(t) * x + table.dg2(t) + k * (th - x) * table.g1(t)
        assert benefit(table, t, x) == pytest.approx(oracle, rel=1e-12, abs=1e-15)

    def test_left_branch_at_payment_date(self, payer_table):
        T1 = payer_table.spec.dates[1]
        assert payer_table.h1(T1, left=True) == pytest.approx(payer_table.h1(T1 - 1e-12), abs=1e-12)
        assert payer_table.h1(T1, left=True) != pytest.approx(payer_table.h1(T1), abs=1e-6)


class TestZeroCurves:
    def test_terminal_boundary_value(self, params):
        assert terminal_boundary(params, reference_swap()) == pytest.approx(0.05 / 0.0565, abs=1e-12)
        assert terminal_value(params, reference_swap()) == pytest.approx(0.05 / 0.0565, abs=1e-12)

    def test_terminal_boundary_clamped(self, params):
        spec = SwapSpec(1.0, 0.5, 4, -0.01)
        assert terminal_value(params, spec) < 0 and terminal_boundary(params, spec) == 0.0

    @given(st.floats(1.0, 2.99))
    def test_roots(self, t):
        table = build_payoff_table(reference_params(), reference_swap())
        g, h = zero_curves(table, t)
        assert abs(gain(table, t, g)) < 1e-14
        assert abs(benefit(table, t, h)) < 1e-14

    def test_limit_at_maturity(self, payer_table):
        g, h = zero_curves(payer_table, 3.0)
        assert g == h == pytest.approx(0.05 / 0.0565)
        g1, h1 = zero_curves(payer_table, 3.0 - 1e-6)
        assert g1 == pytest.approx(g, abs=1e-4) and h1 == pytest.approx(h, abs=1e-4)


def test_inadmissible_strike_rejected(params):
    with pytest.raises(ConfigurationError, match="trade.strike"):
        build_payoff_table(params, SwapSpec(1.0, 0.5, 4, 0.2))
