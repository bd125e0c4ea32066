import numpy as np
import pytest
from scipy import integrate

from lrswaption.bermudan import (LatticeSpec, bermudan_price, european_price, hat_weights,
                                 split_expectation, transition_matrix)
from lrswaption.density import TransformContext, ncx2_pdf
from lrswaption.errors import ConfigurationError, DomainError, TruncationError
from lrswaption.model import PiecewiseConstant, conditional_mean, discount, reference_swap
from lrswaption.payoff import build_payoff_table, gain

SMALL = LatticeSpec(n_x=600)


def european_oracle(table, x):
    # direct quadrature of E[G(T_0, X)^+] against the closed-form density
    p, t0 = table.params, table.spec.t0
    sign = 1.0 if table.spec.side == "payer" else -1.0
    f = lambda y: max(sign * gain(table, t0, y), 0.0) * ncx2_pdf(p, 0.0, t0, y, x)
    val = integrate.quad(f, 0, 80, points=[0.5, 0.8, 1, 2], limit=500, epsabs=1e-14)[0]
    return val / (1 + x)


class TestTransition:
    def test_rows_preserve_mass_and_mean(self, params):
        lat = LatticeSpec(n_x=400)
        nodes = lat.nodes(params)
        P = transition_matrix(params, 1.0, 1.5, lat)
        inner = nodes < 10.0
        assert np.allclose(P.weights.sum(axis=1), 1.0, atol=1e-14)
        # hat functions interpolate linear functions exactly
        m = conditional_mean(params, 1.0, 1.5, nodes[inner])
        assert np.allclose(P.weights[inner] @ nodes, m, atol=1e-10)
        assert np.all(P.weights >= -1e-15)

    def test_hat_weights_raw_mass(self, params):
        nodes = np.linspace(0, 20, 801)
        W, defect = hat_weights(params, 0.0, 0.5, np.array([0.5, 1.0, 3.0]), nodes)
        assert np.allclose(W.sum(axis=1), 1.0, atol=1e-10)
        assert np.allclose(defect, 0.0, atol=1e-10)

    def test_lattice_validation(self):
        with pytest.raises(ConfigurationError):
            LatticeSpec(n_x=2)
        with pytest.raises(ConfigurationError):
            LatticeSpec(x_max=-1.0)

    def test_truncation_error(self, payer_table):
        with pytest.raises(TruncationError):
            bermudan_price(payer_table, reference_swap().dates, lattice=LatticeSpec(n_x=50, x_max=1.0, max_enlarge=0))


class TestSplitExpectation:
    def test_exact_for_piecewise_linear(self, payer_table):
        p = payer_table.params
        ctx = TransformContext(p, 0.0, 1.0)
        nodes = np.linspace(0, 30, 301)
        cont = 0.02 * np.sqrt(nodes)  # any piecewise-linear continuation value
        got, thr = split_expectation(payer_table, ctx, 0.762, nodes, cont, "payer")
        g = lambda y: max(gain(payer_table, 1.0, y), np.interp(y, nodes, cont))
        f = lambda y: g(y) * ncx2_pdf(p, 0.0, 1.0, y, 0.762)
        ref = integrate.quad(f, 0, 30, points=[thr, 0.5, 1, 2], limit=800, epsabs=1e-14)[0]
        assert got == pytest.approx(ref, abs=1e-10)


class TestPrices:
    @pytest.mark.parametrize("side", ["payer", "receiver"])
    def test_european_closed_form(self, params, side):
        table = build_payoff_table(params, reference_swap(side))
        assert european_price(table, 0.0) == pytest.approx(european_oracle(table, 0.762), abs=1e-10)

    @pytest.mark.parametrize("side", ["payer", "receiver"])
    def test_degenerate_schedule_is_european(self, params, side):
        table = build_payoff_table(params, reference_swap(side))
        ve = european_price(table, 0.0)
        for dates in ([1.0], [1.0, 3.0]):
            assert bermudan_price(table, dates, lattice=SMALL).price == pytest.approx(ve, abs=1e-12)

    def test_european_parity(self, params):
        from lrswaption.model import swap_value

        pay = european_price(build_payoff_table(params, reference_swap("payer")), 0.0)
        rec = european_price(build_payoff_table(params, reference_swap("receiver")), 0.0)
        assert pay - rec == pytest.approx(swap_value(params, reference_swap(), 0.0, 0.762), abs=1e-14)

    def test_more_dates_worth_more(self, payer_table, payer_boundary):
        from lrswaption.american import american_price

        ve = european_price(payer_table, 0.0)
        vb = bermudan_price(payer_table, reference_swap().dates, lattice=SMALL).price
        va = american_price(payer_boundary, 0.0, 0.762)
        assert ve < vb < va

    def test_price_at_first_date(self, payer_table):
        res = bermudan_price(payer_table, reference_swap().dates, t=1.0, x=2.0, lattice=SMALL)
        intrinsic = gain(payer_table, 1.0, 2.0) / (discount(payer_table.params, 1.0) * 3.0)
        assert res.price >= intrinsic - 1e-12

    def test_dates_outside_trade(self, payer_table):
        with pytest.raises(DomainError):
            bermudan_price(payer_table, [0.5, 1.0], lattice=SMALL)
        with pytest.raises(DomainError):
            bermudan_price(payer_table, [1.5], t=2.0, lattice=SMALL)

    def test_time_dependent_sigma(self, params):
        # two sigma pieces force the Fourier transition matrices
        p = params.replace(sigma=PiecewiseConstant((0.0, 1.8), (0.5, 0.3)))
        table = build_payoff_table(p, reference_swap())
        res = bermudan_price(table, [1.0, 3.0], lattice=LatticeSpec(n_x=150))
        assert res.price == pytest.approx(european_price(table, 0.0), abs=1e-12)
        res = bermudan_price(table, reference_swap().dates, lattice=LatticeSpec(n_x=150))
        # the last step is skipped: nothing is paid at T_n
        assert res.diagnostics["n_matrices"] == 3 and res.price > european_price(table, 0.0)
