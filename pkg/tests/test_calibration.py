import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lrswaption.bermudan import european_price
from lrswaption.calibration import CurveQuote, SwaptionQuote, fit_alpha, fit_sigma
from lrswaption.errors import ConfigurationError, InfeasibleCurveError, UnattainableQuoteError
from lrswaption.model import PiecewiseConstant, SwapSpec, reference_params, zcb_price
from lrswaption.payoff import build_payoff_table

MATURITIES = (0.5, 1.0, 2.0, 3.5, 5.0)


def curve_quotes(params, maturities=MATURITIES):
    return [CurveQuote(T, float(zcb_price(params, 0.0, T, params.x0))) for T in maturities]


def swaption_quotes(params, expiries, tenor=1.0, strike=0.05):
    out = []
    for i, T in enumerate(expiries):
        q = SwaptionQuote(T, tenor, strike, "payer", 0.0, quote_id=f"q{i}")
        price = european_price(build_payoff_table(params, q.swap()), 0.0, params.x0)
        out.append(SwaptionQuote(T, tenor, strike, "payer", price, quote_id=f"q{i}"))
    return out


class TestAlpha:
    @given(st.lists(st.floats(0.05, 0.15), min_size=5, max_size=5))  # positive short rates: DF <= 1
    @settings(max_examples=40)
    def test_round_trip(self, values):
        truth = PiecewiseConstant((0.0, *MATURITIES[:-1]), tuple(values))
        p = reference_params().replace(alpha=truth)
        fit = fit_alpha(p.kappa, p.theta, p.x0, curve_quotes(p))
        assert fit.knots == truth.knots
        assert np.allclose(fit.values, truth.values, atol=1e-10, rtol=0)
        refit = p.replace(alpha=fit)
        for q in curve_quotes(p):
            assert zcb_price(refit, 0.0, q.maturity, p.x0) == pytest.approx(q.discount_factor, abs=1e-12)

    def test_flat_curve(self):
        p = reference_params()
        fit = fit_alpha(p.kappa, p.theta, p.x0, curve_quotes(p))
        assert np.allclose(fit.values, 0.0765, atol=1e-12)

    def test_single_quote(self):
        p = reference_params()
        df = float(zcb_price(p, 0.0, 1.0, p.x0))
        assert df == pytest.approx(0.9541, abs=1e-4)
        fit = fit_alpha(p.kappa, p.theta, p.x0, [CurveQuote(1.0, df)])
        assert fit.values[0] == pytest.approx(0.0765, abs=1e-6)
        # the four-digit discount factor alone pins alpha only to about 4e-5
        rounded = fit_alpha(p.kappa, p.theta, p.x0, [CurveQuote(1.0, 0.9541)])
        assert rounded.values[0] == pytest.approx(0.0765, abs=1e-4)

    def test_invalid_quotes(self):
        with pytest.raises(ConfigurationError):
            CurveQuote(1.0, 1.2)
        with pytest.raises(ConfigurationError):
            fit_alpha(0.03, 2.55, 0.762, [CurveQuote(2.0, 0.9), CurveQuote(1.0, 0.95)])
        with pytest.raises(InfeasibleCurveError):
            fit_alpha(0.5, 0.1, 0.0 - 1e-3, [CurveQuote(1.0, 0.9)])


class TestSigma:
    def test_two_segment_round_trip(self):
        truth = PiecewiseConstant((0.0, 1.0), (0.4, 0.7))
        p = reference_params(truth)
        quotes = swaption_quotes(p, (1.0, 2.0))
        fit = fit_sigma(reference_params(0.1), quotes)
        assert fit.knots == truth.knots
        assert np.allclose(fit.values, truth.values, atol=1e-5, rtol=0)
        for q in quotes:
            model = european_price(build_payoff_table(p.replace(sigma=fit), q.swap()), 0.0)
            assert model == pytest.approx(q.price, abs=1e-8)

    def test_bond_prices_untouched(self):
        p = reference_params(0.5)
        fit = fit_sigma(p, swaption_quotes(reference_params(0.3), (1.0,)))
        T = np.linspace(0.1, 10, 25)
        assert np.array_equal(zcb_price(p, 0.0, T, p.x0), zcb_price(p.replace(sigma=fit), 0.0, T, p.x0))

    def test_unattainable(self):
        p = reference_params()
        q = SwaptionQuote(1.0, 1.0, 0.05, "payer", 0.5, quote_id="Q7")
        with pytest.raises(UnattainableQuoteError) as info:
            fit_sigma(p, [q])
        assert info.value.quote_id == "Q7"

    def test_quote_validation(self):
        with pytest.raises(ConfigurationError, match="price"):
            SwaptionQuote(1.0, 1.0, 0.05, "payer", -1.0)
        with pytest.raises(ConfigurationError, match="tenor"):
            SwaptionQuote(1.0, 0.7, 0.05, "payer", 0.01)
        assert SwaptionQuote(1.0, 2.0, 0.05, "payer", 0.01).swap() == SwapSpec(1.0, 0.5, 4, 0.05)
