"""Fitting the deterministic shift alpha to a discount curve and sigma to European swaptions.

Both fits are triangular in their breakpoints, so they are bootstrapped front
to back: alpha in closed form per segment, sigma by bracketed root-finding on
the European price of one quote per expiry.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .bermudan import european_price
from .errors import ConfigurationError, InfeasibleCurveError, UnattainableQuoteError
from .model import ModelParams, PiecewiseConstant, SwapSpec
from .payoff import build_payoff_table

SIGMA_BRACKET = (1e-6, 5.0)
PRICE_TOL = 1e-8


@dataclass(frozen=True)
class CurveQuote:
    maturity: float
    discount_factor: float

    def __post_init__(self) -> None:
        if not self.maturity > 0:
            raise ConfigurationError("maturity must be positive", path="curve.maturity")
        if not 0 < self.discount_factor <= 1:
            raise ConfigurationError("discount factor must lie in (0, 1]", path="curve.discount_factor")


@dataclass(frozen=True)
class SwaptionQuote:
    expiry: float
    tenor: float
    strike: float
    side: str
    price: float
    delta: float = 0.5
    quote_id: str | int | None = None

    def __post_init__(self) -> None:
        if not self.price >= 0:
            raise ConfigurationError("quote price must be nonnegative", path="swaptions.price")
        if not self.expiry > 0 or not self.tenor > 0:
            raise ConfigurationError("expiry and tenor must be positive", path="swaptions.expiry")
        if self.side not in ("payer", "receiver"):
            raise ConfigurationError(f"unknown side {self.side!r}", path="swaptions.side")
        n = self.tenor / self.delta
        if abs(n - round(n)) > 1e-9:
            raise ConfigurationError("tenor must be a multiple of the payment interval",
                                     path="swaptions.tenor")

    def swap(self) -> SwapSpec:
        return SwapSpec(t0=self.expiry, delta=self.delta, n=int(round(self.tenor / self.delta)),
                        strike=self.strike, side=self.side)


def fit_alpha(kappa: float, theta: float, x0: float, quotes) -> PiecewiseConstant:
    """Piecewise-constant alpha, one segment per quote maturity, repricing every bond exactly.

    With ``A(T) = int_0^T alpha``, ``P(0,T) = e^{-A(T)} (1 + theta + e^{-kappa T}(x0 - theta)) / (1 + x0)``
    so ``A`` at each maturity follows from its discount factor.
    """
    quotes = list(quotes)
    if not quotes:
        raise ConfigurationError("no curve quotes", path="curve")
    T = np.array([q.maturity for q in quotes], dtype=float)
    df = np.array([q.discount_factor for q in quotes], dtype=float)
    if np.any(np.diff(T) <= 0):
        raise ConfigurationError("maturities must be strictly increasing", path="curve.maturity")
    factor = 1.0 + theta + np.exp(-kappa * T) * (x0 - theta)
    if np.any(factor <= 0) or x0 < 0:
        raise InfeasibleCurveError("bond numerator is nonpositive for these (kappa, theta, x0)")
    A = -np.log(df * (1.0 + x0) / factor)
    alpha = np.diff(np.concatenate([[0.0], A])) / np.diff(np.concatenate([[0.0], T]))
    if not np.all(np.isfinite(alpha)):
        raise InfeasibleCurveError("implied alpha is not finite")
    return PiecewiseConstant(tuple([0.0, *T[:-1]]), tuple(alpha))


def fit_sigma(params: ModelParams, quotes, method: str = "auto") -> PiecewiseConstant:
    """Piecewise-constant sigma with breakpoints at the quote expiries.

    Each segment is solved so that the European price at ``(0, x0)`` matches
    its quote; sigma beyond the last expiry keeps the last value.
    """
    quotes = sorted(quotes, key=lambda q: q.expiry)
    if not quotes:
        raise ConfigurationError("no swaption quotes", path="swaptions")
    expiries = [q.expiry for q in quotes]
    if len(set(expiries)) != len(expiries):
        raise ConfigurationError("one quote per expiry is supported", path="swaptions.expiry")
    knots = [0.0, *expiries[:-1]]
    values: list[float] = []
    for i, q in enumerate(quotes):
        spec = q.swap()
        qid = q.quote_id if q.quote_id is not None else i

        def price(s, spec=spec, i=i):
            sig = PiecewiseConstant(tuple(knots[: i + 1]), tuple(values + [s]))
            table = build_payoff_table(params.replace(sigma=sig), spec)
            return european_price(table, 0.0, params.x0, method=method)

        lo, hi = SIGMA_BRACKET
        p_lo, p_hi = price(lo), price(hi)
        if not p_lo <= q.price <= p_hi:
            raise UnattainableQuoteError(
                f"quote {qid} price {q.price:.6g} outside attainable range [{p_lo:.6g}, {p_hi:.6g}]",
                quote_id=qid,
            )
        root = brentq(lambda s: price(s) - q.price, lo, hi, xtol=1e-14, rtol=1e-15, maxiter=200)
        resid = abs(price(root) - q.price)
        if resid > PRICE_TOL:
            raise UnattainableQuoteError(f"quote {qid} residual {resid:.3g} above tolerance", quote_id=qid)
        # price must increase with the segment volatility around the root
        bump = 1e-3 * root
        if not price(max(root - bump, lo)) <= price(root) <= price(min(root + bump, hi)):
            raise UnattainableQuoteError(f"quote {qid}: price not monotone in sigma", quote_id=qid)
        values.append(float(root))
    return PiecewiseConstant(tuple(knots), tuple(values))
