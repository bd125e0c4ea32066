"""Linear-rational square-root model primitives.

The factor follows ``dX = kappa (theta - X) dt + sigma(t) sqrt(X) dB`` and the
state price density is ``zeta_t = exp(-int_0^t alpha) (1 + X_t)``.  Bond
prices, swap values and swap rates are ratios of functions affine in ``X``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np

from .errors import ConfigurationError, DomainError, UnattainableRateError

Side = Literal["payer", "receiver"]
SIDES = ("payer", "receiver")


@dataclass(frozen=True)
class PiecewiseConstant:
    """Right-continuous step function on ``[0, inf)``.

    ``values[i]`` applies on ``[knots[i], knots[i+1])``; the last value extends
    to infinity.  ``knots[0]`` must be 0.
    """

    knots: tuple[float, ...]
    values: tuple[float, ...]
    _cum: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        knots = tuple(float(k) for k in self.knots)
        values = tuple(float(v) for v in self.values)
        if len(knots) == 0 or len(knots) != len(values):
            raise ConfigurationError("knots and values must be non-empty and of equal length")
        if knots[0] != 0.0:
            raise ConfigurationError("first knot must be 0")
        if any(b <= a for a, b in zip(knots, knots[1:])):
            raise ConfigurationError("knots must be strictly increasing")
        if not all(np.isfinite(values)):
            raise ConfigurationError("curve values must be finite")
        object.__setattr__(self, "knots", knots)
        object.__setattr__(self, "values", values)
        k = np.asarray(knots)
        v = np.asarray(values)
        cum = np.concatenate([[0.0], np.cumsum(v[:-1] * np.diff(k))])
        object.__setattr__(self, "_cum", cum)

    @classmethod
    def constant(cls, value: float) -> "PiecewiseConstant":
        return cls((0.0,), (float(value),))

    @classmethod
    def from_breakpoints(cls, breakpoints: Sequence[float], values: Sequence[float]) -> "PiecewiseConstant":
        """Curve with ``values[i]`` on ``[breakpoints[i-1], breakpoints[i])``.

        ``len(values) == len(breakpoints)``; the last value is extended flat.
        """
        return cls((0.0, *[float(b) for b in breakpoints[:-1]]), tuple(values))

    @property
    def is_constant(self) -> bool:
        return len(set(self.values)) == 1

    def _index(self, t):
        return np.searchsorted(self.knots, t, side="right") - 1

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < 0):
            raise DomainError("curve evaluated at negative time")
        out = np.asarray(self.values)[self._index(t)]
        return float(out) if out.ndim == 0 else out

    def left_value(self, t: float) -> float:
        """Left limit at ``t`` (equal to the value at 0 for ``t == 0``)."""
        if t <= 0:
            return self.values[0]
        return self.values[int(np.searchsorted(self.knots, t, side="left")) - 1]

    def antiderivative(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < 0):
            raise DomainError("curve integrated from negative time")
        i = self._index(t)
        out = self._cum[i] + np.asarray(self.values)[i] * (t - np.asarray(self.knots)[i])
        return float(out) if out.ndim == 0 else out

    def integral(self, a, b):
        """``int_a^b`` of the curve (closed form per piece)."""
        return self.antiderivative(b) - self.antiderivative(a)

    def pieces(self, a: float, b: float) -> list[tuple[float, float, float]]:
        """Split ``[a, b]`` into ``(start, end, value)`` constant pieces."""
        if b < a:
            raise DomainError("pieces requested on reversed interval")
        if b == a:
            return []
        inner = [k for k in self.knots if a < k < b]
        edges = [a, *inner, b]
        return [(s, e, float(self(s))) for s, e in zip(edges, edges[1:])]

    def is_constant_on(self, a: float, b: float) -> bool:
        return len({v for _, _, v in self.pieces(a, b)}) <= 1


def as_curve(value) -> PiecewiseConstant:
    if isinstance(value, PiecewiseConstant):
        return value
    return PiecewiseConstant.constant(float(value))


@dataclass(frozen=True)
class ModelParams:
    kappa: float
    theta: float
    alpha: PiecewiseConstant
    sigma: PiecewiseConstant
    x0: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "alpha", as_curve(self.alpha))
        object.__setattr__(self, "sigma", as_curve(self.sigma))
        for name in ("kappa", "theta", "x0"):
            v = float(getattr(self, name))
            if not v > 0 or not np.isfinite(v):
                raise ConfigurationError(f"must be positive, got {v!r}", path=name)
            object.__setattr__(self, name, v)
        if min(self.sigma.values) < 0:
            raise ConfigurationError("sigma must be nonnegative", path="sigma")

    def replace(self, **changes) -> "ModelParams":
        from dataclasses import replace

        return replace(self, **changes)


@dataclass(frozen=True)
class SwapSpec:
    t0: float
    delta: float
    n: int
    strike: float
    notional: float = 1.0
    side: Side = "payer"

    def __post_init__(self) -> None:
        if not self.t0 >= 0:
            raise ConfigurationError("first reset date must be nonnegative", path="t0")
        if not self.delta > 0:
            raise ConfigurationError("accrual period must be positive", path="delta")
        if int(self.n) != self.n or self.n < 1:
            raise ConfigurationError("number of payments must be an integer >= 1", path="n")
        if self.side not in SIDES:
            raise ConfigurationError(f"side must be one of {SIDES}", path="side")
        object.__setattr__(self, "n", int(self.n))

    @property
    def dates(self) -> np.ndarray:
        """Reset and payment dates ``T_0, ..., T_n``."""
        return self.t0 + self.delta * np.arange(self.n + 1)

    @property
    def payment_dates(self) -> np.ndarray:
        return self.dates[1:]

    @property
    def tn(self) -> float:
        return float(self.dates[-1])

    def period_index(self, t: float) -> int:
        """``m`` with ``T_{m-1} <= t < T_m`` (defined for ``T_0 <= t < T_n``)."""
        m = int(np.searchsorted(self.dates, t, side="right"))
        return min(max(m, 1), self.n)

    def with_side(self, side: Side) -> "SwapSpec":
        from dataclasses import replace

        return replace(self, side=side)


def discount(params: ModelParams, t):
    """``exp(-int_0^t alpha(s) ds)``."""
    return np.exp(-params.alpha.antiderivative(t))


def _check_x(x):
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise DomainError("factor value must be positive")
    return x


def _scalar(a):
    a = np.asarray(a)
    return float(a) if a.ndim == 0 else a


def state_price_density(params: ModelParams, t: float, x):
    if t < 0:
        raise DomainError("negative time")
    x = _check_x(x)
    return _scalar(discount(params, t) * (1.0 + x))


def conditional_mean(params: ModelParams, t: float, T: float, x):
    if T < t or t < 0:
        raise DomainError("conditional mean needs 0 <= t <= T")
    x = np.asarray(x, dtype=float)
    return _scalar(params.theta + np.exp(-params.kappa * (T - t)) * (x - params.theta))


def _bond_numerator(params: ModelParams, t: float, T):
    """Coefficients ``(c1, c0)`` with ``P(t,T) (1+x) = c1 x + c0``."""
    T = np.asarray(T, dtype=float)
    disc = np.exp(-params.alpha.integral(t, T))
    e = np.exp(-params.kappa * (T - t))
    return disc * e, disc * (1.0 + params.theta - params.theta * e)


def zcb_price(params: ModelParams, t: float, T, x):
    T = np.asarray(T, dtype=float)
    if t < 0 or np.any(T < t):
        raise DomainError("bond price needs 0 <= t <= T")
    x = _check_x(x)
    c1, c0 = _bond_numerator(params, t, T)
    return _scalar((c1 * x + c0) / (1.0 + x))


def zcb_price_dx(params: ModelParams, t: float, T, x):
    """Analytic derivative of the bond price in the factor (always < 0 for T > t)."""
    x = _check_x(x)
    c1, c0 = _bond_numerator(params, t, T)
    return _scalar((c1 - c0) / (1.0 + x) ** 2)


def short_rate(params: ModelParams, t: float, x):
    if t < 0:
        raise DomainError("negative time")
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise DomainError("factor value must be nonnegative")
    return _scalar(params.alpha(t) - params.kappa * (params.theta - x) / (1.0 + x))


def _swap_coefficients(params: ModelParams, spec: SwapSpec, t: float):
    """Affine coefficients of the floating leg ``(a1, a0)`` and annuity ``(b1, b0)``.

    Both legs are multiplied by ``1 + x``, so the swap rate is
    ``(a1 x + a0) / (b1 x + b0)`` and the payer swap value is
    ``(a1 x + a0 - K (b1 x + b0)) / (1 + x)``.
    """
    dates = spec.dates
    if t < spec.t0:
        c1, c0 = _bond_numerator(params, t, dates)
        a1, a0 = c1[0] - c1[-1], c0[0] - c0[-1]
        b1, b0 = spec.delta * c1[1:].sum(), spec.delta * c0[1:].sum()
        return a1, a0, b1, b0
    m = spec.period_index(t)
    c1, c0 = _bond_numerator(params, t, dates[m:])
    a1, a0 = 1.0 - c1[-1], 1.0 - c0[-1]
    acc = dates[m] - t
    b1 = acc * c1[0] + spec.delta * c1[1:].sum()
    b0 = acc * c0[0] + spec.delta * c0[1:].sum()
    return a1, a0, b1, b0


def swap_value(params: ModelParams, spec: SwapSpec, t: float, x):
    """Value of the swap to the holder of ``spec.side``, scaled by the notional."""
    if t < 0 or t > spec.tn:
        raise DomainError(f"swap value requested at t={t} outside [0, T_n]")
    x = _check_x(x)
    if t == spec.tn:
        return _scalar(np.zeros_like(x))
    a1, a0, b1, b0 = _swap_coefficients(params, spec, t)
    payer = (a1 * x + a0 - spec.strike * (b1 * x + b0)) / (1.0 + x)
    sign = 1.0 if spec.side == "payer" else -1.0
    return _scalar(sign * spec.notional * payer)


def swap_rate(params: ModelParams, spec: SwapSpec, t: float, x):
    """Par rate of the remaining swap; forward par rate before ``T_0``."""
    if t < 0 or t >= spec.tn:
        raise DomainError(f"swap rate requested at t={t} outside [0, T_n)")
    x = _check_x(x)
    a1, a0, b1, b0 = _swap_coefficients(params, spec, t)
    return _scalar((a1 * x + a0) / (b1 * x + b0))


def swap_rate_range(params: ModelParams, spec: SwapSpec, t: float) -> tuple[float, float]:
    """Limits of the swap rate as ``x -> 0+`` and ``x -> inf``."""
    if t < 0 or t >= spec.tn:
        raise DomainError(f"swap rate requested at t={t} outside [0, T_n)")
    a1, a0, b1, b0 = _swap_coefficients(params, spec, t)
    return a0 / b0, a1 / b1


def invert_swap_rate(params: ModelParams, spec: SwapSpec, t: float, s: float) -> float:
    """Factor value whose swap rate at ``t`` equals ``s``.

    The rate is a ratio of affine functions of ``x``, so the inverse is explicit.
    """
    lo, hi = swap_rate_range(params, spec, t)
    if not lo < s < hi:
        raise UnattainableRateError(s, lo, hi)
    a1, a0, b1, b0 = _swap_coefficients(params, spec, t)
    return float((s * b0 - a0) / (a1 - s * b1))


def strike_admissible(params: ModelParams, strike: float, side: Side) -> bool:
    if side == "payer":
        return strike <= min(params.alpha.values) + params.kappa
    if side == "receiver":
        return strike >= max(params.alpha.values) - params.kappa * params.theta
    raise ConfigurationError(f"side must be one of {SIDES}", path="side")


def reference_params(sigma=0.5) -> ModelParams:
    """Reference parameter set: theta = 2.55, kappa = 0.03, alpha = theta kappa, x0 = 0.762."""
    return ModelParams(kappa=0.03, theta=2.55, alpha=0.0765, sigma=sigma, x0=0.762)


def reference_swap(side: Side = "payer", notional: float = 1.0) -> SwapSpec:
    return SwapSpec(t0=1.0, delta=0.5, n=4, strike=0.05, notional=notional, side=side)
