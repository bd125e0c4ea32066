"""Gain function G = G1(t) x + G2(t) and benefit function H = G_t + L_X G.

All coefficient functions are evaluated lazily from the discount coefficients
``c_i = exp(-int_0^{T_i} alpha)``; on ``[T_{m-1}, T_m)`` the ``m``-th branch is
used (right-continuous at payment dates, left limit at ``T_n``).  Passing
``left=True`` selects the branch of ``(T_{m-1}, T_m]`` instead, i.e. the left
limit at payment dates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DomainError
from .model import ModelParams, SwapSpec, discount, strike_admissible


@dataclass(frozen=True)
class PayoffTable:
    params: ModelParams
    spec: SwapSpec
    c: np.ndarray  # c[i-1] = c_i, i = 1..n

    @property
    def kappa(self) -> float:
        return self.params.kappa

    @property
    def theta(self) -> float:
        return self.params.theta

    def _branch(self, t, left=False):
        """Period index ``m`` (1-based) and the time array, clipped to ``[T_0, T_n]``."""
        t = np.asarray(t, dtype=float)
        spec = self.spec
        if np.any(t < spec.t0 - 1e-14) or np.any(t > spec.tn + 1e-14):
            raise DomainError("payoff coefficients are defined on [T_0, T_n]")
        m = np.searchsorted(spec.dates, t, side="left" if left else "right")
        return np.clip(m, 1, spec.n), t

    def _sums(self, t, left=False):
        """Per-branch pieces shared by G1, G2 and their hat versions."""
        m, t = self._branch(t, left)
        spec, k, K = self.spec, self.kappa, self.spec.strike
        Tj = spec.payment_dates
        tt = np.atleast_1d(t)
        mm = np.atleast_1d(m)
        e = np.exp(-k * (Tj[None, :] - tt[:, None]))  # e^{-kappa (T_j - t)}
        later = np.arange(1, spec.n + 1)[None, :] > mm[:, None]
        cm = self.c[mm - 1]
        em = np.exp(-k * (Tj[mm - 1] - tt))
        acc = Tj[mm - 1] - tt
        s_exp = spec.delta * K * np.sum(np.where(later, self.c * e, 0.0), axis=1)
        s_flat = spec.delta * K * np.sum(np.where(later, self.c, 0.0), axis=1)
        d = discount(self.params, tt)
        cn = self.c[-1]
        en = np.exp(-k * (spec.tn - tt))
        return dict(t=tt, m=mm, d=d, cm=cm, em=em, acc=acc, cn=cn, en=en,
                    s_exp=s_exp, s_flat=s_flat, scalar=np.ndim(t) == 0)

    @staticmethod
    def _out(a, scalar):
        return float(a[0]) if scalar else a

    def g1(self, t, left=False):
        s = self._sums(t, left)
        K = self.spec.strike
        v = s["d"] - s["cn"] * s["en"] - s["cm"] * s["acc"] * K * s["em"] - s["s_exp"]
        return self._out(v, s["scalar"])

    def g1hat(self, t, left=False):
        s = self._sums(t, left)
        K = self.spec.strike
        v = s["d"] - s["cn"] - s["cm"] * s["acc"] * K - s["s_flat"]
        return self._out(v, s["scalar"])

    def g2(self, t, left=False):
        g1, gh = np.asarray(self.g1(t, left)), np.asarray(self.g1hat(t, left))
        v = self.theta * (gh - g1) + gh
        return float(v) if np.ndim(t) == 0 else v

    def dg1(self, t, left=False):
        """Analytic time derivative of G1 on the open branch intervals."""
        s = self._sums(t, left)
        k, K = self.kappa, self.spec.strike
        al = self._alpha(s["t"], left)
        g1 = np.atleast_1d(self.g1(t, left))
        v = k * (g1 - s["d"]) - al * s["d"] + s["cm"] * K * s["em"]
        return self._out(v, s["scalar"])

    def dg1hat(self, t, left=False):
        s = self._sums(t, left)
        al = self._alpha(s["t"], left)
        v = -al * s["d"] + s["cm"] * self.spec.strike
        return self._out(v, s["scalar"])

    def dg2(self, t, left=False):
        v = (1 + self.theta) * np.asarray(self.dg1hat(t, left)) - self.theta * np.asarray(self.dg1(t, left))
        return float(v) if np.ndim(t) == 0 else v

    def _alpha(self, t, left):
        if left:
            return np.array([self.params.alpha.left_value(v) for v in t])
        return np.asarray(self.params.alpha(t))

    def h1(self, t, left=False):
        s = self._sums(t, left)
        al = self._alpha(s["t"], left)
        v = -(self.kappa + al) * s["d"] + s["cm"] * self.spec.strike * s["em"]
        return self._out(v, s["scalar"])

    def h2(self, t, left=False):
        s = self._sums(t, left)
        al = self._alpha(s["t"], left)
        h1 = np.atleast_1d(self.h1(t, left))
        v = -self.theta * h1 + (1 + self.theta) * (s["cm"] * self.spec.strike - al * s["d"])
        return self._out(v, s["scalar"])

    def pi(self, t):
        v = -np.asarray(self.h1(t)) / self.kappa
        return float(v) if np.ndim(t) == 0 else v


def build_payoff_table(params: ModelParams, spec: SwapSpec) -> PayoffTable:
    if not strike_admissible(params, spec.strike, spec.side):
        raise ConfigurationError(
            f"strike {spec.strike} violates the admissibility bound for a {spec.side} swaption "
            "(assK: payer K <= inf alpha + kappa, receiver K >= sup alpha - kappa*theta)",
            path="trade.strike",
        )
    c = np.asarray(discount(params, spec.payment_dates), dtype=float)
    return PayoffTable(params=params, spec=spec, c=c)


def gain(table: PayoffTable, t: float, x):
    x = np.asarray(x, dtype=float)
    if t >= table.spec.tn:
        if t > table.spec.tn + 1e-14:
            raise DomainError("gain defined on [T_0, T_n]")
        out = np.zeros_like(x)
    else:
        out = table.g1(t) * x + table.g2(t)
    return float(out) if out.ndim == 0 else out


def benefit(table: PayoffTable, t: float, x):
    x = np.asarray(x, dtype=float)
    out = table.h1(t) * x + table.h2(t)
    return float(out) if out.ndim == 0 else out


def terminal_value(params: ModelParams, spec: SwapSpec) -> float:
    """``(theta kappa - alpha(T_n) + K) / (alpha(T_n) + kappa - K)`` before clamping."""
    a = params.alpha.left_value(spec.tn)
    k, th, K = params.kappa, params.theta, spec.strike
    return (th * k - a + K) / (a + k - K)


def terminal_boundary(params: ModelParams, spec: SwapSpec) -> float:
    return max(0.0, terminal_value(params, spec))


def zero_curves(table: PayoffTable, t: float) -> tuple[float, float]:
    """Zero crossings ``g`` of G and ``h`` of H; the common limit is returned at ``T_n``."""
    spec = table.spec
    if t < spec.t0 or t > spec.tn:
        raise DomainError("zero curves defined on [T_0, T_n)")
    if spec.tn - t < 1e-10:
        v = terminal_value(table.params, spec)
        return v, v
    return -table.g2(t) / table.g1(t), -table.h2(t) / table.h1(t)
