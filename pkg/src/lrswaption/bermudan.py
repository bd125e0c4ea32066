"""Bermudan and European swaptions by backward induction on a factor lattice.

Values between lattice nodes are taken piecewise linear, so one transition
step is ``E[V(X_u)] = sum_j V_j E[phi_j(X_u)]`` with hat functions ``phi_j``.
Their expectations are second differences of ``E[(X_u - z)^+]`` at the nodes,
which keeps every row nonnegative and exact for affine payoffs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .density import TransformContext, mean, tail_functions, tails_over_horizons, variance
from .errors import ConfigurationError, DomainError, TruncationError
from .model import discount
from .payoff import PayoffTable, gain, zero_curves

MAX_DEFECT = 1e-2


@dataclass(frozen=True)
class LatticeSpec:
    """Uniform factor lattice on ``[0, x_max]``; ``x_max`` defaults to ``theta + 10 max(theta, x0)``."""

    n_x: int = 2806
    x_max: float | None = None
    method: str = "auto"
    tol: float = 1e-12
    max_enlarge: int = 3

    def __post_init__(self) -> None:
        if self.n_x < 4:
            raise ConfigurationError("need at least 4 nodes", path="lattice.n_x")
        if self.x_max is not None and not self.x_max > 0:
            raise ConfigurationError("must be positive", path="lattice.x_max")

    def upper(self, params) -> float:
        return self.x_max if self.x_max is not None else params.theta + 10 * max(params.theta, params.x0)

    def nodes(self, params) -> np.ndarray:
        return np.linspace(0.0, self.upper(params), self.n_x + 1)


@dataclass(frozen=True)
class TransitionMatrix:
    t: float
    u: float
    weights: np.ndarray = field(repr=False)
    max_defect: float = 0.0


def _tails_grid(params, t, u, xs, zs, method, tol):
    """``S, Pi`` of shape ``(len(xs), len(zs))`` for a single horizon."""
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    if method != "fourier" and params.sigma.is_constant_on(t, u) and params.sigma(t) > 0:
        return tails_over_horizons(params, t, np.full(len(zs), u), xs, zs, method, tol)
    ctx = TransformContext(params, t, u, method=method, tol=tol)
    S = np.empty((len(xs), len(zs)))
    P = np.empty_like(S)
    for i, x in enumerate(xs):
        S[i], P[i] = tail_functions(ctx, zs, float(x))
    return S, P


ROW_BLOCK = 64
BAND_SD = 14.0
BAND_TAIL = 60.0


def hat_weights(params, t: float, u: float, xs, nodes, method="auto", tol=1e-12):
    """Expectations of the hat functions on ``nodes`` for starts ``xs``; returns ``(W, defect)``.

    Mass beyond the last node is dropped and reported as the row defect.  Tail
    functions are evaluated only on a band of levels around each block of
    starts (``BAND_SD`` standard deviations plus ``BAND_TAIL`` exponential
    tail scales); outside the band they are exactly ``(1, m - z)`` or ``(0, 0)``
    to double precision.
    """
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    h = nodes[1] - nodes[0]
    ctx = TransformContext(params, t, u, method=method, tol=tol)
    tail_scale = 0.5 * ctx.lam[0]
    W = np.zeros((len(xs), len(nodes)))
    for lo in range(0, len(xs), ROW_BLOCK):
        blk = xs[lo:lo + ROW_BLOCK]
        m = params.theta + np.exp(-params.kappa * (u - t)) * (blk - params.theta)
        sd = np.sqrt(np.maximum(variance(ctx, blk), 0.0))
        z_lo = (m - BAND_SD * sd).min() - 2 * h
        z_hi = (m + BAND_SD * sd).max() + BAND_TAIL * tail_scale + 2 * h
        i0 = max(int(np.searchsorted(nodes, z_lo)) - 1, 0)
        i1 = min(int(np.searchsorted(nodes, z_hi)) + 1, len(nodes))
        band = nodes[i0:i1]
        S = np.zeros((len(blk), len(nodes)))
        P = np.zeros_like(S)
        S[:, :i0] = 1.0
        P[:, :i0] = m[:, None] - nodes[None, :i0]
        S[:, i0:i1], P[:, i0:i1] = _tails_grid(params, t, u, blk, band, method, tol)
        w = W[lo:lo + ROW_BLOCK]
        w[:, 1:-1] = (P[:, :-2] - 2.0 * P[:, 1:-1] + P[:, 2:]) / h
        w[:, 0] = 1.0 - (m - P[:, 1]) / h
        w[:, -1] = (P[:, -2] - P[:, -1]) / h - S[:, -1]
    np.maximum(W, 0.0, out=W)
    defect = 1.0 - W.sum(axis=1)
    return W, defect


def transition_matrix(params, t: float, u: float, lattice: LatticeSpec) -> TransitionMatrix:
    """Row-normalized hat weights; ``max_defect`` is the largest mass lost by a row.

    Rows started near the top node lose mass by construction; whether that
    matters is judged by :func:`truncation_mass` from the pricing state.
    """
    nodes = lattice.nodes(params)
    W, defect = hat_weights(params, t, u, nodes, nodes, lattice.method, lattice.tol)
    W /= W.sum(axis=1, keepdims=True)
    return TransitionMatrix(t, u, W, float(np.abs(defect).max()))


def truncation_mass(params, t: float, u: float, x: float, x_max: float, method="auto") -> float:
    """``P_{t,x}(X_u > x_max)``: mass the lattice cannot represent."""
    ctx = TransformContext(params, t, u, method=method)
    return float(tail_functions(ctx, x_max, x)[0])


def transition_matrices(params, dates, lattice: LatticeSpec) -> list[TransitionMatrix]:
    """One matrix per date interval, shared between intervals with identical laws."""
    cache: dict = {}
    out = []
    const = params.sigma.is_constant_on(float(dates[0]), float(dates[-1]))
    for t, u in zip(dates[:-1], dates[1:]):
        key = round(u - t, 12) if const else (t, u)
        if key not in cache:
            cache[key] = transition_matrix(params, float(t), float(u), lattice)
        tm = cache[key]
        out.append(TransitionMatrix(float(t), float(u), tm.weights, tm.max_defect))
    return out


@dataclass(frozen=True)
class BermudanResult:
    price: float
    nodes: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)  # state-price-unit value at the first date
    dates: np.ndarray = field(repr=False)
    diagnostics: dict = field(default_factory=dict)


def _sign(side):
    return 1.0 if side == "payer" else -1.0


def bermudan_value(table: PayoffTable, dates, lattice: LatticeSpec | None = None):
    """Backward induction over ``dates``.

    Returns ``(nodes, value, continuation, diagnostics)`` at the first date in
    signed gain units (payer ``max(G, C)``, receiver ``min(G, C)``).
    """
    lattice = lattice or LatticeSpec()
    spec, params = table.spec, table.params
    dates = np.asarray(sorted(set(float(d) for d in dates)))
    if len(dates) == 0 or dates[0] < spec.t0 - 1e-12 or dates[-1] > spec.tn + 1e-12:
        raise DomainError("exercise dates must lie in [T_0, T_n]")
    lat = lattice
    for attempt in range(lattice.max_enlarge + 1):
        lost = truncation_mass(params, 0.0, float(dates[-1]), params.x0, lat.upper(params), lat.method)
        if lost <= MAX_DEFECT:
            break
        if attempt == lattice.max_enlarge:
            raise TruncationError(f"lattice top {lat.upper(params):.6g} loses {lost:.3g} of the mass")
        lat = LatticeSpec(n_x=int(lat.n_x * 1.5), x_max=lat.upper(params) * 1.5,
                          method=lat.method, tol=lat.tol, max_enlarge=0)
    nodes = lat.nodes(params)
    pick = np.maximum if spec.side == "payer" else np.minimum
    v = pick(gain(table, dates[-1], nodes), 0.0)
    cont = np.zeros_like(nodes)
    const = params.sigma.is_constant_on(float(dates[0]), float(dates[-1]))
    cache: dict = {}
    worst = 0.0
    for t, u in zip(reversed(dates[:-1]), reversed(dates[1:])):
        if np.any(v != 0):
            key = round(u - t, 12) if const else (t, u)
            if key not in cache:
                cache[key] = transition_matrix(params, float(t), float(u), lat)
            worst = max(worst, cache[key].max_defect)
            cont = cache[key].weights @ v
        else:
            cont = np.zeros_like(nodes)  # a zero value stays zero under any transition
        v = pick(gain(table, t, nodes), cont)
    diag = dict(n_x=lat.n_x, x_max=lat.upper(params), n_dates=len(dates), truncated_mass=lost,
                max_row_defect=worst, n_matrices=len(cache))
    return nodes, v, cont, diag


def _linear_pieces(z, c, F, M):
    """``int c dF`` over ``[z_0, z_-1]`` for ``c`` linear between knots, from ``F`` and
    ``M(z) = E[X 1{X < z}]`` at the knots."""
    dz = np.diff(z)
    beta = np.diff(c) / np.where(dz > 0, dz, 1.0)
    alpha = c[:-1] - beta * z[:-1]
    return float(np.sum(alpha * np.diff(F) + beta * np.diff(M)))


def split_expectation(table: PayoffTable, ctx: TransformContext, x: float, nodes, cont, side: str):
    """``E_{t,x}[V(t_1, X)]`` with ``V = G`` on the exercise side and the piecewise-linear
    continuation ``cont`` elsewhere, integrated exactly against the law of ``X_{t_1}``.

    Returns ``(expectation, threshold)``.
    """
    t1 = ctx.u
    d = gain(table, t1, nodes) - cont
    if side == "payer":
        hold = np.nonzero(d < 0)[0]
        j = hold[-1] if len(hold) else -1
    else:
        stop = np.nonzero(d <= 0)[0]
        j = stop[-1] if len(stop) else -1
    if j < 0:
        xs = nodes[0]
    elif j == len(nodes) - 1:
        xs = nodes[-1]
    else:
        xs = nodes[j] + (nodes[j + 1] - nodes[j]) * d[j] / (d[j] - d[j + 1])
    g1, g2 = table.g1(t1), table.g2(t1)
    m = float(mean(ctx, x))
    if side == "payer":
        z = np.append(nodes[nodes < xs], xs)
    else:
        z = np.concatenate([[xs], nodes[nodes > xs]])
    S, P = tail_functions(ctx, z, x)
    S, P = np.atleast_1d(S), np.atleast_1d(P)
    M = m - P - z * S
    c = np.interp(z, nodes, cont)
    if side == "payer":
        exercise = g1 * (P[-1] + xs * S[-1]) + g2 * S[-1]
        continuation = _linear_pieces(z, c, 1.0 - S, M) if len(z) > 1 else 0.0
    else:
        exercise = g1 * M[0] + g2 * (1.0 - S[0])
        continuation = (_linear_pieces(z, c, 1.0 - S, M) if len(z) > 1 else 0.0) + c[-1] * S[-1]
    return float(exercise + continuation), float(xs)


def bermudan_price(table: PayoffTable, dates, t: float = 0.0, x: float | None = None,
                   lattice: LatticeSpec | None = None) -> BermudanResult:
    """Price at ``(t, x)`` with ``t`` not after the first exercise date, scaled by the notional."""
    lattice = lattice or LatticeSpec()
    spec, params = table.spec, table.params
    x = params.x0 if x is None else float(x)
    nodes, v, cont, diag = bermudan_value(table, dates, lattice)
    dates = np.asarray(sorted(set(float(d) for d in dates)))
    if t > dates[0]:
        raise DomainError("pricing time after the first exercise date")
    if t == dates[0]:
        c = float(np.interp(x, nodes, cont))
        g = float(gain(table, t, x))
        val = max(g, c) if spec.side == "payer" else min(g, c)
        threshold = None
    else:
        ctx = TransformContext(params, t, float(dates[0]), method=lattice.method, tol=lattice.tol)
        val, threshold = split_expectation(table, ctx, x, nodes, cont, spec.side)
    price = spec.notional * max(_sign(spec.side) * val / (discount(params, t) * (1.0 + x)), 0.0)
    return BermudanResult(price, nodes, v, dates, dict(diag, threshold=threshold))


def european_price(table: PayoffTable, t: float = 0.0, x: float | None = None, method: str = "auto") -> float:
    """Price of the option to enter the swap at ``T_0`` in closed form through the tail functions."""
    spec, params = table.spec, table.params
    x = params.x0 if x is None else float(x)
    if t > spec.t0:
        raise DomainError("European price needs t <= T_0")
    g1, g2 = table.g1(spec.t0), table.g2(spec.t0)
    g, _ = zero_curves(table, spec.t0)
    if t == spec.t0:
        val = max(_sign(spec.side) * float(gain(table, t, x)), 0.0)
    else:
        ctx = TransformContext(params, t, spec.t0, method=method)
        m = float(mean(ctx, x))
        z = max(g, 0.0)
        S, P = tail_functions(ctx, z, x)
        payer = g1 * (P + z * S) + g2 * S
        # E[(-G)^+] = E[G^+] - E[G]
        val = payer if spec.side == "payer" else payer - (g1 * m + g2)
    return float(spec.notional * max(val, 0.0) / (discount(params, t) * (1.0 + x)))
