"""American payer and receiver swaptions from the early-exercise-premium equations.

The payer value in state-price units solves

    V(t, x) = int_t^{T_n} L(t, u, x, b(u)) du,
    L(t, u, x, z) = -E_{t,x}[H(u, X_u) 1{X_u >= z}],

and the boundary is the solution of ``V(t, b(t)) = G(t, b(t))``.  The receiver
uses ``Lt = -E[H 1{X_u <= z}]`` and the boundary ``bt``.  Both are discretized by
the right-point rule on a grid containing every payment date and solved
backwards from ``T_n``.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from .density import TransformContext, gauss_legendre, mean, tail_functions, tails_over_horizons, variance
from .errors import ConfigurationError, DomainError, SolverFailure
from .model import discount, swap_rate
from .payoff import PayoffTable, gain, terminal_boundary, zero_curves

ROOT_EPS = 1e-12


@dataclass(frozen=True)
class SolverConfig:
    """Discretization of the boundary equation.

    ``x_upper`` fixes the payer bracket ceiling; by default it is
    ``max(50 theta, 10 b(t_{k+1}))``.
    """

    n_steps: int = 200
    root_tol: float = 1e-8
    method: str = "auto"
    quad_tol: float = 1e-12
    x_upper: float | None = None
    pre_t0_nodes: int = 400

    def __post_init__(self) -> None:
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise ConfigurationError("must be a positive integer", path="solver.n_steps")
        if not self.root_tol > 0:
            raise ConfigurationError("must be positive", path="solver.root_tol")
        if self.method not in ("auto", "fourier", "ncx2"):
            raise ConfigurationError(f"unknown method {self.method!r}", path="solver.method")
        if self.pre_t0_nodes < 8:
            raise ConfigurationError("need at least 8 nodes", path="solver.pre_t0_nodes")


def time_grid(spec, n_steps: int) -> np.ndarray:
    """Uniform grid on ``[T_0, T_n]`` merged with the payment dates."""
    if n_steps < 2 * spec.n:
        raise ConfigurationError(f"need at least 2n = {2 * spec.n} steps", path="solver.n_steps")
    uni = np.linspace(spec.t0, spec.tn, n_steps + 1)
    dates = spec.dates
    near = np.abs(uni[:, None] - dates[None, :]).min(axis=1) < 1e-10 * max(1.0, spec.tn)
    return np.unique(np.concatenate([uni[~near], dates]))


@dataclass(frozen=True)
class BoundarySolution:
    side: str
    grid: np.ndarray
    values: np.ndarray
    g: np.ndarray
    h: np.ndarray
    table: PayoffTable = field(repr=False)
    config: SolverConfig = field(repr=False)
    diagnostics: dict = field(default_factory=dict, repr=False)

    def at(self, t):
        """Boundary at ``t`` by linear interpolation between grid points."""
        return np.interp(t, self.grid, self.values)

    @property
    def rate(self) -> np.ndarray:
        return exercise_boundary_swaprate(self)


def _benefit_nodes(table: PayoffTable, us):
    """``H1, H2`` at each node using the branch of the interval ending there."""
    return table.h1(us, left=True), table.h2(us, left=True)


def _kernel(table, t, us, x, zs, side, method, tol, h12=None):
    us = np.asarray(us, dtype=float)
    h1, h2 = _benefit_nodes(table, us) if h12 is None else h12
    S, P = tails_over_horizons(table.params, t, us, x, zs, method, tol)
    out = -h1 * P - (h2 + h1 * zs) * S
    if side == "receiver":
        k, th = table.params.kappa, table.params.theta
        m = th + np.exp(-k * (us - t)) * (np.asarray(x, dtype=float)[..., None] - th)
        out = -(h1 * m + h2) - out
    return out


def kernel_L(table: PayoffTable, ctx: TransformContext, x, z, left: bool = False):
    """``-E_{t,x}[H(u, X_u) 1{X_u >= z}]`` on the horizon of ``ctx``.

    ``left`` takes the branch of ``H`` that ends at ``u`` when ``u`` is a
    payment date (the convention used by the solver).
    """
    if not ctx.u > ctx.t:
        raise DomainError("kernel needs u > t")
    h1, h2 = table.h1(ctx.u, left=left), table.h2(ctx.u, left=left)
    S, P = tail_functions(ctx, z, x)
    return -h1 * P - (h2 + h1 * np.asarray(z)) * S


def kernel_Ltilde(table: PayoffTable, ctx: TransformContext, x, z, left: bool = False):
    """``-E_{t,x}[H(u, X_u) 1{X_u <= z}]``, i.e. ``-E[H] - L``."""
    h1, h2 = table.h1(ctx.u, left=left), table.h2(ctx.u, left=left)
    return -(h1 * mean(ctx, x) + h2) - kernel_L(table, ctx, x, z, left)


def _bracketed_root(F, lo, hi, guess, tol, step):
    f_lo, f_hi = F(lo), F(hi)
    if f_lo == 0:
        return lo
    if f_hi == 0:
        return hi
    if np.sign(f_lo) == np.sign(f_hi):
        raise SolverFailure(
            f"boundary root not bracketed in ({lo:.6g}, {hi:.6g})",
            step=step, residuals=(float(np.sign(f_lo)), float(np.sign(f_hi))),
        )
    a, b = lo, hi
    if lo < guess < hi:
        # tighten the bracket around the warm start before Brent's method
        f_g = F(guess)
        if f_g == 0:
            return guess
        upward = np.sign(f_g) == np.sign(f_lo)
        d = 0.02 * max(abs(guess), 1e-3)
        x0, f0 = guess, f_g
        while True:
            x1 = min(x0 + d, hi) if upward else max(x0 - d, lo)
            f1 = F(x1)
            if np.sign(f1) != np.sign(f0) or x1 in (lo, hi):
                a, b = (x0, x1) if upward else (x1, x0)
                break
            x0, f0, d = x1, f1, 2 * d
    return brentq(F, a, b, xtol=tol, rtol=4 * np.finfo(float).eps, maxiter=200)


def solve_boundary(table: PayoffTable, config: SolverConfig | None = None, side: str | None = None) -> BoundarySolution:
    """Backward recursion for the payer boundary ``b`` or receiver boundary ``bt``."""
    config = config or SolverConfig()
    spec, params = table.spec, table.params
    side = side or spec.side
    if side not in ("payer", "receiver"):
        raise ConfigurationError(f"unknown side {side!r}", path="trade.side")
    started = time.perf_counter()
    grid = time_grid(spec, config.n_steps)
    n = len(grid) - 1
    h12 = _benefit_nodes(table, grid[1:])
    zc = np.array([zero_curves(table, t) for t in grid])
    b = np.empty(n + 1)
    b[n] = terminal_boundary(params, spec)
    n_evals = 0
    for k in range(n - 1, -1, -1):
        t = grid[k]
        w = np.diff(grid[k:])
        zs = b[k + 1:]
        hk = (h12[0][k:], h12[1][k:])

        def F(y):
            nonlocal n_evals
            n_evals += 1
            L = _kernel(table, t, grid[k + 1:], y, zs, side, config.method, config.quad_tol, hk)
            return gain(table, t, y) - np.sum(w * L)

        g, h = zc[k]
        if side == "payer":
            lo = max(g, h, 0.0) + ROOT_EPS
            hi = config.x_upper or max(50 * params.theta, 10 * b[k + 1])
        else:
            lo, hi = ROOT_EPS, min(g, h)
            if hi <= lo:
                raise SolverFailure("receiver bracket is empty", step=k, residuals=None)
        b[k] = _bracketed_root(F, lo, hi, b[k + 1], config.root_tol, k)
    diag = dict(n_nodes=n + 1, n_steps=config.n_steps, root_tol=config.root_tol,
                method=config.method, kernel_evaluations=n_evals,
                seconds=time.perf_counter() - started)
    return BoundarySolution(side, grid, b, zc[:, 0], zc[:, 1], table, config, diag)


def value_function(bnd: BoundarySolution, t: float, x):
    """``V(t, x)`` (payer) or ``Vt(t, x)`` (receiver, nonpositive) from the premium sum.

    For ``t`` between grid points the first weight is ``t_{l+1} - t``.
    """
    table, spec = bnd.table, bnd.table.spec
    if t < spec.t0 - 1e-14 or t > spec.tn + 1e-14:
        raise DomainError("value function defined on [T_0, T_n]")
    x = np.asarray(x, dtype=float)
    j = int(np.searchsorted(bnd.grid, t + 1e-14, side="right"))
    if j >= len(bnd.grid):
        return np.zeros_like(x) if x.ndim else 0.0
    us = bnd.grid[j:]
    w = np.diff(np.concatenate([[t], us]))
    L = _kernel(table, t, us, x, bnd.values[j:], bnd.side, bnd.config.method, bnd.config.quad_tol)
    out = np.sum(w * L, axis=-1)
    return float(out) if x.ndim == 0 else out


def _in_stopping_region(bnd: BoundarySolution, t: float, x):
    b = bnd.at(t)
    return x >= b if bnd.side == "payer" else x <= b


def _value_at(bnd: BoundarySolution, t: float, x):
    """Value function with the gain substituted on the stopping region."""
    x = np.asarray(x, dtype=float)
    v = np.asarray(value_function(bnd, t, x))
    if t < bnd.table.spec.tn:
        v = np.where(_in_stopping_region(bnd, t, x), gain(bnd.table, t, x), v)
    return v


def _sign(side):
    return 1.0 if side == "payer" else -1.0


def expected_value_at_t0(bnd: BoundarySolution, t: float, x: float) -> float:
    """``E_{t,x}[V(T_0, X_{T_0})]`` (signed like the value function).

    The exercise part is exact through the tail functions; the continuation
    part is ``int C dF`` integrated by parts against the distribution
    function, with ``C`` a cubic spline of the premium sum.
    """
    table, spec = bnd.table, bnd.table.spec
    t0 = spec.t0
    ctx = TransformContext(table.params, t, t0, method=bnd.config.method, tol=bnd.config.quad_tol)
    b0 = float(bnd.values[0])
    g1, g2 = table.g1(t0), table.g2(t0)
    S0, P0 = tail_functions(ctx, b0, x)
    n = bnd.config.pre_t0_nodes
    if bnd.side == "payer":
        exercise = g1 * (P0 + b0 * S0) + g2 * S0
        nodes = np.concatenate([[0.0], np.geomspace(1e-4 * b0, b0, n - 1)])
    else:
        m = float(mean(ctx, x))
        exercise = g1 * (m - P0 - b0 * S0) + g2 * (1.0 - S0)
        top = max(10.0 * b0, m + 40.0 * np.sqrt(variance(ctx, x)))
        nodes = np.geomspace(b0, top, n)
    C = np.asarray(value_function(bnd, t0, nodes))
    spline = CubicSpline(nodes, C)
    dC = spline.derivative()
    xq, wq = [], []
    for a, c in zip(nodes[:-1], nodes[1:]):
        q, wts = gauss_legendre(a, c, 4)
        xq.append(q)
        wq.append(wts)
    xq, wq = np.concatenate(xq), np.concatenate(wq)
    Sq, _ = tail_functions(ctx, xq, x)
    if bnd.side == "payer":
        cont = C[-1] * (1.0 - S0) - np.sum(wq * dC(xq) * (1.0 - Sq))
    else:
        S_top, _ = tail_functions(ctx, nodes[-1], x)
        cont = C[0] * S0 - C[-1] * S_top + np.sum(wq * dC(xq) * Sq)
    return float(exercise + cont)


def american_price(bnd: BoundarySolution, t: float, x):
    """Price of the American swaption on ``bnd.side`` at ``(t, x)``, scaled by the notional."""
    table, spec = bnd.table, bnd.table.spec
    if t < 0:
        raise DomainError("negative time")
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise DomainError("factor value must be nonnegative")
    if t >= spec.t0:
        v = _value_at(bnd, t, x)
    elif x.ndim == 0:
        v = np.asarray(expected_value_at_t0(bnd, t, float(x)))
    else:
        v = np.array([expected_value_at_t0(bnd, t, float(xi)) for xi in x.ravel()]).reshape(x.shape)
    price = np.maximum(_sign(bnd.side) * v / (discount(table.params, t) * (1.0 + x)), 0.0)
    price = spec.notional * price
    return float(price) if price.ndim == 0 else price


def exercise_boundary_swaprate(bnd: BoundarySolution) -> np.ndarray:
    """Boundary in swap-rate terms; the last entry is the limit at ``T_n``, the short rate."""
    params, spec = bnd.table.params, bnd.table.spec
    out = np.empty_like(bnd.values)
    for k, (t, b) in enumerate(zip(bnd.grid[:-1], bnd.values[:-1])):
        out[k] = swap_rate(params, spec, t, max(b, 1e-300))
    bn = bnd.values[-1]
    out[-1] = params.alpha.left_value(spec.tn) - params.kappa * (params.theta - bn) / (1.0 + bn)
    return out
