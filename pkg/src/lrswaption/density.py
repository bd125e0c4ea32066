"""Transition law of the time-inhomogeneous square-root factor.

With ``psi(s)`` the Riccati solution on ``[s, u]`` started from ``w`` at ``u``,

    E_{t,x}[exp(w X_u)] = exp(varphi(w) + x phi(w)),
    phi(w)    = e^{-kappa (u - t)} w / (1 - w lam(t) / 2),
    varphi(w) = kappa theta int_t^u psi(s) ds,
    lam(s)    = int_s^u e^{-kappa (u - r)} sigma(r)^2 dr.

For piecewise-constant ``sigma`` both pieces are closed form.  Densities, tail
probabilities and tail expectations are recovered by Fourier inversion.  The
transform has only power-law decay (exponent ``2 kappa theta / sigma^2``), so
the leading terms of its exact gamma-mixture expansion are subtracted and
inverted analytically before the remaining integrals are truncated.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate, special, stats
from scipy.optimize import brentq

from .errors import (
    DegenerateDistributionError,
    DomainError,
    TransformExplosionError,
    UnsupportedConfigurationError,
)
from .model import ModelParams, conditional_mean

GL_NODES = 64
N_SUBTRACT = 6
CAUCHY_POINTS = 128
CAUCHY_RADIUS = 0.5
MAX_PANELS = 6000
CHUNK_ENTRIES = 2_000_000


@lru_cache(maxsize=None)
def _leggauss(n: int):
    return np.polynomial.legendre.leggauss(n)


def gauss_legendre(a: float, b: float, n: int = GL_NODES):
    x, w = _leggauss(n)
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


def composite_gauss_legendre(edges, n: int = GL_NODES):
    """Nodes and weights of an ``n``-point rule on each consecutive pair of ``edges``."""
    edges = np.asarray(edges, dtype=float)
    x, w = _leggauss(n)
    half = 0.5 * np.diff(edges)
    nodes = edges[:-1, None] + half[:, None] * (x[None, :] + 1.0)
    weights = half[:, None] * w[None, :]
    return nodes.ravel(), weights.ravel()


@dataclass(frozen=True)
class TransformContext:
    """Per-``(t, u)`` cache of the sigma pieces and the weights ``lam``.

    ``method`` selects ``"ncx2"`` closed forms (sigma constant on ``[t, u]``),
    ``"fourier"`` inversion, or ``"auto"`` (closed form when available).
    """

    params: ModelParams
    t: float
    u: float
    method: str = "auto"
    tol: float = 1e-12
    splits: np.ndarray = field(init=False, repr=False)
    sig2: np.ndarray = field(init=False, repr=False)
    lam: np.ndarray = field(init=False, repr=False)
    decay: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if self.t < 0 or self.u < self.t:
            raise DomainError("transition needs 0 <= t <= u")
        if self.method not in ("auto", "fourier", "ncx2"):
            raise UnsupportedConfigurationError(f"unknown transform method {self.method!r}")
        pieces = self.params.sigma.pieces(self.t, self.u)
        k = self.params.kappa
        splits = np.array([self.t] + [e for _, e, _ in pieces], dtype=float)
        sig2 = np.array([v * v for _, _, v in pieces], dtype=float)
        decay = np.exp(-k * (self.u - splits))
        lam = np.zeros_like(splits)
        for i in range(len(sig2) - 1, -1, -1):
            lam[i] = lam[i + 1] + sig2[i] * (decay[i + 1] - decay[i]) / k
        object.__setattr__(self, "splits", splits)
        object.__setattr__(self, "sig2", sig2)
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "decay", decay)
        if self.method == "ncx2" and not self.closed_form:
            raise UnsupportedConfigurationError(
                "noncentral chi-squared closed form needs constant positive sigma on [t, u]"
            )

    @property
    def degenerate(self) -> bool:
        return self.u == self.t or self.lam[0] <= 0.0

    @property
    def w_max(self) -> float:
        """Supremum of real arguments with a finite transform."""
        return np.inf if self.lam[0] <= 0 else 2.0 / self.lam[0]

    @property
    def closed_form(self) -> bool:
        return len(self.sig2) == 1 and self.sig2[0] > 0

    @property
    def use_ncx2(self) -> bool:
        return self.method == "ncx2" or (self.method == "auto" and self.closed_form)

    def lam_at(self, s):
        """``lam(s)`` for ``s`` in ``[t, u]``."""
        s = np.asarray(s, dtype=float)
        i = np.clip(np.searchsorted(self.splits, s, side="right") - 1, 0, len(self.sig2) - 1)
        e = np.exp(-self.params.kappa * (self.u - s))
        return self.lam[i + 1] + self.sig2[i] * (self.decay[i + 1] - e) / self.params.kappa

    def sub(self, u: float) -> "TransformContext":
        return TransformContext(self.params, self.t, u, method="fourier", tol=self.tol)


def _check_real_w(ctx: TransformContext, w) -> np.ndarray:
    w = np.asarray(w, dtype=complex)
    real = w.imag == 0
    if np.any(real & (w.real >= ctx.w_max)):
        raise TransformExplosionError(
            f"transform infinite for real argument >= {ctx.w_max!r}"
        )
    return w


def riccati(ctx: TransformContext, w):
    """``(varphi, phi)`` at complex ``w`` (vectorized)."""
    w = _check_real_w(ctx, w)
    k, th = ctx.params.kappa, ctx.params.theta
    phi = ctx.decay[0] * w / (1.0 - 0.5 * w * ctx.lam[0])
    varphi = np.zeros_like(w)
    for i, s2 in enumerate(ctx.sig2):
        lo = 1.0 - 0.5 * w * ctx.lam[i]
        hi = 1.0 - 0.5 * w * ctx.lam[i + 1]
        if s2 > 0:
            varphi = varphi + (2.0 * k * th / s2) * np.log(hi / lo)
        else:
            varphi = varphi + th * w * (ctx.decay[i + 1] - ctx.decay[i]) / hi
    if np.ndim(varphi) == 0:
        return complex(varphi), complex(phi)
    return varphi, phi


def riccati_quadrature(ctx: TransformContext, w, n: int = 48):
    """Reference ``(varphi, phi)`` with ``int psi`` by Gauss-Legendre per sigma piece."""
    w = _check_real_w(ctx, np.atleast_1d(w))
    k, th = ctx.params.kappa, ctx.params.theta
    varphi = np.zeros_like(w)
    for a, b in zip(ctx.splits[:-1], ctx.splits[1:]):
        s, ws = gauss_legendre(a, b, n)
        psi = np.exp(-k * (ctx.u - s))[None, :] * w[:, None] / (
            1.0 - 0.5 * w[:, None] * ctx.lam_at(s)[None, :]
        )
        varphi = varphi + k * th * psi @ ws
    phi = ctx.decay[0] * w / (1.0 - 0.5 * w * ctx.lam[0])
    return varphi, phi


def char_fn(ctx: TransformContext, w, x):
    """``E_{t,x}[exp(w X_u)]``."""
    varphi, phi = riccati(ctx, w)
    return np.exp(varphi + np.multiply.outer(np.asarray(x, dtype=float), phi)) if np.ndim(x) else np.exp(varphi + x * phi)


def _log_mgf_derivative(ctx: TransformContext, mu: float, x: float) -> float:
    """``d/dmu log E[exp(mu X_u)]`` for real ``mu < w_max``."""
    k, th = ctx.params.kappa, ctx.params.theta
    out = x * ctx.decay[0] / (1.0 - 0.5 * mu * ctx.lam[0]) ** 2
    for i, s2 in enumerate(ctx.sig2):
        lo, hi = 0.5 * ctx.lam[i], 0.5 * ctx.lam[i + 1]
        if s2 > 0:
            out += (2.0 * k * th / s2) * (lo / (1.0 - mu * lo) - hi / (1.0 - mu * hi))
        else:
            out += th * (ctx.decay[i + 1] - ctx.decay[i]) / (1.0 - mu * hi) ** 2
    return out


def mean(ctx: TransformContext, x):
    return conditional_mean(ctx.params, ctx.t, ctx.u, x)


def variance(ctx: TransformContext, x):
    """``int_t^u e^{-2 kappa (u-s)} sigma(s)^2 E[X_s] ds`` in closed form per piece."""
    k, th = ctx.params.kappa, ctx.params.theta
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    for i, s2 in enumerate(ctx.sig2):
        ea, eb = ctx.decay[i], ctx.decay[i + 1]
        out = out + s2 * (
            th * (eb**2 - ea**2) / (2 * k) + (x - th) * ctx.decay[0] * (eb - ea) / k
        )
    return float(out) if out.ndim == 0 else out


# --- gamma-mixture expansion -------------------------------------------------


@dataclass(frozen=True)
class _Mixture:
    beta: float
    nu: float
    weights: np.ndarray  # a_j for the retained j
    shapes: np.ndarray  # nu + j

    def cf(self, w, shift: float = 0.0):
        """Transform at ``w``, multiplied by ``exp(-w shift)``."""
        w = np.asarray(w, dtype=complex)
        logs = np.log(1.0 - self.beta * w)
        expo = -self.shapes[:, None] * logs[None, :] - (w * shift)[None, :]
        return np.sum(self.weights[:, None] * np.exp(expo), axis=0)

    def mass(self) -> float:
        return float(self.weights.sum())

    def first_moment(self) -> float:
        return float(np.sum(self.weights * self.shapes) * self.beta)

    def sf(self, z):
        z = np.asarray(z, dtype=float)
        y = np.maximum(z, 0.0)[..., None] / self.beta
        return np.sum(self.weights * special.gammaincc(self.shapes, y), axis=-1)

    def tail(self, z):
        z = np.asarray(z, dtype=float)
        zz = np.maximum(z, 0.0)[..., None]
        y = zz / self.beta
        a = self.shapes
        part = a * self.beta * special.gammaincc(a + 1, y) - zz * special.gammaincc(a, y)
        out = np.sum(self.weights * part, axis=-1)
        # below zero the ramp is affine in z
        return np.where(z < 0, self.first_moment() - z * self.mass(), out)

    def pdf(self, xh):
        xh = np.asarray(xh, dtype=float)
        with np.errstate(divide="ignore"):
            vals = stats.gamma.pdf(xh[..., None], self.shapes, scale=self.beta)
        return np.sum(self.weights * vals, axis=-1)


def _mixture(ctx: TransformContext, x: float) -> _Mixture | None:
    """Leading gamma components of the law of ``X_u`` (``None`` if the last piece has no noise).

    Over the final sigma piece ``[s, u]`` the transform factors as
    ``(1 - beta w)^{-nu} R(c / (1 - beta w) - c)`` with ``R`` the transform of
    ``X_s``; expanding ``R`` in powers of ``1 / (1 - beta w)`` gives nonnegative
    weights summing to one.  They are extracted by a discrete Cauchy integral.
    """
    s2 = ctx.sig2[-1]
    if s2 <= 0 or ctx.degenerate:
        return None
    k, th = ctx.params.kappa, ctx.params.theta
    lam_s = ctx.lam[-2]
    beta = 0.5 * lam_s
    nu = 2.0 * k * th / s2
    c = 2.0 * ctx.decay[-2] / lam_s
    m = np.arange(CAUCHY_POINTS)
    zeta = CAUCHY_RADIUS * np.exp(2j * np.pi * m / CAUCHY_POINTS)
    v = c * (zeta - 1.0)
    s = ctx.splits[-2]
    if s == ctx.t:
        vals = np.exp(v * x)
    else:
        sub = ctx.sub(s)
        varphi, phi = riccati(sub, v)
        vals = np.exp(varphi + x * phi)
    coef = np.fft.fft(vals) / CAUCHY_POINTS
    j = np.arange(N_SUBTRACT)
    a = np.real(coef[:N_SUBTRACT]) * CAUCHY_RADIUS ** (-j.astype(float))
    keep = a > 1e-300
    if not keep.any():
        return None
    return _Mixture(beta=beta, nu=nu, weights=a[keep], shapes=nu + j[keep])


def _qres(ctx: TransformContext, mix: _Mixture | None, w, x: float):
    varphi, phi = riccati(ctx, w)
    q = np.exp(varphi + x * phi)
    if mix is not None:
        q = q - mix.cf(w)
    return q


def _lambda_cutoff(envelope, scale: float, tol: float) -> tuple[float, bool]:
    probes = scale * 2.0 ** np.arange(-4.0, 44.0, 0.5)
    env = envelope(probes)
    above = np.nonzero(~(env < tol))[0]
    if len(above) == 0:
        return float(probes[0]), False
    if above[-1] == len(probes) - 1:
        return float(probes[-1]), True
    return float(probes[above[-1] + 1]), False


def _panels(lam_max: float, omega: float, sd: float, inner: float | None = None) -> np.ndarray:
    """Panel edges on ``[0, lam_max]``; ``inner`` grades the panels geometrically near 0
    when the integrand has a peak of that width there."""
    width = min(30.0 / max(omega, 1e-300), 12.0 / sd, lam_max)
    n = int(min(MAX_PANELS, max(1, np.ceil(lam_max / width))))
    edges = np.linspace(0.0, lam_max, n + 1)
    if inner is not None and inner < edges[1]:
        graded = inner * 2.0 ** np.arange(0, np.log2(edges[1] / inner))
        edges = np.unique(np.concatenate([[0.0], graded, edges[1:]]))
    return edges


@dataclass
class SpectralInfo:
    lam_max: float = 0.0
    n_nodes: int = 0
    truncated: bool = False
    mu: float | None = None


def _imag_axis(ctx: TransformContext, x: float, zs: np.ndarray, info: SpectralInfo | None):
    """Shared imaginary-axis quadrature for a single ``x`` and many ``z``.

    Returns ``(S, Pi, mixture)`` with the residual parts only.
    """
    m = float(mean(ctx, x))
    sd = float(np.sqrt(variance(ctx, x)))
    mix = _mixture(ctx, x)

    def env(lmb):
        return np.abs(_qres(ctx, mix, 1j * lmb, x)) / np.minimum(lmb, 1.0)

    lam_max, trunc = _lambda_cutoff(env, 1.0 / sd, ctx.tol)
    omega = (np.max(np.abs(zs)) if zs.size else 0.0) + m + 3.0 * sd
    nodes, weights = composite_gauss_legendre(_panels(lam_max, omega, sd))
    q = _qres(ctx, mix, 1j * nodes, x)
    if info is not None:
        info.lam_max, info.n_nodes, info.truncated = lam_max, len(nodes), trunc
    return nodes, weights, q, mix, lam_max, m


def tail_functions(ctx: TransformContext, z, x: float, info: SpectralInfo | None = None):
    """``(P(X_u >= z), E[(X_u - z)^+])`` for scalar ``x`` and array ``z``.

    Tail probabilities use the Gil-Pelaez formula and tail expectations the
    identity ``(X - z)^+ = ((X - z) + |X - z|) / 2`` with
    ``E|X - z| = (2/pi) int_0^inf (1 - Re[q(i l) e^{-i l z}]) / l^2 dl``, so a
    single transform evaluation serves all ``z``.
    """
    z = np.asarray(z, dtype=float)
    zs = np.atleast_1d(z)
    if ctx.degenerate:
        m = mean(ctx, x)
        return _shape((m >= zs).astype(float), z), _shape(np.maximum(m - zs, 0.0), z)
    if ctx.use_ncx2:
        return ncx2_sf(ctx.params, ctx.t, ctx.u, z, x), ncx2_tail_expectation(ctx.params, ctx.t, ctx.u, z, x)
    nodes, weights, q, mix, lam_max, m = _imag_axis(ctx, x, zs, info)
    m_res = 1.0 - (mix.mass() if mix else 0.0)
    mean_res = m - (mix.first_moment() if mix else 0.0)
    sf_sum, abs_sum = np.empty(zs.size), np.empty(zs.size)
    for sl in _chunks(len(nodes), zs.size):
        qe = q[:, None] * np.exp(-1j * np.outer(nodes, zs[sl]))
        sf_sum[sl] = (weights / nodes) @ qe.imag
        abs_sum[sl] = (weights / nodes**2) @ (m_res - qe.real)
    sf = 0.5 * m_res + sf_sum / np.pi
    absdev = abs_sum + m_res / lam_max
    tail = 0.5 * (mean_res - m_res * zs) + absdev / np.pi
    if mix is not None:
        sf = sf + mix.sf(zs)
        tail = tail + mix.tail(zs)
    sf = np.where(zs <= 0, 1.0, np.clip(sf, 0.0, 1.0))
    tail = np.where(zs <= 0, m - zs, np.maximum(tail, 0.0))
    return _shape(sf, z), _shape(tail, z)


def _chunks(n_nodes: int, n_points: int):
    """Slices over evaluation points keeping each phase matrix below ``CHUNK_ENTRIES``."""
    step = max(1, CHUNK_ENTRIES // max(n_nodes, 1))
    return [slice(i, i + step) for i in range(0, n_points, step)]


def _shape(a, like):
    return float(a[0]) if np.ndim(like) == 0 else a.reshape(np.shape(like))


def _broadcast_x(fn, ctx, z, x, **kw):
    """Apply a single-``x`` routine over an array of ``x`` values."""
    if np.ndim(x) == 0:
        return fn(ctx, z, float(x), **kw)
    x = np.asarray(x, dtype=float)
    z = np.broadcast_to(np.asarray(z, dtype=float), x.shape)
    outs = [fn(ctx, float(zi), float(xi), **kw) for zi, xi in zip(z.ravel(), x.ravel())]
    if isinstance(outs[0], tuple):
        return tuple(np.array(o).reshape(x.shape) for o in zip(*outs))
    return np.array(outs).reshape(x.shape)


def tail_prob(ctx: TransformContext, z, x):
    """``P_{t,x}(X_u >= z)``."""
    if np.any(np.asarray(z) < 0):
        raise DomainError("tail level must be nonnegative")
    if np.ndim(x) == 0:
        return tail_functions(ctx, z, float(x))[0]
    return _broadcast_x(lambda c, zz, xx: tail_functions(c, zz, xx)[0], ctx, z, x)


def _saddle_mu(ctx: TransformContext, z: float, x: float) -> float:
    """Contour abscissa minimizing ``q(mu) e^{-mu z} / mu^2`` on the side of ``mu`` matching ``z``."""
    m = float(mean(ctx, x))

    def g(mu):
        return _log_mgf_derivative(ctx, mu, x) - z - 2.0 / mu

    if z >= m:
        hi = ctx.w_max * (1.0 - 1e-12)
        lo = hi * 1e-12
        while g(lo) > 0:
            lo *= 1e-3
        return brentq(g, lo, hi, xtol=1e-12 * hi, rtol=1e-10)
    sd = float(np.sqrt(variance(ctx, x)))
    lo = -1.0 / sd
    while g(lo) > 0:
        lo *= 2.0
    hi = lo
    while g(hi) <= 0:
        hi *= 0.5
    return brentq(g, lo, hi, rtol=1e-10)


def _contour_tail(ctx: TransformContext, z: float, x: float, mu: float | None,
                  info: SpectralInfo | None = None) -> float:
    if z <= 0:
        return float(mean(ctx, x)) - z
    if ctx.degenerate:
        return max(float(mean(ctx, x)) - z, 0.0)
    put = False
    if mu is None:
        mu = _saddle_mu(ctx, z, x)
        put = mu < 0
    elif not 0 < mu < ctx.w_max:
        raise TransformExplosionError(f"contour abscissa {mu!r} outside (0, {ctx.w_max!r})")
    m = float(mean(ctx, x))
    sd = float(np.sqrt(variance(ctx, x)))
    mix = _mixture(ctx, x)

    def integrand(lmb):
        w = mu + 1j * lmb
        varphi, phi = riccati(ctx, w)
        val = np.exp(varphi + x * phi - w * z)
        if mix is not None:
            val = val - mix.cf(w, z)
        return val / w**2

    lam_max, trunc = _lambda_cutoff(lambda l: np.abs(integrand(l)), 1.0 / sd, ctx.tol)
    nodes, weights = composite_gauss_legendre(_panels(lam_max, abs(z - m) + 3 * sd, sd, min(abs(mu), ctx.w_max - mu)))
    with np.errstate(over="ignore", invalid="ignore"):
        res = float(weights @ integrand(nodes).real) / np.pi
    if not np.isfinite(res):
        raise TransformExplosionError(f"contour abscissa {mu!r} too close to the pole at {ctx.w_max!r}")
    if info is not None:
        info.lam_max, info.n_nodes, info.truncated, info.mu = lam_max, len(nodes), trunc, mu
    if put:
        m_res = 1.0 - (mix.mass() if mix else 0.0)
        res += (m - (mix.first_moment() if mix else 0.0)) - m_res * z
    if mix is not None:
        res += float(mix.tail(z))
    return max(res, 0.0)


def tail_expectation(ctx: TransformContext, z, x, mu: float | None = None):
    """``E_{t,x}[(X_u - z)^+]`` by the shifted-contour Laplace inversion.

    ``mu`` is the contour abscissa (``0 < mu < w_max``); by default a
    saddle-point abscissa is used, switching to the put form when
    ``z`` lies below the mean.  Abscissae close to ``w_max`` are valid but
    lose accuracy, since the integrand then grows like ``exp(x phi(mu))``.
    """
    if np.any(np.asarray(z) < 0):
        raise DomainError("tail level must be nonnegative")
    if mu is not None and not 0 < mu < ctx.w_max:
        raise TransformExplosionError(f"contour abscissa {mu!r} outside (0, {ctx.w_max!r})")
    if ctx.use_ncx2 and mu is None:
        return ncx2_tail_expectation(ctx.params, ctx.t, ctx.u, z, x)
    if np.ndim(z) == 0 and np.ndim(x) == 0:
        return _contour_tail(ctx, float(z), float(x), mu)
    return _broadcast_x(lambda c, zz, xx: _contour_tail(c, zz, xx, mu), ctx,
                        z, np.broadcast_to(x, np.broadcast(np.asarray(z), np.asarray(x)).shape))


def pdf(ctx: TransformContext, xhat, x: float, info: SpectralInfo | None = None):
    """Transition density of ``X_u`` at ``xhat`` given ``X_t = x``."""
    if ctx.degenerate:
        raise DegenerateDistributionError("transition law is a point mass")
    xhat = np.asarray(xhat, dtype=float)
    if ctx.use_ncx2:
        return ncx2_pdf(ctx.params, ctx.t, ctx.u, xhat, x)
    xs = np.atleast_1d(xhat)
    nodes, weights, q, mix, _, _ = _imag_axis(ctx, float(x), xs, info)
    dens = np.empty(xs.size)
    for sl in _chunks(len(nodes), xs.size):
        dens[sl] = (weights @ (q[:, None] * np.exp(-1j * np.outer(nodes, xs[sl]))).real) / np.pi
    if mix is not None:
        dens = dens + mix.pdf(xs)
    dens = np.where(xs < 0, 0.0, dens)
    return _shape(dens, xhat)


@dataclass(frozen=True)
class DensityGrid:
    abscissae: np.ndarray
    values: np.ndarray
    t: float
    u: float
    x: float
    mass: float
    clamped: int
    min_raw: float


def density_grid(ctx: TransformContext, x: float, x_max: float, n: int) -> DensityGrid:
    """Density on ``n + 1`` uniform points of ``[0, x_max]`` with small negatives clamped.

    ``mass`` is the trapezoid integral over ``[h, x_max]`` plus the exact
    probability of ``[0, h]``, since the density may be unbounded at 0.
    """
    grid = np.linspace(0.0, x_max, n + 1)
    raw = np.atleast_1d(pdf(ctx, grid, x))
    finite = np.where(np.isfinite(raw), raw, 0.0)
    neg = finite < 0
    vals = np.where(neg, 0.0, raw)
    first = 1.0 - float(tail_functions(ctx, grid[1], x)[0])
    mass = first + float(integrate.trapezoid(vals[1:], grid[1:]))
    return DensityGrid(grid, vals, ctx.t, ctx.u, x, mass, int(neg.sum()), float(finite.min()))


# --- closed forms for constant sigma -------------------------------------------


def _ncx2_args(params: ModelParams, t: float, u: float, x):
    if not params.sigma.is_constant_on(t, u):
        raise UnsupportedConfigurationError("sigma varies on [t, u]; closed form unavailable")
    if u <= t:
        raise DegenerateDistributionError("transition law is a point mass")
    s = params.sigma(t)
    if s <= 0:
        raise DegenerateDistributionError("zero volatility: transition law is a point mass")
    k, th = params.kappa, params.theta
    e = np.exp(-k * (u - t))
    scale = s * s * (1.0 - e) / (4.0 * k)
    df = 4.0 * k * th / (s * s)
    nc = np.asarray(x, dtype=float) * e / scale
    return scale, df, nc


def tails_over_horizons(params: ModelParams, t: float, us, x, zs, method: str = "auto",
                        tol: float = 1e-12):
    """``(S, Pi)`` for horizons ``us`` with levels ``zs``, broadcast against ``x``.

    With constant sigma on ``[t, max us]`` everything is one vectorized closed
    form; otherwise one transform context is built per horizon.
    """
    us = np.asarray(us, dtype=float)
    x = np.asarray(x, dtype=float)
    zs = np.broadcast_to(np.asarray(zs, dtype=float), us.shape)
    if us.size == 0:
        empty = np.zeros(np.broadcast(x[..., None], us).shape)
        return empty, empty
    u_max = float(us.max())
    if (method != "fourier" and params.sigma.is_constant_on(t, u_max)
            and params.sigma(t) > 0 and np.all(us > t)):
        sig = params.sigma(t)
        k, th = params.kappa, params.theta
        e = np.exp(-k * (us - t))
        scale = sig * sig * (1.0 - e) / (4.0 * k)
        df = 4.0 * k * th / (sig * sig)
        nc = x[..., None] * e / scale
        y = np.maximum(zs, 0) / scale
        sf = stats.ncx2.sf(y, df, nc)
        first = scale * (df * stats.ncx2.sf(y, df + 2, nc) + nc * stats.ncx2.sf(y, df + 4, nc))
        m = th + e * (x[..., None] - th)
        tail = np.where(zs <= 0, m - zs, np.maximum(first - zs * sf, 0.0))
        sf = np.where(zs <= 0, 1.0, sf)
        return sf, tail
    xs = np.atleast_1d(x)
    S = np.empty((xs.size, us.size))
    P = np.empty_like(S)
    for j, (u, z) in enumerate(zip(us, zs)):
        ctx = TransformContext(params, t, float(u), method="fourier" if method == "fourier" else "auto", tol=tol)
        for i, xi in enumerate(xs):
            S[i, j], P[i, j] = tail_functions(ctx, float(z), float(xi))
    shape = np.broadcast(x[..., None], us).shape
    return S.reshape(shape), P.reshape(shape)


def ncx2_pdf(params: ModelParams, t: float, u: float, xhat, x):
    scale, df, nc = _ncx2_args(params, t, u, x)
    xhat = np.asarray(xhat, dtype=float)
    with np.errstate(divide="ignore"):
        out = np.where(xhat < 0, 0.0, stats.ncx2.pdf(np.maximum(xhat, 0) / scale, df, nc) / scale)
    return float(out) if out.ndim == 0 else out


def ncx2_sf(params: ModelParams, t: float, u: float, z, x):
    scale, df, nc = _ncx2_args(params, t, u, x)
    z = np.asarray(z, dtype=float)
    out = np.where(z <= 0, 1.0, stats.ncx2.sf(np.maximum(z, 0) / scale, df, nc))
    return float(out) if out.ndim == 0 else out


def ncx2_tail_expectation(params: ModelParams, t: float, u: float, z, x):
    """``E[(X_u - z)^+]`` from ``E[Y 1{Y > y}] = k Q_{k+2}(y) + nc Q_{k+4}(y)``."""
    scale, df, nc = _ncx2_args(params, t, u, x)
    z = np.asarray(z, dtype=float)
    y = np.maximum(z, 0) / scale
    first = scale * (df * stats.ncx2.sf(y, df + 2, nc) + nc * stats.ncx2.sf(y, df + 4, nc))
    m = conditional_mean(params, t, u, x)
    out = np.where(z <= 0, m - z, np.maximum(first - z * stats.ncx2.sf(y, df, nc), 0.0))
    return float(out) if out.ndim == 0 else out


def ncx2_char_fn(params: ModelParams, t: float, u: float, w, x):
    scale, df, nc = _ncx2_args(params, t, u, x)
    w = np.asarray(w, dtype=complex)
    return np.exp(-0.5 * df * np.log(1 - 2 * scale * w) + nc * scale * w / (1 - 2 * scale * w))


# --- simulation ------------------------------------------------------------------

PATH_BLOCK = 16384


def _euler_block(params: ModelParams, times: np.ndarray, x0: np.ndarray, rng, record: np.ndarray):
    k, th = params.kappa, params.theta
    sig = np.asarray(params.sigma(times[:-1]))
    dts = np.diff(times)
    x = x0.copy()
    out = np.empty((len(record), x.size))
    ri = 0
    if record[0] == 0:
        out[0] = x
        ri = 1
    for i, dt in enumerate(dts):
        xp = np.maximum(x, 0.0)
        x = x + k * (th - xp) * dt + sig[i] * np.sqrt(xp * dt) * rng.standard_normal(x.size)
        if ri < len(record) and record[ri] == i + 1:
            out[ri] = np.maximum(x, 0.0)
            ri += 1
    return out


def simulate_on_grid(params: ModelParams, times, n_paths: int, seed: int,
                     x: float | None = None, record=None) -> np.ndarray:
    """Full-truncation Euler paths on ``times``; returns values at ``record`` indices.

    Paths are generated in fixed blocks, each with its own child seed, so the
    ensemble depends only on ``seed`` and ``n_paths``.
    """
    times = np.asarray(times, dtype=float)
    record = np.arange(len(times)) if record is None else np.asarray(record)
    x = params.x0 if x is None else x
    root = np.random.SeedSequence(seed)
    n_blocks = -(-n_paths // PATH_BLOCK)
    children = root.spawn(n_blocks)
    blocks = []
    for b, child in enumerate(children):
        size = min(PATH_BLOCK, n_paths - b * PATH_BLOCK)
        rng = np.random.Generator(np.random.Philox(child))
        blocks.append(_euler_block(params, times, np.full(size, float(x)), rng, record))
    return np.concatenate(blocks, axis=1).T


def simulate_paths(params: ModelParams, t: float, horizon: float, n_paths: int, n_steps: int,
                   seed: int, x: float | None = None):
    """``(times, paths)`` with ``paths[i, j]`` the ``i``-th path at ``times[j]``."""
    if n_paths < 1 or n_steps < 1:
        raise DomainError("need at least one path and one step")
    if horizon < t:
        raise DomainError("horizon precedes start time")
    times = np.linspace(t, horizon, n_steps + 1)
    return times, simulate_on_grid(params, times, n_paths, seed, x)
