import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from lrswaption.density import (TransformContext, char_fn, composite_gauss_legendre, density_grid, mean,
                                ncx2_char_fn, ncx2_pdf, ncx2_sf, ncx2_tail_expectation, pdf, riccati, riccati_quadrature,
                                simulate_paths, tail_expectation, tail_functions, tail_prob,
                                tails_over_horizons, variance)
from lrswaption.errors import (DegenerateDistributionError, DomainError, TransformExplosionError,
                               UnsupportedConfigurationError)
from lrswaption.model import PiecewiseConstant, conditional_mean, reference_params

TWO_PIECE = PiecewiseConstant((0.0, 0.6), (0.4, 0.7))


def cir_variance(p, tau, x):
    s2, k, th, e = p.sigma(0.0) ** 2, p.kappa, p.theta, np.exp(-p.kappa * tau)
    return x * s2 * e * (1 - e) / k + th * s2 * (1 - e) ** 2 / (2 * k)


def composed_char_fn(p, t, s, u, w, x):
    # condition on X_s: E[e^{w X_u}] = E[exp(A + B X_s)] with (A, B) from the constant piece [s, u]
    ctx = TransformContext(p, s, u, method="fourier")
    A, B = riccati(ctx, w)
    return np.exp(A) * ncx2_char_fn(p, t, s, B, x)


class TestTransform:
    @given(st.floats(-5, 0.2), st.floats(-30, 30), st.floats(0.05, 3.0))
    @settings(max_examples=50)
    def test_closed_form_matches_quadrature(self, re, im, x):
        p = reference_params().replace(sigma=TWO_PIECE)
        ctx = TransformContext(p, 0.2, 1.7)
        w = complex(re, im)
        a, b = riccati(ctx, w)
        aq, bq = riccati_quadrature(ctx, w)
        assert a == pytest.approx(aq, rel=1e-8, abs=1e-10)
        assert b == pytest.approx(bq, rel=1e-8, abs=1e-10)

    @given(st.floats(-30, 30), st.floats(0.01, 10))
    def test_char_fn_constant_sigma(self, im, x):
        p = reference_params()
        ctx = TransformContext(p, 0.0, 1.3)
        w = np.array([1j * im, -0.5 + 1j * im])
        assert np.allclose(char_fn(ctx, w, x), ncx2_char_fn(p, 0.0, 1.3, w, x), rtol=1e-12, atol=1e-14)

    @given(st.floats(-20, 20), st.floats(0.05, 5))
    def test_char_fn_piecewise_by_composition(self, im, x):
        p = reference_params().replace(sigma=TWO_PIECE)
        ctx = TransformContext(p, 0.1, 1.4)
        w = 0.1 + 1j * im
        assert char_fn(ctx, w, x) == pytest.approx(composed_char_fn(p, 0.1, 0.6, 1.4, w, x), rel=1e-11)

    def test_moments(self):
        p = reference_params()
        ctx = TransformContext(p, 0.5, 2.0)
        assert mean(ctx, 0.9) == pytest.approx(conditional_mean(p, 0.5, 2.0, 0.9), rel=1e-14)
        assert variance(ctx, 0.9) == pytest.approx(cir_variance(p, 1.5, 0.9), rel=1e-12)

    def test_explosion(self):
        ctx = TransformContext(reference_params(), 0.0, 1.0)
        with pytest.raises(TransformExplosionError):
            riccati(ctx, ctx.w_max + 0.1)

    def test_bad_method_and_interval(self):
        p = reference_params().replace(sigma=TWO_PIECE)
        with pytest.raises(UnsupportedConfigurationError):
            TransformContext(p, 0.0, 1.0, method="ncx2")
        with pytest.raises(DomainError):
            TransformContext(p, 1.0, 0.5)


PROBES = [(0.762, 0.3), (0.762, 1.0), (0.762, 2.5), (0.1, 0.05), (0.1, 0.8), (3.0, 2.0), (3.0, 5.0)]


class TestFourierAgainstNcx2:
    @pytest.mark.parametrize("x,z", PROBES)
    def test_pointwise(self, x, z):
        p = reference_params()
        ctx = TransformContext(p, 0.0, 1.0, method="fourier")
        assert pdf(ctx, z, x) == pytest.approx(ncx2_pdf(p, 0.0, 1.0, z, x), abs=1e-9)
        assert tail_prob(ctx, z, x) == pytest.approx(ncx2_sf(p, 0.0, 1.0, z, x), abs=1e-9)
        assert tail_expectation(ctx, z, x) == pytest.approx(ncx2_tail_expectation(p, 0.0, 1.0, z, x), abs=1e-9)
        _, Pi = tail_functions(ctx, z, x)
        assert Pi == pytest.approx(ncx2_tail_expectation(p, 0.0, 1.0, z, x), abs=1e-9)

    @given(st.floats(0.02, 0.9), st.floats(0.05, 3.0), st.floats(0.0, 6.0))
    @settings(max_examples=25, deadline=None)
    def test_random_volatility(self, sigma, x, z):
        p = reference_params(sigma)
        ctx = TransformContext(p, 0.0, 0.8, method="fourier")
        S, Pi = tail_functions(ctx, z, x)
        assert S == pytest.approx(ncx2_sf(p, 0.0, 0.8, z, x), abs=1e-8)
        assert Pi == pytest.approx(ncx2_tail_expectation(p, 0.0, 0.8, z, x), abs=1e-8)

    def test_contour_abscissa_is_free(self):
        p = reference_params()
        ctx = TransformContext(p, 0.0, 1.0, method="fourier")
        ref = ncx2_tail_expectation(p, 0.0, 1.0, 1.2, 0.762)
        for mu in (0.05, 0.3, 0.8):
            assert tail_expectation(ctx, 1.2, 0.762, mu=mu) == pytest.approx(ref, abs=1e-9)
        with pytest.raises(TransformExplosionError):
            tail_expectation(ctx, 1.2, 0.762, mu=ctx.w_max)

    def test_pdf_mass_and_mean(self):
        p = reference_params()
        ctx = TransformContext(p, 0.0, 1.0, method="fourier")
        # y = s^4 removes the integrable singularity at 0
        s, w = composite_gauss_legendre(np.linspace(0.0, 40.0 ** 0.25, 41), 16)
        f = pdf(ctx, s**4, 0.762) * 4 * s**3
        assert w @ f == pytest.approx(1.0, abs=1e-8)
        assert w @ (f * s**4) == pytest.approx(conditional_mean(p, 0.0, 1.0, 0.762), rel=1e-8)

    def test_density_grid(self):
        ctx = TransformContext(reference_params(), 0.0, 1.0, method="fourier")
        grid = density_grid(ctx, 0.762, 25.0, 4000)
        assert grid.mass == pytest.approx(1.0, abs=1e-4)
        assert grid.min_raw > -1e-10 and np.all(grid.values[1:] >= 0)


class TestPiecewiseSigma:
    def test_tail_prob_by_conditioning(self):
        p = reference_params().replace(sigma=TWO_PIECE)
        t, s, u, x, z = 0.0, 0.6, 1.5, 0.762, 1.1
        ctx = TransformContext(p, t, u)
        # Chapman-Kolmogorov through the knot, both pieces in closed form
        f = lambda y: ncx2_pdf(p, t, s, y, x) * ncx2_sf(p, s, u, z, y)
        ref = integrate.quad(f, 0, 40, points=[0.5, 1, 2], limit=400, epsabs=1e-13)[0]
        assert tail_prob(ctx, z, x) == pytest.approx(ref, abs=1e-9)
        g = lambda y: ncx2_pdf(p, t, s, y, x) * ncx2_tail_expectation(p, s, u, z, y)
        ref = integrate.quad(g, 0, 40, points=[0.5, 1, 2], limit=400, epsabs=1e-13)[0]
        assert tail_expectation(ctx, z, x) == pytest.approx(ref, abs=1e-9)
        assert tail_functions(ctx, z, x)[1] == pytest.approx(ref, abs=1e-9)

    def test_horizon_batch_matches_single(self):
        p = reference_params().replace(sigma=TWO_PIECE)
        us = np.array([0.4, 0.9, 1.6])
        S, P = tails_over_horizons(p, 0.1, us, 0.8, np.array([0.5, 1.0, 1.5]))
        for j, (u, z) in enumerate(zip(us, [0.5, 1.0, 1.5])):
            s1, p1 = tail_functions(TransformContext(p, 0.1, u), z, 0.8)
            assert S[j] == pytest.approx(s1, abs=1e-14) and P[j] == pytest.approx(p1, abs=1e-14)


class TestEdgeCases:
    def test_zero_horizon_is_point_mass(self):
        ctx = TransformContext(reference_params(), 1.0, 1.0)
        assert ctx.degenerate
        assert tail_prob(ctx, 0.5, 0.8) == 1.0 and tail_prob(ctx, 0.9, 0.8) == 0.0
        with pytest.raises(DegenerateDistributionError):
            pdf(ctx, 0.5, 0.8)

    def test_negative_level(self):
        with pytest.raises(DomainError):
            tail_prob(TransformContext(reference_params(), 0.0, 1.0), -0.1, 0.8)

    def test_zero_level(self):
        p = reference_params()
        ctx = TransformContext(p, 0.0, 1.0, method="fourier")
        S, Pi = tail_functions(ctx, 0.0, 0.762)
        assert S == 1.0 and Pi == pytest.approx(conditional_mean(p, 0.0, 1.0, 0.762))


class TestSimulation:
    def test_moments(self):
        p = reference_params()
        _, paths = simulate_paths(p, 0.0, 1.0, 40_000, 200, seed=11)
        end = paths[:, -1]
        se = end.std() / np.sqrt(end.size)
        assert abs(end.mean() - conditional_mean(p, 0.0, 1.0, p.x0)) < 4 * se
        assert end.var() == pytest.approx(cir_variance(p, 1.0, p.x0), rel=0.05)
        assert np.all(paths >= 0)

    def test_reproducible(self):
        p = reference_params()
        a = simulate_paths(p, 0.0, 1.0, 100, 10, seed=3)[1]
        b = simulate_paths(p, 0.0, 1.0, 100, 10, seed=3)[1]
        c = simulate_paths(p, 0.0, 1.0, 100, 10, seed=4)[1]
        assert np.array_equal(a, b) and not np.array_equal(a, c)
