"""Tests for the correlated-noise spectrum, truncation, and sampling."""

import math

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.special import ive

from ridk.noise import (CounterStream, TWO_PI, VonMisesSpectrum, bessel_ratio,
                        eigenvalue, kernel_eval, mode_basis, sample_increment,
                        truncation_set)


def bessel_series(nu, x, terms=40):
    """Power series I_nu(x) = sum (x/2)^(2m+nu) / (m! (m+nu)!)."""
    total = 0.0
    for m in range(terms):
        total += (0.5 * x) ** (2 * m + nu) / (
            math.factorial(m) * math.factorial(m + nu))
    return total


def lambda_quadrature(j, eps):
    """Eigenvalue from its integral definition, by adaptive quadrature.

    lambda_j = int exp(-sin^2(x/2)/eps^2) cos(jx) dx / int exp(...) dx.
    """
    def f(x):
        return np.exp(-np.sin(0.5 * x) ** 2 / (eps * eps))

    num, _ = quad(f, -np.pi, np.pi, weight='cos', wvar=j, limit=400)
    den, _ = quad(f, -np.pi, np.pi, points=[0.0], limit=400)
    return num / den


class TestBesselRatio:
    def test_zero_order_is_one(self):
        assert bessel_ratio(0, 3.7) == 1.0

    def test_against_power_series(self):
        # handbook value: I_1(1)/I_0(1) = 0.4463900...
        r = bessel_ratio(1, 1.0)
        assert abs(r - 0.4463900) < 1e-6
        assert abs(r - bessel_series(1, 1.0) / bessel_series(0, 1.0)) < 1e-12

    def test_small_arguments_series(self):
        for x in (0.3, 1.0, 2.5):
            for j in (1, 2, 5):
                want = bessel_series(j, x) / bessel_series(0, x)
                assert abs(bessel_ratio(j, x) - want) <= 1e-12 * want + 1e-15

    def test_against_scipy_scaled_bessel(self):
        # ive(j, x) = I_j(x) exp(-x) stays finite, ratios are exact
        for x in (1.0, 10.0, 200.0, 1e4):
            j = np.arange(0, 201)
            got = bessel_ratio(j, x)
            want = ive(j, x) / ive(0, x)
            mask = want > 1e-280
            rel = np.abs(got[mask] - want[mask]) / want[mask]
            assert rel.max() < 1e-10

    def test_monotone_decreasing_in_order(self):
        vals = bessel_ratio(np.arange(0, 80), 200.0)
        assert np.all(np.diff(vals) < 0)
        assert np.all(vals > 0) and np.all(vals <= 1.0)

    def test_invalid_arguments(self):
        with pytest.raises(ValueError):
            bessel_ratio(1, 0.0)
        with pytest.raises(ValueError):
            bessel_ratio(1, -2.0)
        with pytest.raises(ValueError):
            bessel_ratio(1, 2e6)
        with pytest.raises(ValueError):
            bessel_ratio(-1, 2.0)


class TestEigenvalue:
    @pytest.mark.parametrize("eps", [0.05, 0.1])
    def test_matches_integral_definition(self, eps):
        for j in (1, 5, 20, 50):
            want = lambda_quadrature(j, eps)
            assert abs(eigenvalue([j], eps) - want) < 1e-8

    def test_zero_mode_is_unity(self):
        assert eigenvalue([0], 0.05) == 1.0
        assert eigenvalue([0, 0], 0.1) == 1.0

    def test_two_dimensional_product(self):
        eps = 0.1
        l1 = eigenvalue([1], eps)
        l2 = eigenvalue([2], eps)
        assert abs(eigenvalue([1, 2], eps) - l1 * l2) < 1e-14
        assert abs(eigenvalue([-1, 2], eps) - l1 * l2) < 1e-14

    def test_sign_symmetric(self):
        assert eigenvalue([-7], 0.08) == eigenvalue([7], 0.08)

    def test_invalid_eps(self):
        with pytest.raises(ValueError):
            eigenvalue([1], 0.0)


class TestTruncationSet:
    def test_spec_example(self):
        # eps = 0.05, h = 0.1, q_tilde = 1/2: J = ceil(20 ln 10) = 47
        assert truncation_set(0.05, 0.1, 0.5).J == 47

    def test_degenerate_coarse_mesh(self):
        ts = truncation_set(0.05, 1.0, 0.5)
        assert ts.J == 0
        assert ts.indices(1).shape == (1, 1)
        assert ts.indices(2).shape == (1, 2)

    def test_contains_zero_and_symmetric(self):
        ts = truncation_set(0.1, 0.2, 1)
        idx = ts.indices(2)
        assert ts.contains([0, 0])
        assert np.any(np.all(idx == 0, axis=1))
        # negation is a bijection of the set
        as_set = {tuple(row) for row in idx}
        assert {tuple(-row) for row in idx} == as_set
        assert np.all(np.abs(idx).sum(axis=1) <= ts.J)

    def test_mode_counts(self):
        ts = truncation_set(0.1, 0.2, 1)
        J = ts.J
        assert len(ts.indices(1)) == 2 * J + 1
        assert len(ts.indices(2)) == 2 * J * J + 2 * J + 1

    @pytest.mark.parametrize("eps", [0.05, 0.1])
    @pytest.mark.parametrize("h", [0.2, 0.1, 0.05])
    @pytest.mark.parametrize("q_tilde", [0.5, 1])
    def test_tail_bound(self, eps, h, q_tilde):
        # discarded eigenvalue mass obeys sum_{|j|>J} lambda_j <= 2 h^{2q}/eps
        ts = truncation_set(eps, h, q_tilde)
        spec = VonMisesSpectrum(eps, 1)
        jmax = ts.J + int(20 / eps) + 200
        lam = spec.lambda_1d(np.arange(0, jmax + 1))
        assert lam[-1] < 1e-17
        tail = 2.0 * lam[ts.J + 1:].sum()
        assert tail <= 2.0 * h ** (2.0 * q_tilde) / eps

    def test_invalid_arguments(self):
        with pytest.raises(ValueError):
            truncation_set(0.0, 0.1, 0.5)
        with pytest.raises(ValueError):
            truncation_set(0.1, 0.0, 0.5)
        with pytest.raises(ValueError):
            truncation_set(0.1, 0.1, 0.7)


class TestKernel:
    @pytest.mark.parametrize("eps", [0.05, 0.1, 0.3])
    def test_unit_mass(self, eps):
        mass, _ = quad(lambda t: kernel_eval(eps, t), -np.pi, np.pi,
                       points=[0.0], limit=200)
        assert abs(mass - 1.0) < 1e-10

    def test_symmetry_and_periodicity(self):
        x = np.array([0.3, 1.1, 2.9])
        assert np.allclose(kernel_eval(0.1, x), kernel_eval(0.1, -x))
        assert np.allclose(kernel_eval(0.1, x), kernel_eval(0.1, x + TWO_PI))

    def test_underflow_far_from_peak(self):
        # exp(-2/eps^2) underflows at eps = 0.05; must return 0, not raise
        val = kernel_eval(0.05, np.pi)
        assert val == 0.0
        assert kernel_eval(0.05, 0.0) > 0.0

    def test_two_dimensional_is_product(self):
        rng = np.random.default_rng(5)
        pts = rng.uniform(-np.pi, np.pi, size=(20, 2))
        w2 = kernel_eval(0.2, pts, d=2)
        w1a = kernel_eval(0.2, pts[:, 0])
        w1b = kernel_eval(0.2, pts[:, 1])
        assert np.allclose(w2, w1a * w1b, rtol=1e-12)

    def test_invalid_eps(self):
        with pytest.raises(ValueError):
            kernel_eval(-0.1, 0.0)


class TestSobolevWeights:
    def test_weight_cancellation(self):
        # sqrt(alpha_{j,s}) (1+|j|^2)^{-s/2} == sqrt(lambda_j) for any s, so
        # sampled fields are independent of the Sobolev index s
        eps = 0.1
        for s in (0.0, 1.0, 2.5):
            for j in ([3], [0], [2, -5]):
                jarr = np.asarray(j)
                lam = eigenvalue(j, eps)
                alpha = (1.0 + np.sum(jarr ** 2)) ** s * lam
                lhs = np.sqrt(alpha) * (1.0 + np.sum(jarr ** 2)) ** (-0.5 * s)
                assert abs(lhs - np.sqrt(lam)) < 1e-14


class TestModeBasis:
    def test_values(self):
        modes = np.array([[0], [1], [-1], [3]])
        x = np.array([[0.7]])
        E = mode_basis(modes, x)[0]
        isp = 1.0 / np.sqrt(np.pi)
        assert abs(E[0] - 1.0 / np.sqrt(TWO_PI)) < 1e-15
        assert abs(E[1] - np.cos(0.7) * isp) < 1e-15
        assert abs(E[2] - np.sin(-0.7) * isp) < 1e-15
        assert abs(E[3] - np.cos(2.1) * isp) < 1e-15

    def test_orthonormal_on_circle(self):
        # trapezoid rule is exact for trig polynomials below the grid Nyquist
        modes = np.array([[0], [1], [-1], [2], [-2], [5]])
        n = 64
        x = (TWO_PI / n) * np.arange(n)
        E = mode_basis(modes, x[:, None])
        gram = (TWO_PI / n) * E.T @ E
        assert np.allclose(gram, np.eye(len(modes)), atol=1e-13)

    def test_two_dimensional_product(self):
        modes = np.array([[2, -3]])
        pt = np.array([[0.4, 1.3]])
        want = (np.cos(0.8) / np.sqrt(np.pi)) * (np.sin(-3.9) / np.sqrt(np.pi))
        assert abs(mode_basis(modes, pt)[0, 0] - want) < 1e-15


class TestSampling:
    def test_deterministic_given_seed_and_step(self):
        spec = VonMisesSpectrum(0.2, 1)
        ts = truncation_set(0.2, 0.3, 0.5)
        a = sample_increment(spec, ts, 1e-3, CounterStream(42, step=7))
        b = sample_increment(spec, ts, 1e-3, CounterStream(42, step=7))
        assert np.array_equal(a.coeffs, b.coeffs)

    def test_steps_and_seeds_differ(self):
        spec = VonMisesSpectrum(0.2, 1)
        ts = truncation_set(0.2, 0.3, 0.5)
        a = sample_increment(spec, ts, 1e-3, CounterStream(42, step=7))
        b = sample_increment(spec, ts, 1e-3, CounterStream(42, step=8))
        c = sample_increment(spec, ts, 1e-3, CounterStream(43, step=7))
        assert not np.array_equal(a.coeffs, b.coeffs)
        assert not np.array_equal(a.coeffs, c.coeffs)

    def test_stream_advances(self):
        spec = VonMisesSpectrum(0.2, 1)
        ts = truncation_set(0.2, 0.3, 0.5)
        stream = CounterStream(11)
        a = sample_increment(spec, ts, 1e-3, stream)
        b = sample_increment(spec, ts, 1e-3, stream)
        assert stream.step == 2
        assert not np.array_equal(a.coeffs, b.coeffs)

    def test_invalid_dt(self):
        spec = VonMisesSpectrum(0.2, 1)
        ts = truncation_set(0.2, 0.3, 0.5)
        with pytest.raises(ValueError):
            sample_increment(spec, ts, 0.0, CounterStream(1))

    def test_mean_and_variance(self):
        # MC over 10^4 increments: mean within 4 SE, variance within 5%
        eps, dt, nsamp = 0.3, 0.5, 10000
        spec = VonMisesSpectrum(eps, 1)
        ts = truncation_set(eps, 0.3, 0.5)
        modes = ts.indices(1)
        x = np.array([[0.9]])
        E = mode_basis(modes, x)[0]
        lam = spec.eigenvalues(modes)
        var_exact = dt * np.sum(lam * E ** 2)

        vals = np.empty(nsamp)
        stream = CounterStream(2024)
        for k in range(nsamp):
            inc = sample_increment(spec, ts, dt, stream)
            vals[k] = inc.evaluate(x)[0, 0]
        se_mean = np.sqrt(var_exact / nsamp)
        assert abs(vals.mean()) < 4.0 * se_mean
        assert abs(vals.var() - var_exact) < 0.05 * var_exact

    def test_spatial_covariance_and_stationarity(self):
        # cov(dxi(x), dxi(y)) = dt sum_j lambda_j e_j(x) e_j(y), which the
        # spectral sum shows depends on x - y only
        eps, dt, nsamp = 0.3, 1.0, 10000
        spec = VonMisesSpectrum(eps, 1)
        ts = truncation_set(eps, 0.3, 0.5)
        modes = ts.indices(1)
        lam = spec.eigenvalues(modes)
        x, y = 0.7, 2.1
        Ex = mode_basis(modes, np.array([[x]]))[0]
        Ey = mode_basis(modes, np.array([[y]]))[0]
        cov_exact = dt * np.sum(lam * Ex * Ey)

        # stationarity of the exact covariance under a common shift
        for shift in (0.5, 1.9):
            Exs = mode_basis(modes, np.array([[x + shift]]))[0]
            Eys = mode_basis(modes, np.array([[y + shift]]))[0]
            assert abs(dt * np.sum(lam * Exs * Eys) - cov_exact) < 1e-12

        prods = np.empty(nsamp)
        vx = dt * np.sum(lam * Ex ** 2)
        vy = dt * np.sum(lam * Ey ** 2)
        stream = CounterStream(77)
        pts = np.array([[x], [y]])
        for k in range(nsamp):
            inc = sample_increment(spec, ts, dt, stream)
            vals = inc.evaluate(pts)
            prods[k] = vals[0, 0] * vals[1, 0]
        # SE of a product of joint Gaussians: var = vx vy + cov^2
        se = np.sqrt((vx * vy + cov_exact ** 2) / nsamp)
        assert abs(prods.mean() - cov_exact) < 4.0 * se

    def test_components_independent(self):
        eps, dt, nsamp = 0.3, 1.0, 10000
        spec = VonMisesSpectrum(eps, 2)
        ts = truncation_set(eps, 0.4, 0.5)
        pt = np.array([[0.5, 1.2]])
        prods = np.empty(nsamp)
        var0 = var1 = None
        stream = CounterStream(31)
        samples = np.empty((nsamp, 2))
        for k in range(nsamp):
            inc = sample_increment(spec, ts, dt, stream)
            samples[k] = inc.evaluate(pt)[0]
        prods = samples[:, 0] * samples[:, 1]
        var0, var1 = samples[:, 0].var(), samples[:, 1].var()
        se = np.sqrt(var0 * var1 / nsamp)
        assert abs(prods.mean()) < 4.0 * se

    def test_evaluate_matches_manual_sum(self):
        spec = VonMisesSpectrum(0.25, 1)
        ts = truncation_set(0.25, 0.3, 1)
        stream = CounterStream(9)
        inc = sample_increment(spec, ts, 0.01, stream)
        x = np.array([[1.7]])
        E = mode_basis(inc.modes, x)
        want = (E @ inc.coeffs[0])[0]
        assert abs(inc.evaluate(x)[0, 0] - want) < 1e-15
