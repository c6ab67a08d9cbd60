import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from ridgesketch.core_types import ModelParams, SpectrumParams
from ridgesketch.mp_theory import (bias_variance_curve, minimize_lambda, mp_cdf, mp_density, mp_stieltjes,
                                   mp_support, optimal_lambda_ridge, resolvent_moment_quad,
                                   ridge_optimal_mse, ridge_risk_theory, spectrum_theta, theta,
                                   theta1_z2_route, theta2_printed, theta_bar)

GOLDEN = (np.sqrt(5) - 1) / 2


def golden_section(f, a, b, tol=1e-10):
    """Plain golden-section search, the independent 1-D oracle."""
    r = (np.sqrt(5) - 1) / 2
    c, d = b - r * (b - a), a + r * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - r * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + r * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def companion_moment(zeta, lam, power):
    """Oracle: (1 - zeta)/lam^i + zeta int (x + lam)^{-i} dF_zeta by quadrature of the textbook density."""
    lo, hi = (1 - np.sqrt(zeta)) ** 2, (1 + np.sqrt(zeta)) ** 2
    dens = lambda x: np.sqrt((hi - x) * (x - lo)) / (2 * np.pi * zeta * x)
    cont, _ = integrate.quad(lambda x: dens(x) * (x + lam) ** -power, lo, hi, limit=400, epsabs=1e-13)
    atom = max(0.0, 1 - 1 / zeta)
    return (1 - zeta) / lam ** power + zeta * (cont + atom / lam ** power)


def test_stieltjes_golden_ratio():
    assert mp_stieltjes(1.0, -1.0).real == pytest.approx(GOLDEN, abs=1e-14)
    assert abs(mp_stieltjes(1.0, -1.0).imag) == 0


def test_stieltjes_against_eigenvalues():
    n = 2000
    X = np.random.default_rng(0).standard_normal((n, n))
    ev = np.linalg.eigvalsh(X.T @ X / n)
    assert np.mean(1 / (ev + 1)) == pytest.approx(GOLDEN, abs=5e-3)


def test_stieltjes_small_gamma():
    lam = 0.7
    assert mp_stieltjes(1e-6, -lam).real == pytest.approx(1 / (1 + lam), rel=1e-5)


@pytest.mark.parametrize("gamma", [0.3, 1.0, 2.5])
def test_stieltjes_positive_imag_in_bulk(gamma):
    lo, hi = mp_support(gamma)
    xs = np.linspace(lo, hi, 50)[1:-1]
    m = mp_stieltjes(gamma, xs + 1e-9j)
    assert np.all(m.imag >= 0)
    # inverse-Stieltjes recovers the density
    assert np.allclose(m.imag / np.pi, mp_density(xs, gamma), atol=1e-6)


def test_stieltjes_rejects_support():
    with pytest.raises(ValueError):
        mp_stieltjes(0.5, 1.0)
    with pytest.raises(ValueError):
        mp_stieltjes(2.0, 0.0)


@pytest.mark.parametrize("gamma", [0.2, 1.0, 5.0])
@pytest.mark.parametrize("lam", [0.1, 1.0, 10.0])
def test_theta2_is_minus_derivative(gamma, lam):
    h = 1e-6
    fd = -(theta(gamma, lam + h).theta1 - theta(gamma, lam - h).theta1) / (2 * h)
    assert theta(gamma, lam).theta2 == pytest.approx(fd, rel=1e-5)


@pytest.mark.parametrize("gamma", [0.2, 1.0, 5.0])
@pytest.mark.parametrize("lam", [0.01, 1.0, 10.0])
def test_theta_against_quadrature(gamma, lam):
    th = theta(gamma, lam)
    assert th.theta1 == pytest.approx(resolvent_moment_quad(gamma, lam, 1), rel=1e-7)
    assert th.theta2 == pytest.approx(resolvent_moment_quad(gamma, lam, 2), rel=1e-7)
    assert th.theta1 == pytest.approx(mp_stieltjes(gamma, -lam).real, rel=1e-12)


def test_theta_bounds_and_tail():
    for g in (0.1, 1, 3):
        for lam in (1e-3, 1, 100):
            th = theta(g, lam)
            assert 0 < th.theta1 <= 1 / lam and 0 < th.theta2 <= 1 / lam ** 2
    th = theta(0.5, 1e6)
    assert th.theta1 * 1e6 == pytest.approx(1, abs=1e-4)
    assert th.theta2 * 1e12 == pytest.approx(1, abs=1e-4)


def test_theta_routes():
    for g, lam in [(0.5, 0.3), (2.0, 1.5), (1.0, 1.0)]:
        assert theta1_z2_route(g, lam) == pytest.approx(theta(g, lam).theta1, rel=1e-10)
        assert theta2_printed(g, lam) == pytest.approx(theta(g, lam).theta2, rel=1e-8)


def test_printed_theta2_cancels_at_small_lam():
    # the term-by-term form loses all digits at tiny lam; the stable form does not
    lam = 1e-8
    good = theta(0.5, lam).theta2
    assert good == pytest.approx(resolvent_moment_quad(0.5, lam, 2), rel=1e-6)
    assert abs(theta2_printed(0.5, lam) - good) / good > 1e-3


@pytest.mark.parametrize("zeta", [0.3, 0.8, 1.5])
@pytest.mark.parametrize("lam", [0.2, 1.0])
def test_theta_bar_against_companion_law(zeta, lam):
    tb = theta_bar(zeta, lam)
    assert tb.bar1 == pytest.approx(companion_moment(zeta, lam, 1), abs=1e-6)
    assert tb.bar2 == pytest.approx(companion_moment(zeta, lam, 2), abs=1e-6)


def test_theta_bar_against_gram_eigenvalues():
    # XX'/n for an n x d Gaussian X with d/n = zeta
    n, zeta, lam = 1500, 0.6, 0.5
    X = np.random.default_rng(1).standard_normal((n, int(zeta * n)))
    ev = np.linalg.eigvalsh(X @ X.T / n)
    assert theta_bar(zeta, lam).bar1 == pytest.approx(np.mean(1 / (ev + lam)), rel=5e-3)


def test_theta_bar_small_lam_above_one():
    # zeta > 1 has no atom at zero, so both moments stay bounded and smooth as lam -> 0
    lams = np.geomspace(1e-8, 1e-4, 40)
    b2 = np.array([theta_bar(1.5, l).bar2 for l in lams])
    assert np.all(np.diff(b2) < 0)
    # oracle: the two atom terms of the companion law cancel exactly, leaving zeta * continuous part
    lo, hi = (1 - np.sqrt(1.5)) ** 2, (1 + np.sqrt(1.5)) ** 2
    dens = lambda x: np.sqrt((hi - x) * (x - lo)) / (2 * np.pi * 1.5 * x)
    cont, _ = integrate.quad(lambda x: dens(x) * (x + 1e-8) ** -2, lo, hi, limit=400, epsabs=1e-13)
    assert b2[0] == pytest.approx(1.5 * cont, rel=1e-6)


def test_mp_cdf_limits():
    assert mp_cdf(-1, 0.5) == 0
    assert mp_cdf(100, 0.5) == 1
    assert mp_cdf(1e-12, 2.0) == pytest.approx(0.5)


def test_spectrum_theta():
    assert spectrum_theta([1, 3], 1) == pytest.approx(0.5 * (1 / 2 + 1 / 4))


def test_ridge_limits():
    model = ModelParams(4, 1)
    r = ridge_risk_theory(SpectrumParams(0.5, 1e8), model)
    assert r.mse == pytest.approx(4, rel=1e-6)
    assert r.residual == pytest.approx(5, rel=1e-6)
    r = ridge_risk_theory(SpectrumParams(0.5, 1e-8), ModelParams(1, 1))
    assert r.variance == pytest.approx(1.0, rel=1e-6)


def test_ridge_variance_small_lam_eigen_oracle():
    n = 2000
    X = np.random.default_rng(3).standard_normal((n, n // 2))
    ev = np.linalg.eigvalsh(X.T @ X / n)
    # gamma * int 1/x dF = gamma / (1 - gamma) = 1
    assert 0.5 * np.mean(1 / ev) == pytest.approx(1.0, rel=0.02)


def test_optimal_lambda():
    assert optimal_lambda_ridge(0.7, ModelParams(1, 1)) == pytest.approx(0.7)
    assert optimal_lambda_ridge(2, ModelParams(9, 1)) == pytest.approx(2 / 9)
    with pytest.raises(ValueError):
        optimal_lambda_ridge(1, ModelParams(0, 1))


@pytest.mark.parametrize("gamma,a2", [(0.7, 1.0), (2.0, 9.0), (0.2, 4.0)])
def test_optimal_lambda_by_search(gamma, a2):
    model = ModelParams(a2, 1)
    f = lambda lam: ridge_risk_theory(SpectrumParams(gamma, lam), model).mse
    star = gamma / a2
    assert golden_section(f, 1e-3, 10) == pytest.approx(star, abs=1e-4)
    assert minimize_lambda(f, 1e-3, 10)[0] == pytest.approx(star, abs=1e-4)
    assert ridge_optimal_mse(gamma, model) == pytest.approx(f(star))


def test_bias_variance_curve():
    model = ModelParams(9, 1)
    grid = np.geomspace(1e-6, 1e6, 60)
    reps = bias_variance_curve(0.5, model, grid)
    mse = np.array([r.mse for r in reps])
    k = int(np.argmin(mse))
    assert reps[-1].mse == pytest.approx(9, rel=1e-4)
    assert all(r.bias2 + r.variance >= mse.min() for r in reps)
    assert reps[k].bias2 + reps[k].variance == mse.min()
    with pytest.raises(ValueError):
        bias_variance_curve(0.5, model, [1, 0.5])


def test_variance_single_interior_peak_in_gamma():
    model = ModelParams(9, 1)
    gammas = np.geomspace(0.05, 10, 20)
    v = np.array([ridge_risk_theory(SpectrumParams(g, g / 9), model).variance for g in gammas])
    signs = np.sign(np.diff(v))
    k = int(np.argmax(v))
    assert 0 < k < len(v) - 1
    assert np.all(signs[:k] > 0) and np.all(signs[k:] < 0)


@settings(max_examples=40, deadline=None)
@given(gamma=st.floats(0.01, 20), lam=st.floats(1e-4, 1e4))
def test_theta_identities_property(gamma, lam):
    th = theta(gamma, lam)
    assert 0 < th.theta1 <= 1 / lam * (1 + 1e-12)
    assert 0 < th.theta2 <= 1 / lam ** 2 * (1 + 1e-12)
    # Cauchy-Schwarz: theta1^2 <= theta2
    assert th.theta1 ** 2 <= th.theta2 * (1 + 1e-10)
