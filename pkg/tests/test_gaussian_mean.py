import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate, stats

from gibbslab.bounds import cgf_scaled_noncentral_chisq
from gibbslab.core import gibbs_log_density
from gibbslab.gaussian_mean import (
    GaussianMeanProblem,
    chi_square_params,
    gen_error_closed,
    hypothesis_marginal,
    iskl_closed,
    mi_lautum_closed,
    mi_lautum_printed,
    per_sample_mi_closed,
    posterior_params,
)


# --- independent oracles -----------------------------------------------------------


def joint_covariance(p: GaussianMeanProblem) -> np.ndarray:
    """Covariance of (Z_1, ..., Z_n, W) for one coordinate, from the generative model."""
    a = p.sigma1_sq / p.sigma_sq  # W = a * sum(Z) + const + N(0, sigma1_sq)
    n = p.n
    cov = np.zeros((n + 1, n + 1))
    cov[:n, :n] = p.sigmaZ_sq * np.eye(n)
    cov[:n, n] = cov[n, :n] = a * p.sigmaZ_sq
    cov[n, n] = n * a * a * p.sigmaZ_sq + p.sigma1_sq
    return cov


def gaussian_kl(a: np.ndarray, b: np.ndarray) -> float:
    """KL(N(0, a) || N(0, b))."""
    k = a.shape[0]
    _, lda = np.linalg.slogdet(a)
    _, ldb = np.linalg.slogdet(b)
    return 0.5 * (np.trace(np.linalg.solve(b, a)) - k + ldb - lda)


def info_oracle(p: GaussianMeanProblem):
    joint = joint_covariance(p)
    product = joint.copy()
    product[: p.n, p.n] = product[p.n, : p.n] = 0.0
    return p.d * gaussian_kl(joint, product), p.d * gaussian_kl(product, joint)


def per_sample_oracle(p: GaussianMeanProblem) -> float:
    c = joint_covariance(p)[np.ix_([0, p.n], [0, p.n])]
    rho2 = c[0, 1] ** 2 / (c[0, 0] * c[1, 1])
    return -0.5 * p.d * math.log1p(-rho2)


def centered_cgf_oracle(lam, cp):
    """Centered CGF of sigma_ell_sq * X, X ~ noncentral chi-square, by quadrature of the density."""
    s, eta, d = cp.sigma_ell_sq, cp.eta, cp.degrees
    dist = stats.ncx2(d, eta / s) if eta > 0 else stats.chi2(d)
    mgf, _ = integrate.quad(lambda x: math.exp(lam * s * x + dist.logpdf(x)), 0, np.inf, limit=400,
                            epsabs=0, epsrel=1e-12)
    return math.log(mgf) - lam * (d * s + eta)


problems = st.builds(
    GaussianMeanProblem,
    d=st.integers(1, 5),
    n=st.integers(1, 50),
    mu=st.floats(-3, 3),
    mu0=st.floats(-3, 3),
    sigma0_sq=st.floats(0.05, 20),
    sigmaZ_sq=st.floats(0.05, 20),
    sigma_sq=st.floats(0.05, 20),
)


# --- worked values -------------------------------------------------------------------


def test_unit_d2_n10_values():
    p = GaussianMeanProblem.unit(d=2, n=10)
    assert p.alpha == 5.0
    assert p.sigma1_sq == pytest.approx(1 / 11)
    assert gen_error_closed(p) == pytest.approx(4 / 11, rel=1e-15)
    assert iskl_closed(p) == pytest.approx(20 / 11, rel=1e-15)
    assert iskl_closed(p) == pytest.approx(p.alpha * gen_error_closed(p), rel=1e-12)


def test_unit_d1_n1_values():
    p = GaussianMeanProblem.unit(d=1, n=1)
    assert gen_error_closed(p) == pytest.approx(1.0)
    assert p.alpha == 0.5
    assert iskl_closed(p) == pytest.approx(0.5)


def test_posterior_params_match_kernel_quadratic_form(rng):
    p = GaussianMeanProblem(d=3, n=4, mu=[1, 2, 3], mu0=[0.5, -1, 0], sigma0_sq=2.0, sigmaZ_sq=1.5,
                            sigma_sq=0.7)
    s = p.data_model().sample(rng, p.n, 1)[0]
    post = posterior_params(p, s)
    prec, shift = p.gibbs_spec().quadratic_form(s)
    assert post.sigma1_sq == pytest.approx(1 / prec, rel=1e-14)
    assert np.allclose(post.mean, shift / prec, rtol=1e-14)


def test_posterior_mean_by_quadrature():
    p = GaussianMeanProblem(d=1, n=3, mu=0.0, mu0=0.4, sigma0_sq=1.3, sigmaZ_sq=1.0, sigma_sq=0.8)
    s = np.array([[0.2], [1.1], [-0.3]])
    spec = p.gibbs_spec()
    grid = np.linspace(-8, 8, 160_001)
    dens = np.exp(gibbs_log_density(spec, grid[:, None], s))
    mean = integrate.trapezoid(grid * dens, grid)
    var = integrate.trapezoid((grid - mean) ** 2 * dens, grid)
    post = posterior_params(p, s)
    assert mean == pytest.approx(post.mean[0], abs=1e-8)
    assert var == pytest.approx(post.sigma1_sq, abs=1e-8)


def test_posterior_shape_check():
    p = GaussianMeanProblem.unit(d=2, n=3)
    with pytest.raises(ValueError):
        posterior_params(p, np.zeros((3, 3)))


def test_problem_validation():
    with pytest.raises(ValueError):
        GaussianMeanProblem.unit(d=0, n=1)
    with pytest.raises(ValueError):
        GaussianMeanProblem.unit(d=1, n=1, sigma0_sq=0.0)
    with pytest.raises(ValueError):
        GaussianMeanProblem.unit(d=1, n=1, sigmaZ_sq=-1.0)


def test_degenerate_data_variance():
    p = GaussianMeanProblem.unit(d=3, n=5, sigmaZ_sq=0.0, mu=1.0)
    assert gen_error_closed(p) == 0.0
    assert iskl_closed(p) == 0.0
    assert tuple(mi_lautum_closed(p)) == (0.0, 0.0, 0.0)
    assert per_sample_mi_closed(p) == 0.0


# --- oracles ----------------------------------------------------------------------------


@pytest.mark.parametrize("kw", [
    dict(d=1, n=1),
    dict(d=2, n=10),
    dict(d=3, n=7, sigma0_sq=2.5, sigmaZ_sq=0.4, sigma_sq=1.7),
    dict(d=1, n=25, sigma0_sq=0.1, sigmaZ_sq=5.0, sigma_sq=0.3),
])
def test_mutual_and_lautum_match_covariance_oracle(kw):
    p = GaussianMeanProblem.unit(**kw)
    info = mi_lautum_closed(p)
    mutual, lautum = info_oracle(p)
    assert info.mutual == pytest.approx(mutual, rel=1e-10)
    assert info.lautum == pytest.approx(lautum, rel=1e-10)
    assert info.skl == pytest.approx(iskl_closed(p), rel=1e-12)


def test_printed_form_doubles_the_sum():
    p = GaussianMeanProblem.unit(d=2, n=10)
    printed = mi_lautum_printed(p)
    mutual, lautum = info_oracle(p)
    assert printed.skl == pytest.approx(2 * (mutual + lautum), rel=1e-12)
    # the printed split is off from the covariance oracle in both terms
    assert abs(printed.mutual - mutual) > 0.1 and abs(printed.lautum - lautum) > 0.1


def test_gen_error_matches_covariance_oracle():
    # gen = (2/n) * sum_i E[(W - EW).(Z_i - EZ_i)] = 2 d Cov(W, Z_1)
    for kw in [dict(d=2, n=10), dict(d=1, n=3, sigma0_sq=3.0, sigmaZ_sq=0.5, sigma_sq=2.0)]:
        p = GaussianMeanProblem.unit(**kw)
        cov = joint_covariance(p)
        assert gen_error_closed(p) == pytest.approx(2 * p.d * cov[0, p.n], rel=1e-12)


@pytest.mark.parametrize("kw", [
    dict(d=1, n=1),
    dict(d=2, n=2),
    dict(d=2, n=10),
    dict(d=4, n=33, sigma0_sq=0.3, sigmaZ_sq=2.0, sigma_sq=5.0),
])
def test_per_sample_mi_matches_2x2_oracle(kw):
    p = GaussianMeanProblem.unit(**kw)
    assert per_sample_mi_closed(p) == pytest.approx(per_sample_oracle(p), rel=1e-10)


def test_hypothesis_marginal_matches_covariance():
    p = GaussianMeanProblem(d=2, n=4, mu=[1.0, -1.0], mu0=[0.0, 3.0], sigma0_sq=2.0, sigmaZ_sq=0.5,
                            sigma_sq=1.5)
    mean, var = hypothesis_marginal(p)
    assert var == pytest.approx(joint_covariance(p)[-1, -1], rel=1e-14)
    post_at_mean = posterior_params(p, np.broadcast_to(p.mu, (p.n, p.d)))
    assert np.allclose(mean, post_at_mean.mean)


def test_chi_square_params_by_monte_carlo(rng):
    # l = |Z~ - W~|^2 with W~ an exact posterior draw from an independent dataset
    p = GaussianMeanProblem(d=3, n=5, mu=[1.0, 0.0, -1.0], mu0=[0.0, 0.5, 0.0], sigma0_sq=1.5,
                            sigmaZ_sq=0.8, sigma_sq=1.2)
    cp = chi_square_params(p)
    m = 400_000
    s = p.data_model().sample(rng, p.n, m)
    post = posterior_params(p, s)
    w = post.mean + math.sqrt(post.sigma1_sq) * rng.standard_normal((m, p.d))
    z = p.data_model().sample(rng, 1, m)[:, 0]
    ell = np.sum((z - w) ** 2, axis=1)
    mean = cp.degrees * cp.sigma_ell_sq + cp.eta
    var = 2 * cp.degrees * cp.sigma_ell_sq**2 + 4 * cp.sigma_ell_sq * cp.eta
    assert abs(ell.mean() - mean) < 4 * math.sqrt(var / m)
    assert ell.var() == pytest.approx(var, rel=0.02)
    # left-tail CGF at a moderate lambda
    lam = -0.3
    emp = math.log(np.mean(np.exp(lam * (ell - mean))))
    assert emp == pytest.approx(cgf_scaled_noncentral_chisq(lam, cp), abs=5e-3)


@pytest.mark.parametrize("mu0", [0.0, 3.0])
@pytest.mark.parametrize("lam", [-5.0, -0.7, -0.05, 0.1])
def test_cgf_matches_ncx2_quadrature(mu0, lam):
    p = GaussianMeanProblem.unit(d=2, n=4, mu0=mu0, sigma0_sq=0.5)
    cp = chi_square_params(p)
    if mu0:
        assert cp.eta > 0.1
    assert cgf_scaled_noncentral_chisq(lam, cp) == pytest.approx(centered_cgf_oracle(lam, cp),
                                                                 rel=1e-7, abs=1e-10)


def test_eta_uses_squared_prefactor():
    p = GaussianMeanProblem.unit(d=1, n=2, mu0=1.0, sigma0_sq=1.0)
    # prefactor sigma^2 / (n sigma0^2 + sigma^2) = 1/3, squared
    assert chi_square_params(p).eta == pytest.approx(1 / 9)


# --- properties ----------------------------------------------------------------------------


@given(problems)
def test_gibbs_identity_and_ordering(p):
    info = mi_lautum_closed(p)
    iskl = iskl_closed(p)
    assert iskl == pytest.approx(p.alpha * gen_error_closed(p), rel=1e-12)
    assert info.mutual + info.lautum == pytest.approx(iskl, rel=1e-12)
    assert info.mutual >= 0
    assert info.lautum >= info.mutual


@given(problems)
def test_per_sample_mi_bounded_by_total(p):
    # independent samples: sum_i I(W; Z_i) <= I(W; S)
    assert 0 <= p.n * per_sample_mi_closed(p) <= mi_lautum_closed(p).mutual * (1 + 1e-12)


@given(problems, st.floats(-5, 5), st.floats(-5, 5))
def test_information_does_not_depend_on_means(p, a, b):
    q = p.replace(mu=np.full(p.d, a), mu0=np.full(p.d, b))
    assert gen_error_closed(q) == gen_error_closed(p)
    assert mi_lautum_closed(q) == mi_lautum_closed(p)
    assert per_sample_mi_closed(q) == per_sample_mi_closed(p)


@given(problems)
def test_linear_in_dimension(p):
    q = p.replace(d=2 * p.d, mu=np.resize(p.mu, 2 * p.d), mu0=np.resize(p.mu0, 2 * p.d))
    assert gen_error_closed(q) == pytest.approx(2 * gen_error_closed(p), rel=1e-12)
    assert mi_lautum_closed(q).mutual == pytest.approx(2 * mi_lautum_closed(p).mutual, rel=1e-12)


@given(problems)
def test_gen_decreases_in_n(p):
    assert gen_error_closed(p.replace(n=p.n + 1)) < gen_error_closed(p)
