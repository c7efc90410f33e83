import math

import numpy as np
import pytest

from gibbslab import _backend
from gibbslab.core import FinitePrior, GaussianPrior, GibbsSpec, squared_loss, table_loss
from gibbslab.gaussian_mean import GaussianMeanProblem, posterior_params
from gibbslab.samplers import (
    ChainConfig,
    DivergenceError,
    SamplerError,
    exact_gibbs_learner,
    langevin_chain,
    langevin_learner,
    log_accept_ratio,
    mh_gibbs_chain,
    sample_exact_posterior,
)

PY = _backend.load("python")
try:
    CY = _backend.load("cython")
except ImportError:  # extension not built
    CY = None

needs_ext = pytest.mark.skipif(CY is None, reason="compiled kernels not built")


@pytest.fixture
def problem():
    p = GaussianMeanProblem.unit(d=2, n=10, mu=1.0)
    s = p.data_model().sample(np.random.default_rng(5), p.n, 1)[0]
    return p, s


# --- configuration ---------------------------------------------------------------


def test_chain_config_defaults_and_validation():
    cfg = ChainConfig(1000)
    assert cfg.burn_in == 200
    with pytest.raises(ValueError):
        ChainConfig(10, burn_in=10)
    with pytest.raises(ValueError):
        ChainConfig(10, step_size=-1.0)
    with pytest.raises(ValueError):
        ChainConfig(10, proposal_scale=0.0)
    with pytest.raises(ValueError):
        ChainConfig(10, noise_scale=-0.5)


def test_log_accept_ratio_is_energy_difference(problem):
    p, s = problem
    spec = p.gibbs_spec()
    a, b = np.array([0.3, 0.1]), np.array([1.0, 0.9])
    expected = (spec.prior.logpdf(b) - spec.alpha * spec.f(b, s)) - (spec.prior.logpdf(a) - spec.alpha * spec.f(a, s))
    assert log_accept_ratio(spec, s, a, b) == pytest.approx(expected, rel=1e-14)


# --- backend parity ------------------------------------------------------------------


@needs_ext
def test_backend_parity_mh_quadratic():
    rng = np.random.default_rng(1)
    z, log_u = rng.standard_normal((5000, 3)), np.log(rng.random(5000))
    args = (np.array([0.1, -0.2, 0.3]), 7.0, np.array([1.0, 2.0, -1.0]), 0.4, z, log_u)
    a, na = PY.mh_quadratic(*args)
    b, nb = CY.mh_quadratic(*args)
    assert na == nb and np.array_equal(a, b)


@needs_ext
def test_backend_parity_mh_finite():
    rng = np.random.default_rng(2)
    k = 5
    r, log_u = rng.integers(0, k - 1, 4000), np.log(rng.random(4000))
    lt = np.log(rng.dirichlet(np.ones(k)))
    a, na = PY.mh_finite(0, lt, r, log_u)
    b, nb = CY.mh_finite(0, lt, r, log_u)
    assert na == nb and np.array_equal(np.asarray(a), np.asarray(b))


@needs_ext
def test_backend_parity_ula_path():
    rng = np.random.default_rng(3)
    noise = rng.standard_normal((5000, 2))
    args = (np.array([0.5, -0.5]), 11.0, np.array([3.0, 1.0]), 1e-3, noise, 1.0, 1e6)
    a, ba = PY.ula_quadratic_path(*args)
    b, bb = CY.ula_quadratic_path(*args)
    assert ba == bb == -1 and np.array_equal(a, b)


@needs_ext
def test_backend_parity_ula_batch():
    rng = np.random.default_rng(4)
    w = rng.standard_normal((16, 2))
    shift = rng.standard_normal((16, 2))
    noise = rng.standard_normal((300, 16, 2))
    wa, wb = w.copy(), w.copy()
    assert PY.ula_quadratic_batch(wa, 11.0, shift, 1e-3, noise, 1.0, 1e6) == -1
    assert CY.ula_quadratic_batch(wb, 11.0, shift, 1e-3, noise, 1.0, 1e6) == -1
    assert np.array_equal(wa, wb)


@needs_ext
def test_backend_parity_full_chains(problem):
    p, s = problem
    spec = p.gibbs_spec()
    cfg = ChainConfig(3000, step_size=1e-3)
    for run in (mh_gibbs_chain, langevin_chain):
        a = run(spec, s, cfg, np.random.default_rng(9), kernels=PY)
        b = run(spec, s, cfg, np.random.default_rng(9), kernels=CY)
        assert np.array_equal(a.draws, b.draws)


def test_generic_paths_match_kernels(problem):
    # the loop used for arbitrary energies agrees with the quadratic kernel up to rounding
    p, s = problem
    spec = p.gibbs_spec()
    custom = GibbsSpec(spec.alpha, spec.prior, energy=lambda w, x: spec.f(w, x))
    cfg = ChainConfig(2000, step_size=1e-3)
    a = mh_gibbs_chain(spec, s, cfg, np.random.default_rng(11))
    b = mh_gibbs_chain(custom, s, cfg, np.random.default_rng(11))
    assert np.allclose(a.draws, b.draws, atol=1e-9)
    grad = lambda w, x: 2.0 * (w - np.mean(x, axis=0))  # noqa: E731
    c = langevin_chain(spec, s, cfg, np.random.default_rng(12))
    d = langevin_chain(spec, s, cfg, np.random.default_rng(12), grad_energy=grad)
    assert np.allclose(c.draws, d.draws, atol=1e-9)


# --- correctness -------------------------------------------------------------------------


def test_exact_posterior_moments(problem, rng):
    p, s = problem
    post = posterior_params(p, s)
    draws = sample_exact_posterior(p, s, rng, size=200_000)
    assert np.allclose(draws.mean(axis=0), post.mean, atol=4 * math.sqrt(post.sigma1_sq / 2e5))
    assert np.allclose(draws.var(axis=0), post.sigma1_sq, rtol=0.01)


def test_mh_recovers_posterior(problem):
    p, s = problem
    post = posterior_params(p, s)
    cfg = ChainConfig(100_000, proposal_scale=2.4 * math.sqrt(post.sigma1_sq))
    res = mh_gibbs_chain(p.gibbs_spec(), s, cfg, np.random.default_rng(21))
    assert 0.1 < res.acceptance_rate < 0.7
    assert np.allclose(res.diagnostics["mean"], post.mean, atol=0.02)
    assert np.allclose(res.diagnostics["var"], post.sigma1_sq, rtol=0.06)


def test_mh_finite_recovers_gibbs_pmf():
    table = np.array([[0.0, 1.0], [1.0, 0.0], [0.3, 0.3]])
    spec = GibbsSpec(2.0, FinitePrior([0.2, 0.3, 0.5]), loss=table_loss(table))
    s = np.array([0, 0, 1])
    logp = spec.log_unnormalized(np.arange(3), s)
    target = np.exp(logp - logp.max())
    target /= target.sum()
    res = mh_gibbs_chain(spec, s, ChainConfig(200_000), np.random.default_rng(22))
    freq = np.bincount(res.draws, minlength=3) / res.draws.size
    assert np.allclose(freq, target, atol=0.01)


def test_langevin_stationary_variance_matches_ula_recursion(problem):
    # for a Gaussian target with precision P the ULA stationary variance is 1 / (P (1 - gamma P / 2))
    p, s = problem
    prec = 1 / p.sigma1_sq
    gamma = 0.02
    res = langevin_chain(p.gibbs_spec(), s, ChainConfig(200_000, step_size=gamma), np.random.default_rng(23))
    expected = 1.0 / (prec * (1 - gamma * prec / 2))
    assert np.allclose(res.diagnostics["var"], expected, rtol=0.04)
    assert np.allclose(res.diagnostics["mean"], posterior_params(p, s).mean, atol=0.02)


def test_langevin_noise_free_zero_step_stays_put(problem):
    p, s = problem
    w0 = np.array([0.25, -0.75])
    res = langevin_chain(p.gibbs_spec(), s, ChainConfig(50, burn_in=0, step_size=0.0, noise_scale=0.0),
                         np.random.default_rng(0), w0=w0)
    assert np.all(res.draws == w0)


def test_langevin_noise_free_is_gradient_descent(problem):
    p, s = problem
    res = langevin_chain(p.gibbs_spec(), s, ChainConfig(5000, step_size=1e-2, noise_scale=0.0),
                         np.random.default_rng(0))
    assert np.allclose(res.draws[-1], posterior_params(p, s).mean, atol=1e-10)


def test_langevin_divergence(problem):
    p, s = problem
    with pytest.raises(DivergenceError):
        langevin_chain(p.gibbs_spec(), s, ChainConfig(10_000, step_size=1.0), np.random.default_rng(0))


def test_langevin_rejects_finite_targets():
    spec = GibbsSpec(1.0, FinitePrior([0.5, 0.5]), loss=table_loss([[0, 1], [1, 0]]))
    with pytest.raises(ValueError):
        langevin_chain(spec, np.array([0, 1]), ChainConfig(10), np.random.default_rng(0))


def test_mh_zero_acceptance_raises():
    p = GaussianMeanProblem.unit(d=1, n=10_000)
    s = np.zeros((p.n, 1))
    cfg = ChainConfig(50, proposal_scale=1e6)
    with pytest.raises(SamplerError):
        mh_gibbs_chain(p.gibbs_spec(), s, cfg, np.random.default_rng(0))


def test_custom_energy_needs_gradient():
    spec = GibbsSpec(1.0, GaussianPrior(0.0, 1.0), energy=lambda w, s: np.sum(w**2, axis=-1))
    with pytest.raises(ValueError):
        langevin_chain(spec, np.zeros((2, 1)), ChainConfig(10), np.random.default_rng(0))


# --- learners ---------------------------------------------------------------------------


def test_exact_learner_conjugate_moments(problem):
    p, _ = problem
    spec = p.gibbs_spec()
    rng = np.random.default_rng(31)
    s = np.broadcast_to(np.array([[0.5, -0.5]] * p.n), (100_000, p.n, 2))
    w = exact_gibbs_learner(spec)(s, rng)
    post = posterior_params(p, s[0])
    assert np.allclose(w.mean(axis=0), post.mean, atol=0.005)
    assert np.allclose(w.var(axis=0), post.sigma1_sq, rtol=0.02)


def test_exact_learner_finite_rows():
    table = np.array([[0.0, 1.0], [1.0, 0.0]])
    spec = GibbsSpec(1.0, FinitePrior([0.5, 0.5]), loss=table_loss(table))
    s = np.zeros((100_000, 1), dtype=int)
    w = exact_gibbs_learner(spec)(s, np.random.default_rng(32))
    # P(W=0 | s=0) = 1 / (1 + e^-1)
    assert abs(w.mean() - (1 - 1 / (1 + math.exp(-1)))) < 0.005


def test_langevin_learner_checkpoints_match_single_run(problem):
    p, _ = problem
    spec = p.gibbs_spec()
    cfg = ChainConfig(600, step_size=1e-3)
    data = p.data_model().sample(np.random.default_rng(40), p.n, 20)
    learner = langevin_learner(spec, cfg, block=128)
    final = learner(data, np.random.default_rng(41))
    snaps = learner(data, np.random.default_rng(41), checkpoints=[100, 600])
    assert len(snaps) == 2
    assert np.array_equal(snaps[1], final)


def test_pure_python_fallback_selected_by_environment():
    import os
    import subprocess
    import sys

    env = dict(os.environ, GIBBSLAB_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "import gibbslab; print(gibbslab.BACKEND)"], env=env,
                         capture_output=True, text=True, check=True).stdout.strip()
    assert out == "python"
    with pytest.raises(ValueError):
        _backend.load("fortran")
