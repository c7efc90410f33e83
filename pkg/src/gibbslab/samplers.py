"""Draw hypotheses from Gibbs learners.

Three routes are offered: exact conjugate draws for the Gaussian mean
problem, random-walk Metropolis for arbitrary energies, and an unadjusted
Langevin integrator.  Quadratic and finite targets run on the compiled
kernels when available (see :mod:`gibbslab._backend`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from gibbslab import _backend
from gibbslab.core import GibbsSpec
from gibbslab.gaussian_mean import GaussianMeanProblem, posterior_params

MAX_NORM = 1e6


class SamplerError(RuntimeError):
    """A chain failed to mix (no accepted moves)."""


class DivergenceError(FloatingPointError):
    """A Langevin chain left the ball of radius ``MAX_NORM``; reduce the step size."""


@dataclass(frozen=True)
class ChainConfig:
    """Chain length and tuning.

    ``burn_in`` defaults to 20% of ``steps``.  ``proposal_scale`` defaults to
    ``2.4 * prior_sd / sqrt(d)``.  ``noise_scale`` multiplies the Langevin
    noise; zero turns the integrator into gradient descent.
    """

    steps: int
    burn_in: int | None = None
    step_size: float = 1e-3
    proposal_scale: float | None = None
    noise_scale: float = 1.0

    def __post_init__(self):
        if self.burn_in is None:
            object.__setattr__(self, "burn_in", self.steps // 5)
        if not self.steps > self.burn_in >= 0:
            raise ValueError("need steps > burn_in >= 0")
        if not self.step_size >= 0:
            raise ValueError("step size must be non-negative")
        if self.proposal_scale is not None and not self.proposal_scale > 0:
            raise ValueError("proposal scale must be positive")
        if self.noise_scale < 0:
            raise ValueError("noise scale must be non-negative")


@dataclass
class ChainResult:
    draws: np.ndarray
    acceptance_rate: float | None = None
    diagnostics: dict = field(default_factory=dict)

    @classmethod
    def build(cls, states, burn_in, acceptance_rate=None):
        draws = states[burn_in:]
        diag = {"mean": draws.mean(axis=0), "var": draws.var(axis=0, ddof=1)}
        return cls(draws, acceptance_rate, diag)


def sample_exact_posterior(p: GaussianMeanProblem, s, rng: np.random.Generator, size: int | None = None):
    """Exact draw(s) from the conjugate Gibbs posterior."""
    post = posterior_params(p, s)
    shape = (p.d,) if size is None else (size, p.d)
    return post.mean + math.sqrt(post.sigma1_sq) * rng.standard_normal(shape)


# ---------------------------------------------------------------------------
# Metropolis


def log_accept_ratio(spec: GibbsSpec, s, w_old, w_new) -> float:
    """Log Metropolis ratio for a symmetric proposal; no partition function involved."""
    return float(spec.log_unnormalized(w_new, s) - spec.log_unnormalized(w_old, s))


def mh_gibbs_chain(spec: GibbsSpec, s, cfg: ChainConfig, rng: np.random.Generator,
                   kernels=None) -> ChainResult:
    """Random-walk Metropolis chain targeting the Gibbs distribution of ``spec``.

    Finite hypothesis alphabets propose a uniformly chosen different state;
    continuous ones use an isotropic Gaussian step.  The initial state is a
    prior draw.
    """
    kernels = kernels or _backend.kernels
    if spec.finite:
        k = spec.prior.size
        if k < 2:
            raise ValueError("finite chain needs at least two hypotheses")
        w0 = int(spec.prior.sample(rng))
        r = rng.integers(0, k - 1, size=cfg.steps)
        log_u = np.log(rng.random(cfg.steps))
        log_target = np.asarray(spec.log_unnormalized(np.arange(k), s), dtype=float)
        states, accepted = kernels.mh_finite(w0, log_target, r, log_u)
    else:
        d = spec.prior.d
        scale = cfg.proposal_scale or 2.4 * spec.prior.sd / math.sqrt(d)
        w0 = spec.prior.sample(rng)
        z = rng.standard_normal((cfg.steps, d))
        log_u = np.log(rng.random(cfg.steps))
        if not np.isfinite(spec.log_unnormalized(w0, s)):
            raise ValueError("energy is not finite at the initial state")
        quad = spec.quadratic_form(s)
        if quad is not None:
            states, accepted = kernels.mh_quadratic(w0, quad[0], quad[1], scale, z, log_u)
        else:
            states, accepted = _mh_generic(spec, s, w0, scale, z, log_u)
    if accepted == 0:
        raise SamplerError("no proposal accepted; proposal scale is pathological")
    return ChainResult.build(states, cfg.burn_in, accepted / cfg.steps)


def _mh_generic(spec, s, w0, scale, z, log_u):
    cur = np.array(w0, dtype=float)
    e_cur = float(spec.log_unnormalized(cur, s))
    out = np.empty_like(z)
    accepted = 0
    for t in range(z.shape[0]):
        prop = cur + scale * z[t]
        e_prop = float(spec.log_unnormalized(prop, s))
        if log_u[t] < e_prop - e_cur:
            cur, e_cur = prop, e_prop
            accepted += 1
        out[t] = cur
    return out, accepted


# ---------------------------------------------------------------------------
# Langevin


def langevin_chain(spec: GibbsSpec, s, cfg: ChainConfig, rng: np.random.Generator,
                   grad_energy=None, w0=None, kernels=None) -> ChainResult:
    """Unadjusted Langevin chain for the Gibbs distribution of ``spec``.

    Update: ``w <- w - gamma * grad(alpha f - log prior)(w) + sqrt(2 gamma) xi``.
    ``grad_energy(w, s)`` returns the gradient of ``f``; when omitted the
    analytic gradient of the squared-loss empirical risk is used.  The chain
    starts from a prior draw unless ``w0`` is given.

    Raises
    ------
    DivergenceError
        If ``|w|`` exceeds ``MAX_NORM``.
    """
    if spec.finite:
        raise ValueError("Langevin dynamics needs a continuous hypothesis space")
    kernels = kernels or _backend.kernels
    d = spec.prior.d
    start = spec.prior.sample(rng) if w0 is None else np.asarray(w0, dtype=float)
    noise = rng.standard_normal((cfg.steps, d))
    quad = spec.quadratic_form(s) if grad_energy is None else None
    if quad is not None:
        states, bad = kernels.ula_quadratic_path(start, quad[0], quad[1], cfg.step_size, noise,
                                                 cfg.noise_scale, MAX_NORM)
    else:
        grad = grad_energy or _default_grad(spec)
        states, bad = _ula_generic(spec, s, grad, start, cfg, noise)
    if bad >= 0:
        raise DivergenceError(f"Langevin chain diverged at step {bad}; reduce the step size")
    return ChainResult.build(states, cfg.burn_in)


def _default_grad(spec):
    if spec.loss is None or spec.energy is not None:
        raise ValueError("custom energies need an explicit grad_energy")
    loss = spec.loss

    def grad(w, s):
        s = np.asarray(s, dtype=float)
        return loss.grad_w(w[..., None, :], s).mean(axis=-2)

    return grad


def _ula_generic(spec, s, grad, w, cfg, noise):
    gamma = cfg.step_size
    c = math.sqrt(2.0 * gamma) * cfg.noise_scale
    out = np.empty_like(noise)
    w = np.array(w, dtype=float)
    for t in range(noise.shape[0]):
        drift = spec.alpha * grad(w, s) - spec.prior.grad_logpdf(w)
        w = w - gamma * drift + c * noise[t]
        out[t] = w
        if not np.dot(w, w) <= MAX_NORM**2:
            return out[: t + 1], t
    return out, -1


def langevin_learner(spec: GibbsSpec, cfg: ChainConfig, block: int = 256, kernels=None):
    """Batched learner running one Langevin chain per dataset.

    Returns ``learner(datasets, rng) -> hypotheses`` (final chain states),
    suitable for :func:`gibbslab.estimators.mc_gen_error`.  The learner also
    accepts ``checkpoints``, a sorted list of step counts, in which case a
    list of snapshots is returned instead.
    """
    kernels = kernels or _backend.kernels

    def learner(datasets, rng, checkpoints=None):
        quad = spec.quadratic_form(datasets)
        if quad is None:
            raise ValueError("batched Langevin learner needs a quadratic Gibbs target")
        prec, shift = quad
        shift = np.ascontiguousarray(shift)
        w = np.ascontiguousarray(spec.prior.sample(rng, datasets.shape[0]))
        marks = list(checkpoints) if checkpoints else [cfg.steps]
        snaps = []
        done = 0
        for mark in marks:
            while done < mark:
                m = min(block, mark - done)
                noise = rng.standard_normal((m,) + w.shape)
                bad = kernels.ula_quadratic_batch(w, prec, shift, cfg.step_size, noise,
                                                  cfg.noise_scale, MAX_NORM)
                if bad >= 0:
                    raise DivergenceError(f"Langevin learner diverged at step {done + bad}")
                done += m
            snaps.append(w.copy())
        return snaps if checkpoints else snaps[0]

    return learner


# ---------------------------------------------------------------------------
# exact learners


def exact_gibbs_learner(spec: GibbsSpec):
    """Batched exact sampler ``learner(datasets, rng) -> hypotheses``.

    Supported for finite hypothesis alphabets (rows enumerated) and for
    quadratic targets (conjugate Gaussian draws).
    """
    if spec.finite:
        states = np.arange(spec.prior.size)

        def finite_learner(datasets, rng):
            logp = spec.log_unnormalized(states[None, :], np.asarray(datasets)[:, None, :])
            probs = np.exp(logp - logsumexp(logp, axis=1, keepdims=True))
            u = rng.random(datasets.shape[0])
            idx = (probs.cumsum(axis=1) < u[:, None]).sum(axis=1)
            return np.minimum(idx, spec.prior.size - 1)

        return finite_learner

    def quad_learner(datasets, rng):
        quad = spec.quadratic_form(datasets)
        if quad is None:
            raise ValueError("no exact sampler for this Gibbs target")
        prec, shift = quad
        return shift / prec + rng.standard_normal(shift.shape) / math.sqrt(prec)

    return quad_learner
