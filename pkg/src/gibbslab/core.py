"""Losses, data models, priors and the Gibbs kernel.

Hypotheses are plain numpy arrays: a real vector of shape ``(d,)`` for
continuous problems, an integer index for finite hypothesis alphabets.
Datasets are arrays of shape ``(n, d)`` (vector samples) or ``(n,)``
(symbol indices).  Most functions accept extra leading batch axes so that
Monte-Carlo loops can be vectorised.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate
from scipy.special import logsumexp

GOLDEN_GAMMA = 0x9E3779B97F4A7C15
_MASK64 = (1 << 64) - 1


def substream(master_seed: int, index: int) -> np.random.Generator:
    """Independent generator for task ``index`` derived from ``master_seed``.

    The seed is ``master_seed XOR (GOLDEN_GAMMA * (index + 1) mod 2**64)``.
    """
    seed = (int(master_seed) ^ ((GOLDEN_GAMMA * (index + 1)) & _MASK64)) & _MASK64
    return np.random.default_rng(seed)


@dataclass(frozen=True)
class EstimateWithError:
    """Monte-Carlo point estimate with its standard error."""

    value: float
    std_error: float
    n_samples: int

    @classmethod
    def from_samples(cls, samples) -> "EstimateWithError":
        x = np.asarray(samples, dtype=float).ravel()
        if x.size < 2:
            raise ValueError("need at least two samples for a standard error")
        return cls(float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size)), int(x.size))

    def within(self, target: float, n_se: float = 3.0) -> bool:
        return abs(self.value - target) <= n_se * self.std_error

    def __str__(self):
        return f"{self.value:.6g} ± {self.std_error:.2g} (N={self.n_samples})"


# ---------------------------------------------------------------------------
# losses


LOSS_KINDS = ("squared", "zero_one", "table")


@dataclass(frozen=True, eq=False)
class LossFunction:
    """Non-negative loss ``l(w, z)``.

    ``squared`` acts on real vectors, ``zero_one`` and ``table`` on symbol
    indices.  ``table[w, z]`` holds the loss of hypothesis ``w`` on symbol
    ``z``.
    """

    kind: str
    table: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in LOSS_KINDS:
            raise ValueError(f"unknown loss kind {self.kind!r}")
        if self.kind == "table":
            if self.table is None:
                raise ValueError("table loss needs a table")
            t = np.asarray(self.table, dtype=float)
            if t.ndim != 2:
                raise ValueError("loss table must be 2-D (|W| x |Z|)")
            if not np.all(np.isfinite(t)):
                raise ValueError("loss table entries must be finite")
            if np.any(t < 0):
                raise ValueError("loss table entries must be non-negative")
            object.__setattr__(self, "table", t)

    @property
    def vector_valued(self) -> bool:
        return self.kind == "squared"

    def __call__(self, w, z):
        if self.kind == "squared":
            diff = np.asarray(z, dtype=float) - np.asarray(w, dtype=float)
            return np.sum(diff * diff, axis=-1)
        w = np.asarray(w)
        z = np.asarray(z)
        if self.kind == "zero_one":
            return (w != z).astype(float)
        return self.table[w, z]

    def grad_w(self, w, z):
        """Gradient of the loss in ``w``; only defined for the squared loss."""
        if self.kind != "squared":
            raise NotImplementedError(f"no gradient for {self.kind} loss")
        return 2.0 * (np.asarray(w, dtype=float) - np.asarray(z, dtype=float))

    def value_range(self) -> tuple[float, float] | None:
        if self.kind == "zero_one":
            return 0.0, 1.0
        if self.kind == "table":
            return float(self.table.min()), float(self.table.max())
        return None


def squared_loss() -> LossFunction:
    return LossFunction("squared")


def zero_one_loss() -> LossFunction:
    return LossFunction("zero_one")


def table_loss(table) -> LossFunction:
    return LossFunction("table", np.asarray(table, dtype=float))


def _check_finite(*arrays):
    for a in arrays:
        a = np.asarray(a)
        if a.dtype.kind == "f" and np.isnan(a).any():
            raise ValueError("NaN in inputs")


def _promote_vector(w, s):
    w = np.asarray(w, dtype=float)
    s = np.asarray(s, dtype=float)
    if w.ndim == 0:
        w = w[None]
    if s.ndim == 1 and w.shape[-1] == 1:
        s = s[:, None]
    if s.ndim < 2:
        raise ValueError("vector dataset must have shape (..., n, d)")
    if s.shape[-1] != w.shape[-1]:
        raise ValueError(f"dimension mismatch: w has d={w.shape[-1]}, samples have d={s.shape[-1]}")
    return w, s


def empirical_risk(loss: LossFunction, w, s):
    """Average loss of ``w`` over the samples of ``s``.

    Leading batch axes of ``w`` and ``s`` broadcast against each other.
    """
    _check_finite(w, s)
    if loss.vector_valued:
        w, s = _promote_vector(w, s)
        return loss(w[..., None, :], s).mean(axis=-1)
    w = np.asarray(w)
    s = np.asarray(s)
    if s.ndim < 1:
        raise ValueError("dataset must have at least one sample")
    return loss(w[..., None], s).mean(axis=-1)


# ---------------------------------------------------------------------------
# data models


class DataModel:
    """Law of the training set ``S``.

    Subclasses implement ``sample(rng, n, size)`` returning a batch of
    datasets with shape ``(size, n, d)`` or ``(size, n)``.  Finite models
    also implement ``exact_pmf(n)``.
    """

    finite = False

    def sample(self, rng: np.random.Generator, n: int, size: int):
        raise NotImplementedError

    def exact_pmf(self, n: int):
        raise NotImplementedError(f"{type(self).__name__} has no exact pmf")


@dataclass(frozen=True, eq=False)
class GaussianData(DataModel):
    """i.i.d. ``N(mu, var * I_d)`` samples; ``var = 0`` gives a point mass."""

    mu: np.ndarray
    var: float

    def __post_init__(self):
        object.__setattr__(self, "mu", np.atleast_1d(np.asarray(self.mu, dtype=float)))
        if self.var < 0:
            raise ValueError("variance must be non-negative")

    @property
    def d(self) -> int:
        return self.mu.shape[0]

    def sample(self, rng, n, size):
        noise = rng.standard_normal((size, n, self.d))
        return self.mu + math.sqrt(self.var) * noise


def _check_pmf(p, name="pmf"):
    p = np.asarray(p, dtype=float)
    if np.any(p < 0) or not np.all(np.isfinite(p)):
        raise ValueError(f"{name} must be finite and non-negative")
    if abs(p.sum() - 1.0) > 1e-12:
        raise ValueError(f"{name} must sum to 1 (got {p.sum()!r})")
    return p


@dataclass(frozen=True, eq=False)
class FiniteData(DataModel):
    """i.i.d. samples from a pmf over the symbols ``0..len(pz)-1``."""

    pz: np.ndarray
    finite = True

    def __post_init__(self):
        object.__setattr__(self, "pz", _check_pmf(self.pz, "pz"))

    @property
    def alphabet_size(self) -> int:
        return self.pz.shape[0]

    def sample(self, rng, n, size):
        return rng.choice(self.alphabet_size, size=(size, n), p=self.pz)

    def exact_pmf(self, n):
        k = self.alphabet_size
        seqs = _all_sequences(k, n)
        probs = np.prod(self.pz[seqs], axis=1)
        return seqs, probs


@dataclass(frozen=True, eq=False)
class SequenceData(DataModel):
    """Arbitrary (possibly non-i.i.d.) pmf over length-``n`` symbol sequences.

    ``ps`` has shape ``(k,) * n`` and ``ps[z1, ..., zn]`` is the probability
    of that sequence.
    """

    ps: np.ndarray
    finite = True

    def __post_init__(self):
        object.__setattr__(self, "ps", _check_pmf(self.ps, "ps"))

    @property
    def n(self) -> int:
        return self.ps.ndim

    @property
    def alphabet_size(self) -> int:
        return self.ps.shape[0]

    def sample(self, rng, n, size):
        if n != self.n:
            raise ValueError(f"sequence model has fixed n={self.n}")
        seqs, probs = self.exact_pmf(n)
        idx = rng.choice(len(probs), size=size, p=probs)
        return seqs[idx]

    def exact_pmf(self, n):
        if n != self.n:
            raise ValueError(f"sequence model has fixed n={self.n}")
        return _all_sequences(self.alphabet_size, n), self.ps.reshape(-1)


@dataclass(frozen=True, eq=False)
class MixtureData(DataModel):
    """Latent-domain mixture ``P_S = sum_k weights[k] * P_{S|D=k}``."""

    components: tuple
    weights: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(self.components))
        object.__setattr__(self, "weights", _check_pmf(self.weights, "mixture weights"))
        if len(self.components) != len(self.weights):
            raise ValueError("one weight per component required")

    @property
    def finite(self):
        return all(c.finite for c in self.components)

    def sample(self, rng, n, size):
        domain = rng.choice(len(self.weights), size=size, p=self.weights)
        out = None
        for k, comp in enumerate(self.components):
            rows = np.flatnonzero(domain == k)
            draws = comp.sample(rng, n, rows.size)
            if out is None:
                out = np.empty((size,) + draws.shape[1:], dtype=draws.dtype)
            out[rows] = draws
        return out

    def exact_pmf(self, n):
        seqs, probs = None, 0.0
        for wk, comp in zip(self.weights, self.components):
            sk, pk = comp.exact_pmf(n)
            if seqs is None:
                seqs = sk
            elif not np.array_equal(seqs, sk):
                raise ValueError("mixture components must share one alphabet")
            probs = probs + wk * pk
        return seqs, probs


def _all_sequences(k: int, n: int) -> np.ndarray:
    """All ``k**n`` sequences in lexicographic (C) order, shape ``(k**n, n)``."""
    grids = np.indices((k,) * n).reshape(n, -1)
    return np.ascontiguousarray(grids.T)


def population_risk(loss: LossFunction, w, model: DataModel, n: int = 1,
                    mc_budget: int | None = None, rng: np.random.Generator | None = None,
                    exact: bool = False):
    """``L_P(w) = E[L_E(w, S)]`` under ``model``.

    With ``exact=True`` the expectation is summed over the finite sequence
    pmf and a float is returned.  Otherwise ``mc_budget`` independent
    datasets are drawn and an :class:`EstimateWithError` is returned.
    """
    if exact:
        if not model.finite:
            raise ValueError("exact population risk needs a finite data model")
        seqs, probs = model.exact_pmf(n)
        return float(probs @ empirical_risk(loss, w, seqs))
    if not mc_budget or mc_budget < 1:
        raise ValueError("Monte-Carlo population risk needs a positive budget")
    if rng is None:
        raise ValueError("Monte-Carlo population risk needs a random generator")
    draws = model.sample(rng, n, mc_budget)
    values = empirical_risk(loss, w, draws)
    return EstimateWithError.from_samples(values)


# ---------------------------------------------------------------------------
# priors


@dataclass(frozen=True, eq=False)
class GaussianPrior:
    """Isotropic Gaussian prior ``N(mean, var * I_d)``."""

    mean: np.ndarray
    var: float

    def __post_init__(self):
        object.__setattr__(self, "mean", np.atleast_1d(np.asarray(self.mean, dtype=float)))
        if not self.var > 0:
            raise ValueError("prior variance must be positive")

    @property
    def d(self) -> int:
        return self.mean.shape[0]

    @property
    def sd(self) -> float:
        return math.sqrt(self.var)

    def logpdf(self, w):
        w = np.asarray(w, dtype=float)
        r2 = np.sum((w - self.mean) ** 2, axis=-1)
        return -0.5 * r2 / self.var - 0.5 * self.d * math.log(2 * math.pi * self.var)

    def grad_logpdf(self, w):
        return -(np.asarray(w, dtype=float) - self.mean) / self.var

    def sample(self, rng, size=None):
        shape = (self.d,) if size is None else (size, self.d)
        return self.mean + self.sd * rng.standard_normal(shape)


@dataclass(frozen=True, eq=False)
class FinitePrior:
    """Strictly positive pmf over hypothesis indices ``0..K-1``."""

    pmf: np.ndarray

    def __post_init__(self):
        p = _check_pmf(self.pmf, "prior")
        if np.any(p <= 0):
            raise ValueError("finite prior must be strictly positive")
        object.__setattr__(self, "pmf", p)

    @property
    def size(self) -> int:
        return self.pmf.shape[0]

    def logpdf(self, w):
        return np.log(self.pmf)[np.asarray(w)]

    def sample(self, rng, size=None):
        return rng.choice(self.size, size=size, p=self.pmf)


# ---------------------------------------------------------------------------
# Gibbs kernel


@dataclass(frozen=True, eq=False)
class GibbsSpec:
    """Gibbs learner with density proportional to ``prior(w) * exp(-alpha * f(w, s))``.

    ``energy`` defaults to the empirical risk of ``loss``.  A custom energy
    must accept batched ``(w, s)`` the same way :func:`empirical_risk` does.
    """

    alpha: float
    prior: GaussianPrior | FinitePrior
    loss: LossFunction | None = None
    energy: Callable | None = None
    _log_partition_cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if not self.alpha >= 0:
            raise ValueError("inverse temperature must be >= 0")
        if self.loss is None and self.energy is None:
            raise ValueError("GibbsSpec needs a loss or an energy")

    @property
    def finite(self) -> bool:
        return isinstance(self.prior, FinitePrior)

    def f(self, w, s):
        if self.energy is not None:
            return self.energy(w, s)
        return empirical_risk(self.loss, w, s)

    def log_unnormalized(self, w, s):
        """``log prior(w) - alpha * f(w, s)``."""
        lp = self.prior.logpdf(w)
        if self.alpha == 0:
            return lp
        return lp - self.alpha * self.f(w, s)

    def quadratic_form(self, s):
        """Precision and shift of an isotropic Gaussian log-target, if any.

        Returns ``(prec, shift)`` such that ``log_unnormalized(w, s)`` equals
        ``-prec/2 * |w|^2 + shift . w`` up to a constant, or ``None`` when
        the target is not of that form.  ``s`` may carry batch axes, in
        which case ``shift`` does too.
        """
        if self.finite or self.energy is not None or self.loss.kind != "squared":
            return None
        pr = self.prior
        s = np.asarray(s, dtype=float)
        if s.ndim == 1 and pr.d == 1:
            s = s[:, None]
        prec = 1.0 / pr.var + 2.0 * self.alpha
        shift = pr.mean / pr.var + 2.0 * self.alpha * s.mean(axis=-2)
        return prec, shift


def log_partition(spec: GibbsSpec, s, rng: np.random.Generator | None = None,
                  mc_samples: int = 200_000) -> tuple[float, float]:
    """``log V(s, alpha)`` and a relative error estimate.

    Finite priors are summed exactly; one-dimensional Gaussian priors use
    adaptive quadrature on ``mean +/- 10 sd``; anything else falls back to
    importance sampling from the prior (``rng`` required).
    """
    if spec.alpha == 0:
        return 0.0, 0.0
    s = np.asarray(s)
    key = s.tobytes() + str(s.shape).encode()
    cached = spec._log_partition_cache.get(key)
    if cached is not None:
        return cached

    if spec.finite:
        states = np.arange(spec.prior.size)
        value = float(logsumexp(spec.log_unnormalized(states, s)))
        result = (value, 0.0)
    elif spec.prior.d == 1:
        result = _log_partition_quad(spec, s)
    else:
        if rng is None:
            raise ValueError("importance-sampled partition function needs a random generator")
        w = spec.prior.sample(rng, mc_samples)
        logw = -spec.alpha * spec.f(w, s)
        m = float(np.max(logw))
        ratio = np.exp(logw - m)
        mean = ratio.mean()
        rel = float(ratio.std(ddof=1) / math.sqrt(mc_samples) / mean)
        result = (m + math.log(mean), rel)
    if not math.isfinite(result[0]):
        raise FloatingPointError("partition function is not finite")
    if spec.finite or spec.prior.d == 1:
        spec._log_partition_cache[key] = result
    return result


def _log_partition_quad(spec, s):
    pr = spec.prior
    lo = pr.mean[0] - 10 * pr.sd
    hi = pr.mean[0] + 10 * pr.sd
    grid = np.linspace(lo, hi, 4001)[:, None]
    vals = spec.log_unnormalized(grid, s)
    peak = int(np.argmax(vals))
    shift = float(vals[peak])

    def integrand(x):
        return math.exp(float(spec.log_unnormalized(np.array([x]), s)) - shift)

    total, err = integrate.quad(integrand, lo, hi, points=[float(grid[peak, 0])],
                                limit=500, epsabs=0.0, epsrel=1e-12)
    if not total > 0:
        raise FloatingPointError("partition function is not finite")
    return shift + math.log(total), err / total


def gibbs_log_density(spec: GibbsSpec, w, s, rng: np.random.Generator | None = None) -> float:
    """Normalised log density (or log pmf) of the Gibbs learner at ``w``."""
    log_v, _ = log_partition(spec, s, rng=rng)
    return spec.log_unnormalized(w, s) - log_v
