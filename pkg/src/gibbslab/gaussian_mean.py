"""Closed forms for Gibbs mean estimation with a Gaussian prior.

Data ``Z ~ N(mu, sigmaZ_sq I_d)``, squared loss, prior ``N(mu0, sigma0_sq I_d)``
and inverse temperature ``alpha = n / (2 sigma_sq)``.  The Gibbs learner is
then the conjugate posterior ``N(mean, sigma1_sq I_d)`` with
``sigma1_sq = sigma0_sq sigma_sq / (n sigma0_sq + sigma_sq)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from gibbslab.core import GaussianData, GaussianPrior, GibbsSpec, squared_loss


@dataclass(frozen=True, eq=False)
class GaussianMeanProblem:
    d: int
    n: int
    mu: np.ndarray
    mu0: np.ndarray
    sigma0_sq: float
    sigmaZ_sq: float
    sigma_sq: float

    def __post_init__(self):
        if self.d < 1 or self.n < 1:
            raise ValueError("need d >= 1 and n >= 1")
        if not (self.sigma0_sq > 0 and self.sigma_sq > 0 and self.sigmaZ_sq >= 0):
            raise ValueError("need sigma0_sq > 0, sigma_sq > 0, sigmaZ_sq >= 0")
        for name in ("mu", "mu0"):
            v = np.broadcast_to(np.asarray(getattr(self, name), dtype=float), (self.d,)).copy()
            object.__setattr__(self, name, v)

    @classmethod
    def unit(cls, d=1, n=1, **overrides) -> "GaussianMeanProblem":
        """All variances one, both means zero."""
        kw = dict(mu=np.zeros(d), mu0=np.zeros(d), sigma0_sq=1.0, sigmaZ_sq=1.0, sigma_sq=1.0)
        kw.update(overrides)
        return cls(d=d, n=n, **kw)

    def replace(self, **changes) -> "GaussianMeanProblem":
        kw = {k: getattr(self, k) for k in ("d", "n", "mu", "mu0", "sigma0_sq", "sigmaZ_sq", "sigma_sq")}
        kw.update(changes)
        return GaussianMeanProblem(**kw)

    @property
    def alpha(self) -> float:
        return self.n / (2.0 * self.sigma_sq)

    @property
    def sigma1_sq(self) -> float:
        return self.sigma0_sq * self.sigma_sq / (self.n * self.sigma0_sq + self.sigma_sq)

    def data_model(self) -> GaussianData:
        return GaussianData(self.mu, self.sigmaZ_sq)

    def gibbs_spec(self) -> GibbsSpec:
        return GibbsSpec(self.alpha, GaussianPrior(self.mu0, self.sigma0_sq), loss=squared_loss())


class PosteriorParams(NamedTuple):
    mean: np.ndarray
    sigma1_sq: float


class InfoTriple(NamedTuple):
    """Mutual, lautum and symmetrized KL information in nats."""

    mutual: float
    lautum: float
    skl: float

    @classmethod
    def from_parts(cls, mutual, lautum) -> "InfoTriple":
        return cls(float(mutual), float(lautum), float(mutual + lautum))


class ChiSquareParams(NamedTuple):
    sigma_ell_sq: float
    eta: float
    degrees: int


def posterior_params(p: GaussianMeanProblem, s) -> PosteriorParams:
    s = np.asarray(s, dtype=float)
    if s.ndim == 1 and p.d == 1:
        s = s[:, None]
    if s.shape[-2:] != (p.n, p.d):
        raise ValueError(f"dataset shape {s.shape} does not match (n, d) = ({p.n}, {p.d})")
    s1 = p.sigma1_sq
    mean = (s1 / p.sigma0_sq) * p.mu0 + (s1 / p.sigma_sq) * s.sum(axis=-2)
    return PosteriorParams(mean, s1)


def gen_error_closed(p: GaussianMeanProblem) -> float:
    return 2.0 * p.d * p.sigma0_sq * p.sigmaZ_sq / (p.n * p.sigma0_sq + p.sigma_sq)


def _trace_per_dim(p: GaussianMeanProblem) -> float:
    return p.n * p.sigma1_sq * p.sigmaZ_sq / p.sigma_sq**2


def iskl_closed(p: GaussianMeanProblem) -> float:
    return p.d * _trace_per_dim(p)


def mi_lautum_closed(p: GaussianMeanProblem) -> InfoTriple:
    """Mutual and lautum information between the dataset and the hypothesis.

    Valid for Gaussian data.  The symmetrized sum does not depend on the data
    law beyond its covariance; the split between the two terms does.
    """
    if p.sigmaZ_sq == 0:
        return InfoTriple(0.0, 0.0, 0.0)
    t = _trace_per_dim(p)
    mutual = 0.5 * p.d * math.log1p(t)
    return InfoTriple(mutual, p.d * t - mutual, p.d * t)


def mi_lautum_printed(p: GaussianMeanProblem) -> InfoTriple:
    """Trace-minus/plus-divergence form with the full channel trace.

    Kept for comparison only: its two terms add up to twice the symmetrized
    information of :func:`mi_lautum_closed`.
    """
    t = _trace_per_dim(p)
    trace = p.d * t
    # D(P_W || N(mu_W, sigma1_sq I)) for equal means and variance ratio 1 + t
    kl = 0.5 * p.d * (t - math.log1p(t))
    return InfoTriple.from_parts(trace - kl, trace + kl)


def per_sample_mi_closed(p: GaussianMeanProblem) -> float:
    """``I(W; Z_i)``, the same for every sample index."""
    if p.n == 1:
        return mi_lautum_closed(p).mutual
    s0, sz, s2, n = p.sigma0_sq, p.sigmaZ_sq, p.sigma_sq, p.n
    ratio = s0 * sz / ((n - 1) * s0 * sz + n * s0 * s2 + s2**2)
    return 0.5 * p.d * math.log1p(ratio)


def chi_square_params(p: GaussianMeanProblem) -> ChiSquareParams:
    """Scale and noncentrality of ``|Z~ - W~|^2`` for independent copies."""
    s1 = p.sigma1_sq
    sigma_ell_sq = (p.n * s1**2 / p.sigma_sq**2 + 1.0) * p.sigmaZ_sq + s1
    offset = (p.sigma_sq / (p.n * p.sigma0_sq + p.sigma_sq)) * (p.mu0 - p.mu)
    return ChiSquareParams(sigma_ell_sq, float(offset @ offset), p.d)


def hypothesis_marginal(p: GaussianMeanProblem) -> tuple[np.ndarray, float]:
    """Mean vector and per-coordinate variance of ``W`` averaged over datasets."""
    s1 = p.sigma1_sq
    mean = (s1 / p.sigma0_sq) * p.mu0 + (p.n * s1 / p.sigma_sq) * p.mu
    var = p.n * s1**2 / p.sigma_sq**2 * p.sigmaZ_sq + s1
    return mean, var
