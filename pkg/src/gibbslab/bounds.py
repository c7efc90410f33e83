"""Upper bounds on the Gibbs generalization error.

Sub-Gaussian envelopes are carried as the raw quadratic coefficient ``c``
in ``Lambda(lambda) <= c * lambda**2``.  A ``sigma``-sub-Gaussian variable in
the usual ``sigma**2 lambda**2 / 2`` convention has ``c = sigma**2 / 2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
from scipy.optimize import minimize_scalar

from gibbslab.gaussian_mean import (
    ChiSquareParams,
    GaussianMeanProblem,
    chi_square_params,
    per_sample_mi_closed,
)

ISMI_MODES = ("printed", "derived", "numeric")


@dataclass(frozen=True)
class BoundInputs:
    sigma_subg: float
    alpha: float
    n: int
    c_e: float = 0.0

    def __post_init__(self):
        if self.sigma_subg < 0 or self.alpha < 0 or self.c_e < 0:
            raise ValueError("bound inputs must be non-negative")
        if self.n < 1:
            raise ValueError("n must be >= 1")


class PriorBounds(NamedTuple):
    dp: float
    raginsky: float
    kuzborskij: float
    xu_mi: float | None


def thm2_bound(b: BoundInputs) -> float:
    """``2 sigma^2 alpha / ((1 + C_E) n)`` for left-tail sub-Gaussian losses."""
    return 2.0 * b.sigma_subg**2 * b.alpha / ((1.0 + b.c_e) * b.n)


def prior_bounds(sigma_subg: float, alpha: float, n: int, mutual: float | None = None) -> PriorBounds:
    """Earlier bounds: differential privacy, Hoeffding, sub-Gaussian-under-Gibbs, and
    the mutual-information bound (only when ``mutual`` is supplied)."""
    if min(sigma_subg, alpha) < 0 or n < 1:
        raise ValueError("inputs must be non-negative and n >= 1")
    xu = None if mutual is None else math.sqrt(2.0 * sigma_subg**2 * mutual / n)
    return PriorBounds(math.sqrt(alpha / n), alpha / (2.0 * n), 4.0 * sigma_subg**2 * alpha / n, xu)


def c_e_exact(mutual: float, lautum: float) -> float:
    """Tightest admissible ``C_E = L / I`` (zero when ``I`` vanishes)."""
    return lautum / mutual if mutual > 0 else 0.0


# ---------------------------------------------------------------------------
# CGF machinery


class CgfEnvelope(NamedTuple):
    c: float

    @classmethod
    def from_chi_square(cls, cp: ChiSquareParams) -> "CgfEnvelope":
        s = cp.sigma_ell_sq
        return cls(cp.degrees * s**2 + 2.0 * s * cp.eta)


def cgf_scaled_noncentral_chisq(lam: float, cp: ChiSquareParams) -> float:
    """Centered CGF of ``sigma_ell_sq * chi2_d`` with noncentrality mass ``eta``."""
    lam = float(lam)
    s, eta, d = cp.sigma_ell_sq, cp.eta, cp.degrees
    u = 2.0 * s * lam
    if not u < 1.0:
        raise ValueError(f"lambda must be below 1/(2 sigma_ell^2) = {1 / (2 * s)}")
    # -u - log(1 - u) form is stable near zero
    return 0.5 * d * (-u - math.log1p(-u)) + 2.0 * s * eta * lam**2 / (1.0 - u)


def subgaussian_envelope(lam: float, e: CgfEnvelope) -> float:
    if not lam < 0:
        raise ValueError("the envelope covers the left tail only (lambda < 0)")
    return e.c * lam**2


def psi_star_inverse_quadratic(c: float, y: float) -> float:
    """Inverse Legendre dual of ``c lambda^2``: ``2 sqrt(c y)``."""
    if c <= 0 or y < 0:
        raise ValueError("need c > 0 and y >= 0")
    return 2.0 * math.sqrt(c * y)


def psi_star_inverse_numeric(cgf: Callable[[float], float], y: float, lam_max: float,
                             grid_points: int = 200, lam_min: float = 1e-6) -> float:
    """``inf_{0 < lambda < lam_max} (y + cgf(lambda)) / lambda``.

    Coarse log-spaced grid on ``[lam_min, 0.999 lam_max]`` followed by a
    bounded scalar minimisation between the neighbours of the best grid point.
    """
    if y < 0:
        raise ValueError("y must be non-negative")
    if y == 0:
        return 0.0
    hi = 0.999 * lam_max
    if not hi > lam_min:
        raise ValueError("empty lambda grid")
    grid = np.geomspace(lam_min, hi, grid_points)
    vals = np.array([(y + cgf(x)) / x for x in grid])
    finite = np.isfinite(vals)
    if not finite.any():
        raise ValueError("cgf is not finite anywhere on the lambda grid")
    vals[~finite] = np.inf
    k = int(np.argmin(vals))
    lo_b, hi_b = grid[max(k - 1, 0)], grid[min(k + 1, grid_points - 1)]
    if hi_b - lo_b <= 1e-10:
        return float(vals[k])
    res = minimize_scalar(lambda x: (y + cgf(x)) / x, bracket=None, bounds=(lo_b, hi_b),
                          method="bounded", options={"xatol": 1e-10 * max(1.0, lo_b)})
    return float(min(res.fun, vals[k]))


def ismi_bound(p: GaussianMeanProblem, mode: str = "derived") -> float:
    """Individual-sample mutual information bound for the Gaussian mean problem.

    ``derived`` inverts the quadratic envelope exactly, ``numeric`` inverts
    the exact left-tail CGF, ``printed`` evaluates the closed expression
    ``sqrt((d^2 s^4 + 2 d s^2 eta) / 2 * log(1 + ...))``.
    """
    if mode not in ISMI_MODES:
        raise ValueError(f"mode must be one of {ISMI_MODES}")
    if p.n < 2:
        raise ValueError("the ISMI bound needs n >= 2")
    y = per_sample_mi_closed(p)
    if y == 0:
        return 0.0
    cp = chi_square_params(p)
    env = CgfEnvelope.from_chi_square(cp)
    if mode == "printed":
        s, eta, d = cp.sigma_ell_sq, cp.eta, cp.degrees
        return math.sqrt((d * d * s * s + 2 * d * s * eta) / 2.0 * (2.0 * y / d))
    if mode == "derived":
        # every sample carries the same information, so the average is one term
        return psi_star_inverse_quadratic(env.c, y)
    # psi(lambda) = Lambda(-lambda) for lambda > 0
    return psi_star_inverse_numeric(lambda x: cgf_scaled_noncentral_chisq(-x, cp), y,
                                    lam_max=100.0 / cp.sigma_ell_sq)
