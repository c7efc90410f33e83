"""Independent routes to the generalization error and its information measures.

* :func:`mc_gen_error` samples ``(S, W)`` pairs and averages ``L_P - L_E``.
* :func:`iskl_energy_gap` estimates the symmetrized KL information as
  ``alpha`` times the gap between the energy averaged over decoupled pairs
  and over coupled pairs; it never touches the partition function.
* :func:`enumerate_joint` and friends evaluate everything exactly on finite
  alphabets.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.special import logsumexp

from gibbslab.core import (
    DataModel,
    EstimateWithError,
    FiniteData,
    FinitePrior,
    GibbsSpec,
    LossFunction,
    SequenceData,
    _all_sequences,
    empirical_risk,
    table_loss,
)
from gibbslab.gaussian_mean import InfoTriple
from gibbslab.samplers import exact_gibbs_learner

MAX_ALPHABET = 16
MAX_N = 4
MAX_STATES = 10**6

__all__ = [
    "EstimateWithError",
    "DiscreteProblem",
    "JointTable",
    "MixtureCheck",
    "mc_gen_error",
    "gen_error_samples",
    "risk_gap",
    "iskl_energy_gap",
    "enumerate_joint",
    "exact_gen_discrete",
    "exact_info_discrete",
    "mixture_concavity_check",
    "random_discrete_problem",
    "random_domain_pair",
]


def mc_gen_error(model: DataModel, learner, loss: LossFunction, n: int, outer: int,
                 rng: np.random.Generator, fresh_per_risk: int = 1,
                 chunk: int = 50_000) -> EstimateWithError:
    """Monte-Carlo expected generalization error.

    Each replicate draws a dataset, a hypothesis ``learner(S, rng)`` and
    ``fresh_per_risk`` independent datasets to estimate the population risk
    (i.i.d. finite models use the exact population risk instead).  The
    standard error is that of the per-replicate differences.
    """
    if outer < 100:
        raise ValueError("outer must be at least 100")
    return EstimateWithError.from_samples(
        gen_error_samples(model, learner, loss, n, outer, rng, fresh_per_risk, chunk))


def gen_error_samples(model, learner, loss, n, outer, rng, fresh_per_risk=1, chunk=50_000):
    """Per-replicate ``L_P(W) - L_E(W, S)`` values behind :func:`mc_gen_error`."""
    if fresh_per_risk < 1:
        raise ValueError("fresh_per_risk must be >= 1")
    diffs = []
    done = 0
    while done < outer:
        m = min(chunk, outer - done)
        s = model.sample(rng, n, m)
        w = learner(s, rng)
        diffs.append(risk_gap(model, loss, s, w, rng, fresh_per_risk))
        done += m
    return np.concatenate(diffs)


def risk_gap(model, loss, s, w, rng, fresh_per_risk=1):
    """``L_P(w_j) - L_E(w_j, s_j)`` for a batch of (dataset, hypothesis) pairs."""
    n = s.shape[1]
    m = s.shape[0]
    emp = empirical_risk(loss, w, s)
    if isinstance(model, FiniteData):
        symbols = np.arange(model.pz.size)
        pop = loss(np.asarray(w)[:, None], symbols[None, :]) @ model.pz
    else:
        fresh = model.sample(rng, n, m * fresh_per_risk)
        fresh = fresh.reshape((m, fresh_per_risk) + fresh.shape[1:])
        pop = empirical_risk(loss, np.asarray(w)[:, None], fresh).mean(axis=1)
    return pop - emp


def iskl_energy_gap(spec: GibbsSpec, model: DataModel, n: int, outer: int,
                    rng: np.random.Generator, learner=None) -> EstimateWithError:
    """Estimate ``I_SKL(W; S)`` for the Gibbs learner of ``spec``.

    Coupled pairs ``(S_j, W_j)`` are decoupled by a cyclic shift of the
    hypothesis column, ``(S_j, W_{j+1})``.  The estimate is
    ``alpha * (mean f(decoupled) - mean f(coupled))``.  ``learner`` defaults
    to the exact Gibbs sampler.
    """
    if outer < 2:
        raise ValueError("outer must be at least 2")
    s = model.sample(rng, n, outer)
    if spec.alpha == 0:
        return EstimateWithError(0.0, 0.0, outer)
    learner = learner or exact_gibbs_learner(spec)
    w = learner(s, rng)
    coupled = spec.f(w, s)
    decoupled = spec.f(np.roll(w, -1, axis=0), s)
    return EstimateWithError.from_samples(spec.alpha * (decoupled - coupled))


# ---------------------------------------------------------------------------
# exact enumeration


@dataclass(frozen=True, eq=False)
class DiscreteProblem:
    """Finite-alphabet Gibbs learning problem.

    The data law is either i.i.d. from ``pz`` or an arbitrary pmf ``ps`` of
    shape ``(|Z|,) * n`` over whole sequences.
    """

    loss_table: np.ndarray
    prior: np.ndarray
    alpha: float
    n: int
    pz: np.ndarray | None = None
    ps: np.ndarray | None = None

    def __post_init__(self):
        table = np.asarray(self.loss_table, dtype=float)
        object.__setattr__(self, "loss_table", table)
        object.__setattr__(self, "prior", np.asarray(self.prior, dtype=float))
        n_w, n_z = table.shape
        if n_w > MAX_ALPHABET or n_z > MAX_ALPHABET:
            raise ValueError(f"alphabets are limited to {MAX_ALPHABET} symbols")
        if not 1 <= self.n <= MAX_N:
            raise ValueError(f"n must be in 1..{MAX_N}")
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")
        if (self.pz is None) == (self.ps is None):
            raise ValueError("give exactly one of pz and ps")
        if self.pz is not None:
            object.__setattr__(self, "pz", np.asarray(self.pz, dtype=float))
        else:
            ps = np.asarray(self.ps, dtype=float)
            if ps.shape != (n_z,) * self.n:
                raise ValueError(f"ps must have shape {(n_z,) * self.n}")
            object.__setattr__(self, "ps", ps)
        # validation of pmfs and table entries
        self.data_model()
        self.gibbs_spec()

    @property
    def z_size(self) -> int:
        return self.loss_table.shape[1]

    @property
    def w_size(self) -> int:
        return self.loss_table.shape[0]

    @property
    def iid(self) -> bool:
        return self.pz is not None

    def loss(self) -> LossFunction:
        return table_loss(self.loss_table)

    def data_model(self):
        return FiniteData(self.pz) if self.iid else SequenceData(self.ps)

    def gibbs_spec(self) -> GibbsSpec:
        return GibbsSpec(self.alpha, FinitePrior(self.prior), loss=self.loss())

    def sequence_pmf(self):
        return self.data_model().exact_pmf(self.n)

    def replace(self, **changes) -> "DiscreteProblem":
        kw = dict(loss_table=self.loss_table, prior=self.prior, alpha=self.alpha, n=self.n,
                  pz=self.pz, ps=self.ps)
        kw.update(changes)
        return DiscreteProblem(**kw)


@dataclass(frozen=True, eq=False)
class JointTable:
    """Exact joint law of ``(S, W)``; rows index sequences, columns hypotheses."""

    seqs: np.ndarray
    p_s: np.ndarray
    log_p_w_given_s: np.ndarray
    p_w_given_s: np.ndarray
    p_joint: np.ndarray
    p_w: np.ndarray
    emp_risk: np.ndarray
    independent: bool = False


def enumerate_joint(p: DiscreteProblem) -> JointTable:
    if p.z_size**p.n * p.w_size > MAX_STATES:
        raise ValueError(f"state space exceeds {MAX_STATES} entries")
    seqs = _all_sequences(p.z_size, p.n)
    p_s = p.sequence_pmf()[1]
    emp = p.loss_table[:, seqs].mean(axis=-1).T
    if p.alpha == 0:
        # the learner ignores the data: every row is the prior and W is independent of S
        log_rows = np.broadcast_to(np.log(p.prior), emp.shape).copy()
        rows = np.broadcast_to(p.prior, emp.shape).copy()
        joint = p_s[:, None] * rows
        return JointTable(seqs, p_s, log_rows, rows, joint, p.prior.copy(), emp, independent=True)
    logits = np.log(p.prior)[None, :] - p.alpha * emp
    log_rows = logits - logsumexp(logits, axis=1, keepdims=True)
    rows = np.exp(log_rows)
    joint = p_s[:, None] * rows
    return JointTable(seqs, p_s, log_rows, rows, joint, joint.sum(axis=0), emp)


def exact_gen_discrete(p: DiscreteProblem, t: JointTable) -> float:
    if t.independent:
        return 0.0
    pop = t.p_s @ t.emp_risk
    return float(np.sum(t.p_joint * (pop[None, :] - t.emp_risk)))


def exact_info_discrete(t: JointTable) -> InfoTriple:
    """Mutual, lautum and symmetrized KL information of the joint table."""
    with np.errstate(divide="ignore"):
        log_ratio = t.log_p_w_given_s - np.log(t.p_w)[None, :]
    product = t.p_s[:, None] * t.p_w[None, :]
    mask = product > 0
    mutual = np.sum(t.p_joint[mask] * log_ratio[mask])
    lautum = -np.sum(product[mask] * log_ratio[mask])
    return InfoTriple.from_parts(mutual, lautum)


class MixtureCheck(NamedTuple):
    gen_mixture: float
    avg_gen: float
    holds: bool

    @property
    def slack(self) -> float:
        return self.gen_mixture - self.avg_gen


def _sequence_tensor(p: DiscreteProblem) -> np.ndarray:
    return p.sequence_pmf()[1].reshape((p.z_size,) * p.n)


def mixture_concavity_check(p1: DiscreteProblem, p2: DiscreteProblem, lam: float) -> MixtureCheck:
    """Compare the mixture's generalization error with the weighted average."""
    if not (p1.loss_table.shape == p2.loss_table.shape and p1.n == p2.n):
        raise ValueError("domains must share alphabets and sample size")
    if not (np.array_equal(p1.loss_table, p2.loss_table) and np.array_equal(p1.prior, p2.prior)
            and p1.alpha == p2.alpha):
        raise ValueError("domains must share the Gibbs learner (loss, prior, alpha)")
    if not 0.0 <= lam <= 1.0:
        raise ValueError("mixture weight must lie in [0, 1]")
    gens = [exact_gen_discrete(q, enumerate_joint(q)) for q in (p1, p2)]
    ps = lam * _sequence_tensor(p1) + (1.0 - lam) * _sequence_tensor(p2)
    ps = ps / ps.sum()
    mix = p1.replace(pz=None, ps=ps)
    gen_mix = exact_gen_discrete(mix, enumerate_joint(mix))
    avg = lam * gens[0] + (1.0 - lam) * gens[1]
    return MixtureCheck(gen_mix, avg, gen_mix >= avg - 1e-12)


def random_discrete_problem(rng: np.random.Generator, z_max: int = 4, w_max: int = 5, n_max: int = 3,
                            alphas=(0.5, 1.0, 2.0), iid: bool = True) -> DiscreteProblem:
    """Random instance with losses uniform in [0, 1] and Dirichlet pmfs."""
    n_z = int(rng.integers(2, z_max + 1))
    n_w = int(rng.integers(2, w_max + 1))
    n = int(rng.integers(1, n_max + 1))
    alpha = float(rng.choice(np.asarray(alphas, dtype=float)))
    table = rng.random((n_w, n_z))
    prior = _dirichlet(rng, n_w)
    if iid:
        return DiscreteProblem(table, prior, alpha, n, pz=_dirichlet(rng, n_z))
    ps = _dirichlet(rng, n_z**n).reshape((n_z,) * n)
    return DiscreteProblem(table, prior, alpha, n, ps=ps)


def random_domain_pair(rng: np.random.Generator, z_max: int = 4, w_max: int = 5, n_max: int = 3,
                       alphas=(0.5, 1.0, 2.0)) -> tuple[DiscreteProblem, DiscreteProblem]:
    """Two i.i.d. domains sharing one Gibbs learner; only the symbol law differs."""
    p1 = random_discrete_problem(rng, z_max, w_max, n_max, alphas)
    return p1, p1.replace(pz=_dirichlet(rng, p1.z_size))


def _dirichlet(rng, k):
    p = rng.dirichlet(np.ones(k))
    # keep every mass strictly positive and the total exactly one
    p = np.maximum(p, 1e-6)
    p = p / p.sum()
    p[-1] = 1.0 - p[:-1].sum()
    return p
