"""Conjugate Gaussian bandit model.

Priors, instances, reward sampling, posterior updates and the elimination
schedule / allocation arithmetic shared by the policies and the bounds.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np


class DimensionError(ValueError):
    """Arm counts of two objects disagree."""


@dataclass(frozen=True)
class GaussianPrior:
    """Independent N(nu_i, sigma0_sq) prior over each arm's mean reward."""

    nu: tuple[float, ...]
    sigma0_sq: float

    def __post_init__(self):
        object.__setattr__(self, "nu", tuple(float(v) for v in self.nu))
        if len(self.nu) < 2:
            raise ValueError(f"need at least 2 arms, got {len(self.nu)}")
        if not all(math.isfinite(v) for v in self.nu):
            raise ValueError("prior means must be finite")
        if not self.sigma0_sq > 0:
            raise ValueError(f"sigma0_sq must be > 0, got {self.sigma0_sq}")

    @property
    def K(self) -> int:
        return len(self.nu)

    def with_sigma0_sq(self, sigma0_sq: float) -> GaussianPrior:
        return GaussianPrior(self.nu, sigma0_sq)


@dataclass(frozen=True)
class GaussianRewards:
    """Gaussian rewards with known per-arm variances (0 means a point mass)."""

    sigma_sq: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "sigma_sq", tuple(float(v) for v in self.sigma_sq))
        if any(not (v >= 0 and math.isfinite(v)) for v in self.sigma_sq):
            raise ValueError("reward variances must be finite and >= 0")

    @property
    def K(self) -> int:
        return len(self.sigma_sq)


@dataclass(frozen=True)
class EmpiricalRewards:
    """Rewards resampled from observed per-arm pools.

    Policies still update Gaussian posteriors with ``assumed_sigma_sq``. With
    ``recenter`` the pool is shifted so that its mean equals the instance mean
    of the arm, which keeps the shape of the empirical distribution while
    letting the prior draw decide which arm is best.
    """

    pools: tuple[np.ndarray, ...]
    assumed_sigma_sq: tuple[float, ...]
    recenter: bool = False
    pool_means: tuple[float, ...] = field(init=False, repr=False)

    def __post_init__(self):
        pools = tuple(np.asarray(p, dtype=float) for p in self.pools)
        if any(p.ndim != 1 or p.size == 0 for p in pools):
            raise ValueError("every empirical pool must be a non-empty 1-D sequence")
        assumed = tuple(float(v) for v in self.assumed_sigma_sq)
        if len(assumed) != len(pools):
            raise DimensionError(
                f"{len(pools)} pools but {len(assumed)} assumed variances")
        if any(not v > 0 for v in assumed):
            raise ValueError("assumed reward variances must be > 0")
        object.__setattr__(self, "pools", pools)
        object.__setattr__(self, "assumed_sigma_sq", assumed)
        object.__setattr__(self, "pool_means", tuple(float(p.mean()) for p in pools))

    @property
    def K(self) -> int:
        return len(self.pools)

    @property
    def sigma_sq(self) -> tuple[float, ...]:
        return self.assumed_sigma_sq


RewardModel = Union[GaussianRewards, EmpiricalRewards]


@dataclass(frozen=True)
class BanditInstance:
    mu: tuple[float, ...]
    model: RewardModel

    def __post_init__(self):
        object.__setattr__(self, "mu", tuple(float(v) for v in self.mu))
        if len(self.mu) != self.model.K:
            raise DimensionError(
                f"instance has {len(self.mu)} means but model has {self.model.K} arms")

    @property
    def K(self) -> int:
        return len(self.mu)

    @property
    def best_arm(self) -> int:
        return best_arm(self.mu)


@dataclass
class ArmStats:
    count: int = 0
    sum: float = 0.0

    def add(self, x) -> None:
        if isinstance(x, np.ndarray):
            self.count += x.size
            self.sum += float(x.sum())
        else:
            self.count += 1
            self.sum += float(x)


@dataclass(frozen=True)
class Posterior:
    mean: float
    variance: float

    @property
    def std(self) -> float:
        return math.sqrt(self.variance)


@dataclass(frozen=True)
class EliminationSchedule:
    rounds: int
    per_round_budget: float
    survivor_counts: tuple[int, ...]


def draw_instance(prior: GaussianPrior, model: RewardModel,
                  rng: np.random.Generator) -> BanditInstance:
    """Draw mu_i ~ N(nu_i, sigma0_sq) independently for every arm."""
    if prior.K != model.K:
        raise DimensionError(f"prior has {prior.K} arms but model has {model.K}")
    z = rng.standard_normal(prior.K)
    mu = np.asarray(prior.nu) + math.sqrt(prior.sigma0_sq) * z
    return BanditInstance(tuple(mu.tolist()), model)


def _check_arm(K: int, arm: int) -> None:
    if not (0 <= arm < K) or int(arm) != arm:
        raise IndexError(f"arm {arm} out of range for {K} arms")


def sample_reward(instance: BanditInstance, arm: int, rng: np.random.Generator,
                  size: int | None = None):
    """One reward (or ``size`` rewards) of ``arm``."""
    _check_arm(instance.K, arm)
    model = instance.model
    if isinstance(model, GaussianRewards):
        mu = instance.mu[arm]
        sd = math.sqrt(model.sigma_sq[arm])
        if size is None:
            return mu + sd * rng.standard_normal() if sd > 0 else mu
        if sd == 0:
            return np.full(size, mu)
        return mu + sd * rng.standard_normal(size)
    pool = model.pools[arm]
    idx = rng.integers(pool.size, size=size)
    x = pool[idx]
    if model.recenter:
        x = x - model.pool_means[arm] + instance.mu[arm]
    return float(x) if size is None else x


def posterior(nu_i: float, sigma0_sq: float, sigma_i_sq: float,
              stats: ArmStats) -> Posterior:
    """Gaussian posterior of one arm's mean given its sufficient statistics.

    A zero reward variance is a point mass: once the arm has been observed the
    posterior collapses onto the sample mean.
    """
    if not sigma0_sq > 0:
        raise ValueError(f"sigma0_sq must be > 0, got {sigma0_sq}")
    m = stats.count
    if sigma_i_sq == 0:
        if m < 1:
            raise ValueError("zero reward variance needs at least one observation")
        return Posterior(stats.sum / m, 0.0)
    if sigma_i_sq < 0:
        raise ValueError(f"sigma_i_sq must be >= 0, got {sigma_i_sq}")
    if m == 0:
        return Posterior(float(nu_i), float(sigma0_sq))
    var = 1.0 / (1.0 / sigma0_sq + m / sigma_i_sq)
    return Posterior(var * (nu_i / sigma0_sq + stats.sum / sigma_i_sq), var)


def best_arm(mu: Sequence[float]) -> int:
    """Index of the largest mean; ties go to the lowest index."""
    if len(mu) == 0:
        raise ValueError("best_arm of an empty sequence")
    return int(np.argmax(np.asarray(mu, dtype=float)))


def elimination_schedule(K: int, n: float | None = None) -> EliminationSchedule:
    if K < 2:
        raise ValueError(f"need at least 2 arms, got {K}")
    R = math.ceil(math.log2(K))
    survivors = []
    s = K
    for _ in range(R):
        s = (s + 1) // 2
        survivors.append(s)
    per_round = float("nan") if n is None else n / R
    return EliminationSchedule(R, per_round, tuple(survivors))


def allocation(n: int, R: int, active_sigma_sq: Sequence[float]):
    """Split the per-round budget n/R proportionally to reward variances.

    Returns the continuous shares and the floored pull counts. Sets of equal
    variances (zeros included) get a uniform split.
    """
    if n < 1 or R < 1:
        raise ValueError(f"need n >= 1 and R >= 1, got n={n}, R={R}")
    v = np.asarray(active_sigma_sq, dtype=float)
    if v.size == 0:
        raise ValueError("empty active set")
    per_round = n / R
    if np.all(v == v[0]):
        shares = np.full(v.size, per_round / v.size)
    else:
        total = v.sum()
        if not total > 0:
            raise ValueError("zero total reward variance")
        shares = per_round * v / total
    pulls = np.floor(shares).astype(np.int64)
    return shares, pulls


def prior_density(prior: GaussianPrior, mu: Sequence[float]) -> float:
    mu = np.asarray(mu, dtype=float)
    if mu.shape != (prior.K,):
        raise DimensionError(f"expected {prior.K} means, got shape {mu.shape}")
    d = mu - np.asarray(prior.nu)
    s0 = prior.sigma0_sq
    return float(np.exp(-0.5 * np.dot(d, d) / s0) / (2 * math.pi * s0) ** (prior.K / 2))
