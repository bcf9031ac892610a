"""Fixed-budget best-arm identification policies.

Every policy consumes at most ``n`` pulls from a metered environment and
recommends a single arm. Policies never see the instance means.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import (
    ArmStats,
    BanditInstance,
    DimensionError,
    GaussianPrior,
    allocation,
    elimination_schedule,
    posterior,
    sample_reward,
)


class BudgetExceeded(RuntimeError):
    """A policy asked for more pulls than its budget."""


class BudgetTooSmall(RuntimeError):
    """An elimination round would leave an active arm without samples."""


class MeteredEnvironment:
    """Black-box sampler over a bandit instance, capped at ``budget`` pulls.

    ``rngs`` is either a single generator or one generator per arm. Per-arm
    streams make the k-th pull of an arm identical across policies.
    """

    def __init__(self, instance: BanditInstance, budget: int, rngs):
        self._instance = instance
        self.budget = int(budget)
        if isinstance(rngs, np.random.Generator):
            rngs = [rngs] * instance.K
        if len(rngs) != instance.K:
            raise DimensionError(f"{len(rngs)} streams for {instance.K} arms")
        self._rngs = list(rngs)
        self.counts = [0] * instance.K

    @property
    def K(self) -> int:
        return self._instance.K

    @property
    def used(self) -> int:
        return sum(self.counts)

    def pull(self, arm: int, size: int | None = None):
        k = 1 if size is None else int(size)
        if self.used + k > self.budget:
            raise BudgetExceeded(
                f"pulling arm {arm} x{k} exceeds budget {self.budget} (used {self.used})")
        x = sample_reward(self._instance, arm, self._rngs[arm], size)
        self.counts[arm] += k
        return x

    __call__ = pull


@dataclass
class PolicyInput:
    n: int
    prior: GaussianPrior
    assumed_sigma_sq: Sequence[float]
    env: MeteredEnvironment

    def __post_init__(self):
        self.assumed_sigma_sq = tuple(float(v) for v in self.assumed_sigma_sq)
        if self.n < 1:
            raise ValueError(f"budget must be >= 1, got {self.n}")
        if not (self.prior.K == len(self.assumed_sigma_sq) == self.env.K):
            raise DimensionError("prior, variances and environment disagree on K")
        if self.env.budget > self.n:
            raise ValueError("environment budget larger than the policy budget")

    @property
    def K(self) -> int:
        return self.prior.K


@dataclass
class Recommendation:
    arm: int
    pulls: list[int]
    pulls_used: int
    trace: list[tuple[int, ...]] | None = None


@dataclass(frozen=True)
class TttsParams:
    beta: float = 0.5
    resample_cap: int = 100

    def __post_init__(self):
        if not 0 < self.beta <= 1:
            raise ValueError(f"beta must be in (0, 1], got {self.beta}")
        if self.resample_cap < 1:
            raise ValueError("resample_cap must be positive")


def _posterior_mean(inp: PolicyInput, arm: int, stats: ArmStats) -> float:
    if stats.count == 0:
        return inp.prior.nu[arm]
    return posterior(inp.prior.nu[arm], inp.prior.sigma0_sq,
                     inp.assumed_sigma_sq[arm], stats).mean


def _sample_mean(arm: int, stats: ArmStats) -> float:
    if stats.count == 0:
        raise BudgetTooSmall(f"arm {arm} has no samples to average")
    return stats.sum / stats.count


def _eliminate(inp: PolicyInput, bayesian: bool, cumulative: bool) -> Recommendation:
    K, n = inp.K, inp.n
    R = elimination_schedule(K).rounds
    active = list(range(K))
    total = [ArmStats() for _ in range(K)]
    trace = []
    for _ in range(R):
        trace.append(tuple(active))
        _, pulls = allocation(n, R, [inp.assumed_sigma_sq[i] for i in active])
        if not bayesian and np.any(pulls == 0):
            raise BudgetTooSmall(
                f"budget {n} gives zero pulls to an active arm in a round of {len(active)} arms")
        scores = []
        for arm, m in zip(active, pulls.tolist()):
            fresh = ArmStats()
            if m > 0:
                fresh.add(inp.env.pull(arm, m))
            total[arm].count += fresh.count
            total[arm].sum += fresh.sum
            stats = total[arm] if cumulative else fresh
            if bayesian:
                scores.append(_posterior_mean(inp, arm, stats))
            else:
                scores.append(_sample_mean(arm, stats))
        keep = (len(active) + 1) // 2
        order = sorted(range(len(active)), key=lambda k: (-scores[k], active[k]))
        active = sorted(active[k] for k in order[:keep])
    trace.append(tuple(active))
    counts = list(inp.env.counts)
    return Recommendation(active[0], counts, sum(counts), trace)


def run_bayes_elim(inp: PolicyInput, rng: np.random.Generator | None = None) -> Recommendation:
    """Bayesian elimination: rank arms by posterior means of each round's samples."""
    return _eliminate(inp, bayesian=True, cumulative=False)


def run_bayes_elim2(inp: PolicyInput, rng: np.random.Generator | None = None) -> Recommendation:
    """Bayesian elimination that keeps all samples collected so far."""
    return _eliminate(inp, bayesian=True, cumulative=True)


def run_freq_elim(inp: PolicyInput, rng: np.random.Generator | None = None) -> Recommendation:
    """Successive halving on per-round sample means with variance-proportional allocation."""
    return _eliminate(inp, bayesian=False, cumulative=False)


def run_freq_elim2(inp: PolicyInput, rng: np.random.Generator | None = None) -> Recommendation:
    return _eliminate(inp, bayesian=False, cumulative=True)


class _TSState:
    """Posterior means and standard deviations under sequential single pulls."""

    def __init__(self, inp: PolicyInput):
        self.inp = inp
        self.stats = [ArmStats() for _ in range(inp.K)]
        self.means = list(inp.prior.nu)
        self.sds = [math.sqrt(inp.prior.sigma0_sq)] * inp.K

    def update(self, arm: int, x: float) -> None:
        st = self.stats[arm]
        st.count += 1
        st.sum += x
        p = posterior(self.inp.prior.nu[arm], self.inp.prior.sigma0_sq,
                      self.inp.assumed_sigma_sq[arm], st)
        self.means[arm] = p.mean
        self.sds[arm] = math.sqrt(p.variance)

    def thetas(self, z) -> list[float]:
        return [m + s * e for m, s, e in zip(self.means, self.sds, z)]


def _argmax(values: Sequence[float]) -> int:
    best, arg = values[0], 0
    for i in range(1, len(values)):
        if values[i] > best:
            best, arg = values[i], i
    return arg


def _thompson_loop(inp: PolicyInput, rng: np.random.Generator) -> _TSState:
    state = _TSState(inp)
    # posterior noise is drawn up front so that variants sharing a seed see the same draws
    z = rng.standard_normal((inp.n, inp.K)).tolist()
    for t in range(inp.n):
        theta = state.thetas(z[t])
        arm = _argmax(theta)
        state.update(arm, float(inp.env.pull(arm)))
    return state


def _finish(inp: PolicyInput, arm: int) -> Recommendation:
    counts = list(inp.env.counts)
    return Recommendation(int(arm), counts, sum(counts))


def run_ts_proportional(inp: PolicyInput, rng: np.random.Generator) -> Recommendation:
    """Thompson sampling; the recommendation is drawn proportionally to pull counts."""
    _thompson_loop(inp, rng)
    counts = np.asarray(inp.env.counts, dtype=float)
    arm = int(rng.choice(inp.K, p=counts / counts.sum()))
    return _finish(inp, arm)


def run_ts_map(inp: PolicyInput, rng: np.random.Generator) -> Recommendation:
    """Thompson sampling; recommends the highest final posterior mean."""
    state = _thompson_loop(inp, rng)
    return _finish(inp, _argmax(state.means))


def _challenger(state: _TSState, leader: int, theta: list[float], cap: int,
                rng: np.random.Generator) -> int:
    """First redraw whose leader differs from ``leader``; redraws come in growing blocks."""
    means = np.asarray(state.means)
    sds = np.asarray(state.sds)
    done, block = 0, 4
    while done < cap:
        block = min(block, cap - done)
        leaders = np.argmax(means + sds * rng.standard_normal((block, means.size)), axis=1)
        hit = np.flatnonzero(leaders != leader)
        if hit.size:
            return int(leaders[hit[0]])
        done += block
        block *= 4
    return sorted(range(len(theta)), key=lambda i: (-theta[i], i))[1]


def run_ttts(inp: PolicyInput, rng: np.random.Generator,
             params: TttsParams = TttsParams()) -> Recommendation:
    """Top-two Thompson sampling.

    With probability ``beta`` the posterior-sample leader is pulled; otherwise
    posterior samples are redrawn until a different arm leads. After
    ``resample_cap`` failed redraws the runner-up of the original sample is
    pulled. With two arms the challenger is simply the other arm.
    """
    K = inp.K
    state = _TSState(inp)
    z = rng.standard_normal((inp.n, K)).tolist()
    coins = rng.random(inp.n).tolist()
    for t in range(inp.n):
        theta = state.thetas(z[t])
        arm = leader = _argmax(theta)
        if coins[t] >= params.beta:
            if K == 2:
                arm = 1 - leader
            else:
                arm = _challenger(state, leader, theta, params.resample_cap, rng)
        state.update(arm, float(inp.env.pull(arm)))
    return _finish(inp, _argmax(state.means))


def biased_gap(r: int, i: int, j: int, mu: Sequence[float], nu: Sequence[float],
               sigma_sq: Sequence[float], sigma0_sq: float, n: float, R: int,
               active_set: Sequence[int]) -> float:
    """Squared-gap term of round ``r`` plus the prior bias term for arms i, j."""
    active = set(active_set)
    if i not in active or j not in active:
        raise IndexError(f"arms {i}, {j} must both be active")
    total = sum(sigma_sq[k] for k in active)
    d = mu[i] - mu[j]
    return n * d * d / (4 * R * total) + (nu[i] - nu[j]) * d / (2 * sigma0_sq)


POLICIES = {
    "bayes_elim": run_bayes_elim,
    "bayes_elim2": run_bayes_elim2,
    "freq_elim": run_freq_elim,
    "freq_elim2": run_freq_elim2,
    "ts": run_ts_proportional,
    "ts2": run_ts_map,
    "ttts": run_ttts,
}

ELIMINATION_POLICIES = ("bayes_elim", "bayes_elim2", "freq_elim", "freq_elim2")


@dataclass(frozen=True)
class PolicySpec:
    """A named policy plus its parameters; ``label`` identifies it in results."""

    name: str
    params: dict = field(default_factory=dict)
    label: str = ""

    def __post_init__(self):
        if self.name not in POLICIES:
            raise ValueError(f"unknown policy {self.name!r}; expected one of {sorted(POLICIES)}")
        if self.params and self.name != "ttts":
            raise ValueError(f"policy {self.name!r} takes no parameters")
        if self.name == "ttts":
            TttsParams(**self.params)
        if not self.label:
            object.__setattr__(self, "label", self.name)

    def __hash__(self):
        return hash((self.name, tuple(sorted(self.params.items())), self.label))

    @property
    def randomized(self) -> bool:
        return self.name not in ELIMINATION_POLICIES

    def run(self, inp: PolicyInput, rng: np.random.Generator | None) -> Recommendation:
        if self.name == "ttts":
            return run_ttts(inp, rng, TttsParams(**self.params))
        return POLICIES[self.name](inp, rng)
