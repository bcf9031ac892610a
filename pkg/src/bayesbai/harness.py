"""Monte Carlo estimation of prior-averaged misidentification probability.

Determinism contract: every trial derives its random streams from
``(master_seed, policy label, n, trial_index)`` through :func:`mix64`, so a
row is bit-identical whatever the number of workers or the execution order.
The instance draw and the reward stream do not depend on the policy, so
policies compared at the same ``(n, trial_index)`` face the same instance;
elimination policies, which pull arms in a fixed order, also see the same
rewards (common random numbers).
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import yaml

from . import __version__
from .bounds import (
    BoundInput,
    bayes_elim_two_arm_bound,
    bayes_elim_upper_bound,
    freq_elim_upper_bound,
    two_arm_lower_bound,
)
from .core import (
    EmpiricalRewards,
    GaussianPrior,
    GaussianRewards,
    RewardModel,
    best_arm,
    draw_instance,
)
from .policies import (
    BudgetExceeded,
    BudgetTooSmall,
    MeteredEnvironment,
    PolicyInput,
    PolicySpec,
)

MASK64 = (1 << 64) - 1
_INSTANCE_TAG = 0x1D5_7A9CE


class ConfigError(ValueError):
    pass


class ExperimentAborted(RuntimeError):
    """A trial failed; estimates over the remaining trials would be biased."""


# -- seeding ---------------------------------------------------------------------

def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def mix64(*words: int) -> int:
    """Fold 64-bit words into one seed: h <- splitmix64(h ^ splitmix64(w))."""
    h = 0x6A09E667F3BCC908
    for w in words:
        h = _splitmix64(h ^ _splitmix64(int(w) & MASK64))
    return h


def label_hash(label: str) -> int:
    return int.from_bytes(hashlib.blake2b(label.encode(), digest_size=8).digest(), "little")


def _gen(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def trial_seeds(master_seed: int, label: str, n: int, trial_index: int) -> tuple[int, int]:
    """(policy seed, instance-and-reward seed) of one trial."""
    return (mix64(master_seed, label_hash(label), n, trial_index),
            mix64(master_seed, _INSTANCE_TAG, n, trial_index))


# -- records ---------------------------------------------------------------------

@dataclass(frozen=True)
class TrialSetup:
    prior: GaussianPrior
    model: RewardModel
    master_seed: int = 0


@dataclass(frozen=True)
class TrialRecord:
    policy: str
    n: int
    trial_index: int
    seed: int
    mu: tuple[float, ...]
    i_star: int
    J: int
    correct: bool
    pulls: tuple[int, ...]
    simple_regret: float
    failure: str | None = None


SUMMARY_FIELDS = ("policy", "n", "sigma0", "replications", "errors", "error_rate",
                  "ci_halfwidth", "mean_simple_regret", "theorem1_bound", "theorem2_bound",
                  "corollary_bound", "lower_bound", "seed")


@dataclass(frozen=True)
class SummaryRow:
    policy: str
    n: int
    sigma0: float
    replications: int
    errors: int
    error_rate: float
    ci_halfwidth: float
    mean_simple_regret: float
    theorem1_bound: float | None = None
    theorem2_bound: float | None = None
    corollary_bound: float | None = None
    lower_bound: float | None = None
    seed: int = 0

    @property
    def se(self) -> float:
        """Binomial standard error of ``error_rate``."""
        p = self.error_rate
        return math.sqrt(p * (1 - p) / self.replications)


# -- trials ----------------------------------------------------------------------

def run_trial(setup: TrialSetup, policy: PolicySpec, n: int, trial_index: int) -> TrialRecord:
    """One draw of the prior plus one policy run against a metered environment."""
    pseed, iseed = trial_seeds(setup.master_seed, policy.label, n, trial_index)
    world = _gen(iseed)
    instance = draw_instance(setup.prior, setup.model, world)
    env = MeteredEnvironment(instance, n, world)
    inp = PolicyInput(n, setup.prior, setup.model.sigma_sq, env)
    i_star = best_arm(instance.mu)
    try:
        rec = policy.run(inp, _gen(pseed) if policy.randomized else None)
    except (BudgetTooSmall, BudgetExceeded) as exc:
        return TrialRecord(policy.label, n, trial_index, pseed, instance.mu, i_star, -1,
                           False, tuple(env.counts), math.nan, f"{type(exc).__name__}: {exc}")
    J = rec.arm
    return TrialRecord(policy.label, n, trial_index, pseed, instance.mu, i_star, J,
                       J == i_star, tuple(rec.pulls), instance.mu[i_star] - instance.mu[J])


def _run_chunk(args):
    setup, policy, n, start, stop = args
    return [run_trial(setup, policy, n, t) for t in range(start, stop)]


def run_trials(setup: TrialSetup, policy: PolicySpec, n: int, replications: int,
               workers: int = 1) -> list[TrialRecord]:
    """All trials of one (policy, n) cell, ordered by trial index."""
    if workers <= 1 or replications < 2:
        return [run_trial(setup, policy, n, t) for t in range(replications)]
    size = max(1, math.ceil(replications / (4 * workers)))
    chunks = [(setup, policy, n, s, min(s + size, replications))
              for s in range(0, replications, size)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        out = []
        for part in pool.map(_run_chunk, chunks):
            out.extend(part)
    return out


def ci_halfwidth(errors: int, reps: int, method: str = "normal") -> float:
    """95% half-width; ``wilson`` returns half the Wilson interval length."""
    z = 1.96
    p = errors / reps
    if method == "normal":
        return z * math.sqrt(p * (1 - p) / reps)
    if method == "wilson":
        return z * math.sqrt(p * (1 - p) / reps + z * z / (4 * reps * reps)) / (1 + z * z / reps)
    raise ValueError(f"unknown CI method {method!r}")


def _bound_columns(setup: TrialSetup, policy: PolicySpec, n: int) -> dict:
    model = setup.model
    if not isinstance(model, GaussianRewards) or sum(model.sigma_sq) <= 0:
        return {}
    prior = setup.prior
    out = {}
    inp = BoundInput(prior.K, n, model.sigma_sq, prior.sigma0_sq, prior.nu)
    if policy.name == "bayes_elim":
        out["theorem1_bound"] = bayes_elim_upper_bound(inp)
    if policy.name == "freq_elim":
        out["theorem2_bound"] = freq_elim_upper_bound(inp)
    if prior.K == 2 and model.sigma_sq[0] == model.sigma_sq[1]:
        args = (n, model.sigma_sq[0], prior.sigma0_sq, *prior.nu)
        if policy.name == "bayes_elim":
            out["corollary_bound"] = bayes_elim_two_arm_bound(*args)
        out["lower_bound"] = two_arm_lower_bound(*args)
    return out


def summarize(records: Sequence[TrialRecord], setup: TrialSetup, policy: PolicySpec, n: int,
              ci_method: str = "normal") -> SummaryRow:
    if not records:
        raise ValueError("zero replications")
    failed = [r for r in records if r.failure]
    if failed:
        r = failed[0]
        raise ExperimentAborted(
            f"{len(failed)} of {len(records)} trials failed for {policy.label} at n={n}; "
            f"first: trial {r.trial_index}: {r.failure}")
    reps = len(records)
    errors = sum(1 for r in records if not r.correct)
    return SummaryRow(
        policy=policy.label, n=n, sigma0=math.sqrt(setup.prior.sigma0_sq),
        replications=reps, errors=errors, error_rate=errors / reps,
        ci_halfwidth=ci_halfwidth(errors, reps, ci_method),
        mean_simple_regret=math.fsum(r.simple_regret for r in records) / reps,
        seed=setup.master_seed, **_bound_columns(setup, policy, n))


# -- configuration ----------------------------------------------------------------

@dataclass
class ExperimentConfig:
    prior: GaussianPrior
    reward: RewardModel
    policies: list[PolicySpec]
    budgets: list[int]
    sigma0_grid: list[float] | None = None
    replications: int = 5000
    master_seed: int = 0
    ci_method: str = "normal"
    csv_path: str | None = None
    json_path: str | None = None
    source: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.replications < 1:
            raise ConfigError("replications must be >= 1")
        if any(int(n) != n or n < 1 for n in self.budgets):
            raise ConfigError("budgets must be integers >= 1")
        self.budgets = [int(n) for n in self.budgets]
        if self.sigma0_grid is not None and any(not s > 0 for s in self.sigma0_grid):
            raise ConfigError("sigma0_grid values must be > 0")
        if self.prior.K != self.reward.K:
            raise ConfigError(f"prior has {self.prior.K} arms, rewards have {self.reward.K}")
        if self.ci_method not in ("normal", "wilson"):
            raise ConfigError(f"ci_method must be normal or wilson, got {self.ci_method!r}")
        if not 0 <= self.master_seed <= MASK64:
            raise ConfigError("master_seed must be a 64-bit unsigned integer")

    def setup(self, sigma0: float | None = None) -> TrialSetup:
        prior = self.prior if sigma0 is None else self.prior.with_sigma0_sq(sigma0 ** 2)
        return TrialSetup(prior, self.reward, self.master_seed)

    def checksum(self) -> str:
        blob = json.dumps(self.source or _describe(self), sort_keys=True, default=str)
        return hashlib.sha256(blob.encode()).hexdigest()


def _describe(cfg: ExperimentConfig) -> dict:
    reward = ({"kind": "gaussian", "sigma_sq": list(cfg.reward.sigma_sq)}
              if isinstance(cfg.reward, GaussianRewards) else
              {"kind": "empirical", "pools": [p.tolist() for p in cfg.reward.pools],
               "assumed_sigma_sq": list(cfg.reward.assumed_sigma_sq),
               "recenter": cfg.reward.recenter})
    return {
        "prior": {"nu": list(cfg.prior.nu), "sigma0_sq": cfg.prior.sigma0_sq},
        "reward": reward,
        "policies": [{"name": p.name, "label": p.label, **p.params} for p in cfg.policies],
        "budgets": cfg.budgets, "sigma0_grid": cfg.sigma0_grid,
        "replications": cfg.replications, "master_seed": cfg.master_seed,
        "ci_method": cfg.ci_method,
    }


_TOP_KEYS = {"prior", "reward", "policies", "budgets", "sigma0_grid", "replications",
             "master_seed", "ci_method", "output"}


def _check_keys(section: str, d, allowed: set[str]) -> None:
    if not isinstance(d, dict):
        raise ConfigError(f"{section} must be a mapping")
    unknown = sorted(set(d) - allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) in {section}: {', '.join(unknown)}")


def _floats(name: str, x, K: int | None = None) -> tuple[float, ...]:
    if isinstance(x, (int, float)):
        if K is None:
            raise ConfigError(f"{name} must be a list")
        return (float(x),) * K
    try:
        vals = tuple(float(v) for v in x)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name} must be a list of numbers") from exc
    if K is not None and len(vals) != K:
        raise ConfigError(f"{name} has {len(vals)} entries, expected {K}")
    return vals


def config_from_dict(d: dict, base_dir: str | Path = ".") -> ExperimentConfig:
    """Build an :class:`ExperimentConfig`; unknown keys anywhere are errors."""
    _check_keys("config", d, _TOP_KEYS)
    for key in ("prior", "reward", "policies", "budgets"):
        if key not in d:
            raise ConfigError(f"missing required key: {key}")
    p, r = d["prior"], d["reward"]
    _check_keys("prior", p, {"nu", "sigma0", "sigma0_sq"})
    _check_keys("reward", r, {"kind", "sigma_sq", "path", "assumed_sigma_sq", "recenter"})
    if ("sigma0" in p) == ("sigma0_sq" in p):
        raise ConfigError("prior needs exactly one of sigma0, sigma0_sq")
    sigma0_sq = float(p["sigma0"]) ** 2 if "sigma0" in p else float(p["sigma0_sq"])

    kind = r.get("kind", "gaussian")
    try:
        if kind == "gaussian":
            if set(r) - {"kind", "sigma_sq"}:
                raise ConfigError("gaussian rewards take only sigma_sq")
            if "nu" not in p:
                raise ConfigError("prior.nu is required for gaussian rewards")
            nu = _floats("prior.nu", p["nu"])
            reward = GaussianRewards(_floats("reward.sigma_sq", r.get("sigma_sq"), len(nu)))
        elif kind == "empirical":
            if set(r) - {"kind", "path", "assumed_sigma_sq", "recenter"} or "path" not in r:
                raise ConfigError("empirical rewards take path, assumed_sigma_sq, recenter")
            pools = load_empirical_rewards(Path(base_dir) / r["path"])
            K = len(pools)
            assumed = (_floats("reward.assumed_sigma_sq", r["assumed_sigma_sq"], K)
                       if "assumed_sigma_sq" in r else tuple(float(np.var(x)) for x in pools))
            reward = EmpiricalRewards(pools, assumed, bool(r.get("recenter", True)))
            nu = _floats("prior.nu", p["nu"], K) if "nu" in p else reward.pool_means
        else:
            raise ConfigError(f"unknown reward kind {kind!r}")
        prior = GaussianPrior(nu, sigma0_sq)
        policies = []
        for item in d["policies"]:
            if isinstance(item, str):
                item = {"name": item}
            _check_keys("policy", item, {"name", "label", "beta", "resample_cap"})
            params = {k: item[k] for k in ("beta", "resample_cap") if k in item}
            policies.append(PolicySpec(item["name"], params, item.get("label", "")))
    except ConfigError:
        raise
    except (ValueError, KeyError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc
    labels = [pol.label for pol in policies]
    if len(set(labels)) != len(labels):
        raise ConfigError(f"policy labels must be unique: {labels}")

    out = d.get("output") or {}
    _check_keys("output", out, {"csv", "json"})
    grid = d.get("sigma0_grid")
    return ExperimentConfig(
        prior=prior, reward=reward, policies=policies,
        budgets=list(d["budgets"]),
        sigma0_grid=None if grid is None else [float(s) for s in grid],
        replications=int(d.get("replications", 5000)),
        master_seed=int(d.get("master_seed", 0)),
        ci_method=d.get("ci_method", "normal"),
        csv_path=out.get("csv"), json_path=out.get("json"),
        source=d,
    )


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        d = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return config_from_dict(d or {}, base_dir=path.parent)


# -- estimation and sweeps ----------------------------------------------------------

def estimate(config: ExperimentConfig, policy: PolicySpec, n: int,
             sigma0: float | None = None, workers: int = 1) -> SummaryRow:
    """Error rate, CI and simple regret of one policy at budget ``n``."""
    setup = config.setup(sigma0)
    records = run_trials(setup, policy, n, config.replications, workers)
    return summarize(records, setup, policy, n, config.ci_method)


def sweep_budget(config: ExperimentConfig, workers: int = 1) -> list[SummaryRow]:
    return [estimate(config, pol, n, workers=workers)
            for pol in config.policies for n in config.budgets]


def sweep_sigma0(config: ExperimentConfig, workers: int = 1) -> list[SummaryRow]:
    """One row per (policy, n, sigma0); prior means stay fixed."""
    if not config.sigma0_grid:
        raise ConfigError("sigma0_grid is empty")
    return [estimate(config, pol, n, sigma0=s, workers=workers)
            for pol in config.policies for n in config.budgets for s in config.sigma0_grid]


# -- empirical rewards ---------------------------------------------------------------

def load_empirical_rewards(path: str | Path) -> list[np.ndarray]:
    """Per-arm reward pools from a two-column ``arm_index reward`` text file.

    Lines starting with ``#`` and blank lines are skipped. Arms must be
    numbered 0..K-1 without gaps.
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"rewards file not found: {path}")
    pools: dict[int, list[float]] = {}
    with path.open() as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ConfigError(f"{path}:{lineno}: expected 'arm_index reward', got {line!r}")
            try:
                arm, x = int(parts[0]), float(parts[1])
            except ValueError:
                raise ConfigError(f"{path}:{lineno}: cannot parse {line!r}") from None
            if arm < 0 or not math.isfinite(x):
                raise ConfigError(f"{path}:{lineno}: invalid arm or reward in {line!r}")
            pools.setdefault(arm, []).append(x)
    if not pools:
        raise ConfigError(f"{path}: no observations")
    K = max(pools) + 1
    empty = [k for k in range(K) if k not in pools]
    if empty:
        raise ConfigError(f"{path}: empty pool for arm(s) {empty}")
    return [np.asarray(pools[k]) for k in range(K)]


def empirical_model(path: str | Path, assumed_sigma_sq: Sequence[float],
                    recenter: bool = False) -> EmpiricalRewards:
    return EmpiricalRewards(load_empirical_rewards(path), assumed_sigma_sq, recenter)


# -- persistence ---------------------------------------------------------------------

def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def rows_to_csv(rows: Iterable[SummaryRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SUMMARY_FIELDS)
    for row in rows:
        w.writerow([_fmt(getattr(row, f)) for f in SUMMARY_FIELDS])
    return buf.getvalue()


def rows_to_json(rows: Iterable[SummaryRow], metadata: dict) -> str:
    payload = {"metadata": metadata, "rows": [asdict(r) for r in rows]}
    return json.dumps(payload, indent=2, allow_nan=True) + "\n"


def read_rows_json(path: str | Path) -> tuple[dict, list[SummaryRow]]:
    payload = json.loads(Path(path).read_text())
    return payload["metadata"], [SummaryRow(**r) for r in payload["rows"]]


def read_rows_csv(path: str | Path) -> list[SummaryRow]:
    types = {f.name: f.type for f in fields(SummaryRow)}
    rows = []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            vals = {}
            for k, v in rec.items():
                if v == "":
                    vals[k] = None
                elif types[k] == "int":
                    vals[k] = int(v)
                elif types[k] == "str":
                    vals[k] = v
                else:
                    vals[k] = float(v)
            rows.append(SummaryRow(**vals))
    return rows


def write_results(rows: Sequence[SummaryRow], csv_path: str | Path | None = None,
                  json_path: str | Path | None = None, *, master_seed: int = 0,
                  config_checksum: str = "") -> list[Path]:
    """Write CSV and/or JSON; output is a pure function of the rows and metadata."""
    written = []
    if csv_path is not None:
        p = Path(csv_path)
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(rows_to_csv(rows))
        written.append(p)
    if json_path is not None:
        p = Path(json_path)
        p.parent.mkdir(parents=True, exist_ok=True)
        meta = {"version": __version__, "master_seed": master_seed,
                "config_checksum": config_checksum}
        p.write_text(rows_to_json(rows, meta))
        written.append(p)
    return written


def default_workers() -> int:
    return max(1, os.cpu_count() or 1)

