"""Synthetic eight-armed experiments: budget sweep (1a) and prior-width sweep (1b).

Besides running the sweeps this module holds the ordering checks reported in
the summary text and asserted by the acceptance suite.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .core import GaussianPrior, GaussianRewards
from .harness import ExperimentConfig, SummaryRow, sweep_budget, sweep_sigma0, write_results
from .policies import POLICIES, PolicySpec

NU = tuple(2.0 ** -i for i in range(8))
SIGMA = 0.5
SIGMA0 = 0.5
BUDGETS = (56, 112, 224, 448, 896, 1792)
SIGMA0_GRID = (0.125, 0.25, 0.5, 1.0, 2.0)
FIXED_N = 448
FIGURES = ("1a", "1b")


def figure_config(fig_id: str, replications: int = 5000, master_seed: int = 0,
                  policies: Sequence[str] | None = None) -> ExperimentConfig:
    if fig_id not in FIGURES:
        raise ValueError(f"unknown figure {fig_id!r}; expected one of {FIGURES}")
    names = list(POLICIES) if policies is None else list(policies)
    return ExperimentConfig(
        prior=GaussianPrior(NU, SIGMA0 ** 2),
        reward=GaussianRewards((SIGMA ** 2,) * len(NU)),
        policies=[PolicySpec(p) for p in names],
        budgets=list(BUDGETS) if fig_id == "1a" else [FIXED_N],
        sigma0_grid=None if fig_id == "1a" else list(SIGMA0_GRID),
        replications=replications,
        master_seed=master_seed,
    )


def run_figure(fig_id: str, replications: int = 5000, master_seed: int = 0,
               workers: int = 1, policies: Sequence[str] | None = None) -> list[SummaryRow]:
    cfg = figure_config(fig_id, replications, master_seed, policies)
    return sweep_budget(cfg, workers) if fig_id == "1a" else sweep_sigma0(cfg, workers)


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: {self.detail}"


def _index(rows: Sequence[SummaryRow], key: str) -> dict:
    return {(r.policy, getattr(r, key)): r for r in rows}


def _separated(better: SummaryRow, worse: SummaryRow) -> bool:
    """95% intervals do not overlap, ``better`` below ``worse``."""
    return better.error_rate + better.ci_halfwidth < worse.error_rate - worse.ci_halfwidth


PAIRS = (("bayes_elim", "freq_elim"), ("bayes_elim2", "freq_elim2"))


def budget_checks(rows: Sequence[SummaryRow]) -> list[Check]:
    """Bayesian elimination at least as good as its frequentist twin at every budget."""
    idx = _index(rows, "n")
    budgets = sorted({r.n for r in rows})
    checks = []
    if not budgets:
        return checks
    for bayes, freq in PAIRS:
        if (bayes, budgets[0]) not in idx or (freq, budgets[0]) not in idx:
            continue
        bad = [n for n in budgets if idx[bayes, n].error_rate > idx[freq, n].error_rate]
        checks.append(Check(f"{bayes} <= {freq} at every budget", not bad,
                            "violated at n=" + ",".join(map(str, bad)) if bad else
                            f"{len(budgets)} budgets"))
        for n in budgets[:2]:
            b, f = idx[bayes, n], idx[freq, n]
            checks.append(Check(
                f"{bayes} < {freq} with CI separation at n={n}", _separated(b, f),
                f"{b.error_rate:.4f}+-{b.ci_halfwidth:.4f} vs {f.error_rate:.4f}+-{f.ci_halfwidth:.4f}"))
    if ("bayes_elim", budgets[0]) not in idx or ("freq_elim", budgets[0]) not in idx:
        return checks
    b0, f0 = idx["bayes_elim", budgets[0]], idx["freq_elim", budgets[0]]
    b1, f1 = idx["bayes_elim", budgets[-1]], idx["freq_elim", budgets[-1]]
    g0, g1 = f0.error_rate - b0.error_rate, f1.error_rate - b1.error_rate
    checks.append(Check("bayes/freq gap shrinks from smallest to largest budget", g1 < g0,
                        f"gap {g0:.4f} at n={budgets[0]}, {g1:.4f} at n={budgets[-1]}"))
    return checks


def sigma0_checks(rows: Sequence[SummaryRow]) -> list[Check]:
    """BayesElim error nondecreasing in prior width; the Bayes advantage shrinks."""
    idx = _index(rows, "sigma0")
    grid = sorted({r.sigma0 for r in rows})
    if not grid or ("bayes_elim", grid[0]) not in idx:
        return []
    errs = [idx["bayes_elim", s] for s in grid]
    drops = []
    for a, b in zip(errs, errs[1:]):
        slack = 2 * math.hypot(a.se, b.se)
        if b.error_rate < a.error_rate - slack:
            drops.append(f"{a.sigma0}->{b.sigma0}: {a.error_rate:.4f}->{b.error_rate:.4f}")
    checks = [Check("bayes_elim error nondecreasing in sigma0 (2 SE slack)", not drops,
                    "; ".join(drops) if drops else
                    ", ".join(f"{e.error_rate:.4f}" for e in errs))]

    def gap(s):
        b, f = idx["bayes_elim", s], idx["freq_elim", s]
        return f.error_rate - b.error_rate, math.hypot(b.ci_halfwidth, f.ci_halfwidth)

    if ("freq_elim", grid[0]) not in idx:
        return checks
    (g_lo, h_lo), (g_hi, h_hi) = gap(grid[0]), gap(grid[-1])
    checks.append(Check(
        f"bayes/freq gap at sigma0={grid[0]} exceeds gap at sigma0={grid[-1]} with CI separation",
        g_lo - h_lo > g_hi + h_hi,
        f"{g_lo:.4f}+-{h_lo:.4f} vs {g_hi:.4f}+-{h_hi:.4f}"))
    return checks


def upper_bound_checks(rows: Sequence[SummaryRow]) -> list[Check]:
    """BayesElim error below min(1, upper bound) + 3 SE on every row carrying the bound."""
    if not any(r.policy == "bayes_elim" for r in rows):
        return []
    bad = [r for r in rows if r.policy == "bayes_elim" and r.theorem1_bound is not None
           and r.error_rate > min(1.0, r.theorem1_bound) + 3 * r.se]
    n_rows = sum(1 for r in rows if r.policy == "bayes_elim" and r.theorem1_bound is not None)
    return [Check("bayes_elim error <= min(1, upper bound) + 3 SE", not bad and n_rows > 0,
                  f"{n_rows} rows" if not bad else
                  "; ".join(f"n={r.n} sigma0={r.sigma0}: {r.error_rate:.4f}" for r in bad))]


def figure_checks(fig_id: str, rows: Sequence[SummaryRow]) -> list[Check]:
    checks = budget_checks(rows) if fig_id == "1a" else sigma0_checks(rows)
    return checks + upper_bound_checks(rows)


def summary_text(fig_id: str, rows: Sequence[SummaryRow]) -> str:
    lines = [f"figure {fig_id}: K={len(NU)}, nu_i=2^-i, sigma={SIGMA}",
             f"replications={rows[0].replications} master_seed={rows[0].seed}" if rows else "",
             ""]
    for r in rows:
        lines.append(f"{r.policy:12s} n={r.n:5d} sigma0={r.sigma0:<6g} "
                     f"error={r.error_rate:.4f} +- {r.ci_halfwidth:.4f}")
    lines.append("")
    lines.extend(c.line() for c in figure_checks(fig_id, rows))
    return "\n".join(lines) + "\n"


def reproduce_fig(fig_id: str, replications: int = 5000, master_seed: int = 0,
                  out_dir: str | Path = "results", workers: int = 1,
                  policies: Sequence[str] | None = None) -> list[Path]:
    """Run one figure and write ``fig<id>.csv``, ``fig<id>.json`` and a summary."""
    cfg = figure_config(fig_id, replications, master_seed, policies)
    rows = run_figure(fig_id, replications, master_seed, workers, policies)
    out = Path(out_dir)
    paths = write_results(rows, out / f"fig{fig_id}.csv", out / f"fig{fig_id}.json",
                          master_seed=master_seed, config_checksum=cfg.checksum())
    summary = out / f"fig{fig_id}_summary.txt"
    summary.write_text(summary_text(fig_id, rows))
    return paths + [summary]
