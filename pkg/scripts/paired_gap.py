"""Paired Bayes-minus-frequentist error difference on common instances and rewards.

Elimination policies see identical instances and reward streams for the same
(n, trial), so the per-trial difference of error indicators has a much smaller
variance than the difference of two independent error rates.

    python scripts/paired_gap.py --budgets 56 112 --replications 100000
"""
import argparse
import math

from bayesbai.harness import run_trials
from bayesbai.policies import PolicySpec
from bayesbai.reproduce import FIXED_N, figure_config


def paired(setup, a, b, n, reps, threads):
    ra = run_trials(setup, PolicySpec(a), n, reps, threads)
    rb = run_trials(setup, PolicySpec(b), n, reps, threads)
    d = [(not x.correct) - (not y.correct) for x, y in zip(ra, rb)]
    m = math.fsum(d) / reps
    sd = math.sqrt(math.fsum((v - m) ** 2 for v in d) / (reps - 1))
    return 1 - sum(x.correct for x in ra) / reps, 1 - sum(y.correct for y in rb) / reps, m, \
        1.96 * sd / math.sqrt(reps)


def main():
    parser = argparse.ArgumentParser(description="Paired elimination error differences, K=8.")
    parser.add_argument("--budgets", type=int, nargs="*", default=[56, 112, 1792])
    parser.add_argument("--sigma0-grid", type=float, nargs="*", default=[0.125, 0.5, 2.0])
    parser.add_argument("--replications", type=int, default=20000)
    parser.add_argument("--master-seed", type=int, default=99)
    parser.add_argument("--threads", type=int, default=1)
    args = parser.parse_args()

    pairs = (("bayes_elim", "freq_elim"), ("bayes_elim2", "freq_elim2"))
    setup = figure_config("1a", master_seed=args.master_seed).setup()
    for n in args.budgets:
        for a, b in pairs:
            pa, pb, m, h = paired(setup, a, b, n, args.replications, args.threads)
            print(f"n={n:5d} {a} {pa:.4f} {b} {pb:.4f} diff {m:+.4f} +- {h:.4f}")
    cfg = figure_config("1b", master_seed=args.master_seed)
    for s in args.sigma0_grid:
        pa, pb, m, h = paired(cfg.setup(s), *pairs[0], FIXED_N, args.replications, args.threads)
        print(f"sigma0={s:<6g} bayes_elim {pa:.4f} freq_elim {pb:.4f} diff {m:+.4f} +- {h:.4f}")


if __name__ == "__main__":
    main()
