"""Two-armed BayesElim error against its upper and lower bounds, plus the log-log slope.

    python scripts/two_arm_sandwich.py --replications 20000
"""
import argparse

import numpy as np

from bayesbai.core import GaussianPrior, GaussianRewards
from bayesbai.harness import ExperimentConfig, sweep_budget, write_results
from bayesbai.policies import PolicySpec


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--budgets", type=int, nargs="+",
                        default=[8, 16, 32, 64, 128, 256, 512, 1024, 2048, 4096])
    parser.add_argument("--sigma", type=float, default=0.5)
    parser.add_argument("--sigma0", type=float, default=0.5)
    parser.add_argument("--nu", type=float, nargs=2, default=[0.5, 0.0])
    parser.add_argument("--replications", type=int, default=20000)
    parser.add_argument("--master-seed", type=int, default=0)
    parser.add_argument("--threads", type=int, default=1)
    parser.add_argument("--csv", default=None)
    args = parser.parse_args()

    cfg = ExperimentConfig(GaussianPrior(args.nu, args.sigma0 ** 2),
                           GaussianRewards((args.sigma ** 2,) * 2), [PolicySpec("bayes_elim")],
                           args.budgets, replications=args.replications,
                           master_seed=args.master_seed)
    rows = sweep_budget(cfg, args.threads)
    print(f"{'n':>6} {'lower':>9} {'error':>9} {'se':>8} {'upper':>9}  inside")
    for r in rows:
        inside = r.lower_bound - 3 * r.se <= r.error_rate <= r.corollary_bound + 3 * r.se
        print(f"{r.n:6d} {r.lower_bound:9.5f} {r.error_rate:9.5f} {r.se:8.5f} "
              f"{r.corollary_bound:9.5f}  {inside}")
    big = [r for r in rows if r.n >= 64 and r.error_rate > 0]
    if len(big) >= 2:
        slope = np.polyfit(np.log([r.n for r in big]), np.log([r.error_rate for r in big]), 1)[0]
        print(f"log-log slope over n >= 64: {slope:.3f}")
    if args.csv:
        write_results(rows, args.csv, master_seed=args.master_seed)


if __name__ == "__main__":
    main()
