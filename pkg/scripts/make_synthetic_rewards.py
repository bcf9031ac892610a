"""Write a two-column rewards file of multimodal per-arm samples for the empirical mode.

Each arm draws from a two-component Gaussian mixture, a stand-in for
simulator outputs whose distributions are far from Gaussian.
"""
import argparse

import numpy as np


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--arms", type=int, default=7)
    parser.add_argument("--per-arm", type=int, default=300)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", default="data/multimodal_rewards.txt")
    args = parser.parse_args()

    rng = np.random.default_rng(args.seed)
    lines = ["# arm_index reward"]
    for arm in range(args.arms):
        lo, hi = rng.uniform(0.5, 1.5), rng.uniform(2.0, 3.5)
        w = rng.uniform(0.2, 0.8)
        pick = rng.random(args.per_arm) < w
        x = np.where(pick, rng.normal(lo, 0.2, args.per_arm), rng.normal(hi, 0.3, args.per_arm))
        lines += [f"{arm} {v:.6f}" for v in x.tolist()]
    with open(args.out, "w") as fh:
        fh.write("\n".join(lines) + "\n")


if __name__ == "__main__":
    main()
