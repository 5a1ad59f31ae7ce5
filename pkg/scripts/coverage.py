"""Monte Carlo check of the finite-sample acceptance guarantee."""

import argparse
import math

from vaeinf.calibration import coverage_simulation, order_index

CASES = [(9, 0.1), (19, 0.05), (99, 0.05), (99, 0.01), (999, 0.01), (999, 0.001)]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--trials", type=int, default=20_000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    print(f"{'n_cal':>6} {'delta':>6} {'k':>5} {'exact':>8} {'empirical':>10} {'3 sigma':>8}  ok")
    for n, delta in CASES:
        k = order_index(n, delta)
        p = k / (n + 1)
        sigma = math.sqrt(p * (1 - p) / args.trials)
        rate = coverage_simulation(n, delta, args.trials, args.seed)
        ok = abs(rate - p) <= 3 * sigma and rate >= 1 - delta - 3 * sigma
        print(f"{n:6d} {delta:6g} {k:5d} {p:8.4f} {rate:10.4f} {3 * sigma:8.4f}  {ok}")


if __name__ == "__main__":
    main()
