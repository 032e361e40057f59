#!/usr/bin/env python3
"""Monte Carlo coverage of posterior-predictive intervals for the next gap.

    python scripts/coverage.py --n-events 100000 --length 8 --levels 0.5 0.8 0.9 0.95
"""

import argparse

from cdmpoisson.estimators import GammaHyperParams, fit_prior_empirical_bayes
from cdmpoisson.evaluation import predictive_coverage
from cdmpoisson.simulation import simulate_fixed_length


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n-events", type=int, default=100_000)
    ap.add_argument("--length", type=int, default=8, help="inter-arrivals per stream")
    ap.add_argument("--seed", type=int, default=3)
    ap.add_argument("--levels", type=float, nargs="+", default=[0.9])
    args = ap.parse_args()

    truth = GammaHyperParams(2.0, 0.5)
    _, train = simulate_fixed_length(truth, args.n_events, args.length, seed=args.seed + 1)
    prior = fit_prior_empirical_bayes(train).hyper
    _, streams = simulate_fixed_length(truth, args.n_events, args.length, seed=args.seed)
    for level in args.levels:
        cov, n = predictive_coverage(prior, streams, level)
        print(f"level {level:.3f}: coverage {cov:.5f} (n={n})")


if __name__ == "__main__":
    main()
