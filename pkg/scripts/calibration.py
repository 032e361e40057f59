#!/usr/bin/env python3
"""Binned calibration of P(new CDM before the decision deadline).

    python scripts/calibration.py --n-events 100000 --seed 42
    python scripts/calibration.py --window-origin last_cdm --probability plugin

The second form scores the window from the last CDM before the cutoff with
the MAP plug-in rate; on simulated data it comes out visibly miscalibrated,
which is why the default starts the window at the cutoff.
"""

import argparse

from cdmpoisson.arrival import events_to_interarrivals
from cdmpoisson.estimators import GammaHyperParams, fit_prior_empirical_bayes
from cdmpoisson.evaluation import EvalConfig, calibration_table
from cdmpoisson.ingestion import split_events
from cdmpoisson.simulation import SimConfig, simulate_events


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n-events", type=int, default=100_000)
    ap.add_argument("--seed", type=int, default=42)
    ap.add_argument("--bins", type=int, default=6)
    ap.add_argument("--window-origin", choices=["decision", "last_cdm"], default="decision")
    ap.add_argument("--probability", choices=["predictive", "plugin"], default="predictive")
    ap.add_argument("--min-history", type=int, default=1)
    args = ap.parse_args()

    events = simulate_events(SimConfig(GammaHyperParams(2.0, 0.5), args.n_events, seed=args.seed))
    train, test = split_events(events, 0.5, seed=args.seed)
    prior = fit_prior_empirical_bayes(events_to_interarrivals(train)).hyper
    config = EvalConfig(n_bins=args.bins, window_origin=args.window_origin,
                        probability=args.probability, min_history=args.min_history)
    print(f"{'bin':>15} {'estimated':>10} {'empirical':>10} {'deviation':>10} {'n':>7}")
    for r in calibration_table(test, prior, config):
        print(f"({r.bin_lo:.3f},{r.bin_hi:.3f}] {r.mean_estimated:10.4f} {r.empirical:10.4f} "
              f"{r.deviation:+10.4f} {r.n_events:7d}")


if __name__ == "__main__":
    main()
