#!/usr/bin/env python3
"""Next-CDM prediction error of the three models on a synthetic corpus.

    python scripts/model_comparison.py --n-events 50000 --seed 7

Prints MAE/MSE/RMSE per model; pass --real PATH to score a CSV corpus instead.
"""

import argparse

from cdmpoisson.arrival import events_to_interarrivals
from cdmpoisson.estimators import GammaHyperParams, fit_prior_empirical_bayes
from cdmpoisson.evaluation import MODELS, EvalConfig, compute_metrics, predict_next_all
from cdmpoisson.ingestion import read_events, split_events
from cdmpoisson.simulation import SimConfig, simulate_events


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n-events", type=int, default=50_000)
    ap.add_argument("--alpha", type=float, default=2.0)
    ap.add_argument("--beta", type=float, default=0.5)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--mode", choices=["final_holdout", "rolling"], default="final_holdout")
    ap.add_argument("--real", help="CSV corpus (event_id,time_to_tca) instead of simulation")
    args = ap.parse_args()

    if args.real:
        events, _ = read_events(args.real)
        censor = False
    else:
        events = simulate_events(SimConfig(GammaHyperParams(args.alpha, args.beta),
                                           args.n_events, seed=args.seed))
        censor = True
    train, test = split_events(events, 0.5, seed=args.seed)
    fit = fit_prior_empirical_bayes(events_to_interarrivals(train, censor=censor))
    print(f"prior alpha={fit.hyper.alpha:.5f} beta={fit.hyper.beta:.5f} "
          f"converged={fit.converged} train={len(train)} test={len(test)}")
    preds = predict_next_all(MODELS, fit.hyper, test, EvalConfig(mode=args.mode))
    print(f"{'model':<10} {'MAE':>9} {'MSE':>9} {'RMSE':>9} {'n':>7}")
    for name in MODELS:
        m = compute_metrics([(r.predicted, r.observed) for r in preds.for_model(name)], name)
        print(f"{name:<10} {m.mae:9.5f} {m.mse:9.5f} {m.rmse:9.5f} {m.n_predictions:7d}")
    print(f"skipped targets: {preds.skipped}")


if __name__ == "__main__":
    main()
