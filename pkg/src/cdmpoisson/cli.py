"""Command-line entry point: ``cdmpoisson {simulate,fit,predict,evaluate,calibrate}``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 prior fit did not converge.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import math
import sys

from . import __version__
from .arrival import (CdmEvent, DecisionWindow, events_to_interarrivals, expected_next_arrival,
                      credible_interval_next, inter_arrivals, prob_message_before,
                      prob_message_before_predictive)
from .errors import CdmError, DomainError, EstimationError
from .estimators import (FitConfig, FitReport, GammaHyperParams, fit_prior_empirical_bayes,
                         load_prior, map_rate, posterior_mean_rate, posterior_update)
from .evaluation import (MODELS, EvalConfig, Report, build_report, calibration_table,
                         predict_next_all, write_report)
from .ingestion import ColumnMapping, IngestReport, read_events, split_events, write_csv
from .simulation import SimConfig, simulate_events

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NOT_CONVERGED = 0, 1, 2, 3

log = logging.getLogger("cdmpoisson")


class UsageError(CdmError):
    pass


class DataError(CdmError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _finite(text: str) -> float:
    value = float(text)
    if not math.isfinite(value):
        raise argparse.ArgumentTypeError(f"{text!r} is not a finite number")
    return value


def _positive(text: str) -> float:
    value = _finite(text)
    if value <= 0:
        raise argparse.ArgumentTypeError(f"{text!r} must be > 0")
    return value


def _fraction(text: str) -> float:
    value = _finite(text)
    if not 0 < value < 1:
        raise argparse.ArgumentTypeError(f"{text!r} must lie strictly between 0 and 1")
    return value


def _count(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"{text!r} must be >= 1")
    return value


def _columns(p):
    p.add_argument("--col-event-id", default="event_id")
    p.add_argument("--col-time-to-tca", default="time_to_tca")
    p.add_argument("--ingest-report", metavar="PATH",
                   help="write the ingestion report JSON here instead of stderr")


def _t_sec(p):
    p.add_argument("--t-sec", type=_positive, default=1.3,
                   help="decision deadline, days before TCA (default 1.3)")


def _censor(p):
    p.add_argument("--censor-tail", action="store_true",
                   help="count the quiet time between the last CDM and the deadline as exposure")


def _eval_opts(p):
    _t_sec(p)
    p.add_argument("--decision-cutoff", type=_positive, default=2.0,
                   help="reference CDM must be at least this many days before TCA (default 2.0)")
    p.add_argument("--bins", type=_count, default=6)
    p.add_argument("--rate-estimator", choices=["map", "posterior-mean"], default="map")
    p.add_argument("--probability", choices=["predictive", "plugin"], default="predictive",
                   help="calibration probability: rate integrated out, or plug-in rate")
    p.add_argument("--window-origin", choices=["decision", "last-cdm"], default="decision",
                   help="calibration window starts at the decision cutoff or at the reference CDM")
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.add_argument("--out-prefix", required=True)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cdmpoisson", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="write a synthetic CDM corpus as CSV")
    p.add_argument("--alpha", type=_positive, required=True)
    p.add_argument("--beta", type=_positive, required=True)
    p.add_argument("--n-events", type=_count, required=True)
    p.add_argument("--horizon", type=_positive, default=7.0)
    p.add_argument("--seed", type=int, default=0)
    _t_sec(p)
    p.add_argument("--out", required=True)

    p = sub.add_parser("fit", help="fit the Gamma prior by empirical Bayes")
    p.add_argument("--train", "--data", dest="train", required=True)
    p.add_argument("--out", "--prior", dest="out", required=True)
    p.add_argument("--max-iters", type=_count, default=500)
    p.add_argument("--grad-tol", type=_positive, default=1e-8)
    _t_sec(p)
    _censor(p)
    _columns(p)

    p = sub.add_parser("predict", help="per-event next-CDM predictions as JSON lines")
    p.add_argument("--prior", required=True)
    p.add_argument("--data", required=True)
    _t_sec(p)
    p.add_argument("--level", type=_fraction, default=0.9)
    p.add_argument("--rate-estimator", choices=["map", "posterior-mean"], default="map")
    p.add_argument("--interval", choices=["predictive", "plugin"], default="predictive")
    p.add_argument("--out", help="output path (default stdout)")
    _columns(p)

    p = sub.add_parser("evaluate", help="score the three models on held-out events")
    p.add_argument("--data", help="full corpus, split by --test-fraction/--seed")
    p.add_argument("--train")
    p.add_argument("--test")
    p.add_argument("--prior", help="use this prior instead of fitting on the training split")
    p.add_argument("--test-fraction", type=_fraction, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mode", choices=["final-holdout", "rolling"], default="final-holdout")
    p.add_argument("--hist-bins", type=_count, default=50)
    p.add_argument("--max-iters", type=_count, default=500)
    p.add_argument("--grad-tol", type=_positive, default=1e-8)
    _censor(p)
    _eval_opts(p)
    _columns(p)

    p = sub.add_parser("calibrate", help="binned calibration of the deadline probability")
    p.add_argument("--prior", required=True)
    p.add_argument("--data", required=True)
    _eval_opts(p)
    _columns(p)
    return parser


def _load(path: str, args, censor_t_sec: float | None = None) -> list[CdmEvent]:
    schema = ColumnMapping(args.col_event_id, args.col_time_to_tca)
    try:
        events, report = read_events(path, schema)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    except CdmError as exc:
        raise DataError(f"{path}: {exc}") from exc
    _emit_ingest(report, path, args)
    if not events:
        raise DataError(f"{path}: no usable events (need >= 2 distinct CDMs per event)")
    if censor_t_sec is not None:
        events = [dataclasses.replace(e, observed_until=e.tca_offset - censor_t_sec)
                  for e in events]
    return events


def _emit_ingest(report: IngestReport, path: str, args) -> None:
    doc = {"source": path, **report.to_dict()}
    if args.ingest_report:
        with open(args.ingest_report, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(doc, sort_keys=True) + "\n")
    else:
        print(json.dumps(doc, sort_keys=True), file=sys.stderr)


def _fit(events: list[CdmEvent], args) -> FitReport:
    try:
        return fit_prior_empirical_bayes(events_to_interarrivals(events),
                                         FitConfig(max_iters=getattr(args, "max_iters", 500),
                                                   grad_tol=getattr(args, "grad_tol", 1e-8)))
    except CdmError as exc:
        raise DataError(str(exc)) from exc


def _write_prior(report: FitReport, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(report.to_json())


def _read_prior(path: str) -> GammaHyperParams:
    try:
        return load_prior(path)
    except (OSError, ValueError) as exc:
        raise DataError(f"cannot load prior {path}: {exc}") from exc


def _eval_config(args, mode: str = "final_holdout") -> EvalConfig:
    try:
        return EvalConfig(mode=mode, t_sec_days=args.t_sec,
                          decision_cutoff_days=args.decision_cutoff, n_bins=args.bins,
                          rate_estimator=args.rate_estimator.replace("-", "_"),
                          probability=args.probability,
                          window_origin=args.window_origin.replace("-", "_"))
    except DomainError as exc:
        raise UsageError(str(exc)) from exc


def _meta(args, **extra) -> dict:
    keys = ("t_sec", "decision_cutoff", "bins", "rate_estimator", "probability",
            "window_origin", "test_fraction", "seed", "mode", "level", "censor_tail")
    meta = {k: getattr(args, k) for k in keys if hasattr(args, k)}
    meta["tool_version"] = __version__
    meta.update(extra)
    return meta


def cmd_simulate(args) -> int:
    cfg = SimConfig(GammaHyperParams(args.alpha, args.beta), args.n_events, args.horizon,
                    args.seed, args.t_sec)
    events = simulate_events(cfg)
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        write_csv(events, fh)
    log.info("wrote %d events to %s", len(events), args.out)
    return EXIT_OK


def cmd_fit(args) -> int:
    events = _load(args.train, args, args.t_sec if args.censor_tail else None)
    report = _fit(events, args)
    _write_prior(report, args.out)
    if not report.converged:
        print(f"prior fit did not converge after {report.iterations} iterations "
              f"(|grad|={report.grad_norm:.3g}{', degenerate corpus' if report.degenerate else ''})",
              file=sys.stderr)
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def predict_event(event: CdmEvent, prior: GammaHyperParams, t_sec: float, level: float,
                  rate_estimator: str = "map", interval: str = "predictive") -> dict:
    """One JSON-lines record for ``cdmpoisson predict``."""
    observed = inter_arrivals(event, censor=False)
    post = posterior_update(prior, observed)
    s_n = event.last_offset
    row = {"event_id": event.event_id, "n_observed": observed.count,
           "rate_estimator": rate_estimator}
    try:
        rate_map = map_rate(post)
    except EstimationError:
        rate_map = None
    rate = rate_map if rate_estimator == "map" else posterior_mean_rate(post)
    if rate is None:
        row["error"] = "map_undefined"
        return row
    try:
        window = DecisionWindow(s_n, event.deadline(t_sec))
    except DomainError:
        row["error"] = "window_empty"
        return row
    lo, hi = credible_interval_next(post, s_n, level, kind=interval, rate=rate)
    row.update({
        "rate_map": rate_map,
        "rate_mean": posterior_mean_rate(post),
        "expected_next_arrival_offset": expected_next_arrival(rate, s_n),
        "credible_lo": lo,
        "credible_hi": hi,
        "prob_before_deadline": prob_message_before(rate, window),
        "prob_before_deadline_predictive": prob_message_before_predictive(post, window),
    })
    return row


def cmd_predict(args) -> int:
    prior = _read_prior(args.prior)
    events = _load(args.data, args)
    estimator = args.rate_estimator.replace("-", "_")
    out = open(args.out, "w", encoding="utf-8", newline="") if args.out else sys.stdout
    try:
        for event in events:
            row = predict_event(event, prior, args.t_sec, args.level, estimator, args.interval)
            out.write(json.dumps(row) + "\n")
    finally:
        if args.out:
            out.close()
    return EXIT_OK


def cmd_evaluate(args) -> int:
    censor = args.t_sec if args.censor_tail else None
    if args.data and (args.train or args.test):
        raise UsageError("give either --data or --train/--test, not both")
    if args.data:
        train, test = split_events(_load(args.data, args, censor), args.test_fraction, args.seed)
    elif args.test and (args.train or args.prior):
        test = _load(args.test, args, censor)
        train = _load(args.train, args, censor) if args.train else []
    else:
        raise UsageError("evaluate needs --data, or --test with --train or --prior")
    if args.prior:
        prior = _read_prior(args.prior)
        fit = None
    else:
        fit = _fit(train, args)
        _write_prior(fit, f"{args.out_prefix}_prior.json")
        if not fit.converged:
            print("prior fit did not converge", file=sys.stderr)
            return EXIT_NOT_CONVERGED
        prior = fit.hyper
    config = _eval_config(args, args.mode.replace("-", "_"))
    preds = predict_next_all(MODELS, prior, test, config)
    try:
        calib = calibration_table(test, prior, config)
    except DomainError:
        calib = []
    meta = _meta(args, alpha=prior.alpha, beta=prior.beta, n_train=len(train),
                 n_test=len(test), skipped=preds.skipped)
    report = build_report(preds, MODELS, calib, args.hist_bins, meta)
    try:
        write_report(report, args.out_prefix, args.format)
    except DomainError as exc:
        raise DataError(str(exc)) from exc
    return EXIT_OK


def cmd_calibrate(args) -> int:
    prior = _read_prior(args.prior)
    events = _load(args.data, args)
    config = _eval_config(args)
    try:
        rows = calibration_table(events, prior, config)
    except DomainError as exc:
        raise DataError(f"calibration impossible: {exc} (events need a CDM at least "
                        f"{config.decision_cutoff_days} days before TCA)") from exc
    meta = _meta(args, alpha=prior.alpha, beta=prior.beta, n_events=len(events))
    write_report(Report(calibration=rows, meta=meta), args.out_prefix, args.format)
    return EXIT_OK


COMMANDS = {"simulate": cmd_simulate, "fit": cmd_fit, "predict": cmd_predict,
            "evaluate": cmd_evaluate, "calibrate": cmd_calibrate}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"cdmpoisson: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, CdmError, OSError) as exc:
        print(f"cdmpoisson: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
