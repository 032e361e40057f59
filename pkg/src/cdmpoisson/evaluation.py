"""Evaluation harness: next-CDM prediction errors, ECDFs, histograms, calibration."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .arrival import (CdmEvent, DecisionWindow, InterArrivals, count_in_interval,
                      inter_arrivals, prob_message_before, prob_message_before_predictive)
from .errors import DomainError, EstimationError
from .estimators import (GammaHyperParams, baseline_predict, classical_rate, point_rate,
                         posterior_update)
from .numerics import lomax_quantile

MODELS = ("bayesian", "classical", "baseline")


@dataclass(frozen=True)
class EvalConfig:
    mode: str = "final_holdout"
    t_sec_days: float = 1.3
    decision_cutoff_days: float = 2.0
    n_bins: int = 6
    rate_estimator: str = "map"
    # calibration: "predictive" integrates the rate out, "plugin" uses rate_estimator
    probability: str = "predictive"
    # calibration window start: the decision cutoff, or the last CDM before it
    window_origin: str = "decision"
    map_fallback_mean: bool = False
    level: float = 0.9
    # inter-arrivals required before the calibration reference CDM
    min_history: int = 1

    def __post_init__(self):
        if not self.t_sec_days < self.decision_cutoff_days:
            raise DomainError("t_sec_days must be smaller than decision_cutoff_days")
        if self.mode not in ("final_holdout", "rolling"):
            raise DomainError(f"unknown mode {self.mode!r}")
        if self.rate_estimator not in ("map", "posterior_mean"):
            raise DomainError(f"unknown rate estimator {self.rate_estimator!r}")
        if self.probability not in ("predictive", "plugin"):
            raise DomainError(f"unknown probability kind {self.probability!r}")
        if self.window_origin not in ("decision", "last_cdm"):
            raise DomainError(f"unknown window origin {self.window_origin!r}")
        if self.n_bins < 1:
            raise DomainError("n_bins must be >= 1")


@dataclass(frozen=True)
class Prediction:
    event_id: str
    model: str
    step: int
    predicted: float
    observed: float

    @property
    def error(self) -> float:
        return self.predicted - self.observed


@dataclass
class PredictionSet:
    rows: list[Prediction]
    skipped: int

    def for_model(self, model: str) -> list[Prediction]:
        return [r for r in self.rows if r.model == model]


@dataclass(frozen=True)
class MetricsReport:
    model_name: str
    mae: float
    mse: float
    rmse: float
    n_predictions: int


@dataclass(frozen=True)
class CalibrationRow:
    bin_lo: float
    bin_hi: float
    mean_estimated: float
    empirical: float
    deviation: float
    n_events: int


def _predict_one(model: str, prior: GammaHyperParams, history: InterArrivals,
                 config: EvalConfig) -> float:
    if model == "bayesian":
        post = posterior_update(prior, history)
        return 1.0 / point_rate(post, config.rate_estimator, config.map_fallback_mean)
    if model == "classical":
        return 1.0 / classical_rate(history)
    if model == "baseline":
        return baseline_predict(history)
    raise DomainError(f"unknown model {model!r}")


def predict_next_all(models: Sequence[str], prior: GammaHyperParams,
                     test_events: Sequence[CdmEvent], config: EvalConfig) -> PredictionSet:
    """Predict held-out inter-arrivals with every model on the same targets.

    final_holdout: one target per event, its last inter-arrival.
    rolling: targets 2..n, each predicted from the inter-arrivals before it.
    A target any model cannot handle is skipped for all models and counted.
    """
    rows: list[Prediction] = []
    skipped = 0
    for event in test_events:
        values = inter_arrivals(event, censor=False).values
        if len(values) < 2:
            skipped += 1
            continue
        steps = range(len(values) - 1, len(values)) if config.mode == "final_holdout" \
            else range(1, len(values))
        for i in steps:
            history = InterArrivals(values[:i])
            try:
                preds = [_predict_one(m, prior, history, config) for m in models]
            except EstimationError:
                skipped += 1
                continue
            rows.extend(Prediction(event.event_id, m, i + 1, p, values[i])
                        for m, p in zip(models, preds))
    return PredictionSet(rows, skipped)


def compute_metrics(pairs: Sequence[tuple[float, float]], model_name: str = "") -> MetricsReport:
    if len(pairs) == 0:
        raise DomainError("no predictions to score")
    arr = np.asarray(pairs, dtype=float)
    err = arr[:, 0] - arr[:, 1]
    mae = math.fsum(np.abs(err)) / err.size
    mse = math.fsum(err * err) / err.size
    return MetricsReport(model_name, mae, mse, math.sqrt(mse), int(err.size))


def error_ecdf(errors: Sequence[float]) -> list[tuple[float, float]]:
    if len(errors) == 0:
        raise DomainError("empty error sample")
    vals = sorted(float(e) for e in errors)
    n = len(vals)
    return [(v, (k + 1) / n) for k, v in enumerate(vals)]


def error_histogram(errors: Sequence[float], n_bins: int) -> list[tuple[float, float, int]]:
    if len(errors) == 0:
        raise DomainError("empty error sample")
    if n_bins < 1:
        raise DomainError("n_bins must be >= 1")
    counts, edges = np.histogram(np.asarray(errors, dtype=float), bins=n_bins)
    return [(float(edges[i]), float(edges[i + 1]), int(counts[i])) for i in range(n_bins)]


def calibration_scores(events: Sequence[CdmEvent], prior: GammaHyperParams,
                       config: EvalConfig) -> list[tuple[str, float, int]]:
    """Per-event (id, estimated probability, outcome) for the decision window.

    The reference CDM is the last one at least ``decision_cutoff_days``
    before TCA; the outcome is whether any CDM arrives after it and no later
    than ``t_sec_days`` before TCA. Events need ``min_history`` inter-arrivals
    before the reference: a corpus filtered on "at least 2 CDMs" otherwise
    admits events only because a CDM did arrive in the window.
    """
    out = []
    for event in events:
        cutoff = event.tca_offset - config.decision_cutoff_days
        deadline = event.tca_offset - config.t_sec_days
        idx = None
        for i, o in enumerate(event.arrival_offsets):
            if event.tca_offset - o >= config.decision_cutoff_days:
                idx = i
        if idx is None or idx < config.min_history:
            continue
        s_n = event.arrival_offsets[idx]
        values = inter_arrivals(event, censor=False).values[:idx]
        if config.window_origin == "decision":
            history = InterArrivals(values, censored=cutoff - s_n)
            start = cutoff
        else:
            history = InterArrivals(values)
            start = s_n
        try:
            window = DecisionWindow(start, deadline)
        except DomainError:
            continue
        post = posterior_update(prior, history)
        if config.probability == "predictive":
            prob = prob_message_before_predictive(post, window)
        else:
            try:
                rate = point_rate(post, config.rate_estimator, config.map_fallback_mean)
            except EstimationError:
                continue
            prob = prob_message_before(rate, window)
        hit = int(count_in_interval(event, s_n, deadline) > 0)
        out.append((event.event_id, prob, hit))
    return out


def bin_calibration(scores: Sequence[tuple[str, float, int]], n_bins: int) -> list[CalibrationRow]:
    """Equal-width bins (lo, hi] over the observed probability range; empty bins omitted."""
    if not scores:
        raise DomainError("no event qualifies for calibration")
    probs = np.array([s[1] for s in scores])
    hits = np.array([s[2] for s in scores], dtype=float)
    lo, hi = float(probs.min()), float(probs.max())
    if hi == lo:
        idx = np.zeros(probs.size, dtype=int)
        edges = [lo, hi]
        n_bins = 1
    else:
        edges = np.linspace(lo, hi, n_bins + 1)
        idx = np.clip(np.searchsorted(edges, probs, side="left") - 1, 0, n_bins - 1)
    rows = []
    for b in range(n_bins):
        mask = idx == b
        k = int(mask.sum())
        if k == 0:
            continue
        est = math.fsum(probs[mask]) / k
        emp = math.fsum(hits[mask]) / k
        rows.append(CalibrationRow(float(edges[b]), float(edges[b + 1]), est, emp, emp - est, k))
    return rows


def calibration_table(events: Sequence[CdmEvent], prior: GammaHyperParams,
                      config: EvalConfig) -> list[CalibrationRow]:
    return bin_calibration(calibration_scores(events, prior, config), config.n_bins)


def predictive_coverage(prior: GammaHyperParams, streams: Sequence[InterArrivals],
                        level: float = 0.9) -> tuple[float, int]:
    """Fraction of streams whose last inter-arrival falls in the central
    posterior-predictive interval built from the preceding ones."""
    p_lo, p_hi = (1.0 - level) / 2.0, (1.0 + level) / 2.0
    hits = 0
    n = 0
    for s in streams:
        if s.count < 1:
            continue
        post = posterior_update(prior, s.head(s.count - 1))
        a, b = post.alpha_post, post.beta_post
        y = s.values[-1]
        hits += lomax_quantile(a, b, p_lo) <= y <= lomax_quantile(a, b, p_hi)
        n += 1
    return hits / n, n


# -- reports -----------------------------------------------------------------

@dataclass
class Report:
    metrics: list[MetricsReport] = field(default_factory=list)
    ecdf: dict[str, list[tuple[float, float, float]]] = field(default_factory=dict)
    histogram: dict[str, list[tuple[float, float, int]]] = field(default_factory=dict)
    calibration: list[CalibrationRow] = field(default_factory=list)
    meta: dict = field(default_factory=dict)


def build_report(predictions: PredictionSet, models: Sequence[str],
                 calibration: list[CalibrationRow] | None = None,
                 n_hist_bins: int = 50, meta: dict | None = None) -> Report:
    report = Report(calibration=calibration or [], meta=dict(meta or {}))
    for m in models:
        rows = predictions.for_model(m)
        if not rows:
            continue
        report.metrics.append(compute_metrics([(r.predicted, r.observed) for r in rows], m))
        errs = [r.error for r in rows]
        signed = error_ecdf(errs)
        absolute = error_ecdf([abs(e) for e in errs])
        report.ecdf[m] = [(f, s, a) for (s, f), (a, _) in zip(signed, absolute)]
        report.histogram[m] = error_histogram(errs, n_hist_bins)
    return report


def _num(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, float):
        return format(x, ".17g")
    return str(x)


def _csv(header: Sequence[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_num(v) for v in row])
    return buf.getvalue()


def render_report(report: Report, fmt: str = "csv") -> dict[str, str]:
    """Serialize non-empty sections.

    ``csv`` gives one document per section keyed by file suffix
    (``metrics.csv`` ...) plus ``meta.json``; ``json`` gives a single
    ``report.json``. CSV numbers carry 17 significant digits; JSON floats use
    Python's exact round-trip repr.
    """
    if not (report.metrics or report.ecdf or report.histogram or report.calibration):
        raise DomainError("report has no sections")
    if fmt == "csv":
        out = {}
        if report.metrics:
            out["metrics.csv"] = _csv(["model", "mae", "mse", "rmse", "n"],
                                      [(m.model_name, m.mae, m.mse, m.rmse, m.n_predictions)
                                       for m in report.metrics])
        if report.ecdf:
            out["ecdf.csv"] = _csv(["model", "fraction", "signed", "absolute"],
                                   [(m, *r) for m, rows in report.ecdf.items() for r in rows])
        if report.histogram:
            out["hist.csv"] = _csv(["model", "bin_lo", "bin_hi", "count"],
                                   [(m, *r) for m, rows in report.histogram.items() for r in rows])
        if report.calibration:
            out["calibration.csv"] = _csv(
                ["bin_lo", "bin_hi", "mean_estimated", "empirical", "deviation", "n_events"],
                [astuple_row(r) for r in report.calibration])
        out["meta.json"] = json.dumps(report.meta, indent=2, sort_keys=True) + "\n"
        return out
    if fmt == "json":
        doc: dict = {"meta": report.meta}
        if report.metrics:
            doc["metrics"] = [{"model": m.model_name, "mae": m.mae, "mse": m.mse,
                               "rmse": m.rmse, "n": m.n_predictions} for m in report.metrics]
        if report.ecdf:
            doc["ecdf"] = {m: [{"fraction": f, "signed": s, "absolute": a} for f, s, a in rows]
                           for m, rows in report.ecdf.items()}
        if report.histogram:
            doc["histogram"] = {m: [{"bin_lo": lo, "bin_hi": hi, "count": c} for lo, hi, c in rows]
                                for m, rows in report.histogram.items()}
        if report.calibration:
            doc["calibration"] = [asdict(r) for r in report.calibration]
        return {"report.json": json.dumps(doc, indent=2, sort_keys=True) + "\n"}
    raise DomainError(f"unknown report format {fmt!r}")


def astuple_row(row: CalibrationRow) -> tuple:
    return (row.bin_lo, row.bin_hi, row.mean_estimated, row.empirical, row.deviation, row.n_events)


def write_report(report: Report, prefix: str, fmt: str = "csv") -> list[str]:
    paths = []
    for suffix, text in render_report(report, fmt).items():
        path = f"{prefix}_{suffix}"
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        paths.append(path)
    return paths
