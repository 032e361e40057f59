"""Rate estimators (baseline, classical, Bayesian) and empirical-Bayes prior fitting."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import __version__
from .arrival import InterArrivals
from .errors import DomainError, EstimationError
from .numerics import check_positive, digamma, trigamma

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class GammaHyperParams:
    """Gamma(alpha, beta) prior on per-event rates, rate parameterization."""

    alpha: float
    beta: float

    def __post_init__(self):
        check_positive(self.alpha, "alpha")
        check_positive(self.beta, "beta")

    @property
    def mean(self) -> float:
        return self.alpha / self.beta


@dataclass(frozen=True)
class PosteriorState:
    alpha_post: float
    beta_post: float
    n: int
    T: float


@dataclass
class FitConfig:
    max_iters: int = 500
    grad_tol: float = 1e-8
    shrink: float = 0.5
    initial_step: float = 1.0


@dataclass
class FitReport:
    hyper: GammaHyperParams
    log_marginal: float
    iterations: int
    converged: bool
    n_events: int
    grad_norm: float = math.nan
    initial_log_marginal: float = math.nan
    degenerate: bool = False

    def to_json(self) -> str:
        doc = {
            "alpha": self.hyper.alpha,
            "beta": self.hyper.beta,
            "log_marginal": self.log_marginal,
            "iterations": self.iterations,
            "converged": self.converged,
            "n_events": self.n_events,
            "tool_version": __version__,
        }
        return json.dumps(doc, indent=2) + "\n"


def load_prior(path) -> GammaHyperParams:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    try:
        return GammaHyperParams(float(doc["alpha"]), float(doc["beta"]))
    except KeyError as exc:
        raise DomainError(f"prior file {path} lacks field {exc}") from None


def baseline_predict(observed: InterArrivals) -> float:
    """Next inter-arrival equals the last one seen."""
    if observed.count < 1:
        raise EstimationError("baseline needs at least one observed inter-arrival")
    return observed.values[-1]


def classical_rate(observed: InterArrivals) -> float:
    """Maximum-likelihood rate n / T."""
    if observed.count < 1 or not observed.exposure > 0.0:
        raise EstimationError("classical rate needs n >= 1 and T > 0")
    return observed.count / observed.exposure


def posterior_update(prior: GammaHyperParams | PosteriorState,
                     observed: InterArrivals) -> PosteriorState:
    """Conjugate update; accepts a previous posterior for sequential use."""
    if isinstance(prior, PosteriorState):
        a, b, n0, t0 = prior.alpha_post, prior.beta_post, prior.n, prior.T
    else:
        a, b, n0, t0 = prior.alpha, prior.beta, 0, 0.0
    return PosteriorState(a + observed.count, b + observed.exposure,
                          n0 + observed.count, t0 + observed.exposure)


def map_rate(posterior: PosteriorState) -> float:
    if posterior.alpha_post <= 1.0:
        raise EstimationError(
            f"posterior shape {posterior.alpha_post} <= 1: MAP rate is 0")
    return (posterior.alpha_post - 1.0) / posterior.beta_post


def posterior_mean_rate(posterior: PosteriorState) -> float:
    return posterior.alpha_post / posterior.beta_post


def point_rate(posterior: PosteriorState, estimator: str = "map",
               fallback_mean: bool = False) -> float:
    """Rate used for point predictions: MAP or posterior mean."""
    if estimator == "posterior_mean":
        return posterior_mean_rate(posterior)
    if estimator != "map":
        raise DomainError(f"unknown rate estimator {estimator!r}")
    if posterior.alpha_post <= 1.0 and fallback_mean:
        return posterior_mean_rate(posterior)
    return map_rate(posterior)


def _stats(events: Sequence[InterArrivals]) -> tuple[np.ndarray, np.ndarray]:
    n = np.array([e.count for e in events], dtype=float)
    T = np.array([e.exposure for e in events], dtype=float)
    if n.size == 0 or np.any(n < 1) or np.any(~(T > 0)) or np.any(~np.isfinite(T)):
        raise DomainError("every event needs n >= 1 and a finite T > 0")
    return n, T


def _log_evidence_terms(alpha: float, beta: float, n: np.ndarray, T: np.ndarray) -> np.ndarray:
    # lgamma(alpha + n) evaluated once per distinct count
    uniq, inv = np.unique(n, return_inverse=True)
    lg = np.array([math.lgamma(alpha + u) for u in uniq])[inv]
    return alpha * math.log(beta) - math.lgamma(alpha) + lg - (alpha + n) * np.log(beta + T)


def marginal_log_likelihood(hyper: GammaHyperParams, events: Sequence[InterArrivals]) -> float:
    """Log evidence of the corpus under the Gamma-exponential compound."""
    n, T = _stats(events)
    return math.fsum(_log_evidence_terms(hyper.alpha, hyper.beta, n, T))


class _Objective:
    """Log evidence with gradient and Hessian in (log alpha, log beta)."""

    def __init__(self, n: np.ndarray, T: np.ndarray):
        self.n, self.T = n, T
        self.uniq, self.inv = np.unique(n, return_inverse=True)

    def value(self, theta: np.ndarray) -> float:
        a, b = math.exp(theta[0]), math.exp(theta[1])
        return math.fsum(_log_evidence_terms(a, b, self.n, self.T))

    def noise(self, theta: np.ndarray) -> float:
        """Rounding-level uncertainty of :meth:`value`."""
        a, b = math.exp(theta[0]), math.exp(theta[1])
        return 1e-13 * math.fsum(np.abs(_log_evidence_terms(a, b, self.n, self.T)))

    def derivatives(self, theta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        a, b = math.exp(theta[0]), math.exp(theta[1])
        n, T = self.n, self.T
        bt = b + T
        psi_an = digamma(a + self.uniq)[self.inv]
        tri_an = trigamma(a + self.uniq)[self.inv]
        d_a = math.fsum(psi_an - np.log1p(T / b)) - n.size * digamma(a)
        d_b = n.size * a / b - math.fsum((a + n) / bt)
        d_aa = math.fsum(tri_an) - n.size * trigamma(a)
        d_ab = n.size / b - math.fsum(1.0 / bt)
        d_bb = -n.size * a / b**2 + math.fsum((a + n) / bt**2)
        grad = np.array([a * d_a, b * d_b])
        hess = np.array([[a * a * d_aa + a * d_a, a * b * d_ab],
                         [a * b * d_ab, b * b * d_bb + b * d_b]])
        return grad, hess


def moment_init(events: Sequence[InterArrivals]) -> tuple[GammaHyperParams, bool]:
    """Method-of-moments start from per-event classical rates.

    Returns the starting point and whether the corpus is degenerate (no
    spread in the classical rates, so the evidence has no interior maximum).
    """
    n, T = _stats(events)
    r = n / T
    mean = float(np.mean(r))
    var = float(np.var(r))
    if not var > 1e-12 * mean * mean:
        return GammaHyperParams(1.0, 1.0 / mean), True
    return GammaHyperParams(mean * mean / var, mean / var), False


def fit_prior_empirical_bayes(events: Sequence[InterArrivals],
                              config: FitConfig | None = None) -> FitReport:
    """Type-II maximum likelihood for the shared Gamma prior.

    Damped Newton ascent in log-parameter space with a backtracking line
    search; falls back to the gradient direction where the Hessian is not
    negative definite.
    """
    config = config or FitConfig()
    if len(events) < 2:
        raise EstimationError("empirical Bayes needs at least 2 events")
    n, T = _stats(events)
    init, degenerate = moment_init(events)
    obj = _Objective(n, T)
    theta = np.array([math.log(init.alpha), math.log(init.beta)])
    value = obj.value(theta)
    initial = value
    grad, hess = obj.derivatives(theta)
    gnorm = float(np.max(np.abs(grad)))
    iters = 0
    while gnorm >= config.grad_tol and iters < config.max_iters:
        iters += 1
        newton = hess[0, 0] < 0 and np.linalg.det(hess) > 0
        if newton:
            direction = -np.linalg.solve(hess, grad)
        else:
            direction = grad / max(1.0, float(np.max(np.abs(grad))))
        # cap the log-parameter move so a bad step cannot overflow exp()
        big = float(np.max(np.abs(direction)))
        if big > 5.0:
            direction *= 5.0 / big
        slope = float(direction @ grad)
        if newton and slope < obj.noise(theta):
            # gain is below rounding noise in the evidence: judge the full
            # Newton step by the gradient instead
            cand = theta + direction
            cand_grad, _ = obj.derivatives(cand)
            if float(np.max(np.abs(cand_grad))) >= gnorm:
                log.debug("Newton step no longer reduces |g|=%g at iteration %d", gnorm, iters)
                break
            cand_value = obj.value(cand)
        else:
            step = config.initial_step
            for _ in range(60):
                cand = theta + step * direction
                cand_value = obj.value(cand)
                if cand_value > value and cand_value >= value + 1e-4 * step * slope:
                    break
                step *= config.shrink
            else:
                log.debug("line search failed at iteration %d, |g|=%g", iters, gnorm)
                break
        theta, value = cand, cand_value
        grad, hess = obj.derivatives(theta)
        gnorm = float(np.max(np.abs(grad)))
    hyper = GammaHyperParams(math.exp(theta[0]), math.exp(theta[1]))
    converged = bool(gnorm < config.grad_tol) and not degenerate
    return FitReport(hyper, value, iters, converged, int(n.size), gnorm, initial, degenerate)
