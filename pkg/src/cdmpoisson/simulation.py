"""Synthetic corpora drawn from the hierarchical Gamma / Poisson-process model.

Every event gets its own Philox stream keyed by ``(seed, event index)``, so an
event's draws do not depend on which other events are generated or in what
order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .arrival import DEFAULT_T_SEC, CdmEvent, InterArrivals
from .estimators import GammaHyperParams
from .errors import DomainError
from .numerics import check_positive


@dataclass(frozen=True)
class SimConfig:
    hyper: GammaHyperParams
    n_events: int
    horizon: float = 7.0
    seed: int = 0
    t_sec: float = DEFAULT_T_SEC

    def __post_init__(self):
        if self.n_events <= 0:
            raise DomainError("n_events must be > 0")
        check_positive(self.horizon, "horizon")


def event_rng(seed: int, index: int) -> np.random.Generator:
    """Counter-based generator for one event."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, index])))


def sample_gamma(shape: float, rate: float, rng: np.random.Generator, size=None):
    """Gamma(shape, rate) draws; numpy's Marsaglia-Tsang sampler underneath."""
    check_positive(shape, "shape")
    check_positive(rate, "rate")
    return rng.gamma(shape, 1.0 / rate, size=size)


def sample_exponential(rate: float, rng: np.random.Generator, size=None):
    """Exp(rate) by inverse CDF."""
    u = rng.random(size)
    return -np.log1p(-u) / rate


def poisson_stream(rate: float, horizon: float, rng: np.random.Generator) -> np.ndarray:
    """Arrival offsets of a rate-``rate`` process on (0, horizon], plus the CDM at 0."""
    out = [0.0]
    t = 0.0
    # draw in blocks sized to the expected count
    block = max(8, int(rate * horizon * 1.2) + 8)
    while True:
        gaps = sample_exponential(rate, rng, block)
        times = t + np.cumsum(gaps)
        inside = times[times <= horizon]
        out.extend(inside.tolist())
        if inside.size < block:
            return np.array(out)
        t = float(times[-1])


def simulate_events(config: SimConfig) -> list[CdmEvent]:
    """One stream per event on (0, horizon]; events with < 2 CDMs are dropped.

    TCA sits ``t_sec`` after the horizon so the default decision deadline is
    the end of the simulated window, and the whole window counts as observed.
    """
    alpha, beta = config.hyper.alpha, config.hyper.beta
    events = []
    for k in range(config.n_events):
        rng = event_rng(config.seed, k)
        lam = float(sample_gamma(alpha, beta, rng))
        offsets = poisson_stream(lam, config.horizon, rng)
        if offsets.size < 2:
            continue
        events.append(CdmEvent(f"sim-{k}", tuple(offsets.tolist()),
                               config.horizon + config.t_sec,
                               observed_until=config.horizon))
    return events


def simulate_event_rates(config: SimConfig) -> np.ndarray:
    """The per-event rates ``simulate_events`` draws, in event-index order."""
    return np.array([float(sample_gamma(config.hyper.alpha, config.hyper.beta,
                                        event_rng(config.seed, k)))
                     for k in range(config.n_events)])


def simulate_fixed_length(hyper: GammaHyperParams, n_events: int, length: int,
                          seed: int) -> tuple[np.ndarray, list[InterArrivals]]:
    """``length`` i.i.d. inter-arrivals per event, no horizon truncation.

    Returns the true rates and the streams. Useful where the last draw must
    be a genuine fresh Exp(rate) variable, e.g. interval-coverage checks.
    """
    if length < 1:
        raise DomainError("length must be >= 1")
    rates = np.empty(n_events)
    streams = []
    for k in range(n_events):
        rng = event_rng(seed, k)
        lam = float(sample_gamma(hyper.alpha, hyper.beta, rng))
        rates[k] = lam
        gaps = sample_exponential(lam, rng, length)
        gaps = np.maximum(gaps, math.ulp(0.0))
        streams.append(InterArrivals(tuple(gaps.tolist())))
    return rates, streams
