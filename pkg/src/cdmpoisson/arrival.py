"""Conjunction events and closed-form Poisson-process quantities.

All times are in days. Each event's clock starts at its first CDM.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Sequence

from .errors import DomainError
from .numerics import check_positive, check_probability, gamma_quantile, lomax_quantile

if TYPE_CHECKING:
    from .estimators import PosteriorState

DEFAULT_T_SEC = 1.3


@dataclass(frozen=True)
class CdmEvent:
    """One conjunction: CDM arrival offsets and the TCA offset.

    ``observed_until`` optionally marks the offset up to which the message
    stream is known to be complete; the quiet time after the last CDM then
    counts as exposure (see :func:`inter_arrivals`).
    """

    event_id: str
    arrival_offsets: tuple[float, ...]
    tca_offset: float
    observed_until: float | None = None

    def __post_init__(self):
        offsets = tuple(float(o) for o in self.arrival_offsets)
        object.__setattr__(self, "arrival_offsets", offsets)
        object.__setattr__(self, "tca_offset", float(self.tca_offset))
        if len(offsets) < 2:
            raise DomainError(f"event {self.event_id!r}: need at least 2 CDMs")
        if offsets[0] != 0.0:
            raise DomainError(f"event {self.event_id!r}: first offset must be 0")
        if any(b <= a for a, b in zip(offsets, offsets[1:])):
            raise DomainError(f"event {self.event_id!r}: offsets must be strictly increasing")
        if not math.isfinite(self.tca_offset) or offsets[-1] >= self.tca_offset:
            raise DomainError(f"event {self.event_id!r}: every offset must precede TCA")
        if self.observed_until is not None:
            object.__setattr__(self, "observed_until", float(self.observed_until))

    @property
    def last_offset(self) -> float:
        return self.arrival_offsets[-1]

    def deadline(self, t_sec: float = DEFAULT_T_SEC) -> float:
        return self.tca_offset - t_sec


@dataclass(frozen=True)
class InterArrivals:
    """Inter-CDM times of one event plus an optional censored tail.

    ``censored`` is observed time after the last arrival during which no
    message came; it adds to the exposure but not to the count.
    """

    values: tuple[float, ...]
    censored: float = 0.0
    total: float = field(init=False)

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        if any(not (v > 0.0) or not math.isfinite(v) for v in vals):
            raise DomainError("inter-arrival times must be finite and > 0")
        if not (self.censored >= 0.0) or not math.isfinite(self.censored):
            raise DomainError("censored exposure must be finite and >= 0")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "censored", float(self.censored))
        object.__setattr__(self, "total", math.fsum(vals))

    @property
    def count(self) -> int:
        return len(self.values)

    @property
    def exposure(self) -> float:
        return self.total + self.censored

    def head(self, k: int) -> InterArrivals:
        """The first ``k`` inter-arrivals, without censoring."""
        return InterArrivals(self.values[:k])


@dataclass(frozen=True)
class DecisionWindow:
    s_n: float
    deadline: float

    def __post_init__(self):
        if not self.deadline > self.s_n:
            raise DomainError(f"empty decision window: deadline {self.deadline} <= s_n {self.s_n}")

    @property
    def length(self) -> float:
        return self.deadline - self.s_n


def inter_arrivals(event: CdmEvent, censor: bool = True) -> InterArrivals:
    offs = event.arrival_offsets
    values = [b - a for a, b in zip(offs, offs[1:])]
    tail = 0.0
    if censor and event.observed_until is not None:
        tail = max(0.0, event.observed_until - offs[-1])
    return InterArrivals(tuple(values), censored=tail)


def count_in_interval(event: CdmEvent, a: float, b: float) -> int:
    """Number of CDMs with offset in the half-open interval (a, b]."""
    if a > b:
        raise DomainError(f"interval start {a} exceeds end {b}")
    return sum(1 for o in event.arrival_offsets if a < o <= b)


def prob_message_before(rate: float, window: DecisionWindow) -> float:
    """P(at least one CDM in the window) for a known rate."""
    rate = check_positive(rate, "rate")
    return -math.expm1(-rate * window.length)


def prob_message_before_predictive(posterior: PosteriorState, window: DecisionWindow) -> float:
    """Same probability with the rate integrated out over its Gamma posterior."""
    a, b = posterior.alpha_post, posterior.beta_post
    return -math.expm1(-a * math.log1p(window.length / b))


def expected_next_arrival(rate_hat: float, s_n: float) -> float:
    return s_n + 1.0 / check_positive(rate_hat, "rate_hat")


def credible_interval_next(posterior: PosteriorState, s_n: float, level: float = 0.9,
                           kind: str = "predictive",
                           rate: float | None = None) -> tuple[float, float]:
    """Central interval for the offset of the next CDM.

    ``kind="predictive"`` uses the Lomax posterior predictive of the next
    inter-arrival. ``kind="plugin"`` uses exponential quantiles at ``rate``
    (defaults to the posterior mean).
    """
    level = check_probability(level, "level")
    if not 0.0 < level < 1.0:
        raise DomainError(f"credible level must be in (0, 1), got {level}")
    p_lo, p_hi = (1.0 - level) / 2.0, (1.0 + level) / 2.0
    if kind == "predictive":
        a, b = posterior.alpha_post, posterior.beta_post
        return s_n + lomax_quantile(a, b, p_lo), s_n + lomax_quantile(a, b, p_hi)
    if kind == "plugin":
        r = rate if rate is not None else posterior.alpha_post / posterior.beta_post
        return s_n + gamma_quantile(1.0, r, p_lo), s_n + gamma_quantile(1.0, r, p_hi)
    raise DomainError(f"unknown interval kind {kind!r}")


def events_to_interarrivals(events: Sequence[CdmEvent], censor: bool = True) -> list[InterArrivals]:
    return [inter_arrivals(e, censor=censor) for e in events]
