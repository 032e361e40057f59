"""Special functions and quantiles used throughout the package.

Everything here works in float64. ``digamma`` and ``trigamma`` accept numpy
arrays as well as scalars, the rest are scalar functions.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import DomainError

_EPS = 1e-16
_TINY = 1e-300


def check_positive(x: float, name: str = "x") -> float:
    x = float(x)
    if not math.isfinite(x) or x <= 0.0:
        raise DomainError(f"{name} must be finite and > 0, got {x!r}")
    return x


def check_probability(p: float, name: str = "p") -> float:
    p = float(p)
    if not (0.0 <= p <= 1.0):
        raise DomainError(f"{name} must lie in [0, 1], got {p!r}")
    return p


def ln_gamma(x: float) -> float:
    """Natural log of the gamma function for x > 0."""
    return math.lgamma(check_positive(x))


def _as_positive_array(x):
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0.0):
        raise DomainError("argument must be finite and > 0")
    return arr


def digamma(x):
    """psi(x) = d/dx ln Gamma(x) for x > 0.

    Upward recurrence to x >= 10, then the asymptotic (Bernoulli) series.
    """
    arr = _as_positive_array(x)
    acc = np.zeros_like(arr)
    z = arr.copy()
    small = z < 10.0
    while np.any(small):
        acc = np.where(small, acc - 1.0 / z, acc)
        z = np.where(small, z + 1.0, z)
        small = z < 10.0
    w = 1.0 / (z * z)
    tail = w * (1.0 / 12 - w * (1.0 / 120 - w * (1.0 / 252 - w * (1.0 / 240 - w * (
        1.0 / 132 - w * (691.0 / 32760 - w / 12.0))))))
    out = acc + np.log(z) - 0.5 / z - tail
    return float(out) if out.ndim == 0 else out


def trigamma(x):
    """psi'(x) for x > 0, same scheme as :func:`digamma`."""
    arr = _as_positive_array(x)
    acc = np.zeros_like(arr)
    z = arr.copy()
    small = z < 10.0
    while np.any(small):
        acc = np.where(small, acc + 1.0 / (z * z), acc)
        z = np.where(small, z + 1.0, z)
        small = z < 10.0
    iz = 1.0 / z
    w = iz * iz
    series = iz * (1.0 + iz * (0.5 + iz * (1.0 / 6 - w * (1.0 / 30 - w * (1.0 / 42 - w * (
        1.0 / 30 - w * (5.0 / 66 - w * (691.0 / 2730 - w * 7.0 / 6))))))))
    out = acc + series
    return float(out) if out.ndim == 0 else out


def _log1pmx(t: float) -> float:
    # log(1 + t) - t for |t| <= 0.25, summed without cancellation
    total = 0.0
    power = t * t
    k = 2
    while True:
        term = power / k
        total += -term if k % 2 == 0 else term
        if abs(term) <= 1e-17 * abs(total):
            return total
        power *= t
        k += 1


def _log_prefactor(a: float, x: float) -> float:
    # log(x^a e^-x / Gamma(a)); Stirling-remainder form keeps it accurate for large a
    if a < 10.0:
        return a * math.log(x) - x - math.lgamma(a)
    ia = 1.0 / a
    ia2 = ia * ia
    stirlerr = ia * (1.0 / 12 - ia2 * (1.0 / 360 - ia2 * (1.0 / 1260 - ia2 / 1680)))
    t = (x - a) / a
    core = a * _log1pmx(t) if abs(t) <= 0.25 else a * (math.log(x) - math.log(a)) - (x - a)
    return core + 0.5 * math.log(a / (2.0 * math.pi)) - stirlerr


def _lower_series(a: float, x: float) -> float:
    # P(a, x) by the power series, good for x < a + 1
    term = 1.0 / a
    total = term
    ap = a
    for _ in range(100000):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _EPS:
            break
    return total * math.exp(_log_prefactor(a, x))


def _upper_cf(a: float, x: float) -> float:
    # Q(a, x) by the Legendre continued fraction (modified Lentz), x >= a + 1
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, 100000):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    return math.exp(_log_prefactor(a, x)) * h


def reg_lower_incomplete_gamma(a: float, x: float) -> float:
    """Regularized lower incomplete gamma P(a, x) = gamma(a, x) / Gamma(a)."""
    a = check_positive(a, "a")
    x = float(x)
    if not (x >= 0.0) or math.isnan(x):
        raise DomainError(f"x must be >= 0, got {x!r}")
    if x == 0.0:
        return 0.0
    if math.isinf(x):
        return 1.0
    if x < a + 1.0:
        p = _lower_series(a, x)
    else:
        p = 1.0 - _upper_cf(a, x)
    return min(max(p, 0.0), 1.0)


def _gamma_log_density(a: float, x: float) -> float:
    return _log_prefactor(a, x) - math.log(x)


def _standard_gamma_quantile(a: float, p: float, tol: float) -> float:
    # Wilson-Hilferty start, bracketed Newton with bisection fallback
    # lower-tail start, P(a, x) ~ x^a / Gamma(a + 1), against Wilson-Hilferty;
    # keep whichever lands closer in log-probability
    starts = [math.exp((math.log(p) + math.lgamma(a + 1.0)) / a)]
    z = _normal_quantile(p)
    c = 1.0 / (9.0 * a)
    wh = a * (1.0 - c + z * math.sqrt(c)) ** 3
    if wh > 0.0:
        starts.append(wh)

    def miss(x0):
        px = reg_lower_incomplete_gamma(a, x0)
        return abs(math.log(px) - math.log(p)) if px > 0.0 else math.inf

    x = min(starts, key=miss)
    lo, hi = 0.0, math.inf
    for _ in range(300):
        f = reg_lower_incomplete_gamma(a, x) - p
        if abs(f) <= tol * 1e-2 * min(p, 1.0 - p):
            return x
        if f < 0.0:
            lo = x
        else:
            hi = x
        dens = math.exp(_gamma_log_density(a, x)) if x > 0.0 else 0.0
        step_ok = False
        if dens > 0.0 and math.isfinite(dens):
            nxt = x - f / dens
            if lo < nxt < hi:
                step_ok = True
        if not step_ok:
            nxt = 2.0 * x if math.isinf(hi) else 0.5 * (lo + hi)
        if not math.isinf(hi) and hi - lo <= 1e-15 * hi:
            return 0.5 * (lo + hi)
        x = nxt
    return x


def _normal_quantile(p: float) -> float:
    # Acklam's rational approximation, ~1e-9 relative; used only as a start point
    a = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
         1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
    b = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
         6.680131188771972e01, -1.328068155288572e01)
    c = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
         -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00)
    d = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
         3.754408661907416e00)
    if p < 0.02425:
        q = math.sqrt(-2.0 * math.log(p))
        return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) / \
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0)
    if p > 1.0 - 0.02425:
        q = math.sqrt(-2.0 * math.log1p(-p))
        return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) / \
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0)
    q = p - 0.5
    r = q * q
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q / \
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0)


def gamma_quantile(shape: float, rate: float, p: float, tol: float = 1e-9) -> float:
    """Inverse CDF of Gamma(shape, rate), rate parameterization.

    Raises DomainError for p == 1 since the support is unbounded.
    """
    shape = check_positive(shape, "shape")
    rate = check_positive(rate, "rate")
    p = check_probability(p)
    if p == 1.0:
        raise DomainError("gamma quantile at p=1 is infinite")
    if p == 0.0:
        return 0.0
    return _standard_gamma_quantile(shape, p, tol) / rate


def lomax_quantile(shape: float, scale: float, p: float) -> float:
    """Inverse CDF of the Lomax (Pareto II) law: scale * ((1-p)^(-1/shape) - 1)."""
    shape = check_positive(shape, "shape")
    scale = check_positive(scale, "scale")
    p = check_probability(p)
    if p == 1.0:
        raise DomainError("lomax quantile at p=1 is infinite")
    return scale * math.expm1(-math.log1p(-p) / shape)
