"""Log-log rate fits and exponential error envelopes."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats


@dataclass(frozen=True)
class LineFit:
    slope: float
    intercept: float
    half_width: float  # 95% confidence half-width of the slope
    r2: float
    n: int

    @property
    def interval(self) -> tuple[float, float]:
        return self.slope - self.half_width, self.slope + self.half_width


def _line(x, y) -> LineFit:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = len(x)
    res = stats.linregress(x, y)
    if n > 2:
        hw = float(stats.t.ppf(0.975, n - 2) * res.stderr)
    else:
        hw = float("inf")
    r2 = float(res.rvalue**2) if np.ptp(y) > 0 else 1.0
    return LineFit(float(res.slope), float(res.intercept), hw, r2, n)


def fit_rate(points) -> LineFit:
    """Least squares of log(error) against log(eps) over (eps, error) pairs."""
    pts = np.asarray(list(points), dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 3:
        raise ValueError("fit_rate needs at least three (eps, error) pairs")
    if np.any(pts <= 0) or not np.all(np.isfinite(pts)):
        raise ValueError("eps and errors must be positive and finite")
    return _line(np.log(pts[:, 0]), np.log(pts[:, 1]))


@dataclass(frozen=True)
class EnvelopeFit:
    rate: float
    half_width: float
    r2: float
    t_start: float
    n: int


def monotone_tail(e) -> int:
    """Index where the final non-decreasing run of ``e`` starts."""
    e = np.asarray(e)
    i = len(e) - 1
    while i > 0 and e[i - 1] <= e[i]:
        i -= 1
    return i


def fit_envelope(t, e) -> EnvelopeFit:
    """Slope C of log(error) against t over the monotone tail of the series.

    Points at or below a floor of 10 machine epsilons (relative to the series
    maximum, at least 1) are excluded first. If the tail holds fewer than
    three points, every point above the floor is used.
    """
    t = np.asarray(t, dtype=float)
    e = np.asarray(e, dtype=float)
    if t.shape != e.shape or t.ndim != 1:
        raise ValueError("t and e must be matching 1-D arrays")
    if np.any(e < 0) or not np.all(np.isfinite(e)):
        raise ValueError("errors must be non-negative and finite")
    floor = 10 * np.finfo(float).eps * max(1.0, float(e.max(initial=0.0)))
    keep = e > floor
    t, e = t[keep], e[keep]
    if len(t) < 2:
        raise ValueError("fewer than two points above the noise floor")
    start = monotone_tail(e)
    if len(t) - start < 3:
        start = 0
    fit = _line(t[start:], np.log(e[start:]))
    return EnvelopeFit(fit.slope, fit.half_width, fit.r2, float(t[start]), fit.n)


def ehrenfest_window(t, e, threshold: float) -> float:
    """Largest t such that the error stays below ``threshold`` on [0, t]."""
    t = np.asarray(t, dtype=float)
    e = np.asarray(e, dtype=float)
    above = np.nonzero(e >= threshold)[0]
    if len(above) == 0:
        return float(t[-1])
    if above[0] == 0:
        return float(t[0])
    return float(t[above[0] - 1])
