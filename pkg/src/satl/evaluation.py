"""Generalization error by Simpson quadrature, similarity factor, rate fits.

The error of a predictor against a truth is the composite-Simpson
integral of the squared difference over [0,1] under the uniform design
measure. Rate regressions are plain OLS of log mean error on log n or
log(n / log n); both the norm and squared columns travel together, and
acceptance-style slope checks key on the squared column.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


def _as_callable(f):
    # predictors are FittedKrr-likes (predict method), SampledFunctions, or callables
    if hasattr(f, "predict"):
        return f.predict
    if callable(f):
        return f
    raise TypeError(f"cannot evaluate object of type {type(f).__name__}")


def _simpson_weights(m):
    if m < 3 or m % 2 == 0:
        raise ValueError(f"Simpson quadrature needs an odd grid of >= 3 points, got {m}")
    w = np.ones(m)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w * ((1.0 / (m - 1)) / 3.0)


@dataclass(frozen=True)
class ErrorReport:
    """One trial's generalization error with its setting identifiers."""

    l2_error: float
    sq_error: float
    grid_points: int = 0
    seed: int | None = None
    n: int | None = None
    smoothness: float | None = None
    method: str | None = None
    extra: tuple = ()

    def __post_init__(self):
        if self.l2_error < 0 or self.sq_error < 0:
            raise ValueError("errors must be nonnegative")
        if abs(self.sq_error - self.l2_error**2) > 1e-12 * max(1.0, self.sq_error):
            raise ValueError("sq_error must equal l2_error squared")

    @property
    def setting_key(self):
        return (self.method, self.n, self.smoothness, self.extra)


def simpson_l2_error(predictor, truth, grid_points=1025, seed=None, n=None,
                     smoothness=None, method=None, extra=()):
    """Composite Simpson quadrature of (predictor - truth)^2 over [0,1].

    grid_points must be odd (>= 3); the rule is exact for cubic integrands.
    Returns an ErrorReport carrying both the norm and the squared error.
    """
    w = _simpson_weights(int(grid_points))
    xs = np.linspace(0.0, 1.0, int(grid_points))
    diff = np.asarray(_as_callable(predictor)(xs), dtype=float) - \
        np.asarray(_as_callable(truth)(xs), dtype=float)
    sq = float(w @ (diff * diff))
    sq = max(sq, 0.0)
    return ErrorReport(l2_error=math.sqrt(sq), sq_error=sq, grid_points=int(grid_points),
                       seed=seed, n=n, smoothness=smoothness, method=method,
                       extra=tuple(extra))


def quadrature_l2_distance(f, g, grid_points=1025):
    """L2([0,1]) distance between two predictors under the uniform measure."""
    return simpson_l2_error(f, g, grid_points=grid_points).l2_error


def xi_factor(h, source_norm_proxy):
    """Transfer-similarity factor h^2 / proxy^2 (proxy: L2 norm of f_S)."""
    if source_norm_proxy <= 0:
        raise ValueError("source_norm_proxy must be positive")
    return float(h) ** 2 / float(source_norm_proxy) ** 2


TRANSFORMS = ("log_n", "log_n_over_log_n")


@dataclass(frozen=True)
class RateFit:
    """OLS fit of log error against a log-sample-size abscissa."""

    slope: float
    intercept: float
    r_squared: float
    pairs: tuple
    transform: str = "log_n"
    theoretical_slope: float | None = None


def fit_rate(pairs, transform="log_n", theoretical_slope=None):
    """Regress log(error) on log(n) or log(n/log n).

    Needs >= 2 pairs with positive errors; slope is scale-invariant in the
    errors (the intercept absorbs constants).
    """
    pairs = tuple((float(n), float(e)) for n, e in pairs)
    if len(pairs) < 2:
        raise ValueError("fit_rate needs at least two (n, error) pairs")
    if transform not in TRANSFORMS:
        raise ValueError(f"transform must be one of {TRANSFORMS}, got {transform!r}")
    if any(e <= 0 for _, e in pairs):
        raise ValueError("all error values must be positive")
    if any(n <= 1 for n, _ in pairs):
        raise ValueError("sample sizes must exceed 1")
    if transform == "log_n":
        xs = np.array([math.log(n) for n, _ in pairs])
    else:
        xs = np.array([math.log(n / math.log(n)) for n, _ in pairs])
    ys = np.array([math.log(e) for _, e in pairs])
    xbar, ybar = xs.mean(), ys.mean()
    sxx = float(np.sum((xs - xbar) ** 2))
    if sxx == 0:
        raise ValueError("abscissa values are all identical")
    slope = float(np.sum((xs - xbar) * (ys - ybar)) / sxx)
    intercept = float(ybar - slope * xbar)
    ss_res = float(np.sum((ys - (intercept + slope * xs)) ** 2))
    ss_tot = float(np.sum((ys - ybar) ** 2))
    r_squared = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    return RateFit(slope=slope, intercept=intercept, r_squared=r_squared,
                   pairs=pairs, transform=transform, theoretical_slope=theoretical_slope)


@dataclass(frozen=True)
class TrialSummary:
    """Per-setting mean/SD/SE of the error columns across trials."""

    method: str | None
    n: int | None
    smoothness: float | None
    extra: tuple
    count: int
    mean_l2: float
    sd_l2: float
    se_l2: float
    mean_sq: float
    sd_sq: float
    se_sq: float


def _mean_sd_se(values):
    arr = np.asarray(values, dtype=float)
    mean = float(arr.mean())
    sd = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
    return mean, sd, sd / math.sqrt(arr.size)


def aggregate_trials(records):
    """Group ErrorReports by setting key and summarize both error columns.

    Output is sorted by (method, n, smoothness, extra) for determinism.
    """
    groups = {}
    for rec in records:
        groups.setdefault(rec.setting_key, []).append(rec)

    def sort_key(key):
        method, n, smoothness, extra = key
        return (method or "", n if n is not None else -1,
                smoothness if smoothness is not None else -1.0, repr(extra))

    out = []
    for key in sorted(groups, key=sort_key):
        recs = groups[key]
        mean_l2, sd_l2, se_l2 = _mean_sd_se([r.l2_error for r in recs])
        mean_sq, sd_sq, se_sq = _mean_sd_se([r.sq_error for r in recs])
        method, n, smoothness, extra = key
        out.append(TrialSummary(method=method, n=n, smoothness=smoothness, extra=extra,
                                count=len(recs), mean_l2=mean_l2, sd_l2=sd_l2,
                                se_l2=se_l2, mean_sq=mean_sq, sd_sq=sd_sq, se_sq=se_sq))
    return out
