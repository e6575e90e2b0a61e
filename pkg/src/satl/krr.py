"""Closed-form kernel ridge regression and regularization schedules.

The estimator minimizes (1/n) sum_i (y_i - f(x_i))^2 + lam ||f||^2 over
the kernel's RKHS; the 1/n on the empirical loss puts the ridge term on
the Gram diagonal as n*lam, so the dual coefficients solve
(G + n lam I) alpha = y. Schedules produce lam as a function of n:
exponentially decaying for the Gaussian kernel (lam = exp(-C n^(2/(2a+d))))
and polynomially decaying for imposed Matern kernels.
"""
from __future__ import annotations

import math
import sys
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve

from satl.kernels import as_points, chol_with_jitter

SCHEDULE_KINDS = ("gaussian_exponential", "matern_polynomial", "fixed")

# exp(-x) for x beyond this is subnormal; the schedule clamps instead
_EXP_ARG_LIMIT = 700.0


@dataclass(frozen=True)
class RegSchedule:
    """A rule lam(n) with constant C, smoothness alpha, and dimension d.

    matern_polynomial carries the imposed smoothness separately from the
    truth: lam = C * n^(-2 imposed_alpha / (2 alpha + d)).
    """

    kind: str
    C: float
    alpha: float
    d: int = 1
    imposed_alpha: float | None = None

    def __post_init__(self):
        if self.kind not in SCHEDULE_KINDS:
            raise ValueError(f"kind must be one of {SCHEDULE_KINDS}, got {self.kind!r}")
        if not (np.isfinite(self.C) and self.C > 0):
            raise ValueError(f"C must be positive, got {self.C}")
        if not (np.isfinite(self.alpha) and self.alpha > 0):
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if self.d < 1:
            raise ValueError(f"d must be a positive integer, got {self.d}")
        if self.kind == "matern_polynomial" and self.imposed_alpha is None:
            raise ValueError("matern_polynomial requires imposed_alpha")


def schedule_lambda(schedule, n, meta=None):
    """Evaluate the schedule at sample size n.

    A meta dict, when given, records {"underflow": bool}: exponent
    arguments beyond 700 clamp lam to the smallest positive normal double.
    """
    if n < 1:
        raise ValueError(f"n must be at least 1, got {n}")
    underflow = False
    if schedule.kind == "fixed":
        lam = schedule.C
    elif schedule.kind == "gaussian_exponential":
        arg = schedule.C * float(n) ** (2.0 / (2.0 * schedule.alpha + schedule.d))
        if arg > _EXP_ARG_LIMIT:
            lam, underflow = sys.float_info.min, True
        else:
            lam = math.exp(-arg)
    else:  # matern_polynomial
        expo = -2.0 * schedule.imposed_alpha / (2.0 * schedule.alpha + schedule.d)
        lam = schedule.C * float(n) ** expo
    if meta is not None:
        meta["underflow"] = underflow
    return lam


@dataclass(frozen=True, eq=False)
class FittedKrr:
    """Immutable dual-form KRR model: f(x) = sum_i alpha_i k(x, x_i)."""

    x: np.ndarray
    alpha: np.ndarray
    kernel: object
    lam: float
    jitter: float = 0.0

    def __post_init__(self):
        x = as_points(self.x)
        alpha = np.asarray(self.alpha, dtype=float).reshape(-1)
        if x.shape[0] != alpha.shape[0]:
            raise ValueError("alpha length must match the number of training points")
        x = x.copy()
        x.setflags(write=False)
        alpha.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "alpha", alpha)

    @property
    def n(self):
        return self.x.shape[0]

    def predict(self, xq):
        return predict(self, xq)


def fit(kernel, data, lam):
    """Solve (G + n lam I) alpha = y by Cholesky.

    lam = 0 is allowed only when the Gram itself is numerically PD; a
    failed factorization escalates through the shared jitter ladder before
    raising.
    """
    if lam < 0:
        raise ValueError(f"lam must be nonnegative, got {lam}")
    x = as_points(data.x)
    y = np.asarray(data.y, dtype=float).reshape(-1)
    n = x.shape[0]
    g = kernel.matrix(x, x)
    system = g + (n * lam) * np.eye(n)
    chol, jitter = chol_with_jitter(system)
    alpha = cho_solve((chol, True), y)
    return FittedKrr(x=x, alpha=alpha, kernel=kernel, lam=float(lam), jitter=jitter)


def predict(model, xq):
    """Kernel-expansion prediction; scalar in, scalar out; batches vectorize."""
    arr = np.asarray(xq, dtype=float)
    scalar = arr.ndim == 0
    d = model.x.shape[1]
    if arr.ndim <= 1 and d == 1:
        pts = arr.reshape(-1, 1)
    elif arr.ndim == 1 and arr.shape[0] == d:
        pts = arr.reshape(1, -1)
        scalar = True
    else:
        pts = as_points(arr, d=d)
    if model.n == 0:
        out = np.zeros(pts.shape[0])
    else:
        out = model.kernel.matrix(pts, model.x) @ model.alpha
    return float(out[0]) if scalar else out


def zero_model(kernel, d=1):
    """The identically-zero model (no training points); predicts 0 everywhere."""
    return FittedKrr(x=np.empty((0, d)), alpha=np.empty(0), kernel=kernel, lam=1.0)


def fitted_to_dict(model):
    """JSON-ready payload (kernel spec, lam, training x, alpha)."""
    from satl.kernels import kernel_to_dict

    return {
        "kernel": kernel_to_dict(model.kernel),
        "lam": model.lam,
        "jitter": model.jitter,
        "x": [[float(v) for v in row] for row in model.x],
        "alpha": [float(v) for v in model.alpha],
    }


def fitted_from_dict(payload):
    """Inverse of fitted_to_dict."""
    from satl.kernels import kernel_from_dict

    return FittedKrr(
        x=np.array(payload["x"], dtype=float).reshape(len(payload["alpha"]), -1),
        alpha=np.array(payload["alpha"], dtype=float),
        kernel=kernel_from_dict(payload["kernel"]),
        lam=payload["lam"],
        jitter=payload.get("jitter", 0.0),
    )
