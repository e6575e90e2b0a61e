"""Competing estimators for the transfer experiments.

Three families: target-only adaptive KRR is already covered by the
adaptivity module; this module adds (a) finite-basis-expansion (FBE)
least squares in a cosine or cubic B-spline basis, including its
two-phase transfer variant with CV-selected truncations, and (b) the
misspecified Matern-kernel KRR whose polynomial regularization schedule
exhibits the optimal and saturated convergence regimes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.interpolate import BSpline

from .kernels import MaternKernel
from .krr import FittedKrr, RegSchedule, fit, schedule_lambda
from .transfer import PseudoLabelSet

__all__ = [
    "DEFAULT_CV_TRUNCATIONS",
    "FbeModel",
    "FbeTransferModel",
    "bspline_design",
    "cv_select_truncation",
    "fbe_design",
    "fit_fbe",
    "fit_fbe_transfer",
    "fit_misspecified_matern",
    "fourier_basis",
    "fourier_design",
    "fbe_from_dict",
    "fbe_to_dict",
    "predict_fbe",
]

BASIS_KINDS = ("fourier", "bspline")

# Truncation ladder scanned by 5-fold CV when M is not supplied.
DEFAULT_CV_TRUNCATIONS = tuple(range(2, 31, 2))

_RIDGE_FALLBACK = 1e-10


def fourier_basis(j, x):
    """Cosine basis element sqrt(2) * cos(pi j x) on [0, 1], j >= 1."""
    if j < 1:
        raise ValueError("fourier basis index starts at 1")
    return math.sqrt(2.0) * np.cos(math.pi * j * np.asarray(x, dtype=float))


def _flat_x(x):
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 2:
        if arr.shape[1] != 1:
            raise ValueError("basis expansions are one-dimensional (d = 1)")
        arr = arr[:, 0]
    return np.atleast_1d(arr)


def fourier_design(x, M, constant=True):
    """Design matrix [1, B_1, ..., B_M] at x (constant column optional).

    The raw cosine family cannot represent nonzero-mean functions, so a
    constant element is included by default.
    """
    if M < 1:
        raise ValueError("M must be at least 1")
    pts = _flat_x(x)
    cols = ([np.ones_like(pts)] if constant else []) + [
        fourier_basis(j, pts) for j in range(1, int(M) + 1)
    ]
    return np.column_stack(cols)


def bspline_design(x, M):
    """Clamped cubic B-spline design with M uniform interior knots on [0, 1].

    The basis has M + 4 elements and forms a partition of unity, so no
    separate constant column is needed.
    """
    if M < 1:
        raise ValueError("M must be at least 1")
    pts = _flat_x(x)
    if np.any(pts < 0.0) or np.any(pts > 1.0):
        raise ValueError("B-spline design requires x in [0, 1]")
    interior = np.linspace(0.0, 1.0, int(M) + 2)[1:-1]
    knots = np.concatenate([np.zeros(4), interior, np.ones(4)])
    return BSpline.design_matrix(pts, knots, 3).toarray()


def fbe_design(x, kind, M, constant=True):
    if kind == "fourier":
        return fourier_design(x, M, constant=constant)
    if kind == "bspline":
        return bspline_design(x, M)
    raise ValueError(f"basis kind must be one of {BASIS_KINDS}, got {kind!r}")


@dataclass(frozen=True, eq=False)
class FbeModel:
    """Least-squares fit f(x) = sum_j beta_j B_j(x) in a finite basis."""

    kind: str
    M: int
    beta: np.ndarray
    constant: bool = True

    def __post_init__(self):
        if self.kind not in BASIS_KINDS:
            raise ValueError(f"basis kind must be one of {BASIS_KINDS}")
        if self.M < 1:
            raise ValueError("M must be at least 1")
        beta = np.asarray(self.beta, dtype=float).reshape(-1)
        if not np.all(np.isfinite(beta)):
            raise ValueError("coefficients must be finite")
        expected = (self.M + 4) if self.kind == "bspline" else self.M + int(self.constant)
        if beta.shape[0] != expected:
            raise ValueError(
                f"expected {expected} coefficients for kind={self.kind!r} M={self.M}"
            )
        beta = beta.copy()
        beta.setflags(write=False)
        object.__setattr__(self, "beta", beta)

    def predict(self, x):
        return predict_fbe(self, x)


def predict_fbe(model, x):
    """Evaluate the basis expansion; scalar in, scalar out."""
    arr = np.asarray(x, dtype=float)
    scalar = arr.ndim == 0
    design = fbe_design(arr.reshape(-1) if arr.ndim <= 1 else arr,
                        model.kind, model.M, constant=model.constant)
    out = design @ model.beta
    return float(out[0]) if scalar else out


def fit_fbe(data, kind="fourier", M=4, constant=True):
    """Least-squares basis-expansion fit.

    Falls back to a tiny ridge (1e-10) when the design is rank deficient;
    a solve failure after the fallback raises.
    """
    x = np.asarray(data.x, dtype=float)
    y = np.asarray(data.y, dtype=float).reshape(-1)
    design = fbe_design(x, kind, M, constant=constant)
    if design.shape[0] != y.shape[0]:
        raise ValueError("design rows and labels disagree in length")
    beta, _, rank, _ = np.linalg.lstsq(design, y, rcond=None)
    if rank < design.shape[1]:
        gram = design.T @ design + _RIDGE_FALLBACK * np.eye(design.shape[1])
        try:
            beta = np.linalg.solve(gram, design.T @ y)
        except np.linalg.LinAlgError as exc:
            raise np.linalg.LinAlgError(
                f"basis design rank deficient (rank {rank} < {design.shape[1]}) "
                f"and ridge fallback failed: {exc}"
            ) from exc
    return FbeModel(kind=kind, M=int(M), beta=beta, constant=constant)


def cv_select_truncation(data, kind="fourier", truncations=DEFAULT_CV_TRUNCATIONS,
                         n_folds=5, constant=True):
    """Pick the truncation M minimizing K-fold CV squared error.

    Folds are deterministic index stripes (i mod n_folds); ties break
    toward the smaller truncation.
    """
    x = np.asarray(data.x, dtype=float)
    y = np.asarray(data.y, dtype=float).reshape(-1)
    n = y.shape[0]
    if n < n_folds:
        raise ValueError(f"need at least {n_folds} points for {n_folds}-fold CV")
    if len(truncations) == 0:
        raise ValueError("empty truncation ladder")
    idx = np.arange(n)
    scores = []
    for M in truncations:
        sse = 0.0
        for fold in range(n_folds):
            val = idx % n_folds == fold
            train = ~val
            model = fit_fbe(
                PseudoLabelSet(x=x[train], residuals=y[train]),
                kind=kind, M=M, constant=constant,
            )
            resid = predict_fbe(model, x[val]) - y[val]
            sse += float(resid @ resid)
        scores.append((sse, int(M)))
    best_sse = min(s for s, _ in scores)
    best_m = min(m for s, m in scores if s == best_sse)
    return best_m, scores


@dataclass(frozen=True, eq=False)
class FbeTransferModel:
    """Two-phase FBE transfer estimate: prediction = source + offset.

    source is None in the forced-zero phase-1 mode (target-only FBE).
    """

    source: Optional[FbeModel]
    offset: FbeModel
    pseudo_labels: Optional[PseudoLabelSet] = None

    @property
    def m1(self):
        return None if self.source is None else self.source.M

    @property
    def m2(self):
        return self.offset.M

    def predict(self, x):
        off = predict_fbe(self.offset, x)
        if self.source is None:
            return off
        return predict_fbe(self.source, x) + off


def fit_fbe_transfer(source, target, kind="fourier", M1=None, M2=None,
                     truncations=DEFAULT_CV_TRUNCATIONS, n_folds=5, constant=True):
    """Two-phase FBE transfer: source fit, pseudo-labels, offset fit, sum.

    Truncations not supplied are selected per phase by K-fold CV over the
    ladder.  ``source=None`` forces the zero phase-1 model, reducing the
    procedure to target-only FBE on the raw labels.
    """
    if target is None or np.asarray(target.y).size < 1:
        raise ValueError("target dataset is empty")
    if source is None:
        phase1 = None
        residuals = np.asarray(target.y, dtype=float).reshape(-1)
    else:
        if M1 is None:
            M1, _ = cv_select_truncation(source, kind, truncations, n_folds, constant)
        phase1 = fit_fbe(source, kind=kind, M=M1, constant=constant)
        residuals = (
            np.asarray(target.y, dtype=float).reshape(-1)
            - predict_fbe(phase1, np.asarray(target.x, dtype=float))
        )
    pseudo = PseudoLabelSet(x=np.asarray(target.x, dtype=float), residuals=residuals)
    if M2 is None:
        M2, _ = cv_select_truncation(pseudo, kind, truncations, n_folds, constant)
    phase2 = fit_fbe(pseudo, kind=kind, M=M2, constant=constant)
    return FbeTransferModel(source=phase1, offset=phase2, pseudo_labels=pseudo)


def fit_misspecified_matern(data, nu_imposed, m0, C=1.0, rho=0.2):
    """Matern(nu')-kernel KRR with the polynomial schedule of the imposed fit.

    The imposed RKHS smoothness is m0' = nu' + d/2 and the weight decays as
    lam = C * n^(-2 m0' / (2 m0 + d)) where m0 is the schedule's
    truth-smoothness parameter.  Well-specified (m0' = m0) recovers the
    optimal-rate schedule; m0' < m0/2 lands in the saturation regime.
    """
    x = np.asarray(data.x, dtype=float)
    d = 1 if x.ndim == 1 else x.shape[1]
    n = x.shape[0]
    m0_imposed = float(nu_imposed) + d / 2.0
    schedule = RegSchedule(
        kind="matern_polynomial", C=C, alpha=float(m0), d=d, imposed_alpha=m0_imposed
    )
    lam = schedule_lambda(schedule, n)
    return fit(MaternKernel(float(nu_imposed), rho), data, lam)


def fbe_to_dict(model):
    """JSON payload (basis kind, truncation, coefficients)."""
    return {
        "kind": model.kind,
        "M": model.M,
        "constant": model.constant,
        "beta": [float(b) for b in model.beta],
    }


def fbe_from_dict(payload):
    return FbeModel(
        kind=payload["kind"],
        M=int(payload["M"]),
        beta=np.array(payload["beta"], dtype=float),
        constant=bool(payload.get("constant", True)),
    )
