"""Two-phase offset transfer learning with Gaussian-kernel KRR.

Phase 1 fits the source regression function on source data; phase 2
fits the offset (source-to-target shift) on pseudo-labels, the target
residuals under the phase-1 model.  The target estimate is the plain
sum of the two fits.  Both phases can adapt their smoothness over a
candidate grid (train/validate or Lepski), or run with fixed
regularization weights as the non-adaptive variant.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .adaptivity import (
    AdaptiveSelection,
    SmoothnessGrid,
    select_lepski,
    select_train_validate,
    selection_from_dict,
    selection_to_dict,
)
from .kernels import GaussianKernel
from .krr import FittedKrr, fit, fitted_from_dict, fitted_to_dict, predict, zero_model

__all__ = [
    "PhaseError",
    "PseudoLabelSet",
    "SatlModel",
    "build_pseudo_labels",
    "fit_otl_fixed",
    "fit_satl",
    "predict_satl",
    "satl_from_dict",
    "satl_to_dict",
]


class PhaseError(RuntimeError):
    """Fit or selection failure tagged with the phase that raised it."""

    def __init__(self, phase, message):
        self.phase = phase
        super().__init__(f"phase {phase} ({'source' if phase == 1 else 'offset'}): {message}")


@dataclass(frozen=True, eq=False)
class PseudoLabelSet:
    """Target covariates with residual labels under the phase-1 model.

    residuals[i] = y_T[i] - f_S_hat(x_T[i]); exposing them as ``y`` makes
    the set fit directly by the KRR machinery.
    """

    x: np.ndarray
    residuals: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        if x.ndim == 1:
            x = x.reshape(-1, 1)
        r = np.asarray(self.residuals, dtype=float).reshape(-1)
        if x.shape[0] != r.shape[0]:
            raise ValueError("covariates and residuals disagree in length")
        x = x.copy()
        r = r.copy()
        x.setflags(write=False)
        r.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "residuals", r)

    @property
    def y(self):
        return self.residuals

    @property
    def n(self):
        return self.x.shape[0]


def build_pseudo_labels(target, source_model):
    """Materialize the phase-2 labels e_i = y_T_i - f_S_hat(x_T_i)."""
    x = np.asarray(target.x, dtype=float)
    y = np.asarray(target.y, dtype=float).reshape(-1)
    return PseudoLabelSet(x=x, residuals=y - predict(source_model, x))


@dataclass(frozen=True, eq=False)
class SatlModel:
    """Composite transfer estimate: target prediction = source + offset.

    selection_source / selection_offset are None for non-adaptive fits.
    pseudo_labels is the materialized phase-2 training set, kept for
    inspection and exact reproducibility of phase 2.
    """

    source: FittedKrr
    offset: FittedKrr
    selection_source: Optional[AdaptiveSelection] = None
    selection_offset: Optional[AdaptiveSelection] = None
    pseudo_labels: Optional[PseudoLabelSet] = None

    def predict(self, x):
        return predict_satl(self, x)


def predict_satl(model, x):
    """Sum of the source and offset predictions; no renormalization."""
    return predict(model.source, x) + predict(model.offset, x)


def _adapt(data, grid, kernel, method, c0, split_fraction, phase):
    try:
        if method == "train_validate":
            return select_train_validate(data, grid, kernel, split_fraction)
        if method == "lepski":
            return select_lepski(data, grid, kernel, c0=c0)
        raise ValueError(f"unknown adapt_method: {method!r}")
    except Exception as exc:  # noqa: BLE001 - tag and chain, do not swallow
        raise PhaseError(phase, exc) from exc


def fit_satl(
    source,
    target,
    grid_source,
    grid_offset,
    kernel=None,
    adapt_method="train_validate",
    *,
    c0=1.0,
    split_fraction=0.5,
):
    """Fit the adaptive two-phase transfer estimator.

    Phase 1 adapts over grid_source and fits the source model on the
    source sample; phase 2 builds pseudo-labels on the target sample and
    adapts over grid_offset to fit the offset.  ``source=None`` is the
    empty-source degenerate mode: the source model is identically zero,
    so the pseudo-labels are the raw target labels and the procedure
    reduces to target-only adaptive KRR.
    """
    kernel = GaussianKernel() if kernel is None else kernel
    if target is None or target.n < 1:
        raise PhaseError(2, "target dataset is empty")

    if source is None:
        d = np.asarray(target.x).shape[1] if np.asarray(target.x).ndim > 1 else 1
        source_model = zero_model(kernel, d=d)
        sel_source = None
    else:
        sel_source, source_model = _adapt(
            source, grid_source, kernel, adapt_method, c0, split_fraction, phase=1
        )

    pseudo = build_pseudo_labels(target, source_model)
    sel_offset, offset_model = _adapt(
        pseudo, grid_offset, kernel, adapt_method, c0, split_fraction, phase=2
    )
    return SatlModel(
        source=source_model,
        offset=offset_model,
        selection_source=sel_source,
        selection_offset=sel_offset,
        pseudo_labels=pseudo,
    )


def fit_otl_fixed(source, target, kernel=None, lam1=None, lam2=None):
    """Non-adaptive two-phase transfer with supplied regularization weights.

    Both phases use the same kernel; lam1 regularizes the source fit on
    the full source sample, lam2 the offset fit on the pseudo-labeled
    target sample.
    """
    kernel = GaussianKernel() if kernel is None else kernel
    if lam1 is None or lam2 is None or lam1 <= 0.0 or lam2 <= 0.0:
        raise ValueError("lam1 and lam2 must be positive")
    if target is None or target.n < 1:
        raise PhaseError(2, "target dataset is empty")

    if source is None:
        d = np.asarray(target.x).shape[1] if np.asarray(target.x).ndim > 1 else 1
        source_model = zero_model(kernel, d=d)
    else:
        try:
            source_model = fit(kernel, source, float(lam1))
        except Exception as exc:  # noqa: BLE001
            raise PhaseError(1, exc) from exc

    pseudo = build_pseudo_labels(target, source_model)
    try:
        offset_model = fit(kernel, pseudo, float(lam2))
    except Exception as exc:  # noqa: BLE001
        raise PhaseError(2, exc) from exc
    return SatlModel(
        source=source_model,
        offset=offset_model,
        selection_source=None,
        selection_offset=None,
        pseudo_labels=pseudo,
    )


def satl_to_dict(model):
    """JSON payload: both component fits plus selection ledgers."""
    return {
        "source": fitted_to_dict(model.source),
        "offset": fitted_to_dict(model.offset),
        "selection_source": (
            None
            if model.selection_source is None
            else selection_to_dict(model.selection_source)
        ),
        "selection_offset": (
            None
            if model.selection_offset is None
            else selection_to_dict(model.selection_offset)
        ),
    }


def satl_from_dict(payload):
    """Inverse of satl_to_dict (pseudo-labels are not round-tripped)."""
    sel_s = payload.get("selection_source")
    sel_o = payload.get("selection_offset")
    return SatlModel(
        source=fitted_from_dict(payload["source"]),
        offset=fitted_from_dict(payload["offset"]),
        selection_source=None if sel_s is None else selection_from_dict(sel_s),
        selection_offset=None if sel_o is None else selection_from_dict(sel_o),
        pseudo_labels=None,
    )
