"""Smoothness-adaptive candidate selection for Gaussian-kernel KRR.

Two selection rules over a grid of smoothness candidates sharing one
exponential regularization schedule:

* a train/validate rule that fits each candidate on the first half of
  the sample and picks the candidate with the smallest empirical squared
  error on the held-out half, and
* a Lepski-style rule that fits each candidate on the full sample and
  accepts the largest candidate whose estimator stays within an
  (n / log n)-shaped threshold of every rougher candidate's estimator.

Both return the selection (with a full diagnostic ledger) together with
the fitted model for the chosen candidate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .evaluation import quadrature_l2_distance
from .kernels import GaussianKernel
from .krr import FittedKrr, RegSchedule, fit, predict, schedule_lambda

__all__ = [
    "SELECTION_METHODS",
    "AdaptiveSelection",
    "SmoothnessGrid",
    "build_grid",
    "select_lepski",
    "select_train_validate",
    "selection_from_dict",
    "selection_to_dict",
]

SELECTION_METHODS = ("train_validate", "lepski")

# Quadrature resolution for the default Lepski error oracle (d = 1).
DEFAULT_QUAD_POINTS = 1025


@dataclass(frozen=True)
class SmoothnessGrid:
    """Ordered smoothness candidates sharing one regularization schedule.

    candidates: strictly increasing positive smoothness values.
    C: schedule constant shared by every candidate.
    kind: schedule family; adaptive grids use the exponential schedule
        for the fixed-bandwidth Gaussian kernel.
    spacing: provenance tag ("explicit" or "q_spaced").
    d: ambient dimension entering the schedule exponents.
    theory_conformant: when True, every candidate must exceed d/2.
    """

    candidates: tuple
    C: float = 1.0
    kind: str = "gaussian_exponential"
    spacing: str = "explicit"
    d: int = 1
    theory_conformant: bool = False

    def __post_init__(self):
        cands = tuple(float(a) for a in self.candidates)
        object.__setattr__(self, "candidates", cands)
        if len(cands) < 1:
            raise ValueError("smoothness grid needs at least one candidate")
        if any(a <= 0.0 for a in cands):
            raise ValueError("smoothness candidates must be positive")
        if any(b <= a for a, b in zip(cands, cands[1:])):
            raise ValueError("smoothness candidates must be strictly increasing")
        if self.kind != "gaussian_exponential":
            raise ValueError(
                f"unsupported schedule kind for adaptive grids: {self.kind!r}"
            )
        if not self.C > 0.0:
            raise ValueError("schedule constant C must be positive")
        if int(self.d) != self.d or self.d < 1:
            raise ValueError("dimension must be a positive integer")
        if self.theory_conformant and any(a <= self.d / 2.0 for a in cands):
            raise ValueError("theory-conformant grids require every candidate > d/2")

    @property
    def n_candidates(self):
        return len(self.candidates)

    def schedule_for(self, alpha):
        """Regularization schedule attached to one candidate."""
        return RegSchedule(kind=self.kind, C=self.C, alpha=float(alpha), d=self.d)


def build_grid(
    n=None,
    d=1,
    *,
    candidates=None,
    Q=None,
    N=None,
    C=1.0,
    theory_conformant=False,
):
    """Build a smoothness grid, either from an explicit list or Q-spaced.

    Explicit mode: pass ``candidates``; the list is sorted ascending.
    Q-spaced mode: pass ``Q`` and ``N`` together with the sample size
    ``n``; candidates are {j Q / log n : j = 1..N}, so consecutive
    candidates are Q / log n apart.
    """
    if candidates is not None:
        if Q is not None or N is not None:
            raise ValueError("pass either an explicit candidate list or (Q, N)")
        cands = sorted(float(a) for a in candidates)
        if not cands:
            raise ValueError("explicit candidate list is empty")
        spacing = "explicit"
    else:
        if Q is None or N is None:
            raise ValueError("Q-spaced mode requires both Q and N")
        if n is None or not n >= 3:
            raise ValueError("Q-spaced mode requires n >= 3")
        if not Q > 0.0:
            raise ValueError("Q must be positive")
        if int(N) != N or N < 1:
            raise ValueError("N must be a positive integer")
        log_n = math.log(n)
        cands = [j * float(Q) / log_n for j in range(1, int(N) + 1)]
        spacing = "q_spaced"
    return SmoothnessGrid(
        candidates=tuple(cands),
        C=C,
        spacing=spacing,
        d=d,
        theory_conformant=theory_conformant,
    )


@dataclass(frozen=True)
class AdaptiveSelection:
    """Outcome of a smoothness-selection rule.

    alpha: chosen smoothness candidate.
    lam: regularization weight of the returned model.
    method: "train_validate" or "lepski".
    ledger: one record per candidate examined; train/validate records
        carry validation MSE, Lepski records carry the pairwise
        distance/threshold table.
    degenerate: Lepski only; True when no candidate beyond the smallest
        passed its comparisons and the fallback was taken.
    """

    alpha: float
    lam: float
    method: str
    ledger: tuple
    degenerate: bool = False

    def __post_init__(self):
        if self.method not in SELECTION_METHODS:
            raise ValueError(f"unknown selection method: {self.method!r}")
        ledger = tuple(self.ledger)
        object.__setattr__(self, "ledger", ledger)
        if len(ledger) == 0:
            raise ValueError("selection ledger cannot be empty")
        alphas = [rec["alpha"] for rec in ledger]
        if self.alpha not in alphas:
            raise ValueError("chosen alpha does not appear in the ledger")


@dataclass(frozen=True)
class _Split:
    """Minimal (x, y) view satisfying the fitting interface."""

    x: np.ndarray
    y: np.ndarray


def _data_arrays(data):
    x = np.asarray(data.x, dtype=float)
    if x.ndim == 1:
        x = x.reshape(-1, 1)
    y = np.asarray(data.y, dtype=float).reshape(-1)
    if x.shape[0] != y.shape[0]:
        raise ValueError("covariates and labels disagree in length")
    return x, y


def select_train_validate(data, grid, kernel=None, split_fraction=0.5, *, refit=False):
    """Select a smoothness candidate by a deterministic train/validate split.

    The first ``floor(n * split_fraction)`` points (index order; sampling
    already randomizes order) form the fitting half, the rest the
    validation half.  One KRR is fitted per candidate with
    lambda = schedule(alpha, n_fit); the candidate minimizing validation
    MSE wins, ties broken toward the largest (smoothest) candidate.

    Returns (selection, model).  By default the model is the winning fit
    on the fitting half (no refit); ``refit=True`` refits the winner on
    the full sample with lambda recomputed at n.
    """
    kernel = GaussianKernel() if kernel is None else kernel
    x, y = _data_arrays(data)
    n = x.shape[0]
    if not 0.0 < split_fraction < 1.0:
        raise ValueError("split_fraction must lie strictly in (0, 1)")
    n_fit = int(n * split_fraction)
    n_val = n - n_fit
    if n_fit < 1 or n_val < 1:
        raise ValueError("train/validate split leaves an empty half")
    d_fit = _Split(x[:n_fit], y[:n_fit])
    x_val = x[n_fit:]
    y_val = y[n_fit:]

    records = []
    best = None  # (val_mse, alpha, lam, model)
    for alpha in grid.candidates:  # ascending; <= update breaks ties upward
        lam = float(schedule_lambda(grid.schedule_for(alpha), n_fit))
        model = fit(kernel, d_fit, lam)
        resid = predict(model, x_val) - y_val
        val_mse = float(np.mean(resid * resid))
        records.append(
            {
                "alpha": float(alpha),
                "lambda": lam,
                "val_mse": val_mse,
                "n_fit": n_fit,
                "n_val": n_val,
            }
        )
        if best is None or val_mse <= best[0]:
            best = (val_mse, float(alpha), lam, model)

    _, alpha_hat, lam_hat, model = best
    if refit:
        lam_hat = float(schedule_lambda(grid.schedule_for(alpha_hat), n))
        model = fit(kernel, _Split(x, y), lam_hat)
    selection = AdaptiveSelection(
        alpha=alpha_hat,
        lam=lam_hat,
        method="train_validate",
        ledger=tuple(records),
    )
    return selection, model


def lepski_threshold(alpha_prime, n, d=1, c0=1.0):
    """Comparison threshold c0 * (n / log n)^(-alpha' / (2 alpha' + d))."""
    if n < 2:
        raise ValueError("threshold needs n >= 2")
    ratio = n / math.log(n)
    return float(c0) * ratio ** (-float(alpha_prime) / (2.0 * float(alpha_prime) + d))


def select_lepski(data, grid, kernel=None, c0=1.0, error_oracle=None):
    """Select a smoothness candidate by Lepski's comparison rule.

    Every candidate is fitted on the full sample with
    lambda = schedule(alpha, n).  A candidate is accepted when its
    estimator is within c0 * (n / log n)^(-alpha'/(2 alpha' + d)) of the
    estimator of every smaller candidate alpha'; the chosen candidate is
    the largest accepted one.  The smallest candidate is accepted
    vacuously, so when nothing else passes it is returned with
    ``degenerate=True``.

    error_oracle(f, g) must return the L2(mu) distance between two
    predictors; the default integrates against the uniform design with
    Simpson quadrature on DEFAULT_QUAD_POINTS points (d = 1 only).

    Returns (selection, model) for the chosen candidate.
    """
    kernel = GaussianKernel() if kernel is None else kernel
    if not c0 > 0.0:
        raise ValueError("c0 must be positive")
    x, y = _data_arrays(data)
    n = x.shape[0]
    if n < 2:
        raise ValueError("Lepski selection needs n >= 2")
    if error_oracle is None:
        def error_oracle(f, g):
            return quadrature_l2_distance(f, g, grid_points=DEFAULT_QUAD_POINTS)

    full = _Split(x, y)
    models = []
    lams = []
    for alpha in grid.candidates:
        lam = float(schedule_lambda(grid.schedule_for(alpha), n))
        models.append(fit(kernel, full, lam))
        lams.append(lam)

    records = []
    accepted_idx = []
    for i, alpha in enumerate(grid.candidates):
        comparisons = []
        ok_all = True
        for j in range(i):
            alpha_p = grid.candidates[j]
            dist = float(error_oracle(models[i], models[j]))
            thr = lepski_threshold(alpha_p, n, d=grid.d, c0=c0)
            ok = bool(dist <= thr)
            ok_all = ok_all and ok
            comparisons.append(
                {
                    "alpha_prime": float(alpha_p),
                    "distance": dist,
                    "threshold": thr,
                    "ok": ok,
                }
            )
        records.append(
            {
                "alpha": float(alpha),
                "lambda": lams[i],
                "accepted": ok_all,
                "comparisons": comparisons,
            }
        )
        if ok_all:
            accepted_idx.append(i)

    i_hat = max(accepted_idx)  # smallest candidate is always accepted
    degenerate = len(grid.candidates) > 1 and len(accepted_idx) == 1
    selection = AdaptiveSelection(
        alpha=float(grid.candidates[i_hat]),
        lam=lams[i_hat],
        method="lepski",
        ledger=tuple(records),
        degenerate=degenerate,
    )
    return selection, models[i_hat]


def selection_to_dict(selection):
    """JSON-ready payload with the full diagnostic ledger."""
    return {
        "method": selection.method,
        "alpha": selection.alpha,
        "lambda": selection.lam,
        "degenerate": selection.degenerate,
        "ledger": [dict(rec) for rec in selection.ledger],
    }


def selection_from_dict(payload):
    ledger = tuple(dict(rec) for rec in payload["ledger"])
    return AdaptiveSelection(
        alpha=float(payload["alpha"]),
        lam=float(payload["lambda"]),
        method=str(payload["method"]),
        ledger=ledger,
        degenerate=bool(payload.get("degenerate", False)),
    )
