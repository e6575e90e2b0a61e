"""Ground-truth function sampling and synthetic dataset generation.

Smooth ground truths are Matern Gaussian-process sample paths on a fixed
uniform grid of [0,1], evaluated off-grid by a natural cubic spline.
Datasets draw iid Uniform[0,1]^d covariates and add Gaussian noise.
Everything is a pure function of an integer seed: one seed drives fixed,
mutually independent substreams (path, covariates, noise, per domain),
so growing n extends a dataset without perturbing its prefix.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, replace
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicSpline

from satl.kernels import chol_with_jitter, gram, kernel_from_dict, kernel_to_dict

DEFAULT_GRID_SIZE = 2048

# fixed substream indices of the per-trial seed (recorded in run metadata)
SUBSTREAM = {
    "path": 0,
    "covariate": 1,
    "noise": 2,
    "offset_path": 3,
    "source_covariate": 4,
    "source_noise": 5,
}


def derive_seed(seed, *key):
    """Derive a child seed from (seed, key) via counter-based splitting."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, np.uint64)[0])


def _substream_rng(seed, index):
    return np.random.default_rng(
        np.random.SeedSequence(entropy=int(seed), spawn_key=(int(index),))
    )


@dataclass(frozen=True, eq=False)
class SampledFunction:
    """A function realized as values on a strictly increasing grid of [0,1].

    Off-grid evaluation follows the interpolation rule (natural cubic
    spline); evaluation outside the grid hull is an error.
    """

    grid: np.ndarray
    values: np.ndarray
    seed: int
    kernel: object
    rule: str = "natural_cubic_spline"

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if grid.ndim != 1 or values.shape != grid.shape:
            raise ValueError("grid and values must be 1-D arrays of equal length")
        if grid.size >= 2 and not np.all(np.diff(grid) > 0):
            raise ValueError("grid must be strictly increasing")
        if not (np.all(np.isfinite(grid)) and np.all(np.isfinite(values))):
            raise ValueError("grid and values must be finite")
        grid.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)

    def _spline(self):
        sp = self.__dict__.get("_spline_obj")
        if sp is None:
            sp = CubicSpline(self.grid, self.values, bc_type="natural", extrapolate=False)
            object.__setattr__(self, "_spline_obj", sp)
        return sp

    def __call__(self, x):
        return evaluate(self, x)


def evaluate(f, x):
    """Interpolated value(s) of a SampledFunction; scalar in, scalar out."""
    arr = np.asarray(x, dtype=float)
    scalar = arr.ndim == 0
    if arr.ndim == 2 and arr.shape[1] == 1:
        arr = arr[:, 0]
    if arr.ndim > 1:
        raise ValueError("SampledFunction is one-dimensional")
    lo, hi = f.grid[0], f.grid[-1]
    if np.any(arr < lo) or np.any(arr > hi):
        raise ValueError(f"evaluation point outside interpolation hull [{lo}, {hi}]")
    out = f._spline()(arr)
    return float(out) if scalar else np.asarray(out, dtype=float)


@lru_cache(maxsize=16)
def _grid_factor(kernel, grid_size):
    # the path-sampling Cholesky factor depends only on (kernel, grid size);
    # cache it so repeated trials pay one factorization
    grid = np.linspace(0.0, 1.0, grid_size)
    if grid_size == 1:
        return grid, np.array([[1.0]])
    g = gram(kernel, grid)
    factor = np.array(g.chol_lower)
    factor.setflags(write=False)
    return grid, factor

_grid_factor.__doc__ = "Cached (grid, Cholesky factor) for path sampling."


def sample_gp(kernel, grid_size=DEFAULT_GRID_SIZE, seed=0):
    """Draw one zero-mean GP sample path N(0, Gram) on the uniform grid.

    Values are the Cholesky factor of the (jittered) Gram applied to a
    standard normal vector from the path substream of seed.
    """
    if grid_size < 2:
        raise ValueError("grid_size must be at least 2")
    grid, factor = _grid_factor(kernel, int(grid_size))
    rng = _substream_rng(seed, SUBSTREAM["path"])
    values = factor @ rng.standard_normal(grid_size)
    return SampledFunction(grid=grid, values=values, seed=int(seed), kernel=kernel)


@dataclass(frozen=True, eq=False)
class Dataset:
    """Covariates, responses, and the noise/seed bookkeeping that built them."""

    x: np.ndarray
    y: np.ndarray
    domain: str = "target"
    sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        x = np.atleast_2d(np.asarray(self.x, dtype=float))
        if x.shape[0] == 1 and np.asarray(self.y).size != 1:
            x = x.T
        y = np.asarray(self.y, dtype=float).reshape(-1)
        if x.shape[0] != y.shape[0] or y.shape[0] < 1:
            raise ValueError("x and y must hold the same positive number of rows")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise ValueError("data must be finite")
        if self.domain not in ("target", "source"):
            raise ValueError(f"domain must be 'target' or 'source', got {self.domain!r}")
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def n(self):
        return self.x.shape[0]

    @property
    def d(self):
        return self.x.shape[1]

    def slice(self, start, stop):
        """Row range [start, stop) as a Dataset with the same tags."""
        return Dataset(x=self.x[start:stop].copy(), y=self.y[start:stop].copy(),
                       domain=self.domain, sigma=self.sigma, seed=self.seed)


def make_dataset(f, n, sigma, seed, domain="target", d=1):
    """Synthesize y_i = f(x_i) + sigma * eps_i with iid Uniform[0,1]^d covariates.

    Covariates and noise come from independent substreams selected by the
    domain tag, so target and source draws never collide and growing n is
    prefix-stable.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if domain == "target":
        cov_key, noise_key = SUBSTREAM["covariate"], SUBSTREAM["noise"]
    elif domain == "source":
        cov_key, noise_key = SUBSTREAM["source_covariate"], SUBSTREAM["source_noise"]
    else:
        raise ValueError(f"domain must be 'target' or 'source', got {domain!r}")
    x = _substream_rng(seed, cov_key).random((int(n), int(d)))
    eps = _substream_rng(seed, noise_key).standard_normal(int(n))
    fx = np.asarray(f(x), dtype=float).reshape(-1)
    return Dataset(x=x, y=fx + sigma * eps, domain=domain, sigma=float(sigma),
                   seed=int(seed))


def grid_l2_norm(values, grid):
    """L2([0,1]) norm of grid values by trapezoid quadrature."""
    return float(np.sqrt(np.trapezoid(np.asarray(values) ** 2, np.asarray(grid))))


@dataclass(frozen=True, eq=False)
class TransferScenario:
    """Target function plus a normalized offset: f_S = f_T + h * f_delta.

    offset_fn carries unit grid L2 norm; h sets the source-target gap.
    """

    target_fn: SampledFunction
    offset_fn: SampledFunction
    h: float
    nu_target: float
    nu_offset: float

    def source_values(self, x):
        """Source regression function f_S at x."""
        if self.h == 0.0:
            return evaluate(self.target_fn, x)
        return evaluate(self.target_fn, x) + self.h * evaluate(self.offset_fn, x)

    @property
    def source_fn(self):
        return self.source_values


def make_transfer_scenario(nu_target, nu_offset, h, grid_size=DEFAULT_GRID_SIZE,
                           seed=0, rho=0.2):
    """Build the posterior-drift pair (f_T, f_S) from two Matern sample paths.

    The raw offset path is rescaled to unit grid L2 norm before h is
    applied, so h alone controls the source-target distance.
    """
    from satl.kernels import MaternKernel

    if h < 0:
        raise ValueError("h must be nonnegative")
    target_fn = sample_gp(MaternKernel(nu_target, rho), grid_size, seed)
    raw = sample_gp(MaternKernel(nu_offset, rho), grid_size,
                    derive_seed(seed, SUBSTREAM["offset_path"]))
    norm = grid_l2_norm(raw.values, raw.grid)
    if norm < 1e-12:
        raise ValueError("offset path is numerically zero; cannot normalize")
    offset_fn = SampledFunction(grid=raw.grid, values=raw.values / norm,
                                seed=raw.seed, kernel=raw.kernel)
    return TransferScenario(target_fn=target_fn, offset_fn=offset_fn, h=float(h),
                            nu_target=float(nu_target), nu_offset=float(nu_offset))


# ---------------------------------------------------------------------------
# serialization: CSV payload plus a JSON metadata sidecar


def _meta_path(path):
    path = Path(path)
    return path.with_suffix(".meta.json")


def save_dataset(data, path):
    """Write a dataset as CSV (x..., y, domain) with a JSON metadata sidecar."""
    path = Path(path)
    cols = [f"x{k}" for k in range(data.d)] if data.d > 1 else ["x"]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(cols + ["y", "domain"])
        for i in range(data.n):
            writer.writerow([repr(float(v)) for v in data.x[i]]
                            + [repr(float(data.y[i])), data.domain])
    meta = {"n": data.n, "d": data.d, "domain": data.domain,
            "sigma": data.sigma, "seed": data.seed}
    _meta_path(path).write_text(json.dumps(meta, indent=1, sort_keys=True))


def load_dataset(path):
    """Inverse of save_dataset."""
    path = Path(path)
    meta = json.loads(_meta_path(path).read_text())
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    body = rows[1:]
    d = meta["d"]
    x = np.array([[float(v) for v in row[:d]] for row in body])
    y = np.array([float(row[d]) for row in body])
    return Dataset(x=x, y=y, domain=meta["domain"], sigma=meta["sigma"],
                   seed=meta["seed"])


def save_function(f, path):
    """Write a sampled function as CSV (grid, value) plus kernel/seed metadata."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["grid", "value"])
        for g, v in zip(f.grid, f.values):
            writer.writerow([repr(float(g)), repr(float(v))])
    meta = {"kernel": kernel_to_dict(f.kernel), "seed": f.seed,
            "grid_size": int(f.grid.size), "rule": f.rule}
    _meta_path(path).write_text(json.dumps(meta, indent=1, sort_keys=True))


def load_function(path):
    """Inverse of save_function."""
    path = Path(path)
    meta = json.loads(_meta_path(path).read_text())
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    grid = np.array([float(r[0]) for r in rows[1:]])
    values = np.array([float(r[1]) for r in rows[1:]])
    return SampledFunction(grid=grid, values=values, seed=meta["seed"],
                           kernel=kernel_from_dict(meta["kernel"]), rule=meta["rule"])
