"""Stationary kernels and Gram-matrix assembly.

Provides the fixed-bandwidth Gaussian kernel used as the imposed
regression kernel and the Matern family used both to generate
ground-truth sample paths and as a deliberately misspecified imposed
kernel. Gram matrices are exactly symmetric by construction and carry
the diagonal jitter their Cholesky factorization required.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, kv

# escalating diagonal boosts tried when a Cholesky factorization fails
JITTER_LADDER = (0.0, 1e-12, 1e-10, 1e-8)


class GramFactorizationError(np.linalg.LinAlgError):
    """Gram matrix stayed numerically non-PD through the whole jitter ladder."""

    def __init__(self, message, points_hash=""):
        super().__init__(message)
        self.points_hash = points_hash


def as_points(x, d=None):
    """Coerce input to an (n, d) float array; 1-D input means n points in d=1."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    elif arr.ndim != 2:
        raise ValueError(f"points must be 0-, 1- or 2-dimensional, got shape {arr.shape}")
    if d is not None and arr.shape[1] != d:
        raise ValueError(f"expected points of dimension {d}, got {arr.shape[1]}")
    return arr


def _sqdist(a, b):
    # one (n, m) buffer per coordinate; (x-y)**2 is bitwise symmetric, so the
    # result is exactly symmetric when a is b
    out = np.zeros((a.shape[0], b.shape[0]))
    for k in range(a.shape[1]):
        out += (a[:, k][:, None] - b[:, k][None, :]) ** 2
    return out


@dataclass(frozen=True)
class GaussianKernel:
    """k(x, y) = exp(-||x - y||^2 / (2 ell^2)) with fixed bandwidth ell."""

    bandwidth: float = 0.2

    def __post_init__(self):
        if not (np.isfinite(self.bandwidth) and self.bandwidth > 0):
            raise ValueError(f"bandwidth must be positive and finite, got {self.bandwidth}")

    def matrix(self, a, b):
        """Kernel evaluations between two point sets, shape (len(a), len(b))."""
        a = as_points(a)
        b = as_points(b, a.shape[1])
        return np.exp(_sqdist(a, b) / (-2.0 * self.bandwidth**2))


@dataclass(frozen=True)
class MaternKernel:
    """Isotropic Matern correlation with smoothness nu and range rho.

    k(r) = 2^(1-nu)/Gamma(nu) * (sqrt(2 nu) r / rho)^nu * K_nu(sqrt(2 nu) r / rho),
    with k(0) = 1 handled explicitly. Fractional nu runs the Bessel path;
    half-integer nu dispatches to the closed forms.
    """

    nu: float
    rho: float = 0.2

    def __post_init__(self):
        if not (np.isfinite(self.nu) and self.nu > 0):
            raise ValueError(f"nu must be positive and finite, got {self.nu}")
        if not (np.isfinite(self.rho) and self.rho > 0):
            raise ValueError(f"rho must be positive and finite, got {self.rho}")

    def radial(self, r):
        """Correlation at distance(s) r >= 0."""
        r = np.asarray(r, dtype=float)
        if np.any(r < 0) or not np.all(np.isfinite(r)):
            raise ValueError("distances must be finite and nonnegative")
        s = math.sqrt(2.0 * self.nu) * r / self.rho
        p = _half_integer_order(self.nu)
        if p is not None:
            out = matern_half_integer_profile(p, s)
        else:
            out = matern_bessel_profile(self.nu, s)
        return out if out.ndim else float(out)

    def matrix(self, a, b):
        """Kernel evaluations between two point sets, shape (len(a), len(b))."""
        a = as_points(a)
        b = as_points(b, a.shape[1])
        return np.asarray(self.radial(np.sqrt(_sqdist(a, b))))


Kernel = GaussianKernel | MaternKernel


def _half_integer_order(nu):
    p = nu - 0.5
    rounded = round(p)
    if rounded >= 0 and abs(p - rounded) < 1e-12:
        return int(rounded)
    return None


def matern_bessel_profile(nu, s):
    """General Matern profile 2^(1-nu)/Gamma(nu) s^nu K_nu(s) on scaled distances s."""
    s = np.asarray(s, dtype=float)
    out = np.ones_like(s)
    # below ~1e-40 the profile is 1 to beyond double precision (1 - k = O(s^(2 min(nu,1))))
    mask = s > 1e-40
    sm = s[mask]
    log_coeff = (1.0 - nu) * math.log(2.0) - gammaln(nu)
    vals = np.exp(log_coeff + nu * np.log(sm)) * kv(nu, sm)
    out[mask] = np.minimum(np.nan_to_num(vals, nan=0.0), 1.0)
    return out


def matern_half_integer_profile(p, s):
    """Closed form for nu = p + 1/2: exp(-s) * p!/(2p)! * sum_i (p+i)!/(i!(p-i)!) (2s)^(p-i)."""
    s = np.asarray(s, dtype=float)
    poly = np.zeros_like(s)
    for i in range(p + 1):
        coeff = (
            math.factorial(p)
            * math.factorial(p + i)
            / (math.factorial(2 * p) * math.factorial(i) * math.factorial(p - i))
        )
        poly += coeff * (2.0 * s) ** (p - i)
    return np.exp(-s) * poly


def eval_gaussian(kernel, x, y):
    """Gaussian kernel value between two points (1-D input is one point in R^d)."""
    xa = np.atleast_1d(np.asarray(x, dtype=float)).reshape(1, -1)
    ya = np.atleast_1d(np.asarray(y, dtype=float)).reshape(1, -1)
    if xa.shape != ya.shape:
        raise ValueError(f"point dimensions differ: {xa.shape[1]} vs {ya.shape[1]}")
    return float(kernel.matrix(xa, ya)[0, 0])


def eval_matern(kernel, r):
    """Matern kernel value at distance r >= 0 (r = 0 returns exactly 1)."""
    return kernel.radial(r)


def _points_hash(points):
    # multiset hash: order-independent via lexicographic row sort
    rows = np.ascontiguousarray(np.sort(points.view(float).reshape(points.shape), axis=0))
    return hashlib.sha256(rows.tobytes()).hexdigest()


def chol_with_jitter(matrix, ladder=JITTER_LADDER, points_hash=""):
    """Lower Cholesky factor of matrix + jitter*I, escalating jitter through the ladder.

    Returns (lower_factor, jitter_used); raises GramFactorizationError when
    even the largest jitter fails.
    """
    n = matrix.shape[0]
    for jit in ladder:
        try:
            target = matrix if jit == 0.0 else matrix + jit * np.eye(n)
            return np.linalg.cholesky(target), jit
        except np.linalg.LinAlgError:
            continue
    raise GramFactorizationError(
        f"Cholesky failed for {n}x{n} matrix at max jitter {max(ladder)}",
        points_hash=points_hash,
    )


@dataclass(frozen=True, eq=False)
class GramMatrix:
    """Symmetric kernel matrix with the jitter its factorization required.

    chol_lower satisfies chol_lower @ chol_lower.T == matrix + jitter * I.
    """

    matrix: np.ndarray
    points: np.ndarray
    jitter: float
    chol_lower: np.ndarray


def gram(kernel, points, ladder=JITTER_LADDER):
    """Assemble the Gram matrix of kernel on points and validate it is numerically PD.

    Symmetry holds exactly: the upper triangle is computed and mirrored.
    """
    pts = as_points(points)
    if pts.shape[0] < 1:
        raise ValueError("gram requires at least one point")
    if not np.all(np.isfinite(pts)):
        raise ValueError("points must be finite")
    full = kernel.matrix(pts, pts)
    upper = np.triu(full)
    sym = upper + np.triu(full, 1).T
    chol, jit = chol_with_jitter(sym, ladder, points_hash=_points_hash(pts))
    for arr in (sym, pts, chol):
        arr.setflags(write=False)
    return GramMatrix(matrix=sym, points=pts, jitter=jit, chol_lower=chol)


def kernel_to_dict(kernel):
    """JSON-ready description of a kernel."""
    if isinstance(kernel, GaussianKernel):
        return {"family": "gaussian", "bandwidth": kernel.bandwidth}
    if isinstance(kernel, MaternKernel):
        return {"family": "matern", "nu": kernel.nu, "rho": kernel.rho}
    raise ValueError(f"unknown kernel type {type(kernel).__name__}")


def kernel_from_dict(spec):
    """Inverse of kernel_to_dict."""
    family = spec.get("family")
    if family == "gaussian":
        return GaussianKernel(bandwidth=spec["bandwidth"])
    if family == "matern":
        return MaternKernel(nu=spec["nu"], rho=spec["rho"])
    raise ValueError(f"unknown kernel family {family!r}")
