"""Kernel evaluations, closed-form cross-checks, and Gram conditioning.

Expected values are frozen from independent closed-form evaluation (math
module arithmetic, not the package's own code paths).
"""
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from satl.kernels import (
    GaussianKernel,
    GramFactorizationError,
    MaternKernel,
    chol_with_jitter,
    eval_gaussian,
    eval_matern,
    gram,
    kernel_from_dict,
    kernel_to_dict,
    matern_bessel_profile,
    matern_half_integer_profile,
)

# ---------------------------------------------------------------------------
# frozen oracle literals (independent arithmetic, see module docstring)

EXP_M2 = 0.1353352832366127          # exp(-2)
EXP_MHALF = 0.6065306597126334       # exp(-1/2)
EXP_M1 = 0.36787944117144233         # exp(-1)
MATERN_32_AT_1 = 0.4833577245965077  # (1+sqrt3)*exp(-sqrt3)
MATERN_52_AT_1 = 0.5239941088318203  # (1+sqrt5+5/3)*exp(-sqrt5)


class TestEvalGaussian:
    def test_same_point_is_one(self):
        assert eval_gaussian(GaussianKernel(1.0), 0.0, 0.0) == 1.0

    def test_unit_distance(self):
        k = eval_gaussian(GaussianKernel(1.0), 0.0, 1.0)
        assert k == pytest.approx(EXP_MHALF, abs=1e-15)

    def test_derived_bandwidth_case(self):
        # ell=0.2: exp(-0.16/0.08) = exp(-2)
        k = eval_gaussian(GaussianKernel(0.2), 0.3, 0.7)
        assert k == pytest.approx(EXP_M2, abs=1e-15)

    def test_multidimensional_points(self):
        k = eval_gaussian(GaussianKernel(1.0), [0.0, 0.0], [0.6, 0.8])
        assert k == pytest.approx(math.exp(-0.5), abs=1e-15)

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(ValueError):
            eval_gaussian(GaussianKernel(1.0), [0.0, 0.0], [1.0])

    def test_bad_bandwidth_rejected(self):
        with pytest.raises(ValueError):
            GaussianKernel(0.0)
        with pytest.raises(ValueError):
            GaussianKernel(-1.0)

    @given(
        r=st.floats(min_value=1e-6, max_value=2.0),
        ell=st.floats(min_value=0.1, max_value=3.0),
    )
    def test_range_and_monotonicity(self, r, ell):
        # domain restricted to unit-cube distances and usable bandwidths so the
        # exact value stays above double-precision underflow
        k = GaussianKernel(ell)
        v = eval_gaussian(k, 0.0, r)
        assert 0.0 < v < 1.0
        # strictly decreasing in the distance
        assert eval_gaussian(k, 0.0, r * 1.01) < v


class TestEvalMatern:
    def test_zero_distance_limit(self):
        assert eval_matern(MaternKernel(0.5, 1.0), 0.0) == 1.0
        assert eval_matern(MaternKernel(2.01, 0.2), 0.0) == 1.0

    def test_half_closed_form(self):
        assert eval_matern(MaternKernel(0.5, 1.0), 1.0) == pytest.approx(EXP_M1, abs=1e-12)

    def test_three_halves_closed_form(self):
        assert eval_matern(MaternKernel(1.5, 1.0), 1.0) == pytest.approx(
            MATERN_32_AT_1, abs=1e-12
        )

    def test_five_halves_closed_form(self):
        assert eval_matern(MaternKernel(2.5, 1.0), 1.0) == pytest.approx(
            MATERN_52_AT_1, abs=1e-12
        )

    def test_bad_parameters_rejected(self):
        with pytest.raises(ValueError):
            MaternKernel(0.0, 1.0)
        with pytest.raises(ValueError):
            MaternKernel(1.0, 0.0)

    def test_negative_distance_rejected(self):
        with pytest.raises(ValueError):
            eval_matern(MaternKernel(1.5, 1.0), -0.1)

    @pytest.mark.parametrize("nu,p", [(0.5, 0), (1.5, 1), (2.5, 2)])
    @pytest.mark.parametrize("rho", [0.2, 1.0])
    def test_bessel_path_matches_closed_forms(self, nu, p, rho):
        # the general fractional-order path must agree with the independent
        # half-integer closed forms to 1e-8 over r in [1e-6, 10]
        r = np.concatenate(
            [np.geomspace(1e-6, 1.0, 200), np.linspace(1.0, 10.0, 200)]
        )
        s = math.sqrt(2.0 * nu) * r / rho
        general = matern_bessel_profile(nu, s)
        closed = matern_half_integer_profile(p, s)
        assert np.max(np.abs(general - closed)) <= 1e-8

    @given(
        nu=st.floats(min_value=0.3, max_value=5.0),
        rho=st.floats(min_value=0.05, max_value=2.0),
        r=st.floats(min_value=1e-6, max_value=10.0),
    )
    @settings(max_examples=200)
    def test_range_property(self, nu, rho, r):
        v = eval_matern(MaternKernel(nu, rho), r)
        assert 0.0 <= v <= 1.0
        if v == 0.0:
            # underflow of K_nu at extreme scaled distances only
            assert math.sqrt(2 * nu) * r / rho > 500.0

    def test_fractional_order_sanity(self):
        # fractional nu runs the Bessel path; bracket by neighbour half-integers
        lo = eval_matern(MaternKernel(1.5, 1.0), 1.0)
        mid = eval_matern(MaternKernel(2.01, 1.0), 1.0)
        hi = eval_matern(MaternKernel(2.5, 1.0), 1.0)
        assert lo < mid < hi


class TestGram:
    def test_single_point(self):
        g = gram(GaussianKernel(1.0), [0.0])
        assert g.matrix.shape == (1, 1)
        assert g.matrix[0, 0] == 1.0

    def test_two_point_matrix(self):
        g = gram(GaussianKernel(1.0), [0.0, 1.0])
        expected = np.array([[1.0, EXP_MHALF], [EXP_MHALF, 1.0]])
        np.testing.assert_allclose(g.matrix, expected, atol=1e-15)

    def test_matern_grid_jitter_tier(self):
        # observed tier frozen from running the factorization
        pts = np.linspace(0.0, 1.0, 50)
        g = gram(MaternKernel(2.01, 0.2), pts)
        assert g.jitter <= 1e-10

    def test_symmetry_exact(self):
        rng = np.random.default_rng(3)
        pts = rng.random((60, 2))
        for kern in (GaussianKernel(0.3), MaternKernel(1.7, 0.4)):
            g = gram(kern, pts)
            assert np.max(np.abs(g.matrix - g.matrix.T)) == 0.0

    @pytest.mark.parametrize("n", [2, 20, 200])
    def test_psd_after_jitter(self, n):
        rng = np.random.default_rng(n)
        pts = rng.random(n)
        for kern in (
            GaussianKernel(0.2),
            MaternKernel(1.01, 0.2),
            MaternKernel(4.01, 0.2),
        ):
            g = gram(kern, pts)  # raises if the whole ladder fails
            # factor reproduces the jittered matrix
            rebuilt = g.chol_lower @ g.chol_lower.T
            np.testing.assert_allclose(
                rebuilt, g.matrix + g.jitter * np.eye(n), atol=1e-10
            )

    def test_degenerate_error_carries_hash(self):
        # duplicated points with an exhausted ladder cannot be factorized
        pts = np.zeros(3)
        with pytest.raises(GramFactorizationError) as exc:
            gram(GaussianKernel(1.0), pts, ladder=(0.0,))
        assert exc.value.points_hash

    def test_jitter_ladder_helper(self):
        mat = np.eye(2)
        chol, jit = chol_with_jitter(mat)
        assert jit == 0.0
        np.testing.assert_allclose(chol, np.eye(2))
        singular = np.ones((2, 2))
        chol, jit = chol_with_jitter(singular)
        assert jit > 0.0

    def test_empty_points_rejected(self):
        with pytest.raises(ValueError):
            gram(GaussianKernel(1.0), [])


class TestSerialization:
    def test_round_trip(self):
        for kern in (GaussianKernel(0.35), MaternKernel(2.01, 0.7)):
            assert kernel_from_dict(kernel_to_dict(kern)) == kern

    def test_unknown_family_rejected(self):
        with pytest.raises(ValueError):
            kernel_from_dict({"family": "laplace"})
