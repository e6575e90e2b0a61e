"""Tests for smoothness-adaptive candidate selection."""

import json
import math
from collections import Counter

import numpy as np
import pytest

import satl.adaptivity as adaptivity_mod
from satl.adaptivity import (
    AdaptiveSelection,
    SmoothnessGrid,
    build_grid,
    lepski_threshold,
    select_lepski,
    select_train_validate,
    selection_from_dict,
    selection_to_dict,
)
from satl.datagen import Dataset, make_dataset, sample_gp
from satl.evaluation import simpson_l2_error
from satl.kernels import GaussianKernel, MaternKernel
from satl.krr import FittedKrr, fit as krr_fit, predict, schedule_lambda, zero_model

KERN = GaussianKernel()

# Pinned threshold: 1.5 * (2000 / log 2000)^(-2/5), independently recomputed
# below from the closed form.
THRESHOLD_A2_N2000_C15 = 0.1614452695902579


def _uniform_x(n, lo=0.0, hi=1.0):
    return np.linspace(lo, hi, n).reshape(-1, 1)


def _noise_free_dataset(n=60):
    """Noise-free labels from a Gaussian-kernel expansion on [0, 1]."""
    anchors = np.array([[0.2], [0.5], [0.8]])
    beta = np.array([1.0, -1.2, 0.7])
    x = _uniform_x(n)
    y = KERN.matrix(x, anchors) @ beta
    data = Dataset(x=x, y=y, domain="target", sigma=0.0, seed=0)
    exact = FittedKrr(x=anchors, alpha=beta, kernel=KERN, lam=0.0)
    return data, exact


# ---------------------------------------------------------------------------
# SmoothnessGrid / build_grid


class TestSmoothnessGrid:
    def test_requires_candidates(self):
        with pytest.raises(ValueError):
            SmoothnessGrid(candidates=())

    def test_requires_strictly_increasing(self):
        with pytest.raises(ValueError):
            SmoothnessGrid(candidates=(2.0, 1.0))
        with pytest.raises(ValueError):
            SmoothnessGrid(candidates=(1.0, 1.0))

    def test_requires_positive_candidates(self):
        with pytest.raises(ValueError):
            SmoothnessGrid(candidates=(-1.0, 2.0))

    def test_requires_positive_constant(self):
        with pytest.raises(ValueError):
            SmoothnessGrid(candidates=(1.0,), C=0.0)

    def test_theory_conformant_requires_above_half_dimension(self):
        with pytest.raises(ValueError):
            SmoothnessGrid(candidates=(0.4, 1.0), d=1, theory_conformant=True)
        grid = SmoothnessGrid(candidates=(0.6, 1.0), d=1, theory_conformant=True)
        assert grid.n_candidates == 2

    def test_rejects_polynomial_schedule(self):
        with pytest.raises(ValueError):
            SmoothnessGrid(candidates=(1.0,), kind="matern_polynomial")

    def test_schedule_for_matches_candidate(self):
        grid = SmoothnessGrid(candidates=(1.0, 2.0), C=1.5, d=1)
        sched = grid.schedule_for(2.0)
        assert sched.alpha == 2.0
        assert sched.C == 1.5
        assert sched.kind == "gaussian_exponential"


class TestBuildGrid:
    def test_explicit_reference_list(self):
        grid = build_grid(candidates=[1, 2, 3, 4, 5])
        assert grid.candidates == (1.0, 2.0, 3.0, 4.0, 5.0)
        assert grid.spacing == "explicit"

    def test_explicit_sorts_input(self):
        grid = build_grid(candidates=[3.0, 1.0, 2.0])
        assert grid.candidates == (1.0, 2.0, 3.0)

    def test_explicit_empty_rejected(self):
        with pytest.raises(ValueError):
            build_grid(candidates=[])

    def test_q_spaced_substitution(self):
        # n = e^10 so log n = 10: candidates j * Q / log n = {0.1, 0.2, 0.3}
        grid = build_grid(n=math.exp(10.0), Q=1.0, N=3)
        assert np.allclose(grid.candidates, (0.1, 0.2, 0.3), rtol=1e-12)
        assert grid.spacing == "q_spaced"

    def test_q_spacing_shrinks_like_log_ratio(self):
        # consecutive spacing is Q / log n, so doubling n shrinks spacing
        # by exactly log(n) / log(2n)
        n, Q = 500.0, 2.5
        g1 = build_grid(n=n, Q=Q, N=4)
        g2 = build_grid(n=2 * n, Q=Q, N=4)
        d1 = np.diff(g1.candidates)
        d2 = np.diff(g2.candidates)
        assert np.allclose(d1, Q / math.log(n), rtol=1e-12)
        ratio = d1[0] / d2[0]
        assert np.isclose(ratio, math.log(2 * n) / math.log(n), rtol=1e-12)

    def test_q_spaced_validation(self):
        with pytest.raises(ValueError):
            build_grid(n=2, Q=1.0, N=3)
        with pytest.raises(ValueError):
            build_grid(n=100, Q=0.0, N=3)
        with pytest.raises(ValueError):
            build_grid(n=100, Q=1.0, N=0)
        with pytest.raises(ValueError):
            build_grid(n=100, Q=1.0)  # missing N
        with pytest.raises(ValueError):
            build_grid(candidates=[1.0], Q=1.0, N=2)  # both modes at once


# ---------------------------------------------------------------------------
# AdaptiveSelection bookkeeping


class TestAdaptiveSelection:
    def test_method_tag_validated(self):
        with pytest.raises(ValueError):
            AdaptiveSelection(
                alpha=1.0, lam=0.1, method="oracle", ledger=({"alpha": 1.0},)
            )

    def test_ledger_cannot_be_empty(self):
        with pytest.raises(ValueError):
            AdaptiveSelection(alpha=1.0, lam=0.1, method="lepski", ledger=())

    def test_chosen_alpha_must_appear_in_ledger(self):
        with pytest.raises(ValueError):
            AdaptiveSelection(
                alpha=2.0, lam=0.1, method="lepski", ledger=({"alpha": 1.0},)
            )


# ---------------------------------------------------------------------------
# select_train_validate


class TestTrainValidate:
    def test_single_candidate_selected(self):
        data, _ = _noise_free_dataset(40)
        grid = build_grid(candidates=[1.7])
        sel, model = select_train_validate(data, grid, KERN)
        assert sel.alpha == 1.7
        assert sel.method == "train_validate"
        assert len(sel.ledger) == 1
        assert isinstance(model, FittedKrr)
        assert model.n == 20  # winning model is the first-half fit

    def test_planted_winner_beats_constant_zero(self, monkeypatch):
        # Plant noise-free data from a kernel expansion; stub the fitter so
        # one candidate reproduces the truth exactly and every other
        # candidate returns the constant-zero model.  Validation MSE of the
        # exact candidate is ~0, so it must win.
        data, exact = _noise_free_dataset(60)
        grid = build_grid(candidates=[1.0, 2.0, 3.0], C=1.0)
        lam_winner = schedule_lambda(grid.schedule_for(2.0), 30)

        def fake_fit(kernel, d, lam):
            if np.isclose(lam, lam_winner, rtol=1e-12):
                return exact
            return zero_model(kernel)

        monkeypatch.setattr(adaptivity_mod, "fit", fake_fit)
        sel, model = select_train_validate(data, grid, KERN)
        assert sel.alpha == 2.0
        by_alpha = {rec["alpha"]: rec["val_mse"] for rec in sel.ledger}
        assert by_alpha[2.0] < 1e-20
        assert by_alpha[1.0] > 1e-3
        assert by_alpha[3.0] > 1e-3

    def test_ties_break_toward_largest_alpha(self, monkeypatch):
        # All candidates fit the constant-zero model: every validation MSE
        # is identical, so the smoothest candidate must be returned.
        data, _ = _noise_free_dataset(40)
        grid = build_grid(candidates=[1.0, 2.0, 3.0])
        monkeypatch.setattr(
            adaptivity_mod, "fit", lambda kernel, d, lam: zero_model(kernel)
        )
        sel, _ = select_train_validate(data, grid, KERN)
        assert sel.alpha == 3.0

    def test_argmin_correctness(self):
        f = sample_gp(MaternKernel(2.01), 512, 7)
        data = make_dataset(f, 300, 0.3, 7)
        grid = build_grid(candidates=[1, 2, 3, 4, 5], C=1.5)
        sel, _ = select_train_validate(data, grid, KERN)
        chosen = [r for r in sel.ledger if r["alpha"] == sel.alpha][0]
        assert all(chosen["val_mse"] <= r["val_mse"] for r in sel.ledger)
        assert len(sel.ledger) == 5  # ledger covers every candidate

    def test_selection_invariant_to_candidate_order(self):
        f = sample_gp(MaternKernel(2.01), 512, 11)
        data = make_dataset(f, 200, 0.3, 11)
        g1 = build_grid(candidates=[1, 2, 3, 4])
        g2 = build_grid(candidates=[4, 2, 1, 3])
        s1, _ = select_train_validate(data, g1, KERN)
        s2, _ = select_train_validate(data, g2, KERN)
        assert s1.alpha == s2.alpha
        assert s1.lam == s2.lam

    def test_split_is_floor_by_index(self):
        data, _ = _noise_free_dataset(11)
        grid = build_grid(candidates=[2.0])
        sel, model = select_train_validate(data, grid, KERN, split_fraction=0.5)
        rec = sel.ledger[0]
        assert rec["n_fit"] == 5 and rec["n_val"] == 6
        assert model.n == 5
        # fitting half is the index-order prefix
        assert np.array_equal(model.x, np.asarray(data.x)[:5])

    def test_lambda_uses_fit_half_size(self):
        data, _ = _noise_free_dataset(40)
        grid = build_grid(candidates=[2.0], C=1.0)
        sel, _ = select_train_validate(data, grid, KERN)
        expected = schedule_lambda(grid.schedule_for(2.0), 20)
        assert sel.ledger[0]["lambda"] == pytest.approx(expected, rel=1e-12)

    def test_refit_uses_full_sample(self):
        data, _ = _noise_free_dataset(40)
        grid = build_grid(candidates=[2.0], C=1.0)
        sel, model = select_train_validate(data, grid, KERN, refit=True)
        assert model.n == 40
        assert sel.lam == pytest.approx(
            schedule_lambda(grid.schedule_for(2.0), 40), rel=1e-12
        )

    def test_split_errors(self):
        data, _ = _noise_free_dataset(40)
        grid = build_grid(candidates=[2.0])
        with pytest.raises(ValueError):
            select_train_validate(data, grid, KERN, split_fraction=0.0)
        with pytest.raises(ValueError):
            select_train_validate(data, grid, KERN, split_fraction=1.0)
        one = Dataset(
            x=np.array([[0.5]]), y=np.array([1.0]), domain="target", sigma=0.0, seed=0
        )
        with pytest.raises(ValueError):
            select_train_validate(one, grid, KERN)

    def test_selection_serializes_to_json(self):
        f = sample_gp(MaternKernel(2.01), 512, 3)
        data = make_dataset(f, 120, 0.3, 3)
        grid = build_grid(candidates=[1, 2, 3])
        sel, _ = select_train_validate(data, grid, KERN)
        payload = json.loads(json.dumps(selection_to_dict(sel)))
        assert selection_from_dict(payload) == sel

    @pytest.mark.slow
    def test_selection_frequency_recovers_truth(self):
        # Monte-Carlo selection-frequency oracle: paths of smoothness 2
        # (generator nu = 2.01), candidates [1..5], n = 2000, sigma = 0.5,
        # 50 seeds.  With the frozen schedule constant C = 1.5 the observed
        # distribution was {1: 13, 2: 22, 3: 12, 4: 2, 5: 1}: the modal
        # selection must sit at the true smoothness or one notch above.
        gen = MaternKernel(2.01)
        grid = build_grid(candidates=[1, 2, 3, 4, 5], C=1.5)
        counts = Counter()
        for i in range(50):
            seed = 1000 + i
            f = sample_gp(gen, 2048, seed)
            data = make_dataset(f, 2000, 0.5, seed)
            sel, _ = select_train_validate(data, grid, KERN)
            counts[sel.alpha] += 1
        modal = max(counts, key=counts.get)
        assert modal in (2.0, 3.0), dict(counts)


# ---------------------------------------------------------------------------
# select_lepski


class TestLepski:
    def test_threshold_closed_form(self):
        assert lepski_threshold(2.0, 2000, d=1, c0=1.5) == pytest.approx(
            THRESHOLD_A2_N2000_C15, rel=1e-14
        )
        assert lepski_threshold(2.0, 2000, d=1, c0=1.5) == pytest.approx(
            1.5 * (2000.0 / math.log(2000.0)) ** (-2.0 / 5.0), rel=1e-14
        )

    def test_threshold_decreases_in_n_and_alpha(self):
        t1 = lepski_threshold(1.0, 1000)
        t2 = lepski_threshold(2.0, 1000)
        t3 = lepski_threshold(2.0, 4000)
        assert t2 < t1
        assert t3 < t2

    def test_single_candidate_vacuous(self):
        data, _ = _noise_free_dataset(40)
        grid = build_grid(candidates=[2.0])
        sel, model = select_lepski(data, grid, KERN)
        assert sel.alpha == 2.0
        assert sel.method == "lepski"
        assert not sel.degenerate
        assert sel.ledger[0]["comparisons"] == []
        assert isinstance(model, FittedKrr)

    def test_identical_fits_select_largest(self):
        # zero labels make every candidate's coefficient vector zero, so all
        # pairwise distances vanish and the largest candidate is accepted
        x = _uniform_x(50)
        data = Dataset(x=x, y=np.zeros(50), domain="target", sigma=0.0, seed=0)
        grid = build_grid(candidates=[1, 2, 3])
        sel, model = select_lepski(data, grid, KERN)
        assert sel.alpha == 3.0
        assert not sel.degenerate
        for rec in sel.ledger:
            assert rec["accepted"]
            for comp in rec["comparisons"]:
                assert comp["distance"] == 0.0 and comp["ok"]

    def test_degenerate_falls_back_to_smallest(self):
        f = sample_gp(MaternKernel(2.01), 512, 13)
        data = make_dataset(f, 200, 0.5, 13)
        grid = build_grid(candidates=[1.0, 5.0])
        sel, _ = select_lepski(data, grid, KERN, c0=1e-12)
        assert sel.alpha == 1.0
        assert sel.degenerate

    def test_monotone_ledger_proves_acceptance(self):
        f = sample_gp(MaternKernel(2.01), 512, 17)
        data = make_dataset(f, 300, 0.3, 17)
        grid = build_grid(candidates=[1, 2, 3, 4, 5])
        sel, _ = select_lepski(data, grid, KERN, c0=0.5)
        by_alpha = {rec["alpha"]: rec for rec in sel.ledger}
        assert len(sel.ledger) == 5
        chosen = by_alpha[sel.alpha]
        assert chosen["accepted"]
        # every smaller candidate was compared against and passed
        smaller = [a for a in grid.candidates if a < sel.alpha]
        compared = [c["alpha_prime"] for c in chosen["comparisons"]]
        assert compared == smaller
        assert all(c["ok"] for c in chosen["comparisons"])
        # no accepted candidate above the chosen one
        assert all(
            not by_alpha[a]["accepted"]
            for a in grid.candidates
            if a > sel.alpha
        )

    def test_threshold_recorded_in_ledger(self):
        f = sample_gp(MaternKernel(2.01), 512, 19)
        data = make_dataset(f, 2000, 0.5, 19)
        grid = build_grid(candidates=[2.0, 3.0])
        sel, _ = select_lepski(data, grid, KERN, c0=1.5)
        comp = sel.ledger[1]["comparisons"][0]
        assert comp["alpha_prime"] == 2.0
        assert comp["threshold"] == pytest.approx(THRESHOLD_A2_N2000_C15, rel=1e-14)

    def test_custom_error_oracle_is_used(self):
        data, _ = _noise_free_dataset(40)
        grid = build_grid(candidates=[1.0, 2.0])
        calls = []

        def oracle(f, g):
            calls.append((f, g))
            return 0.0

        sel, _ = select_lepski(data, grid, KERN, error_oracle=oracle)
        assert len(calls) == 1  # one pair
        assert sel.alpha == 2.0

    def test_c0_must_be_positive(self):
        data, _ = _noise_free_dataset(40)
        grid = build_grid(candidates=[1.0])
        with pytest.raises(ValueError):
            select_lepski(data, grid, KERN, c0=0.0)

    def test_selection_serializes_to_json(self):
        f = sample_gp(MaternKernel(2.01), 512, 23)
        data = make_dataset(f, 150, 0.3, 23)
        grid = build_grid(candidates=[1, 2, 3])
        sel, _ = select_lepski(data, grid, KERN, c0=0.5)
        payload = json.loads(json.dumps(selection_to_dict(sel)))
        assert selection_from_dict(payload) == sel

    @pytest.mark.slow
    def test_selected_error_tracks_best_candidate(self):
        # Per-seed comparative oracle: paths of smoothness 2, candidates
        # [1..5], n = 2000, sigma = 0.5.  c0 = 0.5 was tuned on the first
        # ten seeds and then frozen; across 50 seeds the chosen candidate's
        # quadrature L2 error must stay within 3x of the best single
        # candidate on at least 80% of seeds.  (Observed: 50/50, with the
        # true-smoothness candidate chosen 45 times.)
        gen = MaternKernel(2.01)
        grid = build_grid(candidates=[1, 2, 3, 4, 5], C=1.0)
        hits = 0
        n_seeds = 50
        for i in range(n_seeds):
            seed = 1000 + i
            f = sample_gp(gen, 2048, seed)
            data = make_dataset(f, 2000, 0.5, seed)
            sel, chosen_model = select_lepski(data, grid, KERN, c0=0.5)
            errs = {}
            for a in grid.candidates:
                if a == sel.alpha:
                    model = chosen_model
                else:
                    lam = schedule_lambda(grid.schedule_for(a), data.n)
                    model = krr_fit(KERN, data, lam)
                errs[a] = simpson_l2_error(model, f, seed=seed, n=data.n).l2_error
            if errs[sel.alpha] <= 3.0 * min(errs.values()):
                hits += 1
        assert hits >= 0.8 * n_seeds, f"{hits}/{n_seeds} seeds within 3x of best"
