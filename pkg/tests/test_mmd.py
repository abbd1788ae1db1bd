import math

import numpy as np
import pytest

from prpl.errors import (
    DegenerateDataError,
    DimensionMismatchError,
    NoSharedClassesError,
    ValidationError,
)
from prpl.feature_store import FeatureSet
from prpl.mmd import (
    KernelBank,
    conditional_distance,
    grad_mmd2_wrt_A,
    kappa,
    marginal_distance,
    median_heuristic,
    mmd2,
)

from oracles import fd_gradient, naive_mmd2, rel_err


class TestKernelBank:
    def test_needs_positive_bandwidths(self):
        with pytest.raises(ValidationError):
            KernelBank(bandwidths=(1.0, 0.0))
        with pytest.raises(ValidationError):
            KernelBank(bandwidths=())


class TestMedianHeuristic:
    def test_identical_rows_degenerate(self):
        with pytest.raises(DegenerateDataError):
            median_heuristic(np.ones((5, 3)))

    def test_two_rows_single_pair(self):
        data = np.array([[0.0, 0.0], [2.0, 0.0]])
        bank = median_heuristic(data, multipliers=[1.0])
        assert bank.bandwidths == (2.0,)

    def test_four_hand_points(self):
        # all 6 pairwise distances enumerated by hand
        pts = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 2.0], [3.0, 4.0]])
        dists = sorted(
            math.dist(pts[i], pts[j]) for i in range(4) for j in range(i + 1, 4)
        )
        expected_median = 0.5 * (dists[2] + dists[3])
        bank = median_heuristic(pts, multipliers=[0.5, 1.0])
        assert bank.bandwidths[0] == pytest.approx(0.5 * expected_median, rel=1e-12)
        assert bank.bandwidths[1] == pytest.approx(expected_median, rel=1e-12)

    def test_subsample_deterministic(self, rng):
        data = rng.standard_normal((3000, 4))
        b1 = median_heuristic(data)
        b2 = median_heuristic(data)
        assert b1 == b2

    def test_default_multipliers(self, rng):
        bank = median_heuristic(rng.standard_normal((20, 3)))
        assert len(bank.bandwidths) == 5
        ratios = np.array(bank.bandwidths) / bank.bandwidths[2]
        assert np.allclose(ratios, [0.25, 0.5, 1.0, 2.0, 4.0])


class TestKappa:
    def test_zero_distance_is_one(self, rng):
        x = rng.standard_normal(6)
        bank = KernelBank(bandwidths=(0.3, 1.0, 7.0))
        assert kappa(x, x, bank) == 1.0

    def test_far_apart_vanishes(self):
        bank = KernelBank(bandwidths=(1.0,))
        assert kappa(np.zeros(2), np.array([1e4, 0.0]), bank) == pytest.approx(0.0, abs=1e-300)

    def test_hand_value(self):
        # squared distance 2, bandwidth 1 -> exp(-1)
        bank = KernelBank(bandwidths=(1.0,))
        v = kappa(np.array([1.0, 0.0]), np.array([0.0, 1.0]), bank)
        assert v == pytest.approx(math.exp(-1.0), abs=1e-15)
        assert v == pytest.approx(0.367879441171442, abs=1e-12)

    def test_monotone_in_distance(self):
        bank = KernelBank(bandwidths=(0.7, 2.0))
        vals = [kappa(np.zeros(1), np.array([t]), bank) for t in np.linspace(0, 5, 20)]
        assert all(a > b for a, b in zip(vals, vals[1:]))
        assert all(0 < v <= 1 for v in vals)

    def test_dim_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            kappa(np.zeros(2), np.zeros(3), KernelBank(bandwidths=(1.0,)))


class TestMmd2:
    def test_identical_samples(self, rng):
        for n, q in [(1, 1), (8, 3), (256, 8)]:
            A = rng.standard_normal((n, q))
            bank = KernelBank(bandwidths=(0.5, 1.0, 2.0))
            assert abs(mmd2(A, A, bank)) <= 1e-12

    def test_singleton_closed_form(self):
        # one point each, squared distance 2, bandwidth 1: 2 - 2 e^{-1}
        A = np.array([[1.0, 0.0]])
        B = np.array([[0.0, 1.0]])
        v = mmd2(A, B, KernelBank(bandwidths=(1.0,)))
        assert v == pytest.approx(2.0 - 2.0 * math.exp(-1.0), abs=1e-14)
        assert v == pytest.approx(1.264241117657115, abs=1e-12)

    def test_symmetry(self, rng):
        A = rng.standard_normal((17, 4))
        B = rng.standard_normal((9, 4)) + 1.0
        bank = KernelBank(bandwidths=(0.5, 2.0))
        assert abs(mmd2(A, B, bank) - mmd2(B, A, bank)) <= 1e-12

    def test_matches_naive_oracle(self, rng):
        for _ in range(25):
            na, nb = int(rng.integers(1, 65)), int(rng.integers(1, 65))
            q = int(rng.integers(1, 6))
            A = rng.standard_normal((na, q))
            B = rng.standard_normal((nb, q)) + 1.0
            bws = tuple(rng.uniform(0.3, 3.0, size=int(rng.integers(1, 4))))
            fast = mmd2(A, B, KernelBank(bandwidths=bws))
            slow = naive_mmd2(A, B, bws)
            assert abs(fast - slow) <= 1e-10 * max(abs(slow), 1e-3)

    def test_nonnegative(self, rng):
        bank = KernelBank(bandwidths=(0.25, 1.0, 4.0))
        for _ in range(50):
            A = rng.standard_normal((int(rng.integers(1, 40)), 3))
            B = rng.standard_normal((int(rng.integers(1, 40)), 3))
            assert mmd2(A, B, bank) >= -1e-9

    def test_dim_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            mmd2(np.zeros((2, 2)), np.zeros((2, 3)), KernelBank(bandwidths=(1.0,)))


class TestGradMmd2:
    def test_matches_fd_random(self, rng):
        A = rng.standard_normal((6, 3))
        B = rng.standard_normal((5, 3)) + 0.5
        bank = KernelBank(bandwidths=(0.7, 1.5))
        analytic = grad_mmd2_wrt_A(A, B, bank)
        coords = np.arange(A.size)
        numeric = fd_gradient(lambda M: mmd2(M, B, bank), A, coords)
        assert rel_err(analytic.ravel(), numeric) <= 1e-5

    def test_identical_inputs_fd(self, rng):
        # at A == B the gradient is exactly zero; FD noise is O(h^2), so the
        # comparison is absolute here rather than relative
        A = rng.standard_normal((4, 2))
        bank = KernelBank(bandwidths=(1.0,))
        analytic = grad_mmd2_wrt_A(A, A.copy(), bank)
        numeric = fd_gradient(lambda M: mmd2(M, A, bank), A, np.arange(A.size))
        assert np.abs(analytic).max() <= 1e-12
        assert np.abs(analytic.ravel() - numeric).max() <= 1e-6

    def test_flat_kernel_zero_gradient(self, rng):
        A = rng.standard_normal((5, 3))
        B = rng.standard_normal((7, 3))
        g = grad_mmd2_wrt_A(A, B, KernelBank(bandwidths=(1e9,)))
        assert np.abs(g).max() <= 1e-6

    def test_quantified_suite(self, rng):
        worst = 0.0
        for _ in range(20):
            na = int(rng.integers(2, 9))
            nb = int(rng.integers(2, 9))
            q = int(rng.integers(1, 5))
            A = rng.standard_normal((na, q))
            B = rng.standard_normal((nb, q)) + rng.uniform(-1, 1)
            bank = KernelBank(bandwidths=tuple(rng.uniform(0.4, 3.0, size=2)))
            analytic = grad_mmd2_wrt_A(A, B, bank).ravel()
            k = min(100, A.size)
            coords = rng.choice(A.size, size=k, replace=False)
            numeric = fd_gradient(lambda M: mmd2(M, B, bank), A, coords)
            worst = max(worst, rel_err(analytic[coords], numeric))
        assert worst <= 1e-5


class TestMarginalDistance:
    def test_identical_zero(self, rng):
        L = rng.random((8, 3))
        assert marginal_distance(L, L) == 0.0

    def test_hand_value(self):
        L_S = np.array([[1.0, 0.0]])
        L_T = np.array([[0.0, 1.0]])
        assert marginal_distance(L_S, L_T) == pytest.approx(math.sqrt(2.0), abs=1e-15)

    def test_row_permutation_invariant(self, rng):
        L_S = rng.random((6, 4))
        L_T = rng.random((9, 4))
        perm = rng.permutation(9)
        assert marginal_distance(L_S, L_T) == pytest.approx(
            marginal_distance(L_S, L_T[perm]), abs=1e-12
        )


def labeled_fs(rows, labels, num_classes, domain="s"):
    return FeatureSet(
        extractor_id="e",
        domain_id=domain,
        data=np.asarray(rows, dtype=np.float32),
        labels=np.asarray(labels),
        num_classes=num_classes,
    )


class TestConditionalDistance:
    def test_relabeled_copy_is_zero(self, rng):
        rows = rng.standard_normal((12, 4)).astype(np.float32)
        labels = np.repeat([0, 1, 2], 4)
        src = labeled_fs(rows, labels, 3)
        tgt = labeled_fs(rows, labels, 3, domain="t")
        v = conditional_distance(src, tgt, np.arange(12), labels)
        assert v == pytest.approx(0.0, abs=1e-7)

    def test_hand_two_classes(self):
        src = labeled_fs([[0.0, 0.0], [4.0, 0.0]], [0, 1], 2)
        tgt = labeled_fs([[1.0, 0.0], [6.0, 0.0]], [0, 1], 2, domain="t")
        v = conditional_distance(src, tgt, np.array([0, 1]), np.array([0, 1]))
        assert v == pytest.approx((1.0 + 2.0) / 2.0, abs=1e-12)

    def test_missing_class_skipped(self):
        src = labeled_fs([[0.0], [4.0]], [0, 1], 2)
        tgt = labeled_fs([[1.0], [9.0]], [0, 1], 2, domain="t")
        # only class 0 confidently labeled: average over 1 shared class
        v = conditional_distance(src, tgt, np.array([0]), np.array([0]))
        assert v == pytest.approx(1.0, abs=1e-12)

    def test_no_shared_classes(self):
        src = labeled_fs([[0.0], [0.5]], [0, 0], 2)
        tgt = labeled_fs([[1.0]], [0], 2, domain="t")
        with pytest.raises(NoSharedClassesError):
            conditional_distance(src, tgt, np.array([0]), np.array([1]))

    def test_empty_confident_set(self):
        src = labeled_fs([[0.0], [4.0]], [0, 1], 2)
        tgt = labeled_fs([[1.0]], [0], 2, domain="t")
        with pytest.raises(NoSharedClassesError):
            conditional_distance(src, tgt, np.array([], dtype=int), np.array([], dtype=int))

    def test_within_class_permutation_invariant(self, rng):
        rows = rng.standard_normal((10, 3)).astype(np.float32)
        labels = np.repeat([0, 1], 5)
        src = labeled_fs(rows, labels, 2)
        t_rows = rng.standard_normal((8, 3)).astype(np.float32)
        tgt = labeled_fs(t_rows, np.repeat([0, 1], 4), 2, domain="t")
        idx = np.arange(8)
        lab = np.repeat([0, 1], 4)
        v1 = conditional_distance(src, tgt, idx, lab)
        # permute within class blocks
        perm = np.concatenate([rng.permutation(4), 4 + rng.permutation(4)])
        v2 = conditional_distance(src, tgt, idx[perm], lab[perm])
        assert v1 == pytest.approx(v2, rel=1e-12)
