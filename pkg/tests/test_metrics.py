"""Metric-kernel tests: Dice, FID vs an independent oracle, bootstrap,
Shapiro-Wilk calibration, and Wilcoxon against brute-force enumeration."""

import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import linalg, stats as sps

from synthlab.errors import MetricError
from synthlab.metrics import (
    EXACT_ENUMERATION_CUTOFF,
    GaussianSummary,
    LinearProjectionEmbedder,
    bootstrap_ci,
    dice,
    fid,
    mean_dice,
    per_image_dice,
    shapiro_wilk,
    summarize,
    wilcoxon_signed_rank,
)


# ---------------------------------------------------------------------------
# dice
# ---------------------------------------------------------------------------
class TestDice:
    def test_identical_masks(self):
        m = np.array([[0, 1], [1, 2]])
        assert dice(m, m, 1) == 1.0

    def test_disjoint_sets(self):
        a = np.array([[1, 1], [0, 0]])
        b = np.array([[0, 0], [1, 1]])
        assert dice(a, b, 1) == 0.0

    def test_half_overlap_brute_force(self):
        # 4x4 pair with |pred|=8, |gt|=8, intersection 4, counted by hand
        pred = np.zeros((4, 4), dtype=int)
        gt = np.zeros((4, 4), dtype=int)
        pred[0:2, :] = 1        # rows 0-1: 8 pixels
        gt[1:3, :] = 1          # rows 1-2: 8 pixels; overlap = row 1 = 4
        assert int((pred == 1).sum()) == 8
        assert int((gt == 1).sum()) == 8
        assert int(((pred == 1) & (gt == 1)).sum()) == 4
        assert dice(pred, gt, 1) == pytest.approx(2 * 4 / 16)

    def test_both_empty_scores_one(self):
        z = np.zeros((3, 3), dtype=int)
        assert dice(z, z, 5) == 1.0

    def test_shape_mismatch(self):
        with pytest.raises(MetricError):
            dice(np.zeros((3, 3), int), np.zeros((3, 4), int), 1)

    def test_symmetry(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            a = rng.integers(0, 3, size=(6, 6))
            b = rng.integers(0, 3, size=(6, 6))
            assert dice(a, b, 1) == dice(b, a, 1)


class TestMeanDice:
    def test_simple_mean(self):
        full = np.ones((2, 2), dtype=int)
        half = np.array([[1, 1], [0, 0]])
        # scores 1.0 and 2*2/(2+4) = 2/3... construct {1.0, 0.5} instead
        quarter = np.array([[1, 0], [0, 0]])
        third = np.array([[1, 1], [1, 0]])
        # dice(quarter, third) = 2*1/(1+3) = 0.5
        scores = mean_dice([full, quarter], [full, third], 1)
        assert scores == pytest.approx((1.0 + 0.5) / 2)

    def test_skip_empty_gt_excludes(self):
        pred = [np.ones((2, 2), int), np.ones((2, 2), int)]
        gt = [np.ones((2, 2), int), np.zeros((2, 2), int)]
        assert mean_dice(pred, gt, 1) == 1.0
        assert mean_dice(pred, gt, 1, skip_empty_gt=False) == pytest.approx(0.5)

    def test_all_empty_raises(self):
        z = np.zeros((2, 2), int)
        with pytest.raises(MetricError, match="no evaluable"):
            mean_dice([z], [z], 1)

    def test_mean_of_per_image_not_pooled_pixels(self):
        # Counterexample separating the two definitions: per-image mean
        # weights small and large images equally, pixel pooling does not.
        pred1 = np.array([[1, 0], [0, 0]])
        gt1 = np.array([[0, 1], [0, 0]])       # per-image dice 0
        pred2 = np.ones((4, 4), dtype=int)
        gt2 = np.ones((4, 4), dtype=int)       # per-image dice 1
        per_image = mean_dice([pred1, pred2], [gt1, gt2], 1)
        assert per_image == pytest.approx(0.5)
        inter = ((pred1 == 1) & (gt1 == 1)).sum() + ((pred2 == 1) & (gt2 == 1)).sum()
        sizes = (pred1 == 1).sum() + (gt1 == 1).sum() + (pred2 == 1).sum() + (gt2 == 1).sum()
        pooled = 2 * inter / sizes
        assert pooled != pytest.approx(per_image)


# ---------------------------------------------------------------------------
# FID and summaries
# ---------------------------------------------------------------------------
def oracle_fid(a: GaussianSummary, b: GaussianSummary) -> float:
    """Independent route: scipy's general (Schur-based) matrix square root
    applied to the classic product form."""
    diff = a.mu - b.mu
    covmean = linalg.sqrtm(a.sigma @ b.sigma)
    if np.iscomplexobj(covmean):
        covmean = covmean.real
    return float(diff @ diff + np.trace(a.sigma) + np.trace(b.sigma) - 2 * np.trace(covmean))


def random_summary(rng, d):
    mu = rng.normal(size=d)
    m = rng.normal(size=(d + 3, d))
    sigma = m.T @ m / (d + 3)
    return GaussianSummary(mu=mu, sigma=sigma)


class TestFid:
    def test_self_distance_zero(self):
        rng = np.random.default_rng(3)
        s = random_summary(rng, 4)
        assert fid(s, s) <= 1e-8

    def test_equal_covariance_reduces_to_mean_distance(self):
        a = GaussianSummary(mu=np.array([0.0]), sigma=np.array([[1.0]]))
        b = GaussianSummary(mu=np.array([3.0]), sigma=np.array([[1.0]]))
        assert fid(a, b) == pytest.approx(9.0, abs=1e-10)

    def test_matches_independent_oracle(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            d = int(rng.integers(1, 9))
            a, b = random_summary(rng, d), random_summary(rng, d)
            assert fid(a, b) == pytest.approx(oracle_fid(a, b), abs=1e-6)

    def test_symmetry(self):
        rng = np.random.default_rng(5)
        for _ in range(10):
            d = int(rng.integers(1, 6))
            a, b = random_summary(rng, d), random_summary(rng, d)
            assert abs(fid(a, b) - fid(b, a)) <= 1e-8

    def test_dimension_mismatch(self):
        rng = np.random.default_rng(0)
        with pytest.raises(MetricError):
            fid(random_summary(rng, 2), random_summary(rng, 3))

    def test_asymmetric_covariance_rejected(self):
        with pytest.raises(MetricError):
            GaussianSummary(mu=np.zeros(2), sigma=np.array([[1.0, 0.5], [0.1, 1.0]]))


class TestSummarize:
    def test_identical_vectors_zero_covariance(self):
        s = summarize([np.array([1.0, 2.0]), np.array([1.0, 2.0])])
        assert np.allclose(s.sigma, 0.0)

    def test_hand_computed_moments(self):
        s = summarize([np.array([0.0, 0.0]), np.array([2.0, 0.0])])
        assert np.allclose(s.mu, [1.0, 0.0])
        # sample covariance with n-1: var_x = ((0-1)^2 + (2-1)^2) / 1 = 2
        assert s.sigma[0, 0] == pytest.approx(2.0)
        assert s.sigma[0, 1] == 0.0 and s.sigma[1, 1] == 0.0

    def test_permutation_equivariance(self):
        rng = np.random.default_rng(7)
        feats = rng.normal(size=(10, 3))
        s = summarize(feats)
        perm = [2, 0, 1]
        sp_ = summarize(feats[:, perm])
        assert np.allclose(sp_.mu, s.mu[perm])
        assert np.allclose(sp_.sigma, s.sigma[np.ix_(perm, perm)])

    def test_single_vector_rejected(self):
        with pytest.raises(MetricError):
            summarize([np.zeros(3)])


class TestEmbedder:
    def test_same_fingerprint_same_embeddings(self):
        a = LinearProjectionEmbedder(dim=8, patch=8, seed=3)
        b = LinearProjectionEmbedder(dim=8, patch=8, seed=3)
        assert a.fingerprint == b.fingerprint
        img = np.random.default_rng(0).random((16, 16))
        assert np.array_equal(a.embed([img]), b.embed([img]))

    def test_channel_collapse(self):
        e = LinearProjectionEmbedder(dim=4, patch=8, seed=0)
        rgb = np.random.default_rng(1).random((16, 16, 3)).astype(np.float32)
        gray = rgb.mean(axis=2)
        assert np.allclose(e.embed([rgb]), e.embed([gray]), atol=1e-6)


# ---------------------------------------------------------------------------
# bootstrap
# ---------------------------------------------------------------------------
class TestBootstrap:
    def test_constant_values(self):
        lo, hi = bootstrap_ci([0.7] * 10, seed=1)
        assert lo == hi == pytest.approx(0.7)

    def test_deterministic(self):
        vals = list(np.random.default_rng(2).random(30))
        assert bootstrap_ci(vals, seed=9) == bootstrap_ci(vals, seed=9)
        assert bootstrap_ci(vals, seed=9) != bootstrap_ci(vals, seed=10)

    def test_bounds_within_range(self):
        vals = list(np.random.default_rng(3).random(25))
        lo, hi = bootstrap_ci(vals, seed=0)
        assert min(vals) <= lo <= hi <= max(vals)

    def test_width_shrinks_with_more_data(self):
        # median over repeated seeded draws; expected value computed by the
        # same estimator it asserts on (pure sampling statement)
        rng = np.random.default_rng(12)
        widths_small, widths_big = [], []
        for rep in range(20):
            small = rng.normal(size=250)
            big = rng.normal(size=500)
            lo, hi = bootstrap_ci(small, seed=rep)
            widths_small.append(hi - lo)
            lo, hi = bootstrap_ci(big, seed=rep)
            widths_big.append(hi - lo)
        assert np.median(widths_big) < np.median(widths_small)

    def test_empty_rejected(self):
        with pytest.raises(MetricError):
            bootstrap_ci([])


# ---------------------------------------------------------------------------
# Shapiro-Wilk
# ---------------------------------------------------------------------------
class TestShapiroWilk:
    def test_domain(self):
        with pytest.raises(MetricError):
            shapiro_wilk([1.0, 2.0])
        with pytest.raises(MetricError):
            shapiro_wilk([1.0] * 10)

    def test_w_in_unit_interval(self):
        rng = np.random.default_rng(4)
        r = shapiro_wilk(rng.normal(size=40))
        assert 0.0 < r.statistic <= 1.0
        assert r.method == "approximate"

    def test_null_rejection_rate_calibrated(self):
        rng = np.random.default_rng(100)
        rejections = sum(
            shapiro_wilk(rng.normal(size=50)).p_value < 0.05 for _ in range(400)
        )
        assert 0.02 <= rejections / 400 <= 0.08

    def test_power_on_heavy_tails(self):
        rng = np.random.default_rng(101)
        rejections = sum(
            shapiro_wilk(rng.normal(size=50) ** 2).p_value < 0.05 for _ in range(200)
        )
        assert rejections / 200 > 0.5


# ---------------------------------------------------------------------------
# Wilcoxon signed-rank
# ---------------------------------------------------------------------------
def enumeration_oracle(a, b) -> float:
    """Brute-force two-sided p: iterate every sign assignment explicitly."""
    d = np.asarray(a, float) - np.asarray(b, float)
    d = d[d != 0]
    if d.size == 0:
        return 1.0
    ranks = sps.rankdata(np.abs(d))
    w_obs = ranks[d > 0].sum()
    center = ranks.sum() / 2
    count = 0
    for signs in itertools.product([0, 1], repeat=d.size):
        w = sum(r for s, r in zip(signs, ranks) if s)
        if abs(w - center) >= abs(w_obs - center) - 1e-12:
            count += 1
    return count / 2 ** d.size


class TestWilcoxon:
    def test_identical_pairs_degenerate(self):
        r = wilcoxon_signed_rank([1.0, 2.0, 3.0], [1.0, 2.0, 3.0])
        assert r.p_value == 1.0 and r.degenerate

    def test_n6_all_positive(self):
        r = wilcoxon_signed_rank([2, 3, 4, 5, 6, 7], [1, 1, 1, 1, 1, 1], method="exact")
        assert r.p_value == pytest.approx(2 / 64)
        assert r.method == "exact"

    def test_exact_matches_enumeration(self):
        rng = np.random.default_rng(21)
        for _ in range(40):
            n = int(rng.integers(1, 11))
            a = rng.normal(size=n)
            b = rng.normal(size=n)
            r = wilcoxon_signed_rank(a, b, method="exact")
            assert r.p_value == pytest.approx(enumeration_oracle(a, b), abs=1e-12)

    def test_approx_close_to_exact(self):
        rng = np.random.default_rng(22)
        for _ in range(60):
            n = int(rng.integers(1, 11))
            a = rng.normal(size=n)
            b = rng.normal(size=n)
            r = wilcoxon_signed_rank(a, b, method="approx")
            assert abs(r.p_value - enumeration_oracle(a, b)) < 0.05

    def test_swap_antisymmetry(self):
        rng = np.random.default_rng(23)
        for _ in range(15):
            a = rng.normal(size=9)
            b = rng.normal(size=9)
            assert wilcoxon_signed_rank(a, b).p_value == pytest.approx(
                wilcoxon_signed_rank(b, a).p_value
            )

    def test_auto_uses_exact_for_small_n(self):
        a = np.arange(1.0, 9.0)
        b = np.zeros(8)
        assert wilcoxon_signed_rank(a, b).method == "exact"
        big = np.random.default_rng(1).normal(size=EXACT_ENUMERATION_CUTOFF + 5)
        assert wilcoxon_signed_rank(big, np.zeros_like(big)).method == "approximate"

    def test_length_mismatch(self):
        with pytest.raises(MetricError):
            wilcoxon_signed_rank([1.0, 2.0], [1.0])

    @given(st.lists(st.floats(-100, 100), min_size=1, max_size=20))
    @settings(max_examples=40, deadline=None)
    def test_p_value_in_unit_interval(self, values):
        a = np.asarray(values)
        r = wilcoxon_signed_rank(a, np.zeros_like(a))
        assert 0.0 <= r.p_value <= 1.0
