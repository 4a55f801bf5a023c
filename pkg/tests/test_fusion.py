import numpy as np
import pytest

from adapdiscom import (ModalityLayout, cocolasso_correct, combine_adapdiscom,
                        combine_discom, fast_bounds, fast_combine, gamma_star,
                        make_weights, min_eigenvalue, optimal_loss,
                        oracle_weights, pairwise_covariance, partition, psd_clip,
                        standardize)
from adapdiscom.errors import (DegenerateRatio, NonPositiveDenominator,
                               OutOfRange, ShapeError)
from adapdiscom.moments import MomentPartition, PairwiseMoments

from conftest import random_block_missing, random_layout


def moments_from_matrix(sigma, layout, counts=None):
    p = layout.p
    if counts is None:
        counts = np.full((p, p), 10, dtype=np.int64)
    return PairwiseMoments(sigma=np.asarray(sigma, float), counts=counts,
                           c=np.zeros(p), c_counts=np.diag(counts).copy(),
                           robust=False, layout=layout)


def random_partition(rng, layout):
    ds = random_block_missing(rng, 30, layout)
    return partition(pairwise_covariance(ds))


class TestGammaStar:
    def test_single_modality_alpha_cancels(self):
        assert gamma_star([0.3], [7.0], 10) == pytest.approx(0.7)
        assert gamma_star([0.9], [7.0], 10) == pytest.approx(0.7)

    def test_equal_weights_average_traces(self):
        assert gamma_star([0.4, 0.4], [10.0, 20.0], 10) == pytest.approx(1.5)

    def test_hand_worked_unequal_weights(self):
        # w = (25/26, 1/26); gamma* = (250/26 + 20/26) / 10 = 27/26
        val = gamma_star([0.5, 0.9], [10.0, 20.0], 10)
        assert val == pytest.approx(27.0 / 26.0, rel=1e-12)

    def test_all_weights_one_is_zero_by_convention(self):
        assert gamma_star([1.0, 1.0], [10.0, 20.0], 10) == 0.0


class TestCombine:
    def test_identity_combination_reproduces_sigma(self, rng):
        layout = random_layout(rng, 10, 3)
        part = random_partition(rng, layout)
        w = make_weights([1.0] * 3, 1.0, part.traces, layout.p)
        assert w.alpha_p == 0.0
        cov = combine_adapdiscom(part, w)
        assert np.array_equal(cov.matrix, part.assemble())

    def test_equal_weights_reduce_to_discom(self, rng):
        for _ in range(20):
            layout = random_layout(rng, 9, 3)
            part = random_partition(rng, layout)
            a = float(rng.uniform(0, 1))
            c = float(rng.uniform(0, 1))
            lhs = combine_adapdiscom(part, make_weights([a] * 3, c, part.traces,
                                                        layout.p))
            rhs = combine_discom(part, a, c)
            assert np.max(np.abs(lhs.matrix - rhs.matrix)) <= 1e-14

    def test_hand_worked_two_singleton_modalities(self):
        # traces (1, 1), alpha (.5, .5), alpha_c .8, off-diagonal .4:
        # gamma* = .5, alpha_p = .5, diag = .5 + .5 = 1, off-diag = .32
        layout = ModalityLayout((1, 1))
        sigma = np.array([[1.0, 0.4], [0.4, 1.0]])
        part = partition(moments_from_matrix(sigma, layout))
        w = make_weights([0.5, 0.5], 0.8, part.traces, 2)
        assert w.gamma_star == pytest.approx(0.5)
        assert w.alpha_p == pytest.approx(0.5)
        cov = combine_adapdiscom(part, w)
        assert cov.matrix[0, 0] == pytest.approx(1.0)
        assert cov.matrix[0, 1] == pytest.approx(0.32)

    def test_discom_zero_intra_weight(self, rng):
        layout = random_layout(rng, 8, 2)
        part = random_partition(rng, layout)
        cov = combine_discom(part, 0.0, 0.5)
        # block-diagonal part fully replaced by the gamma*-scaled identity
        g = gamma_star([0.0, 0.0], part.traces, layout.p)
        sl = layout.block_slice(0)
        expected = 0.5 * part.cross[sl, sl] + 2 * g * np.eye(layout.sizes[0])
        assert np.allclose(cov.matrix[sl, sl], expected)


class TestCocolasso:
    def test_zero_correction_is_psd_clip(self, rng):
        layout = random_layout(rng, 8, 2)
        part = random_partition(rng, layout)
        cov = cocolasso_correct(part, [0.0, 0.0])
        assert np.allclose(cov.matrix, psd_clip(part.assemble()))
        assert cov.min_eig >= -1e-8

    def test_diagonal_shift(self):
        layout = ModalityLayout((1, 1))
        part = partition(moments_from_matrix(np.eye(2), layout))
        cov = cocolasso_correct(part, [0.2, 0.2], sign=-1)
        assert np.allclose(np.diag(cov.matrix), 0.8)
        plus = cocolasso_correct(part, [0.2, 0.2], sign=+1)
        assert np.allclose(np.diag(plus.matrix), 1.2)

    def test_clipping_example(self):
        layout = ModalityLayout((2,))
        part = partition(moments_from_matrix([[1.0, 1.2], [1.2, 1.0]], layout))
        cov = cocolasso_correct(part, [0.0])
        eig = np.linalg.eigvalsh(cov.matrix)
        assert eig == pytest.approx([0.0, 2.2], abs=1e-12)

    def test_bad_inputs(self, rng):
        layout = random_layout(rng, 6, 2)
        part = random_partition(rng, layout)
        with pytest.raises(OutOfRange):
            cocolasso_correct(part, [-0.1, 0.0])
        with pytest.raises(OutOfRange):
            cocolasso_correct(part, [0.1, 0.0], sign=2)


class TestOracleWeights:
    def test_perfect_intra_estimate(self):
        w = oracle_weights([0.0, 1.0], [2.0, 2.0], 1.0, 1.0, [3.0, 3.0], 6)
        assert w.alpha[0] == 1.0
        assert w.alpha[1] == pytest.approx(2.0 / 3.0)

    def test_equal_moments_give_half(self):
        w = oracle_weights([2.0], [2.0], 3.0, 3.0, [4.0], 4)
        assert w.alpha[0] == pytest.approx(0.5)
        assert w.alpha_c == pytest.approx(0.5)

    def test_loss_dominance(self, rng):
        for _ in range(50):
            K = int(rng.integers(1, 5))
            d2 = rng.uniform(0.01, 5.0, K)
            t2 = rng.uniform(0.01, 5.0, K)
            dc2 = float(rng.uniform(0.01, 5.0))
            nc2 = float(rng.uniform(0.01, 5.0))
            assert optimal_loss(d2, t2, dc2, nc2) <= d2.sum() + dc2 + 1e-12

    def test_degenerate_ratio(self):
        with pytest.raises(DegenerateRatio):
            oracle_weights([0.0], [0.0], 1.0, 1.0, [1.0], 2)
        with pytest.raises(DegenerateRatio):
            oracle_weights([1.0], [1.0], 0.0, 0.0, [1.0], 2)


def smallest_feasible_l0_oracle(part, bounds, tol=1e-10):
    """Bisection over l0 with a fresh eigendecomposition at each step."""
    lo, hi = 0.0, bounds.l_max

    def feasible(l0):
        return min_eigenvalue(fast_combine(part, _wide(bounds, l0), l0).matrix) >= -1e-12

    if feasible(lo):
        return 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if feasible(mid):
            hi = mid
        else:
            lo = mid
        if hi - lo < tol:
            break
    return hi


def _wide(bounds, l0):
    """Bounds object accepting any l0 in [0, l_max] for oracle probing."""
    from adapdiscom.fusion import FastBounds
    return FastBounds(m=bounds.m, m_c=bounds.m_c, l_min=0.0, l_max=bounds.l_max)


class TestFastBounds:
    def test_psd_sigma_gives_zero_lower_bound(self, rng):
        layout = random_layout(rng, 8, 2)
        ds = random_block_missing(rng, 60, layout, complete_frac=1.1)
        m = pairwise_covariance(ds)
        part = partition(m)
        b = fast_bounds(m, part)
        assert b.l_min == 0.0
        assert b.l_max == pytest.approx(1.0 / b.m_c)
        assert b.m_c >= max(b.m)

    def test_equal_counts_give_equal_rates(self, rng):
        layout = ModalityLayout((3, 3))
        ds = random_block_missing(rng, 30, layout, complete_frac=1.1)
        m = pairwise_covariance(ds)
        b = fast_bounds(m, partition(m))
        assert b.m[0] == pytest.approx(b.m[1])
        assert b.m_c == pytest.approx(b.m[0])

    def test_two_by_two_indefinite_matches_bisection_oracle(self):
        # commuting 2x2 case: the Weyl bound is exact, l_min = (1/3) / m_C
        layout = ModalityLayout((1, 1))
        counts = np.array([[40, 10], [10, 40]], dtype=np.int64)
        sigma = np.array([[1.0, 1.5], [1.5, 1.0]])
        m = moments_from_matrix(sigma, layout, counts)
        part = partition(m)
        b = fast_bounds(m, part)
        assert b.l_min > 0
        oracle = smallest_feasible_l0_oracle(part, b)
        assert b.l_min == pytest.approx(oracle, abs=1e-8)
        assert b.l_min == pytest.approx((1.0 / 3.0) / b.m_c, rel=1e-10)
        eig = min_eigenvalue(fast_combine(part, b, b.l_min).matrix)
        assert -1e-8 <= eig <= 1e-6

    def test_lower_bound_is_sufficient_never_below_oracle(self, rng):
        hit = 0
        for _ in range(30):
            layout = random_layout(rng, 10, 2)
            ds = random_block_missing(rng, 14, layout, complete_frac=0.3)
            m = pairwise_covariance(ds)
            part = partition(m)
            b = fast_bounds(m, part)
            if b.l_min == 0.0:
                continue
            hit += 1
            oracle = smallest_feasible_l0_oracle(part, b)
            assert b.l_min >= oracle - 1e-8
            assert min_eigenvalue(fast_combine(part, b, b.l_min).matrix) >= -1e-8
        assert hit >= 5  # the sampler must actually produce indefinite cases

    def test_fast_combine_endpoints(self, rng):
        layout = random_layout(rng, 9, 3)
        ds = random_block_missing(rng, 40, layout)
        m = pairwise_covariance(ds)
        part = partition(m)
        b = fast_bounds(m, part)
        if b.l_min == 0.0:
            assert np.array_equal(fast_combine(part, b, 0.0).matrix, part.assemble())
        top = fast_combine(part, b, b.l_max)
        off = top.matrix.copy()
        for k in range(layout.K):
            sl = layout.block_slice(k)
            off[sl, sl] = 0.0
        assert np.max(np.abs(off)) <= 1e-12  # cross part fully suppressed
        with pytest.raises(OutOfRange):
            fast_combine(part, b, b.l_max + 0.1)

    def test_nonpositive_denominator_reported(self):
        # indefinite intra blocks (possible for robust moments) break the
        # positive-definiteness of the direction matrix
        layout = ModalityLayout((2, 2))
        sigma = np.eye(4)
        sigma[0, 1] = sigma[1, 0] = 3.0   # indefinite intra block
        sigma[0, 2] = sigma[2, 0] = 0.9
        counts = np.full((4, 4), 100, dtype=np.int64)
        counts[:2, 2:] = counts[2:, :2] = 4  # m_c >> m_k
        m = moments_from_matrix(sigma, layout, counts)
        part = partition(m)
        with pytest.raises(NonPositiveDenominator):
            fast_bounds(m, part)


class TestMinEigenvalue:
    def test_identity(self):
        assert min_eigenvalue(np.eye(4)) == pytest.approx(1.0)

    def test_diagonal(self):
        assert min_eigenvalue(np.diag([3.0, -2.0])) == pytest.approx(-2.0)

    def test_against_general_solver(self, rng):
        A = rng.standard_normal((5, 5))
        S = (A + A.T) / 2
        oracle = float(np.min(np.linalg.eigvals(S).real))
        assert min_eigenvalue(S) == pytest.approx(oracle, abs=1e-9)

    def test_shape_check(self):
        with pytest.raises(ShapeError):
            min_eigenvalue(np.ones((2, 3)))


def test_weights_validation():
    with pytest.raises(OutOfRange):
        make_weights([1.2], 0.5, [1.0], 1)
    with pytest.raises(OutOfRange):
        make_weights([0.5], -0.1, [1.0], 1)
