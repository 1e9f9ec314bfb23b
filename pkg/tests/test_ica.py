import numpy as np
import pytest

from icamixture import ica
from icamixture.exceptions import EmptyComponentError, FitWarning, InvalidInputError


def uniform_sources(rng, n, r):
    return rng.uniform(-np.sqrt(3.0), np.sqrt(3.0), size=(n, r))


class TestWeightedCenter:
    def test_equal_weights(self):
        x = np.array([[1.0, 1.0], [3.0, 3.0]])
        centered, mean = ica.weighted_center(x, [1.0, 1.0])
        np.testing.assert_allclose(mean, [2.0, 2.0])
        np.testing.assert_allclose(centered, [[-1.0, -1.0], [1.0, 1.0]])

    def test_weighted_mean_by_hand(self):
        x = np.array([[0.0, 0.0], [4.0, 0.0]])
        _, mean = ica.weighted_center(x, [3.0, 1.0])
        np.testing.assert_allclose(mean, [1.0, 0.0])

    def test_concentrated_weight(self):
        x = np.array([[5.0, -2.0], [1.0, 1.0], [9.0, 9.0]])
        centered, mean = ica.weighted_center(x, [0.0, 1.0, 0.0])
        np.testing.assert_allclose(mean, [1.0, 1.0])
        np.testing.assert_allclose(centered[1], [0.0, 0.0], atol=1e-15)

    def test_zero_weights_rejected(self):
        with pytest.raises(EmptyComponentError):
            ica.weighted_center(np.ones((3, 2)), [0.0, 0.0, 0.0])

    def test_residual_weighted_mean_is_zero(self):
        rng = np.random.default_rng(0)
        x = rng.normal(size=(40, 3)) * 5 + 2
        w = rng.uniform(0.01, 1, 40)
        centered, _ = ica.weighted_center(x, w)
        residual = (centered * w[:, None]).sum(axis=0) / w.sum()
        assert np.abs(residual).max() <= 1e-10


class TestWeightedWhiten:
    def test_already_white(self):
        rng = np.random.default_rng(1)
        x = rng.normal(size=(2000, 2))
        w = rng.uniform(0.2, 1.0, 2000)
        centered, _ = ica.weighted_center(x, w)
        z, _ = ica.weighted_whiten(centered, w)
        # whitening already-white data is the identity fixed point
        _, wh = ica.weighted_whiten(z, w)
        np.testing.assert_allclose(wh.v, np.eye(2), atol=1e-8)

    def test_diagonal_covariance(self):
        rng = np.random.default_rng(2)
        base = rng.normal(size=(5000, 2))
        base -= base.mean(axis=0)
        base /= base.std(axis=0)
        cov = ica.weighted_covariance(base, np.ones(5000))
        eig = np.linalg.eigh(cov)
        base = base @ (eig.eigenvectors / np.sqrt(eig.eigenvalues)) @ eig.eigenvectors.T
        x = base * [2.0, 3.0]
        z, wh = ica.weighted_whiten(x, np.ones(5000))
        np.testing.assert_allclose(wh.v, np.diag([0.5, 1.0 / 3.0]), atol=1e-8)

    def test_random_affine_recovers_identity_cov(self):
        rng = np.random.default_rng(3)
        s = uniform_sources(rng, 4000, 3)
        a = rng.normal(size=(3, 3)) + 2 * np.eye(3)
        x = s @ a.T
        w = rng.uniform(0.1, 1.0, 4000)
        centered, _ = ica.weighted_center(x, w)
        z, wh = ica.weighted_whiten(centered, w)
        cov = ica.weighted_covariance(z, w)
        np.testing.assert_allclose(cov, np.eye(3), atol=1e-8)

    def test_rank_deficient_raises(self):
        x = np.column_stack([np.arange(10.0), 2 * np.arange(10.0)])
        centered, _ = ica.weighted_center(x, np.ones(10))
        with pytest.raises(ica.DegenerateCovarianceError):
            ica.weighted_whiten(centered, np.ones(10))


class TestNonlinearity:
    def test_logcosh_at_zero(self):
        g, gp = ica.g_and_gprime(ica.Nonlinearity("logcosh", 1.0), 0.0)
        assert (g, gp) == (0.0, 1.0)

    def test_gauss_at_zero(self):
        g, gp = ica.g_and_gprime(ica.Nonlinearity("gauss"), 0.0)
        assert (g, gp) == (0.0, 1.0)

    @pytest.mark.parametrize("kind,alpha", [("logcosh", 1.0), ("logcosh", 1.7), ("gauss", 1.0)])
    @pytest.mark.parametrize("y", [-2.0, -0.5, 0.5, 2.0])
    def test_derivative_matches_finite_difference(self, kind, alpha, y):
        nl = ica.Nonlinearity(kind, alpha)
        eps = 1e-6
        g_plus, _ = ica.g_and_gprime(nl, y + eps)
        g_minus, _ = ica.g_and_gprime(nl, y - eps)
        _, gp = ica.g_and_gprime(nl, y)
        assert gp == pytest.approx((g_plus - g_minus) / (2 * eps), abs=1e-6)

    def test_alpha_range_enforced(self):
        with pytest.raises(InvalidInputError):
            ica.Nonlinearity("logcosh", 0.5)
        with pytest.raises(InvalidInputError):
            ica.Nonlinearity("cube")


class TestFixedPoint:
    def test_independent_sources_recovered(self):
        rng = np.random.default_rng(4)
        z = uniform_sources(rng, 2000, 2)
        w = np.ones(2000)
        centered, _ = ica.weighted_center(z, w)
        zw, wh = ica.weighted_whiten(centered, w)
        um = ica.fixed_point(zw, w, whitening=wh)
        assert um.converged
        assert ica.amari_distance(um.a_inv) <= 0.1

    def test_known_mixing_recovered(self):
        rng = np.random.default_rng(5)
        s = uniform_sources(rng, 2000, 2)
        a_true = np.array([[2.0, 1.0], [0.5, 1.5]])
        x = s @ a_true.T
        w = np.ones(2000)
        centered, _ = ica.weighted_center(x, w)
        z, wh = ica.weighted_whiten(centered, w)
        um = ica.fixed_point(z, w, whitening=wh)
        assert ica.amari_distance(um.a_inv @ a_true) <= 0.1

    def test_rows_orthonormal_after_return(self):
        rng = np.random.default_rng(6)
        s = uniform_sources(rng, 500, 3)
        w = rng.uniform(0.2, 1.0, 500)
        centered, _ = ica.weighted_center(s, w)
        z, wh = ica.weighted_whiten(centered, w)
        um = ica.fixed_point(z, w, whitening=wh, max_inner=7)
        assert np.abs(um.w @ um.w.T - np.eye(3)).max() <= 1e-8

    def test_gaussian_sources_flagged(self):
        rng = np.random.default_rng(7)
        z = rng.normal(size=(1500, 2))
        w = np.ones(1500)
        centered, _ = ica.weighted_center(z, w)
        zw, wh = ica.weighted_whiten(centered, w)
        with pytest.warns(FitWarning):
            um = ica.fixed_point(zw, w, whitening=wh, tau=1e-9, max_inner=8)
        assert not um.converged
        assert um.inner_iters == 8

    def test_permutation_equivariance(self):
        rng = np.random.default_rng(8)
        s = uniform_sources(rng, 800, 3)
        w = np.ones(800)
        centered, _ = ica.weighted_center(s, w)
        z, wh = ica.weighted_whiten(centered, w)
        perm = np.array([2, 0, 1])
        base = ica.fixed_point(z, w, tau=0.0, max_inner=4, w_init=np.eye(3))
        permuted = ica.fixed_point(z, w, tau=0.0, max_inner=4, w_init=np.eye(3)[perm])
        np.testing.assert_allclose(permuted.w, base.w[perm], atol=1e-9)

    def test_weight_duplication_invariance(self):
        rng = np.random.default_rng(9)
        s = uniform_sources(rng, 600, 2)
        a = np.array([[1.5, 0.3], [0.2, 0.9]])
        x = s @ a.T
        w = rng.uniform(0.2, 1.0, 600)
        x2 = np.vstack([x, x])
        w2 = np.concatenate([w, w]) / 2.0

        c1, m1 = ica.weighted_center(x, w)
        c2, m2 = ica.weighted_center(x2, w2)
        np.testing.assert_allclose(m1, m2, atol=1e-10)
        z1, wh1 = ica.weighted_whiten(c1, w)
        z2, wh2 = ica.weighted_whiten(c2, w2)
        np.testing.assert_allclose(wh1.v, wh2.v, atol=1e-10)
        u1 = ica.fixed_point(z1, w, whitening=wh1, tau=0.0, max_inner=5)
        u2 = ica.fixed_point(z2, w2, whitening=wh2, tau=0.0, max_inner=5)
        np.testing.assert_allclose(u1.a_inv, u2.a_inv, atol=1e-10)


class TestAmariDistance:
    def test_identity_is_zero(self):
        assert ica.amari_distance(np.eye(4)) == 0.0

    def test_signed_scaled_permutation_is_zero(self):
        p = np.array([[0.0, -3.0, 0.0], [0.5, 0.0, 0.0], [0.0, 0.0, 2.0]])
        assert ica.amari_distance(p) == pytest.approx(0.0, abs=1e-15)

    def test_all_ones_is_maximal_for_r2(self):
        # direct evaluation of the definition by explicit loops
        p = np.ones((2, 2))
        r = 2
        rows = sum(sum(abs(p[i, j]) for j in range(r)) / max(abs(p[i, j]) for j in range(r)) - 1 for i in range(r))
        cols = sum(sum(abs(p[i, j]) for i in range(r)) / max(abs(p[i, j]) for i in range(r)) - 1 for j in range(r))
        expected = (rows + cols) / (2 * r * (r - 1))
        assert ica.amari_distance(p) == pytest.approx(expected)
        assert ica.amari_distance(p) == 1.0

    def test_bounded_by_one(self):
        rng = np.random.default_rng(10)
        for _ in range(50):
            p = rng.normal(size=(4, 4))
            assert 0.0 <= ica.amari_distance(p) <= 1.0

    def test_zero_row_rejected(self):
        p = np.eye(3)
        p[1] = 0.0
        with pytest.raises(InvalidInputError):
            ica.amari_distance(p)
