import numpy as np
import pytest

from dualstat.datagen import generate_dg1
from dualstat.duality import (
    DualPair,
    normalization_scalar,
    reconstruct_observations,
    svm_regressed_observations,
    theta_from_w,
    w_from_theta,
)
from dualstat.errors import (
    DegenerateDenominatorError,
    DimensionMismatchError,
    ZeroVectorError,
)
from dualstat.glm import DesignMatrix, indicator_design
from dualstat.lrm import fit_lrm


def random_instance(g, n=None):
    n = n or int(g.integers(10, 201))
    if n % 2:
        n += 1
    y = g.standard_normal(n) + np.tile([1.0, 0.0], n // 2)
    X = indicator_design(np.tile([1.0, 0.0], n // 2))
    return y, X


class TestThetaFromW:
    def test_unit_vector_self_dual(self):
        np.testing.assert_allclose(theta_from_w([1.0, 0.0]), [1.0, 0.0])

    def test_worked_example(self):
        # w w' = 0.3125, so theta = w / 0.3125
        np.testing.assert_allclose(theta_from_w([0.5, 0.25]), [1.6, 0.8],
                                   rtol=1e-12)

    def test_product_is_one(self):
        g = np.random.default_rng(20)
        for _ in range(50):
            w = g.standard_normal(int(g.integers(1, 6)))
            assert w @ theta_from_w(w) == pytest.approx(1.0, abs=1e-12)

    def test_zero_vector(self):
        with pytest.raises(ZeroVectorError):
            theta_from_w([0.0, 0.0])


class TestWFromTheta:
    def test_unit_vector(self):
        np.testing.assert_allclose(w_from_theta([1.0, 0.0]), [1.0, 0.0])

    def test_scaling(self):
        np.testing.assert_allclose(w_from_theta([2.0, 0.0]), [0.5, 0.0])

    def test_mutually_inverse_on_rays(self):
        g = np.random.default_rng(21)
        for _ in range(100):
            w = g.standard_normal(int(g.integers(1, 6)))
            if np.linalg.norm(w) < 1e-6:
                continue
            np.testing.assert_allclose(w_from_theta(theta_from_w(w)), w,
                                       rtol=1e-10)
            np.testing.assert_allclose(theta_from_w(w_from_theta(w)), w,
                                       rtol=1e-10)

    def test_zero_vector(self):
        with pytest.raises(ZeroVectorError):
            w_from_theta(np.zeros(3))


class TestDualPair:
    def test_invariants(self):
        pair = DualPair(w=np.array([0.5, 0.25]))
        np.testing.assert_allclose(pair.theta, theta_from_w(pair.w), rtol=1e-12)
        assert pair.norm_scalar * float(pair.w @ pair.w) == pytest.approx(1.0,
                                                                          abs=1e-12)


class TestNormalizationScalar:
    def test_worked_example(self):
        # sum y^2 = 30; class sums 4 and 6 -> denominator 52.
        X = DesignMatrix([[1, 0], [0, 1], [1, 0], [0, 1]], kind="indicator")
        value = normalization_scalar([1, 2, 3, 4], X)
        assert value == pytest.approx(900 / 52, rel=1e-12)

    def test_indicator_observation_gives_one(self):
        # y equals the class-1 column: power n1, denominator n1^2; the
        # zero class-2 sum is allowed.
        X = DesignMatrix([[1, 0], [0, 1], [1, 0], [0, 1]], kind="indicator")
        assert normalization_scalar([1, 0, 1, 0], X) == pytest.approx(1.0)

    def test_degenerate_denominator(self):
        X = DesignMatrix([[1, 0], [1, 0], [0, 1], [0, 1]], kind="indicator")
        with pytest.raises(DegenerateDenominatorError):
            normalization_scalar([1, -1, 2, -2], X)

    def test_zero_observations(self):
        X = DesignMatrix([[1, 0], [0, 1]], kind="indicator")
        with pytest.raises(ZeroVectorError):
            normalization_scalar([0, 0], X)

    def test_requires_indicator(self):
        with pytest.raises(ValueError):
            normalization_scalar([1.0, 2.0], DesignMatrix(np.ones((2, 1))))

    def test_equals_lrm_norm_at_solution(self):
        # The central identity: the scalar equals (w w')^-1 at the LS fit.
        g = np.random.default_rng(22)
        for _ in range(100):
            y, X = random_instance(g)
            w = fit_lrm(y, X).W[0]
            np.testing.assert_allclose(
                normalization_scalar(y, X), 1.0 / float(w @ w), rtol=1e-8
            )


class TestReconstructObservations:
    def test_zero_error_unit_w(self):
        X = DesignMatrix([[1, 0], [0, 1], [1, 0]], kind="indicator")
        out = reconstruct_observations(X, [1.0, 0.0], np.zeros((3, 2)))
        np.testing.assert_allclose(out, X.entries[:, 0])

    def test_round_trip_recovers_observations(self):
        dataset = generate_dg1(50, seed=23)
        fit = fit_lrm(dataset.y, dataset.X)
        out = reconstruct_observations(dataset.X, fit.W[0], fit.eps_LS)
        np.testing.assert_allclose(out, dataset.y, rtol=1e-8)

    def test_error_equal_to_design_gives_zero(self):
        X = DesignMatrix([[1, 0], [0, 1]], kind="indicator")
        out = reconstruct_observations(X, [0.3, 0.7], X.entries.copy())
        np.testing.assert_allclose(out, 0.0, atol=1e-12)

    def test_dimension_mismatch(self):
        X = DesignMatrix([[1, 0], [0, 1]], kind="indicator")
        with pytest.raises(DimensionMismatchError):
            reconstruct_observations(X, [1.0, 0.0], np.zeros((3, 2)))


class TestSvmRegressedObservations:
    def test_affine_map_of_decision_values(self):
        # rows with X theta = +1 map to 1, rows with -1 map to 0
        X = DesignMatrix([[1, 0], [0, 1]], kind="indicator")
        out = svm_regressed_observations(X, [1.0, -1.0])
        # theta = [0.5, -0.5]; row (1,0) -> 0.5 -> 0.75, row (0,1) -> -0.5 -> 0.25
        np.testing.assert_allclose(out, [0.75, 0.25], rtol=1e-12)

    def test_saturated_rows(self):
        X = DesignMatrix([[1, 0], [0, 1]], kind="indicator")
        w = np.array([0.5, -0.5])  # theta = [1, -1]: decisions are +-1
        np.testing.assert_allclose(svm_regressed_observations(X, w), [1.0, 0.0],
                                   rtol=1e-12)

    def test_rescaling_w_shrinks_decisions_inversely(self):
        # theta(lambda w) = theta(w) / lambda, so doubling w moves the
        # outputs halfway toward the 0.5 midpoint.
        X = DesignMatrix([[1, 0], [0, 1], [1, 0]], kind="indicator")
        out1 = svm_regressed_observations(X, [1.0, -1.0])
        out2 = svm_regressed_observations(X, [2.0, -2.0])
        np.testing.assert_allclose(out2, out1 / 2.0 + 0.25, rtol=1e-12)


class TestAlgebraicIdentities:
    def test_transpose_identity(self):
        # w' = (y'y)^-1 X'y equals the transposed LRM coefficients.
        g = np.random.default_rng(24)
        y, X = random_instance(g, n=40)
        w = fit_lrm(y, X).W[0]
        expected = (X.entries.T @ y) / float(y @ y)
        np.testing.assert_allclose(w, expected, rtol=1e-12)

    def test_per_class_sums(self):
        X = DesignMatrix([[1, 0], [0, 1], [1, 0], [0, 1]], kind="indicator")
        y = np.array([1.0, 2.0, 3.0, 4.0])
        np.testing.assert_array_equal(y @ X.entries, [4.0, 6.0])

    def test_noise_model_link(self):
        # y - X theta equals -eps_LS theta when everything comes from one fit.
        g = np.random.default_rng(25)
        y, X = random_instance(g, n=60)
        fit = fit_lrm(y, X)
        theta = theta_from_w(fit.W[0])
        lhs = y - X.entries @ theta
        rhs = -fit.eps_LS @ theta
        np.testing.assert_allclose(lhs, rhs, rtol=1e-8, atol=1e-10)
