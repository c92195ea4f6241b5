import numpy as np
import pytest

from dualstat.errors import (
    DegenerateVarianceError,
    DimensionMismatchError,
    InvalidDfError,
    NotPositiveDefiniteError,
    RankDeficientError,
)
from dualstat.glm import (
    Contrast,
    DesignMatrix,
    NoiseCov,
    fit_glm_ls,
    fit_glm_ml,
    residual_sum_squares,
    t_pvalue,
    t_statistic,
)

from oracles import glm_ml_explicit, rss_finite_difference_gradient, student_t_two_sided

ALTERNATING = DesignMatrix([[1, 0], [0, 1], [1, 0], [0, 1]], kind="indicator")


class TestDesignMatrix:
    def test_indicator_rows_must_be_one_hot(self):
        with pytest.raises(ValueError):
            DesignMatrix([[1, 1], [0, 1]], kind="indicator")
        with pytest.raises(ValueError):
            DesignMatrix([[0.5, 0.5], [0, 1]], kind="indicator")

    def test_needs_more_rows_than_columns(self):
        with pytest.raises(DimensionMismatchError):
            DesignMatrix(np.ones((1, 2)))

    def test_entries_are_read_only(self):
        X = DesignMatrix(np.ones((3, 1)))
        with pytest.raises(ValueError):
            X.entries[0, 0] = 2.0


class TestNoiseCov:
    def test_rejects_asymmetric(self):
        with pytest.raises(ValueError):
            NoiseCov([[1.0, 0.1], [0.2, 1.0]])

    def test_rejects_indefinite(self):
        with pytest.raises(NotPositiveDefiniteError):
            NoiseCov([[1.0, 2.0], [2.0, 1.0]])


class TestFitGlmMl:
    def test_identity_noise_gives_class_means(self):
        fit = fit_glm_ml([1, 0, 1, 0], ALTERNATING, NoiseCov(np.eye(4)))
        np.testing.assert_allclose(fit.theta, [1.0, 0.0], atol=1e-12)

    def test_scalar_noise_scaling_cancels(self):
        y = [2.3, -0.7, 1.1, 0.4]
        fit1 = fit_glm_ml(y, ALTERNATING, NoiseCov(np.eye(4)))
        fit2 = fit_glm_ml(y, ALTERNATING, NoiseCov(2.0 * np.eye(4)))
        np.testing.assert_allclose(fit1.theta, fit2.theta, rtol=1e-12)

    def test_heteroscedastic_matches_explicit_inverse(self):
        y = [2.0, 1.0, 4.0, 3.0]
        C = np.diag([1.0, 1.0, 4.0, 4.0])
        fit = fit_glm_ml(y, ALTERNATING, NoiseCov(C))
        theta, cov = glm_ml_explicit(y, ALTERNATING.entries, C)
        np.testing.assert_allclose(fit.theta, theta, rtol=1e-12)
        np.testing.assert_allclose(fit.theta, [2.4, 1.4], rtol=1e-12)
        np.testing.assert_allclose(fit.cov_theta, cov, rtol=1e-10)

    def test_random_instances_match_oracle(self):
        g = np.random.default_rng(0)
        for _ in range(25):
            n, m = int(g.integers(5, 30)), int(g.integers(1, 4))
            X = DesignMatrix(g.standard_normal((n, m)))
            y = g.standard_normal(n)
            A = g.standard_normal((n, n))
            C = A @ A.T + n * np.eye(n)
            fit = fit_glm_ml(y, X, NoiseCov(C))
            theta, _ = glm_ml_explicit(y, X.entries, C)
            np.testing.assert_allclose(fit.theta, theta, rtol=1e-8)

    def test_rank_deficient_raises(self):
        X = DesignMatrix([[1.0, 2.0], [2.0, 4.0], [3.0, 6.0]])
        with pytest.raises(RankDeficientError):
            fit_glm_ml([1, 2, 3], X, NoiseCov(np.eye(3)))

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            fit_glm_ml([1, 2, 3], ALTERNATING, NoiseCov(np.eye(4)))
        with pytest.raises(DimensionMismatchError):
            fit_glm_ml([1, 2, 3, 4], ALTERNATING, NoiseCov(np.eye(3)))


class TestFitGlmLs:
    def test_class_means(self):
        fit = fit_glm_ls([1, 0, 1, 0], ALTERNATING)
        np.testing.assert_allclose(fit.theta, [1.0, 0.0], atol=1e-12)

    def test_exact_interpolation_has_zero_rss(self):
        g = np.random.default_rng(1)
        X = DesignMatrix(g.standard_normal((8, 3)))
        theta_star = np.array([0.5, -1.0, 2.0])
        fit = fit_glm_ls(X.entries @ theta_star, X)
        np.testing.assert_allclose(fit.theta, theta_star, rtol=1e-10)
        assert fit.rss < 1e-20

    def test_noisy_class_means(self):
        fit = fit_glm_ls([0.9, 0.1, 1.1, -0.1], ALTERNATING)
        np.testing.assert_allclose(fit.theta, [1.0, 0.0], atol=1e-12)

    def test_equals_ml_with_identity_noise(self):
        g = np.random.default_rng(2)
        for _ in range(100):
            n, m = int(g.integers(4, 25)), int(g.integers(1, 4))
            X = DesignMatrix(g.standard_normal((n, m)))
            y = g.standard_normal(n)
            ls = fit_glm_ls(y, X)
            ml = fit_glm_ml(y, X, NoiseCov(np.eye(n)))
            np.testing.assert_allclose(ls.theta, ml.theta, rtol=1e-12, atol=1e-14)
            np.testing.assert_allclose(ls.cov_theta, ml.cov_theta, rtol=1e-12,
                                       atol=1e-14)

    def test_rss_field_matches_residuals(self):
        g = np.random.default_rng(3)
        X = DesignMatrix(g.standard_normal((12, 2)))
        fit = fit_glm_ls(g.standard_normal(12), X)
        np.testing.assert_allclose(fit.rss, fit.residuals @ fit.residuals,
                                   rtol=1e-10)

    def test_cov_theta_symmetric_psd(self):
        g = np.random.default_rng(4)
        X = DesignMatrix(g.standard_normal((10, 3)))
        fit = fit_glm_ls(g.standard_normal(10), X)
        np.testing.assert_allclose(fit.cov_theta, fit.cov_theta.T, rtol=1e-12)
        assert np.linalg.eigvalsh(fit.cov_theta).min() > 0

    def test_gradient_vanishes_at_solution(self):
        g = np.random.default_rng(5)
        X = DesignMatrix(g.standard_normal((20, 3)))
        y = g.standard_normal(20)
        fit = fit_glm_ls(y, X)
        grad = rss_finite_difference_gradient(y, X.entries, fit.theta)
        assert np.linalg.norm(grad) < 1e-6 * (1.0 + fit.rss)

    def test_gauss_markov_spot_check(self):
        # LS against a linear unbiased competitor built by adding a
        # null-space perturbation to the LS weights.
        g = np.random.default_rng(6)
        n, m = 40, 2
        X = g.standard_normal((n, m))
        theta_star = np.array([1.0, -0.5])
        pinv = np.linalg.inv(X.T @ X) @ X.T
        perturb = g.standard_normal((m, n)) @ (np.eye(n) - X @ pinv)
        design = DesignMatrix(X)
        diffs = []
        for _ in range(200):
            y = X @ theta_star + g.standard_normal(n)
            ls_err = np.sum((fit_glm_ls(y, design).theta - theta_star) ** 2)
            alt = (pinv + 0.3 * perturb) @ y
            alt_err = np.sum((alt - theta_star) ** 2)
            diffs.append(alt_err - ls_err)
        diffs = np.asarray(diffs)
        margin = 3.0 * diffs.std(ddof=1) / np.sqrt(len(diffs))
        assert diffs.mean() > -margin


class TestResidualSumSquares:
    def test_perfect_fit(self):
        X = DesignMatrix([[1.0], [2.0]])
        assert residual_sum_squares(X.entries @ [1.5], X, [1.5]) == 0.0

    def test_zero_theta_gives_power_of_y(self):
        X = DesignMatrix([[1, 0], [0, 1]], kind="indicator")
        assert residual_sum_squares([1, 0], X, [0, 0]) == 1.0

    def test_ones_column(self):
        X = DesignMatrix(np.ones((3, 1)))
        assert residual_sum_squares([1, 2, 3], X, [2.0]) == pytest.approx(2.0)

    def test_dimension_mismatch(self):
        X = DesignMatrix(np.ones((3, 1)))
        with pytest.raises(DimensionMismatchError):
            residual_sum_squares([1, 2], X, [2.0])
        with pytest.raises(DimensionMismatchError):
            residual_sum_squares([1, 2, 3], X, [2.0, 1.0])


class TestTStatistic:
    def _fit(self, theta, cov):
        from dualstat.glm import GlmFit

        return GlmFit(np.asarray(theta, float), np.asarray(cov, float),
                      np.zeros(2), 0.0)

    def test_unit_case(self):
        fit = self._fit([1, 0], np.diag([0.5, 0.5]))
        assert t_statistic(fit, Contrast([1, -1])) == pytest.approx(1.0)

    def test_equal_parameters_give_zero(self):
        fit = self._fit([3.7, 3.7], np.diag([0.2, 0.2]))
        assert t_statistic(fit, Contrast([1, -1])) == pytest.approx(0.0, abs=1e-12)

    def test_variance_scaling(self):
        fit = self._fit([1, 0], np.diag([1 / 50, 1 / 50]))
        assert t_statistic(fit, Contrast([1, -1])) == pytest.approx(5.0)

    def test_contrast_scale_invariance(self):
        fit = self._fit([0.8, -0.3], [[0.4, 0.1], [0.1, 0.3]])
        t1 = t_statistic(fit, Contrast([1, -1]))
        t2 = t_statistic(fit, Contrast([7.3, -7.3]))
        assert t1 == pytest.approx(t2, rel=1e-12)

    def test_degenerate_variance(self):
        fit = self._fit([1, 0], np.zeros((2, 2)))
        with pytest.raises(DegenerateVarianceError):
            t_statistic(fit, Contrast([1, -1]))

    def test_contrast_needs_nonzero_entry(self):
        with pytest.raises(ValueError):
            Contrast([0.0, 0.0])


class TestTPvalue:
    def test_center_gives_one(self):
        assert t_pvalue(0.0, 5) == pytest.approx(1.0)

    def test_symmetry(self):
        for df in (1, 7, 30):
            assert t_pvalue(1.7, df) == pytest.approx(t_pvalue(-1.7, df))

    def test_matches_quadrature_oracle(self):
        p = t_pvalue(2.0, 10)
        assert p == pytest.approx(student_t_two_sided(2.0, 10), rel=1e-8)
        assert p == pytest.approx(0.07339, abs=5e-5)

    def test_monotone_decreasing_in_magnitude(self):
        values = [t_pvalue(t, 12) for t in (0.0, 0.5, 1.0, 2.0, 4.0)]
        assert all(a > b for a, b in zip(values, values[1:]))

    def test_invalid_df(self):
        with pytest.raises(InvalidDfError):
            t_pvalue(1.0, 0)
        with pytest.raises(InvalidDfError):
            t_pvalue(1.0, 2.5)
