import numpy as np
import pytest

from fspda import (
    DesignMatrix,
    DimensionMismatchError,
    EmptySetError,
    InvalidIndexError,
    RankDeficientError,
    gram_min_eigenvalue,
    ols_fit,
)

from conftest import make_panel, random_panel


def normal_equations(y, X):
    """Independent oracle: solve X'X b = X'y directly."""
    return np.linalg.solve(X.T @ X, X.T @ y)


class TestOlsFit:
    def test_exact_proportionality(self):
        y = np.array([2.0, 4.0, 6.0, 8.0])
        fit = ols_fit(y, DesignMatrix(np.array([[1.0], [2.0], [3.0], [4.0]])))
        assert fit.coefficients == pytest.approx([2.0])
        assert fit.residuals == pytest.approx([0, 0, 0, 0], abs=1e-12)
        assert fit.r_squared == pytest.approx(1.0)

    def test_intercept_only_constant_response(self):
        fit = ols_fit(np.ones(3), DesignMatrix(np.empty((3, 0)), has_intercept=True))
        assert fit.coefficients == pytest.approx([1.0])
        assert fit.sigma2_hat == pytest.approx(0.0, abs=1e-30)

    def test_against_hand_solved_normal_equations(self):
        # beta = 34/30, worked out from the normal equations before the build
        y = np.array([2.0, 2.0, 4.0, 4.0])
        x = np.array([[1.0], [2.0], [3.0], [4.0]])
        fit = ols_fit(y, DesignMatrix(x))
        assert fit.coefficients == pytest.approx([17.0 / 15.0], rel=1e-12)
        assert fit.sigma2_hat == pytest.approx(11.0 / 30.0, rel=1e-12)
        assert fit.r_squared == pytest.approx(289.0 / 300.0, rel=1e-12)

    def test_matches_normal_equations_on_random_designs(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            X = rng.normal(size=(30, 4))
            y = rng.normal(size=30)
            fit = ols_fit(y, DesignMatrix(X))
            assert fit.coefficients == pytest.approx(normal_equations(y, X), rel=1e-9)

    def test_intercept_slot_leads(self):
        rng = np.random.default_rng(8)
        X = rng.normal(size=(25, 2))
        y = 3.0 + X @ np.array([1.0, -2.0]) + rng.normal(size=25) * 0.1
        fit = ols_fit(y, DesignMatrix(X, has_intercept=True))
        aug = np.hstack([np.ones((25, 1)), X])
        assert fit.coefficients == pytest.approx(normal_equations(y, aug), rel=1e-9)
        assert fit.intercept == pytest.approx(3.0, abs=0.2)

    def test_rank_deficient_duplicate_column(self):
        x = np.random.default_rng(3).normal(size=(20, 1))
        with pytest.raises(RankDeficientError):
            ols_fit(np.arange(20.0), DesignMatrix(np.hstack([x, x])))

    def test_constant_column_with_intercept_is_rank_deficient(self):
        with pytest.raises(RankDeficientError):
            ols_fit(
                np.arange(10.0),
                DesignMatrix(np.full((10, 1), 2.0), has_intercept=True),
            )

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            ols_fit(np.ones(5), DesignMatrix(np.ones((4, 1))))

    def test_too_few_rows(self):
        with pytest.raises(DimensionMismatchError):
            ols_fit(np.ones(2), DesignMatrix(np.eye(2)))

    def test_non_finite_design_rejected(self):
        bad = np.ones((5, 1))
        bad[2, 0] = np.nan
        with pytest.raises(DimensionMismatchError):
            DesignMatrix(bad)


class TestOlsInvariants:
    def test_projection_idempotence(self):
        rng = np.random.default_rng(11)
        for _ in range(10):
            X = rng.normal(size=(20, 3))
            y = rng.normal(size=20)
            fit = ols_fit(y, DesignMatrix(X))
            refit = ols_fit(y - fit.residuals, DesignMatrix(X))
            assert np.max(np.abs(refit.residuals)) < 1e-10

    def test_nested_monotonicity(self):
        rng = np.random.default_rng(12)
        for _ in range(10):
            X = rng.normal(size=(30, 5))
            y = rng.normal(size=30)
            sigmas = [
                ols_fit(y, DesignMatrix(X[:, : k + 1])).sigma2_hat for k in range(5)
            ]
            assert all(b <= a + 1e-12 for a, b in zip(sigmas, sigmas[1:]))

    def test_r_squared_definition_replay(self):
        rng = np.random.default_rng(13)
        for intercept in (False, True):
            X = rng.normal(size=(40, 3))
            y = rng.normal(size=40) + (2.0 if intercept else 0.0)
            fit = ols_fit(y, DesignMatrix(X, has_intercept=intercept))
            ssr = float(np.sum(fit.residuals**2))
            sst = float(np.sum((y - y.mean()) ** 2)) if intercept else float(np.sum(y**2))
            assert fit.r_squared == pytest.approx(1.0 - ssr / sst, rel=1e-10)


class TestGramMinEigenvalue:
    def test_single_alternating_unit(self):
        panel = make_panel(
            treated=np.zeros(6),
            controls=np.array([[1.0], [-1.0], [1.0], [-1.0], [0.5], [0.5]]),
            t1=4,
        )
        assert gram_min_eigenvalue(panel, [0]) == pytest.approx(1.0)

    def test_identical_units_are_singular(self):
        col = np.random.default_rng(5).normal(size=8)
        panel = make_panel(np.zeros(8), np.column_stack([col, col]), t1=6)
        assert gram_min_eigenvalue(panel, [0, 1]) == pytest.approx(0.0, abs=1e-12)

    def test_matches_explicit_eigensolve(self):
        panel = random_panel(seed=99, t1=30, t2=5, n_units=6)
        units = [1, 3, 4]
        block = panel.pre_controls[:, units]
        gram = block.T @ block / panel.t1
        expected = float(np.min(np.linalg.eigvalsh(gram)))
        assert gram_min_eigenvalue(panel, units) == pytest.approx(expected, rel=1e-12)

    def test_permutation_invariance(self):
        panel = random_panel(seed=100, n_units=6)
        a = gram_min_eigenvalue(panel, [0, 2, 5])
        b = gram_min_eigenvalue(panel, [5, 0, 2])
        assert a == pytest.approx(b, rel=1e-12)

    def test_empty_set(self):
        panel = random_panel(seed=1)
        with pytest.raises(EmptySetError):
            gram_min_eigenvalue(panel, [])

    def test_invalid_index(self):
        panel = random_panel(seed=1, n_units=4)
        with pytest.raises(InvalidIndexError):
            gram_min_eigenvalue(panel, [0, 4])
