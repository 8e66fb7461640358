import math

import numpy as np
import pytest

from bapc.base_models import (
    NewsvendorLinkParams,
    OlsDesign,
    delta_theta_closed_form,
    design_matrix,
    empirical_quantile,
    fit_lambda,
    ols_fit,
    parametric_critical_fractile,
    profit,
    success_indicator,
    success_matrix,
)
from bapc.core import LabeledDataset, NeighborhoodSpec, fit_base, refit_base
from bapc.errors import DomainError, EmptyNeighborhood, RankDeficient, ValidationError
from bapc.smoothing import local_linear_smooth


def gauss_solve(A, b):
    """Plain Gaussian elimination with partial pivoting, for small systems."""
    A = [list(map(float, row)) + [float(v)] for row, v in zip(A, b)]
    n = len(A)
    for col in range(n):
        piv = max(range(col, n), key=lambda r: abs(A[r][col]))
        A[col], A[piv] = A[piv], A[col]
        for r in range(col + 1, n):
            f = A[r][col] / A[col][col]
            for k in range(col, n + 1):
                A[r][k] -= f * A[col][k]
    x = [0.0] * n
    for r in reversed(range(n)):
        x[r] = (A[r][n] - sum(A[r][k] * x[k] for k in range(r + 1, n))) / A[r][r]
    return np.array(x)


class TestOls:
    def test_two_points_interpolated(self):
        theta = ols_fit(OlsDesign.from_features([0.0, 1.0], [1.0, 3.0]))
        np.testing.assert_allclose(theta, [1.0, 2.0], atol=1e-12)

    def test_constant_data_zero_slope(self):
        theta = ols_fit(OlsDesign.from_features([-1.0, 0.0, 1.0], [5.0, 5.0, 5.0]))
        np.testing.assert_allclose(theta, [5.0, 0.0], atol=1e-12)

    def test_noiseless_recovery(self):
        rng = np.random.default_rng(1)
        x = rng.normal(size=(40, 3))
        beta = np.array([0.5, -1.0, 2.0, 3.0])
        theta = ols_fit(OlsDesign(design_matrix(x), design_matrix(x) @ beta))
        np.testing.assert_allclose(theta, beta, atol=1e-10)

    def test_matches_gaussian_elimination(self):
        rng = np.random.default_rng(7)
        x = rng.uniform(-3, 3, 50)
        y = 1.5 - 0.7 * x + rng.normal(scale=0.4, size=50)
        X = design_matrix(x)
        gram = [[50.0, x.sum()], [x.sum(), (x * x).sum()]]
        expected = gauss_solve(gram, [y.sum(), (x * y).sum()])
        np.testing.assert_allclose(ols_fit(OlsDesign(X, y)), expected, atol=1e-10)

    def test_rank_deficient(self):
        with pytest.raises(RankDeficient):
            ols_fit(OlsDesign.from_features([2.0, 2.0, 2.0], [1.0, 2.0, 3.0]))

    def test_residuals_orthogonal_to_design(self):
        rng = np.random.default_rng(3)
        x = rng.normal(size=(30, 2))
        y = rng.normal(size=30) * 10
        X = design_matrix(x)
        eps = y - X @ ols_fit(OlsDesign(X, y))
        assert np.all(np.abs(X.T @ eps) <= 1e-10 * np.linalg.norm(y) * np.abs(X).sum(axis=0))

    def test_non_finite_rejected(self):
        with pytest.raises(ValidationError):
            OlsDesign.from_features([0.0, np.nan], [1.0, 2.0])


class TestDeltaThetaClosedForm:
    def test_constant_shift_goes_to_intercept(self):
        x = np.linspace(0, 3, 17)
        dt = delta_theta_closed_form(OlsDesign.from_features(x, np.sin(x)), np.full(17, 0.25))
        np.testing.assert_allclose(dt, [0.25, 0.0], atol=1e-12)

    def test_own_residuals_give_zero(self):
        rng = np.random.default_rng(2)
        x = rng.uniform(0, 5, 25)
        y = np.exp(0.3 * x) + rng.normal(size=25)
        design = OlsDesign.from_features(x, y)
        eps = y - design.matrix @ ols_fit(design)
        np.testing.assert_allclose(delta_theta_closed_form(design, eps), 0.0, atol=1e-10)

    def test_matches_two_fits(self):
        rng = np.random.default_rng(11)
        x = rng.uniform(0, 2, 40)
        y = 3 * x + rng.normal(size=40)
        eps_hat = rng.normal(size=40)
        ds = LabeledDataset(x, y)
        theta = fit_base("ols_linear", ds).theta
        theta_prime = refit_base("ols_linear", ds.with_labels(y - eps_hat)).theta
        closed = delta_theta_closed_form(OlsDesign.from_features(x, y), eps_hat)
        np.testing.assert_allclose(theta - theta_prime, closed, atol=1e-8)

    def test_length_mismatch(self):
        with pytest.raises(ValidationError):
            delta_theta_closed_form(OlsDesign.from_features([0.0, 1.0, 2.0], [0.0, 1.0, 2.0]), [1.0])


class TestCriticalFractile:
    def test_unit_rate(self):
        assert parametric_critical_fractile(1.0, 2.0, 1.0) == pytest.approx(math.log(2) / 2, abs=1e-15)
        assert parametric_critical_fractile(1.0, 2.0, 1.0) == pytest.approx(0.3466, abs=5e-5)

    def test_rate_two(self):
        # log(2) / 4 by hand
        assert parametric_critical_fractile(2.0, 2.0, 1.0) == pytest.approx(0.1733, abs=5e-5)

    def test_vanishing_margin(self):
        vals = [parametric_critical_fractile(1.0, 2.0, c) for c in (1.9, 1.99, 1.999999)]
        assert vals[0] > vals[1] > vals[2] > 0
        assert vals[2] < 1e-6

    @pytest.mark.parametrize("lam,p,c", [(0.0, 2, 1), (1, 1, 1), (1, 1, 2), (1, 2, 0)])
    def test_domain(self, lam, p, c):
        with pytest.raises(DomainError):
            parametric_critical_fractile(lam, p, c)


class TestEmpiricalQuantile:
    def test_hand_example(self):
        assert empirical_quantile([1, 2, 3, 4], 0.5) == 2

    def test_lower_boundary(self):
        s = [5.0, 3.0, 9.0, 4.0]
        assert empirical_quantile(s, 0.25) == 3.0
        assert empirical_quantile(s, 0.01) == 3.0

    def test_upper(self):
        assert empirical_quantile([1, 2, 3, 4], 0.76) == 4

    def test_exponential_median(self):
        rng = np.random.default_rng(5)
        sample = rng.exponential(scale=0.5, size=100_000)
        assert abs(empirical_quantile(sample, 0.5) - math.log(2) / 2) < 0.01

    def test_empty(self):
        with pytest.raises(ValidationError):
            empirical_quantile([], 0.5)


class TestProfitAndSuccess:
    def test_profit_examples(self):
        assert profit(2, 1, 0.0, 3.7) == 0.0
        assert profit(2, 1, 1.0, 2.0) == 1.0
        assert profit(2, 1, 1.0, 0.5) == 0.0

    def test_indicator_singleton(self):
        sample = np.array([0.05, 0.5, 1.0, 2.0])
        params = NewsvendorLinkParams(2.0, 1.0, 0.0, sample, lam=1.0)
        # q* = 0.3466; profit at D=1 is 2 * 0.3466 - 0.3466 > 0
        assert success_indicator(params, 1.0) == 1.0
        # D = 0.05 < q*/2 so profit is negative
        assert success_indicator(params, 0.05) == 0.0

    def test_indicator_all_positive(self):
        sample = np.array([1.0, 1.05, 1.1])
        params = NewsvendorLinkParams(2.0, 1.0, 0.2, sample, lam=1.0)
        assert success_indicator(params, 1.05) == 1.0

    def test_indicator_fraction(self):
        sample = np.array([0.10, 0.15, 0.20, 0.25])
        params = NewsvendorLinkParams(2.0, 1.0, 0.2, sample, lam=1.0)
        # threshold q*/2 = 0.1733: two of four neighbours succeed
        assert success_indicator(params, 0.15) == 0.5

    def test_empty_neighborhood(self):
        params = NewsvendorLinkParams(2.0, 1.0, 0.0, np.array([1.0, 2.0]), lam=1.0)
        with pytest.raises(EmptyNeighborhood):
            success_indicator(params, 1.5)

    def test_closed_membership(self):
        params = NewsvendorLinkParams(2.0, 1.0, 0.5, np.array([1.0, 2.0]), lam=1.0)
        assert success_indicator(params, 1.5) == 1.0


class TestFitLambda:
    def _data(self):
        rng = np.random.default_rng(9)
        return np.sort(rng.exponential(0.5, 80))

    def test_exact_targets_recovered(self):
        D = self._data()
        grid = np.logspace(-1, 1, 200)
        S_all = success_matrix(grid, D, D, 0.0, 2.0, 1.0)
        # pick a grid point that starts a new plateau so it is the smallest minimiser
        k = next(i for i in range(120, 200) if not np.array_equal(S_all[i], S_all[i - 1]))
        res = fit_lambda(D, S_all[k], 2.0, 1.0, 0.0, grid, smoothing_span=None)
        assert res.lam == grid[k]
        assert res.objective[k] == 0.0

    def test_constant_objective_picks_smallest(self):
        D = np.array([5.0, 6.0, 7.0])
        grid = np.array([0.5, 1.0, 2.0])
        res = fit_lambda(D, np.ones(3), 2.0, 1.0, 0.0, grid, smoothing_span=0.25)
        assert np.ptp(res.objective) == 0.0
        assert res.lam == 0.5

    def test_returns_grid_member(self):
        D = self._data()
        S = (D > 0.3).astype(float)
        res = fit_lambda(D, S, 2.0, 1.0, 0.1)
        assert res.lam in res.grid
        assert res.objective.shape == res.grid.shape == res.smoothed.shape

    def test_bad_grid(self):
        with pytest.raises(ValidationError):
            fit_lambda([1.0, 2.0], [0.0, 1.0], 2.0, 1.0, 0.0, [1.0, 0.5])


class TestSmoothing:
    def test_reproduces_lines(self):
        x = np.linspace(0, 1, 50)
        np.testing.assert_allclose(local_linear_smooth(x, 3 * x - 1, 0.25), 3 * x - 1, atol=1e-10)

    def test_reduces_noise(self):
        rng = np.random.default_rng(0)
        x = np.linspace(0, 1, 200)
        y = x**2 + rng.normal(scale=0.1, size=200)
        sm = local_linear_smooth(x, y, 0.25)
        assert np.mean((sm - x**2) ** 2) < 0.2 * np.mean((y - x**2) ** 2)


class TestNeighborhood:
    def test_zero_radius_is_center(self):
        nb = NeighborhoodSpec([1.0], 0.0)
        np.testing.assert_array_equal(nb.contains([0.999, 1.0, 1.001]), [False, True, False])

    def test_euclidean(self):
        nb = NeighborhoodSpec([0.0, 0.0], 1.0)
        np.testing.assert_array_equal(nb.contains([[0.6, 0.8], [0.8, 0.8]]), [True, False])
