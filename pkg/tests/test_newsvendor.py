import math

import numpy as np
import pytest

from bapc.correctors import ZeroCorrector
from bapc.errors import ValidationError
from bapc.newsvendor import (
    NewsvendorConfig,
    exponential_sample,
    generate_newsvendor_dataset,
    monte_carlo_cv,
    one_repeat,
    optimize_delta,
    run_newsvendor_bapc,
    stratified_halves,
)
from bapc.streams import substream

SMALL_GRID = tuple(np.logspace(-1, 1, 40))


class TestDataset:
    def test_records(self):
        m = generate_newsvendor_dataset(NewsvendorConfig(seed=3))
        assert len(m) == 200
        assert m.perturbed.sum() == 100
        np.testing.assert_array_equal(m.order, m.q_hat + np.where(m.perturbed, 1.0, 0.0))
        np.testing.assert_array_equal(m.profit, 2 * np.minimum(m.demand, m.order) - m.order)
        np.testing.assert_array_equal(m.success, (m.profit > 0).astype(float))

    def test_profit_cap(self):
        m = generate_newsvendor_dataset(NewsvendorConfig(seed=4))
        assert np.all(m.profit <= m.order + 1e-15)
        assert (m.q_hat + 1.0) > m.q_hat

    def test_exponential_mean(self):
        D = exponential_sample(substream(0, "check"), 2.0, 200_000)
        assert abs(D.mean() - 0.5) < 4 * 0.5 / math.sqrt(D.size)

    def test_fractile_converges(self):
        m = generate_newsvendor_dataset(NewsvendorConfig(n=10_000, seed=1))
        assert abs(m.q_hat - math.log(2) / 2) < 0.05

    def test_config_validation(self):
        with pytest.raises(ValidationError):
            NewsvendorConfig(n=102)
        with pytest.raises(ValidationError):
            NewsvendorConfig(p=1.0, c=1.0)


class TestSplit:
    def test_stratified(self):
        perturbed = np.arange(200) >= 100
        a, b = stratified_halves(perturbed, substream(5, "fold-split"))
        assert a.size == b.size == 100
        assert perturbed[a].sum() == perturbed[b].sum() == 50
        assert not set(a) & set(b)


class TestShift:
    def test_zero_corrector_fixed_point(self):
        m = generate_newsvendor_dataset(NewsvendorConfig(seed=2))
        res = run_newsvendor_bapc(m, m, ZeroCorrector(), 0.1, lambda_grid=SMALL_GRID)
        assert res.delta_lambda == 0.0

    def test_targets_valid(self):
        res = one_repeat(NewsvendorConfig(seed=6, lambda_grid=SMALL_GRID), "rf", 0)
        t = res.corrected_targets
        assert np.all((t >= 0) & (t <= 1))
        np.testing.assert_array_equal(t, res.test.success - res.eps_hat)

    def test_correction_signs_by_group(self):
        res = one_repeat(NewsvendorConfig(seed=6, lambda_grid=SMALL_GRID), "rf", 0)
        # unsuccessful records cannot be corrected downward, successful ones cannot go up
        assert np.all(res.eps_hat[res.test.success == 0] <= 0)
        assert np.all(res.eps_hat[res.test.success == 1] >= 0)

    @pytest.mark.parametrize("repeat", [0, 1, 2])
    def test_positive_only_unperturbed_negative_only_perturbed(self, repeat):
        res = one_repeat(NewsvendorConfig(seed=6), "rf", repeat)
        e, pert = res.eps_hat, res.test.perturbed
        assert np.any(e[~pert] > 0) and not np.any(e[pert] > 0)
        assert np.any(e[pert] < 0) and not np.any(e[~pert] < 0)

    def test_deterministic(self):
        cfg = NewsvendorConfig(seed=8, lambda_grid=SMALL_GRID)
        a = one_repeat(cfg, "mlp", 3)
        b = one_repeat(cfg, "mlp", 3)
        assert a.delta_lambda == b.delta_lambda
        assert a.eps_hat.tobytes() == b.eps_hat.tobytes()


class TestMonteCarlo:
    def test_single_repeat_matches_one_split(self):
        cfg = NewsvendorConfig(seed=9, mc_repeats=1, lambda_grid=SMALL_GRID)
        mc = monte_carlo_cv(cfg, "rf")
        assert mc.shifts.tolist() == [one_repeat(cfg, "rf", 0).delta_lambda]
        assert mc.std == 0.0

    def test_repeats_independent_of_count(self):
        small = monte_carlo_cv(NewsvendorConfig(seed=9, mc_repeats=3, lambda_grid=SMALL_GRID), "rf")
        large = monte_carlo_cv(NewsvendorConfig(seed=9, mc_repeats=5, lambda_grid=SMALL_GRID), "rf")
        np.testing.assert_array_equal(large.shifts[:3], small.shifts)

    def test_optimize_single_element(self):
        cfg = NewsvendorConfig(seed=1, mc_repeats=2, lambda_grid=SMALL_GRID)
        delta_star, curve = optimize_delta(cfg, [0.2], "rf")
        assert delta_star == 0.2 and len(curve) == 1

    def test_optimize_empty(self):
        with pytest.raises(ValidationError):
            optimize_delta(NewsvendorConfig(mc_repeats=1), [], "rf")
