import math

import numpy as np
import pytest

from bapc.correctors import (
    ForestCorrector,
    ForestSpec,
    LogitWrapped,
    MlpCorrector,
    MlpSpec,
    lgt,
    lgt_inverse,
    make_corrector,
    train_corrector,
    truncate_correction,
)
from bapc.errors import ValidationError


class TestMlp:
    def test_zero_target(self):
        X = np.linspace(0, 1, 40)
        model = MlpCorrector(MlpSpec(seed=1, max_iterations=20_000)).fit(X, np.zeros(40))
        assert model.diagnostics["converged"]
        assert np.max(np.abs(model.predict(X))) < 1e-6

    def test_fits_smooth_curve(self):
        X = np.linspace(-1, 1, 80)
        y = np.sin(3 * X)
        model = MlpCorrector(MlpSpec(seed=2, max_iterations=500)).fit(X, y)
        assert np.mean((model.predict(X) - y) ** 2) < 0.01 * np.var(y)

    def test_iteration_cap_reported(self):
        X = np.linspace(0, 1, 40)
        model = MlpCorrector(MlpSpec(seed=1, max_iterations=5)).fit(X, np.sin(9 * X))
        assert not model.diagnostics["converged"]
        assert model.diagnostics["iterations"] == 5

    def test_loss_non_increasing(self):
        rng = np.random.default_rng(0)
        X = rng.uniform(0, 3, 60)
        model = MlpCorrector(MlpSpec(seed=5)).fit(X, np.cos(X) + rng.normal(scale=0.1, size=60))
        h = np.array(model.loss_history)
        assert np.all(np.diff(h) <= 1e-15 * max(1.0, h[0]))
        assert model.diagnostics["final_loss"] == pytest.approx(h[-1])

    def test_deterministic(self):
        X = np.linspace(0, 2, 30)
        y = X**2
        a = MlpCorrector(MlpSpec(seed=9)).fit(X, y).predict(X)
        b = MlpCorrector(MlpSpec(seed=9)).fit(X, y).predict(X)
        assert a.tobytes() == b.tobytes()

    def test_rejects_nan(self):
        with pytest.raises(ValidationError):
            MlpCorrector().fit([0.0, 1.0], [np.nan, 1.0])


class TestForest:
    def test_step_function(self):
        X = np.linspace(0, 1, 100)
        y = (X > 0.5).astype(float)
        model = ForestCorrector(ForestSpec(n_trees=30, seed=0)).fit(X, y)
        assert np.mean((model.predict(X) - y) ** 2) <= np.var(y)
        assert np.mean((model.predict(X) - y) ** 2) < 0.05

    def test_predictions_inside_label_range(self):
        rng = np.random.default_rng(3)
        X = rng.normal(size=(50, 2))
        y = rng.normal(size=50)
        pred = ForestCorrector(ForestSpec(n_trees=20, seed=1)).fit(X, y).predict(rng.normal(size=(200, 2)) * 3)
        assert pred.min() >= y.min() and pred.max() <= y.max()

    def test_deterministic(self):
        X = np.linspace(0, 1, 40)
        y = np.sin(6 * X)
        a = ForestCorrector(ForestSpec(n_trees=10, seed=4)).fit(X, y).predict(X)
        b = ForestCorrector(ForestSpec(n_trees=10, seed=4)).fit(X, y).predict(X)
        assert a.tobytes() == b.tobytes()

    def test_constant_labels(self):
        model = ForestCorrector(ForestSpec(n_trees=5)).fit(np.arange(10.0), np.full(10, 2.5))
        np.testing.assert_array_equal(model.predict([0.5, 100.0]), [2.5, 2.5])


class TestFactory:
    @pytest.mark.parametrize("name,kind", [("rf", "random_forest"), ("nnet", "mlp"), ("mlp", "mlp")])
    def test_aliases(self, name, kind):
        assert make_corrector(name).kind == kind

    def test_unknown(self):
        with pytest.raises(ValidationError):
            make_corrector("svm")

    def test_train_from_spec(self):
        model = train_corrector(ForestSpec(n_trees=3), np.arange(6.0), np.arange(6.0))
        assert model.kind == "random_forest"


class TestLogitScaling:
    def test_lgt_half(self):
        assert float(lgt(0.5)) == pytest.approx(math.log(3.0), abs=1e-14)

    def test_lgt_zero_and_odd(self):
        assert float(lgt(0.0)) == 0.0
        assert float(lgt(-0.3)) == pytest.approx(-float(lgt(0.3)), abs=1e-15)

    def test_clamp_keeps_endpoints_finite(self):
        v = lgt(np.array([-1.0, 1.0]))
        assert np.all(np.isfinite(v))
        np.testing.assert_allclose(lgt_inverse(v), [-(1 - 1e-6), 1 - 1e-6], atol=1e-12)

    def test_wrapped_outputs_bounded(self):
        X = np.linspace(0, 1, 30)
        eps = np.where(X > 0.5, 1.0, -1.0)
        pred = LogitWrapped(make_corrector("rf", n_trees=5)).fit(X, eps).predict(X)
        assert np.all(np.abs(pred) < 1)


class TestTruncation:
    def test_examples(self):
        np.testing.assert_array_equal(truncate_correction([1.0], [1.4]), [1.0])
        np.testing.assert_array_equal(truncate_correction([0.0], [-0.3]), [-0.3])
        np.testing.assert_array_equal(truncate_correction([0.0], [0.4]), [0.0])
        np.testing.assert_array_equal(truncate_correction([1.0], [-0.2]), [0.0])
        np.testing.assert_array_equal(truncate_correction([0.5], [0.2]), [0.2])
        np.testing.assert_array_equal(truncate_correction([0.1], [0.5]), [0.1])
        np.testing.assert_array_equal(truncate_correction([1.0], [-0.3]), [0.0])
