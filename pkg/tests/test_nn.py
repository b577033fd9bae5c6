import numpy as np
import pytest

from fedsim.data import LabeledSet, make_synthetic
from fedsim.errors import DimensionMismatch, EmptyDataset
from fedsim.nn import (
    ModelSpec,
    TrainConfig,
    evaluate,
    gradient,
    init_model,
    local_train,
    predict_proba,
)
from fedsim.params import ParamVector, param_count


def finite_difference_gradient(model, batch, activation, step=1e-6):
    """Independent oracle: central differences of the mean loss."""
    grad = np.zeros_like(model.values)
    for j in range(model.values.size):
        up = model.values.copy()
        up[j] += step
        down = model.values.copy()
        down[j] -= step
        loss_up = evaluate(ParamVector(up, model.layout), batch, activation).mean_loss
        loss_down = evaluate(ParamVector(down, model.layout), batch, activation).mean_loss
        grad[j] = (loss_up - loss_down) / (2.0 * step)
    return grad


def random_batch(rng, n, dim, num_classes):
    return LabeledSet(
        rng.uniform(0.0, 1.0, size=(n, dim)),
        rng.integers(0, num_classes, size=n),
        num_classes,
    )


class TestInitModel:
    def test_deterministic(self):
        spec = ModelSpec(6, (5,), 3)
        a = init_model(spec, 7)
        b = init_model(spec, 7)
        np.testing.assert_array_equal(a.values, b.values)

    def test_seed_sensitivity(self):
        spec = ModelSpec(6, (5,), 3)
        a = init_model(spec, 7)
        b = init_model(spec, 8)
        assert np.any(a.values != b.values)

    def test_layout_length(self):
        spec = ModelSpec(784, (128,), 10)
        model = init_model(spec, 0)
        assert len(model) == 101_770
        assert len(model) == param_count(spec.layout())

    def test_biases_start_at_zero(self):
        spec = ModelSpec(4, (3,), 2)
        model = init_model(spec, 5)
        # last two entries are the output bias
        np.testing.assert_array_equal(model.values[-2:], 0.0)

    def test_invalid_spec(self):
        with pytest.raises(ValueError):
            ModelSpec(4, (3,), 1)
        with pytest.raises(ValueError):
            ModelSpec(4, (0,), 3)
        with pytest.raises(ValueError):
            ModelSpec(4, (3,), 3, activation="sigmoid")


class TestGradient:
    @pytest.mark.parametrize("activation", ["relu", "tanh"])
    def test_matches_finite_differences(self, activation):
        rng = np.random.default_rng(12)
        spec = ModelSpec(3, (4,), 3, activation=activation)  # 31 parameters
        model = init_model(spec, 3)
        batch = random_batch(rng, 8, 3, 3)
        analytic = gradient(model, batch, activation).values
        numeric = finite_difference_gradient(model, batch, activation)
        np.testing.assert_allclose(analytic, numeric, rtol=1e-4, atol=1e-6)

    def test_duplicated_batch_mean_invariance(self):
        rng = np.random.default_rng(4)
        spec = ModelSpec(5, (4,), 3)
        model = init_model(spec, 1)
        batch = random_batch(rng, 6, 5, 3)
        doubled = LabeledSet(
            np.concatenate([batch.features, batch.features]),
            np.concatenate([batch.labels, batch.labels]),
            3,
        )
        np.testing.assert_allclose(
            gradient(model, batch).values, gradient(model, doubled).values,
            rtol=1e-12, atol=1e-15,
        )

    def test_zero_model_bias_gradient_is_uniform_minus_onehot_mean(self):
        spec = ModelSpec(4, (3,), 4)
        model = ParamVector(np.zeros(param_count(spec.layout())), spec.layout())
        labels = np.array([0, 1, 2, 3, 0, 1, 2, 3])
        batch = LabeledSet(np.zeros((8, 4)), labels, 4)
        grad = gradient(model, batch).values
        # zero inputs and weights: only the output bias can receive gradient
        onehot = np.eye(4)[labels]
        expected_bias = (0.25 - onehot).mean(axis=0)
        np.testing.assert_allclose(grad[-4:], expected_bias, atol=1e-15)
        np.testing.assert_allclose(grad[:-4], 0.0, atol=1e-15)

    def test_errors(self):
        spec = ModelSpec(4, (3,), 2)
        model = init_model(spec, 0)
        empty = LabeledSet(np.empty((0, 4)), np.empty(0, dtype=int), 2)
        with pytest.raises(EmptyDataset):
            gradient(model, empty)
        wrong_dim = LabeledSet(np.zeros((2, 5)), np.zeros(2, dtype=int), 2)
        with pytest.raises(DimensionMismatch):
            gradient(model, wrong_dim)


class TestLocalTrain:
    def test_zero_learning_rate_is_identity(self):
        train, _, _ = make_synthetic(3, 10, 4, 0.2, seed=0)
        spec = ModelSpec(4, (6,), 3)
        model = init_model(spec, 2)
        out = local_train(model, train, TrainConfig(0.0, 3, 4, seed=9))
        np.testing.assert_array_equal(out.values, model.values)

    def test_input_model_not_mutated(self):
        train, _, _ = make_synthetic(3, 10, 4, 0.2, seed=0)
        spec = ModelSpec(4, (6,), 3)
        model = init_model(spec, 2)
        before = model.values.copy()
        local_train(model, train, TrainConfig(0.5, 2, 4, seed=9))
        np.testing.assert_array_equal(model.values, before)

    def test_single_sample_single_step(self):
        rng = np.random.default_rng(8)
        spec = ModelSpec(3, (4,), 2)
        model = init_model(spec, 5)
        batch = random_batch(rng, 1, 3, 2)
        eta = 0.3
        out = local_train(model, batch, TrainConfig(eta, 1, 1, seed=0))
        step = eta * gradient(model, batch).values
        np.testing.assert_array_equal(out.values, model.values - step)
        # corroborate the analytic gradient with the finite-difference oracle
        numeric = finite_difference_gradient(model, batch, "relu")
        np.testing.assert_allclose(
            (model.values - out.values) / eta, numeric, rtol=1e-4, atol=1e-6
        )

    def test_loss_decreases_on_separable_blobs(self):
        train, _, _ = make_synthetic(2, 40, 4, 0.05, seed=3)
        spec = ModelSpec(4, (8,), 2)
        model = init_model(spec, 1)
        before = evaluate(model, train).mean_loss
        out = local_train(model, train, TrainConfig(0.2, 5, 8, seed=4))
        after = evaluate(out, train).mean_loss
        assert after <= before

    def test_epochs_equal_successive_single_epoch_calls(self):
        train, _, _ = make_synthetic(3, 12, 4, 0.2, seed=6)
        spec = ModelSpec(4, (5,), 3)
        model = init_model(spec, 7)
        base_seed = 1234
        multi = local_train(model, train, TrainConfig(0.1, 3, 5, seed=base_seed))
        step = model
        for epoch in range(3):
            step = local_train(step, train, TrainConfig(0.1, 1, 5, seed=base_seed + epoch))
        np.testing.assert_array_equal(multi.values, step.values)

    def test_deterministic(self):
        train, _, _ = make_synthetic(3, 12, 4, 0.2, seed=6)
        spec = ModelSpec(4, (5,), 3)
        model = init_model(spec, 7)
        cfg = TrainConfig(0.1, 2, 5, seed=11)
        a = local_train(model, train, cfg)
        b = local_train(model, train, cfg)
        np.testing.assert_array_equal(a.values, b.values)

    def test_invalid_train_config(self):
        with pytest.raises(ValueError):
            TrainConfig(-0.1, 1, 1, seed=0)
        with pytest.raises(ValueError):
            TrainConfig(0.1, 0, 1, seed=0)
        with pytest.raises(ValueError):
            TrainConfig(0.1, 1, 0, seed=0)


class TestEvaluate:
    def test_constant_predictor_on_its_class(self):
        spec = ModelSpec(3, (2,), 4)
        values = np.zeros(param_count(spec.layout()))
        model = ParamVector(values, spec.layout())
        # push the output bias of class 2 up so every prediction is class 2
        values = model.values.copy()
        values[-4:] = [0.0, 0.0, 5.0, 0.0]
        model = ParamVector(values, spec.layout())
        data = LabeledSet(np.random.default_rng(0).uniform(size=(20, 3)),
                          np.full(20, 2), 4)
        assert evaluate(model, data).accuracy == 1.0

    def test_uniform_logits_break_ties_toward_class_zero(self):
        spec = ModelSpec(4, (3,), 10)
        model = ParamVector(np.zeros(param_count(spec.layout())), spec.layout())
        labels = np.repeat(np.arange(10), 5)
        data = LabeledSet(np.random.default_rng(1).uniform(size=(50, 4)), labels, 10)
        # all logits equal, argmax picks class 0, which is 1/10 of the labels
        assert evaluate(model, data).accuracy == pytest.approx(0.1)

    def test_empty_dataset(self):
        spec = ModelSpec(4, (3,), 2)
        model = init_model(spec, 0)
        empty = LabeledSet(np.empty((0, 4)), np.empty(0, dtype=int), 2)
        with pytest.raises(EmptyDataset):
            evaluate(model, empty)

    def test_loss_finite_for_extreme_weights(self):
        spec = ModelSpec(4, (3,), 2)
        model = ParamVector(
            np.full(param_count(spec.layout()), 1e4), spec.layout()
        )
        data = LabeledSet(np.ones((5, 4)), np.zeros(5, dtype=int), 2)
        metrics = evaluate(model, data)
        assert np.isfinite(metrics.mean_loss)


class TestProbabilities:
    def test_rows_sum_to_one(self):
        rng = np.random.default_rng(3)
        spec = ModelSpec(6, (8, 5), 4, activation="tanh")
        model = init_model(spec, 2)
        X = rng.uniform(size=(40, 6))
        proba = predict_proba(model, X, "tanh")
        np.testing.assert_allclose(proba.sum(axis=1), 1.0, atol=1e-9)
        assert np.all(proba >= 0.0)
