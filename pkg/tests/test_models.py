"""Dynamics-model construction, training, and prediction contracts."""

import numpy as np
import pytest

from relearn_hvac.errors import ConfigurationError, InputError, SchemaError
from relearn_hvac.models import (
    ARCHITECTURES,
    EarlyStopper,
    TrainConfig,
    build_model,
    check_architecture,
    model_loss,
    predict_energy,
    predict_scaled,
    predict_valve,
    predict_valve_prob,
    train_model,
    warm_start_retrain,
)
from relearn_hvac.nn import params_checksum
from relearn_hvac.pipeline import LOOKBACK, ScalerParams, SequenceDataset


def zero_head(model):
    head = model.layers[-1]
    head.W[:] = 0.0
    head.b[:] = 0.0
    return model


def toy_dataset(n=200, seed=0, noise=0.0):
    # target = mean of feature column 0 over the sequence, an easy map
    rng = np.random.default_rng(seed)
    inputs = rng.uniform(0.0, 1.0, size=(n, LOOKBACK, 8))
    targets = inputs[:, :, 0].mean(axis=1)
    if noise:
        targets = targets + rng.normal(scale=noise, size=n)
    return SequenceDataset(inputs, targets, np.arange(LOOKBACK, LOOKBACK + n))


@pytest.mark.parametrize("kind", sorted(ARCHITECTURES))
def test_build_model_layout(kind):
    n_dense, dense_w, n_lstm, lstm_w, head_act, _ = ARCHITECTURES[kind]
    model = build_model(kind, np.random.default_rng(0))
    kinds = [layer.kind for layer in model.layers]
    assert kinds == ["dense"] * n_dense + ["lstm"] * n_lstm + ["dense"]
    for layer in model.layers[:n_dense]:
        assert layer.out_size == dense_w
        assert layer.activation == "relu"
    for layer in model.layers[n_dense:n_dense + n_lstm]:
        assert layer.hidden_size == lstm_w
    head = model.layers[-1]
    assert head.out_size == 1
    assert head.activation == head_act
    check_architecture(model, kind)


def test_build_model_unknown_kind():
    with pytest.raises(InputError):
        build_model("lighting", np.random.default_rng(0))


def test_check_architecture_rejects_wrong_kind():
    model = build_model("heating", np.random.default_rng(0))
    with pytest.raises(SchemaError):
        check_architecture(model, "valve")


def test_model_loss_mapping():
    assert model_loss("heating") == "mse"
    assert model_loss("cooling") == "mse"
    assert model_loss("valve") == "bce"


def test_train_config_validation():
    with pytest.raises(ConfigurationError):
        TrainConfig(max_epochs=-1)
    with pytest.raises(ConfigurationError):
        TrainConfig(val_fraction=0.0)
    with pytest.raises(ConfigurationError):
        TrainConfig(val_fraction=1.0)
    with pytest.raises(ConfigurationError):
        TrainConfig(patience=0)


def test_early_stopper_strictly_worsening():
    # Validation loss strictly increasing from epoch 1 with patience 3:
    # epochs 2, 3, 4 are stale, so epoch 4 triggers the stop and the
    # best checkpoint stays at epoch 1.
    stopper = EarlyStopper(patience=3)
    assert stopper.update(1, 1.0) is False
    assert stopper.update(2, 1.1) is False
    assert stopper.update(3, 1.2) is False
    assert stopper.update(4, 1.3) is True
    assert stopper.best_epoch == 1
    assert stopper.best == 1.0


def test_early_stopper_resets_on_improvement():
    stopper = EarlyStopper(patience=2)
    stopper.update(1, 1.0)
    stopper.update(2, 1.5)
    assert stopper.update(3, 0.5) is False
    assert stopper.stale == 0
    assert stopper.best_epoch == 3


def test_early_stopper_equal_loss_counts_as_stale():
    stopper = EarlyStopper(patience=1)
    stopper.update(1, 1.0)
    assert stopper.update(2, 1.0) is True


def test_train_zero_epochs_returns_identical_copy():
    model = build_model("heating", np.random.default_rng(3))
    before = params_checksum(model)
    result = train_model(model, toy_dataset(40), TrainConfig(max_epochs=0),
                         np.random.default_rng(0))
    assert params_checksum(result.model) == before
    assert result.model is not model
    assert result.train_losses == [] and result.val_losses == []


def test_train_does_not_mutate_input_model():
    model = build_model("heating", np.random.default_rng(4))
    before = params_checksum(model)
    train_model(model, toy_dataset(60), TrainConfig(max_epochs=3, batch_size=16),
                np.random.default_rng(1))
    assert params_checksum(model) == before


def test_train_empty_dataset_rejected():
    model = build_model("heating", np.random.default_rng(0))
    empty = SequenceDataset(np.zeros((0, LOOKBACK, 8)), np.zeros(0), np.zeros(0, int))
    with pytest.raises(InputError):
        train_model(model, empty, TrainConfig(), np.random.default_rng(0))


def test_train_learns_easy_target():
    model = build_model("heating", np.random.default_rng(5))
    data = toy_dataset(300, seed=1)
    result = train_model(model, data, TrainConfig(max_epochs=40, patience=40),
                         np.random.default_rng(2))
    assert result.val_losses[-1] < result.val_losses[0] * 0.5
    assert result.best_epoch >= 1


def test_train_returns_best_validation_checkpoint():
    model = build_model("heating", np.random.default_rng(6))
    data = toy_dataset(120, seed=2, noise=0.05)
    result = train_model(model, data, TrainConfig(max_epochs=15, patience=15),
                         np.random.default_rng(3))
    best = min(result.val_losses)
    assert result.val_losses[result.best_epoch - 1] == best


def test_train_deterministic_under_seed():
    data = toy_dataset(80, seed=3)
    sums = []
    for _ in range(2):
        model = build_model("cooling", np.random.default_rng(7))
        result = train_model(model, data, TrainConfig(max_epochs=4),
                             np.random.default_rng(11))
        sums.append(params_checksum(result.model))
    assert sums[0] == sums[1]


def test_warm_start_keeps_dense_layers_bitwise():
    model = build_model("heating", np.random.default_rng(8))
    first = train_model(model, toy_dataset(150, seed=4),
                        TrainConfig(max_epochs=6), np.random.default_rng(4))
    dense_before = params_checksum(first.model, kinds=("dense",))
    lstm_before = params_checksum(first.model, kinds=("lstm",))
    second = warm_start_retrain(first.model, toy_dataset(150, seed=5),
                                TrainConfig(max_epochs=6), np.random.default_rng(5))
    assert params_checksum(second.model, kinds=("dense",)) == dense_before
    assert params_checksum(second.model, kinds=("lstm",)) != lstm_before


def test_warm_start_valve_training_runs():
    model = build_model("valve", np.random.default_rng(9))
    rng = np.random.default_rng(6)
    inputs = rng.uniform(size=(80, LOOKBACK, 8))
    targets = (inputs[:, :, 0].mean(axis=1) > 0.5).astype(np.float64)
    data = SequenceDataset(inputs, targets, np.arange(80))
    result = warm_start_retrain(model, data, TrainConfig(max_epochs=3),
                                np.random.default_rng(7), loss="bce")
    dense = params_checksum(model, kinds=("dense",))
    assert params_checksum(result.model, kinds=("dense",)) == dense


def test_predict_scaled_clamps_below_zero():
    model = zero_head(build_model("heating", np.random.default_rng(10)))
    model.layers[-1].b[:] = -0.7
    x = np.zeros((3, LOOKBACK, 8))
    out = predict_scaled(model, x)
    assert out.shape == (3,)
    assert np.all(out == 0.0)
    model.layers[-1].b[:] = 0.3
    assert np.allclose(predict_scaled(model, x), 0.3)


def test_predict_scaled_single_sequence():
    model = zero_head(build_model("heating", np.random.default_rng(11)))
    model.layers[-1].b[:] = 0.25
    out = predict_scaled(model, np.zeros((LOOKBACK, 8)))
    assert np.isscalar(out) or out.ndim == 0
    assert float(out) == pytest.approx(0.25)


def test_predict_energy_inverts_scaler():
    # A zero head predicts scaled 0, which must invert to the column minimum.
    model = zero_head(build_model("heating", np.random.default_rng(12)))
    scaler = ScalerParams({"hwe": (5.0, 25.0)})
    out = predict_energy(model, np.zeros((4, LOOKBACK, 8)), scaler, "hwe")
    assert np.allclose(out, 5.0)
    model.layers[-1].b[:] = 0.5
    out = predict_energy(model, np.zeros((4, LOOKBACK, 8)), scaler, "hwe")
    assert np.allclose(out, 15.0)


def test_predict_valve_threshold_boundary():
    # Zeroed head gives sigmoid(0) = 0.5 exactly; >= keeps the valve on.
    model = zero_head(build_model("valve", np.random.default_rng(13)))
    on, prob = predict_valve(model, np.zeros((2, LOOKBACK, 8)))
    assert np.allclose(prob, 0.5)
    assert np.all(on)
    on, _ = predict_valve(model, np.zeros((2, LOOKBACK, 8)), threshold=0.6)
    assert not np.any(on)


def test_predict_valve_prob_in_unit_interval():
    model = build_model("valve", np.random.default_rng(14))
    x = np.random.default_rng(15).uniform(-2.0, 2.0, size=(20, LOOKBACK, 8))
    prob = predict_valve_prob(model, x)
    assert np.all((prob > 0.0) & (prob < 1.0))
