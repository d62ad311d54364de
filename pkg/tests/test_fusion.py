import json

import numpy as np
import pytest

from climadapt.errors import ConfigError, ShapeError, TrainingError, ValidationError
from climadapt.fusion import (
    FeatureDataset,
    fit_standardization,
    forward,
    gradient_check,
    init_model,
    load_dataset,
    load_model,
    loss_and_grad,
    mse,
    predict,
    save_model,
    train,
)

from oracles import wide_deep_reference


def _data(seed=0, n=40, wide=3, deep=2):
    rng = np.random.default_rng(seed)
    w, d = rng.normal(size=(n, wide)), rng.normal(size=(n, deep))
    return FeatureDataset(w, d, np.sin(d[:, 0]) + w[:, 0] + 0.1 * rng.normal(size=n))


def _reference(model, wide, deep):
    return wide_deep_reference(model.params, model.layers, model.wide_mean, model.wide_std,
                               model.deep_mean, model.deep_std, wide, deep)


@pytest.mark.parametrize("seed", range(5))
def test_forward_matches_scalar_oracle(seed):
    data = _data(seed)
    model = fit_standardization(init_model(3, 2, [4, 2], seed=seed), data)
    model = train(model, data, 20, 0.05)
    for i in range(5):
        ref = _reference(model, data.wide[i], data.deep[i])
        assert forward(model, data.wide[i], data.deep[i]) == pytest.approx(ref, abs=1e-12)


def test_zero_weights_predict_bias():
    model = init_model(2, 3, [4], seed=0)
    for k in model.params:
        model.params[k][...] = 0.0
    model.params["bias"][...] = 0.7
    out = predict(model, np.random.default_rng(0).normal(size=(6, 2)), np.ones((6, 3)))
    assert np.array_equal(out, np.full(6, 0.7))


def test_path_ablation():
    data = _data(1)
    model = train(fit_standardization(init_model(3, 2, [4, 2], seed=1), data), data, 50, 0.05)
    wide_only = model.copy()
    wide_only.params["head"][...] = 0.0
    deep_only = model.copy()
    deep_only.params["wide"][...] = 0.0
    bias = float(model.params["bias"])
    full = predict(model, data.wide, data.deep)
    parts = predict(wide_only, data.wide, data.deep) + predict(deep_only, data.wide, data.deep)
    assert np.allclose(full, parts - bias, atol=1e-12)


def test_parameter_count():
    model = init_model(3, 5, [4, 2])
    assert model.parameter_count() == 3 + (5 * 4 + 4) + (4 * 2 + 2) + 2 + 1


def test_init_rules():
    a, b = init_model(3, 5, [4, 2], seed=9), init_model(3, 5, [4, 2], seed=9)
    assert all(np.array_equal(a.params[k], b.params[k]) for k in a.params)
    assert not a.params["wide"].any() and float(a.params["bias"]) == 0.0
    assert np.abs(a.params["W0"]).max() <= 1 / np.sqrt(5)
    assert np.abs(a.params["W1"]).max() <= 1 / np.sqrt(4)
    c = init_model(3, 5, [4, 2], seed=10)
    assert not np.array_equal(a.params["W0"], c.params["W0"])
    with pytest.raises(ConfigError):
        init_model(3, 5, [])


@pytest.mark.parametrize("seed", range(5))
def test_gradient_check(seed):
    rng = np.random.default_rng(seed)
    model = init_model(3, 4, [4, 2], seed=seed)
    assert gradient_check(model, rng.normal(size=3), rng.normal(size=4), rng.normal()) < 1e-4


def test_gradient_check_after_training():
    data = _data(2)
    model = train(fit_standardization(init_model(3, 2, [4, 2], seed=2), data), data, 100, 0.05)
    assert gradient_check(model, data.wide[0], data.deep[0], data.target[0]) < 1e-4


def test_planted_linear_model_generalizes():
    rng = np.random.default_rng(0)
    w, d = rng.normal(size=(80, 3)), rng.normal(size=(80, 2))
    data = FeatureDataset(w, d, w @ np.array([1.0, -2.0, 0.5]) + 0.3)
    train_set, test_set = data.subset(range(60)), data.subset(range(60, 80))
    model = fit_standardization(init_model(3, 2, [4, 2], seed=0), train_set)
    model = train(model, train_set, 2000, 0.1)
    assert mse(model, test_set) < 1e-4


def test_zero_epochs_is_identity():
    data = _data(3)
    model = init_model(3, 2, [4, 2], seed=3)
    out = train(model, data, 0, 0.1)
    assert all(np.array_equal(out.params[k], model.params[k]) for k in model.params)
    assert out.loss_history == []


def test_training_is_bit_identical():
    data = _data(4)
    model = fit_standardization(init_model(3, 2, [4, 2], seed=4), data)
    a, b = train(model, data, 40, 0.05), train(model, data, 40, 0.05)
    assert all(a.params[k].tobytes() == b.params[k].tobytes() for k in a.params)
    assert a.loss_history == b.loss_history


def test_standardization_makes_affine_rescale_invisible():
    data = _data(5)
    scaled = FeatureDataset(data.wide * 3.0 - 7.0, data.deep * 0.5 + 2.0, data.target)
    base = init_model(3, 2, [4, 2], seed=5)
    a = fit_standardization(base, data)
    b = fit_standardization(base, scaled)
    pa, pb = predict(a, data.wide, data.deep), predict(b, scaled.wide, scaled.deep)
    assert np.allclose(pa, pb, atol=1e-12)


def test_constant_column_standardizes_to_zero():
    data = _data(6)
    wide = data.wide.copy()
    wide[:, 1] = 4.0
    model = fit_standardization(init_model(3, 2, [2], seed=0), FeatureDataset(wide, data.deep,
                                                                           data.target))
    assert model.wide_std[1] == 1.0 and model.wide_mean[1] == 4.0


def test_small_step_wide_only_loss_nonincreasing():
    rng = np.random.default_rng(7)
    w = rng.normal(size=(30, 2))
    data = FeatureDataset(w, np.zeros((30, 1)), w @ np.array([0.5, -1.0]))
    model = init_model(2, 1, [1], seed=0)
    model.params["head"][...] = 0.0
    out = train(model, data, 50, 0.01)
    hist = out.loss_history
    assert all(b <= a + 1e-15 for a, b in zip(hist, hist[1:]))


def test_divergence_raises():
    data = _data(8)
    with np.errstate(all="ignore"):
        with pytest.raises(TrainingError):
            train(init_model(3, 2, [4], seed=0), data, 50, 1e200)


def test_input_validation():
    model = init_model(3, 2, [4])
    with pytest.raises(ShapeError):
        predict(model, np.ones((1, 2)), np.ones((1, 2)))
    with pytest.raises(ValidationError):
        predict(model, np.array([[1.0, np.nan, 0.0]]), np.ones((1, 2)))
    with pytest.raises(ValidationError):
        FeatureDataset(np.ones((2, 1)), np.ones((2, 1)), [1.0, np.inf])
    with pytest.raises(ConfigError):
        train(model, _data(), 5, 0.0)


def test_loss_matches_mse():
    data = _data(9)
    model = init_model(3, 2, [4, 2], seed=9)
    loss, _ = loss_and_grad(model, data.wide, data.deep, data.target)
    assert loss == pytest.approx(mse(model, data), rel=1e-14)


def test_dataset_csv(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("wide:pop,deep:ndvi,deep:lst,target\n1,0.2,30,5\n2,0.4,31,6\n")
    data = load_dataset(path)
    assert data.wide_names == ("pop",) and data.deep_names == ("ndvi", "lst")
    assert np.array_equal(data.deep, [[0.2, 30.0], [0.4, 31.0]])
    path.write_text("wide:pop,other,target\n1,2,3\n")
    with pytest.raises(ValidationError):
        load_dataset(path)


def test_model_round_trip(tmp_path):
    data = _data(10)
    model = train(fit_standardization(init_model(3, 2, [4, 2], seed=1), data), data, 10, 0.05)
    save_model(model, tmp_path / "m.json", data.wide_names, data.deep_names)
    raw = json.loads((tmp_path / "m.json").read_text())
    assert raw["model_kind"] == "wide_deep" and raw["format_version"] == 1
    back = load_model(tmp_path / "m.json")
    assert np.array_equal(predict(back, data.wide, data.deep), predict(model, data.wide, data.deep))
