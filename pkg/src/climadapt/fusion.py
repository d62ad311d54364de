"""Wide-and-deep regression of local climate targets.

The prediction is ``w_wide . x_wide + w_head . h_last + bias`` where
``x_wide`` are standardized global (wide) features passed through
unchanged and ``h_last`` is the last tanh layer of an MLP over standardized
local (deep) indicators. Training is full-batch gradient descent on MSE.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, ShapeError, TrainingError, ValidationError

FORMAT_VERSION = 1


@dataclass(frozen=True, eq=False)
class FeatureDataset:
    """Records with named wide features, deep features and a scalar target."""

    wide: np.ndarray
    deep: np.ndarray
    target: np.ndarray
    wide_names: tuple = ()
    deep_names: tuple = ()

    def __post_init__(self):
        wide = np.atleast_2d(np.asarray(self.wide, dtype=float))
        deep = np.atleast_2d(np.asarray(self.deep, dtype=float))
        target = np.asarray(self.target, dtype=float).reshape(-1)
        if not (len(wide) == len(deep) == len(target)):
            raise ShapeError("wide, deep and target disagree on record count")
        for name, arr in (("wide", wide), ("deep", deep), ("target", target)):
            if not np.isfinite(arr).all():
                raise ValidationError(f"{name} values must be finite")
        object.__setattr__(self, "wide", wide)
        object.__setattr__(self, "deep", deep)
        object.__setattr__(self, "target", target)
        if not self.wide_names:
            object.__setattr__(self, "wide_names", tuple(f"w{i}" for i in range(wide.shape[1])))
        if not self.deep_names:
            object.__setattr__(self, "deep_names", tuple(f"d{i}" for i in range(deep.shape[1])))

    def __len__(self):
        return len(self.target)

    def subset(self, indices) -> "FeatureDataset":
        idx = np.asarray(indices)
        return FeatureDataset(self.wide[idx], self.deep[idx], self.target[idx],
                              self.wide_names, self.deep_names)


def load_dataset(path) -> FeatureDataset:
    """Read a CSV whose header uses ``wide:<name>``, ``deep:<name>`` and ``target``."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValidationError(f"{path}: empty dataset")
    header = rows[0]
    wide_cols = [i for i, h in enumerate(header) if h.startswith("wide:")]
    deep_cols = [i for i, h in enumerate(header) if h.startswith("deep:")]
    target_cols = [i for i, h in enumerate(header) if h == "target"]
    unknown = [h for h in header if not (h.startswith(("wide:", "deep:")) or h == "target")]
    if unknown:
        raise ValidationError(f"{path}: unknown columns {unknown}")
    if len(target_cols) != 1 or not wide_cols or not deep_cols:
        raise ValidationError(f"{path}: need wide:, deep: and exactly one target column")
    body = rows[1:]
    if not body:
        raise ValidationError(f"{path}: dataset has no records")
    try:
        data = np.array([[float(v) for v in row] for row in body])
    except ValueError as exc:
        raise ValidationError(f"{path}: {exc}") from None
    return FeatureDataset(
        data[:, wide_cols],
        data[:, deep_cols],
        data[:, target_cols[0]],
        tuple(header[i][5:] for i in wide_cols),
        tuple(header[i][5:] for i in deep_cols),
    )


@dataclass
class WideDeepModel:
    """Parameters plus per-feature standardization.

    ``params`` keys: ``wide`` (n_wide,), ``W<k>`` (out, in) and ``b<k>`` for
    each deep layer, ``head`` (last layer size,) and ``bias`` (scalar array).
    """

    params: dict
    layers: tuple
    wide_mean: np.ndarray
    wide_std: np.ndarray
    deep_mean: np.ndarray
    deep_std: np.ndarray
    loss_history: list = field(default_factory=list)

    @property
    def wide_dim(self) -> int:
        return self.params["wide"].shape[0]

    @property
    def deep_dim(self) -> int:
        return self.params["W0"].shape[1]

    def parameter_count(self) -> int:
        return sum(int(np.size(v)) for v in self.params.values())

    def copy(self) -> "WideDeepModel":
        return WideDeepModel(
            {k: np.array(v, dtype=float) for k, v in self.params.items()},
            self.layers,
            self.wide_mean.copy(),
            self.wide_std.copy(),
            self.deep_mean.copy(),
            self.deep_std.copy(),
            list(self.loss_history),
        )


def init_model(wide_dim: int, deep_dim: int, layers, seed: int = 0) -> WideDeepModel:
    """Wide weights and bias zero; deep and head weights Uniform(+-1/sqrt(fan_in))."""
    layers = tuple(int(n) for n in layers)
    if not layers:
        raise ConfigError("deep path needs at least one layer")
    if wide_dim < 1 or deep_dim < 1 or min(layers) < 1:
        raise ConfigError("feature and layer dimensions must be >= 1")
    rng = np.random.Generator(np.random.PCG64(seed))
    params = {"wide": np.zeros(wide_dim)}
    fan_in = deep_dim
    for k, width in enumerate(layers):
        bound = 1.0 / math.sqrt(fan_in)
        params[f"W{k}"] = rng.uniform(-bound, bound, (width, fan_in))
        params[f"b{k}"] = rng.uniform(-bound, bound, width)
        fan_in = width
    params["head"] = rng.uniform(-1.0 / math.sqrt(fan_in), 1.0 / math.sqrt(fan_in), fan_in)
    params["bias"] = np.array(0.0)
    return WideDeepModel(
        params, layers, np.zeros(wide_dim), np.ones(wide_dim), np.zeros(deep_dim), np.ones(deep_dim)
    )


def fit_standardization(model: WideDeepModel, data: FeatureDataset) -> WideDeepModel:
    """Copy of ``model`` standardizing inputs by ``data``'s column mean and std."""
    _check_dims(model, data.wide, data.deep)
    out = model.copy()
    out.wide_mean, out.wide_std = _moments(data.wide)
    out.deep_mean, out.deep_std = _moments(data.deep)
    return out


def _moments(x):
    std = x.std(axis=0)
    return x.mean(axis=0), np.where(std > 0, std, 1.0)


def _check_dims(model, wide, deep):
    if wide.shape[1] != model.wide_dim:
        raise ShapeError(f"expected {model.wide_dim} wide features, got {wide.shape[1]}")
    if deep.shape[1] != model.deep_dim:
        raise ShapeError(f"expected {model.deep_dim} deep features, got {deep.shape[1]}")


def _forward_batch(model: WideDeepModel, wide, deep):
    xw = (wide - model.wide_mean) / model.wide_std
    h = (deep - model.deep_mean) / model.deep_std
    acts = [h]
    for k in range(len(model.layers)):
        h = np.tanh(h @ model.params[f"W{k}"].T + model.params[f"b{k}"])
        acts.append(h)
    out = xw @ model.params["wide"] + h @ model.params["head"] + model.params["bias"]
    return out, xw, acts


def predict(model: WideDeepModel, wide, deep) -> np.ndarray:
    wide = np.atleast_2d(np.asarray(wide, dtype=float))
    deep = np.atleast_2d(np.asarray(deep, dtype=float))
    _check_dims(model, wide, deep)
    if not (np.isfinite(wide).all() and np.isfinite(deep).all()):
        raise ValidationError("input features must be finite")
    return _forward_batch(model, wide, deep)[0]


def forward(model: WideDeepModel, wide, deep) -> float:
    """Prediction for a single record."""
    wide = np.asarray(wide, dtype=float).reshape(1, -1)
    deep = np.asarray(deep, dtype=float).reshape(1, -1)
    return float(predict(model, wide, deep)[0])


def loss_and_grad(model: WideDeepModel, wide, deep, target):
    """Mean squared error over the batch and its gradient for every parameter."""
    out, xw, acts = _forward_batch(model, wide, deep)
    n = len(target)
    err = out - target
    loss = float(err @ err) / n
    d_out = 2.0 * err / n
    grads = {"wide": xw.T @ d_out, "head": acts[-1].T @ d_out, "bias": np.array(d_out.sum())}
    delta = d_out[:, None] * model.params["head"]
    for k in reversed(range(len(model.layers))):
        h = acts[k + 1]
        dz = delta * (1.0 - h * h)
        grads[f"W{k}"] = dz.T @ acts[k]
        grads[f"b{k}"] = dz.sum(axis=0)
        delta = dz @ model.params[f"W{k}"]
    return loss, grads


def train(model: WideDeepModel, data: FeatureDataset, epochs: int, learning_rate: float,
          seed: int = 0) -> WideDeepModel:
    """Full-batch gradient descent; returns a trained copy with ``loss_history``.

    Full-batch descent is deterministic on its own; ``seed`` is accepted for
    interface symmetry with the other trainers and recorded nowhere else.
    """
    if epochs < 0:
        raise ConfigError(f"epochs must be >= 0, got {epochs}")
    if not learning_rate > 0:
        raise ConfigError(f"learning_rate must be > 0, got {learning_rate}")
    if len(data) < 1:
        raise ValidationError("training needs at least one record")
    _check_dims(model, data.wide, data.deep)
    out = model.copy()
    for epoch in range(epochs):
        loss, grads = loss_and_grad(out, data.wide, data.deep, data.target)
        if not math.isfinite(loss):
            raise TrainingError("wide-and-deep loss is not finite", epoch)
        out.loss_history.append(loss)
        for k in out.params:
            out.params[k] -= learning_rate * grads[k]
    return out


def mse(model: WideDeepModel, data: FeatureDataset) -> float:
    err = predict(model, data.wide, data.deep) - data.target
    return float(np.mean(err**2))


def gradient_check(model: WideDeepModel, wide, deep, target, step: float = 1e-3) -> float:
    """Largest relative gap between backprop and finite-difference gradients on one record.

    The reference uses the fourth-order central stencil.
    """
    wide = np.asarray(wide, dtype=float).reshape(1, -1)
    deep = np.asarray(deep, dtype=float).reshape(1, -1)
    target = np.asarray([target], dtype=float)
    probe = model.copy()
    _, analytic = loss_and_grad(probe, wide, deep, target)
    worst = 0.0
    for name, value in probe.params.items():
        flat = value.reshape(-1)
        ga_flat = analytic[name].reshape(-1)
        for j in range(flat.size):
            orig = flat[j]
            losses = []
            for k in (2, 1, -1, -2):
                flat[j] = orig + k * step
                err = _forward_batch(probe, wide, deep)[0] - target
                losses.append(float(err @ err))
            flat[j] = orig
            gn = (-losses[0] + 8 * losses[1] - 8 * losses[2] + losses[3]) / (12 * step)
            ga = ga_flat[j]
            worst = max(worst, abs(ga - gn) / max(1e-8, abs(ga) + abs(gn)))
    return worst


def model_to_dict(model: WideDeepModel, wide_names=(), deep_names=()) -> dict:
    return {
        "model_kind": "wide_deep",
        "format_version": FORMAT_VERSION,
        "layers": list(model.layers),
        "wide_names": list(wide_names),
        "deep_names": list(deep_names),
        "params": {k: np.asarray(v).tolist() for k, v in model.params.items()},
        "standardization": {
            "wide_mean": model.wide_mean.tolist(),
            "wide_std": model.wide_std.tolist(),
            "deep_mean": model.deep_mean.tolist(),
            "deep_std": model.deep_std.tolist(),
        },
        "loss_history": list(model.loss_history),
    }


def model_from_dict(data: dict) -> WideDeepModel:
    if data.get("model_kind") != "wide_deep" or data.get("format_version") != FORMAT_VERSION:
        raise ValidationError("not a version-1 wide_deep model")
    params = {k: np.array(v, dtype=float) for k, v in data["params"].items()}
    std = {k: np.array(v, dtype=float) for k, v in data["standardization"].items()}
    model = WideDeepModel(params, tuple(data["layers"]), std["wide_mean"], std["wide_std"],
                          std["deep_mean"], std["deep_std"], list(data.get("loss_history", [])))
    fan_in = model.deep_dim
    for k, width in enumerate(model.layers):
        if params[f"W{k}"].shape != (width, fan_in) or params[f"b{k}"].shape != (width,):
            raise ValidationError(f"layer {k} parameters do not chain")
        fan_in = width
    if params["head"].shape != (fan_in,):
        raise ValidationError("head size does not match the last layer")
    return model


def save_model(model: WideDeepModel, path, wide_names=(), deep_names=()) -> None:
    text = json.dumps(model_to_dict(model, wide_names, deep_names), indent=1)
    Path(path).write_text(text + "\n", encoding="utf-8")


def load_model(path) -> WideDeepModel:
    return model_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
