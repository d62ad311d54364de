"""Indicator forecasting: polynomial trend regression and a NumPy LSTM.

The LSTM is a single-layer, univariate, one-step-ahead model trained with
full-batch gradient descent, backpropagation through time and global-norm
gradient clipping. Everything is deterministic given the seed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, FitError, RangeError, TrainingError, ValidationError

FORMAT_VERSION = 1
GATES = ("i", "f", "o", "c")


# -- polynomial trend ---------------------------------------------------------


@dataclass(frozen=True)
class PolyModel:
    """Polynomial in normalized time ``(t - t_mean) / t_scale``.

    ``coefficients[k]`` multiplies the k-th power.
    """

    coefficients: tuple
    t_mean: float
    t_scale: float

    def __post_init__(self):
        object.__setattr__(self, "coefficients", tuple(float(c) for c in self.coefficients))
        if not self.coefficients:
            raise ValidationError("polynomial needs at least one coefficient")
        if not self.t_scale > 0:
            raise ValidationError(f"t_scale must be positive, got {self.t_scale}")

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1


def fit_poly(t, y, degree: int) -> PolyModel:
    """Least-squares polynomial of ``degree`` through ``(t, y)``.

    Time is normalized by its mean and ``max(1, std(t))`` (population
    standard deviation) before building the Vandermonde matrix.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if degree < 0:
        raise ConfigError(f"degree must be >= 0, got {degree}")
    if t.shape != y.shape or t.ndim != 1:
        raise ValidationError("t and y must be 1-D arrays of equal length")
    if not (np.isfinite(t).all() and np.isfinite(y).all()):
        raise ValidationError("t and y must be finite")
    if len(np.unique(t)) != len(t):
        raise FitError("timestamps must be distinct")
    if len(t) < degree + 1:
        raise FitError(f"degree {degree} needs at least {degree + 1} points, got {len(t)}")
    t_mean = float(t.mean())
    t_scale = max(1.0, float(t.std()))
    x = (t - t_mean) / t_scale
    vander = np.vander(x, degree + 1, increasing=True)
    coef, _, rank, _ = np.linalg.lstsq(vander, y, rcond=None)
    if rank < degree + 1:
        raise FitError(f"degree {degree} fit is rank deficient (rank {rank})")
    return PolyModel(tuple(coef), t_mean, t_scale)


def predict_poly(model: PolyModel, t):
    """Horner evaluation at ``t`` (scalar or array)."""
    x = (np.asarray(t, dtype=float) - model.t_mean) / model.t_scale
    acc = np.zeros_like(x)
    for c in reversed(model.coefficients):
        acc = acc * x + c
    return float(acc) if acc.ndim == 0 else acc


def poly_residual(model: PolyModel, t, y) -> float:
    """Sum of squared residuals on ``(t, y)``."""
    r = predict_poly(model, np.asarray(t, dtype=float)) - np.asarray(y, dtype=float)
    return float(r @ r)


# -- LSTM -------------------------------------------------------------------


@dataclass(frozen=True)
class TrainConfig:
    window: int = 6
    epochs: int = 300
    learning_rate: float = 0.1
    seed: int = 0
    clip_norm: float = 5.0
    hidden: int = 8

    def __post_init__(self):
        if self.window < 1:
            raise ConfigError(f"window must be >= 1, got {self.window}")
        if self.epochs < 0:
            raise ConfigError(f"epochs must be >= 0, got {self.epochs}")
        if not self.learning_rate > 0:
            raise ConfigError(f"learning_rate must be > 0, got {self.learning_rate}")
        if not self.clip_norm > 0:
            raise ConfigError(f"clip_norm must be > 0, got {self.clip_norm}")
        if self.hidden < 1:
            raise ConfigError(f"hidden must be >= 1, got {self.hidden}")


@dataclass
class LSTMModel:
    """Single-layer LSTM with a linear read-out.

    ``params`` holds ``W_<g>`` (H,), ``U_<g>`` (H, H), ``b_<g>`` (H,) for
    gates ``i, f, o, c`` plus ``w_out`` (H,) and ``b_out`` (scalar array).
    ``mean`` and ``scale`` normalize the series; forecasts are returned in
    original units.
    """

    params: dict
    window: int
    mean: float = 0.0
    scale: float = 1.0
    loss_history: list = field(default_factory=list)

    @property
    def hidden(self) -> int:
        return self.params["w_out"].shape[0]

    def copy(self) -> "LSTMModel":
        return LSTMModel(
            {k: np.array(v, dtype=float) for k, v in self.params.items()},
            self.window,
            self.mean,
            self.scale,
            list(self.loss_history),
        )


def init_lstm(hidden: int, window: int, seed: int = 0) -> LSTMModel:
    """Uniform(-1/sqrt(H), 1/sqrt(H)) init from a PCG64 generator; forget bias 1."""
    if hidden < 1:
        raise ConfigError(f"hidden must be >= 1, got {hidden}")
    rng = np.random.Generator(np.random.PCG64(seed))
    bound = 1.0 / math.sqrt(hidden)
    params = {}
    for g in GATES:
        params[f"W_{g}"] = rng.uniform(-bound, bound, hidden)
        params[f"U_{g}"] = rng.uniform(-bound, bound, (hidden, hidden))
        params[f"b_{g}"] = rng.uniform(-bound, bound, hidden)
    params["b_f"][:] = 1.0
    params["w_out"] = rng.uniform(-bound, bound, hidden)
    params["b_out"] = np.array(rng.uniform(-bound, bound))
    return LSTMModel(params, window)


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def lstm_states(params: dict, windows: np.ndarray):
    """Run the cell over ``windows`` (B, T) from zero state.

    Returns the per-step cache and the final predictions (B,).
    """
    B, T = windows.shape
    H = params["w_out"].shape[0]
    h = np.zeros((B, H))
    c = np.zeros((B, H))
    cache = []
    for t in range(T):
        x = windows[:, t : t + 1]
        z = {g: x * params[f"W_{g}"] + h @ params[f"U_{g}"].T + params[f"b_{g}"] for g in GATES}
        i, f, o = _sigmoid(z["i"]), _sigmoid(z["f"]), _sigmoid(z["o"])
        g = np.tanh(z["c"])
        c_new = f * c + i * g
        tc = np.tanh(c_new)
        h_new = o * tc
        cache.append((x, h, c, i, f, o, g, tc))
        h, c = h_new, c_new
    pred = h @ params["w_out"] + params["b_out"]
    return cache, h, pred


def lstm_loss_and_grad(params: dict, windows: np.ndarray, targets: np.ndarray):
    """Mean squared one-step error and its BPTT gradient."""
    cache, h_last, pred = lstm_states(params, windows)
    B = windows.shape[0]
    err = pred - targets
    loss = float(err @ err) / B
    dpred = 2.0 * err / B
    grads = {k: np.zeros_like(v) for k, v in params.items()}
    grads["w_out"] = h_last.T @ dpred
    grads["b_out"] = np.array(dpred.sum())
    dh = dpred[:, None] * params["w_out"]
    dc = np.zeros_like(dh)
    for x, h_prev, c_prev, i, f, o, g, tc in reversed(cache):
        do = dh * tc
        dc = dc + dh * o * (1.0 - tc * tc)
        dz = {
            "i": dc * g * i * (1.0 - i),
            "f": dc * c_prev * f * (1.0 - f),
            "o": do * o * (1.0 - o),
            "c": dc * i * (1.0 - g * g),
        }
        dh = np.zeros_like(dh)
        for gate, d in dz.items():
            grads[f"W_{gate}"] += d.T @ x[:, 0]
            grads[f"U_{gate}"] += d.T @ h_prev
            grads[f"b_{gate}"] += d.sum(axis=0)
            dh += d @ params[f"U_{gate}"]
        dc = dc * f
    return loss, grads


def make_windows(z: np.ndarray, window: int):
    n = len(z) - window
    if n < 1:
        raise ValidationError(f"series of length {len(z)} is too short for window {window}")
    idx = np.arange(window)[None, :] + np.arange(n)[:, None]
    return z[idx], z[window:]


def _normalization(values: np.ndarray):
    mean = float(values.mean())
    std = float(values.std())
    return mean, (std if std > 0 else 1.0)


def train_lstm(values, config: TrainConfig = TrainConfig()) -> LSTMModel:
    """Fit an LSTM to the one-step-ahead windows of ``values``.

    Raises
    ------
    TrainingError
        If the loss becomes non-finite.
    """
    values = np.asarray(values, dtype=float)
    if values.ndim != 1 or not np.isfinite(values).all():
        raise ValidationError("series values must be a finite 1-D array")
    if len(values) <= config.window:
        raise ConfigError(
            f"window {config.window} must be shorter than the series ({len(values)})"
        )
    model = init_lstm(config.hidden, config.window, config.seed)
    model.mean, model.scale = _normalization(values)
    windows, targets = make_windows((values - model.mean) / model.scale, config.window)
    params = model.params
    for epoch in range(config.epochs):
        loss, grads = lstm_loss_and_grad(params, windows, targets)
        if not math.isfinite(loss):
            raise TrainingError("LSTM loss is not finite", epoch)
        model.loss_history.append(loss)
        norm = math.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
        step = config.learning_rate
        if norm > config.clip_norm:
            step *= config.clip_norm / norm
        for k in params:
            params[k] -= step * grads[k]
    return model


def predict_next(model: LSTMModel, recent) -> float:
    """One-step forecast from the last ``model.window`` values (original units)."""
    recent = np.asarray(recent, dtype=float)
    if len(recent) < model.window:
        raise ValidationError(f"need {model.window} recent values, got {len(recent)}")
    z = (recent[-model.window :] - model.mean) / model.scale
    _, _, pred = lstm_states(model.params, z[None, :])
    return float(pred[0]) * model.scale + model.mean


def cadence(times) -> float:
    """Median spacing of ``times``; 1 for a single observation."""
    times = np.asarray(times, dtype=float)
    if len(times) < 2:
        return 1.0
    return float(np.median(np.diff(times)))


def future_timestamps(times, horizon: int) -> np.ndarray:
    times = np.asarray(times, dtype=float)
    return times[-1] + cadence(times) * np.arange(1, horizon + 1)


def forecast(model, times, values, horizon: int) -> np.ndarray:
    """Forecast ``horizon`` future values.

    Polynomials are evaluated at future timestamps on the training cadence;
    the LSTM is rolled out, feeding back its own predictions.
    """
    if horizon < 1:
        raise RangeError(f"horizon must be >= 1, got {horizon}")
    if isinstance(model, PolyModel):
        return np.asarray(predict_poly(model, future_timestamps(times, horizon)), dtype=float)
    history = list(np.asarray(values, dtype=float)[-model.window :])
    out = []
    for _ in range(horizon):
        nxt = predict_next(model, history)
        out.append(nxt)
        history = history[1:] + [nxt]
    return np.array(out)


def _loss(params: dict, windows: np.ndarray, targets: np.ndarray) -> float:
    err = lstm_states(params, windows)[2] - targets
    return float(err @ err) / windows.shape[0]


def gradient_check(model: LSTMModel, window, step: float = 1e-3) -> float:
    """Largest relative gap between BPTT and finite-difference gradients.

    ``window`` holds ``model.window`` normalized inputs followed by the target.
    The reference uses the fourth-order central stencil, whose truncation and
    round-off errors stay far below the tolerance even for gradients near 1e-8.
    """
    window = np.asarray(window, dtype=float)
    inputs, target = window[None, :-1], window[-1:]
    params = {k: np.array(v, dtype=float) for k, v in model.params.items()}
    _, analytic = lstm_loss_and_grad(params, inputs, target)
    worst = 0.0
    for name, value in params.items():
        flat = value.reshape(-1)
        ga_flat = analytic[name].reshape(-1)
        for j in range(flat.size):
            orig = flat[j]
            probes = []
            for k in (2, 1, -1, -2):
                flat[j] = orig + k * step
                probes.append(_loss(params, inputs, target))
            flat[j] = orig
            gn = (-probes[0] + 8 * probes[1] - 8 * probes[2] + probes[3]) / (12 * step)
            ga = ga_flat[j]
            worst = max(worst, abs(ga - gn) / max(1e-8, abs(ga) + abs(gn)))
    return worst


# -- model comparison ---------------------------------------------------------


def nrmse(pred, truth) -> float:
    """RMSE normalized by the range of ``truth`` (by its RMS if constant)."""
    pred = np.asarray(pred, dtype=float)
    truth = np.asarray(truth, dtype=float)
    rmse = math.sqrt(float(np.mean((pred - truth) ** 2)))
    span = float(truth.max() - truth.min())
    if span == 0:
        span = math.sqrt(float(np.mean(truth**2))) or 1.0
    return rmse / span


def compare_families(
    times, values, degree: int, config: TrainConfig, holdout: int, noise_std=0.0
) -> dict:
    """Held-out error of the polynomial and LSTM families on one series.

    The last ``holdout`` points are withheld. Optional Gaussian noise (seeded
    from ``config.seed``) is added to the training part only.
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if not 1 <= holdout < len(values):
        raise RangeError(f"holdout must be in [1, {len(values) - 1}], got {holdout}")
    train_t, test_t = times[:-holdout], times[-holdout:]
    train_y, test_y = values[:-holdout].copy(), values[-holdout:]
    if noise_std > 0:
        rng = np.random.Generator(np.random.PCG64(config.seed))
        train_y = train_y + rng.normal(0.0, noise_std, len(train_y))
    poly = fit_poly(train_t, train_y, degree)
    poly_pred = predict_poly(poly, test_t)
    lstm = train_lstm(train_y, config)
    lstm_pred = forecast(lstm, train_t, train_y, holdout)
    return {
        "holdout": holdout,
        "noise_std": noise_std,
        "poly": {
            "degree": degree,
            "mse": float(np.mean((poly_pred - test_y) ** 2)),
            "nrmse": nrmse(poly_pred, test_y),
        },
        "lstm": {
            "hidden": config.hidden,
            "mse": float(np.mean((lstm_pred - test_y) ** 2)),
            "nrmse": nrmse(lstm_pred, test_y),
        },
    }


# -- persistence --------------------------------------------------------------


def model_to_dict(model) -> dict:
    if isinstance(model, PolyModel):
        return {
            "model_kind": "poly",
            "format_version": FORMAT_VERSION,
            "degree": model.degree,
            "coefficients": list(model.coefficients),
            "t_mean": model.t_mean,
            "t_scale": model.t_scale,
        }
    params = {k: np.asarray(v).tolist() for k, v in model.params.items()}
    return {
        "model_kind": "lstm",
        "format_version": FORMAT_VERSION,
        "hidden": model.hidden,
        "window": model.window,
        "mean": model.mean,
        "scale": model.scale,
        "params": params,
        "loss_history": list(model.loss_history),
    }


def model_from_dict(data: dict):
    if data.get("format_version") != FORMAT_VERSION:
        raise ValidationError(f"unsupported format_version {data.get('format_version')!r}")
    kind = data.get("model_kind")
    if kind == "poly":
        model = PolyModel(tuple(data["coefficients"]), data["t_mean"], data["t_scale"])
        if model.degree != data["degree"]:
            raise ValidationError("degree does not match coefficient count")
        return model
    if kind == "lstm":
        params = {k: np.array(v, dtype=float) for k, v in data["params"].items()}
        for k, v in params.items():
            if not np.isfinite(v).all():
                raise ValidationError(f"parameter {k} is not finite")
        return LSTMModel(params, int(data["window"]), data["mean"], data["scale"],
                         list(data.get("loss_history", [])))
    raise ValidationError(f"unknown model_kind {kind!r}")


def save_model(model, path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model), indent=1) + "\n", encoding="utf-8")


def load_model(path):
    return model_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
