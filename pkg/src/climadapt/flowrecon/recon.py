"""Sensor-based flow reconstruction.

Reconstruction 1 maps wall-pressure sensor readings, projected onto the
leading ``N_p`` wall-pressure POD modes, to the leading ``N_u`` velocity POD
coefficients, then rebuilds the field from the velocity basis.
Reconstruction 2 maps raw sensor readings straight to the velocity values on
one horizontal or vertical grid line, with no decomposition.

Both use ridge regression, ``(X^T X + lam I) W = X^T Y``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, EmptyDomainError, ShapeError, SolverError, ValidationError
from .pod import PODBasis, truncation_floor
from .synth import SensorTrace, SnapshotMatrix


@dataclass(frozen=True)
class TruncationConfig:
    """Retained velocity (``n_u``) and wall-pressure (``n_p``) mode counts."""

    n_u: int = 4
    n_p: int = 4

    def __post_init__(self):
        if self.n_u < 1 or self.n_p < 1:
            raise ConfigError(f"n_u and n_p must be >= 1, got {self.n_u}, {self.n_p}")

    def check(self, n_modes: int) -> None:
        if self.n_u > n_modes or self.n_p > n_modes:
            raise ConfigError(
                f"truncation (n_u={self.n_u}, n_p={self.n_p}) exceeds N={n_modes}"
            )


def ridge_solve(X, Y, lam: float) -> np.ndarray:
    """Solve the ridge normal equations through the SVD of ``X``.

    ``W = V diag(s / (s^2 + lam)) U^T Y``, identical to the normal-equation
    solution but without squaring the condition number.

    Raises
    ------
    SolverError
        If ``lam == 0`` and ``X`` does not have full column rank.
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if lam < 0:
        raise ConfigError(f"ridge strength must be >= 0, got {lam}")
    if X.ndim != 2 or Y.shape[0] != X.shape[0]:
        raise ShapeError(f"X {X.shape} and Y {Y.shape} disagree on sample count")
    U, s, Vt = np.linalg.svd(X, full_matrices=False)
    if lam == 0:
        tol = (s[0] if s.size else 0.0) * max(X.shape) * np.finfo(float).eps
        if s.size < X.shape[1] or s.size == 0 or s[-1] <= tol:
            raise SolverError(
                "normal equations are singular at ridge strength 0; use a positive value"
            )
        gain = 1.0 / s
    else:
        gain = s / (s * s + lam)
    return Vt.T @ (gain[:, None] * (U.T @ Y))


@dataclass(frozen=True, eq=False)
class ReconstructionModel:
    """Trained sensor-to-flow linear map.

    For ``variant == "R1"``: ``pressure_basis`` (sensor-space POD),
    ``velocity_basis``, ``n_p``/``n_u`` and ``weights`` (n_p, n_u).
    For ``"R2"``: ``plane`` as ``(orientation, index)``, ``plane_cells`` (the
    flat fluid-cell indices on the line), input/output means and ``weights``
    (N_s, n_targets).
    """

    variant: str
    weights: np.ndarray
    ridge: float
    n_sensors: int
    pressure_basis: PODBasis | None = None
    velocity_basis: PODBasis | None = None
    n_p: int = 0
    n_u: int = 0
    plane: tuple = ()
    plane_cells: np.ndarray | None = None
    fields: tuple = ("u", "v")
    x_mean: np.ndarray | None = None
    y_mean: np.ndarray | None = None
    train_indices: tuple = ()


def r1_inputs(pressure_basis: PODBasis, pressure, n_p: int) -> np.ndarray:
    return pressure_basis.project(pressure, n_p)


def train_reconstruction1(
    velocity_basis: PODBasis,
    pressure_basis: PODBasis,
    sensors: SensorTrace,
    n_u: int,
    n_p: int,
    ridge: float,
) -> ReconstructionModel:
    """Fit the sensor-coefficient to velocity-coefficient map.

    Both bases must come from the same snapshots; the training rows are the
    sensor readings at ``velocity_basis.train_indices``.
    """
    if velocity_basis.train_indices != pressure_basis.train_indices:
        raise ValidationError("velocity and pressure bases were built from different snapshots")
    if not 1 <= n_u <= velocity_basis.retained:
        raise ConfigError(f"n_u={n_u} must lie in [1, {velocity_basis.retained}]")
    if not 1 <= n_p <= pressure_basis.retained:
        raise ConfigError(f"n_p={n_p} must lie in [1, {pressure_basis.retained}]")
    if n_p > min(len(pressure_basis.eigenvalues), sensors.count):
        warnings.warn(f"n_p={n_p} exceeds min(N, N_s); the fit is under-determined")
    idx = np.asarray(velocity_basis.train_indices, dtype=int)
    X = r1_inputs(pressure_basis, sensors.pressure[idx], n_p)
    Y = velocity_basis.coefficients[:, :n_u]
    W = ridge_solve(X, Y, ridge)
    return ReconstructionModel(
        "R1", W, ridge, sensors.count, pressure_basis, velocity_basis, n_p, n_u,
        train_indices=tuple(idx.tolist()),
    )


def plane_cells(mask: np.ndarray, plane) -> np.ndarray:
    """Flat fluid-cell indices (in ``mask`` order) lying on ``plane``."""
    orientation, index = plane
    ny, nx = mask.shape
    on_plane = np.zeros_like(mask)
    if orientation == "horizontal":
        if not 0 <= index < ny:
            raise ConfigError(f"horizontal plane {index} outside [0, {ny})")
        on_plane[index, :] = True
    elif orientation == "vertical":
        if not 0 <= index < nx:
            raise ConfigError(f"vertical plane {index} outside [0, {nx})")
        on_plane[:, index] = True
    else:
        raise ConfigError(f"plane orientation must be horizontal or vertical, got {orientation!r}")
    cells = np.flatnonzero(on_plane[mask])
    if cells.size == 0:
        raise EmptyDomainError(f"plane {orientation} {index} lies entirely inside the obstacle")
    return cells


def _plane_values(snapshots: SnapshotMatrix, cells, fields) -> np.ndarray:
    n_cells = int(snapshots.mask.sum())
    cols = np.concatenate([cells + j * n_cells for j in range(len(fields))])
    return snapshots.vectors(fields)[:, cols]


def train_reconstruction2(
    snapshots: SnapshotMatrix,
    plane,
    sensors: SensorTrace,
    ridge: float,
    fields=("u", "v"),
    indices=None,
) -> ReconstructionModel:
    """Fit raw sensor readings to the field values on one grid line.

    Inputs and targets are centred on their training means, so the intercept
    is not penalized.
    """
    cells = plane_cells(snapshots.mask, plane)
    if indices is None:
        indices = np.arange(snapshots.count)
    idx = np.asarray(indices, dtype=int)
    X = sensors.pressure[idx]
    Y = _plane_values(snapshots, cells, fields)[idx]
    x_mean, y_mean = X.mean(axis=0), Y.mean(axis=0)
    W = ridge_solve(X - x_mean, Y - y_mean, ridge)
    return ReconstructionModel(
        "R2", W, ridge, sensors.count, plane=tuple(plane), plane_cells=cells,
        fields=tuple(fields), x_mean=x_mean, y_mean=y_mean, train_indices=tuple(idx.tolist()),
    )


def predict(model: ReconstructionModel, pressure) -> np.ndarray:
    """Predicted full field vectors (R1) or plane vectors (R2), one row per reading."""
    pressure = np.atleast_2d(np.asarray(pressure, dtype=float))
    if pressure.shape[1] != model.n_sensors:
        raise ShapeError(f"expected {model.n_sensors} sensors, got {pressure.shape[1]}")
    if model.variant == "R1":
        coef = r1_inputs(model.pressure_basis, pressure, model.n_p) @ model.weights
        basis = model.velocity_basis
        return basis.mean + coef @ basis.modes[:, : model.n_u].T
    return model.y_mean + (pressure - model.x_mean) @ model.weights


def _relative_errors(pred, truth, reference):
    num = np.linalg.norm(pred - truth, axis=1)
    den = np.linalg.norm(truth - reference, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.where(den > 0, num / den, np.where(num > 0, np.inf, 0.0))
    return rel


def evaluate_reconstruction(
    model: ReconstructionModel,
    snapshots: SnapshotMatrix,
    sensors: SensorTrace,
    disjoint: bool = True,
) -> dict:
    """Relative L2 field errors on a test set.

    Errors are normalized by the fluctuation norm about the training mean, so
    a model that always predicts the mean scores 1.0. ``disjoint`` records
    whether the caller guarantees the test set was unseen in training.
    """
    if sensors.pressure.shape[0] != snapshots.count:
        raise ShapeError("sensor trace and snapshots have different lengths")
    if sensors.count != model.n_sensors:
        raise ShapeError(f"expected {model.n_sensors} sensors, got {sensors.count}")
    pred = predict(model, sensors.pressure)
    report = {"variant": model.variant, "ridge": model.ridge, "test_disjoint": bool(disjoint)}
    if model.variant == "R1":
        basis = model.velocity_basis
        truth = snapshots.vectors(basis.fields)
        if truth.shape[1] != basis.n_dof:
            raise ShapeError("snapshot layout does not match the velocity basis")
        rel = _relative_errors(pred, truth, basis.mean)
        true_coef = basis.project(truth, model.n_u)
        pred_coef = r1_inputs(model.pressure_basis, sensors.pressure, model.n_p) @ model.weights
        scale = np.sqrt(basis.eigenvalues[: model.n_u])
        rmse = np.sqrt(np.mean((pred_coef - true_coef) ** 2, axis=0))
        with np.errstate(divide="ignore", invalid="ignore"):
            coef_nrmse = np.where(scale > 0, rmse / scale, 0.0)
        report.update(
            n_u=model.n_u,
            n_p=model.n_p,
            truncation_floor=truncation_floor(basis, model.n_u),
            coefficient_nrmse=[float(v) for v in coef_nrmse],
        )
    else:
        truth = _plane_values(snapshots, model.plane_cells, model.fields)
        if truth.shape[1] != model.weights.shape[1]:
            raise ShapeError("snapshot layout does not match the plane model")
        rel = _relative_errors(pred, truth, model.y_mean)
        report.update(plane=list(model.plane))
    report["per_snapshot_error"] = [float(v) for v in rel]
    report["mean_error"] = float(np.mean(rel))
    return report
