"""Synthetic wake of a wall-mounted obstacle, plus wall-pressure sensors.

The surrogate is a uniform inflow past a rectangular obstacle sitting on the
bottom wall, with a train of counter-rotating Gaussian vortices released at
the obstacle's lee edge. Vortex ``j`` is born at ``t_j = j * period - spinup``,
advects downstream at ``advection_speed`` and decays as
``exp(-(t - t_j) / decay_time)``. A positive ``spinup`` releases vortices
before the first snapshot so the window sees a developed wake. Each vortex contributes

    u' = -s A (y - yc) / sigma * exp(-r^2 / 2 sigma^2)
    v' =  s A (x - xc) / sigma * exp(-r^2 / 2 sigma^2)
    p' = -A exp(-r^2 / 2 sigma^2)

with ``s = +-1`` alternating between consecutive vortices. Grid cell
``(ix, iy)`` sits at coordinates ``(ix, iy)``; ``iy = 0`` is the wall row.
Obstacle cells hold zeros and are masked out of every norm.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError, ValidationError

FIELDS = ("u", "v", "p")


@dataclass(frozen=True)
class WakeConfig:
    nx: int = 64
    ny: int = 32
    snapshots: int = 64
    vortices: int = 16
    advection_speed: float = 1.0
    seed: int = 0
    dt: float = 1.0
    obstacle: tuple = (12, 0, 18, 8)  # x0, y0, x1, y1 (end-exclusive cells)
    inflow: float = 1.0
    amplitude: float = 1.0
    core_radius: float = 3.5
    decay_time: float = 40.0
    period: float | None = 8.0  # None: snapshots * dt / vortices
    spinup: float = 64.0  # first vortex is born at t = -spinup
    wall_sensors: int = 12
    face_sensors: int = 4

    def __post_init__(self):
        if self.nx < 16 or self.ny < 16:
            raise ConfigError(f"grid must be at least 16x16, got {self.nx}x{self.ny}")
        if self.snapshots < 8:
            raise ConfigError(f"snapshots must be >= 8, got {self.snapshots}")
        if self.vortices < 0:
            raise ConfigError(f"vortices must be >= 0, got {self.vortices}")
        if not self.dt > 0:
            raise ConfigError(f"dt must be > 0, got {self.dt}")
        for name in ("core_radius", "decay_time"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be > 0")
        if self.period is not None and not self.period > 0:
            raise ConfigError("period must be > 0")
        if not self.spinup >= 0:
            raise ConfigError("spinup must be >= 0")
        x0, y0, x1, y1 = self.obstacle
        if not (0 <= x0 < x1 <= self.nx and 0 <= y0 < y1 <= self.ny):
            raise ConfigError(f"obstacle {self.obstacle} exceeds the {self.nx}x{self.ny} grid")
        if y0 != 0:
            raise ConfigError("obstacle must be wall-mounted (y0 == 0)")
        if x1 >= self.nx:
            raise ConfigError("obstacle leaves no room for a wake")
        if self.wall_sensors < 0 or self.face_sensors < 0:
            raise ConfigError("sensor counts must be >= 0")
        if self.wall_sensors + self.face_sensors < 1:
            raise ConfigError("at least one sensor is required")
        if self.face_sensors > y1 - y0:
            raise ConfigError(f"at most {y1 - y0} face sensors fit on the obstacle")


@dataclass(frozen=True, eq=False)
class SnapshotMatrix:
    """Flow snapshots on a uniform 2-D grid.

    ``data`` maps each field name to an array of shape ``(snapshots, ny, nx)``.
    ``mask`` is True on fluid cells.
    """

    data: dict
    dt: float
    obstacle: tuple
    mask: np.ndarray = field(repr=False)

    def __post_init__(self):
        shapes = {v.shape for v in self.data.values()}
        if len(shapes) != 1:
            raise ValidationError(f"fields have mismatched shapes {shapes}")
        (shape,) = shapes
        if len(shape) != 3 or shape[0] < 2:
            raise ValidationError("need at least two snapshots of 2-D fields")
        if not self.dt > 0:
            raise ValidationError("dt must be positive")
        if self.mask.shape != shape[1:]:
            raise ValidationError("mask shape does not match the grid")
        for name, arr in self.data.items():
            if not np.isfinite(arr).all():
                raise ValidationError(f"field {name!r} has non-finite values")

    @property
    def count(self) -> int:
        return next(iter(self.data.values())).shape[0]

    @property
    def shape(self) -> tuple:
        return next(iter(self.data.values())).shape[1:]

    @property
    def field_names(self) -> list:
        return list(self.data)

    def vectors(self, fields=("u", "v")) -> np.ndarray:
        """Stack the chosen fields over fluid cells: ``(snapshots, n_dof)``."""
        for f in fields:
            if f not in self.data:
                raise ValidationError(f"unknown field {f!r}")
        return np.concatenate([self.data[f][:, self.mask] for f in fields], axis=1)

    def subset(self, indices) -> "SnapshotMatrix":
        indices = np.asarray(indices)
        return SnapshotMatrix(
            {k: v[indices] for k, v in self.data.items()}, self.dt, self.obstacle, self.mask
        )

    def __eq__(self, other):
        if not isinstance(other, SnapshotMatrix):
            return NotImplemented
        return (
            self.dt == other.dt
            and tuple(self.obstacle) == tuple(other.obstacle)
            and np.array_equal(self.mask, other.mask)
            and list(self.data) == list(other.data)
            and all(self.data[k].tobytes() == other.data[k].tobytes() for k in self.data)
        )

    __hash__ = None


@dataclass(frozen=True, eq=False)
class SensorTrace:
    """Wall-pressure series: ``locations`` (N_s, 2) as (ix, iy), ``pressure`` (snapshots, N_s)."""

    locations: np.ndarray
    pressure: np.ndarray

    def __post_init__(self):
        if self.locations.ndim != 2 or self.locations.shape[1] != 2:
            raise ValidationError("locations must have shape (N_s, 2)")
        if self.pressure.ndim != 2 or self.pressure.shape[1] != len(self.locations):
            raise ValidationError("pressure must have shape (snapshots, N_s)")

    @property
    def count(self) -> int:
        return len(self.locations)

    def subset(self, indices) -> "SensorTrace":
        return SensorTrace(self.locations, self.pressure[np.asarray(indices)])

    def __eq__(self, other):
        if not isinstance(other, SensorTrace):
            return NotImplemented
        return (
            np.array_equal(self.locations, other.locations)
            and self.pressure.tobytes() == other.pressure.tobytes()
        )

    __hash__ = None


def obstacle_mask(nx, ny, obstacle) -> np.ndarray:
    x0, y0, x1, y1 = obstacle
    mask = np.ones((ny, nx), dtype=bool)
    mask[y0:y1, x0:x1] = False
    return mask


def sensor_locations(config: WakeConfig) -> np.ndarray:
    """Evenly spaced bottom-wall cells plus cells on the obstacle's downstream face."""
    x0, _, x1, y1 = config.obstacle
    wall_cells = np.array([ix for ix in range(config.nx) if not x0 <= ix < x1])
    locs = []
    if config.wall_sensors:
        pick = np.linspace(0, len(wall_cells) - 1, config.wall_sensors).round().astype(int)
        locs += [(int(wall_cells[i]), 0) for i in np.unique(pick)]
    if config.face_sensors:
        rows = np.linspace(0, y1 - 1, config.face_sensors).round().astype(int)
        locs += [(x1, int(iy)) for iy in np.unique(rows)]
    return np.array(locs, dtype=np.int64).reshape(-1, 2)


def _vortex_train(config: WakeConfig):
    """Birth time, sign, height and strength of every vortex."""
    rng = np.random.Generator(np.random.PCG64(config.seed))
    period = config.period or config.snapshots * config.dt / max(config.vortices, 1)
    height = config.obstacle[3]
    offset = 0.3 * height
    train = []
    for j in range(config.vortices):
        sign = 1.0 if j % 2 == 0 else -1.0
        yc = height + sign * offset + rng.uniform(-0.5, 0.5)
        strength = config.amplitude * (1.0 + rng.uniform(-0.1, 0.1))
        train.append((j * period - config.spinup, sign, yc, strength))
    return train


def generate_synthetic_wake(config: WakeConfig = WakeConfig()):
    """Build the snapshot matrix and the matching sensor trace."""
    ny, nx = config.ny, config.nx
    mask = obstacle_mask(nx, ny, config.obstacle)
    yy, xx = np.mgrid[0:ny, 0:nx].astype(float)
    times = np.arange(config.snapshots) * config.dt
    u = np.full((config.snapshots, ny, nx), config.inflow)
    v = np.zeros((config.snapshots, ny, nx))
    p = np.zeros((config.snapshots, ny, nx))
    sigma = config.core_radius
    x_lee = float(config.obstacle[2])
    for birth, sign, yc, strength in _vortex_train(config):
        for k, t in enumerate(times):
            age = t - birth
            if age < 0:
                continue
            amp = strength * np.exp(-age / config.decay_time)
            xc = x_lee + config.advection_speed * age
            bump = amp * np.exp(-((xx - xc) ** 2 + (yy - yc) ** 2) / (2 * sigma**2))
            u[k] -= sign * (yy - yc) / sigma * bump
            v[k] += sign * (xx - xc) / sigma * bump
            p[k] -= bump
    for arr in (u, v, p):
        arr[:, ~mask] = 0.0
    snaps = SnapshotMatrix({"u": u, "v": v, "p": p}, config.dt, tuple(config.obstacle), mask)
    locs = sensor_locations(config)
    trace = SensorTrace(locs, p[:, locs[:, 1], locs[:, 0]].copy())
    return snaps, trace
