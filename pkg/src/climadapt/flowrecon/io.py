"""On-disk formats for snapshots, sensor traces, POD bases and models.

* snapshots: a directory holding ``manifest.json`` plus one CARB1 raster per
  snapshot (bands ``u``, ``v``, ``p``; top grid row first);
* sensor trace: CSV ``snapshot,sensor_id,x,y,p``;
* POD basis: a directory with ``basis.json`` and ``.npy`` arrays;
* reconstruction model and evaluation report: JSON.
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path

import numpy as np

from ..errors import ValidationError
from ..raster import Raster, load_raster, save_raster
from .pod import PODBasis
from .recon import ReconstructionModel
from .synth import SensorTrace, SnapshotMatrix, obstacle_mask

SNAPSHOT_FORMAT = "climadapt-snapshots"
BASIS_FORMAT = "climadapt-pod-basis"
MODEL_FORMAT = "climadapt-reconstruction"
VERSION = 1


def _dump_json(data, path: Path) -> None:
    path.write_text(json.dumps(data, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def save_snapshots(snapshots: SnapshotMatrix, directory) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    ny, nx = snapshots.shape
    names = []
    for k in range(snapshots.count):
        name = f"snap_{k:05d}.carb"
        bands = tuple((f, snapshots.data[f][k][::-1]) for f in snapshots.field_names)
        save_raster(Raster(bands, cell_size=1.0, origin=(0.0, float(ny))), directory / name)
        names.append(name)
    _dump_json(
        {
            "format": SNAPSHOT_FORMAT,
            "version": VERSION,
            "nx": nx,
            "ny": ny,
            "dt": snapshots.dt,
            "obstacle": list(snapshots.obstacle),
            "fields": snapshots.field_names,
            "snapshots": names,
        },
        directory / "manifest.json",
    )


def load_snapshots(directory) -> SnapshotMatrix:
    directory = Path(directory)
    meta = json.loads((directory / "manifest.json").read_text(encoding="utf-8"))
    if meta.get("format") != SNAPSHOT_FORMAT or meta.get("version") != VERSION:
        raise ValidationError(f"{directory}: not a version-{VERSION} snapshot directory")
    fields = meta["fields"]
    stacks = {f: [] for f in fields}
    for name in meta["snapshots"]:
        raster = load_raster(directory / name)
        if raster.band_names != fields:
            raise ValidationError(f"{name}: bands {raster.band_names} != {fields}")
        for f in fields:
            stacks[f].append(raster.band(f)[::-1])
    data = {f: np.array(v) for f, v in stacks.items()}
    mask = obstacle_mask(meta["nx"], meta["ny"], meta["obstacle"])
    return SnapshotMatrix(data, float(meta["dt"]), tuple(meta["obstacle"]), mask)


def trace_to_csv(trace: SensorTrace) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["snapshot", "sensor_id", "x", "y", "p"])
    for k, row in enumerate(trace.pressure):
        for s, (x, y) in enumerate(trace.locations):
            writer.writerow([k, s, int(x), int(y), repr(float(row[s]))])
    return buf.getvalue()


def save_trace(trace: SensorTrace, path) -> None:
    Path(path).write_text(trace_to_csv(trace), encoding="utf-8", newline="")


def load_trace(path) -> SensorTrace:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["snapshot", "sensor_id", "x", "y", "p"]:
            raise ValidationError(f"{path}: unexpected sensor CSV header {reader.fieldnames}")
        rows = [(int(r["snapshot"]), int(r["sensor_id"]), int(r["x"]), int(r["y"]), float(r["p"]))
                for r in reader]
    if not rows:
        raise ValidationError(f"{path}: empty sensor trace")
    n_snap = max(r[0] for r in rows) + 1
    n_sens = max(r[1] for r in rows) + 1
    if len(rows) != n_snap * n_sens:
        raise ValidationError(f"{path}: expected {n_snap * n_sens} rows, got {len(rows)}")
    pressure = np.empty((n_snap, n_sens))
    locations = np.empty((n_sens, 2), dtype=np.int64)
    for k, s, x, y, p in rows:
        pressure[k, s] = p
        locations[s] = (x, y)
    return SensorTrace(locations, pressure)


def save_basis(basis: PODBasis, directory) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    np.save(directory / "mean.npy", basis.mean)
    np.save(directory / "modes.npy", basis.modes)
    np.save(directory / "coefficients.npy", basis.coefficients)
    if basis.mask is not None:
        np.save(directory / "mask.npy", basis.mask)
    _dump_json(
        {
            "format": BASIS_FORMAT,
            "version": VERSION,
            "fields": list(basis.fields),
            "retained": basis.retained,
            "eigenvalues": [float(v) for v in basis.eigenvalues],
            "train_indices": list(basis.train_indices),
            "has_mask": basis.mask is not None,
        },
        directory / "basis.json",
    )


def load_basis(directory) -> PODBasis:
    directory = Path(directory)
    meta = json.loads((directory / "basis.json").read_text(encoding="utf-8"))
    if meta.get("format") != BASIS_FORMAT or meta.get("version") != VERSION:
        raise ValidationError(f"{directory}: not a version-{VERSION} POD basis")
    mask = np.load(directory / "mask.npy") if meta["has_mask"] else None
    return PODBasis(
        np.load(directory / "mean.npy"),
        np.load(directory / "modes.npy"),
        np.array(meta["eigenvalues"], dtype=float),
        np.load(directory / "coefficients.npy"),
        tuple(meta["fields"]),
        mask,
        tuple(meta["train_indices"]),
    )


def model_to_dict(model: ReconstructionModel) -> dict:
    data = {
        "format": MODEL_FORMAT,
        "version": VERSION,
        "variant": model.variant,
        "ridge": model.ridge,
        "n_sensors": model.n_sensors,
        "weights": model.weights.tolist(),
        "train_indices": list(model.train_indices),
    }
    if model.variant == "R1":
        pb = model.pressure_basis
        data.update(
            n_u=model.n_u,
            n_p=model.n_p,
            pressure_basis={
                "mean": pb.mean.tolist(),
                "modes": pb.modes.tolist(),
                "eigenvalues": pb.eigenvalues.tolist(),
                "train_indices": list(pb.train_indices),
            },
        )
    else:
        data.update(
            plane=list(model.plane),
            plane_cells=model.plane_cells.tolist(),
            fields=list(model.fields),
            x_mean=model.x_mean.tolist(),
            y_mean=model.y_mean.tolist(),
        )
    return data


def model_from_dict(data: dict, velocity_basis: PODBasis | None = None) -> ReconstructionModel:
    if data.get("format") != MODEL_FORMAT or data.get("version") != VERSION:
        raise ValidationError("not a version-1 reconstruction model")
    weights = np.array(data["weights"], dtype=float)
    common = dict(
        weights=weights,
        ridge=data["ridge"],
        n_sensors=data["n_sensors"],
        train_indices=tuple(data["train_indices"]),
    )
    if data["variant"] == "R1":
        if velocity_basis is None:
            raise ValidationError("an R1 model needs its velocity basis to be loaded")
        pb = data["pressure_basis"]
        modes = np.array(pb["modes"], dtype=float).reshape(data["n_sensors"], -1)
        pressure_basis = PODBasis(
            np.array(pb["mean"]), modes, np.array(pb["eigenvalues"]),
            np.zeros((0, modes.shape[1])), ("p_wall",), None, tuple(pb["train_indices"]),
        )
        return ReconstructionModel(
            "R1", pressure_basis=pressure_basis, velocity_basis=velocity_basis,
            n_p=data["n_p"], n_u=data["n_u"], **common,
        )
    return ReconstructionModel(
        "R2", plane=tuple(data["plane"]), plane_cells=np.array(data["plane_cells"], dtype=int),
        fields=tuple(data["fields"]), x_mean=np.array(data["x_mean"]),
        y_mean=np.array(data["y_mean"]), **common,
    )


def save_model(model: ReconstructionModel, path) -> None:
    _dump_json(model_to_dict(model), Path(path))


def load_model(path, velocity_basis: PODBasis | None = None) -> ReconstructionModel:
    return model_from_dict(json.loads(Path(path).read_text(encoding="utf-8")), velocity_basis)


def save_report(report: dict, path) -> None:
    _dump_json(report, Path(path))
