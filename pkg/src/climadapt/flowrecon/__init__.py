"""POD-based non-intrusive flow sensing on a synthetic urban wake."""

from .pod import (
    PODBasis,
    compute_pod,
    compute_sensor_pod,
    energy_fraction,
    pod_of_rows,
    reconstruct_field,
    truncation_floor,
)
from .recon import (
    ReconstructionModel,
    TruncationConfig,
    evaluate_reconstruction,
    predict,
    ridge_solve,
    train_reconstruction1,
    train_reconstruction2,
)
from .synth import SensorTrace, SnapshotMatrix, WakeConfig, generate_synthetic_wake


__all__ = [
    "PODBasis",
    "ReconstructionModel",
    "SensorTrace",
    "SnapshotMatrix",
    "TruncationConfig",
    "WakeConfig",
    "compute_pod",
    "compute_sensor_pod",
    "energy_fraction",
    "evaluate_reconstruction",
    "generate_synthetic_wake",
    "pod_of_rows",
    "predict",
    "reconstruct_field",
    "ridge_solve",
    "train_reconstruction1",
    "train_reconstruction2",
    "truncation_floor",
]
