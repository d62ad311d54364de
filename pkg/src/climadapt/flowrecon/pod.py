"""Proper orthogonal decomposition by the method of snapshots.

For ``M = N + 1`` mean-subtracted snapshots ``u'_k`` the temporal correlation
matrix ``C_kl = <u'_k, u'_l> / M`` is diagonalized; mode ``i`` is the
snapshot combination ``sum_k V_ki u'_k`` scaled to unit norm, and its
temporal coefficients are the projections ``a_i(t_k) = <u'_k, phi_i>``.
With this scaling ``sum_k a_i(t_k) a_j(t_k) / M = lambda_i delta_ij``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import RangeError, ValidationError
from .synth import SensorTrace, SnapshotMatrix

# Modes whose energy falls below this fraction of the leading eigenvalue are
# indistinguishable from round-off and are not retained.
RETAIN_RTOL = 1e-10


@dataclass(frozen=True, eq=False)
class PODBasis:
    """Mean, orthonormal modes (columns), energies and temporal coefficients.

    ``eigenvalues`` lists all ``N`` energies (nonincreasing, nonnegative);
    ``modes`` and ``coefficients`` cover only the retained ones.
    ``fields`` and ``mask`` describe how a flat vector maps back to grid
    fields; ``mask`` is None for sensor-space bases.
    """

    mean: np.ndarray
    modes: np.ndarray
    eigenvalues: np.ndarray
    coefficients: np.ndarray
    fields: tuple = ()
    mask: np.ndarray | None = field(default=None, repr=False)
    train_indices: tuple = ()

    @property
    def retained(self) -> int:
        return self.modes.shape[1]

    @property
    def n_dof(self) -> int:
        return self.mean.shape[0]

    def project(self, vectors, k: int | None = None) -> np.ndarray:
        """Coefficients of ``vectors`` (rows) on the first ``k`` modes."""
        k = self.retained if k is None else k
        if k > self.retained:
            raise RangeError(f"k={k} exceeds the {self.retained} retained modes")
        vectors = np.atleast_2d(np.asarray(vectors, dtype=float))
        if vectors.shape[1] != self.n_dof:
            raise ValidationError(f"vectors have {vectors.shape[1]} entries, basis has {self.n_dof}")
        return (vectors - self.mean) @ self.modes[:, :k]

    def unflatten(self, vector) -> dict:
        """Map a flat field vector back to ``{field: (ny, nx) array}``; obstacle cells are NaN."""
        if self.mask is None:
            raise ValidationError("sensor-space basis has no grid layout")
        n_cells = int(self.mask.sum())
        out = {}
        for j, name in enumerate(self.fields):
            grid = np.full(self.mask.shape, np.nan)
            grid[self.mask] = vector[j * n_cells : (j + 1) * n_cells]
            out[name] = grid
        return out


def _fix_signs(modes: np.ndarray) -> np.ndarray:
    """Make the first significant component of every mode positive."""
    signs = np.ones(modes.shape[1])
    for i in range(modes.shape[1]):
        col = modes[:, i]
        big = np.abs(col) > 1e-10 * np.abs(col).max()
        if col[np.argmax(big)] < 0:
            signs[i] = -1.0
    return modes * signs


def pod_of_rows(rows: np.ndarray, retain_rtol: float = RETAIN_RTOL):
    """Method-of-snapshots POD of the snapshot matrix ``rows`` (M, n_dof).

    Returns ``(mean, modes, eigenvalues, coefficients)``.
    """
    rows = np.asarray(rows, dtype=float)
    M = rows.shape[0]
    if M < 2:
        raise ValidationError("POD needs at least two snapshots")
    mean = rows.mean(axis=0)
    fluct = rows - mean
    corr = fluct @ fluct.T / M
    lam, vecs = np.linalg.eigh(corr)
    order = np.argsort(lam)[::-1]
    lam = np.clip(lam[order], 0.0, None)
    vecs = vecs[:, order]
    # Mean subtraction removes one rank: keep N = M - 1 energies.
    lam = lam[: M - 1]
    lead = lam[0] if lam.size else 0.0
    keep = int(np.count_nonzero(lam > retain_rtol * lead)) if lead > 0 else 0
    modes = fluct.T @ vecs[:, :keep]
    norms = np.linalg.norm(modes, axis=0)
    modes = modes / norms
    # Re-orthonormalize: the snapshot-combination modes lose orthogonality in
    # proportion to lambda_1 / lambda_i.
    if keep:
        q, r = np.linalg.qr(modes)
        modes = q * np.sign(np.diag(r))
    modes = _fix_signs(modes)
    coefficients = fluct @ modes
    return mean, modes, lam, coefficients


def compute_pod(snapshots: SnapshotMatrix, fields=("u", "v"), indices=None) -> PODBasis:
    """POD of the chosen fields over fluid cells.

    ``indices`` restricts the decomposition to a subset of snapshots (e.g. a
    training split); it is recorded on the basis.
    """
    if indices is None:
        indices = np.arange(snapshots.count)
    indices = np.asarray(indices, dtype=int)
    rows = snapshots.vectors(fields)[indices]
    mean, modes, lam, coef = pod_of_rows(rows)
    return PODBasis(
        mean, modes, lam, coef, tuple(fields), snapshots.mask.copy(), tuple(indices.tolist())
    )


def compute_sensor_pod(trace: SensorTrace, indices=None) -> PODBasis:
    """POD of the wall-pressure sensor series (sensor-space modes)."""
    if indices is None:
        indices = np.arange(trace.pressure.shape[0])
    indices = np.asarray(indices, dtype=int)
    mean, modes, lam, coef = pod_of_rows(trace.pressure[indices])
    return PODBasis(mean, modes, lam, coef, ("p_wall",), None, tuple(indices.tolist()))


def reconstruct_field(basis: PODBasis, coefficients, k: int) -> np.ndarray:
    """``mean + sum_{i<k} a_i phi_i`` for one coefficient vector or a stack of rows."""
    if not 0 <= k <= basis.retained:
        raise RangeError(f"k={k} exceeds the {basis.retained} retained modes")
    a = np.asarray(coefficients, dtype=float)
    if a.shape[-1] < k:
        raise ValidationError(f"need at least {k} coefficients, got {a.shape[-1]}")
    return basis.mean + a[..., :k] @ basis.modes[:, :k].T


def energy_fraction(basis: PODBasis, k: int) -> float:
    """Share of fluctuation energy in the first ``k`` modes; 1 when there is none."""
    lam = basis.eigenvalues
    if not 0 <= k <= lam.size:
        raise RangeError(f"k={k} outside [0, {lam.size}]")
    total = float(lam.sum())
    if total == 0.0:
        return 1.0
    return float(lam[:k].sum()) / total


def truncation_floor(basis: PODBasis, k: int) -> float:
    """Relative L2 error of the best rank-``k`` reconstruction on the training set."""
    lam = basis.eigenvalues
    total = float(lam.sum())
    if total == 0.0:
        return 0.0
    return float(np.sqrt(lam[k:].sum() / total))
