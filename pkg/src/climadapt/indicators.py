"""Raster-derived city indicators and their time series.

Both indices are thresholded normalized-difference pixel fractions:

* urban green index (UGI): share of valid pixels with NDVI above a threshold,
  NDVI = (NIR - RED) / (NIR + RED);
* land-development index (LDI): share of valid pixels with NDBI above a
  threshold, NDBI = (SWIR - NIR) / (SWIR + NIR).

They are simplified stand-ins for the ecological-footprint and human
development axes of the adaptation diagram.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from .errors import (
    ConfigError,
    EmptyDomainError,
    OrderingError,
    SchemaError,
    ValidationError,
)
from .raster import Raster, normalized_difference

GREEN = "green"
DEVELOPMENT = "development"


@dataclass(frozen=True)
class IndexConfig:
    green_band_pair: tuple = ("nir", "red")
    builtup_band_pair: tuple = ("swir", "nir")
    ndvi_threshold: float = 0.3
    ndbi_threshold: float = 0.0

    def __post_init__(self):
        for name in ("ndvi_threshold", "ndbi_threshold"):
            value = getattr(self, name)
            if not (math.isfinite(value) and -1.0 < value < 1.0):
                raise ConfigError(f"{name} must lie in (-1, 1), got {value}")
        for name in ("green_band_pair", "builtup_band_pair"):
            pair = tuple(getattr(self, name))
            if len(pair) != 2:
                raise ConfigError(f"{name} must name exactly two bands")
            object.__setattr__(self, name, pair)


def _threshold_fraction(grid: np.ndarray, threshold: float, label: str) -> float:
    valid = ~np.isnan(grid)
    n_valid = int(np.count_nonzero(valid))
    if n_valid == 0:
        raise EmptyDomainError(f"{label}: every pixel is nodata")
    n_above = int(np.count_nonzero(grid[valid] > threshold))
    return n_above / n_valid


def valid_pixel_count(raster: Raster, pair) -> int:
    return int(np.count_nonzero(~np.isnan(normalized_difference(raster, *pair).values)))


def urban_green_index(raster: Raster, config: IndexConfig = IndexConfig()) -> float:
    """Fraction of valid pixels whose NDVI exceeds ``config.ndvi_threshold``."""
    ndvi = normalized_difference(raster, *config.green_band_pair)
    return _threshold_fraction(ndvi.values, config.ndvi_threshold, "urban green index")


def land_development_index(raster: Raster, config: IndexConfig = IndexConfig()) -> float:
    """Fraction of valid pixels whose NDBI exceeds ``config.ndbi_threshold``."""
    ndbi = normalized_difference(raster, *config.builtup_band_pair)
    return _threshold_fraction(ndbi.values, config.ndbi_threshold, "land-development index")


def compute_indices(raster: Raster, config: IndexConfig = IndexConfig()) -> dict:
    return {
        GREEN: urban_green_index(raster, config),
        DEVELOPMENT: land_development_index(raster, config),
    }


@dataclass(frozen=True)
class IndicatorSeries:
    """Timestamped indicator values for one region.

    ``entries`` is a tuple of ``(timestamp, values)`` where timestamps are days
    since the epoch and ``values`` maps indicator names to finite floats.
    Instances are immutable; :func:`append_observation` returns a new series.
    """

    region_id: str
    entries: tuple = field(default_factory=tuple)

    def __post_init__(self):
        entries = tuple((float(t), dict(v)) for t, v in self.entries)
        schema = None
        last = -math.inf
        for t, values in entries:
            _check_entry(t, values, last, schema)
            schema = list(values) if schema is None else schema
            last = t
        object.__setattr__(self, "entries", entries)

    def __len__(self):
        return len(self.entries)

    @property
    def names(self) -> list[str]:
        return list(self.entries[0][1]) if self.entries else []

    @property
    def timestamps(self) -> np.ndarray:
        return np.array([t for t, _ in self.entries], dtype=float)

    def column(self, name: str) -> np.ndarray:
        if name not in self.names:
            raise SchemaError(f"series {self.region_id!r} has no indicator {name!r}")
        return np.array([v[name] for _, v in self.entries], dtype=float)


def _check_entry(t, values: Mapping, last, schema):
    if not math.isfinite(t):
        raise ValidationError(f"timestamp must be finite, got {t}")
    if t <= last:
        raise OrderingError(f"timestamp {t} does not follow {last}")
    if not values:
        raise SchemaError("an observation needs at least one indicator value")
    if schema is not None and set(values) != set(schema):
        raise SchemaError(f"indicator names {sorted(values)} do not match schema {schema}")
    for name, value in values.items():
        if not math.isfinite(value):
            raise ValidationError(f"indicator {name!r} is not finite: {value}")


def append_observation(series: IndicatorSeries, timestamp, values: Mapping) -> IndicatorSeries:
    """Return ``series`` extended by one observation.

    The first observation fixes the schema; later ones must carry exactly the
    same indicator names (values are re-ordered to the schema order).
    """
    t = float(timestamp)
    values = {str(k): float(v) for k, v in values.items()}
    last = series.entries[-1][0] if series.entries else -math.inf
    schema = series.names or None
    _check_entry(t, values, last, schema)
    if schema is not None:
        values = {name: values[name] for name in schema}
    return IndicatorSeries(series.region_id, series.entries + ((t, values),))


def series_to_csv(series: IndicatorSeries, forecast: Mapping | None = None) -> str:
    """Render a series as CSV text.

    With ``forecast`` (``{"timestamps": [...], name: [...]}``) a trailing
    ``forecast`` column flags observed rows ``false`` and forecast rows
    ``true``.
    """
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    names = series.names
    header = ["timestamp", *names]
    if forecast is not None:
        header.append("forecast")
    writer.writerow(header)
    for t, values in series.entries:
        row = [_fmt(t), *(_fmt(values[n]) for n in names)]
        if forecast is not None:
            row.append("false")
        writer.writerow(row)
    if forecast is not None:
        for i, t in enumerate(forecast["timestamps"]):
            row = [_fmt(t)]
            for n in names:
                row.append(_fmt(forecast[n][i]) if n in forecast else "")
            row.append("true")
            writer.writerow(row)
    return buf.getvalue()


def _fmt(value: float) -> str:
    value = float(value)
    if value.is_integer() and abs(value) < 2**53:
        return str(int(value))
    return repr(value)


def save_series(series: IndicatorSeries, path) -> None:
    Path(path).write_text(series_to_csv(series), encoding="utf-8", newline="")


def load_series(path, region_id: str | None = None) -> IndicatorSeries:
    """Read a series CSV. ``region_id`` defaults to the file stem."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0][:1] != ["timestamp"]:
        raise SchemaError(f"{path}: header must start with 'timestamp'")
    names = rows[0][1:]
    if "forecast" in names:
        raise SchemaError(f"{path}: forecast CSVs cannot be loaded as series")
    series = IndicatorSeries(region_id if region_id is not None else path.stem)
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(names) + 1:
            raise SchemaError(f"{path}:{lineno}: expected {len(names) + 1} fields")
        try:
            t = float(row[0])
            values = {n: float(v) for n, v in zip(names, row[1:])}
        except ValueError as exc:
            raise ValidationError(f"{path}:{lineno}: {exc}") from None
        series = append_observation(series, t, values)
    return series
