"""Calibration of raster indices and the climate-adaptation diagram.

The diagram places a region at ``x`` = normalized development and
``y`` = ecological stress = 1 - normalized greenness. The "green zone"
(living well within environmental limits) is ``x >= 0.8`` and ``y <= 0.2``
by default.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Sequence
from xml.sax.saxutils import escape, quoteattr

import numpy as np

from .errors import ConfigError, FitError, RangeError, ValidationError


def composite_hdi(health: float, education: float, income: float) -> float:
    """Geometric mean of three normalized development indices.

    >>> round(composite_hdi(0.5, 0.5, 1.0), 4)
    0.63
    """
    parts = (health, education, income)
    for name, value in zip(("health", "education", "income"), parts):
        if not (0.0 <= value <= 1.0):
            raise RangeError(f"{name} index must lie in [0, 1], got {value}")
    # Sorting makes the rounded product independent of argument order.
    a, b, c = sorted(float(v) for v in parts)
    return float(np.cbrt(a * b * c))


class Anchor(NamedTuple):
    """Reference region with raw satellite indices and target normalized values."""

    region_id: str
    raw_x: float
    raw_y: float
    ref_x: float
    ref_y: float


@dataclass(frozen=True)
class AxisMap:
    scale: float
    offset: float

    def __call__(self, raw):
        return self.scale * raw + self.offset


@dataclass(frozen=True)
class CalibrationMap:
    """Per-axis affine maps from raw indices to normalized [0, 1] values.

    ``x_axis`` maps the raw development index to normalized development,
    ``y_axis`` maps the raw green index to normalized greenness.
    ``fit_residual`` holds the RMS residual of each axis fit as ``(x, y)``.
    """

    x_axis: AxisMap
    y_axis: AxisMap
    anchors: tuple
    fit_residual: tuple

    def __post_init__(self):
        if len(self.anchors) < 2:
            raise ValidationError("a calibration needs at least two anchors")
        if self.x_axis.scale == 0 or self.y_axis.scale == 0:
            raise ValidationError("calibration scales must be nonzero")
        if any(not r >= 0 for r in self.fit_residual):
            raise ValidationError("fit residuals must be nonnegative")

    def to_dict(self) -> dict:
        return {
            "x_axis": {"scale": self.x_axis.scale, "offset": self.x_axis.offset},
            "y_axis": {"scale": self.y_axis.scale, "offset": self.y_axis.offset},
            "anchors": [a._asdict() for a in self.anchors],
            "fit_residual": {"x": self.fit_residual[0], "y": self.fit_residual[1]},
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CalibrationMap":
        return cls(
            x_axis=AxisMap(**data["x_axis"]),
            y_axis=AxisMap(**data["y_axis"]),
            anchors=tuple(Anchor(**a) for a in data["anchors"]),
            fit_residual=(data["fit_residual"]["x"], data["fit_residual"]["y"]),
        )


def _fit_axis(raw: np.ndarray, ref: np.ndarray, label: str):
    raw_mean = raw.mean()
    ref_mean = ref.mean()
    draw = raw - raw_mean
    sxx = float(draw @ draw)
    if sxx == 0.0:
        raise FitError(f"{label} axis: raw anchor values are all equal")
    scale = float(draw @ (ref - ref_mean)) / sxx
    if scale == 0.0:
        raise FitError(f"{label} axis: reference values do not vary with raw values")
    offset = float(ref_mean - scale * raw_mean)
    resid = scale * raw + offset - ref
    rms = math.sqrt(float(resid @ resid) / len(raw))
    return AxisMap(scale, offset), rms


def fit_calibration(anchors: Sequence) -> CalibrationMap:
    """Least-squares affine calibration of both diagram axes.

    Parameters
    ----------
    anchors : sequence
        :class:`Anchor` instances or plain ``(raw_x, raw_y, ref_x, ref_y)``
        tuples. At least two are required, with non-constant raw values on
        each axis.
    """
    parsed = []
    for i, anchor in enumerate(anchors):
        if isinstance(anchor, Anchor):
            parsed.append(anchor)
        elif len(anchor) == 4:
            parsed.append(Anchor(f"anchor{i}", *map(float, anchor)))
        else:
            parsed.append(Anchor(str(anchor[0]), *map(float, anchor[1:])))
    if len(parsed) < 2:
        raise FitError(f"need at least 2 anchors, got {len(parsed)}")
    arr = np.array([a[1:] for a in parsed], dtype=float)
    if not np.isfinite(arr).all():
        raise ValidationError("anchor values must be finite")
    x_map, x_rms = _fit_axis(arr[:, 0], arr[:, 2], "x")
    y_map, y_rms = _fit_axis(arr[:, 1], arr[:, 3], "y")
    return CalibrationMap(x_map, y_map, tuple(parsed), (x_rms, y_rms))


@dataclass(frozen=True)
class ZoneThresholds:
    x_threshold: float = 0.8
    y_threshold: float = 0.2

    def __post_init__(self):
        for name in ("x_threshold", "y_threshold"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1], got {value}")


def in_green_zone(x: float, y: float, thresholds: ZoneThresholds = ZoneThresholds()) -> bool:
    return bool(x >= thresholds.x_threshold and y <= thresholds.y_threshold)


@dataclass(frozen=True)
class AdaptationPoint:
    region_id: str
    x: float
    y: float
    in_green_zone: bool


def _clamp(value: float) -> float:
    return min(1.0, max(0.0, float(value)))


def observe(
    green_raw: float,
    dev_raw: float,
    cal: CalibrationMap,
    thresholds: ZoneThresholds = ZoneThresholds(),
    region_id: str = "",
) -> AdaptationPoint:
    """Place a region on the adaptation diagram."""
    if not (math.isfinite(green_raw) and math.isfinite(dev_raw)):
        raise ValidationError("raw indices must be finite")
    x = _clamp(cal.x_axis(dev_raw))
    y = _clamp(1.0 - cal.y_axis(green_raw))
    return AdaptationPoint(region_id, x, y, in_green_zone(x, y, thresholds))


# SVG layout: 800x600 canvas, plot box inset by fixed margins.
_SVG_W, _SVG_H = 800, 600
_LEFT, _RIGHT, _TOP, _BOTTOM = 80.0, 760.0, 40.0, 540.0


def _px(x: float) -> float:
    return _LEFT + x * (_RIGHT - _LEFT)


def _py(y: float) -> float:
    return _BOTTOM - y * (_BOTTOM - _TOP)


def diagram_csv(points: Sequence[AdaptationPoint]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["region_id", "x", "y", "in_green_zone"])
    for p in points:
        writer.writerow([p.region_id, repr(p.x), repr(p.y), "true" if p.in_green_zone else "false"])
    return buf.getvalue()


def diagram_svg(points: Sequence[AdaptationPoint], thresholds: ZoneThresholds) -> str:
    zx0, zx1 = _px(thresholds.x_threshold), _px(1.0)
    zy0, zy1 = _py(thresholds.y_threshold), _py(0.0)
    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_SVG_W}" height="{_SVG_H}" '
        f'viewBox="0 0 {_SVG_W} {_SVG_H}">',
        f'<rect id="green-zone" x="{zx0:.3f}" y="{zy0:.3f}" width="{zx1 - zx0:.3f}" '
        f'height="{zy1 - zy0:.3f}" fill="#b7e4b0" stroke="none"/>',
        f'<rect id="plot-area" x="{_LEFT:.3f}" y="{_TOP:.3f}" width="{_RIGHT - _LEFT:.3f}" '
        f'height="{_BOTTOM - _TOP:.3f}" fill="none" stroke="#000000"/>',
    ]
    for tick in range(6):
        v = tick / 5
        lines.append(
            f'<text x="{_px(v):.3f}" y="{_BOTTOM + 20:.3f}" font-size="12" '
            f'text-anchor="middle">{v:.1f}</text>'
        )
        lines.append(
            f'<text x="{_LEFT - 10:.3f}" y="{_py(v) + 4:.3f}" font-size="12" '
            f'text-anchor="end">{v:.1f}</text>'
        )
    lines.append(
        f'<text x="{(_LEFT + _RIGHT) / 2:.3f}" y="{_SVG_H - 15}" font-size="14" '
        'text-anchor="middle">normalized land-development index</text>'
    )
    lines.append(
        f'<text x="20" y="{(_TOP + _BOTTOM) / 2:.3f}" font-size="14" text-anchor="middle" '
        f'transform="rotate(-90 20 {(_TOP + _BOTTOM) / 2:.3f})">'
        "ecological stress (1 - normalized green index)</text>"
    )
    for p in points:
        color = "#1a7f37" if p.in_green_zone else "#cf222e"
        lines.append(
            f'<circle id={quoteattr(p.region_id)} cx="{_px(p.x):.3f}" cy="{_py(p.y):.3f}" '
            f'r="6" fill="{color}"><title>{escape(p.region_id)}</title></circle>'
        )
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def emit_diagram(points: Sequence[AdaptationPoint], thresholds: ZoneThresholds, path) -> tuple:
    """Write ``<path>.csv`` and ``<path>.svg``; returns both paths."""
    if not points:
        raise ValidationError("diagram needs at least one point")
    base = Path(path)
    csv_path = base.with_suffix(".csv")
    svg_path = base.with_suffix(".svg")
    csv_path.write_text(diagram_csv(points), encoding="utf-8", newline="")
    svg_path.write_text(diagram_svg(points, thresholds), encoding="utf-8", newline="")
    return csv_path, svg_path
