"""Regular 2-D scalar grids: storage, bilinear interpolation, CSV I/O and
synthetic anomaly maps.

Values sit at cell centres.  ``values[k, i]`` is the sample at
``(origin_x + i * dx, origin_y + k * dy)``, so row 0 is the minimum-y row.
The interpolation domain is the hull of the cell centres; queries outside it
raise :class:`~magplan.exceptions.OutOfBoundsError` instead of extrapolating.
"""

from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ._validation import check_int, check_positive
from .exceptions import ConfigError, GridFormatError, OutOfBoundsError

# fractional-index slack for snapping onto nodes and the hull boundary
_SNAP = 1e-12


class Unit(str, enum.Enum):
    NANOTESLA = "nT"
    BITS = "bits"
    DIMENSIONLESS = "none"


@dataclass(frozen=True, eq=False)
class GridField:
    """Axis-aligned regular grid of finite scalar samples.

    Parameters
    ----------
    origin_x, origin_y : float
        Centre of cell (0, 0) in metres.
    dx, dy : float
        Cell spacing in metres, strictly positive.
    values : array-like, shape (ny, nx)
        Samples, row-major with row 0 at minimum y.  At least 2x2.
    unit : Unit
        What the samples measure.
    """

    origin_x: float
    origin_y: float
    dx: float
    dy: float
    values: np.ndarray = field(repr=False)
    unit: Unit = Unit.NANOTESLA

    def __post_init__(self):
        object.__setattr__(self, "origin_x", float(self.origin_x))
        object.__setattr__(self, "origin_y", float(self.origin_y))
        object.__setattr__(self, "dx", check_positive("dx", self.dx))
        object.__setattr__(self, "dy", check_positive("dy", self.dy))
        if not (math.isfinite(self.origin_x) and math.isfinite(self.origin_y)):
            raise ValueError("grid origin must be finite")
        values = np.array(self.values, dtype=float, copy=True)
        if values.ndim != 2:
            raise ValueError(f"values must be 2-D (ny, nx), got shape {values.shape}")
        ny, nx = values.shape
        if nx < 2 or ny < 2:
            raise ValueError(f"grid needs nx >= 2 and ny >= 2, got nx={nx} ny={ny}")
        if not np.all(np.isfinite(values)):
            raise ValueError("grid values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "unit", Unit(self.unit))

    @property
    def nx(self) -> int:
        return self.values.shape[1]

    @property
    def ny(self) -> int:
        return self.values.shape[0]

    @property
    def xs(self) -> np.ndarray:
        return self.origin_x + np.arange(self.nx) * self.dx

    @property
    def ys(self) -> np.ndarray:
        return self.origin_y + np.arange(self.ny) * self.dy

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        """Hull of the cell centres, ``(x_min, x_max, y_min, y_max)``."""
        return (
            self.origin_x,
            self.origin_x + (self.nx - 1) * self.dx,
            self.origin_y,
            self.origin_y + (self.ny - 1) * self.dy,
        )

    @property
    def extent(self) -> tuple[float, float, float, float]:
        """Area covered by the cells, i.e. the bounds grown by half a cell."""
        x0, x1, y0, y1 = self.bounds
        return (x0 - self.dx / 2, x1 + self.dx / 2, y0 - self.dy / 2, y1 + self.dy / 2)

    def value(self, i: int, j: int) -> float:
        """Sample at column ``i`` (x index) and row ``j`` (y index)."""
        return float(self.values[j, i])

    def contains(self, x, y) -> bool:
        x0, x1, y0, y1 = self.bounds
        return x0 <= x <= x1 and y0 <= y <= y1

    def clamp(self, x, y):
        """Project a point onto the interpolation domain."""
        x0, x1, y0, y1 = self.bounds
        return min(max(x, x0), x1), min(max(y, y0), y1)

    def with_values(self, values, unit=None) -> "GridField":
        return GridField(self.origin_x, self.origin_y, self.dx, self.dy, values,
                         self.unit if unit is None else unit)

    def __eq__(self, other):
        if not isinstance(other, GridField):
            return NotImplemented
        return (
            self.origin_x == other.origin_x
            and self.origin_y == other.origin_y
            and self.dx == other.dx
            and self.dy == other.dy
            and self.unit == other.unit
            and self.values.shape == other.values.shape
            and bool(np.array_equal(self.values, other.values))
        )

    __hash__ = None


# ---------------------------------------------------------------------------
# interpolation


def _fractional_index(coord, origin, spacing, n):
    u = (np.asarray(coord, dtype=float) - origin) / spacing
    nearest = np.rint(u)
    tol = _SNAP * np.maximum(1.0, np.abs(u))
    u = np.where(np.abs(u - nearest) <= tol, nearest, u)
    inside = (u >= 0) & (u <= n - 1)
    u = np.clip(u, 0, n - 1)
    i = np.minimum(np.floor(u).astype(np.intp), n - 2)
    return i, u - i, inside


def interpolate_many(field: GridField, xs, ys):
    """Vectorised bilinear interpolation.

    Returns
    -------
    values : ndarray
        Interpolated values; points outside the domain get the value at the
        nearest domain point.
    inside : ndarray of bool
        Which queries were inside the cell-centre hull.
    """
    i, tx, in_x = _fractional_index(xs, field.origin_x, field.dx, field.nx)
    j, ty, in_y = _fractional_index(ys, field.origin_y, field.dy, field.ny)
    v = field.values
    v00 = v[j, i]
    v10 = v[j, i + 1]
    v01 = v[j + 1, i]
    v11 = v[j + 1, i + 1]
    low = v00 + tx * (v10 - v00)
    high = v01 + tx * (v11 - v01)
    out = low + ty * (high - low)
    return out, in_x & in_y


def _scalar_index(coord, origin, spacing, n):
    # same operations as _fractional_index, in plain floats
    u = (coord - origin) / spacing
    nearest = float(round(u))
    if abs(u - nearest) <= _SNAP * max(1.0, abs(u)):
        u = nearest
    if not 0 <= u <= n - 1:
        return None
    i = min(math.floor(u), n - 2)
    return i, u - i


def interpolate(field: GridField, x: float, y: float) -> float:
    """Bilinear interpolation of ``field`` at ``(x, y)``; exact at cell centres."""
    x, y = float(x), float(y)
    ix = _scalar_index(x, field.origin_x, field.dx, field.nx)
    iy = _scalar_index(y, field.origin_y, field.dy, field.ny)
    if ix is None or iy is None:
        raise OutOfBoundsError(x, y, field.bounds)
    (i, tx), (j, ty) = ix, iy
    v = field.values
    v00, v10 = float(v[j, i]), float(v[j, i + 1])
    v01, v11 = float(v[j + 1, i]), float(v[j + 1, i + 1])
    low = v00 + tx * (v10 - v00)
    high = v01 + tx * (v11 - v01)
    return low + ty * (high - low)


def upsample(field: GridField, factor: int) -> GridField:
    """Refine the grid spacing by an integer factor over the same domain.

    Original nodes keep their values exactly; new nodes are bilinear.
    """
    factor = check_int("factor", factor, minimum=1)
    if factor == 1:
        return field

    def _refine(n):
        idx = np.arange((n - 1) * factor + 1)
        base = np.minimum(idx // factor, n - 2)
        frac = (idx - base * factor) / factor
        return base, frac

    i, tx = _refine(field.nx)
    j, ty = _refine(field.ny)
    v = field.values
    # separable: along x first, then along y
    along_x = v[:, i] + tx * (v[:, i + 1] - v[:, i])
    out = along_x[j, :] + ty[:, None] * (along_x[j + 1, :] - along_x[j, :])
    return GridField(field.origin_x, field.origin_y, field.dx / factor,
                     field.dy / factor, out, field.unit)


# ---------------------------------------------------------------------------
# grid-CSV


_UNIT_TAGS = {u.value for u in Unit}
_HEADER_KEYS = ("x0", "y0", "dx", "dy", "nx", "ny", "unit")


def _fmt(v: float) -> str:
    return "%.17g" % v


def save_grid(field: GridField) -> str:
    """Serialise to the canonical grid-CSV document (17 significant digits)."""
    lines = [
        "# grid x0={} y0={} dx={} dy={} nx={} ny={} unit={}".format(
            _fmt(field.origin_x), _fmt(field.origin_y), _fmt(field.dx),
            _fmt(field.dy), field.nx, field.ny, field.unit.value,
        )
    ]
    for row in field.values:
        lines.append(",".join(_fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def _parse_float(text, line, what):
    try:
        value = float(text)
    except ValueError:
        raise GridFormatError(f"{what}: cannot parse {text!r} as a number", line) from None
    if not math.isfinite(value):
        raise GridFormatError(f"{what}: non-finite value {text!r}", line)
    return value


def load_grid(text: str) -> GridField:
    """Parse a grid-CSV document.

    The header is ``# grid x0=.. y0=.. dx=.. dy=.. nx=.. ny=.. unit=..``; the
    leading ``# grid`` and the ``unit`` key may be omitted (unit then
    defaults to nT).  Every error names the offending 1-based line.
    """
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise GridFormatError("empty document", 1)

    header = lines[0].strip()
    header = re.sub(r"^#\s*", "", header)
    header = re.sub(r"^grid\b\s*", "", header)
    meta = {}
    for token in header.split():
        key, sep, val = token.partition("=")
        if not sep or key not in _HEADER_KEYS:
            raise GridFormatError(f"malformed header token {token!r}", 1)
        if key in meta:
            raise GridFormatError(f"duplicate header key {key!r}", 1)
        meta[key] = val
    missing = [k for k in _HEADER_KEYS[:6] if k not in meta]
    if missing:
        raise GridFormatError(f"malformed header: missing {', '.join(missing)}", 1)
    unit = meta.get("unit", Unit.NANOTESLA.value)
    if unit not in _UNIT_TAGS:
        raise GridFormatError(f"malformed header: unknown unit {unit!r}", 1)
    geom = {k: _parse_float(meta[k], 1, f"header {k}") for k in ("x0", "y0", "dx", "dy")}
    if geom["dx"] <= 0 or geom["dy"] <= 0:
        raise GridFormatError("malformed header: dx and dy must be > 0", 1)
    try:
        nx, ny = int(meta["nx"]), int(meta["ny"])
    except ValueError:
        raise GridFormatError("malformed header: nx/ny must be integers", 1) from None
    if nx < 2 or ny < 2:
        raise GridFormatError(f"malformed header: need nx, ny >= 2, got nx={nx} ny={ny}", 1)

    rows = lines[1:]
    values = np.empty((ny, nx))
    for k, raw in enumerate(rows):
        lineno = k + 2
        if k >= ny:
            raise GridFormatError(f"row count mismatch: header says ny={ny}, found extra row", lineno)
        cells = raw.rstrip("\r").split(",")
        if len(cells) != nx:
            raise GridFormatError(f"ragged row: expected {nx} values, found {len(cells)}", lineno)
        for i, cell in enumerate(cells):
            values[k, i] = _parse_float(cell.strip(), lineno, f"column {i + 1}")
    if len(rows) != ny:
        raise GridFormatError(
            f"row count mismatch: header says ny={ny}, found {len(rows)} rows", len(rows) + 2
        )
    return GridField(geom["x0"], geom["y0"], geom["dx"], geom["dy"], values, Unit(unit))


# ---------------------------------------------------------------------------
# synthetic maps


@dataclass(frozen=True)
class Anomaly:
    """Gaussian bump ``amplitude * exp(-r^2 / (2 length_scale^2))``."""

    x: float
    y: float
    amplitude: float
    length_scale: float

    def __post_init__(self):
        check_positive("length_scale", self.length_scale)


@dataclass(frozen=True)
class SynthSpec:
    """Recipe for a synthetic magnetic anomaly map.

    ``noise_nT`` adds seeded white survey noise on top of the analytic field;
    with the default of zero the seed is unused and the map is noise free.
    """

    x_min: float
    x_max: float
    y_min: float
    y_max: float
    spacing: float
    base_field: float = 0.0
    anomalies: Sequence[Anomaly] = ()
    seed: int = 0
    noise_nT: float = 0.0

    def __post_init__(self):
        check_positive("spacing", self.spacing)
        check_positive("noise_nT", self.noise_nT, strict=False)
        if not (self.x_max > self.x_min and self.y_max > self.y_min):
            raise ValueError("synthetic map extent is degenerate")
        if self.seed < 0:
            raise ValueError("seed must be unsigned")
        object.__setattr__(self, "anomalies", tuple(self.anomalies))


def anomaly_field(spec: SynthSpec, x, y):
    """Noise-free analytic field of ``spec`` evaluated at arbitrary points."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    total = np.full(np.broadcast(x, y).shape, float(spec.base_field))
    for a in spec.anomalies:
        r2 = (x - a.x) ** 2 + (y - a.y) ** 2
        total = total + a.amplitude * np.exp(-r2 / (2.0 * a.length_scale**2))
    return total


def synth_map(spec: SynthSpec) -> GridField:
    """Sample the sum-of-Gaussians field on a regular grid starting at
    ``(x_min, y_min)``."""
    nx = int(math.floor((spec.x_max - spec.x_min) / spec.spacing + 1e-9)) + 1
    ny = int(math.floor((spec.y_max - spec.y_min) / spec.spacing + 1e-9)) + 1
    xs = spec.x_min + np.arange(nx) * spec.spacing
    ys = spec.y_min + np.arange(ny) * spec.spacing
    gx, gy = np.meshgrid(xs, ys)
    values = anomaly_field(spec, gx, gy)
    if spec.noise_nT > 0:
        rng = np.random.default_rng(spec.seed)
        values = values + rng.normal(0.0, spec.noise_nT, size=values.shape)
    return GridField(spec.x_min, spec.y_min, spec.spacing, spec.spacing, values, Unit.NANOTESLA)


_SYNTH_SCALARS = {
    "x_min": float, "x_max": float, "y_min": float, "y_max": float,
    "spacing": float, "base_field": float, "seed": int, "noise_nT": float,
}


def parse_synth_spec(text: str) -> SynthSpec:
    """Read a SynthSpec from ``key = value`` lines.

    Scalar keys are those of :class:`SynthSpec`; each ``anomaly = x, y,
    amplitude, length_scale`` line adds one Gaussian.  ``#`` starts a comment.
    """
    kwargs = {}
    anomalies = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = (s.strip() for s in line.partition("="))
        if not sep:
            raise ConfigError(f"line {lineno}: expected key = value, got {raw!r}")
        try:
            if key == "anomaly":
                parts = [float(p) for p in val.split(",")]
                if len(parts) != 4:
                    raise ValueError("anomaly needs x, y, amplitude, length_scale")
                anomalies.append(Anomaly(*parts))
            elif key in _SYNTH_SCALARS:
                if key in kwargs:
                    raise ValueError(f"duplicate key {key!r}")
                kwargs[key] = _SYNTH_SCALARS[key](val)
            else:
                raise ValueError(f"unknown key {key!r}")
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: {exc}") from None
    missing = [k for k in ("x_min", "x_max", "y_min", "y_max", "spacing") if k not in kwargs]
    if missing:
        raise ConfigError(f"synthetic map spec missing {', '.join(missing)}")
    try:
        return SynthSpec(anomalies=anomalies, **kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def format_synth_spec(spec: SynthSpec) -> str:
    lines = [f"{k} = {getattr(spec, k)!r}" for k in _SYNTH_SCALARS]
    for a in spec.anomalies:
        lines.append(f"anomaly = {a.x!r}, {a.y!r}, {a.amplitude!r}, {a.length_scale!r}")
    return "\n".join(lines) + "\n"
