"""Sliding-window Shannon entropy maps of a scalar field.

Pipeline: average the field into square bins, rescale the bin means to
[0, 1] over the whole map, then for every r x r window of bins treat the
window's (floored) values as a probability mass and take its entropy in bits.
Windows where a few bins dominate their neighbours (steep relative change)
come out low; flat windows come out at the maximum ``log2(r*r)``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ._validation import check_int, check_positive
from .exceptions import DataError, DegenerateFieldError
from .gridfield import GridField, Unit

DEFAULT_PROBABILITY_FLOOR = 1e-12
WEIGHT_LOG_GUARD = 1e-6
WEIGHT_CAP = 1e3
# slack on the selection threshold so that sigma == 0 selects every point
# despite rounding in the mean
_THRESHOLD_SLACK = 1e-12


@dataclass(frozen=True)
class EntropyConfig:
    """Binning and window parameters.  Entropy is always in bits."""

    bin_size: float = 0.2
    window_size: int = 2
    probability_floor: float = DEFAULT_PROBABILITY_FLOOR

    def __post_init__(self):
        check_positive("bin_size", self.bin_size)
        check_int("window_size", self.window_size, minimum=2)
        check_positive("probability_floor", self.probability_floor)


@dataclass(frozen=True)
class EntropyPoint:
    x: float
    y: float
    entropy: float
    weight: float


def bin_map(field: GridField, bin_size: float) -> GridField:
    """Average source cells into square bins of side ``bin_size``.

    Bins tile the plane from the lower-left cell edge.  A cell belongs to the
    bin containing its centre; partially covered edge bins are kept.  Output
    values sit at the nominal bin centres.
    """
    bin_size = check_positive("bin_size", bin_size)
    if bin_size < max(field.dx, field.dy) * (1 - 1e-12):
        raise DataError(
            f"bin_size {bin_size!r} is smaller than the grid spacing "
            f"({field.dx!r}, {field.dy!r})"
        )

    def _assign(n, spacing):
        pos = (np.arange(n) + 0.5) * (spacing / bin_size)
        return np.floor(pos + 1e-9).astype(np.intp)

    bx = _assign(field.nx, field.dx)
    by = _assign(field.ny, field.dy)
    nbx, nby = int(bx[-1]) + 1, int(by[-1]) + 1
    if nbx < 2 or nby < 2:
        raise DataError(f"binning yields a {nbx}x{nby} grid; need at least 2x2 bins")
    flat = (by[:, None] * nbx + bx[None, :]).ravel()
    sums = np.bincount(flat, weights=field.values.ravel(), minlength=nbx * nby)
    counts = np.bincount(flat, minlength=nbx * nby)
    means = (sums / counts).reshape(nby, nbx)
    return GridField(
        field.origin_x - field.dx / 2 + bin_size / 2,
        field.origin_y - field.dy / 2 + bin_size / 2,
        bin_size,
        bin_size,
        means,
        field.unit,
    )


def normalize_bins(binned: GridField) -> GridField:
    """Rescale to [0, 1]: the minimum maps to 0 and the maximum to 1."""
    z = binned.values
    lo, hi = float(z.min()), float(z.max())
    if hi == lo:
        raise DegenerateFieldError(f"field is constant ({lo!r}); cannot normalise")
    out = np.clip((z - lo) / (hi - lo), 0.0, 1.0)
    return binned.with_values(out, Unit.DIMENSIONLESS)


def window_probabilities(normalized: GridField, i: int, j: int, r: int,
                         probability_floor: float = DEFAULT_PROBABILITY_FLOOR) -> np.ndarray:
    """Probability mass of the r x r window whose lower-left bin is column
    ``i``, row ``j``.  Returned in row-major order."""
    r = check_int("r", r, minimum=1)
    if i < 0 or j < 0 or i + r > normalized.nx or j + r > normalized.ny:
        raise DataError(
            f"window at ({i}, {j}) of size {r} exceeds the "
            f"{normalized.nx}x{normalized.ny} grid"
        )
    m = np.maximum(normalized.values[j:j + r, i:i + r], probability_floor).ravel()
    return m / m.sum()


def window_entropy(probs) -> float:
    """Shannon entropy in bits, ``-sum(p * log2(p))``."""
    p = np.asarray(probs, dtype=float)
    return float(-(p * np.log2(p)).sum())


def entropy_map(field: GridField, cfg: EntropyConfig = EntropyConfig()) -> GridField:
    """Entropy of every r x r window (stride one bin) of the normalised bins.

    The output has ``(binned.nx - r + 1, binned.ny - r + 1)`` cells, each placed
    at the centre of its window, with ``unit = bits``.
    """
    r = cfg.window_size
    norm = normalize_bins(bin_map(field, cfg.bin_size))
    if norm.nx - r + 1 < 2 or norm.ny - r + 1 < 2:
        raise DataError(
            f"field too small: {norm.nx}x{norm.ny} bins leave fewer than 2x2 windows of size {r}"
        )
    m = np.maximum(norm.values, cfg.probability_floor)
    windows = sliding_window_view(m, (r, r))
    p = windows / windows.sum(axis=(2, 3), keepdims=True)
    h = -(p * np.log2(p)).sum(axis=(2, 3))
    h = np.clip(h, 0.0, math.log2(r * r))
    shift = (r - 1) / 2 * cfg.bin_size
    return GridField(norm.origin_x + shift, norm.origin_y + shift,
                     norm.dx, norm.dy, h, Unit.BITS)


def entropy_weight(entropy: float, *, guard: float = WEIGHT_LOG_GUARD,
                   cap: float = WEIGHT_CAP) -> float:
    """Attraction weight ``0.5 ** (1 / log2(H))`` of an entropy point.

    ``log2(H)`` is pushed out to ``+-guard`` when it is closer to zero than
    that (exactly zero goes to ``-guard``), and the result is limited to
    ``[1/cap, cap]`` so it stays finite and positive.
    """
    entropy = float(entropy)
    if not entropy > 0 or not math.isfinite(entropy):
        raise DataError(f"entropy weight needs H > 0, got {entropy!r}")
    lg = math.log2(entropy)
    if abs(lg) < guard:
        lg = guard if lg > 0 else -guard
    limit = math.log2(cap)
    exponent = min(max(-1.0 / lg, -limit), limit)
    return 2.0 ** exponent


def select_low_entropy_points(emap: GridField, k_sigma: float = 5.0,
                              max_points: int = 64) -> list[EntropyPoint]:
    """Cells whose entropy is at least ``k_sigma`` standard deviations below
    the map mean, lowest first (ties in row-major order), at most
    ``max_points`` of them."""
    k_sigma = check_positive("k_sigma", k_sigma, strict=False)
    max_points = check_int("max_points", max_points, minimum=0)
    h = emap.values.ravel()
    mu = float(h.mean())
    sigma = float(h.std())
    threshold = mu - k_sigma * sigma + _THRESHOLD_SLACK
    idx = np.flatnonzero(h <= threshold)
    idx = idx[np.argsort(h[idx], kind="stable")][:max_points]
    rows, cols = np.divmod(idx, emap.nx)
    xs = emap.origin_x + cols * emap.dx
    ys = emap.origin_y + rows * emap.dy
    return [
        EntropyPoint(float(x), float(y), float(h[k]), entropy_weight(h[k]))
        for x, y, k in zip(xs, ys, idx)
    ]


POINTS_HEADER = ("x", "y", "entropy_bits", "weight")


def save_points(points) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(POINTS_HEADER)
    for p in points:
        writer.writerow([repr(float(p.x)), repr(float(p.y)),
                         repr(float(p.entropy)), repr(float(p.weight))])
    return buf.getvalue()


def load_points(text: str) -> list[EntropyPoint]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or tuple(header) != POINTS_HEADER:
        raise DataError(f"entropy point CSV must start with header {','.join(POINTS_HEADER)}")
    points = []
    for lineno, row in enumerate(reader, start=2):
        if len(row) != 4:
            raise DataError(f"line {lineno}: expected 4 columns, found {len(row)}")
        try:
            points.append(EntropyPoint(*(float(v) for v in row)))
        except ValueError:
            raise DataError(f"line {lineno}: non-numeric entry") from None
    return points
