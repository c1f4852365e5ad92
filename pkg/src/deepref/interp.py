"""Quarter-pel fractional-sample interpolation with integer filter arithmetic.

Luma positions between integer samples are synthesized by separable filtering:
a symmetric 8-tap filter at half-sample offsets and an asymmetric 7-tap filter
at quarter-sample offsets (the 3/4 filter is the mirrored 1/4 filter). The
horizontal stage keeps full integer precision; the final stage adds a rounding
offset of 2^(s-1) and arithmetic-shifts right by s, with s = 6 when only one
dimension is fractional and s = 12 when both are. Frame edges are handled by
sample replication.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ConfigError, ShapeMismatchError


class MotionVectorQ(NamedTuple):
    """Motion vector in quarter-sample units."""

    x4: int
    y4: int


@dataclass(frozen=True)
class InterpFilterSet:
    """Integer taps; each set sums to 2**norm_shift so DC is preserved.

    Tap k of ``half`` applies to the sample at offset k-3 (offsets -3..+4),
    ``quarter`` to offsets -3..+3, and ``three_quarter`` to offsets -2..+4.
    """

    half: tuple[int, ...]
    quarter: tuple[int, ...]
    three_quarter: tuple[int, ...]
    norm_shift: int = 6

    def __post_init__(self):
        gain = 1 << self.norm_shift
        if len(self.half) != 8:
            raise ConfigError(f"half filter must have 8 taps, got {len(self.half)}")
        if len(self.quarter) != 7 or len(self.three_quarter) != 7:
            raise ConfigError("quarter filters must have 7 taps")
        for name, taps in (("half", self.half), ("quarter", self.quarter),
                           ("three_quarter", self.three_quarter)):
            if sum(taps) != gain:
                raise ConfigError(f"{name} taps sum to {sum(taps)}, expected {gain}")
        if self.half != tuple(reversed(self.half)):
            raise ConfigError("half taps must be symmetric")
        if self.three_quarter != tuple(reversed(self.quarter)):
            raise ConfigError("three_quarter taps must mirror the quarter taps")

    def phase(self, frac: int) -> tuple[np.ndarray, int]:
        """Return (taps, first support offset) for a 1..3 quarter-pel phase."""
        if frac == 1:
            return np.asarray(self.quarter, dtype=np.int64), -3
        if frac == 2:
            return np.asarray(self.half, dtype=np.int64), -3
        if frac == 3:
            return np.asarray(self.three_quarter, dtype=np.int64), -2
        raise ConfigError(f"fractional phase must be 1..3, got {frac}")


LUMA_FILTERS = InterpFilterSet(
    half=(-1, 4, -11, 40, 40, -11, 4, -1),
    quarter=(-1, 4, -10, 58, 17, -5, 1),
    three_quarter=(1, -5, 17, 58, -10, 4, -1),
)

# widest support over all phases: 3 samples left/above, 4 right/below
_MARGIN_LO = 3
_MARGIN_HI = 4


def _block_size(size) -> tuple[int, int]:
    if np.isscalar(size):
        return int(size), int(size)
    w, h = size
    return int(w), int(h)


def gather_block(ref: np.ndarray, x0: int, y0: int, w: int, h: int) -> np.ndarray:
    """Copy a block with clamp (edge-replicating) addressing."""
    rows = np.clip(np.arange(y0, y0 + h), 0, ref.shape[0] - 1)
    cols = np.clip(np.arange(x0, x0 + w), 0, ref.shape[1] - 1)
    return ref[rows[:, None], cols[None, :]]


def _filter_cols(arr: np.ndarray, taps: np.ndarray, col0: int, width: int) -> np.ndarray:
    acc = taps[0] * arr[:, col0 : col0 + width]
    for k in range(1, len(taps)):
        acc += taps[k] * arr[:, col0 + k : col0 + k + width]
    return acc


def _filter_rows(arr: np.ndarray, taps: np.ndarray, row0: int, height: int) -> np.ndarray:
    acc = taps[0] * arr[row0 : row0 + height, :]
    for k in range(1, len(taps)):
        acc += taps[k] * arr[row0 + k : row0 + k + height, :]
    return acc


def interpolate_block(
    ref: np.ndarray,
    origin: tuple[int, int],
    size,
    mv: MotionVectorQ,
    filters: InterpFilterSet = LUMA_FILTERS,
) -> np.ndarray:
    """Motion-compensated prediction block for a quarter-pel motion vector.

    Sample (x, y) of the result is the reference sampled at
    (origin + (x, y) + mv/4); integer mv components bypass filtering in that
    dimension and the result is clamped to [0, 255].
    """
    ref = np.asarray(ref)
    x0, y0 = origin
    w, h = _block_size(size)
    fh, fw = ref.shape
    if not (0 <= x0 and x0 + w <= fw and 0 <= y0 and y0 + h <= fh):
        raise ShapeMismatchError(
            f"block origin {origin} size {w}x{h} outside {fw}x{fh} frame"
        )
    ix, fx = mv.x4 >> 2, mv.x4 & 3
    iy, fy = mv.y4 >> 2, mv.y4 & 3
    bx, by = x0 + ix, y0 + iy

    if fx == 0 and fy == 0:
        return gather_block(ref, bx, by, w, h).astype(np.uint8)

    shift = filters.norm_shift
    win = gather_block(
        ref, bx - _MARGIN_LO, by - _MARGIN_LO, w + _MARGIN_LO + _MARGIN_HI,
        h + _MARGIN_LO + _MARGIN_HI,
    ).astype(np.int64)

    if fy == 0:
        taps, start = filters.phase(fx)
        rows = win[_MARGIN_LO : _MARGIN_LO + h, :]
        acc = _filter_cols(rows, taps, _MARGIN_LO + start, w)
        out = (acc + (1 << (shift - 1))) >> shift
    elif fx == 0:
        taps, start = filters.phase(fy)
        cols = win[:, _MARGIN_LO : _MARGIN_LO + w]
        acc = _filter_rows(cols, taps, _MARGIN_LO + start, h)
        out = (acc + (1 << (shift - 1))) >> shift
    else:
        taps_x, start_x = filters.phase(fx)
        mid = _filter_cols(win, taps_x, _MARGIN_LO + start_x, w)  # full precision
        taps_y, start_y = filters.phase(fy)
        acc = _filter_rows(mid, taps_y, _MARGIN_LO + start_y, h)
        out = (acc + (1 << (2 * shift - 1))) >> (2 * shift)

    return np.clip(out, 0, 255).astype(np.uint8)
