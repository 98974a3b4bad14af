"""Differential encoding of single grayscale frames.

A frame is a 2-D ``numpy.uint8`` array (height x width, both at most 256 so a
coordinate fits in one unsigned byte). The difference between two frames is
stored as a coordinate list of the changed pixels -- one (row, col) byte pair
plus one signed 16-bit value per entry, 4 bytes total -- unless that would be
larger than the frame itself, in which case the target frame is stored raw.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CorruptDiff, DimensionMismatch, InvalidConfig

MAX_SIDE = 256

BYTES_PER_ENTRY = 4  # row u8 + col u8 + value i16


@dataclass(frozen=True)
class SparseDiff:
    """Changed pixels in row-major order; vals are target minus base."""

    height: int
    width: int
    rows: np.ndarray  # uint8
    cols: np.ndarray  # uint8
    vals: np.ndarray  # int16, nonzero

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SparseDiff):
            return NotImplemented
        return (
            (self.height, self.width) == (other.height, other.width)
            and np.array_equal(self.rows, other.rows)
            and np.array_equal(self.cols, other.cols)
            and np.array_equal(self.vals, other.vals)
        )

    @property
    def n_entries(self) -> int:
        return len(self.vals)


@dataclass(frozen=True)
class DenseDiff:
    """Fallback: the full target frame, used when 4n would exceed H*W."""

    pixels: np.ndarray  # uint8 (H, W)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, DenseDiff):
            return NotImplemented
        return np.array_equal(self.pixels, other.pixels)


DiffRecord = SparseDiff | DenseDiff


def validate_frame(frame: np.ndarray) -> tuple[int, int]:
    """Check dtype/shape/size constraints and return (height, width)."""
    if not isinstance(frame, np.ndarray) or frame.dtype != np.uint8:
        raise DimensionMismatch(f"frame must be a uint8 array, got {type(frame).__name__}"
                                + (f" of dtype {frame.dtype}" if isinstance(frame, np.ndarray) else ""))
    if frame.ndim != 2:
        raise DimensionMismatch(f"frame must be 2-D, got shape {frame.shape}")
    h, w = frame.shape
    if not (1 <= h <= MAX_SIDE and 1 <= w <= MAX_SIDE):
        raise InvalidConfig(f"frame sides must be in 1..{MAX_SIDE}, got {h}x{w}")
    return h, w


def encode_diff(base: np.ndarray, target: np.ndarray) -> DiffRecord:
    """Encode ``target - base``.

    Returns a SparseDiff with exactly the differing pixels (sorted row-major,
    values nonzero) when 4n <= H*W, otherwise a DenseDiff holding a copy of
    ``target``. Pure and deterministic.
    """
    h, w = validate_frame(base)
    ht, wt = validate_frame(target)
    if (h, w) != (ht, wt):
        raise DimensionMismatch(f"base is {h}x{w} but target is {ht}x{wt}")

    delta = target.astype(np.int16) - base.astype(np.int16)
    rows, cols = np.nonzero(delta)  # C order: row-major ascending
    n = len(rows)
    if BYTES_PER_ENTRY * n > h * w:
        return DenseDiff(pixels=target.copy())
    return SparseDiff(
        height=h,
        width=w,
        rows=rows.astype(np.uint8),
        cols=cols.astype(np.uint8),
        vals=delta[rows, cols],
    )


def decode_diff(base: np.ndarray, diff: DiffRecord) -> np.ndarray:
    """Reconstruct the target frame: base plus the recorded deltas.

    Raises CorruptDiff if a coordinate falls outside the base frame or a
    reconstructed pixel leaves [0, 255].
    """
    h, w = validate_frame(base)
    if isinstance(diff, DenseDiff):
        if diff.pixels.shape != (h, w):
            raise CorruptDiff(f"dense record is {diff.pixels.shape}, base is {(h, w)}")
        return diff.pixels.copy()

    if (diff.height, diff.width) != (h, w):
        raise CorruptDiff(f"sparse record is {diff.height}x{diff.width}, base is {h}x{w}")
    out = base.astype(np.int16)
    rows = diff.rows.astype(np.intp)
    cols = diff.cols.astype(np.intp)
    if len(rows) and (rows.max() >= h or cols.max() >= w):
        raise CorruptDiff("coordinate outside frame bounds")
    out[rows, cols] += diff.vals
    if len(rows):
        patched = out[rows, cols]
        if patched.min() < 0 or patched.max() > 255:
            raise CorruptDiff("reconstructed pixel outside [0, 255]")
    return out.astype(np.uint8)


def payload_bytes(diff: DiffRecord) -> int:
    """Model byte cost of a record: 4n for sparse, H*W for dense."""
    if isinstance(diff, DenseDiff):
        return int(diff.pixels.size)
    return BYTES_PER_ENTRY * diff.n_entries
