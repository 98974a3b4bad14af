"""Closed-form memory model for the compressed observation store.

The model counts, in bytes: the raw keyframes (H*W per keyframe slot d), an
8-byte pointer per diff slot (d*(f-1) of them), 4 bytes per stored sparse
entry (4N total, a dense fallback counting as H*W), and 4 bytes per frame-
stack pointer (capacity * f of them). ``compression_factor`` divides the
uncompressed cost H*W*capacity*f by that total.

``simplified_factor`` reproduces a commonly quoted 84x84 shortcut formula
that drops the 4*capacity*f index term; it therefore reads slightly high.
``compression_factor`` is the authoritative one.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import InvalidConfig


@dataclass(frozen=True)
class AnalyticsReport:
    """Memory-model snapshot of one buffer configuration."""

    capacity: int
    d: int
    f: int
    pixels_per_image: int
    N: float  # resident sparse entries, dense records counted at H*W/4
    n: float  # mean entries per diff slot
    phi: float  # n as a fraction of pixels_per_image
    model_bytes: int
    uncompressed_bytes: int
    factor: float

    CSV_HEADER = "capacity,d,f,pixels_per_image,N,n,phi,model_bytes,uncompressed_bytes,factor"

    def csv_row(self) -> str:
        return ",".join(
            repr(v) if isinstance(v, float) else str(v)
            for v in (
                self.capacity, self.d, self.f, self.pixels_per_image,
                self.N, self.n, self.phi,
                self.model_bytes, self.uncompressed_bytes, self.factor,
            )
        )


def model_bytes(pixels_per_image: int, d: int, f: int, N: float, capacity: int) -> float:
    """Total model bytes for a store of d keyframes and N sparse entries.

    Exact (integer arithmetic) when N is integral.
    """
    if min(pixels_per_image, d, f, capacity) < 0 or N < 0:
        raise InvalidConfig("all model inputs must be nonnegative")
    if capacity != d * f:
        raise InvalidConfig(f"capacity {capacity} != d*f = {d * f}")
    return pixels_per_image * d + 8 * d * (f - 1) + 4 * N + 4 * capacity * f


def compression_factor(pixels_per_image: int, capacity: int, f: int, N: float) -> float:
    """Uncompressed bytes over model bytes. Requires capacity % f == 0."""
    if f < 1 or capacity < 1:
        raise InvalidConfig("capacity and f must be positive")
    if capacity % f != 0:
        raise InvalidConfig(f"capacity {capacity} not a multiple of f={f}")
    d = capacity // f
    total = model_bytes(pixels_per_image, d, f, N, capacity)
    if total <= 0:
        raise InvalidConfig("model bytes must be positive")
    return pixels_per_image * capacity * f / total


def simplified_factor(f: int, n: float) -> float:
    """84x84 shortcut formula in terms of f and mean entries n.

    Quoted verbatim; omits the per-step index cost that compression_factor
    includes, so for the same (f, n) the two disagree by exactly 4f bytes per
    stored step.
    """
    if f < 1 or n < 0:
        raise InvalidConfig("need f >= 1 and n >= 0")
    return 1764 * f / ((1762 - n) / f + 2 + n)


def sweep(f_values: list[int], phi_values: list[float], pixels_per_image: int) -> list[tuple[int, float, float]]:
    """Grid of exact compression factors, one row per (f, phi) pair.

    phi is converted to a mean entry count n = phi * pixels_per_image; the
    factor does not depend on capacity, so each cell is evaluated at d = 1.
    """
    if not f_values or not phi_values:
        raise InvalidConfig("f and phi grids must be nonempty")
    table = []
    for f in f_values:
        for phi in phi_values:
            if not 0.0 <= phi <= 1.0:
                raise InvalidConfig(f"phi must be in [0, 1], got {phi}")
            n = phi * pixels_per_image
            factor = compression_factor(pixels_per_image, f, f, (f - 1) * n)
            table.append((f, phi, factor))
    return table
