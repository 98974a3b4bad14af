import numpy as np
import pytest
from hypothesis import settings

from deobs.trace_io import Trace, generate

settings.register_profile("default", deadline=None)
settings.load_profile("default")


def mixed_trace(total: int, seed: int, height: int = 84, width: int = 84) -> Trace:
    """Static/drift/noise segments stitched together with random episode breaks."""
    rng = np.random.default_rng(seed)
    pieces: list[np.ndarray] = []
    starts = {0}
    pos = 0
    while pos < total:
        length = min(int(rng.integers(40, 400)), total - pos)
        kind = rng.integers(0, 3)
        sub_seed = int(rng.integers(0, 2**31))
        if kind == 0:
            seg = generate("static", frames=length, seed=sub_seed, height=height, width=width)
        elif kind == 1:
            seg = generate("drift", frames=length, seed=sub_seed, height=height, width=width,
                           blob=int(rng.integers(3, 9)), velocity=int(rng.integers(1, 4)))
        else:
            seg = generate("noise", frames=length, seed=sub_seed, height=height, width=width,
                           rho=float(rng.uniform(0.0, 0.2)))
        pieces.append(seg.frames)
        starts.add(pos)
        pos += length
    # extra breaks not aligned with content changes
    for _ in range(max(1, total // 250)):
        starts.add(int(rng.integers(0, total)))
    return Trace(height, width, np.concatenate(pieces), tuple(sorted(starts)))


def random_frames(count: int, height: int, width: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.integers(0, 256, size=(count, height, width), dtype=np.uint8)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
