"""File formats and synthetic trace generators.

Two little-endian binary formats (documented field-by-field in the README):

* trace files  -- magic ``DEOBSTR1``: raw frame sequences with episode
  start indices, the interchange format for generators and the CLI.
* buffer files -- magic ``DEOBSBF1``: a serialized replay buffer (keyframes,
  diff records, pointer rows, metadata rings). Serialization is canonical:
  the same store always produces the same bytes, and a loaded store is
  observationally identical (get, valid_range, memory_bytes, sampling).

Generators are pure functions of (mode, params, seed) and exist so tests and
benchmarks are hermetic and reproducible.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import InvalidConfig, InvalidParams, MalformedFile, VersionMismatch
from .frame_codec import MAX_SIDE, DenseDiff, DiffRecord, SparseDiff
from .obs_store import Mode, ObsStore, StoreConfig
from .replay_buffer import ReplayBuffer

TRACE_MAGIC = b"DEOBSTR1"
BUFFER_MAGIC = b"DEOBSBF1"
BUFFER_VERSION = 1
_DENSE_FLAG = 0x8000_0000


@dataclass(frozen=True)
class Trace:
    """An in-memory observation sequence with episode boundaries."""

    height: int
    width: int
    frames: np.ndarray  # (T, H, W) uint8
    episode_starts: tuple[int, ...]

    def __post_init__(self) -> None:
        f = self.frames
        if not isinstance(f, np.ndarray) or f.dtype != np.uint8 or f.ndim != 3:
            raise InvalidParams("frames must be a (T, H, W) uint8 array")
        if len(f) < 1:
            raise InvalidParams("a trace needs at least one frame")
        if f.shape[1:] != (self.height, self.width):
            raise InvalidParams(f"frames are {f.shape[1:]}, header says {(self.height, self.width)}")
        for side in (self.height, self.width):
            if not (1 <= side <= MAX_SIDE):
                raise InvalidParams(f"frame sides must be in 1..{MAX_SIDE}, got {side}")
        starts = self.episode_starts
        if not starts or starts[0] != 0:
            raise InvalidParams("episode_starts must begin with 0")
        if any(b <= a for a, b in zip(starts, starts[1:])):
            raise InvalidParams("episode_starts must be strictly increasing")
        if starts[-1] >= len(f):
            raise InvalidParams("episode start beyond last frame")

    def __len__(self) -> int:
        return len(self.frames)

    def start_flags(self) -> np.ndarray:
        """Per-step boolean episode_start flags."""
        flags = np.zeros(len(self.frames), dtype=bool)
        flags[list(self.episode_starts)] = True
        return flags


# -- trace files -----------------------------------------------------------


def write_trace(trace: Trace, destination: str | Path) -> None:
    starts = np.asarray(trace.episode_starts, dtype="<u4")
    header = TRACE_MAGIC + struct.pack(
        "<IIII", trace.width, trace.height, len(trace.frames), len(starts)
    )
    Path(destination).write_bytes(header + starts.tobytes() + trace.frames.tobytes())


def read_trace(source: str | Path) -> Trace:
    data = Path(source).read_bytes()
    if len(data) < 24:
        raise MalformedFile("trace file shorter than its fixed header")
    if data[:8] != TRACE_MAGIC:
        raise MalformedFile(f"bad trace magic {data[:8]!r}")
    width, height, frame_count, episode_count = struct.unpack_from("<IIII", data, 8)
    if frame_count < 1:
        raise MalformedFile("trace declares zero frames")
    if not (1 <= width <= MAX_SIDE and 1 <= height <= MAX_SIDE):
        raise MalformedFile(f"trace declares invalid frame size {height}x{width}")
    expected = 24 + 4 * episode_count + frame_count * height * width
    if len(data) != expected:
        raise MalformedFile(f"trace file is {len(data)} bytes, header implies {expected}")
    starts = np.frombuffer(data, dtype="<u4", count=episode_count, offset=24)
    frames = np.frombuffer(
        data, dtype=np.uint8, count=frame_count * height * width, offset=24 + 4 * episode_count
    ).reshape(frame_count, height, width)
    try:
        return Trace(
            height=height,
            width=width,
            frames=frames.copy(),
            episode_starts=tuple(int(s) for s in starts),
        )
    except InvalidParams as exc:
        raise MalformedFile(f"trace header invariants violated: {exc}") from exc


# -- generators -------------------------------------------------------------


class GenMode(Enum):
    STATIC = "static"
    DRIFT = "drift"
    NOISE = "noise"
    EPISODIC = "episodic"


def generate(
    mode: GenMode | str,
    *,
    frames: int,
    seed: int,
    height: int = 84,
    width: int = 84,
    rho: float | None = None,
    blob: int | None = None,
    velocity: int | None = None,
    min_len: int | None = None,
    max_len: int | None = None,
) -> Trace:
    """Deterministic synthetic trace for the given mode and seed.

    static:   one random frame repeated (diffs are empty).
    drift:    a square blob bouncing around a black background; per-step
              changed pixels never exceed 2 * blob^2.
    noise:    each pixel changes to a different value with probability rho,
              so the expected per-step changed fraction is exactly rho.
    episodic: drift restarted with fresh blob state each episode; episode
              lengths drawn uniformly from [min_len, max_len].
    """
    mode = GenMode(mode)
    if frames < 1:
        raise InvalidParams("frames must be >= 1")
    rng = np.random.default_rng(seed)

    if mode is GenMode.STATIC:
        base = rng.integers(0, 256, size=(height, width), dtype=np.uint8)
        stack = np.repeat(base[None, :, :], frames, axis=0)
        return Trace(height, width, stack, (0,))

    if mode is GenMode.NOISE:
        if rho is None or not (0.0 <= rho <= 1.0):
            raise InvalidParams("noise mode needs rho in [0, 1]")
        out = np.empty((frames, height, width), dtype=np.uint8)
        out[0] = rng.integers(0, 256, size=(height, width), dtype=np.uint8)
        for t in range(1, frames):
            mask = rng.random((height, width)) < rho
            jump = rng.integers(1, 256, size=(height, width), dtype=np.int32)
            bumped = (out[t - 1].astype(np.int32) + jump) % 256
            out[t] = np.where(mask, bumped, out[t - 1]).astype(np.uint8)
        return Trace(height, width, out, (0,))

    if mode is GenMode.DRIFT:
        stack = _drift_frames(rng, frames, height, width, blob, velocity)
        return Trace(height, width, stack, (0,))

    # episodic: drift segments with re-randomized blob state
    if min_len is None or max_len is None or not (1 <= min_len <= max_len):
        raise InvalidParams("episodic mode needs 1 <= min_len <= max_len")
    pieces: list[np.ndarray] = []
    starts: list[int] = []
    total = 0
    while total < frames:
        length = min(int(rng.integers(min_len, max_len + 1)), frames - total)
        starts.append(total)
        pieces.append(_drift_frames(rng, length, height, width, blob, velocity))
        total += length
    return Trace(height, width, np.concatenate(pieces), tuple(starts))


def _drift_frames(
    rng: np.random.Generator,
    frames: int,
    height: int,
    width: int,
    blob: int | None,
    velocity: int | None,
) -> np.ndarray:
    blob = 5 if blob is None else blob
    velocity = 1 if velocity is None else velocity
    if blob < 1 or blob > min(height, width):
        raise InvalidParams(f"blob must be in 1..{min(height, width)}")
    if velocity < 1:
        raise InvalidParams("velocity must be >= 1")
    value = int(rng.integers(64, 256))
    max_y, max_x = height - blob, width - blob
    y = int(rng.integers(0, max_y + 1))
    x = int(rng.integers(0, max_x + 1))
    dy = velocity * (1 if rng.integers(0, 2) else -1)
    dx = velocity * (1 if rng.integers(0, 2) else -1)
    out = np.zeros((frames, height, width), dtype=np.uint8)
    for t in range(frames):
        out[t, y : y + blob, x : x + blob] = value
        ny, nx = y + dy, x + dx
        if not 0 <= ny <= max_y:
            dy = -dy
            ny = min(max(y + dy, 0), max_y)
        if not 0 <= nx <= max_x:
            dx = -dx
            nx = min(max(x + dx, 0), max_x)
        y, x = ny, nx
    return out


# -- buffer files ------------------------------------------------------------


def save_buffer(buffer: ReplayBuffer, destination: str | Path) -> None:
    """Serialize a replay buffer; canonical (same store -> same bytes)."""
    if not isinstance(buffer, ReplayBuffer):
        raise InvalidConfig("only compressed replay buffers have a file format")
    store = buffer.store
    cfg = store.config
    cap, f = cfg.capacity_steps, cfg.frame_stack
    head = store.head
    parts = [
        BUFFER_MAGIC,
        struct.pack(
            "<IIIIIIII",
            BUFFER_VERSION,
            cfg.width,
            cfg.height,
            f,
            cap,
            head & 0xFFFF_FFFF,
            head >> 32,
            0 if cfg.mode is Mode.FULL else 1,
        ),
        store.obs.tobytes(),
    ]
    if cfg.mode is Mode.FULL:
        for slot_records in store.sparse_obs:
            for record in slot_records:
                parts.append(_pack_record(record))
    # pointer rows as deltas below head (exact for any 64-bit head)
    deltas = np.zeros((cap, f), dtype="<u4")
    for i in range(max(0, head - cap), head):
        deltas[i % cap] = head - store.obs_inds[i % cap]
    parts.append(deltas.tobytes())
    parts.append(struct.pack("<I", buffer.action_width))
    parts.append(buffer.actions.tobytes())
    parts.append(buffer.rewards.astype("<f8").tobytes())
    parts.append(buffer.dones.astype(np.uint8).tobytes())
    parts.append(buffer.episode_starts.astype(np.uint8).tobytes())
    Path(destination).write_bytes(b"".join(parts))


def _pack_record(record: DiffRecord | None) -> bytes:
    if record is None:
        return struct.pack("<I", 0)
    if isinstance(record, DenseDiff):
        return struct.pack("<I", _DENSE_FLAG) + record.pixels.tobytes()
    n = record.n_entries
    packed = np.empty((n, 4), dtype=np.uint8)
    packed[:, 0] = record.rows
    packed[:, 1] = record.cols
    packed[:, 2:] = record.vals.astype("<i2").view(np.uint8).reshape(n, 2)
    return struct.pack("<I", n) + packed.tobytes()


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.offset = 0

    def take(self, count: int, what: str) -> bytes:
        if self.offset + count > len(self.data):
            raise MalformedFile(f"truncated while reading {what}")
        out = self.data[self.offset : self.offset + count]
        self.offset += count
        return out

    def u32(self, what: str) -> int:
        return struct.unpack("<I", self.take(4, what))[0]

    def done(self) -> None:
        if self.offset != len(self.data):
            raise MalformedFile(f"{len(self.data) - self.offset} trailing bytes")


def load_buffer(source: str | Path) -> ReplayBuffer:
    data = Path(source).read_bytes()
    if len(data) < 8 or data[:8] != BUFFER_MAGIC:
        raise MalformedFile(f"bad buffer magic {data[:8]!r}")
    reader = _Reader(data)
    reader.take(8, "magic")
    version = reader.u32("version")
    if version != BUFFER_VERSION:
        raise VersionMismatch(f"buffer file version {version}, supported: {BUFFER_VERSION}")
    width = reader.u32("width")
    height = reader.u32("height")
    f = reader.u32("frame_stack")
    cap = reader.u32("capacity")
    head = reader.u32("head_low") | (reader.u32("head_high") << 32)
    mode_flag = reader.u32("mode")
    if mode_flag not in (0, 1):
        raise MalformedFile(f"unknown mode flag {mode_flag}")
    try:
        config = StoreConfig(
            capacity_steps=cap,
            frame_stack=f,
            height=height,
            width=width,
            mode=Mode.FULL if mode_flag == 0 else Mode.HALF,
        )
    except InvalidConfig as exc:
        raise MalformedFile(f"buffer header invalid: {exc}") from exc

    d = config.keyframe_slots
    frame_slots = d if config.mode is Mode.FULL else cap
    obs = np.frombuffer(
        reader.take(frame_slots * height * width, "keyframes"), dtype=np.uint8
    ).reshape(frame_slots, height, width).copy()

    sparse_obs: list[list[DiffRecord | None]] = []
    if config.mode is Mode.FULL:
        for _ in range(d):
            sparse_obs.append([_unpack_record(reader, height, width) for _ in range(f - 1)])

    deltas = np.frombuffer(reader.take(cap * f * 4, "pointer rows"), dtype="<u4").reshape(cap, f)
    obs_inds = np.zeros((cap, f), dtype=np.int64)
    for i in range(max(0, head - cap), head):
        row = head - deltas[i % cap].astype(np.int64)
        if row[-1] != i or row.min() < 0 or np.any(np.diff(row) < 0):
            raise MalformedFile(f"pointer row for step {i} is inconsistent")
        obs_inds[i % cap] = row

    action_width = reader.u32("action_width")
    actions = np.frombuffer(reader.take(cap * action_width, "actions"), dtype=np.uint8)
    rewards = np.frombuffer(reader.take(cap * 8, "rewards"), dtype="<f8")
    dones = _unpack_flags(reader.take(cap, "dones"), "dones")
    episode_starts = _unpack_flags(reader.take(cap, "episode_starts"), "episode_starts")
    reader.done()

    store = ObsStore._restore(config, head, obs, sparse_obs, obs_inds)
    return ReplayBuffer._restore(
        store,
        action_width,
        actions.reshape(cap, action_width).copy(),
        rewards.astype(np.float64).copy(),
        dones,
        episode_starts,
    )


def _unpack_record(reader: _Reader, height: int, width: int) -> DiffRecord | None:
    count = reader.u32("diff record count")
    if count & _DENSE_FLAG:
        if count != _DENSE_FLAG:
            raise MalformedFile("dense diff record with nonzero entry count")
        pixels = np.frombuffer(reader.take(height * width, "dense diff"), dtype=np.uint8)
        return DenseDiff(pixels=pixels.reshape(height, width).copy())
    if count == 0:
        return None
    if 4 * count > height * width:
        raise MalformedFile(f"sparse record of {count} entries should have been dense")
    raw = np.frombuffer(reader.take(4 * count, "sparse diff"), dtype=np.uint8).reshape(count, 4)
    rows = raw[:, 0].copy()
    cols = raw[:, 1].copy()
    vals = raw[:, 2:].copy().view("<i2").reshape(count).astype(np.int16)
    if rows.max() >= height or cols.max() >= width:
        raise MalformedFile("diff coordinate outside frame")
    order = rows.astype(np.int64) * width + cols.astype(np.int64)
    if np.any(np.diff(order) <= 0):
        raise MalformedFile("diff entries not strictly row-major sorted")
    if np.any(vals == 0) or vals.min() < -255 or vals.max() > 255:
        raise MalformedFile("diff value zero or outside [-255, 255]")
    return SparseDiff(height=height, width=width, rows=rows, cols=cols, vals=vals)


def _unpack_flags(raw: bytes, what: str) -> np.ndarray:
    arr = np.frombuffer(raw, dtype=np.uint8)
    if arr.size and arr.max() > 1:
        raise MalformedFile(f"{what} flag byte not 0/1")
    return arr.astype(bool)
