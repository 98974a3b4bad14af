"""Keyframe-blocked compressed storage for a stream of frames.

Steps are grouped into blocks of ``f`` (the frame-stack length). The first
step of each block is kept raw as the block's keyframe; the remaining f-1
steps are kept as diff records against that keyframe. A per-step pointer row
lists the f step indices making up the stacked state at that step, repeating
the episode's first frame while the episode is younger than f. Keyframes,
diff slots, pointer rows and episode bookkeeping all live in rings, so old
blocks are overwritten in place once capacity wraps.

In half mode the diff machinery is disabled: every frame is stored raw and
only the pointer rows (frame deduplication across stacked states) save
memory.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import (
    DimensionMismatch,
    EpisodeDiscipline,
    Evicted,
    InvalidConfig,
    NotYetWritten,
    OutOfOrderSet,
)
from .frame_codec import (
    MAX_SIDE,
    DiffRecord,
    encode_diff,
    decode_diff,
    payload_bytes,
    validate_frame,
)


class Mode(Enum):
    FULL = "full"  # pointer rows + diff records
    HALF = "half"  # pointer rows only, all frames raw


@dataclass(frozen=True)
class StoreConfig:
    capacity_steps: int
    frame_stack: int
    height: int
    width: int
    mode: Mode = Mode.FULL

    def __post_init__(self) -> None:
        if self.frame_stack < 1:
            raise InvalidConfig("frame_stack must be >= 1")
        if self.capacity_steps < 1:
            raise InvalidConfig("capacity_steps must be >= 1")
        if self.capacity_steps % self.frame_stack != 0:
            raise InvalidConfig(
                f"capacity_steps {self.capacity_steps} not a multiple of "
                f"frame_stack {self.frame_stack}"
            )
        for side in (self.height, self.width):
            if not (1 <= side <= MAX_SIDE):
                raise InvalidConfig(f"frame sides must be in 1..{MAX_SIDE}, got {side}")
        if not isinstance(self.mode, Mode):
            raise InvalidConfig(f"mode must be a Mode, got {self.mode!r}")

    @property
    def keyframe_slots(self) -> int:
        """d: one keyframe per block in full mode, every step raw in half."""
        return self.capacity_steps // self.frame_stack


@dataclass(frozen=True)
class MemoryBreakdown:
    """Model byte counts; total is always the sum of the four parts."""

    keyframe_bytes: int
    sparse_overhead_bytes: int
    sparse_payload_bytes: int
    index_bytes: int

    @property
    def total_bytes(self) -> int:
        return (
            self.keyframe_bytes
            + self.sparse_overhead_bytes
            + self.sparse_payload_bytes
            + self.index_bytes
        )


class ObsStore:
    """Single-writer compressed frame store with stacked-state reads."""

    def __init__(self, config: StoreConfig):
        self.config = config
        cap, f = config.capacity_steps, config.frame_stack
        h, w = config.height, config.width
        self.head = 0
        frame_slots = config.keyframe_slots if config.mode is Mode.FULL else cap
        self.obs = np.zeros((frame_slots, h, w), dtype=np.uint8)
        # diff slot (block_slot, k) holds the record for the block's (k+1)-th step
        self.sparse_obs: list[list[DiffRecord | None]] = [
            [None] * (f - 1) for _ in range(config.keyframe_slots)
        ] if config.mode is Mode.FULL else []
        self.obs_inds = np.zeros((cap, f), dtype=np.int64)
        self._episode_start = np.zeros(cap, dtype=np.int64)
        self._block_of_slot = np.full(config.keyframe_slots, -1, dtype=np.int64)
        self._sparse_payload = 0

    def __len__(self) -> int:
        return min(self.head, self.config.capacity_steps)

    # -- writing ---------------------------------------------------------

    def append(self, frame: np.ndarray, episode_start: bool) -> int:
        """Store the next frame, returning its global step index."""
        cfg = self.config
        h, w = validate_frame(frame)
        if (h, w) != (cfg.height, cfg.width):
            raise DimensionMismatch(
                f"frame is {h}x{w}, store configured for {cfg.height}x{cfg.width}"
            )
        i = self.head
        if i == 0 and not episode_start:
            raise EpisodeDiscipline("first frame must start an episode")
        cap, f = cfg.capacity_steps, cfg.frame_stack
        start = i if episode_start else int(self._episode_start[(i - 1) % cap])
        self.obs_inds[i % cap] = self._pointer_row(i, start)
        self._episode_start[i % cap] = start

        if cfg.mode is Mode.FULL:
            block, pos = divmod(i, f)
            slot = block % cfg.keyframe_slots
            if pos == 0:
                self._evict_block(slot)
                self._block_of_slot[slot] = block
                self.obs[slot] = frame
            else:
                record = encode_diff(self.obs[slot], frame)
                self.sparse_obs[slot][pos - 1] = record
                self._sparse_payload += payload_bytes(record)
        else:
            self.obs[i % cap] = frame
        self.head += 1
        return i

    def set(self, i: int, state: np.ndarray) -> None:
        """Append the newest frame of a stacked state (setter-style API).

        The episode flag is inferred: a state whose f frames are all
        identical marks an episode start. With f == 1 every state looks
        like that, so use append() when explicit control matters.
        """
        if i != self.head:
            raise OutOfOrderSet(f"set index {i} != head {self.head}")
        state = self._check_state(state)
        episode_start = bool((state == state[0]).all())
        self.append(state[-1], episode_start)

    def _pointer_row(self, i: int, start: int) -> np.ndarray:
        f = self.config.frame_stack
        in_episode = i - start + 1
        if in_episode >= f:
            return np.arange(i - f + 1, i + 1, dtype=np.int64)
        row = np.empty(f, dtype=np.int64)
        row[: f - in_episode] = start
        row[f - in_episode:] = np.arange(start, i + 1, dtype=np.int64)
        return row

    def _evict_block(self, slot: int) -> None:
        if self._block_of_slot[slot] < 0:
            return
        diffs = self.sparse_obs[slot]
        for k, record in enumerate(diffs):
            if record is not None:
                self._sparse_payload -= payload_bytes(record)
                diffs[k] = None

    def _check_state(self, state: np.ndarray) -> np.ndarray:
        cfg = self.config
        expected = (cfg.frame_stack, cfg.height, cfg.width)
        if not isinstance(state, np.ndarray) or state.dtype != np.uint8 or state.shape != expected:
            raise DimensionMismatch(f"state must be uint8 of shape {expected}")
        return state

    # -- reading ---------------------------------------------------------

    def get(self, i: int) -> np.ndarray:
        """Decode the stacked state at step i as a (f, H, W) uint8 array."""
        if i >= self.head:
            raise NotYetWritten(f"step {i} >= head {self.head}")
        valid = self.valid_range()
        if valid is None or i < valid[0]:
            raise Evicted(f"step {i} was overwritten (valid range: {valid})")
        row = self.obs_inds[i % self.config.capacity_steps]
        return np.stack([self._decode_step(int(j)) for j in row])

    def _decode_step(self, j: int) -> np.ndarray:
        cfg = self.config
        if cfg.mode is Mode.HALF:
            return self.obs[j % cfg.capacity_steps]
        block, pos = divmod(j, cfg.frame_stack)
        slot = block % cfg.keyframe_slots
        keyframe = self.obs[slot]
        if pos == 0:
            return keyframe
        record = self.sparse_obs[slot][pos - 1]
        if record is None:
            # residency guarantees the step was written, so a missing record
            # can only be a loaded empty diff: the frame equals its keyframe
            return keyframe
        return decode_diff(keyframe, record)

    def valid_range(self) -> tuple[int, int] | None:
        """(lo, hi) of steps whose pointer rows are fully resident, or None."""
        if self.head == 0:
            return None
        hi = self.head - 1
        oldest = self._oldest_resident()
        f = self.config.frame_stack
        cap = self.config.capacity_steps
        for i in range(oldest, hi + 1):
            start = int(self._episode_start[i % cap])
            if max(start, i - f + 1) >= oldest:
                return i, hi
        return None

    def _oldest_resident(self) -> int:
        cfg = self.config
        if cfg.mode is Mode.HALF:
            return max(0, self.head - cfg.capacity_steps)
        newest_block = (self.head - 1) // cfg.frame_stack
        return max(0, (newest_block - cfg.keyframe_slots + 1) * cfg.frame_stack)

    # -- accounting ------------------------------------------------------

    def memory_bytes(self) -> MemoryBreakdown:
        """Model byte counts (pre-allocated arrays count at capacity)."""
        cfg = self.config
        pixels = cfg.height * cfg.width
        cap, f, d = cfg.capacity_steps, cfg.frame_stack, cfg.keyframe_slots
        if cfg.mode is Mode.HALF:
            return MemoryBreakdown(
                keyframe_bytes=pixels * cap,
                sparse_overhead_bytes=0,
                sparse_payload_bytes=0,
                index_bytes=4 * cap * f,
            )
        return MemoryBreakdown(
            keyframe_bytes=pixels * d,
            sparse_overhead_bytes=8 * d * (f - 1),
            sparse_payload_bytes=self._sparse_payload,
            index_bytes=4 * cap * f,
        )

    # -- restore (used by the file loader) --------------------------------

    @classmethod
    def _restore(
        cls,
        config: StoreConfig,
        head: int,
        obs: np.ndarray,
        sparse_obs: list[list[DiffRecord | None]],
        obs_inds: np.ndarray,
    ) -> "ObsStore":
        store = cls(config)
        store.head = head
        store.obs = obs
        store.obs_inds = obs_inds
        cap, f, d = config.capacity_steps, config.frame_stack, config.keyframe_slots
        if config.mode is Mode.FULL:
            store.sparse_obs = sparse_obs
            store._sparse_payload = sum(
                payload_bytes(r) for row in sparse_obs for r in row if r is not None
            )
            if head > 0:
                newest_block = (head - 1) // f
                for slot in range(d):
                    block = newest_block - ((newest_block - slot) % d)
                    if block >= 0 and block * f < head:
                        store._block_of_slot[slot] = block
        # A row's first pointer is max(episode start, i-f+1), which reproduces
        # identical future rows and validity checks as the true start.
        for i in range(max(0, head - cap), head):
            store._episode_start[i % cap] = store.obs_inds[i % cap][0]
        return store
