"""Uncompressed reference buffer used for verification and as a baseline.

States come from a plain frame-stack shift register: an episode start fills
the stack with the new frame, every later step shifts one frame in. Nothing
is diffed or deduplicated and the full frame history is retained, so this is
reference quality, not memory-bounded. With ``mirror_eviction`` the buffer
tracks which steps the compressed store would have overwritten (whole
keyframe blocks in full mode, single slots in half mode) and reports the
same valid range; without it, it behaves as a plain uncompressed ring.

Sampling mirrors ReplayBuffer exactly: fresh PCG64 per call, same draw
procedure, so equal contents and seeds give bit-equal batches.
"""

from __future__ import annotations

import numpy as np

from .analytics import AnalyticsReport
from .errors import (
    DimensionMismatch,
    EmptyBuffer,
    EpisodeDiscipline,
    Evicted,
    InvalidConfig,
    NoValidTransitions,
    NotYetWritten,
)
from .obs_store import Mode, StoreConfig
from .replay_buffer import Batch, TransitionMeta
from .frame_codec import validate_frame


class BaselineStore:
    """Frame-stack states via shift register over a full frame history."""

    def __init__(self, config: StoreConfig, mirror_eviction: bool = True):
        self.config = config
        self.mirror_eviction = mirror_eviction
        self.frames: list[np.ndarray] = []
        self.stack_refs: list[tuple[int, ...]] = []  # per step: frame indices in the stack
        self.head = 0
        self._first_alive = 0  # first step not overwritten in the mirrored store

    def __len__(self) -> int:
        return min(self.head, self.config.capacity_steps)

    def append(self, frame: np.ndarray, episode_start: bool) -> int:
        cfg = self.config
        h, w = validate_frame(frame)
        if (h, w) != (cfg.height, cfg.width):
            raise DimensionMismatch(
                f"frame is {h}x{w}, store configured for {cfg.height}x{cfg.width}"
            )
        i = self.head
        if i == 0 and not episode_start:
            raise EpisodeDiscipline("first frame must start an episode")
        self.frames.append(frame.copy())
        if episode_start:
            refs = (i,) * cfg.frame_stack
        else:
            refs = self.stack_refs[i - 1][1:] + (i,)
        self.stack_refs.append(refs)
        self.head += 1
        self._mark_overwritten(i)
        return i

    def _mark_overwritten(self, i: int) -> None:
        cfg = self.config
        if not self.mirror_eviction or cfg.mode is Mode.HALF:
            # half mode and the plain ring overwrite one slot per step
            self._first_alive = max(0, self.head - cfg.capacity_steps)
            return
        f, d = cfg.frame_stack, cfg.keyframe_slots
        if i % f == 0:
            block = i // f
            if block >= d:
                self._first_alive = (block - d + 1) * f

    def get(self, i: int) -> np.ndarray:
        if i >= self.head:
            raise NotYetWritten(f"step {i} >= head {self.head}")
        valid = self.valid_range()
        if valid is None or i < valid[0]:
            raise Evicted(f"step {i} was overwritten (valid range: {valid})")
        return np.stack([self.frames[j] for j in self.stack_refs[i]])

    def valid_range(self) -> tuple[int, int] | None:
        if self.head == 0:
            return None
        hi = self.head - 1
        if not self.mirror_eviction:
            return max(0, self.head - self.config.capacity_steps), hi
        for i in range(self._first_alive, hi + 1):
            if min(self.stack_refs[i]) >= self._first_alive:
                return i, hi
        return None


class BaselineReplayBuffer:
    """Replay buffer over BaselineStore; same API surface as ReplayBuffer."""

    def __init__(
        self,
        config: StoreConfig,
        action_width: int = 0,
        mirror_eviction: bool = True,
    ):
        if action_width < 0:
            raise InvalidConfig("action_width must be >= 0")
        self.config = config
        self.action_width = action_width
        self.store = BaselineStore(config, mirror_eviction=mirror_eviction)
        self._actions: list[bytes] = []
        self._rewards: list[float] = []
        self._dones: list[bool] = []
        self._episode_starts: list[bool] = []

    def __len__(self) -> int:
        return len(self.store)

    @property
    def head(self) -> int:
        return self.store.head

    def add(self, frame: np.ndarray, meta: TransitionMeta, episode_start: bool) -> int:
        if len(meta.action) != self.action_width:
            raise DimensionMismatch(
                f"action is {len(meta.action)} bytes, buffer expects {self.action_width}"
            )
        if self._dones and self._dones[-1] and not episode_start:
            raise EpisodeDiscipline("previous step was terminal; episode_start required")
        i = self.store.append(frame, episode_start)
        self._actions.append(bytes(meta.action))
        self._rewards.append(float(meta.reward))
        self._dones.append(bool(meta.done))
        self._episode_starts.append(bool(episode_start))
        return i

    def get(self, i: int) -> np.ndarray:
        return self.store.get(i)

    def valid_range(self) -> tuple[int, int] | None:
        return self.store.valid_range()

    def sample_states(self, batch_size: int, seed: int) -> Batch:
        lo, hi = self._require_valid(batch_size)
        rng = np.random.default_rng(seed)
        indices = rng.integers(lo, hi + 1, size=batch_size, dtype=np.int64)
        return self._gather(indices, with_next=False)

    def sample_transitions(self, batch_size: int, seed: int) -> Batch:
        lo, hi = self._require_valid(batch_size)
        eligible = np.asarray(
            [
                i
                for i in range(lo, hi)
                if not (self._episode_starts[i + 1] and not self._dones[i])
            ],
            dtype=np.int64,
        )
        if len(eligible) == 0:
            raise NoValidTransitions("no step has a resident, same-episode-or-reset successor")
        rng = np.random.default_rng(seed)
        positions = rng.integers(0, len(eligible), size=batch_size, dtype=np.int64)
        return self._gather(eligible[positions], with_next=True)

    def _require_valid(self, batch_size: int) -> tuple[int, int]:
        if batch_size < 1:
            raise InvalidConfig("batch_size must be >= 1")
        valid = self.valid_range()
        if valid is None:
            raise EmptyBuffer("no valid steps to sample")
        return valid

    def _gather(self, indices: np.ndarray, with_next: bool) -> Batch:
        actions = np.zeros((len(indices), self.action_width), dtype=np.uint8)
        for k, i in enumerate(indices):
            actions[k] = np.frombuffer(self._actions[int(i)], dtype=np.uint8)
        return Batch(
            states=np.stack([self.get(int(i)) for i in indices]),
            actions=actions,
            rewards=np.asarray([self._rewards[int(i)] for i in indices], dtype=np.float64),
            dones=np.asarray([self._dones[int(i)] for i in indices], dtype=bool),
            indices=indices.copy(),
            next_states=np.stack([self.get(int(i) + 1) for i in indices]) if with_next else None,
        )

    def stats(self) -> AnalyticsReport:
        cfg = self.config
        pixels = cfg.height * cfg.width
        uncompressed = pixels * cfg.capacity_steps * cfg.frame_stack
        return AnalyticsReport(
            capacity=cfg.capacity_steps,
            d=cfg.keyframe_slots,
            f=cfg.frame_stack,
            pixels_per_image=pixels,
            N=0.0,
            n=0.0,
            phi=0.0,
            model_bytes=uncompressed,
            uncompressed_bytes=uncompressed,
            factor=1.0,
        )
