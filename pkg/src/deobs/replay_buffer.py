"""Transition-level experience replay over the compressed frame store.

Per-step action/reward/done metadata lives in flat pre-allocated rings; only
the observations are compressed. Sampling is uniform with replacement and a
pure function of (buffer contents, seed): a fresh PCG64 generator is seeded
per call, so equal seeds on equal contents give equal batches.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .analytics import AnalyticsReport
from .errors import (
    DimensionMismatch,
    EmptyBuffer,
    EpisodeDiscipline,
    InvalidConfig,
    NoValidTransitions,
)
from .obs_store import ObsStore, StoreConfig


@dataclass(frozen=True)
class TransitionMeta:
    action: bytes = b""
    reward: float = 0.0
    done: bool = False


@dataclass(frozen=True)
class Batch:
    """Aligned sample arrays; next_states present only for transition draws."""

    states: np.ndarray  # (B, f, H, W) uint8
    actions: np.ndarray  # (B, action_width) uint8
    rewards: np.ndarray  # (B,) float64
    dones: np.ndarray  # (B,) bool
    indices: np.ndarray  # (B,) int64, sampled step indices
    next_states: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.indices)


class ReplayBuffer:
    """Uniform replay buffer backed by an ObsStore."""

    def __init__(self, config: StoreConfig, action_width: int = 0):
        if action_width < 0:
            raise InvalidConfig("action_width must be >= 0")
        self.config = config
        self.action_width = action_width
        self.store = ObsStore(config)
        cap = config.capacity_steps
        self.actions = np.zeros((cap, action_width), dtype=np.uint8)
        self.rewards = np.zeros(cap, dtype=np.float64)
        self.dones = np.zeros(cap, dtype=bool)
        self.episode_starts = np.zeros(cap, dtype=bool)

    def __len__(self) -> int:
        return len(self.store)

    @property
    def head(self) -> int:
        return self.store.head

    def add(self, frame: np.ndarray, meta: TransitionMeta, episode_start: bool) -> int:
        """Append one transition; returns its global step index."""
        if len(meta.action) != self.action_width:
            raise DimensionMismatch(
                f"action is {len(meta.action)} bytes, buffer expects {self.action_width}"
            )
        cap = self.config.capacity_steps
        head = self.store.head
        if head > 0 and self.dones[(head - 1) % cap] and not episode_start:
            raise EpisodeDiscipline("previous step was terminal; episode_start required")
        i = self.store.append(frame, episode_start)
        slot = i % cap
        self.actions[slot] = np.frombuffer(meta.action, dtype=np.uint8)
        self.rewards[slot] = meta.reward
        self.dones[slot] = meta.done
        self.episode_starts[slot] = episode_start
        return i

    def get(self, i: int) -> np.ndarray:
        return self.store.get(i)

    def valid_range(self) -> tuple[int, int] | None:
        return self.store.valid_range()

    # -- sampling ----------------------------------------------------------

    def sample_states(self, batch_size: int, seed: int) -> Batch:
        """batch_size indices uniform with replacement over the valid range."""
        valid = self._require_valid(batch_size)
        lo, hi = valid
        rng = np.random.default_rng(seed)
        indices = rng.integers(lo, hi + 1, size=batch_size, dtype=np.int64)
        return self._gather(indices, with_next=False)

    def sample_transitions(self, batch_size: int, seed: int) -> Batch:
        """Like sample_states but only steps with a usable successor.

        A successor is usable when it is resident and not an episode start
        that lacks a terminal marker on the sampled step (an un-reset
        boundary). Terminal steps stay eligible: consumers mask on dones.
        """
        valid = self._require_valid(batch_size)
        eligible = self._eligible_transitions(valid)
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

    def _eligible_transitions(self, valid: tuple[int, int]) -> np.ndarray:
        lo, hi = valid
        cap = self.config.capacity_steps
        out = [
            i
            for i in range(lo, hi)
            if not (self.episode_starts[(i + 1) % cap] and not self.dones[i % cap])
        ]
        return np.asarray(out, dtype=np.int64)

    def _gather(self, indices: np.ndarray, with_next: bool) -> Batch:
        cap = self.config.capacity_steps
        slots = indices % cap
        return Batch(
            states=np.stack([self.get(int(i)) for i in indices]),
            actions=self.actions[slots].copy(),
            rewards=self.rewards[slots].copy(),
            dones=self.dones[slots].copy(),
            indices=indices.copy(),
            next_states=np.stack([self.get(int(i) + 1) for i in indices]) if with_next else None,
        )

    # -- accounting --------------------------------------------------------

    def stats(self) -> AnalyticsReport:
        """Memory model evaluated at the store's live contents."""
        cfg = self.config
        pixels = cfg.height * cfg.width
        cap, f, d = cfg.capacity_steps, cfg.frame_stack, cfg.keyframe_slots
        breakdown = self.store.memory_bytes()
        entries = breakdown.sparse_payload_bytes / 4
        diff_slots = d * (f - 1)
        n = entries / diff_slots if diff_slots else 0.0
        uncompressed = pixels * cap * f
        return AnalyticsReport(
            capacity=cap,
            d=d,
            f=f,
            pixels_per_image=pixels,
            N=entries,
            n=n,
            phi=n / pixels,
            model_bytes=breakdown.total_bytes,
            uncompressed_bytes=uncompressed,
            factor=uncompressed / breakdown.total_bytes,
        )

    # -- restore (used by the file loader) ----------------------------------

    @classmethod
    def _restore(
        cls,
        store: ObsStore,
        action_width: int,
        actions: np.ndarray,
        rewards: np.ndarray,
        dones: np.ndarray,
        episode_starts: np.ndarray,
    ) -> "ReplayBuffer":
        buffer = cls.__new__(cls)
        buffer.config = store.config
        buffer.action_width = action_width
        buffer.store = store
        buffer.actions = actions
        buffer.rewards = rewards
        buffer.dones = dones
        buffer.episode_starts = episode_starts
        return buffer
