"""Lossless differential compression for image-based RL observation storage."""

from .analytics import AnalyticsReport, compression_factor, model_bytes, simplified_factor, sweep
from .baseline import BaselineReplayBuffer, BaselineStore
from .frame_codec import (
    DenseDiff,
    DiffRecord,
    SparseDiff,
    decode_diff,
    encode_diff,
    payload_bytes,
)
from .obs_store import MemoryBreakdown, Mode, ObsStore, StoreConfig
from .replay_buffer import Batch, ReplayBuffer, TransitionMeta
from .trace_io import (
    GenMode,
    Trace,
    generate,
    load_buffer,
    read_trace,
    save_buffer,
    write_trace,
)

__all__ = [
    "AnalyticsReport",
    "Batch",
    "BaselineReplayBuffer",
    "BaselineStore",
    "DenseDiff",
    "DiffRecord",
    "GenMode",
    "MemoryBreakdown",
    "Mode",
    "ObsStore",
    "ReplayBuffer",
    "SparseDiff",
    "StoreConfig",
    "Trace",
    "TransitionMeta",
    "compression_factor",
    "decode_diff",
    "encode_diff",
    "generate",
    "load_buffer",
    "model_bytes",
    "payload_bytes",
    "read_trace",
    "save_buffer",
    "simplified_factor",
    "sweep",
    "write_trace",
]

__version__ = "0.1.0"
