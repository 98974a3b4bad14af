"""Command-line front end: generate, compress, verify, bench, theory.

Exit codes: 0 success, 1 verification/comparison failure, 2 usage or input
error. Every report is available as machine-readable CSV via ``--format
csv`` (schemas documented in the README). The ``init``/``extend``/``stats``/
``sample`` subcommands exist so external callers (e.g. the Node bindings)
can drive a buffer purely through files and the CLI.
"""

from __future__ import annotations

import argparse
import hashlib
import math
import struct
import sys
import time
from pathlib import Path

import numpy as np

from .analytics import AnalyticsReport, sweep
from .baseline import BaselineReplayBuffer
from .errors import DeobsError, InvalidConfig, MalformedFile, VersionMismatch
from .obs_store import Mode, StoreConfig
from .replay_buffer import Batch, ReplayBuffer, TransitionMeta
from .trace_io import GenMode, Trace, generate, load_buffer, read_trace, save_buffer, write_trace

BATCH_MAGIC = b"DEOBSBA1"

META_HEADER = "action,reward,done,episode_start"


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits 2 on usage errors, 0 on --help
        return int(exc.code or 0)
    try:
        return args.handler(args)
    except (DeobsError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="deobs",
        description="Lossless differential compression for image observation traces.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="write a synthetic trace file")
    p.add_argument("mode", choices=[m.value for m in GenMode])
    p.add_argument("--frames", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", "-o", required=True)
    p.add_argument("--height", type=int, default=84)
    p.add_argument("--width", type=int, default=84)
    p.add_argument("--rho", type=float, help="noise: per-pixel change probability")
    p.add_argument("--blob", type=int, help="drift/episodic: blob side length")
    p.add_argument("--velocity", type=int, help="drift/episodic: pixels per step")
    p.add_argument("--min-len", type=int, help="episodic: shortest episode")
    p.add_argument("--max-len", type=int, help="episodic: longest episode")
    p.set_defaults(handler=cmd_gen)

    p = sub.add_parser("compress", help="build a compressed buffer from a trace")
    p.add_argument("trace")
    p.add_argument("--out", "-o", help="buffer file to write")
    p.add_argument("--f", type=int, required=True, help="frame stack length")
    p.add_argument("--mode", choices=["full", "half", "none"], default="full")
    p.add_argument("--capacity", type=int, help="steps; default: trace length rounded up to f")
    p.add_argument("--meta", help="CSV of per-step action/reward/done/episode_start")
    p.add_argument("--format", choices=["human", "csv"], default="human")
    p.set_defaults(handler=cmd_compress)

    p = sub.add_parser("verify", help="check compressed states against the uncompressed reference")
    p.add_argument("trace")
    p.add_argument("--f", type=int)
    p.add_argument("--mode", choices=["full", "half"], default="full")
    p.add_argument("--capacity", type=int)
    p.add_argument("--buffer", help="verify an existing buffer file against the trace")
    p.set_defaults(handler=cmd_verify)

    p = sub.add_parser("bench", help="measure append/get/sample throughput")
    p.add_argument("trace")
    p.add_argument("--f", type=int, required=True)
    p.add_argument("--mode", choices=["full", "half", "none"], default="full")
    p.add_argument("--batch", type=int, default=32)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--batches", type=int, default=50)
    p.add_argument("--capacity", type=int)
    p.add_argument("--format", choices=["human", "csv"], default="human")
    p.set_defaults(handler=cmd_bench)

    p = sub.add_parser("theory", help="closed-form compression factor grid")
    p.add_argument("--f", required=True, help="comma-separated frame stack lengths")
    p.add_argument("--phi", required=True, help="comma-separated pixel-change fractions")
    p.add_argument("--image-side", type=int, default=84)
    p.add_argument("--format", choices=["human", "csv"], default="human")
    p.set_defaults(handler=cmd_theory)

    p = sub.add_parser("init", help="write an empty buffer file")
    p.add_argument("--out", "-o", required=True)
    p.add_argument("--f", type=int, required=True)
    p.add_argument("--capacity", type=int, required=True)
    p.add_argument("--height", type=int, default=84)
    p.add_argument("--width", type=int, default=84)
    p.add_argument("--mode", choices=["full", "half"], default="full")
    p.add_argument("--action-width", type=int, default=0)
    p.set_defaults(handler=cmd_init)

    p = sub.add_parser("extend", help="append raw frames + metadata to a buffer file")
    p.add_argument("buffer")
    p.add_argument("--frames", required=True, help="raw file of concatenated H*W frame bytes")
    p.add_argument("--meta", required=True, help=f"CSV with header {META_HEADER}")
    p.add_argument("--out", "-o", required=True)
    p.add_argument("--format", choices=["human", "csv"], default="human")
    p.set_defaults(handler=cmd_extend)

    p = sub.add_parser("stats", help="report the memory model of a buffer file")
    p.add_argument("buffer")
    p.add_argument("--format", choices=["human", "csv"], default="human")
    p.set_defaults(handler=cmd_stats)

    p = sub.add_parser("sample", help="draw a seeded batch from a buffer file")
    p.add_argument("buffer")
    p.add_argument("--batch", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--transitions", action="store_true", help="include successor states")
    p.add_argument("--out", "-o", required=True)
    p.set_defaults(handler=cmd_sample)

    return parser


# -- shared helpers ----------------------------------------------------------


def _default_capacity(n_frames: int, f: int) -> int:
    return math.ceil(n_frames / f) * f


def _make_buffer(mode: str, capacity: int, f: int, height: int, width: int, action_width: int):
    store_mode = Mode.HALF if mode == "half" else Mode.FULL
    config = StoreConfig(capacity, f, height, width, store_mode)
    if mode == "none":
        return BaselineReplayBuffer(config, action_width, mirror_eviction=False)
    return ReplayBuffer(config, action_width)


def _replay_trace(buffer, trace: Trace, metas: list[TransitionMeta] | None) -> None:
    flags = trace.start_flags()
    blank = TransitionMeta(action=b"\x00" * buffer.action_width)
    for t, frame in enumerate(trace.frames):
        buffer.add(frame, metas[t] if metas else blank, bool(flags[t]))


def _parse_meta(path: str, expected_rows: int) -> tuple[int, list[TransitionMeta], list[bool]]:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0].strip() != META_HEADER:
        raise InvalidConfig(f"meta CSV must start with header '{META_HEADER}'")
    rows = [ln for ln in lines[1:] if ln.strip()]
    if len(rows) != expected_rows:
        raise InvalidConfig(f"meta CSV has {len(rows)} rows, expected {expected_rows}")
    metas: list[TransitionMeta] = []
    starts: list[bool] = []
    width: int | None = None
    for k, line in enumerate(rows):
        fields = line.split(",")
        if len(fields) != 4:
            raise InvalidConfig(f"meta row {k}: expected 4 fields, got {len(fields)}")
        action_hex, reward_s, done_s, start_s = (s.strip() for s in fields)
        try:
            action = bytes.fromhex(action_hex)
        except ValueError as exc:
            raise InvalidConfig(f"meta row {k}: bad action hex") from exc
        if width is None:
            width = len(action)
        elif len(action) != width:
            raise InvalidConfig(f"meta row {k}: action width changed")
        if done_s not in ("0", "1") or start_s not in ("0", "1"):
            raise InvalidConfig(f"meta row {k}: done/episode_start must be 0 or 1")
        try:
            reward = float(reward_s)
        except ValueError as exc:
            raise InvalidConfig(f"meta row {k}: bad reward") from exc
        metas.append(TransitionMeta(action=action, reward=reward, done=done_s == "1"))
        starts.append(start_s == "1")
    return width or 0, metas, starts


def _buffer_context(buffer) -> dict[str, str]:
    cfg = buffer.config
    if isinstance(buffer, BaselineReplayBuffer):
        mode = cfg.mode.value if buffer.store.mirror_eviction else "none"
    else:
        mode = cfg.mode.value
    return {
        "height": str(cfg.height),
        "width": str(cfg.width),
        "mode": mode,
        "action_width": str(buffer.action_width),
        "head": str(buffer.head),
    }


def _print_report(report: AnalyticsReport, fmt: str, context: dict[str, str] | None = None) -> None:
    names = AnalyticsReport.CSV_HEADER.split(",")
    values = report.csv_row().split(",")
    if context:
        names += list(context)
        values += list(context.values())
    if fmt == "csv":
        print(",".join(names))
        print(",".join(values))
        return
    for name, value in zip(names, values):
        print(f"{name}: {value}")


# -- subcommands --------------------------------------------------------------


def cmd_gen(args) -> int:
    trace = generate(
        args.mode,
        frames=args.frames,
        seed=args.seed,
        height=args.height,
        width=args.width,
        rho=args.rho,
        blob=args.blob,
        velocity=args.velocity,
        min_len=args.min_len,
        max_len=args.max_len,
    )
    write_trace(trace, args.out)
    mode = GenMode(args.mode)
    pixels = args.height * args.width
    if mode is GenMode.STATIC:
        density = 0.0
    elif mode is GenMode.NOISE:
        density = args.rho
    else:
        blob = args.blob if args.blob is not None else 5
        density = min(1.0, 2 * blob * blob / pixels)
    print(f"frames={len(trace)} episodes={len(trace.episode_starts)} "
          f"expected_change_density={density:.6f}")
    return 0


def cmd_compress(args) -> int:
    trace = read_trace(args.trace)
    if args.f < 1:
        raise InvalidConfig("--f must be >= 1")
    capacity = args.capacity or _default_capacity(len(trace), args.f)
    metas = None
    action_width = 0
    if args.meta:
        action_width, metas, starts = _parse_meta(args.meta, len(trace))
        if starts != list(trace.start_flags()):
            raise InvalidConfig("meta episode_start column disagrees with the trace")
    if args.mode == "none" and args.out:
        raise InvalidConfig("--mode none has no buffer file format; drop --out")
    buffer = _make_buffer(args.mode, capacity, args.f, trace.height, trace.width, action_width)
    _replay_trace(buffer, trace, metas)
    _print_report(buffer.stats(), args.format, _buffer_context(buffer))
    if args.out:
        save_buffer(buffer, args.out)
    return 0


def cmd_verify(args) -> int:
    trace = read_trace(args.trace)
    if args.buffer:
        try:
            buffer = load_buffer(args.buffer)
        except (MalformedFile, VersionMismatch) as exc:
            print(f"verification failed: {exc}")
            return 1
        cfg = buffer.config
        if (cfg.height, cfg.width) != (trace.height, trace.width):
            print(f"verification failed: buffer is {cfg.height}x{cfg.width}, "
                  f"trace is {trace.height}x{trace.width}")
            return 1
        if buffer.head != len(trace):
            print(f"verification failed: buffer holds {buffer.head} steps, trace has {len(trace)}")
            return 1
        reference = BaselineReplayBuffer(cfg, 0, mirror_eviction=True)
        _replay_trace(reference, trace, None)
        valid = buffer.valid_range()
        if valid != reference.valid_range():
            print(f"verification failed: valid range {valid} != reference {reference.valid_range()}")
            return 1
        checked = 0
        if valid is not None:
            for i in range(valid[0], valid[1] + 1):
                if not np.array_equal(buffer.get(i), reference.get(i)):
                    print(f"divergence at step {i}")
                    return 1
                checked += 1
        print(f"verified {checked} states, all bit-equal")
        return 0

    if args.f is None:
        raise InvalidConfig("--f is required unless --buffer is given")
    capacity = args.capacity or _default_capacity(len(trace), args.f)
    compressed = _make_buffer(args.mode, capacity, args.f, trace.height, trace.width, 0)
    reference = BaselineReplayBuffer(compressed.config, 0, mirror_eviction=True)
    flags = trace.start_flags()
    blank = TransitionMeta()
    checked = 0
    for t, frame in enumerate(trace.frames):
        compressed.add(frame, blank, bool(flags[t]))
        reference.add(frame, blank, bool(flags[t]))
        if compressed.valid_range() != reference.valid_range():
            print(f"divergence at step {t}: valid range {compressed.valid_range()} "
                  f"!= reference {reference.valid_range()}")
            return 1
        if not np.array_equal(compressed.get(t), reference.get(t)):
            print(f"divergence at step {t}")
            return 1
        checked += 1
    valid = compressed.valid_range()
    if valid is not None:
        for i in range(valid[0], valid[1] + 1):
            if not np.array_equal(compressed.get(i), reference.get(i)):
                print(f"divergence at step {i}")
                return 1
            checked += 1
    print(f"verified {checked} states, all bit-equal")
    return 0


def cmd_bench(args) -> int:
    if args.batch < 1:
        raise InvalidConfig("--batch must be >= 1")
    if args.batches < 1:
        raise InvalidConfig("--batches must be >= 1")
    trace = read_trace(args.trace)
    capacity = args.capacity or _default_capacity(len(trace), args.f)
    buffer = _make_buffer(args.mode, capacity, args.f, trace.height, trace.width, 0)
    flags = trace.start_flags()
    blank = TransitionMeta()

    wall_start = time.perf_counter()
    t0 = time.perf_counter()
    for t, frame in enumerate(trace.frames):
        buffer.add(frame, blank, bool(flags[t]))
    append_s = time.perf_counter() - t0

    valid = buffer.valid_range()
    if valid is None:
        raise InvalidConfig("trace produced no valid states to read")
    t0 = time.perf_counter()
    for i in range(valid[0], valid[1] + 1):
        buffer.get(i)
    get_s = time.perf_counter() - t0
    gets = valid[1] - valid[0] + 1

    digest = hashlib.sha256()
    t0 = time.perf_counter()
    for k in range(args.batches):
        batch = buffer.sample_transitions(args.batch, args.seed + k)
        _hash_batch(digest, batch)
    sample_s = time.perf_counter() - t0
    wall = time.perf_counter() - wall_start

    fields = {
        "appends_per_sec": f"{len(trace) / append_s:.1f}",
        "gets_per_sec": f"{gets / get_s:.1f}",
        "sample_batches_per_sec": f"{args.batches / sample_s:.1f}",
        "wall_time_sec": f"{wall:.3f}",
        "batch_checksum": digest.hexdigest(),
    }
    if args.format == "csv":
        print(",".join(fields))
        print(",".join(fields.values()))
    else:
        for key, value in fields.items():
            print(f"{key}: {value}")
    return 0


def _hash_batch(digest, batch: Batch) -> None:
    digest.update(batch.indices.astype("<i8").tobytes())
    digest.update(batch.states.tobytes())
    digest.update(batch.actions.tobytes())
    digest.update(batch.rewards.astype("<f8").tobytes())
    digest.update(batch.dones.astype(np.uint8).tobytes())
    if batch.next_states is not None:
        digest.update(batch.next_states.tobytes())


def cmd_theory(args) -> int:
    try:
        f_values = [int(s) for s in args.f.split(",") if s.strip()]
        phi_values = [float(s) for s in args.phi.split(",") if s.strip()]
    except ValueError as exc:
        raise InvalidConfig(f"bad grid value: {exc}") from exc
    table = sweep(f_values, phi_values, args.image_side * args.image_side)
    if args.format == "csv":
        print("f,phi,factor")
        for f, phi, factor in table:
            print(f"{f},{phi!r},{factor!r}")
    else:
        for f, phi, factor in table:
            print(f"f={f:<3d} phi={phi:<6.3f} factor={factor:.2f}")
    return 0


def cmd_init(args) -> int:
    mode = Mode.HALF if args.mode == "half" else Mode.FULL
    if args.action_width < 0:
        raise InvalidConfig("--action-width must be >= 0")
    buffer = ReplayBuffer(StoreConfig(args.capacity, args.f, args.height, args.width, mode),
                          args.action_width)
    save_buffer(buffer, args.out)
    print(f"initialized empty buffer: capacity={args.capacity} f={args.f} "
          f"{args.height}x{args.width} mode={args.mode} action_width={args.action_width}")
    return 0


def cmd_extend(args) -> int:
    buffer = load_buffer(args.buffer)
    cfg = buffer.config
    raw = Path(args.frames).read_bytes()
    pixels = cfg.height * cfg.width
    if not raw or len(raw) % pixels != 0:
        raise InvalidConfig(f"raw frame file must be a positive multiple of {pixels} bytes")
    count = len(raw) // pixels
    frames = np.frombuffer(raw, dtype=np.uint8).reshape(count, cfg.height, cfg.width)
    action_width, metas, starts = _parse_meta(args.meta, count)
    if action_width != buffer.action_width:
        raise InvalidConfig(
            f"meta action width {action_width} != buffer action width {buffer.action_width}"
        )
    for t in range(count):
        buffer.add(frames[t], metas[t], starts[t])
    save_buffer(buffer, args.out)
    _print_report(buffer.stats(), args.format, _buffer_context(buffer))
    return 0


def cmd_stats(args) -> int:
    buffer = load_buffer(args.buffer)
    _print_report(buffer.stats(), args.format, _buffer_context(buffer))
    return 0


def cmd_sample(args) -> int:
    if args.batch < 1:
        raise InvalidConfig("--batch must be >= 1")
    buffer = load_buffer(args.buffer)
    if args.transitions:
        batch = buffer.sample_transitions(args.batch, args.seed)
    else:
        batch = buffer.sample_states(args.batch, args.seed)
    _write_batch_file(batch, buffer, args.out)
    kind = "transitions" if args.transitions else "states"
    print(f"wrote {len(batch)} {kind} to {args.out}")
    return 0


def _write_batch_file(batch: Batch, buffer, path: str) -> None:
    cfg = buffer.config
    has_next = batch.next_states is not None
    parts = [
        BATCH_MAGIC,
        struct.pack(
            "<IIIIII",
            len(batch),
            cfg.frame_stack,
            cfg.height,
            cfg.width,
            buffer.action_width,
            1 if has_next else 0,
        ),
        batch.indices.astype("<u8").tobytes(),
        batch.states.tobytes(),
        batch.actions.tobytes(),
        batch.rewards.astype("<f8").tobytes(),
        batch.dones.astype(np.uint8).tobytes(),
    ]
    if has_next:
        parts.append(batch.next_states.tobytes())
    Path(path).write_bytes(b"".join(parts))


if __name__ == "__main__":
    sys.exit(main())
