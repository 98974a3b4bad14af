#!/usr/bin/env python3
"""Measure compression factors on synthetic traces and compare them with the
closed-form prediction at the live payload.

Usage: python scripts/synthetic_memory_experiment.py [steps]
"""

import sys
import time

import numpy as np

from deobs.analytics import compression_factor
from deobs.obs_store import Mode, StoreConfig
from deobs.replay_buffer import ReplayBuffer, TransitionMeta
from deobs.trace_io import generate

TRACES = [
    ("static", dict()),
    ("drift b=5 v=1", dict(blob=5, velocity=1)),
    ("drift b=12 v=3", dict(blob=12, velocity=3)),
    ("noise rho=0.02", dict(rho=0.02)),
    ("noise rho=0.10", dict(rho=0.10)),
    ("noise rho=1.00", dict(rho=1.0)),
    ("episodic", dict(min_len=50, max_len=300)),
]


def run(steps: int) -> None:
    print(f"{'trace':<16} {'f':>3} {'mode':>5} {'phi':>8} {'measured':>9} "
          f"{'predicted':>9} {'append/s':>9}")
    for name, params in TRACES:
        mode_name = name.split()[0]
        trace = generate(mode_name, frames=steps, seed=1, **params)
        for f in (3, 4, 10):
            capacity = steps - steps % f if steps % f else steps
            for mode in (Mode.FULL, Mode.HALF):
                buf = ReplayBuffer(StoreConfig(capacity, f, 84, 84, mode))
                flags = trace.start_flags()
                meta = TransitionMeta()
                t0 = time.perf_counter()
                for t in range(capacity):
                    buf.add(trace.frames[t], meta, bool(flags[t]))
                elapsed = time.perf_counter() - t0
                report = buf.stats()
                predicted = (
                    compression_factor(7056, capacity, f, report.N)
                    if mode is Mode.FULL
                    else 7056 * f / (7056 + 4 * f)
                )
                print(f"{name:<16} {f:>3} {mode.value:>5} {report.phi:>8.4f} "
                      f"{report.factor:>9.3f} {predicted:>9.3f} "
                      f"{capacity / elapsed:>9.0f}")


if __name__ == "__main__":
    run(int(sys.argv[1]) if len(sys.argv) > 1 else 3000)
