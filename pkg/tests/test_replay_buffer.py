import numpy as np
import pytest

from conftest import mixed_trace, random_frames
from deobs.analytics import compression_factor
from deobs.baseline import BaselineReplayBuffer
from deobs.errors import (
    DimensionMismatch,
    EmptyBuffer,
    EpisodeDiscipline,
    InvalidConfig,
    NoValidTransitions,
)
from deobs.frame_codec import DenseDiff
from deobs.obs_store import Mode, StoreConfig
from deobs.replay_buffer import Batch, ReplayBuffer, TransitionMeta
from deobs.trace_io import generate


def buffer(cap=40, f=4, h=16, w=16, mode=Mode.FULL, action_width=0):
    return ReplayBuffer(StoreConfig(cap, f, h, w, mode), action_width)


def fill(buf, frames, starts=None, dones=None, action_width=0):
    rng = np.random.default_rng(99)
    for t in range(len(frames)):
        meta = TransitionMeta(
            action=bytes(rng.integers(0, 256, action_width, dtype=np.uint8)),
            reward=float(rng.normal()),
            done=bool(dones[t]) if dones is not None else False,
        )
        start = bool(starts[t]) if starts is not None else t == 0
        buf.add(frames[t], meta, start)


def batches_equal(a: Batch, b: Batch) -> bool:
    if (a.next_states is None) != (b.next_states is None):
        return False
    pieces = [
        np.array_equal(a.indices, b.indices),
        np.array_equal(a.states, b.states),
        np.array_equal(a.actions, b.actions),
        np.array_equal(a.rewards, b.rewards),
        np.array_equal(a.dones, b.dones),
    ]
    if a.next_states is not None:
        pieces.append(np.array_equal(a.next_states, b.next_states))
    return all(pieces)


# -- add discipline -------------------------------------------------------

def test_add_after_done_requires_episode_start():
    buf = buffer()
    frames = random_frames(2, 16, 16, 0)
    buf.add(frames[0], TransitionMeta(done=True), True)
    with pytest.raises(EpisodeDiscipline):
        buf.add(frames[1], TransitionMeta(), False)
    buf.add(frames[1], TransitionMeta(), True)  # fine with the flag


def test_add_checks_action_width():
    buf = buffer(action_width=2)
    with pytest.raises(DimensionMismatch):
        buf.add(random_frames(1, 16, 16, 1)[0], TransitionMeta(action=b"abc"), True)


def test_ten_adds_span_valid_range():
    buf = buffer(40, 4)
    fill(buf, random_frames(10, 16, 16, 2))
    assert len(buf) == 10
    assert buf.valid_range() == (0, 9)


# -- sampling -------------------------------------------------------------

def test_sample_states_deterministic():
    buf = buffer()
    fill(buf, random_frames(20, 16, 16, 3))
    assert batches_equal(buf.sample_states(16, seed=7), buf.sample_states(16, seed=7))
    assert not np.array_equal(
        buf.sample_states(16, seed=7).indices, buf.sample_states(16, seed=8).indices
    )


def test_sample_single_step_buffer_repeats():
    buf = buffer()
    fill(buf, random_frames(1, 16, 16, 4))
    batch = buf.sample_states(5, seed=0)
    assert batch.indices.tolist() == [0] * 5
    assert batch.next_states is None


def test_sample_empty_buffer():
    with pytest.raises(EmptyBuffer):
        buffer().sample_states(4, seed=0)
    with pytest.raises(InvalidConfig):
        buffer().sample_states(0, seed=0)


def test_sampling_is_uniform_within_5_sigma():
    buf = buffer(100, 4)
    fill(buf, random_frames(100, 16, 16, 5))
    counts = np.zeros(100, dtype=np.int64)
    for k in range(100):
        batch = buf.sample_states(1000, seed=k)
        counts += np.bincount(batch.indices, minlength=100)
    total = counts.sum()
    assert total == 100_000
    expected = total / 100
    sigma = np.sqrt(total * 0.01 * 0.99)
    assert np.all(np.abs(counts - expected) <= 5 * sigma)


def test_transitions_two_step_buffer():
    buf = buffer()
    frames = random_frames(2, 16, 16, 6)
    fill(buf, frames)
    batch = buf.sample_transitions(8, seed=1)
    assert batch.indices.tolist() == [0] * 8
    assert np.array_equal(batch.next_states[0], buf.get(1))


def test_transitions_keep_terminal_steps_for_masking():
    buf = buffer()
    frames = random_frames(4, 16, 16, 7)
    starts = [True, False, True, False]
    dones = [False, True, False, False]
    fill(buf, frames, starts, dones)
    batch = buf.sample_transitions(64, seed=3)
    sampled = set(batch.indices.tolist())
    assert sampled == {0, 1, 2}  # terminal step 1 still eligible, masked via dones
    assert np.all(batch.dones[batch.indices == 1])


def test_transitions_skip_unreset_boundaries():
    buf = buffer()
    frames = random_frames(4, 16, 16, 8)
    starts = [True, False, True, False]  # episode break at 2 without a done at 1
    fill(buf, frames, starts)
    batch = buf.sample_transitions(64, seed=4)
    assert set(batch.indices.tolist()) == {0, 2}


def test_transitions_none_valid():
    buf = buffer(40, 1, mode=Mode.FULL)
    frames = random_frames(2, 16, 16, 9)
    # two single-step episodes, no terminal markers: both boundaries un-reset
    buf.add(frames[0], TransitionMeta(), True)
    buf.add(frames[1], TransitionMeta(), True)
    with pytest.raises(NoValidTransitions):
        buf.sample_transitions(4, seed=0)


# -- oracle equivalence -----------------------------------------------------

@pytest.mark.parametrize("mode", [Mode.FULL, Mode.HALF])
def test_batches_match_reference_buffer(mode):
    trace = mixed_trace(500, seed=31, height=20, width=20)
    cap = 200
    cfg = StoreConfig(cap, 4, 20, 20, mode)
    compressed = ReplayBuffer(cfg, action_width=3)
    reference = BaselineReplayBuffer(cfg, action_width=3)
    flags = trace.start_flags()
    rng = np.random.default_rng(5)
    for t in range(len(trace)):
        meta = TransitionMeta(
            action=bytes(rng.integers(0, 256, 3, dtype=np.uint8)),
            reward=float(rng.normal()),
            done=bool(flags[t + 1]) if t + 1 < len(trace) else False,
        )
        compressed.add(trace.frames[t], meta, bool(flags[t]))
        reference.add(trace.frames[t], meta, bool(flags[t]))
    assert compressed.valid_range() == reference.valid_range()
    for seed in range(20):
        assert batches_equal(
            compressed.sample_states(16, seed), reference.sample_states(16, seed)
        )
        assert batches_equal(
            compressed.sample_transitions(16, seed), reference.sample_transitions(16, seed)
        )


def test_no_cross_episode_frames_in_states():
    # one constant intensity per episode: a state mixing episodes would mix values
    h = w = 12
    episodes = [(0, 30, 40), (30, 75, 90), (75, 100, 160)]
    frames = np.zeros((100, h, w), dtype=np.uint8)
    starts = np.zeros(100, dtype=bool)
    for lo, hi, value in episodes:
        frames[lo:hi] = value
        starts[lo] = True
    buf = buffer(100, 4, h, w)
    fill(buf, frames, starts)
    for i in range(100):
        state = buf.get(i)
        assert len(np.unique(state)) == 1
        assert state[0, 0, 0] == frames[i, 0, 0]


# -- stats ------------------------------------------------------------------

def test_stats_empty_buffer():
    report = buffer(40, 4, 84, 84).stats()
    assert report.N == 0 and report.phi == 0
    assert report.model_bytes == 7056 * 10 + 8 * 10 * 3 + 4 * 40 * 4


def test_stats_static_trace_hits_ceiling():
    trace = generate("static", frames=400, seed=0)
    buf = buffer(400, 4, 84, 84)
    fill(buf, trace.frames)
    report = buf.stats()
    assert report.N == 0
    assert 15.5 <= report.factor <= 15.81
    assert report.factor == pytest.approx(15.802911534154536)


def test_stats_all_noise_floor_is_predicted_exactly():
    trace = generate("noise", frames=80, seed=1, rho=1.0)
    buf = buffer(80, 4, 84, 84)
    fill(buf, trace.frames)
    records = [r for row in buf.store.sparse_obs for r in row if r is not None]
    assert records and all(isinstance(r, DenseDiff) for r in records)
    report = buf.stats()
    assert report.factor == compression_factor(7056, 80, 4, report.N)
    predicted = 7056 * 80 * 4 / (7056 * 20 + 8 * 20 * 3 + 7056 * len(records) + 4 * 80 * 4)
    assert report.factor == predicted


def test_stats_matches_closed_form_at_live_n():
    trace = mixed_trace(300, seed=77, height=84, width=84)
    buf = buffer(120, 4, 84, 84)
    fill(buf, trace.frames, trace.start_flags())
    report = buf.stats()
    assert report.factor == compression_factor(7056, 120, 4, report.N)
    assert report.uncompressed_bytes == 7056 * 120 * 4
    assert report.N == pytest.approx(report.d * 3 * report.n)


def test_stats_half_mode():
    buf = buffer(40, 4, 84, 84, mode=Mode.HALF)
    fill(buf, random_frames(40, 84, 84, 11))
    assert buf.stats().factor == pytest.approx(3.991, abs=0.01)
