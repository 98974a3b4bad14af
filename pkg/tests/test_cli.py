import struct

import numpy as np
import pytest

from deobs.cli import main
from deobs.trace_io import load_buffer, read_trace


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def csv_report(stdout: str) -> dict:
    lines = [ln for ln in stdout.strip().splitlines() if ln]
    header, row = lines[-2].split(","), lines[-1].split(",")
    return dict(zip(header, row))


def gen_trace(capsys, tmp_path, name, *argv):
    path = tmp_path / name
    code, _, _ = run(capsys, "gen", *argv, "--out", str(path))
    assert code == 0
    return path


# -- gen ------------------------------------------------------------------

def test_gen_writes_requested_frames(capsys, tmp_path):
    path = gen_trace(capsys, tmp_path, "s.tr", "static", "--frames", "100", "--seed", "1")
    assert len(read_trace(path)) == 100


def test_gen_is_deterministic(capsys, tmp_path):
    a = gen_trace(capsys, tmp_path, "a.tr", "noise", "--rho", "0.5", "--frames", "50", "--seed", "7")
    b = gen_trace(capsys, tmp_path, "b.tr", "noise", "--rho", "0.5", "--frames", "50", "--seed", "7")
    assert a.read_bytes() == b.read_bytes()


def test_gen_rejects_bad_params(capsys, tmp_path):
    code, _, err = run(capsys, "gen", "noise", "--rho", "2.0", "--frames", "5",
                       "--out", str(tmp_path / "x.tr"))
    assert code == 2 and "error" in err


# -- compress ---------------------------------------------------------------

def test_compress_static_reaches_ceiling(capsys, tmp_path):
    trace = gen_trace(capsys, tmp_path, "s.tr", "static", "--frames", "1000", "--seed", "2")
    code, out, _ = run(capsys, "compress", str(trace), "--f", "4", "--mode", "full",
                       "--out", str(tmp_path / "s.buf"), "--format", "csv")
    assert code == 0
    report = csv_report(out)
    assert 15.5 <= float(report["factor"]) <= 15.81
    assert float(report["N"]) == 0


def test_compress_half_mode_factor(capsys, tmp_path):
    trace = gen_trace(capsys, tmp_path, "s.tr", "static", "--frames", "1000", "--seed", "2")
    code, out, _ = run(capsys, "compress", str(trace), "--f", "4", "--mode", "half",
                       "--format", "csv")
    assert code == 0
    assert float(csv_report(out)["factor"]) == pytest.approx(3.99, abs=0.01)


def test_compress_none_mode_is_unity(capsys, tmp_path):
    trace = gen_trace(capsys, tmp_path, "s.tr", "static", "--frames", "100", "--seed", "2")
    code, out, _ = run(capsys, "compress", str(trace), "--f", "4", "--mode", "none",
                       "--format", "csv")
    assert code == 0
    assert float(csv_report(out)["factor"]) == 1.0


def test_compress_none_mode_rejects_out(capsys, tmp_path):
    trace = gen_trace(capsys, tmp_path, "s.tr", "static", "--frames", "20", "--seed", "2")
    code, _, err = run(capsys, "compress", str(trace), "--f", "4", "--mode", "none",
                       "--out", str(tmp_path / "x.buf"))
    assert code == 2 and "error" in err


def test_compress_drift_phi_well_under_5_percent(capsys, tmp_path):
    trace = gen_trace(capsys, tmp_path, "d.tr", "drift", "--blob", "5", "--frames", "1000",
                      "--seed", "3")
    code, out, _ = run(capsys, "compress", str(trace), "--f", "4", "--format", "csv")
    assert code == 0
    assert float(csv_report(out)["phi"]) < 0.01


def test_compress_missing_trace(capsys, tmp_path):
    code, _, err = run(capsys, "compress", str(tmp_path / "nope.tr"), "--f", "4")
    assert code == 2 and "error" in err


# -- verify -------------------------------------------------------------------

@pytest.mark.parametrize("mode", ["full", "half"])
def test_verify_generated_traces_pass(capsys, tmp_path, mode):
    trace = gen_trace(capsys, tmp_path, "e.tr", "episodic", "--frames", "300",
                      "--min-len", "10", "--max-len", "60", "--seed", "4")
    code, out, _ = run(capsys, "verify", str(trace), "--f", "4", "--mode", mode)
    assert code == 0
    assert "all bit-equal" in out


def test_verify_with_eviction(capsys, tmp_path):
    trace = gen_trace(capsys, tmp_path, "e.tr", "episodic", "--frames", "400",
                      "--min-len", "5", "--max-len", "50", "--seed", "5")
    code, _, _ = run(capsys, "verify", str(trace), "--f", "4", "--capacity", "120")
    assert code == 0


def test_verify_buffer_file_roundtrip(capsys, tmp_path):
    trace = gen_trace(capsys, tmp_path, "d.tr", "drift", "--frames", "200", "--seed", "6")
    buf = tmp_path / "d.buf"
    assert run(capsys, "compress", str(trace), "--f", "4", "--out", str(buf))[0] == 0
    code, out, _ = run(capsys, "verify", str(trace), "--buffer", str(buf))
    assert code == 0 and "all bit-equal" in out


def test_verify_corrupted_buffer_reports_step(capsys, tmp_path):
    trace = gen_trace(capsys, tmp_path, "d.tr", "drift", "--frames", "200", "--seed", "6")
    buf = tmp_path / "d.buf"
    run(capsys, "compress", str(trace), "--f", "4", "--out", str(buf))
    data = bytearray(buf.read_bytes())
    data[8 + 32 + 100] ^= 0xFF  # flip a keyframe pixel
    buf.write_bytes(bytes(data))
    code, out, _ = run(capsys, "verify", str(trace), "--buffer", str(buf))
    assert code == 1
    assert "step" in out


def test_verify_empty_trace_is_usage_error(capsys, tmp_path):
    path = tmp_path / "empty.tr"
    path.write_bytes(b"DEOBSTR1" + struct.pack("<IIII", 8, 8, 0, 1) + struct.pack("<I", 0))
    code, _, err = run(capsys, "verify", str(path), "--f", "4")
    assert code == 2 and "error" in err


def test_verify_requires_f_without_buffer(capsys, tmp_path):
    trace = gen_trace(capsys, tmp_path, "s.tr", "static", "--frames", "10", "--seed", "1")
    code, _, err = run(capsys, "verify", str(trace))
    assert code == 2 and "error" in err


# -- bench ------------------------------------------------------------------

def test_bench_smoke(capsys, tmp_path):
    trace = gen_trace(capsys, tmp_path, "d.tr", "drift", "--frames", "300", "--seed", "8")
    code, out, _ = run(capsys, "bench", str(trace), "--f", "4", "--batch", "8",
                       "--batches", "5", "--seed", "1")
    assert code == 0
    for key in ("appends_per_sec", "gets_per_sec", "sample_batches_per_sec", "batch_checksum"):
        assert key in out


def test_bench_checksums_match_across_modes(capsys, tmp_path):
    trace = gen_trace(capsys, tmp_path, "e.tr", "episodic", "--frames", "240",
                      "--min-len", "20", "--max-len", "60", "--seed", "9")
    sums = {}
    for mode in ("full", "half", "none"):
        code, out, _ = run(capsys, "bench", str(trace), "--f", "4", "--mode", mode,
                           "--batch", "8", "--batches", "5", "--seed", "3", "--format", "csv")
        assert code == 0
        sums[mode] = csv_report(out)["batch_checksum"]
    assert sums["full"] == sums["half"] == sums["none"]


def test_bench_rejects_zero_batch(capsys, tmp_path):
    trace = gen_trace(capsys, tmp_path, "s.tr", "static", "--frames", "20", "--seed", "1")
    code, _, err = run(capsys, "bench", str(trace), "--f", "4", "--batch", "0")
    assert code == 2 and "error" in err


# -- theory -------------------------------------------------------------------

def test_theory_quoted_points(capsys):
    code, out, _ = run(capsys, "theory", "--f", "4,10", "--phi", "0.0,0.05,0.25",
                       "--format", "csv")
    assert code == 0
    rows = {}
    for line in out.strip().splitlines()[1:]:
        f, phi, factor = line.split(",")
        rows[(int(f), float(phi))] = float(factor)
    assert rows[(4, 0.05)] == pytest.approx(9.92, abs=0.05)
    assert rows[(10, 0.25)] == pytest.approx(9.93, abs=0.05)
    assert rows[(4, 0.0)] == pytest.approx(15.80, abs=0.01)


def test_theory_rejects_garbage(capsys):
    code, _, err = run(capsys, "theory", "--f", "4", "--phi", "x")
    assert code == 2 and "error" in err


def test_unknown_subcommand_exits_2(capsys):
    assert main(["frobnicate"]) == 2


# -- init / extend / stats / sample (the external binding surface) -------------

def test_file_driven_buffer_matches_compress_path(capsys, tmp_path):
    trace_path = gen_trace(capsys, tmp_path, "e.tr", "episodic", "--frames", "120",
                           "--min-len", "10", "--max-len", "40", "--seed", "11")
    trace = read_trace(trace_path)
    flags = trace.start_flags()
    rng = np.random.default_rng(0)

    meta_lines = ["action,reward,done,episode_start"]
    for t in range(len(trace)):
        action = bytes(rng.integers(0, 256, 2, dtype=np.uint8)).hex()
        done = 1 if t + 1 < len(trace) and flags[t + 1] else 0
        meta_lines.append(f"{action},{float(rng.normal())!r},{done},{1 if flags[t] else 0}")
    meta_path = tmp_path / "meta.csv"
    meta_path.write_text("\n".join(meta_lines) + "\n")

    # path A: compress the trace directly
    direct = tmp_path / "direct.buf"
    code, direct_out, _ = run(capsys, "compress", str(trace_path), "--f", "4",
                              "--meta", str(meta_path), "--capacity", "120",
                              "--out", str(direct), "--format", "csv")
    assert code == 0

    # path B: init an empty buffer, extend it with raw frames + the same meta
    staged = tmp_path / "staged.buf"
    assert run(capsys, "init", "--out", str(staged), "--f", "4", "--capacity", "120",
               "--action-width", "2")[0] == 0
    raw = tmp_path / "frames.raw"
    raw.write_bytes(trace.frames.tobytes())
    code, _, _ = run(capsys, "extend", str(staged), "--frames", str(raw),
                     "--meta", str(meta_path), "--out", str(staged))
    assert code == 0

    assert staged.read_bytes() == direct.read_bytes()

    code, stats_out, _ = run(capsys, "stats", str(staged), "--format", "csv")
    assert code == 0
    assert csv_report(stats_out) == csv_report(direct_out)

    for flag in ([], ["--transitions"]):
        a, b = tmp_path / "a.bin", tmp_path / "b.bin"
        assert run(capsys, "sample", str(direct), "--batch", "16", "--seed", "5",
                   "--out", str(a), *flag)[0] == 0
        assert run(capsys, "sample", str(staged), "--batch", "16", "--seed", "5",
                   "--out", str(b), *flag)[0] == 0
        assert a.read_bytes() == b.read_bytes()


def test_sample_batch_file_layout(capsys, tmp_path):
    trace = gen_trace(capsys, tmp_path, "d.tr", "drift", "--frames", "60", "--seed", "12")
    buf = tmp_path / "d.buf"
    run(capsys, "compress", str(trace), "--f", "3", "--out", str(buf))
    out_file = tmp_path / "batch.bin"
    code, _, _ = run(capsys, "sample", str(buf), "--batch", "32", "--seed", "1",
                     "--out", str(out_file))
    assert code == 0
    data = out_file.read_bytes()
    assert data[:8] == b"DEOBSBA1"
    batch, f, height, width, action_width, has_next = struct.unpack_from("<IIIIII", data, 8)
    assert (batch, f, height, width, action_width, has_next) == (32, 3, 84, 84, 0, 0)
    states_bytes = 32 * 3 * 84 * 84
    assert len(data) == 8 + 24 + 32 * 8 + states_bytes + 0 + 32 * 8 + 32


def test_extend_rejects_misaligned_raw_file(capsys, tmp_path):
    buf = tmp_path / "b.buf"
    run(capsys, "init", "--out", str(buf), "--f", "2", "--capacity", "8",
        "--height", "8", "--width", "8")
    raw = tmp_path / "frames.raw"
    raw.write_bytes(b"\x00" * 65)
    meta = tmp_path / "m.csv"
    meta.write_text("action,reward,done,episode_start\n,0.0,0,1\n")
    code, _, err = run(capsys, "extend", str(buf), "--frames", str(raw),
                       "--meta", str(meta), "--out", str(buf))
    assert code == 2 and "error" in err


def test_sample_empty_buffer_is_input_error(capsys, tmp_path):
    buf = tmp_path / "empty.buf"
    run(capsys, "init", "--out", str(buf), "--f", "4", "--capacity", "8")
    code, _, err = run(capsys, "sample", str(buf), "--batch", "4", "--seed", "0",
                       "--out", str(tmp_path / "x.bin"))
    assert code == 2 and "error" in err


def test_stats_missing_file_is_input_error(capsys, tmp_path):
    code, _, err = run(capsys, "stats", str(tmp_path / "absent.buf"))
    assert code == 2 and "error" in err
