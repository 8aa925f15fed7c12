import json
import subprocess
import sys

import pytest

from rtbatch.cli import main
from rtbatch.harness.trace import load_trace, save_trace
from rtbatch.profile import load_profile

from conftest import RN50, req


def run(*argv):
    return main([str(a) for a in argv])


def test_profile_synth_counts_and_round_trip(tmp_path, capsys):
    out = tmp_path / "p.jsonl"
    assert run("profile", "synth", "--model", "rn50", "--shape", "3x224x224", "--base-us", 2000,
               "--per-frame-us", 1000, "--max-batch", 32, "-o", out) == 0
    prof = load_profile(out)
    assert len(list(prof.entries())) == 64
    assert prof.max_batch("rn50", RN50.shape.halved()) == 32
    assert run("profile", "validate", out) == 0


def test_profile_synth_duplicate_fails(capsys):
    code = run("profile", "synth", "--model", "rn50", "--shape", "3x224x224", "--model", "rn50",
               "--shape", "3x224x224", "--base-us", 1, "--per-frame-us", 1)
    assert code != 0
    assert "duplicate" in capsys.readouterr().err


def test_profile_validate_bad_file(tmp_path, capsys):
    p = tmp_path / "bad.jsonl"
    p.write_text("garbage\n")
    assert run("profile", "validate", p) == 1
    assert "line 1" in capsys.readouterr().err


def test_trace_gen_deterministic_and_means(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    args = ["trace", "gen", "--seed", 42, "--requests", 25, "--mean-period-ms", 50,
            "--mean-deadline-ms", 50]
    assert run(*args, "-o", a) == 0 and run(*args, "-o", b) == 0
    assert a.read_bytes() == b.read_bytes()
    reqs = load_trace(a)
    assert abs(sum(r.period_us for r in reqs) / 25 - 50_000) <= 500
    assert abs(sum(r.relative_deadline_us for r in reqs) / 25 - 50_000) <= 500


def test_trace_gen_empty_and_unseeded(tmp_path, capsys):
    p = tmp_path / "e.json"
    assert run("trace", "gen", "--requests", 0, "-o", p) == 0
    assert json.loads(p.read_text()) == {"requests": []}
    assert "seed:" in capsys.readouterr().err


def _trace(tmp_path, reqs):
    p = tmp_path / "t.json"
    save_trace(reqs, p)
    return p


@pytest.fixture
def prof_file(tmp_path):
    p = tmp_path / "prof.jsonl"
    assert run("profile", "synth", "--model", "rn50", "--shape", "3x224x224", "--base-us", 2000,
               "--per-frame-us", 1000, "--max-batch", 8, "-o", p) == 0
    return p


def _admit_rows(capsys):
    lines = capsys.readouterr().out.strip().splitlines()
    return [dict(zip(lines[0].split("\t"), ln.split("\t"))) for ln in lines[1:]]


def test_admit_light_trace(tmp_path, capsys, prof_file):
    t = _trace(tmp_path, [req("a", 100_000, 100_000, 5), req("b", 200_000, 150_000, 5)])
    assert run("admit", "--trace", t, "--profile", prof_file) == 0
    rows = _admit_rows(capsys)
    assert [r["decision"] for r in rows] == ["admitted", "admitted"]
    assert all(r["predicted_max_latency_us"] for r in rows)


def test_admit_overload(tmp_path, capsys, prof_file):
    t = _trace(tmp_path, [req(f"r{i}", 2_000, 200_000, 50) for i in range(4)])
    assert run("admit", "--trace", t, "--profile", prof_file) == 0
    rows = _admit_rows(capsys)
    assert rows[0]["decision"] == "admitted"
    assert any(r["decision"] == "rejected(1)" for r in rows)


def test_admit_job_longer_than_window(tmp_path, capsys, prof_file):
    t = _trace(tmp_path, [req("short", 100_000, 4_000, 3)])
    assert run("admit", "--trace", t, "--profile", prof_file) == 0
    (row,) = _admit_rows(capsys)
    assert row["decision"] == "rejected(2)"


def test_admit_missing_profile_entry(tmp_path, capsys):
    prof = tmp_path / "p.jsonl"
    run("profile", "synth", "--model", "vgg16", "--shape", "3x224x224", "--base-us", 1,
        "--per-frame-us", 1, "-o", prof)
    t = _trace(tmp_path, [req("a", 100_000, 100_000, 5)])
    assert run("admit", "--trace", t, "--profile", prof) == 0
    (row,) = _admit_rows(capsys)
    assert row["decision"] == "rejected(1)" and "no profile entry" in row["reason"]


def test_run_admitted_trace_has_no_misses(tmp_path, capsys, prof_file):
    t = _trace(tmp_path, [req("a", 40_000, 80_000, 20), req("b", 30_000, 60_000, 20, first=5_000)])
    assert run("run", "--policy", "deeprt", "--trace", t, "--out", tmp_path / "o",
               "--profile", prof_file,
               "--no-early-dispatch", "--no-adaptation") == 0
    summary = json.loads((tmp_path / "o" / "summary.json").read_text())
    assert summary["miss_rate"] == 0 and summary["admitted"] == 2
    assert json.loads((tmp_path / "o" / "admitted.json").read_text()) == ["a", "b"]


def test_compare_four_policies_same_frames(tmp_path, capsys, prof_file):
    t = _trace(tmp_path, [req("a", 40_000, 80_000, 20), req("b", 30_000, 60_000, 20, first=5_000)])
    out = tmp_path / "c"
    assert run("compare", "--policies", "deeprt,aimd,batch,batch-delay", "--trace", t,
               "--out", out, "--profile", prof_file) == 0
    rows = capsys.readouterr().out.strip().splitlines()
    assert len(rows) == 5
    frame_sets = []
    for name in ("deeprt", "aimd", "batch", "batch-delay"):
        lines = (out / name / "frames.csv").read_text().splitlines()[1:]
        frame_sets.append(sorted(ln.split(",")[0] for ln in lines))
    assert all(s == frame_sets[0] for s in frame_sets)


def test_run_inject_with_and_without_adaptation(tmp_path, capsys, prof_file):
    t = _trace(tmp_path, [req("a", 100_000, 200_000, 40), req("b", 100_000, 200_000, 40)])
    misses = {}
    for flag in ([], ["--no-adaptation"]):
        out = tmp_path / ("on" if not flag else "off")
        assert run("run", "--trace", t, "--out", out, "--inject", "10:5:100000",
                   "--profile", prof_file, *flag) == 0
        assert json.loads((out / "summary.json").read_text())["admitted"] == 2
        misses[bool(flag)] = json.loads((out / "summary.json").read_text())["missed"]
    assert misses[False] <= misses[True]


def test_inject_needs_worker_policy(tmp_path, capsys):
    t = _trace(tmp_path, [req("a", 100_000, 200_000, 4)])
    assert run("run", "--policy", "batch", "--trace", t, "--out", tmp_path / "x",
               "--inject", "1:1:1") == 1
    assert "inject" in capsys.readouterr().err


def test_bad_policy_exits_nonzero(tmp_path, capsys):
    t = _trace(tmp_path, [req("a", 100_000, 200_000, 4)])
    assert run("run", "--policy", "fifo", "--trace", t, "--out", tmp_path / "x") == 1


def test_argparse_error_exit_code(capsys):
    with pytest.raises(SystemExit) as exc:
        run("nonsense")
    assert exc.value.code == 2


def test_module_entry_point(tmp_path):
    p = subprocess.run([sys.executable, "-m", "rtbatch", "trace", "gen", "--seed", "1",
                        "--requests", "2"], capture_output=True, text=True, check=True)
    assert len(json.loads(p.stdout)["requests"]) == 2
