"""Command-line interface tests: config resolution, artifact layout, exit
codes, and byte-level determinism of report outputs.
"""

import json
import os

import pytest

from skefl.cli import (
    ExperimentConfig,
    build_parser,
    load_config_file,
    main,
    resolve_config,
)
from skefl.errors import ConfigurationError

BENCH_HEADER = "section,op,backend,n,f,m,reps,value,unit"


def run_cli(args):
    return main([str(a) for a in args])


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------


def test_config_defaults_and_hash_stability():
    cfg = ExperimentConfig()
    assert (cfg.n, cfg.f, cfg.backend) == (5, 2, "mock")
    assert cfg.config_hash() == ExperimentConfig().config_hash()
    assert cfg.config_hash() != ExperimentConfig(n=7, f=3).config_hash()
    assert len(cfg.config_hash()) == 12


def parse(argv):
    return build_parser().parse_args([str(a) for a in argv])


def test_config_precedence_file_then_flags(tmp_path):
    path = tmp_path / "exp.json"
    path.write_text(json.dumps({"n": 7, "f": 3, "seed": 42}))
    cfg = resolve_config(parse(["run", "--config", path, "--f", 2, "--n", 5]))
    assert cfg.n == 5 and cfg.f == 2 and cfg.seed == 42


def test_config_env_seed_fallback(monkeypatch):
    monkeypatch.setenv("SKEFL_SEED", "777")
    cfg = resolve_config(parse(["run"]))
    assert cfg.seed == 777
    cfg2 = resolve_config(parse(["run", "--seed", 5]))
    assert cfg2.seed == 5
    monkeypatch.delenv("SKEFL_SEED")
    assert resolve_config(parse(["run"])).seed == 0


def test_config_rejects_unknown_keys(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"n": 5, "threads": 8}))
    with pytest.raises(ConfigurationError):
        load_config_file(str(path))


def test_config_validation_via_cli(tmp_path):
    rc = run_cli(["run", "--n", 3, "--f", 5, "--out", tmp_path / "x", "--quiet"])
    assert rc == 2


# ---------------------------------------------------------------------------
# run
# ---------------------------------------------------------------------------


def test_run_writes_expected_artifacts(tmp_path):
    out = tmp_path / "run1"
    rc = run_cli(
        ["run", "--n", 3, "--f", 1, "--m", 3, "--rounds", 2, "--seed", 9,
         "--out", out, "--quiet"]
    )
    assert rc == 0
    for name in (
        "rounds.jsonl",
        "summary.json",
        "transcript.csv",
        "transcript.json",
        "trajectory.png",
        "traffic.png",
    ):
        assert (out / name).exists(), name

    lines = (out / "rounds.jsonl").read_text().strip().splitlines()
    assert len(lines) == 2
    for line in lines:
        doc = json.loads(line)
        assert set(doc) == {
            "round", "global_model", "msg_counts", "bytes_total", "phase_timings_ms"
        }

    summary = json.loads((out / "summary.json").read_text())
    assert summary["rounds"] == 2
    assert len(summary["config_hash"]) == 12
    assert len(summary["holdout_accuracy"]) == 2
    assert (out / "transcript.csv").read_text().splitlines()[0] == (
        "seq,round,sender,receiver,kind,bytes"
    )


def strip_timings(text):
    rows = []
    for line in text.strip().splitlines():
        doc = json.loads(line)
        doc.pop("phase_timings_ms")
        rows.append(doc)
    return rows


def test_run_is_deterministic_across_invocations(tmp_path):
    args = ["run", "--n", 5, "--f", 2, "--m", 3, "--rounds", 3, "--seed", 4, "--quiet"]
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    assert run_cli(args + ["--out", out_a]) == 0
    assert run_cli(args + ["--out", out_b]) == 0

    assert (out_a / "transcript.csv").read_bytes() == (out_b / "transcript.csv").read_bytes()
    assert (out_a / "transcript.json").read_bytes() == (out_b / "transcript.json").read_bytes()
    assert strip_timings((out_a / "rounds.jsonl").read_text()) == strip_timings(
        (out_b / "rounds.jsonl").read_text()
    )
    assert (out_a / "summary.json").read_bytes() == (out_b / "summary.json").read_bytes()


# ---------------------------------------------------------------------------
# attack
# ---------------------------------------------------------------------------


def test_attack_reports_secure_default(tmp_path):
    out = tmp_path / "atk"
    rc = run_cli(
        ["attack", "--n", 3, "--f", 1, "--m", 2, "--trials", 200, "--seed", 2,
         "--out", out, "--quiet"]
    )
    assert rc == 0
    doc = json.loads((out / "attack.json").read_text())
    assert set(doc) >= {"reconstruction", "game", "garbling_off_control", "secure"}
    assert doc["reconstruction"]["exact"] is False
    assert doc["reconstruction"]["shares_found"] <= 1
    assert doc["game"]["passed"] is True
    assert doc["garbling_off_control"]["accuracy"] >= 0.99
    assert doc["secure"] is True
    assert (out / "attack.png").exists()


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------


def test_verify_accepts_honest_round(tmp_path):
    out = tmp_path / "v_ok"
    rc = run_cli(["verify", "--n", 3, "--f", 1, "--m", 2, "--seed", 3, "--out", out, "--quiet"])
    assert rc == 0
    doc = json.loads((out / "verify.json").read_text())
    assert doc["results"] == {"1": 1, "2": 1, "3": 1}
    assert doc["all_ok"] is True


def test_verify_flags_tampered_share(tmp_path):
    out = tmp_path / "v_bad"
    rc = run_cli(
        ["verify", "--n", 3, "--f", 1, "--m", 2, "--seed", 3, "--tamper",
         "--out", out, "--quiet"]
    )
    assert rc == 1
    doc = json.loads((out / "verify.json").read_text())
    assert doc["all_ok"] is False
    assert 0 in doc["results"].values()


def test_verify_flags_dropped_share(tmp_path):
    out = tmp_path / "v_drop"
    rc = run_cli(
        ["verify", "--n", 3, "--f", 1, "--m", 2, "--seed", 3, "--drop",
         "--out", out, "--quiet"]
    )
    assert rc == 1
    doc = json.loads((out / "verify.json").read_text())
    assert doc["all_ok"] is False


# ---------------------------------------------------------------------------
# bench
# ---------------------------------------------------------------------------


def test_bench_emits_csv_and_figure(tmp_path):
    out = tmp_path / "bench"
    rc = run_cli(
        ["bench", "--n", 3, "--f", 1, "--m", 6, "--reps", 2, "--seed", 1,
         "--out", out, "--quiet"]
    )
    assert rc == 0
    lines = (out / "bench.csv").read_text().strip().splitlines()
    assert lines[0] == BENCH_HEADER
    rows = [line.split(",") for line in lines[1:]]
    sections = {r[0] for r in rows}
    assert {"atss", "round", "ratio"} <= sections
    ratio_rows = [r for r in rows if r[0] == "ratio"]
    assert len(ratio_rows) == 1
    assert float(ratio_rows[0][7]) > 0
    assert (out / "bench.png").exists()


def test_cli_rejects_unknown_config_file(tmp_path):
    missing = tmp_path / "nope.json"
    rc = run_cli(["run", "--config", missing, "--out", tmp_path / "o", "--quiet"])
    assert rc == 2
