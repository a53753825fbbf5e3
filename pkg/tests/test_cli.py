"""End-to-end command-line tests via subprocess."""

import csv
import json
import subprocess
import sys

import pytest

FAST_ENV_FLAGS = [
    "--d", "4", "--diffusion", "150", "--flow", "5", "--dt", "2e-4",
]
FAST_RUN_FLAGS = [
    "--n1", "60", "--t-s", "0.4", "--m", "2",
    "--bits", "8", "--reps", "2", "--n-samples", "10000",
]


def run_cli(*args, timeout=240):
    return subprocess.run(
        [sys.executable, "-m", "mcvdsim", *args],
        capture_output=True,
        text=True,
        timeout=timeout,
    )


def test_version_flag():
    result = run_cli("--version")
    assert result.returncode == 0
    assert "mcvdsim" in result.stdout


def test_channel_writes_profile(tmp_path):
    result = run_cli(
        "channel", "--preset", "harsh", "--t-s", "0.5", "--m", "2",
        "--n-samples", "10000", "--dt", "5e-4", "--seed", "9",
        "--out", str(tmp_path),
    )
    assert result.returncode == 0, result.stderr
    assert "p_0 =" in result.stdout
    lines = (tmp_path / "profile.csv").read_text().splitlines()
    assert lines[0].startswith("t_s,")
    assert (tmp_path / "manifest.json").exists()


def test_ber_single_point(tmp_path):
    result = run_cli(
        "ber", *FAST_ENV_FLAGS, *FAST_RUN_FLAGS, "--seed", "3",
        "--out", str(tmp_path),
    )
    assert result.returncode == 0, result.stderr
    with open(tmp_path / "ber.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert [r["scheme"] for r in rows] == ["bcsk", "bcsk-cpa"]
    for row in rows:
        assert 0.0 <= float(row["ber_sim"]) <= 1.0
        assert row["bits_tested"] == "16"


def test_ber_single_scheme_flag(tmp_path):
    result = run_cli(
        "ber", *FAST_ENV_FLAGS, *FAST_RUN_FLAGS, "--scheme", "bcsk",
        "--out", str(tmp_path),
    )
    assert result.returncode == 0, result.stderr
    with open(tmp_path / "ber.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert [r["scheme"] for r in rows] == ["bcsk"]


def test_ber_from_config_with_overrides(tmp_path):
    first = run_cli(
        "ber", *FAST_ENV_FLAGS, *FAST_RUN_FLAGS, "--seed", "3",
        "--out", str(tmp_path / "a"),
    )
    assert first.returncode == 0, first.stderr
    second = run_cli(
        "ber", "--config", str(tmp_path / "a" / "manifest.json"),
        "--reps", "1", "--out", str(tmp_path / "b"),
    )
    assert second.returncode == 0, second.stderr
    with open(tmp_path / "b" / "ber.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert rows[0]["bits_tested"] == "8"
    manifest = json.loads((tmp_path / "b" / "manifest.json").read_text())
    assert manifest["spec"]["n_reps"] == 1


def test_eye_outputs(tmp_path):
    result = run_cli(
        "eye", "--preset", "good", "--dt", "2e-4", *FAST_RUN_FLAGS,
        "--scheme", "bcsk", "--out", str(tmp_path),
    )
    assert result.returncode == 0, result.stderr
    assert (tmp_path / "eye_good_bcsk.svg").read_text().startswith("<svg")
    assert (tmp_path / "metrics.csv").exists()
    assert (tmp_path / "eye_good_bcsk.csv").exists()


def test_reproduce_tiny_table3_is_deterministic(tmp_path):
    args = [
        "reproduce", "table3", "--seed", "42", "--reps", "2", "--bits", "6",
        "--dt", "5e-4", "--n-samples", "10000",
    ]
    first = run_cli(*args, "--out", str(tmp_path / "a"))
    second = run_cli(*args, "--out", str(tmp_path / "b"))
    assert first.returncode == 0, first.stderr
    assert second.returncode == 0, second.stderr
    names = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert "metrics.csv" in names
    for name in names:
        assert (tmp_path / "a" / name).read_bytes() == (
            tmp_path / "b" / name
        ).read_bytes(), f"{name} differs between identical runs"


def test_invalid_configuration_exits_2(tmp_path):
    result = run_cli("ber", "--d", "-1", "--out", str(tmp_path))
    assert result.returncode == 2
    assert "config error" in result.stderr


def test_unknown_target_exits_2():
    result = run_cli("reproduce", "fig9")
    assert result.returncode == 2


def test_bad_config_file_exits_2(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    result = run_cli("ber", "--config", str(bad), "--out", str(tmp_path))
    assert result.returncode == 2
    assert "config error" in result.stderr
