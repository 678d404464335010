import json
import subprocess
import sys
from pathlib import Path

import pytest

from shearlab.checks import CheckResult
from shearlab.cli import EXIT_FAIL, EXIT_MEMORY, EXIT_OK, EXIT_REFUSED, EXIT_SCHEMA, main, run_pipeline
from shearlab.config import Scenario, bundled_scenarios, config_hash, load_scenario, parse_checks
from shearlab.report import build_manifest, emit_report, read_report

SMALL = """
name = "small"
k = [1]
times = [0.0, 2.0, 5.0]
[flow]
family = "perturbed_couette"
a = 0.05
[grid]
oracle_points = 200
[ladder]
epsilons = [0.1, 0.05, 0.025]
"""


def _write(tmp_path: Path, text: str, name="sc.toml") -> str:
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_bundled_scenarios_load():
    assert {"couette", "perturbed", "inflected"} <= set(bundled_scenarios())
    for name in bundled_scenarios():
        assert load_scenario(name).name == name


def test_parse_checks():
    assert parse_checks("a2, A3") == ("A2", "A3")
    assert parse_checks("none") == ()
    assert len(parse_checks("all")) == 10
    with pytest.raises(ValueError):
        parse_checks("A11")


@pytest.mark.parametrize("bad", [
    'k = [0]',
    'unknown_key = 1',
    '[flow]\nfamily = "perturbed_couette"\na = 2.0',
    '[ladder]\nepsilons = [0.1, 0.2, 0.05]',
    '[grid]\nkappa = 2.0',
    'checks = ["A12"]',
])
def test_schema_errors_exit_2(tmp_path, bad, capsys):
    assert main(["simulate", "--config", _write(tmp_path, bad), "--out", str(tmp_path / "o")]) == EXIT_SCHEMA
    assert "configuration error" in capsys.readouterr().err


def test_missing_config_exit_2(tmp_path):
    assert main(["simulate", "--config", str(tmp_path / "nope.toml")]) == EXIT_SCHEMA


def test_bad_checks_flag_exit_2(tmp_path):
    assert main(["simulate", "--config", _write(tmp_path, SMALL), "--checks", "B1"]) == EXIT_SCHEMA


def test_simulate_without_checks(tmp_path):
    out = tmp_path / "o"
    assert main(["simulate", "--config", _write(tmp_path, SMALL), "--out", str(out), "--checks", "none"]) == EXIT_OK
    rep = read_report(out / "report.json")
    assert rep["checks"] == [] and rep["all_passed"] is True
    assert (out / "oracle_k1.csv").exists() and (out / "norms_k1.csv").exists()
    man = json.loads((out / "manifest.json").read_text())
    assert set(man) == {"config_hash", "command", "grids", "files", "versions"}


def test_refused_scenario_exit_3(tmp_path, capsys):
    assert main(["density", "--config", "inflected", "--out", str(tmp_path / "o")]) == EXIT_REFUSED
    assert "refused" in capsys.readouterr().err


def test_memory_guard_exit_4(tmp_path):
    text = SMALL + "\n"
    text = text.replace('name = "small"', 'name = "small"\nmemory_cap_mb = 0.01')
    assert main(["density", "--config", _write(tmp_path, text), "--out", str(tmp_path / "o")]) == EXIT_MEMORY


def test_verify_couette(tmp_path, capsys):
    out = tmp_path / "v"
    code = main(["verify", "--config", "couette", "--out", str(out), "--checks", "A2,A8"])
    lines = capsys.readouterr().out.strip().splitlines()
    assert code == EXIT_OK
    assert lines[0].startswith("A2 PASS") and lines[1].startswith("A8 PASS")
    rep = read_report(out / "report.json")
    assert [c["name"] for c in rep["checks"]] == ["A2", "A8"]
    assert all(c["pass"] for c in rep["checks"])


def test_failed_check_exit_1(tmp_path, monkeypatch):
    import shearlab.cli as cli
    monkeypatch.setattr(cli, "run_check",
                        lambda name, threads, seed: CheckResult(name, "forced", 1.0, 0.0, "<=", False))
    assert main(["verify", "--config", "couette", "--out", str(tmp_path), "--checks", "A2"]) == EXIT_FAIL


def test_report_round_trip(tmp_path):
    res = [CheckResult("A2", "t", 1e-9, 1e-6, "<=", True, {"z": complex(1, 2), "arr": [1, 2]})]
    man = build_manifest("abc", "verify", {"n": 3}, ["x.csv"])
    emit_report(res, tmp_path, man, {"name": "s"})
    rep = read_report(tmp_path / "report.json")
    assert rep["checks"][0]["details"]["z"] == {"re": 1.0, "im": 2.0}
    assert rep["manifest"]["config_hash"] == "abc" and rep["all_passed"]
    emit_report([], tmp_path / "empty", man)
    assert read_report(tmp_path / "empty" / "report.json")["checks"] == []


def test_config_hash_tracks_content():
    a = Scenario.model_validate({"name": "x", "k": [1]})
    b = Scenario.model_validate({"k": [1], "name": "x"})
    c = Scenario.model_validate({"name": "x", "k": [2]})
    assert config_hash(a) == config_hash(b) != config_hash(c)


def test_density_cache_is_bit_identical(tmp_path):
    sc = load_scenario(_write(tmp_path, SMALL))
    cache = tmp_path / "cache"
    run_pipeline(sc, "density", tmp_path / "a", cache_dir=cache)
    stored = sorted(cache.rglob("*.npz"))
    assert len(stored) == 6
    run_pipeline(sc, "density", tmp_path / "b", cache_dir=cache, threads=2)
    for name in ("stream_k1.csv", "log_coefficient_k1.csv", "manifest.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_dump_kernel(tmp_path):
    sc = load_scenario(_write(tmp_path, SMALL))
    run_pipeline(sc, "dump-kernel", tmp_path / "k")
    head = (tmp_path / "k" / "kernel_k1.csv").read_text().splitlines()[0]
    assert head == "y,z,channel,extended"
    with pytest.raises(ValueError):
        run_pipeline(sc, "teleport", tmp_path / "z")


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "shearlab.cli", "dump-kernel", "--config",
                           _write(tmp_path, SMALL), "--out", str(tmp_path / "o")],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr


def test_profiles_tables(tmp_path):
    text = SMALL + """
[profiles]
interior_window = [100.0, 140.0]
interior_samples = 41
boundary_window = [20.0, 100.0]
boundary_samples = 41
"""
    sc = load_scenario(_write(tmp_path, text))
    run_pipeline(sc, "profiles", tmp_path / "p")
    for name in ("interior_profiles_k1.csv", "boundary_profiles_k1.csv", "profile_fit_k1.csv"):
        assert (tmp_path / "p" / name).stat().st_size > 0
    head = (tmp_path / "p" / "boundary_profiles_k1.csv").read_text().splitlines()[0].split(",")
    assert head[1:3] == ["alpha1_re", "alpha1_im"] and head[-1] == "condition"
