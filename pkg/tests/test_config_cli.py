import json
import subprocess
import sys

import numpy as np
import pytest
import yaml

from sharpfront.cli import main
from sharpfront.config import ConfigError, from_dict, load_config


def _write(tmp_path, cfg):
    cfg = {"output": {"dir": str(tmp_path / "out")}, **cfg}
    p = tmp_path / "run.yaml"
    p.write_text(yaml.safe_dump(cfg))
    return p


SMALL = {
    "speed": {"method": "constant", "value": 2.0},
    "hopf": {"times": [0.0, 0.5], "grid_h": 0.25},
    "hj": {"h": 0.1, "T": 0.5, "times": [0.0, 0.5]},
    "simulate": {"epsilon": 0.25, "T": 0.5, "times": [0.0, 0.5], "pad": 3.0},
}


def test_defaults_validate():
    cfg = from_dict({})
    assert cfg.workers == 1
    assert cfg.curve().area() == pytest.approx(np.pi, rel=1e-3)


@pytest.mark.parametrize("bad", [
    {"nonlinearity": {"bogus": 1}},
    {"geometry": {"shape": "triangle"}},
    {"speed": {"method": "oracle"}},
    {"hj": {"mode": "weno"}},
    {"hj": {"alphas": [0.1, 0.2]}},
    {"simulate": {"epsilon": 2.0}},
    {"converge": {"epsilons": [0.02, 0.04]}},
    {"nonlinearity": {"amplitude": {"modes": [[1, 0, 2.0, 0.0]]}}},
    {"workers": 0},
])
def test_rejects_invalid(bad):
    with pytest.raises(ConfigError):
        from_dict(bad)


def test_missing_files(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.yaml")
    with pytest.raises(ConfigError):
        from_dict({"geometry": {"shape": "polygon", "file": str(tmp_path / "none.csv")}})


def test_check_nonlinearity_ok(tmp_path):
    assert main(["check-nonlinearity", str(_write(tmp_path, {}))]) == 0
    report = (tmp_path / "out" / "nonlinearity-report.txt").read_text()
    assert "nonnegative: pass" in report


def test_check_nonlinearity_bistable(tmp_path, capsys):
    p = _write(tmp_path, {"nonlinearity": {"profile": "bistable", "r": 0.3, "kpp": False}})
    assert main(["check-nonlinearity", str(p)]) == 1
    assert "nonnegative: FAIL" in (tmp_path / "out" / "nonlinearity-report.txt").read_text()
    assert "nonnegative" in capsys.readouterr().err


def test_negative_amplitude_exit_1(tmp_path):
    p = _write(tmp_path, {"nonlinearity": {"amplitude": {"base": 1.0, "modes": [[1, 0, 1.5, 0.0]]}}})
    assert main(["check-nonlinearity", str(p)]) == 1


def test_unknown_key_exit_1(tmp_path):
    assert main(["hopf", str(_write(tmp_path, {"hopf": {"colour": "red"}}))]) == 1


def test_runtime_failure_exit_2(tmp_path):
    # valid config, but the solver box exceeds the node cap
    p = _write(tmp_path, {"simulate": {"epsilon": 0.02, "T": 1.0, "times": [1.0], "node_cap": 1000}})
    assert main(["simulate", str(p)]) == 2
    # cutoff larger than the curvature allows is detected by the Hopf engine
    q = _write(tmp_path, {"hopf": {"delta": 0.5}})
    assert main(["hopf", str(q)]) == 2


@pytest.mark.parametrize("cmd,expected", [
    ("speed-table", ["speed-table.csv"]),
    ("hopf", ["hopf-interface-0.csv", "hopf-interface-0.5.csv", "hopf-grid-0.5.bin"]),
    ("hj", ["hj-levelset-0.5.csv", "hj-metrics.csv"]),
    ("simulate", ["u-0.5.bin", "u-0.5.bin.hdr", "simulate-summary.csv"]),
])
def test_subcommands_write_artifacts_and_manifest(tmp_path, cmd, expected):
    p = _write(tmp_path, SMALL)
    assert main([cmd, str(p)]) == 0
    out = tmp_path / "out"
    for name in expected:
        assert (out / name).exists(), name
    manifest = json.loads((out / "manifest.json").read_text())
    files = {e["file"]: e for e in manifest["outputs"]}
    for name in expected:
        assert files[name]["subcommand"] == cmd
        assert len(files[name]["sha256"]) == 64
        assert files[name]["config_sha256"] == load_config(p).digest


def test_speed_table_homogeneous_kpp(tmp_path):
    p = _write(tmp_path, {"speed": {"method": "kpp_oracle"}})
    assert main(["speed-table", str(p)]) == 0
    rows = (tmp_path / "out" / "speed-table.csv").read_text().splitlines()[1:]
    assert len(rows) == 16
    assert all(abs(float(r.split(",")[1]) - 2.0) < 1e-3 for r in rows)


def test_repeat_runs_are_byte_identical(tmp_path):
    p = _write(tmp_path, SMALL)
    assert main(["hj", str(p)]) == 0
    first = (tmp_path / "out" / "hj-metrics.csv").read_bytes()
    assert main(["hj", str(p)]) == 0
    assert (tmp_path / "out" / "hj-metrics.csv").read_bytes() == first


def test_converge_rows(tmp_path):
    p = _write(tmp_path, {**SMALL, "converge": {"epsilons": [0.16, 0.08], "beta": 0.7, "tau": 0.3, "T": 0.6,
                                                "times": [0.3, 0.6], "pad": 10.0}})
    assert main(["converge", str(p)]) == 0
    assert len((tmp_path / "out" / "convergence.csv").read_text().splitlines()) == 1 + 2 * 2


def test_console_entry_version():
    r = subprocess.run([sys.executable, "-m", "sharpfront.cli", "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout.startswith("sharpfront ")
