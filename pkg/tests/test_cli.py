from __future__ import annotations

import csv
import json
import math

import numpy as np
import pytest

from bbspectra import io
from bbspectra.cli import main


def run(tmp_path, *argv, name="out"):
    out = tmp_path / name
    code = main([*argv, "--out", str(out)])
    return code, out


def usage_code(argv):
    with pytest.raises(SystemExit) as info:
        main(argv)
    return info.value.code


def rows(path):
    with open(path) as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def test_limit(tmp_path, profile):
    code, out = run(tmp_path, "limit", "--dim", "2", "--mbar", "1", "--munder", "1")
    assert code == 0
    rec = io.read_json(out / "limit.json")
    assert abs(rec["lambda0"] - 8.190277132365612) <= 1e-6 * 8.19
    manifest = io.read_json(out / "manifest.json")
    assert manifest["config_hash"] == rec["config_hash"]
    assert set(manifest["records"]) == {"profile.csv", "limit.json"}
    assert manifest["version"] and manifest["wall_clock"] >= 0
    assert (out / "profile.csv").read_text().startswith(f"# config_hash={rec['config_hash']}")


def test_limit_usage_errors(capsys):
    assert usage_code(["limit", "--dim", "2", "--mbar", "1"]) == 2
    assert usage_code(["limit", "--dim", "2", "--mbar", "1", "--munder", "1", "--R", "0.3"]) == 2
    assert usage_code(["limit", "--dim", "2", "--mbar", "-1", "--munder", "1"]) == 2
    assert usage_code(["limit", "--dim", "x", "--mbar", "1", "--munder", "1"]) == 2
    assert usage_code(["nosuch"]) == 2
    assert "error" in capsys.readouterr().err


def test_modes_deterministic(tmp_path):
    code, a = run(tmp_path, "modes", "--lmax", "6", name="a")
    assert code == 0
    _, b = run(tmp_path, "modes", "--lmax", "6", name="b")
    g = [float(r["g_r0"]) for r in rows(a / "modes.csv")]
    assert len(g) == 6 and np.all(np.diff(g) < 0)
    for name in ("modes.csv", "modes.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    assert usage_code(["modes", "--lmax", "0"]) == 2


def test_asymmetry_zero_amplitude(tmp_path):
    code, out = run(tmp_path, "asymmetry", "--amps", "0", "--grid", "128", "--allow-coarse", "--no-noise")
    assert code == 0
    rec = io.read_json(out / "asymmetry.json")["records"][0]
    assert rec["gap"] == 0


def test_asymmetry_large_amplitude(tmp_path, capsys):
    code, _ = run(tmp_path, "asymmetry", "--amps", "0.6", "--grid", "128", "--allow-coarse")
    assert code == 1
    assert "amplitude too large" in capsys.readouterr().err


def test_asymmetry_band(tmp_path):
    code, out = run(tmp_path, "asymmetry", "--mode", "2", "--amps", "0.08", "--grid", "1024", "--no-noise")
    assert code == 0
    rec = io.read_json(out / "asymmetry.json")["records"][0]
    assert rec["in_band"] is True
    assert abs(rec["ratio"] - rec["prediction"]) <= 0.1 * rec["prediction"]


def test_optimize(tmp_path):
    code, out = run(tmp_path, "optimize", "--domain", "disk:1.0", "--eps", "0.01", "--grid", "256")
    assert code == 0
    diag = io.read_json(out / "diagnostics.json")
    assert diag["components4"] == 1
    mask = io.read_pgm(out / "mask.pgm")
    np.testing.assert_array_equal(mask, io.rle_to_mask(io.read_json(out / "mask.json")["rle"]))
    assert mask.sum() == round(diag["eps"] / diag["h"] ** 2)
    assert f"config_hash={diag['config_hash']}".encode() in (out / "mask.pgm").read_bytes()[:64]


def test_invalid_domain():
    assert usage_code(["optimize", "--domain", "blob:1", "--eps", "0.01"]) == 2
    assert usage_code(["optimize", "--domain", "disk:1", "--eps", "1.5"]) == 2


def test_sweep(tmp_path, profile):
    code, out = run(tmp_path, "sweep", "--domain", "ellipse:1.0,0.6", "--eps", "0.04,0.02,0.01,0.005",
                    "--cells-per-radius", "12")
    assert code == 0
    scaled = np.array([float(r["scaled_lambda"]) for r in rows(out / "sweep.csv")])
    assert np.all(np.diff(scaled) <= 1e-12 * scaled[:-1])
    assert abs(scaled[-1] / profile.lambda0 - 1) <= 0.05
    assert "gap_fit" in io.read_json(out / "sweep.json")


def test_config_file_and_overrides(tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text('dim = 2\nmbar = 1.0\nmunder = 2.0\n')
    code, out = run(tmp_path, "limit", "--config", str(cfg), "--munder", "1", name="a")
    assert code == 0
    manifest = io.read_json(out / "manifest.json")
    assert manifest["config"]["munder"] == 1.0
    cfg.write_text('[limit]\ndim = 2\nmbar = 1.0\nmunder = 1.0\n')
    _, out2 = run(tmp_path, "limit", "--config", str(cfg), name="b")
    assert io.read_json(out2 / "limit.json") == io.read_json(out / "limit.json")
    cfg.write_text('dim = 2\nmbar = 1.0\nmunder = 1.0\nbogus = 3\n')
    assert usage_code(["limit", "--config", str(cfg)]) == 2
    cfg.write_text('dim = 2\nmbar = "one"\nmunder = 1.0\n')
    assert usage_code(["limit", "--config", str(cfg)]) == 2


def test_pool_matches_serial(tmp_path, monkeypatch):
    argv = ["sweep", "--domain", "ellipse:1.0,0.6", "--eps", "0.04,0.01", "--cells-per-radius", "8",
            "--no-continuation"]
    _, serial = run(tmp_path, *argv, name="serial")
    monkeypatch.setenv("BBSPECTRA_THREADS", "2")
    _, pooled = run(tmp_path, *argv, name="pooled")
    assert (serial / "sweep.csv").read_bytes() == (pooled / "sweep.csv").read_bytes()
    monkeypatch.setenv("BBSPECTRA_THREADS", "many")
    assert usage_code(argv) == 2


def test_verify_quick(tmp_path):
    code, out = run(tmp_path, "verify", "--quick")
    assert code == 0
    report = io.read_json(out / "report.json")
    status = {c["criterion"]: c["status"] for c in report["criteria"]}
    assert len(status) == 10
    assert status[5] == status[6] == "skipped"
    assert all(s == "pass" for k, s in status.items() if k not in (5, 6))


def test_verify_coarse_grid_is_inconclusive(tmp_path):
    code, out = run(tmp_path, "verify", "--grid", "256", "--cells-per-radius", "12")
    report = io.read_json(out / "report.json")
    status = {c["criterion"]: c["status"] for c in report["criteria"]}
    assert status[5] == "inconclusive" and status[6] == "inconclusive"
    assert code == 0
    code, _ = run(tmp_path, "verify", "--grid", "256", "--cells-per-radius", "12", "--strict", name="strict")
    assert code == 1
