from __future__ import annotations

import json
import subprocess
import sys

import pytest

from segkin.cli import RunConfig, main, parse_and_validate, read_csv_table, validate, verify_file
from segkin.errors import ConfigurationError


def run_cli(*args):
    return subprocess.run([sys.executable, "-m", "segkin.cli", *args], capture_output=True,
                          text=True)


def test_phase_diagram_csv_layout(tmp_path):
    assert main(["phase-diagram", "--n-samples", "9", "--out-dir", str(tmp_path)]) == 0
    lines = (tmp_path / "phase_diagram.csv").read_text().splitlines()
    body = [ln for ln in lines if not ln.startswith("#")]
    assert body[0] == "beta,m,rho_plus,rho_minus,regime"
    assert len(body) == 10
    assert lines[0].startswith("#")
    meta, header, rows = read_csv_table(tmp_path / "phase_diagram.csv")
    assert "config_hash" in meta and header[0] == "beta"
    assert {r[-1] for r in rows} <= {"subcritical", "critical", "supercritical"}


def test_dispersion_k_ascending(tmp_path):
    assert main(["dispersion", "--n-samples", "25", "--out-dir", str(tmp_path)]) == 0
    _, header, rows = read_csv_table(tmp_path / "dispersion.csv")
    ks = [float(r[header.index("k")]) for r in rows]
    assert ks == sorted(ks) and len(ks) == 25


def test_front_rejects_subcritical_beta(tmp_path):
    res = run_cli("front", "--beta", "0.5", "--out-dir", str(tmp_path))
    assert res.returncode == 2
    err = json.loads(res.stderr.strip().splitlines()[-1])
    assert err["error"] == "ConfigurationError"
    assert any("beta" in v for v in err["violations"])
    assert not (tmp_path / "front.csv").exists()


def test_all_violations_reported():
    with pytest.raises(ConfigurationError) as exc:
        validate("simulate", {"dt": -1.0, "nx": 0, "transport": "weno"})
    assert len(exc.value.violations) >= 3


def test_unknown_flag_is_json_error(capsys):
    assert main(["dispersion", "--no-such-flag", "1"]) == 2
    err = json.loads(capsys.readouterr().err.strip())
    assert err["error"] == "ConfigurationError"


def test_config_roundtrip_byte_identical(tmp_path):
    cfg, _ = parse_and_validate(["eigen", "--k", "0.5", "--alphas", "0.5,1"])
    text = cfg.to_json()
    again = RunConfig.from_json(text)
    assert again.to_json() == text and again.hash == cfg.hash
    path = tmp_path / "cfg.json"
    path.write_text(text)
    from_file, _ = parse_and_validate(["eigen", "--config", str(path)])
    assert from_file.to_json() == text


def test_flags_override_config_file(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"beta": 3.0, "k": 0.5}))
    cfg, _ = parse_and_validate(["eigen", "--config", str(path), "--k", "0.7"])
    assert cfg.params["beta"] == 3.0 and cfg.params["k"] == 0.7


def test_out_dir_not_in_hash(tmp_path):
    a, _ = parse_and_validate(["dispersion", "--out-dir", str(tmp_path / "a")])
    b, _ = parse_and_validate(["dispersion", "--out-dir", str(tmp_path / "b")])
    assert a.hash == b.hash


def test_print_config(capsys):
    assert main(["dispersion", "--k-max", "3", "--print-config"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["subcommand"] == "dispersion" and doc["params"]["k_max"] == 3.0


def test_deterministic_outputs(tmp_path):
    args = ["eigen", "--k", "0.3", "--alphas", "0,1", "--nv", "32"]
    assert main(args + ["--out-dir", str(tmp_path / "a")]) == 0
    assert main(args + ["--out-dir", str(tmp_path / "b")]) == 0
    for name in ("eigen.csv", "eigen.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_verify_ok_and_tamper(tmp_path, capsys):
    assert main(["dispersion", "--n-samples", "5", "--out-dir", str(tmp_path)]) == 0
    csv, js = tmp_path / "dispersion.csv", tmp_path / "dispersion.json"
    assert verify_file(csv)[0] and verify_file(js)[0]
    assert main(["verify", str(csv), str(js)]) == 0
    text = csv.read_text().replace('"n_samples":5', '"n_samples":6')
    csv.write_text(text)
    ok, msg = verify_file(csv)
    assert not ok and "mismatch" in msg
    assert main(["verify", str(csv)]) == 1


def test_simulate_small_run_and_snapshots(tmp_path):
    args = ["simulate", "--nx", "16", "--nv", "32", "--t-end", "1.0", "--dt", "0.1",
            "--deltas", "1e-4", "--snapshot-every", "5", "--out-dir", str(tmp_path)]
    assert main(args) == 0
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["config"]["subcommand"] == "simulate"
    assert verify_file(tmp_path / "snapshots.json")[0]
    assert any(p.suffix == ".bin" for p in tmp_path.iterdir())


def test_simulate_cfl_violation_rejected():
    with pytest.raises(ConfigurationError):
        parse_and_validate(["simulate", "--dt", "5.0", "--nx", "256"])


def test_characteristics_zero_field(tmp_path):
    args = ["characteristics", "--field", "zero", "--x", "0.0", "--v", "1.0", "--s-span", "2.0",
            "--n-samples", "3", "--out-dir", str(tmp_path)]
    assert main(args) == 0
    _, header, rows = read_csv_table(tmp_path / "characteristics.csv")
    last = dict(zip(header, rows[-1]))
    assert float(last["X"]) == pytest.approx(2.0, abs=1e-10)
