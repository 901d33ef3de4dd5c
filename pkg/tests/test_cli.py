import hashlib
import json
import subprocess
import sys

import pytest

from fracdn import NumericError, cli


def write(tmp_path, doc, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return p


def digest(folder):
    return {p.name: hashlib.sha256(p.read_bytes()).hexdigest() for p in sorted(folder.iterdir())}


def test_run_writes_outputs(tmp_path, capsys):
    cfg = write(tmp_path, {"experiment": "forward"})
    out = tmp_path / "out"
    assert cli.main(["run", "--config", str(cfg), "--out", str(out)]) == 0
    doc = json.loads((out / "forward.json").read_text())
    prov = doc["provenance"]
    assert prov["version"] and prov["config"]["experiment"] == "forward"
    assert "PCG64" in prov["rng"]["algorithm"]
    assert set(prov["tolerances"]) >= {"rtol", "alpha"}
    assert (out / "forward_solution.csv").exists()
    assert "PASS" in capsys.readouterr().out


@pytest.mark.parametrize("experiment", ["forward", "dnmap", "gauge-demo", "ucp-probe", "invert"])
def test_deterministic(tmp_path, experiment):
    cfg = write(tmp_path, {"experiment": experiment, "solver": {"seed": 5}})
    a, b = tmp_path / "a", tmp_path / "b"
    assert cli.main(["run", "--config", str(cfg), "--out", str(a)]) == 0
    assert cli.main(["run", "--config", str(cfg), "--out", str(b)]) == 0
    assert digest(a) == digest(b)


def test_seed_flag_overrides(tmp_path):
    cfg = write(tmp_path, {"experiment": "gauge-demo"})
    cli.main(["run", "--config", str(cfg), "--out", str(tmp_path / "a"), "--seed", "3"])
    doc = json.loads((tmp_path / "a" / "gauge-demo.json").read_text())
    assert doc["provenance"]["rng"]["seed"] == 3


def test_env_output_directory(tmp_path, monkeypatch):
    cfg = write(tmp_path, {"experiment": "forward"})
    monkeypatch.setenv("FRACDN_OUT", str(tmp_path / "env"))
    assert cli.main(["run", "--config", str(cfg)]) == 0
    assert (tmp_path / "env" / "forward.json").exists()


def test_malformed_config_exit_2(tmp_path, capsys):
    cfg = write(tmp_path, {"experiment": "forward", "grid": {"M": "many"}})
    assert cli.main(["run", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    assert "grid/M" in capsys.readouterr().err
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    assert cli.main(["validate", "--config", str(bad)]) == 2


def test_geometry_error_exit_2(tmp_path):
    cfg = write(tmp_path, {"experiment": "forward", "regions": {"omega": [[-0.5, 0.2]], "w": [[0.1, 0.6]]}})
    assert cli.main(["run", "--config", str(cfg), "--out", str(tmp_path)]) == 2


def test_check_failure_exit_1(tmp_path, capsys):
    cfg = write(tmp_path, {"experiment": "operator-xcheck", "solver": {"rtol": 1e-15, "s_values": [0.5]}})
    assert cli.main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1
    assert "FAIL  three-route agreement" in capsys.readouterr().out


def test_numeric_failure_exit_3(tmp_path, monkeypatch):
    def boom(cfg):
        raise NumericError("quadrature did not converge", {"achieved": 1e-3})

    monkeypatch.setattr(cli, "run_experiment", boom)
    cfg = write(tmp_path, {"experiment": "forward"})
    out = tmp_path / "o"
    assert cli.main(["run", "--config", str(cfg), "--out", str(out)]) == 3
    diag = json.loads((out / "diagnostics.json").read_text())
    assert diag["diagnostics"] == {"achieved": 0.001}


def test_validate_ok(tmp_path, capsys):
    cfg = write(tmp_path, {"experiment": "decay"})
    assert cli.main(["validate", "--config", str(cfg)]) == 0
    assert "decay" in capsys.readouterr().out


def test_module_entry_point(tmp_path):
    cfg = write(tmp_path, {"experiment": "decay"})
    proc = subprocess.run([sys.executable, "-m", "fracdn", "validate", "--config", str(cfg)], capture_output=True, text=True)
    assert proc.returncode == 0


def test_csv_only_output(tmp_path):
    cfg = write(tmp_path, {"experiment": "forward", "output": {"formats": ["csv"]}})
    out = tmp_path / "o"
    cli.main(["run", "--config", str(cfg), "--out", str(out)])
    assert [p.suffix for p in out.iterdir()] == [".csv"]
