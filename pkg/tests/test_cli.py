import json
import subprocess
import sys
from pathlib import Path

import pytest

from jumpfield.cli import main, run_config, validate_config
from jumpfield.errors import ConfigInvalid


def hydro_config(seed=11):
    return {
        "kind": "hydro",
        "master_seed": seed,
        "kernel": {"name": "gaussian", "dimension": 1,
                   "params": {"width": 1.0, "center": [0.0]}},
        "intensity": {"name": "constant+bump",
                      "params": {"c": 1.0, "height": 0.5, "width": 2.0,
                                 "center": 0.0}},
        "test_function": {"name": "bump",
                          "params": {"radius": 2.0, "height": 1.0,
                                     "center": 0.5}},
        "scaling": {"kappa": 2, "eps_ladder": [1.0, 0.5, 0.25], "t": 0.5,
                    "weak": False, "L_macro": 20.0, "dx": 0.03125},
    }


def simulate_config(seed=5):
    return {
        "kind": "simulate",
        "master_seed": seed,
        "kernel": {"name": "gaussian", "dimension": 1,
                   "params": {"width": 1.0, "center": [0.0]}},
        "intensity": {"name": "step", "params": {"z0": 1.0, "z1": 3.0}},
        "grid": {"dimension": 1, "side": 10.0, "points": 512},
        "test_function": {"name": "bump",
                          "params": {"radius": 2.0, "height": -0.8,
                                     "center": 0.5}},
        "replicas": 400,
        "snapshot_times": [0.5, 1.0],
        "windows": [[-4.0, -1.0], [1.0, 4.0]],
    }


def test_validate_config_accepts_valid():
    validate_config(hydro_config())


def test_validate_config_missing_seed():
    cfg = hydro_config()
    del cfg["master_seed"]
    with pytest.raises(ConfigInvalid, match="master_seed"):
        validate_config(cfg)


def test_validate_config_unknown_key():
    cfg = hydro_config()
    cfg["extra"] = 1
    with pytest.raises(ConfigInvalid, match="extra"):
        validate_config(cfg)


def test_missing_physics_parameter(tmp_path):
    cfg = hydro_config()
    del cfg["kernel"]["params"]["width"]
    assert run_config_error(cfg, tmp_path)


def run_config_error(cfg, tmp_path):
    try:
        run_config(cfg, tmp_path / "out")
    except (ConfigInvalid, KeyError):
        return True
    return False


def test_hydro_run_writes_artifacts(tmp_path):
    out = tmp_path / "out"
    code = run_config(hydro_config(), out)
    assert code == 0
    assert (out / "results.csv").exists()
    header = (out / "results.csv").read_text().splitlines()[0]
    for col in ("eps", "exponent", "reference", "deviation"):
        assert col in header
    verdict = json.loads((out / "verdict.json").read_text())
    assert verdict["pass"]
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["master_seed"] == 11
    assert "config_sha256" in manifest


def test_simulate_reproducible_bytes(tmp_path):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert run_config(simulate_config(), out1) == 0
    assert run_config(simulate_config(), out2) == 0
    assert (out1 / "results.csv").read_bytes() \
        == (out2 / "results.csv").read_bytes()
    assert (out1 / "verdict.json").read_bytes() \
        == (out2 / "verdict.json").read_bytes()
    rows = (out1 / "results.csv").read_text().splitlines()
    assert "reference" in rows[0] and "deviation" in rows[0]
    assert (out1 / "snapshot_t0.5.f64").exists()
    assert (out1 / "snapshot_t0.5.json").exists()


def test_seed_override_changes_results(tmp_path):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    run_config(simulate_config(), out1)
    run_config(simulate_config(), out2, seed_override=99)
    assert (out1 / "results.csv").read_bytes() \
        != (out2 / "results.csv").read_bytes()


def test_cluster_run(tmp_path):
    cfg = {
        "kind": "cluster",
        "master_seed": 3,
        "gibbs": {"potential": {"name": "hard-rods",
                                "params": {"radius": 0.25}},
                  "beta": 1.0, "activity": 0.1, "order": 2},
    }
    out = tmp_path / "out"
    assert run_config(cfg, out) == 0
    regime = json.loads((out / "regime.json").read_text())
    assert regime["pass"]
    assert regime["connected_counts"] == {"1": 1, "2": 1, "3": 4, "4": 38}


def test_asymptotics_run(tmp_path):
    cfg = {
        "kind": "asymptotics",
        "master_seed": 2,
        "kernel": {"name": "gaussian", "dimension": 1,
                   "params": {"width": 1.0, "center": [0.0]}},
        "intensity": {"name": "step", "params": {"z0": 1.0, "z1": 3.0}},
        "test_function": {"name": "bump",
                          "params": {"radius": 2.0, "height": 1.0,
                                     "center": 0.5}},
        "grid": {"dimension": 1, "side": 10.0, "points": 1024},
        "times": [0.0, 10.0, 25.0, 50.0],
        "radii": [4.0, 8.0, 16.0, 32.0],
    }
    out = tmp_path / "out"
    assert run_config(cfg, out) == 0
    assert (out / "ball_averages.csv").exists()


def test_validate_kind(tmp_path):
    assert run_config({"kind": "validate", "master_seed": 7},
                      tmp_path / "v") == 0


def test_main_unknown_subcommand(capsys):
    assert main(["frobnicate"]) == 1


def test_main_no_command(capsys):
    assert main([]) == 1


def test_main_missing_seed_names_field(tmp_path, capsys):
    cfg = simulate_config()
    del cfg["master_seed"]
    path = tmp_path / "c.json"
    path.write_text(json.dumps(cfg))
    code = main(["run", "--config", str(path), "--out",
                 str(tmp_path / "out")])
    assert code == 1
    assert "master_seed" in capsys.readouterr().err


def test_list_catalog_contents(capsys):
    assert main(["list-catalog"]) == 0
    text = capsys.readouterr().out
    for name in ("gaussian", "step", "dyadic-blocks", "hard-rods"):
        assert name in text
    assert main(["list-catalog", "--machine"]) == 0
    data = json.loads(capsys.readouterr().out)
    assert "kernels" in data and "gaussian" in data["kernels"]


def test_console_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "jumpfield.cli", "list-catalog"],
        capture_output=True, text=True)
    assert proc.returncode == 0
    assert "gaussian" in proc.stdout


def test_declared_tail_bound_override(tmp_path):
    from jumpfield.errors import NonIntegrable
    cfg = hydro_config()
    cfg["kernel"]["alpha"] = 4.0
    cfg["kernel"]["tail_constant"] = 40.0
    assert run_config(cfg, tmp_path / "out") == 0
    # a declared bound the kernel violates is rejected at build
    cfg["kernel"]["tail_constant"] = 1e-6
    with pytest.raises(NonIntegrable):
        run_config(cfg, tmp_path / "out2")


def test_output_dir_fallback(tmp_path):
    cfg = hydro_config()
    cfg["output_dir"] = str(tmp_path / "from-config")
    path = tmp_path / "c.json"
    path.write_text(json.dumps(cfg))
    assert main(["run", "--config", str(path)]) == 0
    assert (tmp_path / "from-config" / "results.csv").exists()


def test_thread_count_does_not_change_artifacts(tmp_path):
    out1, out2 = tmp_path / "t1", tmp_path / "t2"
    run_config(simulate_config(), out1, threads=1)
    run_config(simulate_config(), out2, threads=3)
    assert (out1 / "results.csv").read_bytes() \
        == (out2 / "results.csv").read_bytes()
