import csv
import json
import subprocess
import sys

import numpy as np
import pytest
import yaml

from mlmc.cli import main
from mlmc.io import read_matrix


def write_cfg(tmp_path, data):
    p = tmp_path / "cfg.yaml"
    p.write_text(yaml.safe_dump(data))
    return str(p)


def test_print_config_lists_every_default(capsys):
    assert main(["print-config"]) == 0
    out = yaml.safe_load(capsys.readouterr().out)
    assert out["kernel"]["family"] == "gauss-ar1"
    assert set(out) >= {"schedule", "mode", "quadrature", "caps", "slack", "output_dir"}


def test_discretize_full_window_at_h_one(tmp_path, capsys):
    cfg = write_cfg(tmp_path, {"kernel": {"family": "uniform-window", "params": {"w": 2.0}},
                               "schedule": {"h_max": 1, "h_min": 1, "d": 1}})
    assert main(["discretize", "--config", cfg, "--out", str(tmp_path / "o")]) == 0
    P = read_matrix(tmp_path / "o" / "matrix_h1-1_d1")
    assert np.array_equal(P.dense(), [[0.5, 0.5], [0.5, 0.5]])


def test_discretize_d2_header(tmp_path):
    cfg = write_cfg(tmp_path, {"schedule": {"h_max": "1/8", "h_min": "1/8", "d": 2}})
    assert main(["discretize", "--config", cfg, "--out", str(tmp_path)]) == 0
    hdr = json.loads((tmp_path / "matrix_h1-8_d2.json").read_text())
    assert hdr["n_states"] == 256
    rows = list(csv.reader((tmp_path / "matrix_h1-8_d2.csv").open()))
    assert rows[0] == ["row", "col", "value"] and len(rows) > 256


def test_bad_resolution_exits_2_and_names_field(tmp_path, capsys):
    cfg = write_cfg(tmp_path, {"schedule": {"h_min": "1/3"}})
    assert main(["discretize", "--config", cfg, "--out", str(tmp_path)]) == 2
    assert "schedule.h_min" in capsys.readouterr().err


def test_unknown_key_exits_2(tmp_path, capsys):
    cfg = write_cfg(tmp_path, {"schedul": {"d": 1}})
    assert main(["pipeline", "--config", cfg, "--out", str(tmp_path)]) == 2
    assert "schedul" in capsys.readouterr().err


def test_capacity_exits_3_with_level(tmp_path, capsys):
    cfg = write_cfg(tmp_path, {"schedule": {"h_min": "1/64", "d": 2}})
    assert main(["pipeline", "--config", cfg, "--cap", "1000", "--out", str(tmp_path)]) == 3
    assert "h=1/64" in capsys.readouterr().err


def test_default_pipeline_exits_0(tmp_path):
    assert main(["pipeline", "--out", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "pipeline_report.json").read_text())
    assert len(rep["levels"]) == 4
    header = (tmp_path / "pipeline_levels.csv").read_text().splitlines()[0].split(",")
    assert "classical_matvecs" in header


def test_quantum_mode_csv(tmp_path):
    cfg = write_cfg(tmp_path, {"mode": "quantum-cost-model", "schedule": {"h_min": "1/8"}})
    assert main(["pipeline", "--config", cfg, "--out", str(tmp_path)]) == 0
    header = (tmp_path / "pipeline_levels.csv").read_text().splitlines()[0].split(",")
    assert "walk_steps" in header and "classical_matvecs" not in header


def test_walk_check_outputs(tmp_path):
    cfg = write_cfg(tmp_path, {"walk": {"random_chains": 4, "steps": 16},
                               "schedule": {"h_min": "1/8"}})
    assert main(["walk-check", "--config", cfg, "--out", str(tmp_path)]) == 0
    res = json.loads((tmp_path / "walk_check.json").read_text())
    assert res["pass"] and "two-state" in res["cases"]
    assert len((tmp_path / "walk_overlap.csv").read_text().splitlines()) == 18


def test_verify_suite(tmp_path, capsys):
    assert main(["verify", "--suite", "lemma2", "--out", str(tmp_path)]) == 0
    res = json.loads((tmp_path / "verify_lemma2.json").read_text())
    assert sorted(res["criteria"]) == ["1", "2", "6"]
    assert main(["verify", "--suite", "nope", "--out", str(tmp_path)]) == 2


def test_seed_out_of_range(tmp_path):
    assert main(["pipeline", "--seed", str(2 ** 64), "--out", str(tmp_path)]) == 2


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "mlmc.cli", "print-config"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and "gauss-ar1" in proc.stdout
