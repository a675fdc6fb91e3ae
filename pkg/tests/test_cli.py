import csv
import json
from pathlib import Path

import pytest

from roughheat.cli import main


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_region_writes_figure_vertices(tmp_path):
    out = tmp_path / "region"
    code = main(["region", "--n", "3", "--rho", "6/5", "--Q", "10/7",
                 "--out", str(out)])
    assert code == 0
    rows = read_rows(out / "region_vertices.csv")
    got = {(round(float(r["inv_p"]), 4), round(float(r["alpha"]), 4))
           for r in rows}
    assert got == {(1.0, 0.0), (0.7, -1.0), (0.2525, -1.0), (0.2525, 0.0)}
    seg = read_rows(out / "critical_segment.csv")
    right = max(seg, key=lambda r: float(r["inv_p"]))
    assert round(float(right["inv_p"]), 4) == 0.5556
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["finalized"] and manifest["subcommand"] == "region"
    assert "region_vertices.csv" in manifest["outputs"]


def test_region_decimal_flags(tmp_path):
    out = tmp_path / "region"
    assert main(["region", "--n", "3", "--rho", "1.2", "--Q", "1.4286",
                 "--out", str(out)]) == 0
    rows = read_rows(out / "region_vertices.csv")
    xs = sorted(round(float(r["inv_p"]), 4) for r in rows)
    assert xs[0] == 0.2525


def test_determinism_byte_identical(tmp_path):
    args = ["norms", "--seed", "7", "--grid-points", "64"]
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    assert main(args + ["--out", str(out_a)]) == 0
    assert main(args + ["--out", str(out_b)]) == 0
    assert (out_a / "norms.csv").read_bytes() == \
        (out_b / "norms.csv").read_bytes()


def test_malformed_config_exit_code(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{ not json")
    out = tmp_path / "out"
    code = main(["region", "--config", str(bad), "--out", str(out)])
    assert code == 1
    err = json.loads((out / "error.json").read_text())
    assert err["error"] == "InvalidParams"


def test_unknown_config_key_rejected(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"grid_pts": 64}))
    assert main(["region", "--config", str(bad),
                 "--out", str(tmp_path / "o")]) == 1


def test_invalid_grid_points_rejected(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"grid_points": 100}))
    assert main(["norms", "--config", str(cfg),
                 "--out", str(tmp_path / "o")]) == 1


def test_lifespan_subcommand(tmp_path):
    out = tmp_path / "ls"
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({
        "grid_points": 32, "horizon": 1.0,
        "lifespan_amplitudes": [1.0, 2.0],
        "nonlinearity": {"kind": "power", "rho": 3.0, "mu": 1.0},
    }))
    assert main(["lifespan", "--config", str(cfg), "--out", str(out)]) == 0
    rows = read_rows(out / "lifespan.csv")
    taus = [float(r["tau"]) for r in rows]
    assert abs(taus[0] - 1 / 3) < 0.05 / 3
    assert taus[1] < taus[0]


def test_solve_subcommand_schema(tmp_path):
    out = tmp_path / "solve"
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({
        "grid_points": 64, "horizon": 0.25, "ladder_depth": 10,
        "samples_per_rung": 4, "amplitude": 0.2,
        "nonlinearity": {"kind": "power", "rho": 3.0, "mu": -1.0},
    }))
    assert main(["solve", "--config", str(cfg), "--out", str(out)]) == 0
    rows = read_rows(out / "solve_runs.csv")
    assert set(rows[0]) == {"run_id", "n", "N", "rho", "mu", "coeff_kind",
                            "T", "iterations", "contraction_max", "residual"}
    manifest = json.loads((out / "manifest.json").read_text())
    assert rows[0]["run_id"] == manifest["run_id"]
    assert float(rows[0]["residual"]) <= 1e-9


def test_hyper_subcommand_schema(tmp_path):
    out = tmp_path / "hyper"
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"grid_points": 32, "ladder_depth": 8,
                               "samples_per_rung": 2,
                               "probes": {"count": 3, "seed": 0}}))
    assert main(["hyper", "--config", str(cfg), "--out", str(out)]) == 0
    rows = read_rows(out / "hyper_probes.csv")
    assert {"scenario", "seed", "probe_id", "op", "p", "q", "r", "beta",
            "kappa", "input_norm", "output_norm", "ratio",
            "grid_tag"} == set(rows[0])
    assert all(float(r["ratio"]) >= 0 for r in rows)
