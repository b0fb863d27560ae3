"""End-to-end tests of the command-line interface and its artifacts."""

import json

import numpy as np
import pytest
import yaml

from nozzleflow import cli
from nozzleflow.cli import ConfigError, load_config, main, parse_config
from nozzleflow.geometry import boundary_data
from nozzleflow.minimizer import discrete_energy


def write_config(path, doc):
    with open(path, "w") as fh:
        yaml.safe_dump(doc, fh)
    return str(path)


def base_doc(out_dir):
    return {
        "schema": 1,
        "flow": {"Q": 1.0},
        "geometry": {"preset": "straight"},
        "grid": {"N": 3, "nx": 49, "ns": 17},
        "solver": {"tol": 1e-6, "omega": 1.8},
        "shear": {"d": [0.5, 1.0]},
        "diagnostics": {"sweep_N": [2, 3, 4]},
        "output": {"directory": str(out_dir)},
    }


class TestConfigParsing:
    def test_minimal_defaults(self):
        cfg = parse_config({"schema": 1})
        assert cfg.consts.Q == 1.0
        assert cfg.geometry_preset == "straight"
        assert cfg.solver.tol == 1e-6

    def test_unknown_block_rejected(self):
        with pytest.raises(ConfigError):
            parse_config({"schema": 1, "turbulence": {}})

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError):
            parse_config({"schema": 1, "grid": {"N": 3, "cells": 10}})

    def test_bad_schema_rejected(self):
        with pytest.raises(ConfigError):
            parse_config({"schema": 99})

    def test_bad_flux_rejected(self):
        with pytest.raises(ConfigError):
            parse_config({"schema": 1, "flow": {"Q": -2.0}})

    def test_bad_geometry_rejected(self):
        with pytest.raises(ConfigError):
            parse_config({"schema": 1, "geometry": {"preset": "spiral"}})

    def test_bad_probe_radii_rejected(self):
        with pytest.raises(ConfigError):
            parse_config({"schema": 1,
                          "diagnostics": {"probe_radii": [0.2, 0.1]}})

    def test_load_from_file(self, tmp_path):
        p = write_config(tmp_path / "c.yaml", base_doc(tmp_path))
        cfg = load_config(p)
        assert cfg.N == 3.0
        assert cfg.shear_d == [0.5, 1.0]


class TestValidateCommand:
    def test_ok(self, tmp_path, capsys):
        p = write_config(tmp_path / "c.yaml", base_doc(tmp_path))
        assert main(["validate-config", "--config", p]) == 0
        assert "config ok" in capsys.readouterr().out

    def test_bad_exit_code(self, tmp_path, capsys):
        doc = base_doc(tmp_path)
        doc["flow"]["viscosity"] = 0.1
        p = write_config(tmp_path / "c.yaml", doc)
        assert main(["validate-config", "--config", p]) == 2

    def test_missing_file(self, capsys):
        assert main(["validate-config", "--config", "/no/such.yaml"]) == 2


class TestShearCommand:
    def test_artifacts(self, tmp_path):
        p = write_config(tmp_path / "c.yaml", base_doc(tmp_path / "out"))
        assert main(["shear", "--config", p]) == 0
        out = tmp_path / "out"
        table = np.genfromtxt(out / "shear_table.csv", delimiter=",",
                              names=True)
        assert table["d"].tolist() == [0.5, 1.0]
        assert table["J"][1] == pytest.approx(1.2, rel=1e-9)
        checks = json.loads((out / "shear_checks.json").read_text())
        assert checks["pass"] is True

    def test_profile_csv_columns(self, tmp_path):
        p = write_config(tmp_path / "c.yaml", base_doc(tmp_path / "out"))
        main(["shear", "--config", p])
        prof = np.genfromtxt(tmp_path / "out" / "shear_d0.5.csv",
                             delimiter=",", names=True)
        assert set(prof.dtype.names) == {"x2", "phi", "dphi"}
        assert prof["phi"][0] == 0.0
        assert prof["phi"][-1] == pytest.approx(1.0)

    def test_bad_height_rejected(self, tmp_path):
        doc = base_doc(tmp_path / "out")
        doc["shear"]["d"] = [1.5]
        p = write_config(tmp_path / "c.yaml", doc)
        assert main(["shear", "--config", p]) == 2


class TestSolveCommand:
    def test_artifacts_and_summary(self, tmp_path):
        p = write_config(tmp_path / "c.yaml", base_doc(tmp_path / "out"))
        assert main(["solve", "--config", p]) == 0
        out = tmp_path / "out"
        for name in ("field.csv", "free_boundaries.csv", "summary.json",
                     "plot.svg"):
            assert (out / name).exists(), name
        summary = json.loads((out / "summary.json").read_text())
        assert summary["converged"] is True
        assert summary["flux_max_dev"] < 0.05
        assert summary["psi_min"] >= 0.0
        assert summary["psi_max"] <= 1.0

    def test_summary_keys_sorted(self, tmp_path):
        p = write_config(tmp_path / "c.yaml", base_doc(tmp_path / "out"))
        main(["solve", "--config", p])
        text = (tmp_path / "out" / "summary.json").read_text(encoding="utf-8")
        keys = [ln.split('"')[1] for ln in text.splitlines() if '":' in ln]
        assert keys == sorted(keys)

    def test_deterministic_outputs(self, tmp_path):
        p1 = write_config(tmp_path / "c1.yaml", base_doc(tmp_path / "o1"))
        p2 = write_config(tmp_path / "c2.yaml", base_doc(tmp_path / "o2"))
        main(["solve", "--config", p1])
        main(["solve", "--config", p2])
        for name in ("field.csv", "free_boundaries.csv"):
            b1 = (tmp_path / "o1" / name).read_bytes()
            b2 = (tmp_path / "o2" / name).read_bytes()
            assert b1 == b2, name

    def test_field_dump_round_trip(self, tmp_path):
        p = write_config(tmp_path / "c.yaml", base_doc(tmp_path / "out"))
        main(["solve", "--config", p])
        cfg = load_config(p)
        geom = cfg.geometry()
        grid, fieldobj, _ = cli._solve_once(cfg, geom)
        mask, vals = boundary_data(geom, grid, cfg.consts)
        again = cli.load_field_csv(tmp_path / "out" / "field.csv", grid,
                                   mask, vals, cfg.consts)
        e1 = discrete_energy(fieldobj)
        e2 = discrete_energy(again)
        assert abs(e1 - e2) <= 1e-12 * abs(e1)

    def test_serial_flag(self, tmp_path):
        p = write_config(tmp_path / "c.yaml", base_doc(tmp_path / "out"))
        assert main(["solve", "--config", p, "--serial"]) == 0

    def test_out_override(self, tmp_path):
        p = write_config(tmp_path / "c.yaml", base_doc(tmp_path / "ignored"))
        alt = tmp_path / "alt"
        assert main(["solve", "--config", p, "--out", str(alt)]) == 0
        assert (alt / "summary.json").exists()
        assert not (tmp_path / "ignored").exists()

    def test_nonconvergence_exit_code_with_artifacts(self, tmp_path):
        doc = base_doc(tmp_path / "out")
        doc["solver"]["max_iter"] = 2
        doc["solver"]["tol"] = 1e-14
        p = write_config(tmp_path / "c.yaml", doc)
        assert main(["solve", "--config", p]) == 1
        summary = json.loads((tmp_path / "out" / "summary.json").read_text())
        assert summary["converged"] is False
        assert "failure" in summary
        assert (tmp_path / "out" / "field.csv").exists()

    def test_svg_header(self, tmp_path):
        p = write_config(tmp_path / "c.yaml", base_doc(tmp_path / "out"))
        main(["solve", "--config", p])
        head = (tmp_path / "out" / "plot.svg").read_text()[:400]
        assert "<svg" in head
        assert 'version="1.1"' in head


class TestSweepCommand:
    def test_zeta_table(self, tmp_path):
        p = write_config(tmp_path / "c.yaml", base_doc(tmp_path / "out"))
        assert main(["sweep", "--config", p]) == 0
        out = tmp_path / "out"
        table = np.genfromtxt(out / "zeta.csv", delimiter=",", names=True)
        assert table["N"].tolist() == [2.0, 3.0, 4.0]
        verdict = json.loads((out / "sweep_summary.json").read_text())
        assert verdict["pass"] is True
        assert verdict["zeta_nonincreasing"] is True
        assert (out / "summary_N3.json").exists()

    def test_rejects_single_truncation(self, tmp_path):
        doc = base_doc(tmp_path / "out")
        doc["diagnostics"]["sweep_N"] = [3]
        p = write_config(tmp_path / "c.yaml", doc)
        assert main(["sweep", "--config", p]) == 2

    def test_rejects_truncation_inside_bump(self, tmp_path):
        doc = base_doc(tmp_path / "out")
        doc["geometry"] = {"preset": "symmetric-bump",
                           "params": {"width": 2.0}}
        doc["diagnostics"]["sweep_N"] = [1.5, 3]
        p = write_config(tmp_path / "c.yaml", doc)
        assert main(["sweep", "--config", p]) == 2
