"""End-to-end tests of the command-line interface and its exit codes."""

import json
import math

import numpy as np
import pytest

import sbr
from sbr.cli import main

from meshes import plate_mesh


@pytest.fixture
def plate_obj(tmp_path):
    p = tmp_path / "plate.obj"
    sbr.save_obj(plate_mesh(1.0), p)
    return p


class TestGenSphere:
    def test_writes_loadable_obj(self, tmp_path, capsys):
        out = tmp_path / "sphere.obj"
        code = main(["gen-sphere", "--radius", "2.0", "--subdiv", "2",
                     "--out", str(out)])
        assert code == 0
        mesh = sbr.load_mesh(out)
        assert mesh.triangle_count == 20 * 4 ** 2
        assert "320" in capsys.readouterr().out

    def test_bad_radius_exit_2(self, tmp_path):
        code = main(["gen-sphere", "--radius", "-1", "--subdiv", "1",
                     "--out", str(tmp_path / "s.obj")])
        assert code == 2


class TestMie:
    def test_csv_matches_module_values(self, tmp_path):
        out = tmp_path / "mie.csv"
        code = main(["mie", "--radius", "1", "--kr-min", "5", "--kr-max", "15",
                     "--samples", "3", "--out", str(out)])
        assert code == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "kr,sigma_m2,sigma_over_pir2"
        assert len(lines) == 4
        kr, sigma, norm = (float(v) for v in lines[1].split(","))
        assert kr == 5.0
        assert sigma == pytest.approx(sbr.mie_backscatter_pec(5.0, 1.0),
                                      rel=1e-8)
        assert norm == pytest.approx(sigma / math.pi, rel=1e-8)

    def test_bad_range_exit_2(self, tmp_path):
        assert main(["mie", "--radius", "1", "--kr-min", "0", "--kr-max", "10",
                     "--samples", "5", "--out", str(tmp_path / "m.csv")]) == 2


class TestBvhStats:
    def test_prints_both_split_rules(self, plate_obj, capsys):
        assert main(["bvh-stats", "--mesh", str(plate_obj)]) == 0
        out = capsys.readouterr().out
        assert "split=median" in out
        assert "split=sah" in out
        assert "mean_visits" in out

    def test_missing_mesh_exit_3(self, tmp_path):
        assert main(["bvh-stats", "--mesh", str(tmp_path / "none.obj")]) == 3


class TestValidateSphereCli:
    def test_report_written(self, tmp_path, capsys):
        out = tmp_path / "report.csv"
        code = main(["validate-sphere", "--radius", "1", "--kr", "12",
                     "--subdivisions", "3", "--directions", "4",
                     "--out", str(out)])
        assert code == 0
        lines = out.read_text().splitlines()
        assert lines[0].startswith("kr,sigma_sbr_m2,sigma_mie_m2")
        assert len(lines) == 2
        assert "err=" in capsys.readouterr().out

    def test_empty_kr_exit_2(self):
        assert main(["validate-sphere", "--kr", ","]) == 2


class TestSweepCli:
    def write_config(self, tmp_path, mesh_path, **extra):
        doc = {
            "mesh": str(mesh_path),
            "frequency_hz": sbr.SPEED_OF_LIGHT / 0.25,
            "theta_deg": {"start_deg": 0, "stop_deg": 30, "samples": 2},
            "phi_deg": {"start_deg": 0, "stop_deg": 90, "samples": 2},
            "max_bounces": 3,
        }
        doc.update(extra)
        p = tmp_path / "run.json"
        p.write_text(json.dumps(doc))
        return p

    def test_end_to_end_outputs(self, tmp_path, plate_obj, capsys):
        cfg = self.write_config(tmp_path, plate_obj)
        csv_path = tmp_path / "out.csv"
        ppm_path = tmp_path / "map.ppm"
        code = main(["sweep", "--config", str(cfg), "--out", str(csv_path),
                     "--heatmap", str(ppm_path), "--workers", "2"])
        assert code == 0
        assert csv_path.exists()
        lines = csv_path.read_text().splitlines()
        assert len(lines) == 5
        assert ppm_path.read_bytes().startswith(b"P6\n2 2\n")
        assert "peak" in capsys.readouterr().out

    def test_dry_run_prints_summary(self, tmp_path, plate_obj, capsys):
        cfg = self.write_config(tmp_path, plate_obj)
        code = main(["sweep", "--config", str(cfg), "--dry-run"])
        assert code == 0
        summary = json.loads(capsys.readouterr().out)
        assert summary["angles"] == 4

    def test_missing_config_exit_3(self, tmp_path):
        assert main(["sweep", "--config", str(tmp_path / "none.json")]) == 3

    def test_invalid_config_exit_2(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text("{broken")
        assert main(["sweep", "--config", str(p)]) == 2

    def test_missing_mesh_exit_3(self, tmp_path):
        cfg = self.write_config(tmp_path, tmp_path / "ghost.obj")
        assert main(["sweep", "--config", str(cfg)]) == 3

    def test_sampling_violation_exit_2_and_override(self, tmp_path, plate_obj):
        cfg = self.write_config(tmp_path, plate_obj, spacing_m=0.2)
        assert main(["sweep", "--config", str(cfg), "--dry-run"]) == 2
        assert main(["sweep", "--config", str(cfg), "--dry-run",
                     "--allow-aliasing"]) == 0
