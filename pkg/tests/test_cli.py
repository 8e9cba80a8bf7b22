import json

import numpy as np
import pytest
from click.testing import CliRunner

from parapack.cli import main

TWO_CELLS = {
    "cells": [
        {"q_coulombs": 9925, "r_s_ohms": 0.102, "rc_pairs": [],
         "ocv_builtin": "nmc"},
        {"q_coulombs": 9000, "r_s_ohms": 0.150, "rc_pairs": [],
         "ocv_builtin": "nmc"},
    ]
}

SMALL_FLEET = {
    "fleet_spec": {
        "chemistry": "nmc", "n_healthy": 2, "n_power_fade": 1,
        "n_capacity_fade": 1, "seed": 3,
    }
}


@pytest.fixture
def runner():
    return CliRunner()


def write(tmp_path, name, doc):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


def all_output(result):
    """stdout plus stderr (diagnostics go to stderr)."""
    return result.output + result.stderr


class TestSimulate:
    def test_forward_default_profile(self, runner, tmp_path):
        cfg = write(tmp_path, "pack.json", TWO_CELLS)
        out = tmp_path / "traj.csv"
        result = runner.invoke(main, [
            "simulate", cfg, "--dt", "1.0", "--charge-s", "60",
            "--rest-s", "30", "--out", str(out)])
        assert result.exit_code == 0, result.output
        lines = out.read_text().splitlines()
        assert lines[0] == "t,v,i_total,soc_1,soc_2,i_1,i_2"
        assert len(lines) == 1 + 181   # 180 s at 1 s steps, inclusive grid

    def test_inverse_replays_forward_current(self, runner, tmp_path):
        cfg = write(tmp_path, "pack.json", TWO_CELLS)
        fwd_csv = tmp_path / "fwd.csv"
        result = runner.invoke(main, [
            "simulate", cfg, "--dt", "0.1", "--charge-s", "100",
            "--rest-s", "40", "--initial-soc", "0.5", "--out", str(fwd_csv)])
        assert result.exit_code == 0, result.output
        rows = np.loadtxt(fwd_csv, delimiter=",", skiprows=1)
        t, v, i_fwd = rows[:, 0], rows[:, 1], rows[:, 2]

        vprofile = tmp_path / "voltage.csv"
        np.savetxt(vprofile, np.column_stack([t, v]), delimiter=",",
                   header="t,v", comments="")
        inv_csv = tmp_path / "inv.csv"
        result = runner.invoke(main, [
            "simulate", cfg, "--causality", "inverse", "--dt", "0.1",
            "--initial-soc", "0.5", "--profile-csv", str(vprofile),
            "--out", str(inv_csv)])
        assert result.exit_code == 0, result.output
        i_inv = np.loadtxt(inv_csv, delimiter=",", skiprows=1)[:, 2]
        assert np.max(np.abs(i_inv - i_fwd)) < 1e-3

    def test_inverse_without_profile_is_input_error(self, runner, tmp_path):
        cfg = write(tmp_path, "pack.json", TWO_CELLS)
        result = runner.invoke(main, ["simulate", cfg, "--causality", "inverse"])
        assert result.exit_code == 2
        assert "profile-csv" in all_output(result)

    def test_full_state_flag_adds_rc_columns(self, runner, tmp_path):
        doc = {"cells": [{"q_coulombs": 9925, "r_s_ohms": 0.102,
                          "rc_pairs": [{"r_ohms": 0.0094, "c_farads": 6330.0}],
                          "ocv_builtin": "nmc"}]}
        cfg = write(tmp_path, "pack.json", doc)
        out = tmp_path / "traj.csv"
        result = runner.invoke(main, [
            "simulate", cfg, "--dt", "1.0", "--charge-s", "30", "--rest-s",
            "10", "--full-state", "--out", str(out)])
        assert result.exit_code == 0, result.output
        assert out.read_text().splitlines()[0].endswith(",rc_1_1")


class TestConfigErrors:
    def test_missing_file(self, runner, tmp_path):
        result = runner.invoke(main, ["simulate", str(tmp_path / "nope.json")])
        assert result.exit_code == 2
        assert "nope.json" in all_output(result)

    def test_invalid_json_reports_line(self, runner, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{\n  "cells": [\n')
        result = runner.invoke(main, ["simulate", str(path)])
        assert result.exit_code == 2
        assert "invalid JSON" in all_output(result)

    def test_missing_field_names_cell_and_field(self, runner, tmp_path):
        cfg = write(tmp_path, "pack.json",
                    {"cells": [{"r_s_ohms": 0.1, "ocv_builtin": "nmc"}]})
        result = runner.invoke(main, ["simulate", cfg])
        assert result.exit_code == 2
        assert "cells[0]" in all_output(result)
        assert "q_coulombs" in all_output(result)

    def test_missing_ocv_file_names_path(self, runner, tmp_path):
        cfg = write(tmp_path, "pack.json",
                    {"cells": [{"q_coulombs": 100, "r_s_ohms": 0.1,
                                "ocv_csv": "missing_curve.csv"}]})
        result = runner.invoke(main, ["simulate", cfg])
        assert result.exit_code == 2
        assert "missing_curve.csv" in all_output(result)

    def test_negative_parameter_rejected(self, runner, tmp_path):
        cfg = write(tmp_path, "pack.json",
                    {"cells": [{"q_coulombs": -5, "r_s_ohms": 0.1,
                                "ocv_builtin": "nmc"}]})
        result = runner.invoke(main, ["simulate", cfg])
        assert result.exit_code == 2


class TestObservability:
    def test_distinct_fleet_exits_zero(self, runner, tmp_path):
        cfg = write(tmp_path, "fleet.json", SMALL_FLEET)
        result = runner.invoke(main, ["observability", cfg])
        assert result.exit_code == 0, result.output
        doc = json.loads(result.stdout)
        assert doc["observable"] is True

    def test_duplicate_cells_exit_verdict_code(self, runner, tmp_path):
        doc = {"cells": [TWO_CELLS["cells"][0], TWO_CELLS["cells"][0]]}
        cfg = write(tmp_path, "pack.json", doc)
        result = runner.invoke(main, ["observability", cfg])
        assert result.exit_code == 3
        report = json.loads(result.stdout)
        assert report["observable"] is False
        assert report["offending_pairs"] == [[0, 1]]

    def test_flat_ocv_window_flags_slope_condition(self, runner, tmp_path):
        curve = tmp_path / "plateau.csv"
        curve.write_text("soc,ocv_volts\n0.0,3.0\n0.4,3.3\n0.6,3.3\n1.0,3.6\n")
        doc = {"cells": [{"q_coulombs": 5000, "r_s_ohms": 0.1,
                          "ocv_csv": "plateau.csv"}]}
        cfg = write(tmp_path, "pack.json", doc)
        result = runner.invoke(main, ["observability", cfg])
        assert result.exit_code == 3
        report = json.loads(result.stdout)
        assert report["condition_nonzero_gamma"] == [False]

    def test_soc_window_option(self, runner, tmp_path):
        curve = tmp_path / "plateau.csv"
        curve.write_text("soc,ocv_volts\n0.0,3.0\n0.4,3.3\n0.6,3.3\n1.0,3.6\n")
        doc = {"cells": [{"q_coulombs": 5000, "r_s_ohms": 0.1,
                          "ocv_csv": "plateau.csv"}]}
        cfg = write(tmp_path, "pack.json", doc)
        # the 0.6-1.0 window has a nonzero slope, so the verdict flips
        result = runner.invoke(main, ["observability", cfg,
                                      "--soc-window", "0.6,1.0"])
        assert result.exit_code == 0, result.output

    def test_bad_window_is_input_error(self, runner, tmp_path):
        cfg = write(tmp_path, "fleet.json", SMALL_FLEET)
        result = runner.invoke(main, ["observability", cfg,
                                      "--soc-window", "wide"])
        assert result.exit_code == 2


class TestCluster:
    def test_fleet_clusters_into_three(self, runner, tmp_path):
        cfg = write(tmp_path, "fleet.json", {"fleet_spec": {
            "chemistry": "nmc", "seed": 7}})
        result = runner.invoke(main, ["cluster", cfg])
        assert result.exit_code == 0, result.output
        doc = json.loads(result.stdout)
        assert len(doc["clusters"]) == 3
        sizes = sorted(len(c["members"]) for c in doc["clusters"])
        assert sizes == [3, 3, 14]
        assert len(doc["labels"]) == 20
        assert len(doc["centers_per_second"]) == 3

    def test_zero_threshold_gives_singletons(self, runner, tmp_path):
        cfg = write(tmp_path, "pack.json", TWO_CELLS)
        result = runner.invoke(main, ["cluster", cfg, "--gap-threshold", "0"])
        assert result.exit_code == 0, result.output
        doc = json.loads(result.stdout)
        assert len(doc["clusters"]) == 2
        assert all(len(c["members"]) == 1 for c in doc["clusters"])

    def test_identical_cells_merge(self, runner, tmp_path):
        doc = {"cells": [TWO_CELLS["cells"][0]] * 3}
        cfg = write(tmp_path, "pack.json", doc)
        result = runner.invoke(main, ["cluster", cfg])
        assert result.exit_code == 0, result.output
        out = json.loads(result.stdout)
        assert len(out["clusters"]) == 1
        assert out["clusters"][0]["q_coulombs"] == pytest.approx(3 * 9925.0)
        assert out["clusters"][0]["r_s_ohms"] == pytest.approx(0.102 / 3)


class TestStudy:
    def study_doc(self, n_runs=2):
        return {
            "fleet": {"chemistry": "nmc", "seed": 42, "plant_order": 1},
            "n_runs": n_runs, "charge_s": 300.0, "rest_s": 100.0,
            "dt": 1.0, "seed": 1000,
        }

    def test_study_writes_artifacts(self, runner, tmp_path):
        cfg = write(tmp_path, "study.json", self.study_doc())
        out_dir = tmp_path / "out"
        result = runner.invoke(main, ["study", cfg, "--out-dir", str(out_dir)])
        assert result.exit_code == 0, result.output
        assert (out_dir / "study_summary.json").exists()
        assert (out_dir / "rmse_vs_time.csv").exists()
        assert (out_dir / "plotdata" / "fig7_rmse.csv").exists()
        printed = json.loads(result.stdout)
        assert printed["n_runs"] == 2
        assert printed["cluster_sizes"] and sum(printed["cluster_sizes"]) == 20

    def test_jobs_flag_is_deterministic(self, runner, tmp_path):
        cfg = write(tmp_path, "study.json", self.study_doc(n_runs=4))
        d1, d2 = tmp_path / "o1", tmp_path / "o2"
        r1 = runner.invoke(main, ["study", cfg, "--jobs", "1",
                                  "--out-dir", str(d1)])
        r2 = runner.invoke(main, ["study", cfg, "--jobs", "2",
                                  "--out-dir", str(d2)])
        assert r1.exit_code == 0 and r2.exit_code == 0
        assert (d1 / "study_summary.json").read_bytes() == \
            (d2 / "study_summary.json").read_bytes()
        assert (d1 / "rmse_vs_time.csv").read_bytes() == \
            (d2 / "rmse_vs_time.csv").read_bytes()

    def test_per_run_flag(self, runner, tmp_path):
        cfg = write(tmp_path, "study.json", self.study_doc())
        out_dir = tmp_path / "out"
        result = runner.invoke(main, ["study", cfg, "--per-run",
                                      "--out-dir", str(out_dir)])
        assert result.exit_code == 0, result.output
        assert (out_dir / "run_0.csv").exists()
        assert (out_dir / "run_1.csv").exists()

    def test_malformed_study_config(self, runner, tmp_path):
        doc = self.study_doc()
        doc["n_funs"] = 3
        cfg = write(tmp_path, "study.json", doc)
        result = runner.invoke(main, ["study", cfg])
        assert result.exit_code == 2
        assert "n_funs" in all_output(result)
