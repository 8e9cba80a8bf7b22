"""Command-line front end.

Exit codes: 0 success, 2 input/validation error, 3 analysis verdict failure
(model not observable), 4 numerical failure.
"""

from __future__ import annotations

import csv
import json
import os
import sys
from pathlib import Path

import click
import numpy as np

from .cell import CellParams, OcvCurve, builtin_ocv
from .cluster import build_clustered_pack, cluster_by_eigenvalue
from .errors import ParapackError, StudyAbortError
from .linearize import make_equilibrium
from .montecarlo import StudyConfig, generate_fleet, make_profile, run_study, FleetSpec
from .observe import check_observability
from .pack import (CURRENT_DRIVEN, VOLTAGE_DRIVEN, DriveProfile, PackModel,
                   PackState, simulate)

EXIT_INPUT = 2
EXIT_VERDICT = 3
EXIT_NUMERIC = 4


def _fail(code, message):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def load_pack_config(path) -> PackModel:
    """Parse and validate a pack-config JSON file."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        _fail(EXIT_INPUT, f"{path}: {exc}")
    except json.JSONDecodeError as exc:
        _fail(EXIT_INPUT, f"{path}:{exc.lineno}: invalid JSON: {exc.msg}")
    if "fleet_spec" in doc:
        try:
            return generate_fleet(FleetSpec(**doc["fleet_spec"]))
        except (TypeError, ValueError) as exc:
            _fail(EXIT_INPUT, f"{path}: fleet_spec: {exc}")
    if "cells" not in doc or not isinstance(doc["cells"], list) or not doc["cells"]:
        _fail(EXIT_INPUT, f"{path}: config must contain a non-empty 'cells' "
                          f"array or a 'fleet_spec' object")
    cells = []
    for i, entry in enumerate(doc["cells"]):
        where = f"{path}: cells[{i}]"
        for key in ("q_coulombs", "r_s_ohms"):
            if key not in entry:
                _fail(EXIT_INPUT, f"{where}: missing field '{key}'")
        if "ocv_builtin" in entry:
            try:
                curve = builtin_ocv(entry["ocv_builtin"])
            except ValueError as exc:
                _fail(EXIT_INPUT, f"{where}: {exc}")
        elif "ocv_csv" in entry:
            csv_path = path.parent / entry["ocv_csv"]
            if not csv_path.exists():
                _fail(EXIT_INPUT, f"{where}: OCV file not found: {csv_path}")
            try:
                curve = OcvCurve.from_csv(csv_path)
            except ValueError as exc:
                _fail(EXIT_INPUT, f"{where}: {exc}")
        else:
            _fail(EXIT_INPUT, f"{where}: needs 'ocv_csv' or 'ocv_builtin'")
        rc = [(p["r_ohms"], p["c_farads"]) for p in entry.get("rc_pairs", [])]
        try:
            cells.append(CellParams(entry["q_coulombs"], entry["r_s_ohms"],
                                    rc, curve))
        except (ValueError, KeyError) as exc:
            _fail(EXIT_INPUT, f"{where}: {exc}")
    return PackModel(cells)


def _load_profile_csv(path, kind):
    try:
        with open(path, newline="") as f:
            reader = csv.reader(f)
            next(reader)  # header
            rows = [(float(r[0]), float(r[1])) for r in reader if r]
    except (OSError, ValueError, IndexError) as exc:
        _fail(EXIT_INPUT, f"{path}: bad profile CSV: {exc}")
    if not rows:
        _fail(EXIT_INPUT, f"{path}: profile CSV is empty")
    times = [r[0] for r in rows]
    values = [r[1] for r in rows]
    try:
        return DriveProfile(kind, times, values, times[-1])
    except ValueError as exc:
        _fail(EXIT_INPUT, f"{path}: {exc}")


def _parse_window(text):
    try:
        lo, hi = (float(x) for x in text.split(","))
    except ValueError:
        _fail(EXIT_INPUT, f"bad --soc-window {text!r}, expected 'lo,hi'")
    return lo, hi


@click.group()
def main():
    """Parallel battery pack simulation, observability, and SOC estimation."""


@main.command("simulate")
@click.argument("config_path", type=click.Path())
@click.option("--causality", type=click.Choice(["forward", "inverse"]),
              default="forward", show_default=True)
@click.option("--dt", type=float, default=0.1, show_default=True)
@click.option("--initial-soc", type=float, default=0.5, show_default=True)
@click.option("--amps", type=float, default=1.0, show_default=True,
              help="Square-cycle amplitude (forward default profile).")
@click.option("--charge-s", type=float, default=3600.0, show_default=True)
@click.option("--rest-s", type=float, default=600.0, show_default=True)
@click.option("--profile-csv", type=click.Path(), default=None,
              help="Drive samples 't,value' (current or voltage per causality).")
@click.option("--full-state", is_flag=True, help="Also export RC charge states.")
@click.option("--out", type=click.Path(), default=None,
              help="Output CSV path (default trajectory.csv in PARAPACK_OUT_DIR).")
def cmd_simulate(config_path, causality, dt, initial_soc, amps, charge_s,
                 rest_s, profile_csv, full_state, out):
    """Simulate a pack config under a drive profile and export the trajectory."""
    model = load_pack_config(config_path)
    kind = CURRENT_DRIVEN if causality == "forward" else VOLTAGE_DRIVEN
    if profile_csv is not None:
        profile = _load_profile_csv(profile_csv, kind)
    elif causality == "forward":
        profile = make_profile(amps, charge_s, rest_s)
    else:
        _fail(EXIT_INPUT, "--causality inverse requires --profile-csv with "
                          "voltage samples")
    if out is None:
        out = os.path.join(os.environ.get("PARAPACK_OUT_DIR", "."), "trajectory.csv")
    try:
        traj = simulate(model, PackState.uniform(model, initial_soc), profile, dt)
    except ValueError as exc:
        _fail(EXIT_INPUT, str(exc))
    except ParapackError as exc:
        _fail(EXIT_NUMERIC, str(exc))
    traj.to_csv(out, full_state=full_state)
    click.echo(f"wrote {out} ({traj.t.size} samples)")


@main.command("observability")
@click.argument("config_path", type=click.Path())
@click.option("--soc-window", default="0.4,0.6", show_default=True,
              help="SOC interval for the OCV secant slope.")
@click.option("--gap-tol", type=float, default=1e-6, show_default=True,
              help="Relative gap below which eigenvalues count as identical.")
def cmd_observability(config_path, soc_window, gap_tol):
    """Report the three observability conditions for a pack config."""
    model = load_pack_config(config_path)
    lo, hi = _parse_window(soc_window)
    try:
        eq = make_equilibrium(model.first_order(), 0.5 * (lo + hi), (lo, hi))
        from .linearize import linearize_first_order
        ss = linearize_first_order(model.first_order(), eq)
        report = check_observability(ss, eq.gammas,
                                     [c.r_s for c in model.cells], gap_tol)
    except ValueError as exc:
        _fail(EXIT_INPUT, str(exc))
    click.echo(report.to_json())
    for k in range(model.n_cells):
        ok1 = report.condition_nonzero_gamma[k]
        ok2 = report.condition_finite_rs[k]
        click.echo(f"# cell {k + 1}: nonzero OCV slope: {'ok' if ok1 else 'FAIL'}; "
                   f"finite series resistance: {'ok' if ok2 else 'FAIL'}", err=True)
    click.echo(f"# distinct eigenvalues: "
               f"{'ok' if not report.offending_pairs else 'FAIL ' + str(report.offending_pairs)}",
               err=True)
    sys.exit(0 if report.observable else EXIT_VERDICT)


@main.command("cluster")
@click.argument("config_path", type=click.Path())
@click.option("--gap-threshold", type=float, default=0.1, show_default=True)
@click.option("--soc-window", default="0.4,0.6", show_default=True)
def cmd_cluster(config_path, gap_threshold, soc_window):
    """Partition a pack by relaxation eigenvalue and print aggregates."""
    model = load_pack_config(config_path)
    lo, hi = _parse_window(soc_window)
    gammas = [c.ocv.slope(lo, hi) for c in model.cells]
    try:
        if gap_threshold <= 0:
            # threshold 0 degenerates to all-singleton clusters
            assignment = cluster_by_eigenvalue(model.first_order(), gammas,
                                               np.finfo(float).tiny)
        else:
            assignment = cluster_by_eigenvalue(model.first_order(), gammas,
                                               gap_threshold)
        clustered = build_clustered_pack(model.first_order(), assignment)
    except ParapackError as exc:
        _fail(EXIT_NUMERIC, str(exc))
    doc = json.loads(clustered.to_json())
    doc["labels"] = assignment.labels.tolist()
    doc["centers_per_second"] = assignment.centers.tolist()
    click.echo(json.dumps(doc, indent=2, sort_keys=True))


@main.command("study")
@click.argument("study_config_path", type=click.Path())
@click.option("--jobs", type=int, default=1, show_default=True)
@click.option("--out-dir", type=click.Path(), default=None,
              help="Artifact directory (default PARAPACK_OUT_DIR or cwd).")
@click.option("--per-run", is_flag=True, help="Also write per-run trajectories.")
def cmd_study(study_config_path, jobs, out_dir, per_run):
    """Run a Monte Carlo study config and write its artifacts."""
    try:
        text = Path(study_config_path).read_text()
    except OSError as exc:
        _fail(EXIT_INPUT, f"{study_config_path}: {exc}")
    try:
        config = StudyConfig.from_json(text)
    except (ValueError, TypeError) as exc:
        _fail(EXIT_INPUT, f"{study_config_path}: {exc}")
    if out_dir is None:
        out_dir = os.environ.get("PARAPACK_OUT_DIR", ".")
    try:
        result = run_study(config, jobs=jobs)
    except StudyAbortError as exc:
        click.echo(exc.report.to_json() if exc.report else "", err=True)
        _fail(EXIT_VERDICT, str(exc))
    except ParapackError as exc:
        _fail(EXIT_NUMERIC, str(exc))
    result.save(out_dir, per_run=per_run)
    click.echo(json.dumps(result.summary(), indent=2, sort_keys=True))


if __name__ == "__main__":
    main()
