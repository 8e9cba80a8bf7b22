"""Reproducible Monte Carlo studies of the clustered SOC estimator.

A study generates a 20-cell fleet (14 healthy, 3 power-fade, 3
capacity-fade, each parameter jittered uniformly within +/-3% of its group
nominal), simulates the pack under a 1 A square charge/discharge protocol,
injects Gaussian noise into the recorded voltage and current streams, and
runs the first-order clustered steady-state Kalman filter from a uniformly
random initial SOC estimate. Errors are scored per cluster against the
capacity-weighted true member SOCs.

Seeding uses a counter-based generator (Philox) keyed by study seed + run
index, so runs are reproducible in isolation and independent of worker
count.
"""

from __future__ import annotations

import csv
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict
from functools import partial

import numpy as np

from .cell import NOMINAL_PARAMS, CellParams, builtin_ocv
from .cluster import (build_clustered_pack, cluster_by_eigenvalue,
                      cluster_true_soc, clustered_state_space)
from .errors import StudyAbortError
from .kalman import NoiseSpec, design_filter, run_filter
from .linearize import make_equilibrium
from .observe import check_observability
from .pack import CURRENT_DRIVEN, DriveProfile, PackModel, PackState, simulate


@dataclass(frozen=True)
class FleetSpec:
    chemistry: str = "nmc"
    n_healthy: int = 14
    n_power_fade: int = 3
    n_capacity_fade: int = 3
    jitter: float = 0.03
    rs_fade_factor: float = 2.0
    q_fade_factor: float = 0.8
    plant_order: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.chemistry.lower() not in NOMINAL_PARAMS:
            raise ValueError(f"unknown chemistry {self.chemistry!r}")
        if min(self.n_healthy, self.n_power_fade, self.n_capacity_fade) < 0:
            raise ValueError("group counts must be non-negative")
        if not 0.0 <= self.jitter < 0.5:
            raise ValueError("jitter must be in [0, 0.5)")
        if self.plant_order not in (1, 3):
            raise ValueError("plant_order must be 1 or 3")


def generate_fleet(spec: FleetSpec) -> PackModel:
    """Deterministic fleet draw for a spec: group nominals (fade factors
    applied before jitter), parameters uniform within +/-jitter. RC pairs,
    when present, stay at the characterized nominals."""
    nom = NOMINAL_PARAMS[spec.chemistry.lower()]
    curve = builtin_ocv(spec.chemistry)
    rc = tuple(nom["rc_pairs"]) if spec.plant_order == 3 else ()
    rng = np.random.Generator(np.random.Philox(key=spec.seed))
    groups = [
        (spec.n_healthy, 1.0, 1.0),
        (spec.n_power_fade, 1.0, spec.rs_fade_factor),
        (spec.n_capacity_fade, spec.q_fade_factor, 1.0),
    ]
    cells = []
    for count, q_factor, rs_factor in groups:
        for _ in range(count):
            q = nom["q"] * q_factor * (1.0 + rng.uniform(-spec.jitter, spec.jitter))
            rs = nom["r_s"] * rs_factor * (1.0 + rng.uniform(-spec.jitter, spec.jitter))
            cells.append(CellParams(q, rs, rc, curve))
    if not cells:
        raise ValueError("fleet spec produced no cells")
    return PackModel(cells)


def make_profile(amps: float = 1.0, charge_s: float = 3600.0,
                 rest_s: float = 600.0) -> DriveProfile:
    """Square cycle: +amps charge, rest, -amps discharge, rest."""
    if charge_s <= 0 or rest_s <= 0:
        raise ValueError("durations must be positive")
    times = [0.0, charge_s, charge_s + rest_s, 2 * charge_s + rest_s]
    values = [amps, 0.0, -amps, 0.0]
    return DriveProfile(CURRENT_DRIVEN, times, values, 2 * charge_s + 2 * rest_s)


@dataclass(frozen=True)
class StudyConfig:
    fleet: FleetSpec = field(default_factory=FleetSpec)
    n_runs: int = 100
    amps: float = 1.0
    charge_s: float = 3600.0
    rest_s: float = 600.0
    true_initial_soc: float = 0.10
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    dt: float = 1.0
    seed: int = 1
    cluster_threshold: float = 0.1
    soc_window: tuple = (0.4, 0.6)
    eq_soc: float = 0.5

    def __post_init__(self):
        if self.n_runs < 1:
            raise ValueError("n_runs must be >= 1")
        if self.dt <= 0:
            raise ValueError("dt must be positive")

    @classmethod
    def from_json(cls, text: str) -> "StudyConfig":
        doc = json.loads(text)
        kwargs = dict(doc)
        if "fleet" in kwargs:
            kwargs["fleet"] = FleetSpec(**kwargs["fleet"])
        if "noise" in kwargs:
            kwargs["noise"] = NoiseSpec(**kwargs["noise"])
        if "soc_window" in kwargs:
            kwargs["soc_window"] = tuple(kwargs["soc_window"])
        try:
            return cls(**kwargs)
        except TypeError as exc:
            raise ValueError(f"bad study config: {exc}") from exc

    def to_json(self) -> str:
        doc = asdict(self)
        doc["soc_window"] = list(self.soc_window)
        return json.dumps(doc, indent=2, sort_keys=True)


@dataclass
class RunRecord:
    run_index: int
    seed: int
    initial_estimate: float
    errors: np.ndarray        # (T, n_clusters)


@dataclass
class StudyResult:
    config: StudyConfig
    t: np.ndarray
    per_run: list
    rmse: np.ndarray
    cluster_sizes: list
    care_residual: float
    noise_std_voltage: float
    noise_std_current: float
    i_clean: np.ndarray
    v_clean: np.ndarray
    example_v_noisy: np.ndarray
    example_i_noisy: np.ndarray

    @property
    def initial_rmse(self) -> float:
        return float(self.rmse[0])

    @property
    def final_rmse(self) -> float:
        return float(self.rmse[-1])

    @property
    def halving_time(self):
        """First time at which the aggregate RMSE reaches half its initial
        value, or None if it never does."""
        idx = np.flatnonzero(self.rmse <= 0.5 * self.rmse[0])
        return float(self.t[idx[0]]) if idx.size else None

    def summary(self) -> dict:
        return {
            "chemistry": self.config.fleet.chemistry,
            "plant_order": self.config.fleet.plant_order,
            "n_runs": self.config.n_runs,
            "seed": self.config.seed,
            "fleet_seed": self.config.fleet.seed,
            "dt": self.config.dt,
            "n_clusters": len(self.cluster_sizes),
            "cluster_sizes": self.cluster_sizes,
            "initial_rmse": self.initial_rmse,
            "final_rmse": self.final_rmse,
            "rmse_halving_time_s": self.halving_time,
            "noise_std_voltage_observed": self.noise_std_voltage,
            "noise_std_current_observed": self.noise_std_current,
            "care_residual": self.care_residual,
            "run_seeds": [r.seed for r in self.per_run],
        }

    def save(self, out_dir, per_run: bool = False):
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "study_summary.json"), "w") as f:
            json.dump(self.summary(), f, indent=2, sort_keys=True)
            f.write("\n")
        _write_csv(os.path.join(out_dir, "rmse_vs_time.csv"),
                   ["t", "rmse"], np.column_stack([self.t, self.rmse]))
        plot_dir = os.path.join(out_dir, "plotdata")
        os.makedirs(plot_dir, exist_ok=True)
        _write_csv(os.path.join(plot_dir, "fig5_pack_profiles.csv"),
                   ["t", "i_clean", "v_clean", "i_noisy_run0", "v_noisy_run0"],
                   np.column_stack([self.t, self.i_clean, self.v_clean,
                                    self.example_i_noisy, self.example_v_noisy]))
        step = max(1, self.t.size // 1000)
        per_run_rms = np.stack(
            [np.sqrt(np.mean(r.errors ** 2, axis=1)) for r in self.per_run], axis=1)
        _write_csv(os.path.join(plot_dir, "fig6_per_run_error.csv"),
                   ["t"] + [f"run_{r.run_index}" for r in self.per_run],
                   np.column_stack([self.t, per_run_rms])[::step])
        _write_csv(os.path.join(plot_dir, "fig7_rmse.csv"),
                   ["t", "rmse"], np.column_stack([self.t, self.rmse]))
        if per_run:
            m = self.per_run[0].errors.shape[1]
            for rec in self.per_run:
                _write_csv(os.path.join(out_dir, f"run_{rec.run_index}.csv"),
                           ["t"] + [f"err_cluster_{c + 1}" for c in range(m)],
                           np.column_stack([self.t, rec.errors]))


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(header)
        for row in np.atleast_2d(rows):
            w.writerow([repr(float(x)) for x in row])


def compute_rmse(runs) -> np.ndarray:
    """Per-timestep RMS over runs (and clusters, if trajectories are 2-D)."""
    if not runs:
        raise ValueError("need at least one error trajectory")
    arrs = [np.atleast_2d(np.asarray(r, dtype=float).T).T for r in runs]
    if len({a.shape for a in arrs}) != 1:
        raise ValueError("error trajectories must have equal shapes")
    stack = np.stack(arrs)          # (R, T, M)
    return np.sqrt(np.mean(stack ** 2, axis=(0, 2)))


def _run_one(payload, run_index):
    (design, t, v_clean, i_clean, truth, seed, v_std, i_std) = payload
    run_seed = seed + run_index
    rng = np.random.Generator(np.random.Philox(key=run_seed))
    x0 = float(rng.uniform(0.0, 1.0))
    v_noise = rng.normal(0.0, v_std, size=t.size)
    i_noise = rng.normal(0.0, i_std, size=t.size)
    meas = np.column_stack([t, v_clean + v_noise, i_clean + i_noise])
    _, xhat, _ = run_filter(design, x0, meas)
    errors = xhat - truth
    stats = (float(v_noise.sum()), float((v_noise ** 2).sum()),
             float(i_noise.sum()), float((i_noise ** 2).sum()), t.size)
    example = (meas[:, 1], meas[:, 2]) if run_index == 0 else None
    return RunRecord(run_index, run_seed, x0, errors), stats, example


def run_study(config: StudyConfig, jobs: int = 1) -> StudyResult:
    """Execute one full Monte Carlo study. Deterministic for a fixed config
    regardless of `jobs`."""
    fleet = generate_fleet(config.fleet)
    gammas = [c.ocv.slope(*config.soc_window) for c in fleet.cells]
    assignment = cluster_by_eigenvalue(fleet.first_order(), gammas,
                                       config.cluster_threshold)
    clustered = build_clustered_pack(fleet.first_order(), assignment)
    eq = make_equilibrium(clustered.model(), config.eq_soc, config.soc_window)
    ss = clustered_state_space(clustered, eq)
    report = check_observability(ss, eq.gammas,
                                 [c.r_s for c in clustered.model().cells])
    if not report.observable:
        raise StudyAbortError("clustered filter model is not observable",
                              report=report)
    v_ref = clustered.model().cells[0].ocv.eval(config.eq_soc)
    design = design_filter(ss, config.noise, x_ref=eq.socs, v_ref=v_ref)

    profile = make_profile(config.amps, config.charge_s, config.rest_s)
    traj = simulate(fleet, PackState.uniform(fleet, config.true_initial_soc),
                    profile, config.dt)
    truth = cluster_true_soc(traj.socs, fleet, clustered)

    payload = (design, traj.t, traj.v, traj.i_total, truth, config.seed,
               config.noise.process_noise_std, config.noise.measurement_noise_std)
    worker = partial(_run_one, payload)
    indices = range(config.n_runs)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(worker, indices, chunksize=8))
    else:
        results = [worker(r) for r in indices]

    per_run = [rec for rec, _, _ in results]
    rmse = compute_rmse([rec.errors for rec in per_run])
    v_sum = sum(s[0] for _, s, _ in results)
    v_sq = sum(s[1] for _, s, _ in results)
    i_sum = sum(s[2] for _, s, _ in results)
    i_sq = sum(s[3] for _, s, _ in results)
    count = sum(s[4] for _, s, _ in results)
    v_std = float(np.sqrt(v_sq / count - (v_sum / count) ** 2))
    i_std = float(np.sqrt(i_sq / count - (i_sum / count) ** 2))
    example = next(e for _, _, e in results if e is not None)
    return StudyResult(
        config=config,
        t=traj.t,
        per_run=per_run,
        rmse=rmse,
        cluster_sizes=[len(m) for m, _ in clustered.clusters],
        care_residual=design.residual,
        noise_std_voltage=v_std,
        noise_std_current=i_std,
        i_clean=traj.i_total,
        v_clean=traj.v,
        example_v_noisy=example[0],
        example_i_noisy=example[1],
    )
