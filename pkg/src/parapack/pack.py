"""Nonlinear time-domain simulation of N parallel-connected cells.

Two causalities are supported. Current-driven ("forward"): total current is
the input and the parallel constraint (equal terminal voltages, currents
summing to the total) is eliminated in closed form at every integrator
stage. Voltage-driven ("inverse"): pack voltage is the input and each cell
is an explicit ODE, with total current as the output.
"""

from __future__ import annotations

import csv
import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import backend
from .cell import CellParams, CellState
from .errors import IntegrationError

log = logging.getLogger(__name__)

CURRENT_DRIVEN = "current"
VOLTAGE_DRIVEN = "voltage"


@dataclass(frozen=True)
class PackModel:
    """N cells in parallel."""

    cells: tuple

    def __init__(self, cells):
        cells = tuple(cells)
        if len(cells) < 1:
            raise ValueError("pack needs at least one cell")
        if not all(isinstance(c, CellParams) for c in cells):
            raise TypeError("cells must be CellParams")
        object.__setattr__(self, "cells", cells)

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    @property
    def max_rc(self) -> int:
        return max(c.n_rc for c in self.cells)

    def first_order(self) -> "PackModel":
        return PackModel([c.without_rc() for c in self.cells])

    def arrays(self) -> dict:
        """Padded numpy views of the parameters, for the kernels."""
        n = self.n_cells
        nmax = self.max_rc
        mmax = max(c.ocv.soc.size for c in self.cells)
        q = np.array([c.q for c in self.cells])
        rs = np.array([c.r_s for c in self.cells])
        rc_r = np.ones((n, nmax))
        rc_c = np.ones((n, nmax))
        n_rc = np.zeros(n, dtype=np.int64)
        ocv_s = np.zeros((n, mmax))
        ocv_v = np.zeros((n, mmax))
        ocv_len = np.zeros(n, dtype=np.int64)
        for k, c in enumerate(self.cells):
            n_rc[k] = c.n_rc
            for j, (r, cap) in enumerate(c.rc_pairs):
                rc_r[k, j] = r
                rc_c[k, j] = cap
            m = c.ocv.soc.size
            ocv_len[k] = m
            ocv_s[k, :m] = c.ocv.soc
            ocv_v[k, :m] = c.ocv.ocv
        return dict(q=q, rs=rs, rc_r=rc_r, rc_c=rc_c, n_rc=n_rc,
                    ocv_s=ocv_s, ocv_v=ocv_v, ocv_len=ocv_len)


@dataclass
class PackState:
    """Stacked state of a pack: socs (N,) and rc charges (N, max_rc) [C]."""

    socs: np.ndarray
    rc: np.ndarray

    def __post_init__(self):
        self.socs = np.atleast_1d(np.asarray(self.socs, dtype=float))
        self.rc = np.asarray(self.rc, dtype=float)
        if self.rc.ndim == 1:
            self.rc = self.rc.reshape(self.socs.size, -1)
        if self.rc.shape[0] != self.socs.size:
            raise ValueError("rc row count must match number of cells")

    @classmethod
    def uniform(cls, model: PackModel, soc: float) -> "PackState":
        return cls(np.full(model.n_cells, float(soc)),
                   np.zeros((model.n_cells, model.max_rc)))

    @classmethod
    def from_cell_states(cls, model: PackModel, states) -> "PackState":
        states = list(states)
        if len(states) != model.n_cells:
            raise ValueError("one CellState per cell required")
        rc = np.zeros((model.n_cells, model.max_rc))
        for k, (cell, st) in enumerate(zip(model.cells, states)):
            if len(st.rc_charges) != cell.n_rc:
                raise ValueError(f"cell {k}: rc_charges length != number of RC pairs")
            rc[k, :cell.n_rc] = st.rc_charges
        return cls(np.array([s.soc for s in states]), rc)

    def cell_state(self, model: PackModel, k: int) -> CellState:
        return CellState(float(self.socs[k]), self.rc[k, :model.cells[k].n_rc].copy())


@dataclass(frozen=True)
class DriveProfile:
    """Zero-order-hold drive: value applies from each sample time until the
    next one; t_end closes the final interval."""

    kind: str
    times: np.ndarray
    values: np.ndarray
    t_end: float

    def __init__(self, kind, times, values, t_end):
        if kind not in (CURRENT_DRIVEN, VOLTAGE_DRIVEN):
            raise ValueError(f"kind must be '{CURRENT_DRIVEN}' or '{VOLTAGE_DRIVEN}'")
        times = np.asarray(times, dtype=float)
        values = np.asarray(values, dtype=float)
        if times.ndim != 1 or times.shape != values.shape or times.size < 1:
            raise ValueError("times and values must be equal-length 1-D arrays")
        if times[0] != 0.0 or np.any(np.diff(times) <= 0):
            raise ValueError("sample times must start at 0 and strictly increase")
        if t_end < times[-1]:
            raise ValueError("t_end must not precede the last sample")
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "t_end", float(t_end))

    def value_at(self, t: float) -> float:
        idx = int(np.searchsorted(self.times, t + 1e-9, side="right")) - 1
        return float(self.values[max(idx, 0)])


@dataclass
class Trajectory:
    """Sampled simulation output on a uniform time grid."""

    t: np.ndarray
    v: np.ndarray
    i_total: np.ndarray
    socs: np.ndarray          # (T, N)
    i_cells: np.ndarray       # (T, N)
    rc: np.ndarray            # (T, N, max_rc)

    def voltage_profile(self) -> DriveProfile:
        """Replay this trajectory's voltage as a voltage-driven profile."""
        return DriveProfile(VOLTAGE_DRIVEN, self.t, self.v, float(self.t[-1]))

    def to_csv(self, path, full_state: bool = False):
        n = self.socs.shape[1]
        header = (["t", "v", "i_total"]
                  + [f"soc_{k + 1}" for k in range(n)]
                  + [f"i_{k + 1}" for k in range(n)])
        nmax = self.rc.shape[2]
        if full_state:
            header += [f"rc_{k + 1}_{j + 1}" for k in range(n) for j in range(nmax)]
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(header)
            for i in range(self.t.size):
                row = [self.t[i], self.v[i], self.i_total[i]]
                row += list(self.socs[i])
                row += list(self.i_cells[i])
                if full_state:
                    row += list(self.rc[i].ravel())
                w.writerow([repr(float(x)) for x in row])


def cell_terminal_voltage(params: CellParams, state: CellState, i_k: float) -> float:
    """Terminal voltage ocv(soc) + i_k*r_s + sum_j charge_j/c_j."""
    v = params.ocv.eval(state.soc) + i_k * params.r_s
    for (r, c), x in zip(params.rc_pairs, state.rc_charges):
        v += x / c
    return v


def solve_current_split(model: PackModel, state: PackState, i_total: float):
    """Closed-form elimination of the parallel constraint.

    Returns (v, per-cell currents) such that all terminal voltages equal v
    and the currents sum to i_total.
    """
    e = np.empty(model.n_cells)
    for k, c in enumerate(model.cells):
        e[k] = c.ocv.eval(state.socs[k])
        for j, (_, cap) in enumerate(c.rc_pairs):
            e[k] += state.rc[k, j] / cap
    rs = np.array([c.r_s for c in model.cells])
    v = (i_total + np.sum(e / rs)) / np.sum(1.0 / rs)
    return float(v), (v - e) / rs


def _run_kernel(model, state, profile, dt, kernels=None, record_cells=True):
    k = kernels if kernels is not None else backend.get_kernels()
    arrs = model.arrays()
    kind = k.KIND_CURRENT if profile.kind == CURRENT_DRIVEN else k.KIND_VOLTAGE
    rc0 = np.zeros((model.n_cells, model.max_rc))
    rc0[:, :state.rc.shape[1]] = state.rc
    out = k.rollout(kind, profile.times, profile.values, profile.t_end, dt,
                    arrs["q"], arrs["rs"], arrs["rc_r"], arrs["rc_c"],
                    arrs["n_rc"], arrs["ocv_s"], arrs["ocv_v"], arrs["ocv_len"],
                    state.socs.astype(float), rc0, record_cells)
    t, soc, rc, v, i_tot, i_cells, clamped = out
    if clamped:
        log.warning("SOC clamped to [0, 1] %d time(s) during rollout", clamped)
    if not (np.all(np.isfinite(soc)) and np.all(np.isfinite(v))):
        bad = np.flatnonzero(~np.all(np.isfinite(soc), axis=1) | ~np.isfinite(v))
        t_bad = float(t[bad[0]]) if bad.size else float(t[-1])
        raise IntegrationError(f"non-finite state at t={t_bad}", t=t_bad)
    return Trajectory(t, v, i_tot, soc, i_cells, rc)


def simulate(model: PackModel, initial: PackState, profile: DriveProfile,
             dt: float = 0.1, kernels=None, record_cells: bool = True) -> Trajectory:
    """Fixed-step RK4 rollout over the whole profile, sampled every step.

    With record_cells=False only t, v, and i_total carry the full history
    (the per-cell arrays hold just the final sample), which saves a lot of
    memory on fine-dt runs.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    return _run_kernel(model, initial, profile, dt, kernels, record_cells)


def _one_step(model, state, kind, value, dt):
    profile = DriveProfile(kind, [0.0], [value], dt)
    traj = _run_kernel(model, state, profile, dt)
    new = PackState(traj.socs[-1], traj.rc[-1])
    return traj, new


def step_forward(model: PackModel, state: PackState, i_total: float,
                 dt: float) -> PackState:
    """Advance one RK4 step under a constant total current."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    _, new = _one_step(model, state, CURRENT_DRIVEN, i_total, dt)
    return new


def step_inverse(model: PackModel, state: PackState, v: float, dt: float):
    """Advance one RK4 step under a constant pack voltage; returns the new
    state and the total current at the step start."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    traj, new = _one_step(model, state, VOLTAGE_DRIVEN, v, dt)
    return new, float(traj.i_total[0])
