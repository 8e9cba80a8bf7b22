"""Continuous-time steady-state Kalman filter on the voltage-driven model.

The error covariance solves the filter algebraic Riccati equation
AP + PA^T - PC^T R^-1 CP + BQB^T = 0 (Q, R are the squared process and
measurement noise standard deviations); the steady gain is L = PC^T R^-1.
The observer then integrates dxhat/dt = A xhat + B u + L (y - yhat) with
u the pack voltage and y the total current.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_continuous_lyapunov

from . import backend
from .errors import CareSolverError, FilterDivergenceError
from .linearize import StateSpace

RESIDUAL_REL_TOL = 1e-8
RESIDUAL_FLOOR = 1e-12


@dataclass(frozen=True)
class NoiseSpec:
    """Uncorrelated additive Gaussian noise standard deviations:
    process/input side in volts, measurement side in amps."""

    process_noise_std: float = 500e-6
    measurement_noise_std: float = 20e-3

    def __post_init__(self):
        if self.process_noise_std <= 0 or self.measurement_noise_std <= 0:
            raise ValueError("noise standard deviations must be positive")


def care_residual(ss: StateSpace, p: np.ndarray, noise: NoiseSpec) -> float:
    """Frobenius norm of the Riccati defect for a candidate covariance."""
    a, b, c = ss.a, ss.b, ss.c
    qn = noise.process_noise_std ** 2
    rn = noise.measurement_noise_std ** 2
    res = a @ p + p @ a.T - p @ c.T @ c @ p / rn + b @ b.T * qn
    return float(np.linalg.norm(res, "fro"))


def solve_care(ss: StateSpace, noise: NoiseSpec, max_iter: int = 60) -> np.ndarray:
    """Stabilizing solution via Newton-Kleinman iteration.

    Each iterate solves a Lyapunov equation for the closed-loop system of
    the current gain, starting from L=0 (A must be Hurwitz, which holds for
    any pack with positive OCV slopes). Quadratically convergent.
    """
    a, b, c = ss.a, ss.b, ss.c
    n = ss.n_states
    qn = noise.process_noise_std ** 2
    rn = noise.measurement_noise_std ** 2
    w = b @ b.T * qn
    w_norm = np.linalg.norm(w, "fro")
    tol = max(RESIDUAL_REL_TOL * w_norm, RESIDUAL_FLOOR)

    if np.max(np.linalg.eigvals(a).real) >= 0:
        raise CareSolverError("A is not Hurwitz; no stabilizing initial gain "
                              "available (is the model observable and stable?)")
    gain = np.zeros((n, 1))
    residual = np.inf
    for _ in range(max_iter):
        a_cl = a - gain @ c
        rhs = -(w + gain @ gain.T * rn)
        p = solve_continuous_lyapunov(a_cl, rhs)
        p = 0.5 * (p + p.T)
        gain = p @ c.T / rn
        residual = care_residual(ss, p, noise)
        if residual <= 0.01 * tol:
            break
    if residual > tol:
        raise CareSolverError(
            f"Riccati iteration stalled at residual {residual:.3e} "
            f"(tolerance {tol:.3e}); the model may be unobservable",
            residual=residual)
    return p


def steady_gain(ss: StateSpace, p: np.ndarray, noise: NoiseSpec) -> np.ndarray:
    """L = P C^T R^-1."""
    return p @ ss.c.T / noise.measurement_noise_std ** 2


@dataclass
class FilterDesign:
    """Immutable observer design: model, gain, covariance, and the affine
    reference point (x_ref state offset, v_ref input offset) that maps the
    linear filter onto absolute SOC / voltage coordinates."""

    ss: StateSpace
    gain_l: np.ndarray
    covariance_p: np.ndarray
    noise: NoiseSpec
    x_ref: np.ndarray = None
    v_ref: float = 0.0
    residual: float = field(default=0.0)

    def __post_init__(self):
        n = self.ss.n_states
        self.gain_l = np.asarray(self.gain_l, dtype=float).reshape(n, 1)
        self.covariance_p = np.asarray(self.covariance_p, dtype=float)
        if self.x_ref is None:
            self.x_ref = np.zeros(n)
        self.x_ref = np.asarray(self.x_ref, dtype=float).reshape(n)

    def closed_loop_eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvals(self.ss.a - self.gain_l @ self.ss.c)

    def to_json(self) -> str:
        return json.dumps({
            "a": self.ss.a.tolist(),
            "b": self.ss.b.ravel().tolist(),
            "c": self.ss.c.ravel().tolist(),
            "d": self.ss.d,
            "state_labels": list(self.ss.state_labels),
            "gain_l": self.gain_l.ravel().tolist(),
            "covariance_p": self.covariance_p.tolist(),
            "x_ref": self.x_ref.tolist(),
            "v_ref": self.v_ref,
            "riccati_residual": self.residual,
        }, indent=2, sort_keys=True)


def design_filter(ss: StateSpace, noise: NoiseSpec, x_ref=None,
                  v_ref: float = 0.0) -> FilterDesign:
    p = solve_care(ss, noise)
    gain = steady_gain(ss, p, noise)
    return FilterDesign(ss, gain, p, noise, x_ref=x_ref, v_ref=v_ref,
                        residual=care_residual(ss, p, noise))


def filter_step(design: FilterDesign, xhat: np.ndarray, u_voltage: float,
                y_current: float, dt: float):
    """One RK4 step of the observer ODE; the innovation uses the pre-step
    estimate. Returns (new estimate, predicted current at step start)."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    xhat = np.asarray(xhat, dtype=float).reshape(design.ss.n_states)
    k = backend.get_kernels()
    xh, yh = k.filter_rollout(
        design.ss.a, design.ss.b.ravel(), design.ss.c.ravel(), design.ss.d,
        design.gain_l.ravel(), design.x_ref, design.v_ref, xhat,
        np.array([0.0, dt]), np.full(2, float(u_voltage)),
        np.full(2, float(y_current)))
    new = xh[-1]
    if not np.all(np.isfinite(new)):
        raise FilterDivergenceError("observer state became non-finite", t=dt)
    return new, float(yh[0])


def run_filter(design: FilterDesign, initial_estimate, measurements):
    """Sequential rollout over time-sorted (t, v, i) measurements.

    Returns (t, xhat trajectory (T, n), yhat (T,)); an empty measurement
    sequence yields just the initial estimate at t=0.
    """
    meas = np.asarray(measurements, dtype=float)
    n = design.ss.n_states
    x0 = np.broadcast_to(np.asarray(initial_estimate, dtype=float), (n,)).astype(float)
    if meas.size == 0:
        du = 0.0
        yhat = float((design.ss.c @ (x0 - design.x_ref))[0] + design.ss.d * du)
        return np.zeros(1), x0.reshape(1, n), np.array([yhat])
    if meas.ndim != 2 or meas.shape[1] != 3:
        raise ValueError("measurements must be rows of (t, v, i)")
    t = meas[:, 0]
    if np.any(np.diff(t) <= 0):
        raise ValueError("measurement times must be strictly increasing")
    k = backend.get_kernels()
    xh, yh = k.filter_rollout(
        design.ss.a, design.ss.b.ravel(), design.ss.c.ravel(), design.ss.d,
        design.gain_l.ravel(), design.x_ref, design.v_ref, x0.copy(),
        t, meas[:, 1], meas[:, 2])
    if not np.all(np.isfinite(xh)):
        bad = np.flatnonzero(~np.all(np.isfinite(xh), axis=1))
        raise FilterDivergenceError(
            f"observer diverged at t={t[bad[0]]}", t=float(t[bad[0]]))
    return t, xh, yh
