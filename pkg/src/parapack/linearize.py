"""Linearized voltage-driven pack models around an equilibrium.

At equilibrium every cell current is zero, capacitor charges are zero, and
the SOCs are arbitrary. With gamma_k the local OCV-SOC slope at cell k's
equilibrium SOC, the first-order (no RC) pack linearizes to

    A = diag(-gamma_k / (Q_k R_sk)),  B = [1/(Q_k R_sk)],
    C = [-gamma_k / R_sk],            D = sum_k 1/R_sk,

with pack voltage as input and total current as output. The full-order
variant keeps the RC charge states; diagonalizing it yields an equivalent
collection of first-order modes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .cell import cell_eigenvalue
from .errors import DiagonalizationError


@dataclass
class StateSpace:
    """Dense LTI realization (A, B, C, D) with one input and one output."""

    a: np.ndarray
    b: np.ndarray          # (n, 1)
    c: np.ndarray          # (1, n)
    d: float
    state_labels: list

    def __post_init__(self):
        self.a = np.atleast_2d(np.asarray(self.a, dtype=float))
        self.b = np.asarray(self.b, dtype=float).reshape(self.a.shape[0], 1)
        self.c = np.asarray(self.c, dtype=float).reshape(1, self.a.shape[0])
        self.d = float(self.d)
        if self.a.shape[0] != self.a.shape[1]:
            raise ValueError("A must be square")
        if len(self.state_labels) != self.a.shape[0]:
            raise ValueError("one label per state required")

    @property
    def n_states(self) -> int:
        return self.a.shape[0]

    def transfer(self, s: complex) -> complex:
        """Evaluate H(s) = C (sI - A)^-1 B + D."""
        n = self.n_states
        x = np.linalg.solve(s * np.eye(n) - self.a, self.b)
        return complex((self.c @ x)[0, 0] + self.d)

    def to_json(self) -> str:
        return json.dumps({
            "a": self.a.tolist(),
            "b": self.b.ravel().tolist(),
            "c": self.c.ravel().tolist(),
            "d": self.d,
            "state_labels": list(self.state_labels),
        }, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "StateSpace":
        doc = json.loads(text)
        return cls(np.array(doc["a"]), np.array(doc["b"]), np.array(doc["c"]),
                   doc["d"], doc["state_labels"])


@dataclass
class EquilibriumPoint:
    """Per-cell equilibrium SOCs and the OCV slopes evaluated there."""

    socs: np.ndarray
    gammas: np.ndarray

    def __post_init__(self):
        self.socs = np.atleast_1d(np.asarray(self.socs, dtype=float))
        self.gammas = np.atleast_1d(np.asarray(self.gammas, dtype=float))
        if self.socs.shape != self.gammas.shape:
            raise ValueError("socs and gammas must have equal length")


def make_equilibrium(model, socs=0.5, soc_window=(0.4, 0.6)) -> EquilibriumPoint:
    """Equilibrium with slopes taken as secants over soc_window.

    A secant over the 40-60% window is the default linearization used by the
    steady-state filter; shrink the window for a local slope.
    """
    socs = np.broadcast_to(np.asarray(socs, dtype=float), (model.n_cells,)).copy()
    lo, hi = soc_window
    gammas = np.array([c.ocv.slope(lo, hi) for c in model.cells])
    return EquilibriumPoint(socs, gammas)


def linearize_first_order(model, eq: EquilibriumPoint) -> StateSpace:
    """First-order (SOC-only) linearization; A is diagonal by construction."""
    n = model.n_cells
    if eq.socs.size != n:
        raise ValueError("equilibrium size must match the pack")
    lam = np.array([cell_eigenvalue(c, g) for c, g in zip(model.cells, eq.gammas)])
    qrs = np.array([c.q * c.r_s for c in model.cells])
    rs = np.array([c.r_s for c in model.cells])
    a = np.diag(lam)
    b = (1.0 / qrs).reshape(n, 1)
    c = (-eq.gammas / rs).reshape(1, n)
    d = float(np.sum(1.0 / rs))
    labels = [f"cell{k + 1}:soc" for k in range(n)]
    return StateSpace(a, b, c, d, labels)


def linearize_full(model, eq: EquilibriumPoint) -> StateSpace:
    """Linearization keeping each cell's RC charge states.

    States are ordered cell by cell: SOC, then one charge per RC pair. All
    states of a cell couple through the shared 1/R_s feedthrough path.
    """
    n = model.n_cells
    if eq.socs.size != n:
        raise ValueError("equilibrium size must match the pack")
    sizes = [1 + c.n_rc for c in model.cells]
    n_s = sum(sizes)
    a = np.zeros((n_s, n_s))
    b = np.zeros((n_s, 1))
    c_row = np.zeros((1, n_s))
    labels = []
    offset = 0
    for k, cell in enumerate(model.cells):
        g = eq.gammas[k]
        rs = cell.r_s
        nc = cell.n_rc
        caps = np.array([cap for _, cap in cell.rc_pairs])
        taus = np.array([r * cap for r, cap in cell.rc_pairs])
        i0 = offset
        # SOC row: d soc = (v - g*soc - sum x/c) / (q rs)
        a[i0, i0] = -g / (cell.q * rs)
        b[i0, 0] = 1.0 / (cell.q * rs)
        c_row[0, i0] = -g / rs
        for j in range(nc):
            a[i0, i0 + 1 + j] = -1.0 / (caps[j] * cell.q * rs)
        # charge rows: d x_j = (v - g*soc - sum x/c)/rs - x_j/(r_j c_j)
        for j in range(nc):
            r = i0 + 1 + j
            a[r, i0] = -g / rs
            for m in range(nc):
                a[r, i0 + 1 + m] = -1.0 / (caps[m] * rs)
            a[r, r] -= 1.0 / taus[j]
            b[r, 0] = 1.0 / rs
            c_row[0, r] = -1.0 / (caps[j] * rs)
        labels.append(f"cell{k + 1}:soc")
        labels += [f"cell{k + 1}:rc{j + 1}" for j in range(nc)]
        offset += 1 + nc
    d = float(sum(1.0 / cell.r_s for cell in model.cells))
    return StateSpace(a, b, c_row, d, labels)


def diagonalize_to_first_order(ss: StateSpace, imag_tol: float = 1e-9) -> StateSpace:
    """Similarity-transform to a diagonal A, preserving the transfer function.

    Battery RC networks yield real negative eigenvalues; complex or
    defective spectra are reported as errors rather than approximated.
    """
    a = ss.a
    if np.allclose(a, np.diag(np.diag(a)), atol=0.0, rtol=0.0):
        return StateSpace(a.copy(), ss.b.copy(), ss.c.copy(), ss.d,
                          list(ss.state_labels))
    w, vecs = np.linalg.eig(a)
    scale = max(np.max(np.abs(w)), 1.0)
    if np.max(np.abs(w.imag)) > imag_tol * scale:
        raise DiagonalizationError(f"complex eigenvalues encountered: {w}")
    w = w.real
    vecs = vecs.real
    if np.linalg.cond(vecs) > 1.0 / np.finfo(float).eps ** 0.75:
        raise DiagonalizationError("eigenvector matrix is numerically singular "
                                   "(defective A)")
    order = np.argsort(w)
    w = w[order]
    vecs = vecs[:, order]
    b = np.linalg.solve(vecs, ss.b)
    c = ss.c @ vecs
    labels = [f"mode{i + 1}" for i in range(ss.n_states)]
    return StateSpace(np.diag(w), b, c, ss.d, labels)
