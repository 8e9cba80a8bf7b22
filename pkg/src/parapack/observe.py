"""Linear observability test for voltage-driven pack models.

The first-order pack model is observable iff (i) every OCV slope gamma_k is
nonzero, (ii) every series resistance is finite, and (iii) all potentiostatic
relaxation eigenvalues are distinct: the observability matrix columns are
nonzero multiples of Vandermonde columns in the eigenvalues.

The numerical rank and the symbolic criterion can disagree for large or
tightly clustered eigenvalue sets (the Vandermonde matrix is notoriously
ill-conditioned), so the report carries both and flags disagreement.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict

import numpy as np

from .linearize import StateSpace, diagonalize_to_first_order

DEFAULT_REL_GAP_TOL = 1e-6


def observability_matrix(ss: StateSpace) -> np.ndarray:
    """Stack C, CA, ..., CA^(n-1)."""
    n = ss.n_states
    rows = np.empty((n, n))
    row = ss.c.copy()
    for i in range(n):
        rows[i] = row
        row = row @ ss.a
    return rows


def vandermonde_det(lambdas) -> float:
    """Determinant of the square matrix with rows lam^0, lam^1, ...

    Equals the product of (lam_j - lam_i) over i < j; zero iff any value
    repeats; 1 for a single value (empty product).
    """
    lam = np.asarray(lambdas, dtype=float)
    if lam.ndim != 1 or lam.size < 1:
        raise ValueError("need a 1-D list of at least one eigenvalue")
    det = 1.0
    for j in range(lam.size):
        for i in range(j):
            det *= lam[j] - lam[i]
    return det


def relative_gap(a: float, b: float) -> float:
    """|a - b| relative to the smaller magnitude of the pair."""
    denom = min(abs(a), abs(b))
    if denom == 0.0:
        return np.inf if a != b else 0.0
    return abs(a - b) / denom


@dataclass
class ObservabilityReport:
    n_states: int
    rank: int
    observable: bool
    condition_nonzero_gamma: list
    condition_finite_rs: list
    eigenvalues: list
    min_pairwise_gap: float
    offending_pairs: list
    symbolic_observable: bool
    rank_disagrees: bool

    def to_json(self) -> str:
        doc = asdict(self)
        doc["min_pairwise_gap"] = (None if np.isinf(self.min_pairwise_gap)
                                   else self.min_pairwise_gap)
        return json.dumps(doc, indent=2, sort_keys=True)


def _numeric_rank(ss: StateSpace) -> int:
    # Rank-preserving conditioning: scale time so max |eigenvalue| is ~1
    # (scales each CA^i row by a nonzero constant), then normalize rows.
    eigs = np.diag(ss.a) if _is_diag(ss.a) else np.linalg.eigvals(ss.a)
    scale = np.max(np.abs(eigs))
    a_scaled = ss.a / scale if scale > 0 else ss.a
    obs = observability_matrix(StateSpace(a_scaled, ss.b, ss.c, ss.d,
                                          list(ss.state_labels)))
    norms = np.linalg.norm(obs, axis=1)
    nz = norms > 0
    obs[nz] = obs[nz] / norms[nz, None]
    sv = np.linalg.svd(obs, compute_uv=False)
    tol = max(obs.shape) * np.finfo(float).eps * sv[0] if sv.size else 0.0
    return int(np.sum(sv > tol))


def _is_diag(a: np.ndarray) -> bool:
    return bool(np.allclose(a, np.diag(np.diag(a)), atol=0.0, rtol=0.0))


def check_observability(ss: StateSpace, gammas, rs,
                        rel_gap_tol: float = DEFAULT_REL_GAP_TOL) -> ObservabilityReport:
    """Evaluate the three symbolic conditions plus the numerical SVD rank.

    gammas and rs are per-cell; eigenvalues come from A (diagonal entries
    when A is diagonal, dense eigensolve after diagonalization otherwise).
    The `observable` verdict requires full numerical rank and all symbolic
    conditions; `rank_disagrees` marks numeric/symbolic conflicts.
    """
    gammas = np.atleast_1d(np.asarray(gammas, dtype=float))
    rs = np.atleast_1d(np.asarray(rs, dtype=float))
    if gammas.shape != rs.shape:
        raise ValueError("gammas and rs must have equal length")
    n = ss.n_states
    if _is_diag(ss.a):
        eigs = np.sort(np.diag(ss.a))
    else:
        eigs = np.sort(np.diag(diagonalize_to_first_order(ss).a))

    cond_gamma = [bool(g != 0.0) for g in gammas]
    cond_rs = [bool(np.isfinite(r)) for r in rs]
    offending = []
    min_gap = np.inf
    for j in range(n):
        for i in range(j):
            gap = relative_gap(eigs[i], eigs[j])
            min_gap = min(min_gap, gap)
            if gap < rel_gap_tol:
                offending.append((i, j))
    symbolic = all(cond_gamma) and all(cond_rs) and not offending
    rank = _numeric_rank(ss)
    observable = symbolic and rank == n
    return ObservabilityReport(
        n_states=n,
        rank=rank,
        observable=observable,
        condition_nonzero_gamma=cond_gamma,
        condition_finite_rs=cond_rs,
        eigenvalues=eigs.tolist(),
        min_pairwise_gap=float(min_gap),
        offending_pairs=offending,
        symbolic_observable=symbolic,
        rank_disagrees=(symbolic != (rank == n)),
    )
