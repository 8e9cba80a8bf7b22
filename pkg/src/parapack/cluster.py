"""Grouping cells by potentiostatic relaxation eigenvalue.

Cells with near-equal eigenvalues make the pack unobservable; merging each
such group into one fictitious equivalent cell (capacities sum, series
resistances combine in parallel) restores observability of the reduced
model while keeping the same terminal behavior for identical members.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .cell import CellParams, cell_eigenvalue
from .errors import AggregationError
from .linearize import EquilibriumPoint, StateSpace, linearize_first_order
from .observe import relative_gap
from .pack import PackModel


@dataclass
class ClusterAssignment:
    labels: np.ndarray       # per-cell cluster index
    centers: np.ndarray      # per-cluster mean eigenvalue, ascending

    @property
    def n_clusters(self) -> int:
        return self.centers.size

    def members(self, c: int) -> list:
        return [int(i) for i in np.flatnonzero(self.labels == c)]

    def to_json(self) -> str:
        return json.dumps({"labels": self.labels.tolist(),
                           "centers": self.centers.tolist()},
                          indent=2, sort_keys=True)


@dataclass
class ClusteredPack:
    """Partition of a pack plus one aggregate cell per cluster."""

    clusters: list           # list of (member_indices, CellParams)

    @property
    def n_clusters(self) -> int:
        return len(self.clusters)

    def model(self) -> PackModel:
        return PackModel([agg for _, agg in self.clusters])

    def to_json(self) -> str:
        doc = []
        for members, agg in self.clusters:
            doc.append({
                "members": list(members),
                "q_coulombs": agg.q,
                "r_s_ohms": agg.r_s,
                "rc_pairs": [{"r_ohms": r, "c_farads": c} for r, c in agg.rc_pairs],
            })
        return json.dumps({"clusters": doc}, indent=2, sort_keys=True)


def cluster_by_eigenvalue(model: PackModel, gammas,
                          rel_gap_threshold: float) -> ClusterAssignment:
    """Single-linkage agglomeration on sorted eigenvalues.

    Consecutive eigenvalues whose relative gap stays below the threshold
    join the same cluster; deterministic for fixed input.
    """
    if rel_gap_threshold <= 0:
        raise ValueError("threshold must be positive")
    gammas = np.broadcast_to(np.asarray(gammas, dtype=float), (model.n_cells,))
    lam = np.array([cell_eigenvalue(c, g) for c, g in zip(model.cells, gammas)])
    order = np.argsort(lam)
    labels = np.empty(model.n_cells, dtype=int)
    cluster = 0
    labels[order[0]] = 0
    for prev, cur in zip(order, order[1:]):
        if relative_gap(lam[prev], lam[cur]) >= rel_gap_threshold:
            cluster += 1
        labels[cur] = cluster
    centers = np.array([lam[labels == c].mean() for c in range(cluster + 1)])
    return ClusterAssignment(labels, centers)


def aggregate_cluster(members) -> CellParams:
    """Merge cells into one equivalent cell: capacities sum, resistances
    combine in parallel (per RC pair position too); the shared OCV curve is
    carried over."""
    members = list(members)
    if not members:
        raise AggregationError("cannot aggregate an empty cluster")
    ocv = members[0].ocv
    if any(m.ocv != ocv for m in members[1:]):
        raise AggregationError("cluster members must share one OCV curve")
    n_rc = members[0].n_rc
    if any(m.n_rc != n_rc for m in members[1:]):
        raise AggregationError("cluster members must have equal RC pair counts")
    q = sum(m.q for m in members)
    r_s = 1.0 / sum(1.0 / m.r_s for m in members)
    rc_pairs = []
    for j in range(n_rc):
        r = 1.0 / sum(1.0 / m.rc_pairs[j][0] for m in members)
        c = sum(m.rc_pairs[j][1] for m in members)
        rc_pairs.append((r, c))
    return CellParams(q, r_s, tuple(rc_pairs), ocv)


def build_clustered_pack(model: PackModel,
                         assignment: ClusterAssignment) -> ClusteredPack:
    clusters = []
    for c in range(assignment.n_clusters):
        members = assignment.members(c)
        clusters.append((members, aggregate_cluster([model.cells[i] for i in members])))
    return ClusteredPack(clusters)


def clustered_state_space(clustered: ClusteredPack,
                          eq: EquilibriumPoint) -> StateSpace:
    """First-order linearized model with one SOC state per cluster."""
    ss = linearize_first_order(clustered.model(), eq)
    ss.state_labels = [f"cluster{c + 1}:soc" for c in range(clustered.n_clusters)]
    return ss


def cluster_true_soc(socs: np.ndarray, model: PackModel,
                     clustered: ClusteredPack) -> np.ndarray:
    """Capacity-weighted true SOC per cluster (charge-conserving ground
    truth for scoring cluster-level estimates). socs is (..., N)."""
    out = []
    for members, _ in clustered.clusters:
        qs = np.array([model.cells[i].q for i in members])
        out.append(socs[..., members] @ qs / qs.sum())
    return np.stack(out, axis=-1)
