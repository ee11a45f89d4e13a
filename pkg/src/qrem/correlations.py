"""Readout correlation coefficients and hierarchical noise clustering.

The coefficient between two qubits is the worst-case operator-norm change
of one qubit's traced-out POVM as the other qubit's preparation varies over
pure states.  Linearity in the Bloch vector makes the optimization exact up
to a search over unit directions, done on a Fibonacci sphere grid followed
by a local polish.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy.cluster import hierarchy
from scipy.optimize import minimize
from scipy.spatial.distance import squareform

from .linalg import (
    PAULI_I,
    PAULI_X,
    PAULI_Y,
    PAULI_Z,
    Povm,
    partial_trace,
    permute_qubits,
)

DEFAULT_GRID_POINTS = 2000
_SIGMAS = (PAULI_X, PAULI_Y, PAULI_Z)


def reduced_povm_element(
    povm2: Povm, outcome: int, ref_state: np.ndarray
) -> np.ndarray:
    """Traced-out effect on qubit A for outcome ``outcome`` there, with
    qubit B prepared in ``ref_state``.

    Qubit A is outcome bit 0 (most significant), qubit B bit 1.  The
    elements for outcome 0 and 1 sum to the identity for any reference
    state.
    """
    if povm2.n_qubits != 2:
        raise ValueError("need a two-qubit POVM")
    if ref_state.shape != (2, 2):
        raise ValueError("reference state must be a one-qubit operator")
    total = np.zeros((2, 2), dtype=complex)
    lift = np.kron(PAULI_I, ref_state)
    for i_b in (0, 1):
        eff = povm2.effects[outcome * 2 + i_b]
        total += partial_trace(eff @ lift, keep=(0,), n_qubits=2)
    return total


def swap_pair_povm(povm2: Povm) -> Povm:
    """Exchange the roles of the two qubits, reindexing outcomes to match."""
    effects = [None] * 4
    for i_a in (0, 1):
        for i_b in (0, 1):
            eff = permute_qubits(povm2.effects[i_a * 2 + i_b], (0, 1), (1, 0))
            effects[i_b * 2 + i_a] = eff
    return Povm(tuple(effects), 2)


def _bloch_response(povm2: Povm) -> np.ndarray:
    """Operators G_k with M_0^(A, rho_B(d)) = G_0 + sum_k d_k G_k."""
    return np.stack(
        [reduced_povm_element(povm2, 0, 0.5 * s) for s in _SIGMAS]
    )


def _fibonacci_sphere(n: int) -> np.ndarray:
    i = np.arange(n)
    z = 1.0 - 2.0 * (i + 0.5) / n
    phi = i * np.pi * (3.0 - np.sqrt(5.0))
    r = np.sqrt(1.0 - z * z)
    return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)


def _norms_2x2(mats: np.ndarray) -> np.ndarray:
    """Operator norms of a stack of Hermitian 2x2 matrices, closed form."""
    a = np.real(mats[:, 0, 0])
    b = np.real(mats[:, 1, 1])
    c = mats[:, 0, 1]
    half_sum = 0.5 * (a + b)
    radius = np.sqrt(0.25 * (a - b) ** 2 + np.abs(c) ** 2)
    return np.abs(half_sum) + radius


def correlation_coefficient(
    povm2: Povm,
    traced_qubit: int = 1,
    grid_points: int = DEFAULT_GRID_POINTS,
    refine: bool = True,
) -> float:
    """Worst-case sensitivity of one qubit's reduced POVM to the other.

    The supremum over pure reference-state pairs equals twice the maximum
    over unit Bloch directions u of ||sum_k u_k G_k||, since the difference
    of two unit Bloch vectors ranges over the radius-2 ball and the norm is
    maximized on its surface.
    """
    if traced_qubit == 0:
        povm2 = swap_pair_povm(povm2)
    elif traced_qubit != 1:
        raise ValueError("traced_qubit must be 0 or 1")
    g = _bloch_response(povm2)
    grid = _fibonacci_sphere(grid_points)
    vals = _norms_2x2(np.tensordot(grid, g, axes=(1, 0)))
    best_idx = int(np.argmax(vals))
    best = float(vals[best_idx])
    if refine:
        u0 = grid[best_idx]
        theta0 = float(np.arccos(np.clip(u0[2], -1.0, 1.0)))
        phi0 = float(np.arctan2(u0[1], u0[0]))

        def negated(angles):
            th, ph = angles
            u = np.array(
                [np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)]
            )
            return -_norms_2x2(np.tensordot(u[None, :], g, axes=(1, 0)))[0]

        res = minimize(
            negated,
            np.array([theta0, phi0]),
            method="Nelder-Mead",
            options={"xatol": 1e-7, "fatol": 1e-12, "maxiter": 400},
        )
        best = max(best, float(-res.fun))
    return 2.0 * best


def symmetric_correlation(povm2: Povm, **kwargs) -> float:
    """Average of the two directional coefficients."""
    forward = correlation_coefficient(povm2, traced_qubit=1, **kwargs)
    backward = correlation_coefficient(povm2, traced_qubit=0, **kwargs)
    return 0.5 * (forward + backward)


@dataclass(frozen=True)
class CorrelationMatrix:
    """Symmetric matrix of pairwise correlation coefficients, zero diagonal."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ValueError("correlation matrix must be square")
        if np.max(np.abs(v - v.T)) > 0:
            raise ValueError("correlation matrix must be exactly symmetric")
        if np.any(np.diag(v) != 0.0):
            raise ValueError("diagonal must be zero")
        if v.min(initial=0.0) < 0.0 or v.max(initial=0.0) > 1.0 + 1e-9:
            raise ValueError("entries must lie in [0, 1]")
        object.__setattr__(self, "values", v)

    @property
    def n_qubits(self) -> int:
        return self.values.shape[0]


def correlation_matrix(
    pair_povms: Mapping[tuple, Povm], n_qubits: int, **kwargs
) -> CorrelationMatrix:
    """All-pairs symmetric coefficients from two-qubit POVMs.

    ``pair_povms[(i, j)]`` (i < j) must treat qubit i as outcome bit 0.
    """
    c = np.zeros((n_qubits, n_qubits))
    for i in range(n_qubits):
        for j in range(i + 1, n_qubits):
            if (i, j) not in pair_povms:
                raise KeyError(f"missing POVM for pair {(i, j)}")
            val = symmetric_correlation(pair_povms[(i, j)], **kwargs)
            c[i, j] = c[j, i] = min(val, 1.0 + 1e-9)
    return CorrelationMatrix(c)


@dataclass(frozen=True)
class Clustering:
    """Partition of qubits into noise clusters plus the merge history."""

    clusters: tuple
    n_corr: int
    merge_history: tuple
    threshold: float

    def __post_init__(self):
        clusters = tuple(tuple(sorted(c)) for c in self.clusters)
        clusters = tuple(sorted(clusters, key=lambda c: c[0]))
        object.__setattr__(self, "clusters", clusters)
        for c in clusters:
            if len(c) > self.n_corr:
                raise ValueError(f"cluster {c} exceeds n_corr={self.n_corr}")

    def cluster_of(self, qubit: int) -> tuple:
        for c in self.clusters:
            if qubit in c:
                return c
        raise KeyError(qubit)


def auto_threshold(n_calib: int) -> float:
    """Distance threshold just below the expected statistical fluctuations."""
    return 1.0 - 1.0 / np.sqrt(n_calib)


def cluster(
    corr: CorrelationMatrix,
    n_corr: int,
    threshold="auto",
    linkage: str = "complete",
    n_calib: int | None = None,
) -> Clustering:
    """Agglomerative clustering on distances d = 1 - c with size capping.

    Merging stops at inter-cluster distance above the threshold; any cluster
    still larger than ``n_corr`` is split by following its dendrogram
    branches downward until every piece fits.
    """
    if linkage not in ("complete", "average"):
        raise ValueError("linkage must be 'complete' or 'average'")
    if threshold == "auto":
        if n_calib is None:
            raise ValueError("auto threshold needs n_calib")
        gamma = auto_threshold(n_calib)
    else:
        gamma = float(threshold)
        if not 0.0 < gamma <= 1.0:
            raise ValueError("threshold must lie in (0, 1]")
    n = corr.n_qubits
    if n == 1:
        return Clustering(((0,),), n_corr, (), gamma)
    dist = np.clip(1.0 - corr.values, 0.0, None)
    np.fill_diagonal(dist, 0.0)
    z = hierarchy.linkage(squareform(dist, checks=False), method=linkage)
    flat = hierarchy.fcluster(z, t=gamma, criterion="distance")
    tree = hierarchy.to_tree(z)

    node_by_leafset: dict[frozenset, object] = {}

    def collect(node):
        if node.is_leaf():
            leaves = frozenset([node.id])
        else:
            leaves = collect(node.left) | collect(node.right)
        node_by_leafset[leaves] = node
        return leaves

    collect(tree)

    def split(node) -> list[tuple]:
        count = node.get_count()
        if count <= n_corr:
            return [tuple(sorted(node.pre_order()))]
        return split(node.left) + split(node.right)

    clusters: list[tuple] = []
    for cid in sorted(set(flat)):
        members = frozenset(int(q) for q in np.flatnonzero(flat == cid))
        if len(members) <= n_corr:
            clusters.append(tuple(sorted(members)))
        else:
            clusters.extend(split(node_by_leafset[members]))
    history = tuple(
        (int(a), int(b), float(d), int(size)) for a, b, d, size in z
    )
    return Clustering(tuple(clusters), n_corr, history, gamma)


def save_clustering(clustering: Clustering, path) -> None:
    doc = {
        "clusters": [list(c) for c in clustering.clusters],
        "n_corr": clustering.n_corr,
        "threshold": clustering.threshold,
        "merges": [list(m) for m in clustering.merge_history],
    }
    with open(path, "w", encoding="ascii") as fh:
        json.dump(doc, fh, indent=1)


def save_correlation_csv(corr: CorrelationMatrix, path) -> None:
    np.savetxt(path, corr.values, delimiter=",", fmt="%.12g")


def load_correlation_csv(path) -> CorrelationMatrix:
    values = np.atleast_2d(np.loadtxt(path, delimiter=","))
    values = 0.5 * (values + values.T)
    np.fill_diagonal(values, 0.0)
    return CorrelationMatrix(values)
