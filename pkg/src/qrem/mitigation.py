"""Readout error-mitigated state reconstruction on connected noise clusters.

Five protocol variants are supported.  ``none`` estimates observables from
raw bitstring frequencies.  ``factorized`` and ``two_point`` run mitigated
state tomography on the observable pair with per-qubit and pair-level
reconstructed POVMs.  ``classical_correlated`` and ``correlated`` work on
the connected noise cluster, the union of noise clusters touching the
observable, the former with the POVM stripped to its computational-basis
diagonal (confusion-matrix mitigation), the latter with the full POVM.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Mapping, MutableMapping, Sequence

import numpy as np

from .calibration import MeasurementRecord, aggregate_for_subset
from .correlations import Clustering
from .linalg import (
    BASIS_ROTATIONS,
    PAULIS,
    DensityMatrix,
    Povm,
    basis_rotation,
    partial_trace,
    tensor_many,
    tensor_povms,
    trace_distance,
)

VARIANT_NONE = "none"
VARIANT_FACTORIZED = "factorized"
VARIANT_TWO_POINT = "two_point"
VARIANT_CLASSICAL = "classical_correlated"
VARIANT_CORRELATED = "correlated"
VARIANTS = (
    VARIANT_NONE,
    VARIANT_FACTORIZED,
    VARIANT_TWO_POINT,
    VARIANT_CLASSICAL,
    VARIANT_CORRELATED,
)

STATE_MLE_TOL = 1e-9
STATE_MLE_MAX_ITER = 2000
DENSE_CLUSTER_CAP = 8
_ITERATE_REG = 1e-12
_STACK_BYTES_LIMIT = 400_000_000


@dataclass(frozen=True)
class ConnectedCluster:
    """Union of the noise clusters touching an observable."""

    qubits: tuple
    members: tuple
    povm: Povm


def connected_cluster(
    observable_qubits: Sequence[int],
    clustering: Clustering,
    cluster_povms: Mapping[tuple, Povm],
) -> ConnectedCluster:
    """Merge the clusters containing the observable qubits and tensor their
    POVMs, reordered to ascending qubit order."""
    members: list[tuple] = []
    for q in sorted(set(observable_qubits)):
        c = clustering.cluster_of(q)
        if c not in members:
            members.append(c)
    members.sort(key=lambda c: c[0])
    qubits = tuple(sorted(q for c in members for q in c))
    blocks = []
    for c in members:
        if c not in cluster_povms:
            raise KeyError(f"no reconstructed POVM for cluster {c}")
        blocks.append((c, cluster_povms[c]))
    povm = tensor_povms(blocks, target_order=qubits)
    return ConnectedCluster(qubits, tuple(members), povm)


def classicalize(povm: Povm) -> Povm:
    """Keep only the computational-basis diagonal of every effect.

    Completeness survives because the diagonal of the identity is untouched;
    the result is the confusion-matrix model of the same readout.
    """
    effects = tuple(
        np.diag(np.real(np.diag(e))).astype(complex) for e in povm.effects
    )
    return Povm(effects, povm.n_qubits, povm.outcome_labels)


def pauli_settings(n_qubits: int) -> list[tuple]:
    return [tuple(s) for s in itertools.product("XYZ", repeat=n_qubits)]


def pauli_records_for_subset(
    records: Sequence[MeasurementRecord], subset: Sequence[int]
) -> list[MeasurementRecord]:
    """Marginalize Pauli-basis records onto ``subset``, merging settings
    that restrict identically."""
    agg = aggregate_for_subset(records, subset)
    return [
        MeasurementRecord(setting, tuple(subset), counts)
        for setting, counts in sorted(agg.items())
    ]


def _merged_counts(
    records: Sequence[MeasurementRecord], n_qubits: int
) -> tuple[list[tuple], np.ndarray]:
    """Settings list and (settings x outcomes) count matrix, validated."""
    merged: dict[tuple, np.ndarray] = {}
    qubits = records[0].qubits
    d = 2**n_qubits
    for rec in records:
        if rec.qubits != qubits:
            raise ValueError("records must share one qubit tuple")
        vec = merged.setdefault(tuple(rec.setting), np.zeros(d))
        for bitstring, c in rec.counts.items():
            vec[int(bitstring, 2)] += c
    expected = pauli_settings(n_qubits)
    missing = [s for s in expected if s not in merged]
    if missing:
        raise ValueError(f"missing {len(missing)} basis settings, e.g. {missing[0]}")
    settings = sorted(merged)
    return settings, np.stack([merged[s] for s in settings])


def reconstruct_state_mle(
    records: Sequence[MeasurementRecord],
    povm: Povm,
    tol: float = STATE_MLE_TOL,
    max_iter: int = STATE_MLE_MAX_ITER,
    return_history: bool = False,
):
    """Iterative maximum-likelihood state reconstruction.

    The records must cover all 3**m Pauli settings on the POVM's qubits.
    Effects are rotated per setting, then rho is iterated as R rho R with
    R = sum_i (n_i / p_i) E_i / N from the maximally mixed start.  A tiny
    identity admixture keeps the iterate strictly positive so zero-count
    effects with vanishing probability cannot stall the update.
    """
    m = povm.n_qubits
    if len(records[0].qubits) != m:
        raise ValueError("record qubits do not match the POVM size")
    settings, counts = _merged_counts(records, m)
    d = 2**m
    effects = povm.stacked()
    unitaries = [basis_rotation(s) for s in settings]
    n_total = counts.sum()
    if n_total <= 0:
        raise ValueError("no counts to reconstruct from")

    use_stack = len(settings) * effects.nbytes <= _STACK_BYTES_LIMIT
    if use_stack:
        # One flattened view serves both contractions: p_k = Tr(rho E_k) is a
        # matrix-vector product against the transposed effects, and since the
        # E_k are Hermitian with real weights, R = conj(w @ A) reuses the same
        # matrix.  The iteration is memory-bound, so halving the streamed
        # bytes matters more than the arithmetic.
        rotated = np.concatenate(
            [u.conj().T @ effects @ u for u in unitaries], axis=0
        )
        n_flat = counts.reshape(-1)
        a_for_p = np.ascontiguousarray(
            rotated.transpose(0, 2, 1).reshape(rotated.shape[0], d * d)
        )
        del rotated

    rho = np.eye(d, dtype=complex) / d
    history: list[float] = []
    for _ in range(max_iter):
        if use_stack:
            p = np.real(a_for_p @ rho.ravel())
            np.clip(p, 1e-15, None, out=p)
            if return_history:
                history.append(float(np.dot(n_flat, np.log(p))))
            r = np.conj((n_flat / p) @ a_for_p).reshape(d, d) / n_total
        else:
            r = np.zeros((d, d), dtype=complex)
            ll = 0.0
            for u, n_s in zip(unitaries, counts):
                rho_rot = u @ rho @ u.conj().T
                p = np.real(np.einsum("ab,oba->o", rho_rot, effects))
                np.clip(p, 1e-15, None, out=p)
                if return_history:
                    ll += float(np.dot(n_s, np.log(p)))
                w = np.einsum("o,oab->ab", n_s / p, effects)
                r += u.conj().T @ w @ u
            r /= n_total
            if return_history:
                history.append(ll)
        new = r @ rho @ r
        new /= np.real(np.trace(new))
        new = (1.0 - _ITERATE_REG) * new + _ITERATE_REG * np.eye(d) / d
        new = 0.5 * (new + new.conj().T)
        delta = float(np.max(np.abs(new - rho)))
        rho = new
        if delta < tol:
            break
    state = DensityMatrix(rho, m)
    if return_history:
        return state, history
    return state


def pauli_expectation(rho_matrix: np.ndarray, labels: Sequence[str]) -> float:
    op = tensor_many(PAULIS[l] for l in labels)
    return float(np.clip(np.real(np.trace(rho_matrix @ op)), -1.0, 1.0))


def direct_expectation(
    records: Sequence[MeasurementRecord],
    qubits: Sequence[int],
    labels: Sequence[str],
) -> float:
    """Unmitigated estimate from raw bitstring frequencies.

    Uses every record whose setting restricts to the requested bases on the
    observable qubits; outcome bit 0 carries eigenvalue +1.
    """
    agg = aggregate_for_subset(records, qubits)
    counts = agg.get(tuple(labels))
    if not counts:
        raise ValueError(f"no record measures bases {labels} on {qubits}")
    total = sum(counts.values())
    signed = sum(
        c * (-1.0 if bits.count("1") % 2 else 1.0) for bits, c in counts.items()
    )
    return float(np.clip(signed / total, -1.0, 1.0))


def _variant_support(
    variant: str,
    pair: tuple,
    cc: ConnectedCluster,
    pair_povms: Mapping | None,
    single_povms: Mapping | None,
) -> tuple[tuple, Povm] | None:
    pair = tuple(sorted(pair))
    if variant == VARIANT_NONE:
        return None
    if variant == VARIANT_FACTORIZED:
        if single_povms is None:
            raise ValueError("factorized variant needs per-qubit POVMs")
        povm = tensor_povms(
            [((q,), single_povms[q]) for q in pair], target_order=pair
        )
        return pair, povm
    if variant == VARIANT_TWO_POINT:
        if pair_povms is None:
            raise ValueError("two_point variant needs pair POVMs")
        return pair, pair_povms[pair]
    if variant == VARIANT_CLASSICAL:
        return cc.qubits, classicalize(cc.povm)
    if variant == VARIANT_CORRELATED:
        return cc.qubits, cc.povm
    raise ValueError(f"unknown protocol variant {variant!r}")


def variant_state(
    variant: str,
    pair: tuple,
    cc: ConnectedCluster,
    records: Sequence[MeasurementRecord],
    pair_povms: Mapping | None = None,
    single_povms: Mapping | None = None,
    cache: MutableMapping | None = None,
    **mle_kwargs,
):
    """Reconstructed state for a variant, or None for ``none``.

    Returns ``(support_qubits, DensityMatrix)``.  The cache, when given,
    must be scoped to one record set; reconstructions are keyed by
    (variant, support).
    """
    spec = _variant_support(variant, pair, cc, pair_povms, single_povms)
    if spec is None:
        return None
    support, povm = spec
    if len(support) > DENSE_CLUSTER_CAP:
        raise ValueError(
            f"connected cluster {support} exceeds the dense cap of "
            f"{DENSE_CLUSTER_CAP} qubits"
        )
    key = (variant, support)
    if cache is not None and key in cache:
        return cache[key]
    if support == cc.qubits:
        subset_records = list(records)
    else:
        subset_records = pauli_records_for_subset(records, support)
    state = reconstruct_state_mle(subset_records, povm, **mle_kwargs)
    result = (support, state)
    if cache is not None:
        cache[key] = result
    return result


def mitigate_observable(
    pair: tuple,
    labels: tuple,
    variant: str,
    clustering: Clustering,
    cluster_povms: Mapping[tuple, Povm],
    records: Sequence[MeasurementRecord],
    pair_povms: Mapping | None = None,
    single_povms: Mapping | None = None,
    cache: MutableMapping | None = None,
    **mle_kwargs,
):
    """Mitigated expectation of a two-qubit Pauli observable.

    Returns ``(expectation, state)`` where ``state`` is the reconstructed
    density matrix on the variant's support (None for ``none``).
    """
    pair = tuple(sorted(pair))
    if variant == VARIANT_NONE:
        return direct_expectation(records, pair, labels), None
    cc = connected_cluster(pair, clustering, cluster_povms)
    support, state = variant_state(
        variant,
        pair,
        cc,
        records,
        pair_povms=pair_povms,
        single_povms=single_povms,
        cache=cache,
        **mle_kwargs,
    )
    reduced = reduce_to_pair(state, support, pair)
    return pauli_expectation(reduced.matrix, labels), state


def reduce_to_pair(
    state: DensityMatrix, support: Sequence[int], pair: Sequence[int]
) -> DensityMatrix:
    """Partial-trace a reconstructed state down to the observable pair."""
    positions = [list(support).index(q) for q in sorted(pair)]
    reduced = partial_trace(state.matrix, positions, state.n_qubits)
    return DensityMatrix(reduced, len(positions))


def conditioned_inversion_gap(
    rho_abc: DensityMatrix, povm_bc: Povm, rcond: float = 1e-10
) -> float:
    """Witness that mitigation must run on the whole connected cluster.

    For a three-qubit state read out by a product of a clean single-qubit
    POVM on A and a correlated two-qubit POVM on (B, C), compares the AB
    marginal of the full linear-inversion reconstruction against the
    inversion built from operators that trace out C while keeping its
    outcome index.  The two overlap matrices differ, so for a generic
    entangled state the reconstructions disagree; the returned trace
    distance quantifies the gap.  Exact outcome probabilities are used, so
    the gap is purely structural.
    """
    if rho_abc.n_qubits != 3 or povm_bc.n_qubits != 2:
        raise ValueError("expects a 3-qubit state and a 2-qubit POVM")
    proj = [np.array([[1, 0], [0, 0]], complex), np.array([[0, 0], [0, 1]], complex)]
    settings = list(itertools.product("XYZ", repeat=3))
    weight = 1.0 / len(settings)
    full_ops, cond_ops = [], []
    for s in settings:
        ua, ub, uc = (BASIS_ROTATIONS[x] for x in s)
        ubc = np.kron(ub, uc)
        rot_a = [ua.conj().T @ p @ ua for p in proj]
        rot_bc = [ubc.conj().T @ m @ ubc for m in povm_bc.effects]
        for a_eff in rot_a:
            for m_eff in rot_bc:
                full_ops.append(weight * np.kron(a_eff, m_eff))
                cond_ops.append(
                    weight * np.kron(a_eff, partial_trace(m_eff, (0,), 2))
                )
    full = np.stack(full_ops)
    cond = np.stack(cond_ops)
    p = np.real(np.einsum("ab,kba->k", rho_abc.matrix, full))

    def invert(ops):
        gram = np.real(np.einsum("kab,lba->kl", ops, ops))
        coeff = np.linalg.pinv(gram, rcond=rcond, hermitian=True) @ p
        rho = np.einsum("k,kab->ab", coeff, ops)
        return 0.5 * (rho + rho.conj().T)

    rho_full_ab = partial_trace(invert(full), (0, 1), 3)
    rho_cond = invert(cond)
    return trace_distance(rho_full_ab, rho_cond)
