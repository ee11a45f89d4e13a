"""Calibration schedules and maximum-likelihood detector tomography.

Calibration states are the four tetrahedral pure states (pairwise overlap
1/3), a minimal informationally complete single-qubit set.  A hash family
turns them into a parallel schedule from which every small-subset POVM can
be reconstructed by marginalizing counts.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .hashfamily import HashFamily
from .linalg import Povm, outcome_labels, tensor_many

DETECTOR_ML_TOL = 1e-8
DETECTOR_ML_MAX_ITER = 5000

_SQ23 = np.sqrt(2.0 / 3.0)
_TETRA_VECTORS = (
    np.array([1.0, 0.0], dtype=complex),
    np.array([1.0 / np.sqrt(3.0), _SQ23], dtype=complex),
    np.array([1.0 / np.sqrt(3.0), _SQ23 * np.exp(2j * np.pi / 3.0)], dtype=complex),
    np.array([1.0 / np.sqrt(3.0), _SQ23 * np.exp(4j * np.pi / 3.0)], dtype=complex),
)
CALIBRATION_LABELS = (1, 2, 3, 4)


def calibration_state(label: int) -> np.ndarray:
    """State vector of the tetrahedral calibration state with label 1..4."""
    if label not in CALIBRATION_LABELS:
        raise ValueError(f"calibration label must be 1..4, got {label}")
    return _TETRA_VECTORS[label - 1]


def calibration_projector(label: int) -> np.ndarray:
    v = calibration_state(label)
    return np.outer(v, v.conj())


def product_calibration_state(labels: Sequence[int]) -> np.ndarray:
    """Density matrix of a tensor product of calibration states."""
    return tensor_many(calibration_projector(l) for l in labels)


@dataclass(frozen=True)
class CalibrationSchedule:
    """Ordered per-qubit label assignments plus the per-setting shot budget."""

    settings: tuple
    shots_per_setting: int

    @property
    def n_settings(self) -> int:
        return len(self.settings)

    @property
    def n_qubits(self) -> int:
        return len(self.settings[0])


def build_schedule(family: HashFamily, shots_total: int) -> CalibrationSchedule:
    """Schedule with one batch of settings per hash function.

    Each hash function contributes every non-constant assignment of the four
    calibration labels to its digit groups (4**t - 4 settings); the four
    all-equal assignments are measured once globally at the end.  The total
    shot budget is divided evenly across settings.
    """
    v = family.n_values
    tuples = [
        combo
        for combo in itertools.product(CALIBRATION_LABELS, repeat=v)
        if len(set(combo)) > 1
    ]
    settings: list[tuple[int, ...]] = []
    for row in family.table:
        for combo in tuples:
            settings.append(tuple(combo[g] for g in row))
    for label in CALIBRATION_LABELS:
        settings.append((label,) * family.n_inputs)
    if shots_total < len(settings):
        raise ValueError(
            f"{shots_total} shots cannot cover {len(settings)} settings"
        )
    return CalibrationSchedule(tuple(settings), shots_total // len(settings))


@dataclass
class MeasurementRecord:
    """Outcome counts for one measurement setting.

    ``setting`` holds per-qubit calibration labels (ints) or Pauli basis
    letters; ``qubits`` names the qubit behind each bitstring position, most
    significant bit first.  Counts are floats so exact Born frequencies can
    stand in for sampled data.
    """

    setting: tuple
    qubits: tuple
    counts: dict
    _decoded: tuple | None = field(default=None, repr=False, compare=False)

    @property
    def shots(self) -> float:
        return float(sum(self.counts.values()))

    def decoded(self) -> tuple[np.ndarray, np.ndarray]:
        """Bit matrix (entries x qubits) and count vector, cached."""
        if self._decoded is None:
            keys = list(self.counts)
            bits = np.array(
                [[1 if c == "1" else 0 for c in k] for k in keys], dtype=np.int64
            ).reshape(len(keys), len(self.qubits))
            vals = np.array([self.counts[k] for k in keys], dtype=float)
            self._decoded = (bits, vals)
        return self._decoded


def marginalize_record(record: MeasurementRecord, subset: Sequence[int]) -> MeasurementRecord:
    """Restrict a record to ``subset`` by summing counts over other qubits.

    Total shots per setting are preserved exactly.
    """
    positions = [record.qubits.index(q) for q in subset]
    bits, vals = record.decoded()
    sub = bits[:, positions]
    weights = 1 << np.arange(len(positions) - 1, -1, -1)
    idx = sub @ weights
    agg = np.bincount(idx, weights=vals, minlength=2 ** len(positions))
    labels = outcome_labels(len(positions))
    counts = {labels[i]: float(agg[i]) for i in np.flatnonzero(agg)}
    setting = tuple(record.setting[p] for p in positions)
    return MeasurementRecord(setting, tuple(subset), counts)


def aggregate_for_subset(
    records: Iterable[MeasurementRecord], subset: Sequence[int]
) -> dict:
    """Marginal counts on ``subset`` merged across settings that restrict to
    the same labels there."""
    merged: dict[tuple, dict[str, float]] = {}
    for rec in records:
        sub = marginalize_record(rec, subset)
        bucket = merged.setdefault(sub.setting, {})
        for s, c in sub.counts.items():
            bucket[s] = bucket.get(s, 0.0) + c
    return merged


def _initial_effects(n_qubits: int) -> np.ndarray:
    """Strictly positive start: ideal projectors mixed with white noise."""
    d = 2**n_qubits
    ideal = np.stack([np.diag(row).astype(complex) for row in np.eye(d)])
    return 0.9 * ideal + 0.1 * np.eye(d) / d


def reconstruct_povm_ml(
    state_counts: Mapping[tuple, Mapping[str, float]],
    tol: float = DETECTOR_ML_TOL,
    max_iter: int = DETECTOR_ML_MAX_ITER,
    return_history: bool = False,
):
    """Iterative maximum-likelihood detector tomography.

    ``state_counts`` maps each calibration-label tuple to its outcome counts
    and must cover all 4**m label combinations on the m qubits.  Iterates

        M_i <- lam R_i M_i R_i lam,
        R_i = sum_s (f_si / p_si) rho_s,
        lam = (sum_j R_j M_j R_j)^(-1/2),

    which preserves completeness at every step, and stops when no effect
    entry moves by more than ``tol``.
    """
    first = next(iter(state_counts))
    m = len(first)
    expected = 4**m
    if len(state_counts) != expected:
        missing = expected - len(state_counts)
        raise ValueError(
            f"calibration coverage incomplete: {missing} of {expected} "
            "label combinations missing"
        )
    d = 2**m
    keys = sorted(state_counts)
    states = np.stack([product_calibration_state(k) for k in keys])
    freqs = np.zeros((len(keys), d))
    for row, key in enumerate(keys):
        for bitstring, c in state_counts[key].items():
            freqs[row, int(bitstring, 2)] = c
    totals = freqs.sum(axis=1)
    if np.any(totals <= 0):
        raise ValueError("every calibration setting needs at least one count")
    freqs /= totals.sum()

    effects = _initial_effects(m)
    # One flattened state view keeps both per-iteration contractions on the
    # BLAS fast path; the states are Hermitian with real weights, so the R
    # operators are the conjugate of a product against the same matrix.
    states_for_p = np.ascontiguousarray(
        states.transpose(0, 2, 1).reshape(len(keys), d * d)
    )
    history: list[float] = []
    for _ in range(max_iter):
        p = np.real(states_for_p @ effects.reshape(effects.shape[0], d * d).T)
        np.clip(p, 1e-12, None, out=p)
        if return_history:
            history.append(float(np.sum(freqs * np.log(p))))
        r = np.conj((freqs / p).T @ states_for_p).reshape(effects.shape[0], d, d)
        rmr = r @ effects @ r
        lam = _inverse_sqrt(rmr.sum(axis=0))
        new = lam @ rmr @ lam
        new = 0.5 * (new + np.conj(np.swapaxes(new, 1, 2)))
        delta = float(np.max(np.abs(new - effects)))
        effects = new
        if delta < tol:
            break
    povm = Povm(tuple(effects), m)
    if return_history:
        return povm, history
    return povm


def _inverse_sqrt(m: np.ndarray, floor: float = 1e-12) -> np.ndarray:
    vals, vecs = np.linalg.eigh(m)
    if vals[-1] <= 0:
        raise np.linalg.LinAlgError("degenerate calibration data")
    vals = np.clip(vals, floor, None)
    return (vecs / np.sqrt(vals)) @ vecs.conj().T


def reconstruct_povm_from_records(
    records: Iterable[MeasurementRecord],
    subset: Sequence[int],
    **kwargs,
):
    """Marginalize calibration records onto ``subset`` and run the ML fit.

    Summing counts over out-of-subset qubits prepares, in effect, the
    uniform mixture of calibration states there, i.e. the maximally mixed
    reference state.
    """
    return reconstruct_povm_ml(aggregate_for_subset(records, subset), **kwargs)


def overlap_matrix(povm: Povm) -> np.ndarray:
    """Gram matrix T_ij = Tr(M_i M_j) of the POVM effects."""
    stacked = povm.stacked()
    return np.real(np.einsum("iab,jba->ij", stacked, stacked))


def linear_inversion_state(
    frequencies: Sequence[float], povm: Povm, cond_limit: float = 1e12
) -> np.ndarray:
    """Linear-inversion estimate sum_ij f_i (T^-1)_ij M_j.

    Hermitian with unit trace but not guaranteed positive; a diagnostic and
    theory tool rather than a physical estimator.
    """
    f = np.asarray(frequencies, dtype=float)
    if len(f) != povm.n_outcomes:
        raise ValueError("one frequency per POVM outcome required")
    t = overlap_matrix(povm)
    cond = np.linalg.cond(t)
    if not np.isfinite(cond) or cond > cond_limit:
        raise np.linalg.LinAlgError(
            f"overlap matrix condition number {cond:.3g} exceeds {cond_limit:.3g}"
        )
    coeff = np.linalg.solve(t, f)
    rho = np.einsum("i,iab->ab", coeff, povm.stacked())
    return 0.5 * (rho + rho.conj().T)


def save_records(records: Sequence[MeasurementRecord], path) -> None:
    doc = {
        "records": [
            {
                "setting": list(r.setting),
                "qubits": list(r.qubits),
                "counts": {k: v for k, v in sorted(r.counts.items())},
            }
            for r in records
        ]
    }
    with open(path, "w", encoding="ascii") as fh:
        json.dump(doc, fh, indent=1)


def load_records(path) -> list[MeasurementRecord]:
    with open(path, "r", encoding="ascii") as fh:
        doc = json.load(fh)
    out = []
    for entry in doc["records"]:
        setting = tuple(entry["setting"])
        counts = {k: float(v) for k, v in entry["counts"].items()}
        out.append(MeasurementRecord(setting, tuple(entry["qubits"]), counts))
    return out


def save_povm(povm: Povm, path) -> None:
    doc = {
        "n_qubits": povm.n_qubits,
        "outcome_labels": list(povm.outcome_labels),
        "effects": [
            [[[float(z.real), float(z.imag)] for z in row] for row in effect]
            for effect in povm.effects
        ],
    }
    with open(path, "w", encoding="ascii") as fh:
        json.dump(doc, fh)


def load_povm(path) -> Povm:
    with open(path, "r", encoding="ascii") as fh:
        doc = json.load(fh)
    effects = tuple(
        np.array([[complex(re, im) for re, im in row] for row in effect])
        for effect in doc["effects"]
    )
    return Povm(effects, doc["n_qubits"], tuple(doc["outcome_labels"]))
