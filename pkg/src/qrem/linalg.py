"""Dense complex linear algebra and quantum primitives shared by all modules.

Conventions used throughout the package:

* Qubit 0 is the most significant bit of an outcome index, so
  ``tensor_product(a, b)`` places ``a`` on the high bits and outcome
  bitstrings read left to right in qubit order.
* Operators are plain complex numpy arrays.  ``DensityMatrix`` and ``Povm``
  wrap them together with physicality checks; everything else stays
  unwrapped for speed.
* All randomness flows through an explicit ``numpy.random.Generator``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

HERMITIAN_ATOL = 1e-10
PSD_ATOL = 1e-9
TRACE_ATOL = 1e-9
COMPLETENESS_ATOL = 1e-8

PAULI_I = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2.0)
PHASE_S = np.array([[1, 0], [0, 1j]], dtype=complex)
PROJ_0 = np.array([[1, 0], [0, 0]], dtype=complex)
PROJ_1 = np.array([[0, 0], [0, 1]], dtype=complex)

PAULIS = {"I": PAULI_I, "X": PAULI_X, "Y": PAULI_Y, "Z": PAULI_Z}

# Z needs no rotation, X uses the Hadamard, and Y is fixed to H @ S^dagger.
# Any self-consistent Y convention works as long as simulation and
# reconstruction share it, which they do by importing this table.
BASIS_ROTATIONS = {
    "Z": PAULI_I,
    "X": HADAMARD,
    "Y": HADAMARD @ PHASE_S.conj().T,
}


def n_qubits_for_dim(dim: int) -> int:
    """Number of qubits for a Hilbert-space dimension, which must be 2**n."""
    n = int(dim).bit_length() - 1
    if dim <= 0 or (1 << n) != dim:
        raise ValueError(f"dimension {dim} is not a power of two")
    return n


def is_hermitian(m: np.ndarray, atol: float = HERMITIAN_ATOL) -> bool:
    return bool(np.max(np.abs(m - m.conj().T)) < atol)


def min_eigenvalue(m: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(m)[0])


def tensor_product(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product with the left operand on the most significant bits."""
    return np.kron(a, b)


def tensor_many(mats: Iterable[np.ndarray]) -> np.ndarray:
    out = np.array([[1.0 + 0j]])
    for m in mats:
        out = np.kron(out, m)
    return out


def partial_trace(m: np.ndarray, keep: Iterable[int], n_qubits: int) -> np.ndarray:
    """Trace out all qubits not in ``keep``.

    The result acts on the kept qubits in ascending index order and has the
    same trace as the input.
    """
    keep = sorted(set(keep))
    if keep and (keep[0] < 0 or keep[-1] >= n_qubits):
        raise IndexError(f"keep={keep} out of range for {n_qubits} qubits")
    if m.shape != (2**n_qubits, 2**n_qubits):
        raise ValueError("matrix dimension does not match n_qubits")
    traced = [q for q in range(n_qubits) if q not in keep]
    t = m.reshape((2,) * (2 * n_qubits))
    n_live = n_qubits
    for q in sorted(traced, reverse=True):
        t = np.trace(t, axis1=q, axis2=q + n_live)
        n_live -= 1
    d = 2 ** len(keep)
    return t.reshape(d, d)


def permute_qubits(
    m: np.ndarray, source: Sequence[int], target: Sequence[int]
) -> np.ndarray:
    """Reorder the tensor factors of an operator.

    ``source`` names the qubits of the current factors (position 0 is the
    most significant bit); the result carries the same operator with its
    factors ordered as ``target``.
    """
    if sorted(source) != sorted(target):
        raise ValueError("source and target must contain the same qubits")
    n = len(source)
    axes = [source.index(q) for q in target]
    t = m.reshape((2,) * (2 * n))
    t = t.transpose(axes + [a + n for a in axes])
    return np.ascontiguousarray(t.reshape(m.shape))


def embed_operator(
    op: np.ndarray, positions: Sequence[int], n_qubits: int
) -> np.ndarray:
    """Place ``op`` (acting on ``positions``, in that order) into an
    ``n_qubits`` operator, identity elsewhere."""
    rest = [q for q in range(n_qubits) if q not in positions]
    full = np.kron(op, np.eye(2 ** len(rest), dtype=complex))
    return permute_qubits(full, list(positions) + rest, list(range(n_qubits)))


def matrix_sqrt_psd(m: np.ndarray) -> np.ndarray:
    """Square root of a (nearly) positive semidefinite Hermitian matrix.

    Negative eigenvalues are clamped to zero first; reconstructed states can
    carry tiny negative eigenvalues from finite-precision arithmetic.
    """
    vals, vecs = np.linalg.eigh(m)
    vals = np.clip(vals, 0.0, None)
    return (vecs * np.sqrt(vals)) @ vecs.conj().T


def inverse_sqrt_psd(m: np.ndarray, floor: float = 1e-12) -> np.ndarray:
    """Inverse square root with an eigenvalue floor for numerical safety."""
    vals, vecs = np.linalg.eigh(m)
    vals = np.clip(vals, floor, None)
    return (vecs / np.sqrt(vals)) @ vecs.conj().T


def trace_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Trace distance (1/2)||a - b||_1 for Hermitian operators."""
    return float(0.5 * np.sum(np.abs(np.linalg.eigvalsh(a - b))))


def haar_random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed unitary via QR of a complex Ginibre matrix.

    The R diagonal phases are divided out so the distribution is exactly
    uniform over the unitary group.
    """
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim)))
    z /= np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    return q * (d / np.abs(d))


@dataclass(frozen=True)
class DensityMatrix:
    """Quantum state on ``n_qubits`` qubits: unit-trace, Hermitian, PSD."""

    matrix: np.ndarray
    n_qubits: int

    def __post_init__(self):
        d = 2**self.n_qubits
        if self.matrix.shape != (d, d):
            raise ValueError("matrix shape does not match n_qubits")
        if abs(np.trace(self.matrix) - 1.0) > TRACE_ATOL:
            raise ValueError(f"trace {np.trace(self.matrix)} not 1")
        if not is_hermitian(self.matrix):
            raise ValueError("matrix not Hermitian")
        if min_eigenvalue(self.matrix) < -PSD_ATOL:
            raise ValueError("matrix has a negative eigenvalue")

    @property
    def dim(self) -> int:
        return 2**self.n_qubits

    def purity(self) -> float:
        return float(np.real(np.trace(self.matrix @ self.matrix)))

    @classmethod
    def from_vector(cls, vec: np.ndarray) -> "DensityMatrix":
        vec = np.asarray(vec, dtype=complex).ravel()
        vec = vec / np.linalg.norm(vec)
        return cls(np.outer(vec, vec.conj()), n_qubits_for_dim(len(vec)))


def haar_random_state(n_qubits: int, rng: np.random.Generator) -> DensityMatrix:
    """Pure state U|0...0><0...0|U^dagger with Haar-distributed U."""
    if n_qubits < 1:
        raise ValueError("n_qubits must be at least 1")
    u = haar_random_unitary(2**n_qubits, rng)
    vec = u[:, 0].copy()
    return DensityMatrix(np.outer(vec, vec.conj()), n_qubits)


def fidelity(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    """Uhlmann fidelity in [0, 1].

    When ``rho`` is pure the general expression collapses to Tr(rho sigma),
    which is used as a fast path.
    """
    if rho.n_qubits != sigma.n_qubits:
        raise ValueError("states have different dimensions")
    a, b = rho.matrix, sigma.matrix
    if rho.purity() > 1.0 - 1e-8:
        return float(np.clip(np.real(np.trace(a @ b)), 0.0, 1.0))
    sqrt_a = matrix_sqrt_psd(a)
    inner = matrix_sqrt_psd(sqrt_a @ b @ sqrt_a)
    return float(np.clip(np.real(np.trace(inner)) ** 2, 0.0, 1.0))


def basis_rotation(setting: Sequence[str]) -> np.ndarray:
    """Unitary realizing a per-qubit Pauli-basis measurement.

    Measuring the computational-basis POVM conjugated as U^dagger M U is
    equivalent to measuring the requested bases on the unrotated state.
    """
    mats = []
    for label in setting:
        if label not in BASIS_ROTATIONS:
            raise ValueError(f"unknown basis label {label!r}")
        mats.append(BASIS_ROTATIONS[label])
    return tensor_many(mats)


def outcome_labels(n_qubits: int) -> tuple[str, ...]:
    return tuple(format(i, f"0{n_qubits}b") for i in range(2**n_qubits))


@dataclass(frozen=True)
class Povm:
    """Positive operator-valued measure: PSD Hermitian effects summing to 1."""

    effects: tuple
    n_qubits: int
    outcome_labels: tuple = ()

    def __post_init__(self):
        effects = tuple(np.asarray(e, dtype=complex) for e in self.effects)
        object.__setattr__(self, "effects", effects)
        d = 2**self.n_qubits
        labels = self.outcome_labels or outcome_labels(self.n_qubits)
        if len(labels) != len(effects):
            raise ValueError("one outcome label per effect required")
        object.__setattr__(self, "outcome_labels", tuple(labels))
        total = np.zeros((d, d), dtype=complex)
        for e in effects:
            if e.shape != (d, d):
                raise ValueError("effect dimension mismatch")
            if not is_hermitian(e):
                raise ValueError("effect not Hermitian")
            if min_eigenvalue(e) < -PSD_ATOL:
                raise ValueError("effect not positive semidefinite")
            total += e
        if np.max(np.abs(total - np.eye(d))) > COMPLETENESS_ATOL:
            raise ValueError("effects do not sum to the identity")

    @property
    def dim(self) -> int:
        return 2**self.n_qubits

    @property
    def n_outcomes(self) -> int:
        return len(self.effects)

    def stacked(self) -> np.ndarray:
        return np.stack(self.effects)

    def rotated(self, unitary: np.ndarray) -> "Povm":
        """POVM with every effect conjugated as U^dagger M U."""
        ud = unitary.conj().T
        return Povm(
            tuple(ud @ e @ unitary for e in self.effects),
            self.n_qubits,
            self.outcome_labels,
        )

    @classmethod
    def ideal(cls, n_qubits: int) -> "Povm":
        """Ideal computational-basis projectors."""
        d = 2**n_qubits
        eye = np.eye(d, dtype=complex)
        effects = tuple(np.outer(eye[:, i], eye[:, i].conj()) for i in range(d))
        return cls(effects, n_qubits)


def tensor_povms(
    blocks: Sequence[tuple[Sequence[int], Povm]],
    target_order: Sequence[int] | None = None,
) -> Povm:
    """Tensor per-block POVMs into one POVM on the (sorted) union of qubits.

    ``blocks`` pairs each POVM with the qubits it acts on; blocks need not be
    contiguous or sorted relative to each other.  Outcome bit ``j`` of the
    result refers to ``target_order[j]``.
    """
    concat: list[int] = []
    for qubits, _ in blocks:
        concat.extend(qubits)
    if len(set(concat)) != len(concat):
        raise ValueError("blocks overlap")
    target = list(target_order) if target_order is not None else sorted(concat)
    if sorted(target) != sorted(concat):
        raise ValueError("target_order must cover exactly the block qubits")
    m = len(target)
    effects = []
    for o in range(2**m):
        bits = format(o, f"0{m}b")
        eff = np.array([[1.0 + 0j]])
        for qubits, povm in blocks:
            idx = int("".join(bits[target.index(q)] for q in qubits), 2)
            eff = np.kron(eff, povm.effects[idx])
        effects.append(permute_qubits(eff, concat, target))
    return Povm(tuple(effects), m)
