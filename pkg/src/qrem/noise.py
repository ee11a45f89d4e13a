"""Noisy readout construction and scalable measurement sampling.

Noise acts on the computational-basis readout only; basis rotations are
ideal and folded into the effects analytically.  Sampling factorizes the
joint outcome distribution over connected components of the graph joining
the state-chunk partition with the noise-block partition, so systems far
beyond dense-simulation sizes can be measured as long as every component
stays small.
"""

from __future__ import annotations

import itertools
import json
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.linalg import expm

from .calibration import (
    MeasurementRecord,
    load_povm,
    product_calibration_state,
)
from .linalg import (
    PAULI_X,
    DensityMatrix,
    Povm,
    basis_rotation,
    embed_operator,
    outcome_labels,
    tensor_povms,
)

DENSE_COMPONENT_CAP = 8

ISWAP = np.array(
    [[1, 0, 0, 0], [0, 0, 1j, 0], [0, 1j, 0, 0], [0, 0, 0, 1]], dtype=complex
)

ISWAP_PROBABILISTIC = "iswap_probabilistic"
COHERENT_XX = "coherent_xx"
DEPOLARIZING = "depolarizing"
EXPLICIT_POVM = "explicit_povm"


@dataclass(frozen=True)
class NoiseChannel:
    """A readout noise channel acting on the listed support qubits."""

    kind: str
    support: tuple
    params: dict

    def __post_init__(self):
        object.__setattr__(self, "support", tuple(int(q) for q in self.support))
        if self.kind == ISWAP_PROBABILISTIC:
            if len(self.support) != 2:
                raise ValueError("iswap channel needs exactly two qubits")
            k = self.params["k"]
            if not 0.0 <= k <= 1.0:
                raise ValueError("iswap strength k must lie in [0, 1]")
        elif self.kind == COHERENT_XX:
            if len(self.support) < 1:
                raise ValueError("coherent channel needs at least one qubit")
            float(self.params["theta"])
        elif self.kind == DEPOLARIZING:
            p = self.params["p"]
            if not 0.0 <= p <= 1.0:
                raise ValueError("depolarizing strength p must lie in [0, 1]")
        elif self.kind == EXPLICIT_POVM:
            if "povm" not in self.params and "povm_file" not in self.params:
                raise ValueError("explicit_povm needs a povm or povm_file")
        else:
            raise ValueError(f"unknown channel kind {self.kind!r}")


def iswap_channel(q0: int, q1: int, strength: float) -> NoiseChannel:
    return NoiseChannel(ISWAP_PROBABILISTIC, (q0, q1), {"k": float(strength)})


def coherent_xx_channel(support: Sequence[int], theta: float) -> NoiseChannel:
    return NoiseChannel(COHERENT_XX, tuple(support), {"theta": float(theta)})


def depolarizing_channel(p: float) -> NoiseChannel:
    return NoiseChannel(DEPOLARIZING, (), {"p": float(p)})


def explicit_povm_channel(support: Sequence[int], povm: Povm) -> NoiseChannel:
    return NoiseChannel(EXPLICIT_POVM, tuple(support), {"povm": povm})


def coherent_xx_unitary(n_qubits: int, theta: float) -> np.ndarray:
    """exp(-i theta/2 X) for one qubit, else the XX chain over neighbors."""
    if n_qubits == 1:
        gen = PAULI_X
    else:
        gen = np.zeros((2**n_qubits, 2**n_qubits), dtype=complex)
        for j in range(n_qubits - 1):
            gen += embed_operator(np.kron(PAULI_X, PAULI_X), (j, j + 1), n_qubits)
    return expm(-0.5j * theta * gen)


def apply_channel_to_povm(
    povm: Povm, channel: NoiseChannel, qubits: Sequence[int] | None = None
) -> Povm:
    """Transform every effect of a POVM by the channel.

    ``qubits`` names the POVM's qubits so the channel support can be located
    (defaults to 0..n-1).  Unital channels preserve completeness, so the
    output is again a valid POVM.
    """
    qubits = tuple(qubits) if qubits is not None else tuple(range(povm.n_qubits))
    if not set(channel.support) <= set(qubits):
        raise ValueError(
            f"channel support {channel.support} not within POVM qubits {qubits}"
        )
    positions = tuple(qubits.index(q) for q in channel.support)
    if channel.kind == ISWAP_PROBABILISTIC:
        k = channel.params["k"]
        u = embed_operator(ISWAP, positions, povm.n_qubits)
        effects = tuple(
            (1.0 - k) * e + k * (u @ e @ u.conj().T) for e in povm.effects
        )
    elif channel.kind == COHERENT_XX:
        r = coherent_xx_unitary(len(positions), channel.params["theta"])
        u = embed_operator(r, positions, povm.n_qubits)
        effects = tuple(u @ e @ u.conj().T for e in povm.effects)
    else:
        raise ValueError(f"channel kind {channel.kind!r} does not act on POVMs")
    return Povm(effects, povm.n_qubits, povm.outcome_labels)


def apply_depolarizing(state: DensityMatrix, p: float) -> DensityMatrix:
    """Convex mix with the maximally mixed state on the full dimension."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("depolarizing strength p must lie in [0, 1]")
    d = state.dim
    mixed = (1.0 - p) * state.matrix + p * np.eye(d) / d
    return DensityMatrix(mixed, state.n_qubits)


@dataclass(frozen=True)
class SystemPovmSpec:
    """Ground-truth readout: a partition of qubits into POVM blocks."""

    n_qubits: int
    blocks: tuple  # of (qubit tuple, Povm)

    def __post_init__(self):
        ordered = tuple(
            sorted(
                ((tuple(q), p) for q, p in self.blocks), key=lambda bp: bp[0][0]
            )
        )
        object.__setattr__(self, "blocks", ordered)
        seen: list[int] = []
        for qubits, povm in ordered:
            if povm.n_qubits != len(qubits):
                raise ValueError("block POVM size does not match its qubits")
            seen.extend(qubits)
        if sorted(seen) != list(range(self.n_qubits)):
            raise ValueError("blocks must partition the qubit range")

    def block_of(self, qubit: int) -> tuple:
        for qubits, _ in self.blocks:
            if qubit in qubits:
                return qubits
        raise KeyError(qubit)


def build_system_povm(
    n_qubits: int,
    channels: Sequence[NoiseChannel],
    blocks: Sequence[Sequence[int]] | None = None,
) -> SystemPovmSpec:
    """Per-block computational-basis POVMs from ideal projectors and channels.

    When ``blocks`` is omitted, channel supports are merged into minimal
    blocks and remaining qubits become ideal singletons.  Channels are
    applied in list order within their block; an explicit POVM replaces the
    block readout outright and must come first for its block.
    """
    for ch in channels:
        if ch.kind == DEPOLARIZING:
            raise ValueError("depolarizing noise acts on states, not readout")
    if blocks is None:
        parent = list(range(n_qubits))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for ch in channels:
            for q in ch.support[1:]:
                parent[find(q)] = find(ch.support[0])
        groups: dict[int, list[int]] = {}
        for q in range(n_qubits):
            groups.setdefault(find(q), []).append(q)
        blocks = [tuple(sorted(g)) for g in groups.values()]
    blocks = [tuple(sorted(b)) for b in blocks]
    by_block: dict[tuple, list[NoiseChannel]] = {b: [] for b in blocks}
    for ch in channels:
        homes = [b for b in blocks if set(ch.support) <= set(b)]
        if not homes:
            raise ValueError(
                f"channel support {ch.support} straddles the declared blocks"
            )
        by_block[homes[0]].append(ch)
    assembled = []
    for b in blocks:
        povm = Povm.ideal(len(b))
        for ch in by_block[b]:
            if ch.kind == EXPLICIT_POVM:
                povm = ch.params.get("povm") or load_povm(ch.params["povm_file"])
                if povm.n_qubits != len(b):
                    raise ValueError("explicit POVM size does not match block")
            else:
                povm = apply_channel_to_povm(povm, ch, qubits=b)
        assembled.append((b, povm))
    return SystemPovmSpec(n_qubits, tuple(assembled))


def spawn_rng(seed: int, *key: int) -> np.random.Generator:
    """Deterministic per-task stream: seed plus an integer task key."""
    ss = np.random.SeedSequence(entropy=seed, spawn_key=tuple(int(k) for k in key))
    return np.random.default_rng(ss)


class MeasurementSimulator:
    """Samples measurement records against a block-structured noisy readout.

    ``chunk_sizes`` describes the tensor-product structure of the prepared
    states: chunk i covers the next ``chunk_sizes[i]`` consecutive qubits.
    The outcome distribution factorizes over connected components of the
    chunk/block overlap graph; each component is capped at
    ``DENSE_COMPONENT_CAP`` qubits of dense simulation.
    """

    def __init__(self, spec: SystemPovmSpec, chunk_sizes: Sequence[int]):
        if sum(chunk_sizes) != spec.n_qubits:
            raise ValueError("chunks must cover all qubits")
        self.spec = spec
        self.chunk_sizes = tuple(chunk_sizes)
        starts = np.concatenate([[0], np.cumsum(chunk_sizes)])
        self.chunk_qubits = tuple(
            tuple(range(starts[i], starts[i + 1])) for i in range(len(chunk_sizes))
        )
        self.components = self._components()
        self._effect_cache: dict[tuple, np.ndarray] = {}

    def _components(self):
        parent = list(range(self.spec.n_qubits))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for group in itertools.chain(
            self.chunk_qubits, (b for b, _ in self.spec.blocks)
        ):
            for q in group[1:]:
                parent[find(q)] = find(group[0])
        comp_map: dict[int, list[int]] = {}
        for q in range(self.spec.n_qubits):
            comp_map.setdefault(find(q), []).append(q)
        comps = [tuple(sorted(c)) for c in comp_map.values()]
        comps.sort(key=lambda c: c[0])
        for c in comps:
            if len(c) > DENSE_COMPONENT_CAP:
                raise ValueError(
                    f"component {c} exceeds the dense cap of "
                    f"{DENSE_COMPONENT_CAP} qubits; chunk/block overlap too large"
                )
        return tuple(comps)

    def _component_effects(self, comp: tuple) -> np.ndarray:
        if comp not in self._effect_cache:
            members = [
                (q, p) for q, p in self.spec.blocks if set(q) <= set(comp)
            ]
            joint = tensor_povms(members, target_order=comp)
            self._effect_cache[comp] = joint.stacked()
        return self._effect_cache[comp]

    def _component_state(self, comp: tuple, chunks: Sequence[DensityMatrix]):
        mats = [
            chunks[i].matrix
            for i, cq in enumerate(self.chunk_qubits)
            if set(cq) <= set(comp)
        ]
        out = mats[0]
        for m in mats[1:]:
            out = np.kron(out, m)
        return out

    def distribution(
        self,
        chunks: Sequence[DensityMatrix],
        setting: Sequence[str],
        components: Sequence[tuple] | None = None,
    ) -> list[tuple[tuple, np.ndarray]]:
        """Exact per-component Born probabilities for a Pauli setting."""
        if len(setting) != self.spec.n_qubits:
            raise ValueError("one basis label per qubit required")
        self._check_chunks(chunks)
        out = []
        for comp in components if components is not None else self.components:
            effects = self._component_effects(comp)
            rho = self._component_state(comp, chunks)
            u = basis_rotation([setting[q] for q in comp])
            rho_rot = u @ rho @ u.conj().T
            p = np.real(np.einsum("ab,oba->o", rho_rot, effects))
            total = p.sum()
            if abs(total - 1.0) > 1e-9:
                raise ArithmeticError(f"probabilities sum to {total}")
            np.clip(p, 0.0, None, out=p)
            out.append((comp, p / p.sum()))
        return out

    def _check_chunks(self, chunks: Sequence[DensityMatrix]) -> None:
        if tuple(c.n_qubits for c in chunks) != self.chunk_sizes:
            raise ValueError("chunk sizes do not match the simulator layout")

    def _calibration_distribution(
        self, labels: Sequence[int], components: Sequence[tuple] | None = None
    ) -> list[tuple[tuple, np.ndarray]]:
        out = []
        blocks = (
            self.spec.blocks
            if components is None
            else [bp for bp in self.spec.blocks if bp[0] in components]
        )
        for qubits, povm in blocks:
            rho = product_calibration_state([labels[q] for q in qubits])
            p = np.real(np.einsum("ab,oba->o", rho, povm.stacked()))
            np.clip(p, 0.0, None, out=p)
            out.append((qubits, p / p.sum()))
        return out

    def _relevant(self, parts: Sequence[tuple], record_qubits) -> list[tuple]:
        if record_qubits is None:
            return list(parts)
        wanted = set(record_qubits)
        return [c for c in parts if wanted & set(c)]

    def _assemble(
        self,
        dists: list[tuple[tuple, np.ndarray]],
        shots: int,
        rng: np.random.Generator,
        record_qubits,
    ) -> dict:
        record_qubits = (
            tuple(record_qubits)
            if record_qubits is not None
            else tuple(range(self.spec.n_qubits))
        )
        pos = {q: i for i, q in enumerate(record_qubits)}
        chars = np.full((shots, len(record_qubits)), b"0", dtype="S1")
        for comp, p in dists:
            idx = rng.choice(len(p), size=shots, p=p)
            for bit, q in enumerate(comp):
                if q in pos:
                    shift = len(comp) - 1 - bit
                    chars[((idx >> shift) & 1).astype(bool), pos[q]] = b"1"
        keys = chars.view(f"S{len(record_qubits)}").ravel()
        return {k: float(v) for k, v in sorted(Counter(keys).items())}

    def sample(
        self,
        chunks: Sequence[DensityMatrix],
        setting: Sequence[str],
        shots: int,
        rng: np.random.Generator,
        record_qubits: Sequence[int] | None = None,
    ) -> MeasurementRecord:
        """Multinomially sampled record for one Pauli basis setting."""
        comps = self._relevant(self.components, record_qubits)
        dists = self.distribution(chunks, setting, components=comps)
        counts_b = self._assemble(dists, shots, rng, record_qubits)
        qubits = (
            tuple(record_qubits)
            if record_qubits is not None
            else tuple(range(self.spec.n_qubits))
        )
        counts = {k.decode(): v for k, v in counts_b.items()}
        return MeasurementRecord(
            tuple(setting[q] for q in qubits), qubits, counts
        )

    def sample_calibration(
        self,
        labels: Sequence[int],
        shots: int,
        rng: np.random.Generator,
        record_qubits: Sequence[int] | None = None,
    ) -> MeasurementRecord:
        """Sampled record for one calibration-label setting.

        Calibration states are products, so every noise block samples
        independently regardless of the chunk structure.
        """
        blocks = self._relevant([b for b, _ in self.spec.blocks], record_qubits)
        dists = self._calibration_distribution(labels, components=blocks)
        counts_b = self._assemble(dists, shots, rng, record_qubits)
        qubits = (
            tuple(record_qubits)
            if record_qubits is not None
            else tuple(range(self.spec.n_qubits))
        )
        counts = {k.decode(): v for k, v in counts_b.items()}
        return MeasurementRecord(
            tuple(labels[q] for q in qubits), qubits, counts
        )

    def exact_record(
        self,
        chunks: Sequence[DensityMatrix],
        setting: Sequence[str],
        record_qubits: Sequence[int] | None = None,
    ) -> MeasurementRecord:
        """Record holding exact Born probabilities instead of counts."""
        qubits = (
            tuple(record_qubits)
            if record_qubits is not None
            else tuple(range(self.spec.n_qubits))
        )
        comps = self._relevant(self.components, record_qubits)
        dists = self.distribution(chunks, setting, components=comps)
        pos = {q: i for i, q in enumerate(qubits)}
        combined: dict[str, float] = {"0" * len(qubits): 1.0}
        for comp, p in dists:
            new: dict[str, float] = {}
            for base, w in combined.items():
                for o, po in enumerate(p):
                    if po == 0.0:
                        continue
                    s = list(base)
                    for bit, q in enumerate(comp):
                        if q in pos:
                            s[pos[q]] = format(o, f"0{len(comp)}b")[bit]
                    key = "".join(s)
                    new[key] = new.get(key, 0.0) + w * po
            combined = new
        return MeasurementRecord(
            tuple(setting[q] for q in qubits), qubits, combined
        )


def outcome_distribution(
    state_chunks: Sequence[DensityMatrix],
    spec: SystemPovmSpec,
    setting: Sequence[str],
) -> list[tuple[tuple, np.ndarray]]:
    sim = MeasurementSimulator(spec, [c.n_qubits for c in state_chunks])
    return sim.distribution(state_chunks, setting)


def sample_outcomes(
    state_chunks: Sequence[DensityMatrix],
    spec: SystemPovmSpec,
    setting: Sequence[str],
    shots: int,
    rng: np.random.Generator,
    record_qubits: Sequence[int] | None = None,
) -> MeasurementRecord:
    sim = MeasurementSimulator(spec, [c.n_qubits for c in state_chunks])
    return sim.sample(state_chunks, setting, shots, rng, record_qubits)


def save_noise_spec(
    path, n_qubits: int, channels: Sequence[NoiseChannel], blocks=None
) -> None:
    doc = {
        "n_qubits": n_qubits,
        "blocks": [list(b) for b in blocks] if blocks is not None else None,
        "channels": [
            {
                "kind": ch.kind,
                "support": list(ch.support),
                "params": {
                    k: v for k, v in ch.params.items() if k != "povm"
                },
            }
            for ch in channels
        ],
    }
    with open(path, "w", encoding="ascii") as fh:
        json.dump(doc, fh, indent=1)


def load_noise_spec(path):
    """Returns (n_qubits, channels, blocks) ready for build_system_povm."""
    with open(path, "r", encoding="ascii") as fh:
        doc = json.load(fh)
    channels = [
        NoiseChannel(c["kind"], tuple(c["support"]), dict(c["params"]))
        for c in doc["channels"]
    ]
    blocks = doc.get("blocks")
    if blocks is not None:
        blocks = [tuple(b) for b in blocks]
    return doc["n_qubits"], channels, blocks
