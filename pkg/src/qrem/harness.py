"""Config-driven orchestration: characterize, benchmark, emit results.

The pipeline mirrors the two protocol stages.  Characterization turns a
hash-family schedule into sampled calibration records, reconstructs every
pair POVM, computes correlation coefficients, clusters, and reconstructs
per-cluster POVMs.  The benchmark then draws random target states and qubit
pairs, samples tomography records once per (state, pair), and feeds the
identical records to every protocol variant.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from joblib import Parallel, delayed

from .calibration import (
    CalibrationSchedule,
    MeasurementRecord,
    build_schedule,
    reconstruct_povm_from_records,
    save_records,
)
from .correlations import (
    Clustering,
    CorrelationMatrix,
    cluster,
    correlation_matrix,
    save_clustering,
    save_correlation_csv,
)
from .hashfamily import HashFamily, bundled_phf_15_16_3, load_phf, phf_2local, save_phf
from .linalg import DensityMatrix, Povm, fidelity, haar_random_state, partial_trace
from .mitigation import (
    VARIANT_NONE,
    VARIANTS,
    connected_cluster,
    direct_expectation,
    pauli_expectation,
    pauli_settings,
    reduce_to_pair,
    variant_state,
)
from .noise import (
    MeasurementSimulator,
    NoiseChannel,
    SystemPovmSpec,
    apply_depolarizing,
    build_system_povm,
    coherent_xx_channel,
    iswap_channel,
    load_noise_spec,
    save_noise_spec,
    spawn_rng,
)

# Integer salts for deterministic per-task random streams.
_SALT_CALIBRATION = 1
_SALT_FRESH_CALIBRATION = 2
_SALT_STATES = 3
_SALT_PAIRS = 4
_SALT_SAMPLING = 5
_SALT_NOISE = 6

TWO_QUBIT_OBSERVABLES = tuple(
    (a, b) for a in "XYZ" for b in "XYZ"
)  # XX, XY, XZ, YX, ..., ZZ

_FLOAT_FMT = "%.12g"


def mse(estimates: Sequence[float], ideals: Sequence[float]) -> float:
    """Mean squared deviation between estimates and ideal values."""
    est = np.asarray(estimates, dtype=float)
    ide = np.asarray(ideals, dtype=float)
    if est.shape != ide.shape or est.ndim != 1 or est.size == 0:
        raise ValueError("estimates and ideals must be equal-length vectors")
    return float(np.mean((est - ide) ** 2))


@dataclass
class ExperimentConfig:
    """Everything needed to reproduce one simulation end to end."""

    n_qubits: int
    channels: list = field(default_factory=list)
    blocks: list | None = None
    chunk_size: int = 4
    phf: str = "auto"  # "auto" (2-local), "bundled" (3-local table), or a path
    n_corr: int = 3
    linkage: str = "complete"
    threshold: object = "auto"
    n_states: int = 3
    n_pairs: int = 8
    shots_calibration_total: int = 100_000
    shots_per_observable: int = 10_000
    repetitions: int = 3
    seed: int = 0
    variants: tuple = (VARIANT_NONE, "two_point", "correlated")
    target_state: str = "pure"  # or "depolarized"
    depolarizing_range: tuple = (0.03, 0.07)

    def __post_init__(self):
        if self.n_qubits % self.chunk_size:
            raise ValueError("n_qubits must be divisible by chunk_size")
        max_pairs = self.n_qubits * (self.n_qubits - 1) // 2
        if not 1 <= self.n_pairs <= max_pairs:
            raise ValueError(f"n_pairs must lie in [1, {max_pairs}]")
        for v in self.variants:
            if v not in VARIANTS:
                raise ValueError(f"unknown variant {v!r}")
        if self.target_state not in ("pure", "depolarized"):
            raise ValueError("target_state must be 'pure' or 'depolarized'")
        self.variants = tuple(self.variants)

    def to_dict(self) -> dict:
        doc = asdict(self)
        doc["channels"] = [
            {"kind": c.kind, "support": list(c.support),
             "params": {k: v for k, v in c.params.items() if k != "povm"}}
            for c in self.channels
        ]
        doc["blocks"] = (
            [list(b) for b in self.blocks] if self.blocks is not None else None
        )
        doc["variants"] = list(self.variants)
        doc["depolarizing_range"] = list(self.depolarizing_range)
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        doc = dict(doc)
        noise_file = doc.pop("noise_spec_file", None)
        if noise_file is not None:
            n, channels, blocks = load_noise_spec(noise_file)
            if n != doc["n_qubits"]:
                raise ValueError("noise spec qubit count does not match config")
            doc["channels"], doc["blocks"] = channels, blocks
        else:
            doc["channels"] = [
                NoiseChannel(c["kind"], tuple(c["support"]), dict(c["params"]))
                for c in doc.get("channels", [])
            ]
            if doc.get("blocks") is not None:
                doc["blocks"] = [tuple(b) for b in doc["blocks"]]
        if "variants" in doc:
            doc["variants"] = tuple(doc["variants"])
        if "depolarizing_range" in doc:
            doc["depolarizing_range"] = tuple(doc["depolarizing_range"])
        return cls(**doc)

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        with open(path, "r", encoding="ascii") as fh:
            return cls.from_dict(json.load(fh))


def resolve_phf(config: ExperimentConfig) -> HashFamily:
    if config.phf == "auto":
        return phf_2local(config.n_qubits)
    if config.phf == "bundled":
        fam = bundled_phf_15_16_3()
        if config.n_qubits > fam.n_inputs:
            raise ValueError("bundled hash family covers at most 16 qubits")
        if config.n_qubits < fam.n_inputs:
            # Column restriction preserves perfectness for the kept inputs.
            fam = HashFamily(fam.table[:, : config.n_qubits], fam.n_values, fam.t)
        return fam
    return load_phf(config.phf)


@dataclass
class Characterization:
    """Output of the noise-structure stage, reused by every variant."""

    family: HashFamily
    schedule: CalibrationSchedule
    records: list
    single_povms: dict
    pair_povms: dict
    correlation: CorrelationMatrix
    clustering: Clustering
    cluster_povms: dict


def system_spec_for(config: ExperimentConfig) -> SystemPovmSpec:
    return build_system_povm(config.n_qubits, config.channels, config.blocks)


def run_characterization(
    config: ExperimentConfig,
    system_spec: SystemPovmSpec | None = None,
    n_jobs: int = 1,
) -> Characterization:
    """Schedule, sample, reconstruct pair POVMs, cluster, POVM per cluster.

    Pair and single-qubit POVMs come from marginalized schedule records.
    Cluster POVMs reuse those marginals whenever the hash-family locality
    covers the cluster size; larger clusters are calibrated with a fresh
    informationally complete run restricted to the cluster.
    """
    spec = system_spec if system_spec is not None else system_spec_for(config)
    family = resolve_phf(config)
    schedule = build_schedule(family, config.shots_calibration_total)
    calib_sim = MeasurementSimulator(spec, (1,) * config.n_qubits)
    records = [
        calib_sim.sample_calibration(
            labels, schedule.shots_per_setting, spawn_rng(config.seed, _SALT_CALIBRATION, i)
        )
        for i, labels in enumerate(schedule.settings)
    ]
    single_povms = {
        q: reconstruct_povm_from_records(records, (q,))
        for q in range(config.n_qubits)
    }
    all_pairs = list(itertools.combinations(range(config.n_qubits), 2))
    if n_jobs > 1:
        reconstructed = Parallel(n_jobs=n_jobs, prefer="threads")(
            delayed(reconstruct_povm_from_records)(records, pair)
            for pair in all_pairs
        )
    else:
        reconstructed = [
            reconstruct_povm_from_records(records, pair) for pair in all_pairs
        ]
    pair_povms = dict(zip(all_pairs, reconstructed))
    corr = correlation_matrix(pair_povms, config.n_qubits)
    clustering = cluster(
        corr,
        config.n_corr,
        threshold=config.threshold,
        linkage=config.linkage,
        n_calib=schedule.shots_per_setting,
    )
    cluster_povms = {}
    for c in clustering.clusters:
        if len(c) == 1:
            cluster_povms[c] = single_povms[c[0]]
        elif len(c) == 2 and (c[0], c[1]) in pair_povms:
            cluster_povms[c] = pair_povms[(c[0], c[1])]
        elif len(c) <= family.t:
            cluster_povms[c] = reconstruct_povm_from_records(records, c)
        else:
            cluster_povms[c] = _fresh_cluster_povm(
                calib_sim, c, schedule.shots_per_setting, config
            )
    return Characterization(
        family,
        schedule,
        records,
        single_povms,
        pair_povms,
        corr,
        clustering,
        cluster_povms,
    )


def _fresh_cluster_povm(
    calib_sim: MeasurementSimulator,
    cluster_qubits: tuple,
    shots_per_setting: int,
    config: ExperimentConfig,
) -> Povm:
    """Dedicated informationally complete calibration of one noise cluster."""
    fresh = []
    for idx, combo in enumerate(
        itertools.product((1, 2, 3, 4), repeat=len(cluster_qubits))
    ):
        labels = [1] * config.n_qubits
        for q, lab in zip(cluster_qubits, combo):
            labels[q] = lab
        rng = spawn_rng(config.seed, _SALT_FRESH_CALIBRATION, cluster_qubits[0], idx)
        fresh.append(
            calib_sim.sample_calibration(
                labels, shots_per_setting, rng, record_qubits=cluster_qubits
            )
        )
    return reconstruct_povm_from_records(fresh, cluster_qubits)


@dataclass
class ResultRow:
    repetition: int
    state_idx: int
    pair: tuple
    variant: str
    estimates: tuple
    ideals: tuple
    mse: float
    infidelity: float | None


@dataclass
class ResultTable:
    """Benchmark results keyed by (repetition, state, pair, variant)."""

    config_doc: dict
    observables: tuple
    rows: list

    def variants(self) -> list[str]:
        return list(dict.fromkeys(r.variant for r in self.rows))

    def mean_mse(self, variant: str) -> float:
        vals = [r.mse for r in self.rows if r.variant == variant]
        return float(np.mean(vals))

    def per_repetition_mse(self, variant: str) -> np.ndarray:
        reps = sorted({r.repetition for r in self.rows})
        return np.array(
            [
                np.mean([r.mse for r in self.rows if r.variant == variant and r.repetition == rep])
                for rep in reps
            ]
        )

    def mean_infidelity(self, variant: str) -> float | None:
        vals = [
            r.infidelity
            for r in self.rows
            if r.variant == variant and r.infidelity is not None
        ]
        return float(np.mean(vals)) if vals else None

    def summary(self) -> list[dict]:
        out = []
        for variant in self.variants():
            per_rep = self.per_repetition_mse(variant)
            infid = self.mean_infidelity(variant)
            out.append(
                {
                    "variant": variant,
                    "mean_mse": float(per_rep.mean()),
                    "std_mse": float(per_rep.std(ddof=0)),
                    "mean_infidelity": infid,
                }
            )
        return out


def _split_shots(total: int, parts: int) -> list[int]:
    base, rem = divmod(total, parts)
    return [base + 1] * rem + [base] * (parts - rem)


def draw_states(config: ExperimentConfig) -> list[list[DensityMatrix]]:
    """Target states: tensor products of Haar-random chunk states, fixed by
    the config seed and shared by every repetition."""
    rng = spawn_rng(config.seed, _SALT_STATES)
    n_chunks = config.n_qubits // config.chunk_size
    states = []
    for _ in range(config.n_states):
        chunks = [haar_random_state(config.chunk_size, rng) for _ in range(n_chunks)]
        if config.target_state == "depolarized":
            lo, hi = config.depolarizing_range
            strengths = rng.uniform(lo, hi, size=n_chunks)
            chunks = [apply_depolarizing(c, p) for c, p in zip(chunks, strengths)]
        states.append(chunks)
    return states


def draw_pairs(config: ExperimentConfig) -> list[tuple]:
    rng = spawn_rng(config.seed, _SALT_PAIRS)
    all_pairs = list(itertools.combinations(range(config.n_qubits), 2))
    picked = rng.choice(len(all_pairs), size=config.n_pairs, replace=False)
    return [all_pairs[i] for i in sorted(picked)]


def ideal_pair_state(
    chunks: Sequence[DensityMatrix], pair: tuple, chunk_size: int
) -> DensityMatrix:
    qa, qb = sorted(pair)
    ca, cb = qa // chunk_size, qb // chunk_size
    if ca == cb:
        reduced = partial_trace(
            chunks[ca].matrix, (qa % chunk_size, qb % chunk_size), chunk_size
        )
        return DensityMatrix(reduced, 2)
    ma = partial_trace(chunks[ca].matrix, (qa % chunk_size,), chunk_size)
    mb = partial_trace(chunks[cb].matrix, (qb % chunk_size,), chunk_size)
    return DensityMatrix(np.kron(ma, mb), 2)


def run_mitigation_benchmark(
    config: ExperimentConfig,
    characterization: Characterization,
    system_spec: SystemPovmSpec | None = None,
    n_jobs: int = 1,
) -> ResultTable:
    """Benchmark every configured variant on identical measurement records.

    Per (state, pair), tomography records covering all Pauli settings of the
    pair's connected noise cluster are sampled once; the states and pairs
    are fixed across repetitions and only the sampling randomness is fresh.
    """
    spec = system_spec if system_spec is not None else system_spec_for(config)
    n_chunks = config.n_qubits // config.chunk_size
    sim = MeasurementSimulator(spec, (config.chunk_size,) * n_chunks)
    states = draw_states(config)
    pairs = draw_pairs(config)
    clustering = characterization.clustering
    ccs = [
        connected_cluster(pair, clustering, characterization.cluster_povms)
        for pair in pairs
    ]

    def task(rep: int, si: int, pi: int) -> list[ResultRow]:
        rng = spawn_rng(config.seed, _SALT_SAMPLING, rep, si, pi)
        chunks = states[si]
        pair = pairs[pi]
        cc = ccs[pi]
        settings = pauli_settings(len(cc.qubits))
        shots = _split_shots(config.shots_per_observable, len(settings))
        records = []
        for setting, n_shots in zip(settings, shots):
            full = ["Z"] * config.n_qubits
            for q, lab in zip(cc.qubits, setting):
                full[q] = lab
            records.append(
                sim.sample(chunks, full, n_shots, rng, record_qubits=cc.qubits)
            )
        ideal_state = ideal_pair_state(chunks, pair, config.chunk_size)
        ideals = tuple(
            pauli_expectation(ideal_state.matrix, obs)
            for obs in TWO_QUBIT_OBSERVABLES
        )
        rows = []
        cache: dict = {}
        for variant in config.variants:
            if variant == VARIANT_NONE:
                estimates = tuple(
                    direct_expectation(records, pair, obs)
                    for obs in TWO_QUBIT_OBSERVABLES
                )
                infid = None
            else:
                support, state = variant_state(
                    variant,
                    pair,
                    cc,
                    records,
                    pair_povms=characterization.pair_povms,
                    single_povms=characterization.single_povms,
                    cache=cache,
                )
                reduced = reduce_to_pair(state, support, pair)
                estimates = tuple(
                    pauli_expectation(reduced.matrix, obs)
                    for obs in TWO_QUBIT_OBSERVABLES
                )
                infid = 1.0 - fidelity(ideal_state, reduced)
            rows.append(
                ResultRow(
                    rep,
                    si,
                    pair,
                    variant,
                    estimates,
                    ideals,
                    mse(estimates, ideals),
                    infid,
                )
            )
        return rows

    keys = [
        (rep, si, pi)
        for rep in range(config.repetitions)
        for si in range(config.n_states)
        for pi in range(config.n_pairs)
    ]
    if n_jobs > 1:
        chunks_of_rows = Parallel(n_jobs=n_jobs, prefer="threads")(
            delayed(task)(*key) for key in keys
        )
    else:
        chunks_of_rows = [task(*key) for key in keys]
    rows = [row for chunk in chunks_of_rows for row in chunk]
    return ResultTable(config.to_dict(), TWO_QUBIT_OBSERVABLES, rows)


def _fmt(x: float) -> str:
    return _FLOAT_FMT % x


def write_csv(table: ResultTable, path) -> None:
    """One row per observable; floats carry 12 significant digits."""
    variant_order = {v: i for i, v in enumerate(VARIANTS)}
    rows = sorted(
        table.rows,
        key=lambda r: (r.repetition, r.state_idx, r.pair, variant_order[r.variant]),
    )
    lines = ["repetition,state_idx,pair,variant,observable,estimate,ideal,mse,infidelity"]
    for r in rows:
        pair_label = f"{r.pair[0]}-{r.pair[1]}"
        infid = "" if r.infidelity is None else _fmt(r.infidelity)
        for obs, est, ideal in zip(table.observables, r.estimates, r.ideals):
            lines.append(
                ",".join(
                    [
                        str(r.repetition),
                        str(r.state_idx),
                        pair_label,
                        r.variant,
                        "".join(obs),
                        _fmt(est),
                        _fmt(ideal),
                        _fmt(r.mse),
                        infid,
                    ]
                )
            )
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


def write_json(table: ResultTable, path) -> None:
    doc = {
        "config": table.config_doc,
        "observables": ["".join(obs) for obs in table.observables],
        "rows": [
            {
                "repetition": r.repetition,
                "state_idx": r.state_idx,
                "pair": list(r.pair),
                "variant": r.variant,
                "estimates": list(r.estimates),
                "ideals": list(r.ideals),
                "mse": r.mse,
                "infidelity": r.infidelity,
            }
            for r in table.rows
        ],
    }
    with open(path, "w", encoding="ascii") as fh:
        json.dump(doc, fh, indent=1)


def load_table(path) -> ResultTable:
    with open(path, "r", encoding="ascii") as fh:
        doc = json.load(fh)
    rows = [
        ResultRow(
            r["repetition"],
            r["state_idx"],
            tuple(r["pair"]),
            r["variant"],
            tuple(r["estimates"]),
            tuple(r["ideals"]),
            r["mse"],
            r["infidelity"],
        )
        for r in doc["rows"]
    ]
    observables = tuple(tuple(o) for o in doc["observables"])
    return ResultTable(doc["config"], observables, rows)


def emit_results(table: ResultTable, out_dir, basename: str = "results") -> dict:
    """Write the CSV and JSON artifacts; returns the paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / f"{basename}.csv"
    json_path = out / f"{basename}.json"
    write_csv(table, csv_path)
    write_json(table, json_path)
    return {"csv": csv_path, "json": json_path}


# ---------------------------------------------------------------------------
# Canned figure-replication configs (desk scale)
# ---------------------------------------------------------------------------


def _fig4_configs(seed: int, grid=(0.2, 0.4, 0.6)) -> list[tuple[str, ExperimentConfig]]:
    out = []
    for gi, k_mean in enumerate(grid):
        rng = spawn_rng(seed, _SALT_NOISE, 4, gi)
        ks = np.clip(rng.uniform(k_mean - 0.1, k_mean + 0.1, size=4), 0.0, 1.0)
        channels = [iswap_channel(2 * i, 2 * i + 1, float(ks[i])) for i in range(4)]
        cfg = ExperimentConfig(
            n_qubits=8,
            channels=channels,
            blocks=[(2 * i, 2 * i + 1) for i in range(4)],
            phf="auto",
            shots_calibration_total=40_000,
            shots_per_observable=20_000,
            n_states=3,
            n_pairs=6,
            repetitions=3,
            seed=seed,
            variants=("none", "two_point", "correlated"),
        )
        out.append((f"k{k_mean:g}", cfg))
    return out


def _fig5_configs(seed: int, grid=(0.15, 0.3)) -> list[tuple[str, ExperimentConfig]]:
    """Coherent over-rotation noise: per-qubit rotations plus XX chains on
    the multi-qubit clusters, all at the same strength."""
    blocks = [(0, 1), (2, 3), (4, 5, 6), (7,)]
    out = []
    for theta in grid:
        channels = [
            coherent_xx_channel(b, theta) for b in blocks if len(b) > 1
        ]
        channels += [coherent_xx_channel((q,), theta) for q in range(8)]
        cfg = ExperimentConfig(
            n_qubits=8,
            channels=channels,
            blocks=blocks,
            phf="bundled",
            linkage="average",
            shots_calibration_total=904_000,
            shots_per_observable=10_000,
            n_states=2,
            n_pairs=6,
            repetitions=2,
            seed=seed,
            variants=("none", "classical_correlated", "correlated"),
        )
        out.append((f"theta{theta:g}", cfg))
    return out


def _fig2_configs(seed: int) -> list[tuple[str, ExperimentConfig]]:
    """16-qubit mixed-noise stand-in with the cluster layout of the
    experimental example: two-qubit, three-qubit, and four-qubit blocks."""
    blocks = [
        (0, 1), (2, 3), (4, 5), (6,), (7,),
        (8, 9, 10), (11,), (12, 13, 14, 15),
    ]
    channels = [
        iswap_channel(0, 1, 0.25),
        iswap_channel(2, 3, 0.15),
        iswap_channel(4, 5, 0.3),
        coherent_xx_channel((8, 9, 10), 0.25),
        coherent_xx_channel((12, 13, 14, 15), 0.2),
    ]
    cfg = ExperimentConfig(
        n_qubits=16,
        channels=channels,
        blocks=blocks,
        phf="bundled",
        shots_calibration_total=904_000,
        shots_per_observable=10_000,
        n_states=3,
        n_pairs=8,
        repetitions=3,
        seed=seed,
        variants=VARIANTS,
    )
    return [("main", cfg)]


def _fig6_configs(
    seed: int, n_qubits: int = 40, target_state: str = "pure"
) -> list[tuple[str, ExperimentConfig]]:
    """Reduced-scale version of the large-system benchmark.

    Every four-qubit chunk carries one correlated pair readout plus weak
    per-qubit coherent rotations, so pair-level mitigation genuinely helps
    while cluster-level mitigation helps more on correlated pairs.
    """
    rng = spawn_rng(seed, _SALT_NOISE, 6, n_qubits)
    blocks: list[tuple] = []
    channels: list[NoiseChannel] = []
    for c in range(n_qubits // 4):
        q0 = 4 * c
        blocks.extend([(q0, q0 + 1), (q0 + 2,), (q0 + 3,)])
        channels.append(iswap_channel(q0, q0 + 1, float(rng.uniform(0.12, 0.2))))
    for q in range(n_qubits):
        channels.append(coherent_xx_channel((q,), float(rng.uniform(0.2, 0.35))))
    cfg = ExperimentConfig(
        n_qubits=n_qubits,
        channels=channels,
        blocks=blocks,
        phf="auto",
        shots_calibration_total=1000
        * (len(phf_2local(n_qubits).table) * 12 + 4),
        shots_per_observable=10_000,
        n_states=2,
        n_pairs=30,
        repetitions=2,
        seed=seed,
        variants=("none", "two_point", "correlated"),
        target_state=target_state,
    )
    return [("main", cfg)]


def figure_configs(figure: int, seed: int, **kwargs) -> list[tuple[str, ExperimentConfig]]:
    if figure == 2:
        return _fig2_configs(seed)
    if figure == 4:
        return _fig4_configs(seed, **kwargs)
    if figure == 5:
        return _fig5_configs(seed, **kwargs)
    if figure == 6:
        return _fig6_configs(seed, **kwargs)
    if figure == 7:
        return _fig6_configs(seed, target_state="depolarized", **kwargs)
    raise ValueError("supported figures: 2, 4, 5, 6, 7")


def run_replication(
    figure: int, seed: int, out_dir, n_jobs: int = 1, **kwargs
) -> dict:
    """Run every grid point of a figure config and emit per-point artifacts
    plus a summary CSV of (grid, variant, mean MSE, std over repetitions)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    summary_lines = ["figure,grid,variant,mean_mse,std_mse,mean_infidelity"]
    tables = {}
    for label, cfg in figure_configs(figure, seed, **kwargs):
        spec = system_spec_for(cfg)
        char = run_characterization(cfg, system_spec=spec, n_jobs=n_jobs)
        table = run_mitigation_benchmark(cfg, char, system_spec=spec, n_jobs=n_jobs)
        point_dir = out / f"fig{figure}_{label}"
        emit_results(table, point_dir)
        save_correlation_csv(char.correlation, point_dir / "correlation.csv")
        save_clustering(char.clustering, point_dir / "clusters.json")
        save_phf(char.family, point_dir / "phf.txt")
        save_noise_spec(point_dir / "noise_spec.json", cfg.n_qubits, cfg.channels, cfg.blocks)
        for entry in table.summary():
            infid = entry["mean_infidelity"]
            summary_lines.append(
                ",".join(
                    [
                        str(figure),
                        label,
                        entry["variant"],
                        _fmt(entry["mean_mse"]),
                        _fmt(entry["std_mse"]),
                        "" if infid is None else _fmt(infid),
                    ]
                )
            )
        tables[label] = (char, table)
    (out / f"fig{figure}_summary.csv").write_text(
        "\n".join(summary_lines) + "\n", encoding="ascii"
    )
    return tables
