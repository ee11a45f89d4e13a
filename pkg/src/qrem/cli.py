"""Command-line interface for calibration, clustering, and benchmarks."""

from __future__ import annotations

import json
from pathlib import Path

import click

from .calibration import load_records, save_povm, save_records
from .correlations import save_clustering, save_correlation_csv
from .harness import (
    ExperimentConfig,
    build_schedule,
    emit_results,
    resolve_phf,
    run_characterization,
    run_mitigation_benchmark,
    run_replication,
    system_spec_for,
)
from .hashfamily import save_phf


@click.group()
def main():
    """Correlated readout-error characterization and mitigation toolkit."""


def _config(path: str, seed: int | None) -> ExperimentConfig:
    cfg = ExperimentConfig.from_json(path)
    if seed is not None:
        cfg.seed = seed
    return cfg


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--seed", type=int, default=None, help="Override the config seed.")
@click.option("--out-dir", default="qrem-out", show_default=True)
def calibrate(config_path, seed, out_dir):
    """Sample the hash-family calibration schedule and save the records."""
    cfg = _config(config_path, seed)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    from .harness import _SALT_CALIBRATION  # stable stream layout
    from .noise import MeasurementSimulator, spawn_rng

    spec = system_spec_for(cfg)
    family = resolve_phf(cfg)
    schedule = build_schedule(family, cfg.shots_calibration_total)
    sim = MeasurementSimulator(spec, (1,) * cfg.n_qubits)
    records = [
        sim.sample_calibration(
            labels, schedule.shots_per_setting, spawn_rng(cfg.seed, _SALT_CALIBRATION, i)
        )
        for i, labels in enumerate(schedule.settings)
    ]
    save_phf(family, out / "phf.txt")
    save_records(records, out / "records.json")
    click.echo(
        f"saved {len(records)} settings x {schedule.shots_per_setting} shots "
        f"to {out / 'records.json'}"
    )


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--records", "records_path", required=True, type=click.Path(exists=True))
@click.option("--out-dir", default="qrem-out", show_default=True)
def cluster(config_path, records_path, out_dir):
    """Reconstruct pair POVMs from saved records, compute correlation
    coefficients, and emit the noise clustering."""
    import itertools

    from .calibration import reconstruct_povm_from_records
    from .correlations import cluster as cluster_fn
    from .correlations import correlation_matrix

    cfg = _config(config_path, None)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    records = load_records(records_path)
    shots = int(records[0].shots)
    pair_povms = {
        pair: reconstruct_povm_from_records(records, pair)
        for pair in itertools.combinations(range(cfg.n_qubits), 2)
    }
    corr = correlation_matrix(pair_povms, cfg.n_qubits)
    clustering = cluster_fn(
        corr, cfg.n_corr, threshold=cfg.threshold, linkage=cfg.linkage, n_calib=shots
    )
    save_correlation_csv(corr, out / "correlation.csv")
    save_clustering(clustering, out / "clusters.json")
    family = resolve_phf(cfg)
    needs_more = [c for c in clustering.clusters if len(c) > family.t]
    povm_dir = out / "cluster_povms"
    povm_dir.mkdir(exist_ok=True)
    for c in clustering.clusters:
        if len(c) <= family.t:
            povm = reconstruct_povm_from_records(records, c)
            save_povm(povm, povm_dir / ("q" + "_".join(map(str, c)) + ".json"))
    click.echo(f"clusters: {list(clustering.clusters)}")
    if needs_more:
        click.echo(
            "clusters needing dedicated calibration data (size beyond the "
            f"hash-family locality {family.t}): {needs_more}"
        )


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--seed", type=int, default=None, help="Override the config seed.")
@click.option("--out-dir", default="qrem-out", show_default=True)
@click.option("--threads", type=int, default=1, show_default=True)
def benchmark(config_path, seed, out_dir, threads):
    """Run characterization plus the full mitigation benchmark."""
    cfg = _config(config_path, seed)
    spec = system_spec_for(cfg)
    char = run_characterization(cfg, system_spec=spec, n_jobs=threads)
    table = run_mitigation_benchmark(cfg, char, system_spec=spec, n_jobs=threads)
    paths = emit_results(table, out_dir)
    for entry in table.summary():
        click.echo(
            f"{entry['variant']:>22}: mean MSE {entry['mean_mse']:.6g}"
            + (
                f", mean infidelity {entry['mean_infidelity']:.6g}"
                if entry["mean_infidelity"] is not None
                else ""
            )
        )
    click.echo(f"wrote {paths['csv']} and {paths['json']}")


@main.command()
@click.option("--figure", type=click.Choice(["2", "4", "5", "6", "7"]), required=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out-dir", default="qrem-results", show_default=True)
@click.option("--threads", type=int, default=1, show_default=True)
def replicate(figure, seed, out_dir, threads):
    """Replicate a result figure at desk scale and emit its data series."""
    run_replication(int(figure), seed, out_dir, n_jobs=threads)
    click.echo(f"summary written to {Path(out_dir) / f'fig{figure}_summary.csv'}")


if __name__ == "__main__":
    main()
