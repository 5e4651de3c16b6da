"""Experiment protocols: repeated seeded runs over arms of a parameter grid.

Each arm runs the full pipeline (split, label draw, contamination,
standardization, training, scoring) n times with consecutive seeds and
reports mean and standard deviation of the ranking metrics. Arms can run in
parallel processes when DEVNET_THREADS is set above 1.
"""

from __future__ import annotations

import csv
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .config import Settings
from .data import Dataset, ExperimentSpec, load_csv, fit_encoder, prepare_training_data, synth_gaussian
from .errors import ConfigError, DataError
from .evaluation import RunAggregate, aggregate_runs, ranking_metrics, scalability_sweep, wilcoxon_signed_rank
from .trainer import TrainingSet, architecture_for_variant, predict, train

PROTOCOLS = ("effectiveness", "data-efficiency", "contamination", "ablation", "scalability")

DATA_EFFICIENCY_GRID = (5, 15, 30, 60, 120)
CONTAMINATION_GRID = (0.0, 0.02, 0.05, 0.10, 0.20)
ABLATION_GRID = ("def", "rep", "linear", "3hl")
SCALABILITY_SIZES = (10_000, 20_000, 40_000)
SCALABILITY_DIMS = (250, 500, 1000, 2000)
SCALABILITY_FIXED_SIZE = 5000
SCALABILITY_FIXED_DIM = 1000


@dataclass
class ExperimentReport:
    protocol: str
    config: dict
    arms: dict[str, RunAggregate]
    extras: dict
    files: dict[str, str]


def load_dataset(settings: Settings):
    """Materialize the configured data source; returns (dataset, encoder or None)."""
    src = settings.data
    if src.csv is not None:
        table = load_csv(src.csv, src.label_column, src.positive_token,
                         src.column_kinds or None)
        encoder = fit_encoder(table)
        return encoder.transform(table), encoder
    s = src.synth
    return synth_gaussian(s.n_normal, s.n_anomaly, s.dim, s.separation, s.seed), None


def derive_seeds(seed: int) -> tuple[int, int]:
    """Independent (data, training) seeds from one master seed."""
    a, b = np.random.SeedSequence(seed).generate_state(2, dtype=np.uint64)
    return int(a), int(b)


def run_detection_once(dataset: Dataset, settings: Settings, seed: int) -> dict[str, float]:
    """One end-to-end run: prepare data, train, score the held-out split."""
    data_seed, train_seed = derive_seeds(seed)
    spec = replace(settings.experiment, seed=data_seed)
    prep = prepare_training_data(dataset, spec, standardize=settings.data.standardize)
    ts = TrainingSet(prep.unlabeled.features, prep.labeled_anomalies)
    arch = architecture_for_variant(settings.train.variant, dataset.n_features)
    cfg = replace(settings.train, seed=train_seed)
    model = train(ts, arch, cfg, settings.prior, settings.loss, settings.optimizer)
    # prep.test is already standardized, and the fresh model carries no scaler,
    # so predict applies no second transform here.
    scores = predict(model, prep.test.features)
    return ranking_metrics(scores, prep.test.labels).as_dict()


def _run_arm(payload) -> tuple[str, RunAggregate]:
    dataset, settings, arm_name, n_runs, base_seed = payload
    agg = aggregate_runs(lambda s: run_detection_once(dataset, settings, s),
                         n_runs=n_runs, base_seed=base_seed)
    return arm_name, agg


def _arm_settings(protocol: str, settings: Settings) -> list[tuple[str, Settings]]:
    if protocol == "effectiveness":
        return [("default", settings)]
    if protocol == "data-efficiency":
        return [
            (f"labeled={k}",
             replace(settings, experiment=replace(settings.experiment, n_labeled_anomalies=k)))
            for k in DATA_EFFICIENCY_GRID
        ]
    if protocol == "contamination":
        return [
            (f"rate={rate:g}",
             replace(settings, experiment=replace(settings.experiment, contamination_rate=rate)))
            for rate in CONTAMINATION_GRID
        ]
    if protocol == "ablation":
        return [
            (f"variant={v}", replace(settings, train=replace(settings.train, variant=v)))
            for v in ABLATION_GRID
        ]
    raise ConfigError(f"unknown protocol {protocol!r}, expected one of {PROTOCOLS}")


def _max_workers() -> int:
    raw = os.environ.get("DEVNET_THREADS", "1")
    try:
        value = int(raw)
    except ValueError:
        raise ConfigError(f"DEVNET_THREADS must be an integer, got {raw!r}") from None
    return max(1, value)


def run_protocol(protocol: str, settings: Settings, out_dir, n_runs: int | None = None,
                 base_seed: int | None = None) -> ExperimentReport:
    """Run one protocol and write runs.csv plus summary.json under ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    n_runs = settings.n_runs if n_runs is None else n_runs
    base_seed = settings.experiment.seed if base_seed is None else base_seed

    if protocol == "scalability":
        return _run_scalability(settings, out, base_seed)

    dataset, _ = load_dataset(settings)
    arms = _arm_settings(protocol, settings)
    payloads = [(dataset, s, name, n_runs, base_seed) for name, s in arms]
    workers = min(_max_workers(), len(payloads))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = dict(pool.map(_run_arm, payloads))
    else:
        results = dict(map(_run_arm, payloads))
    results = {name: results[name] for name, _ in arms}  # keep grid order

    extras = {}
    if protocol == "ablation":
        extras["wilcoxon_vs_def"] = _ablation_pvalues(results)

    runs_csv = out / "runs.csv"
    with open(runs_csv, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["protocol", "arm", "seed", "auc_roc", "auc_pr"])
        for name, agg in results.items():
            for seed, run in zip(agg.seeds, agg.runs):
                writer.writerow([protocol, name, seed, repr(run["auc_roc"]), repr(run["auc_pr"])])

    report = ExperimentReport(
        protocol=protocol,
        config=settings.echo() | {"runs": n_runs, "base_seed": base_seed},
        arms=results,
        extras=extras,
        files={"runs_csv": str(runs_csv)},
    )
    summary = out / "summary.json"
    with open(summary, "w", encoding="utf-8") as fh:
        json.dump(_report_doc(report), fh, indent=2, sort_keys=True)
        fh.write("\n")
    report.files["summary_json"] = str(summary)
    return report


def _ablation_pvalues(results: dict[str, RunAggregate]) -> dict:
    base = results.get("variant=def")
    out: dict[str, dict[str, float | None]] = {}
    for name, agg in results.items():
        if name == "variant=def" or base is None:
            continue
        entry = {}
        for metric in ("auc_roc", "auc_pr"):
            a = [r[metric] for r in base.runs]
            b = [r[metric] for r in agg.runs]
            try:
                entry[metric] = wilcoxon_signed_rank(a, b)
            except DataError:
                entry[metric] = None
        out[name] = entry
    return out


def _report_doc(report: ExperimentReport) -> dict:
    return {
        "protocol": report.protocol,
        "config": report.config,
        "arms": {
            name: {"mean": agg.mean, "std": agg.std, "seeds": agg.seeds, "runs": agg.runs}
            for name, agg in report.arms.items()
        },
        **report.extras,
        "files": report.files,
    }


def _run_scalability(settings: Settings, out: Path, seed: int) -> ExperimentReport:
    size_rows = scalability_sweep(sizes=SCALABILITY_SIZES, fixed_dim=SCALABILITY_FIXED_DIM,
                                  seed=seed, csv_path=out / "scalability_size.csv")
    dim_rows = scalability_sweep(dims=SCALABILITY_DIMS, fixed_size=SCALABILITY_FIXED_SIZE,
                                 seed=seed, csv_path=out / "scalability_dim.csv")

    def ratios(rows):
        times = [t for _, _, t in rows]
        return [times[i + 1] / times[i] for i in range(len(times) - 1)]

    doc = {
        "protocol": "scalability",
        "config": settings.echo() | {"base_seed": seed,
                                     "sizes": list(SCALABILITY_SIZES),
                                     "dims": list(SCALABILITY_DIMS)},
        "size_sweep": [{"n": n, "d": d, "wall_seconds": t} for n, d, t in size_rows],
        "dim_sweep": [{"n": n, "d": d, "wall_seconds": t} for n, d, t in dim_rows],
        "size_ratios": ratios(size_rows),
        "dim_ratios": ratios(dim_rows),
    }
    summary = out / "summary.json"
    with open(summary, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return ExperimentReport(
        protocol="scalability",
        config=doc["config"],
        arms={},
        extras={"size_sweep": size_rows, "dim_sweep": dim_rows},
        files={"summary_json": str(summary),
               "size_csv": str(out / "scalability_size.csv"),
               "dim_csv": str(out / "scalability_dim.csv")},
    )
