"""Command-line surface: train, score, evaluate, and experiment protocols.

Exit codes: 0 success, 2 configuration problems, 3 data problems, 4 numeric
failures, 1 anything else.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import experiments
from .config import Settings, load_settings
from .data import MISSING, Table
from .errors import ConfigError, DataError, DevnetError, NumericError
from .interpret import score_to_probability
from .trainer import TrainedModel, TrainingSet, architecture_for_variant, predict, train
from .evaluation import ranking_metrics


def _apply_overrides(settings: Settings, args) -> Settings:
    exp = settings.experiment
    if getattr(args, "seed", None) is not None:
        exp = replace(exp, seed=args.seed)
    if getattr(args, "labeled_anomalies", None) is not None:
        exp = replace(exp, n_labeled_anomalies=args.labeled_anomalies)
    if getattr(args, "contamination", None) is not None:
        try:
            exp = replace(exp, contamination_rate=args.contamination)
        except ValueError as e:
            raise ConfigError(str(e)) from e
    settings = replace(settings, experiment=exp)
    train_cfg = replace(settings.train, seed=exp.seed)
    if getattr(args, "variant", None) is not None:
        train_cfg = replace(train_cfg, variant=args.variant)
    settings = replace(settings, train=train_cfg)
    if getattr(args, "runs", None) is not None:
        if args.runs < 1:
            raise ConfigError("--runs must be >= 1")
        settings = replace(settings, n_runs=args.runs)
    return settings


def _write_echo(out: Path, command: str, settings: Settings) -> None:
    doc = {"command": command, "settings": settings.echo()}
    with open(out / "config_echo.json", "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def cmd_train(args) -> int:
    settings = _apply_overrides(load_settings(args.config), args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    dataset, encoder = experiments.load_dataset(settings)
    data_seed, train_seed = experiments.derive_seeds(settings.experiment.seed)
    spec = replace(settings.experiment, seed=data_seed)
    prep = experiments.prepare_training_data(dataset, spec,
                                             standardize=settings.data.standardize)
    ts = TrainingSet(prep.unlabeled.features, prep.labeled_anomalies)
    arch = architecture_for_variant(settings.train.variant, dataset.n_features)
    cfg = replace(settings.train, seed=train_seed)
    model = train(ts, arch, cfg, settings.prior, settings.loss, settings.optimizer)
    model.scaler = prep.scaler
    model.encoder = encoder
    model.label_column = settings.data.label_column
    model.positive_token = settings.data.positive_token

    model_path = out / "model.json"
    model.save(model_path)
    log_path = out / "training_log.csv"
    with open(log_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "mean_loss"])
        for epoch, loss in enumerate(model.training_log, start=1):
            writer.writerow([epoch, repr(loss)])
    _write_echo(out, "train", settings)
    print(f"model written to {model_path}")
    print(f"training log written to {log_path}")
    return 0


def _read_feature_rows(path, model: TrainedModel):
    """Read a CSV for scoring; returns (features, labels or None)."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise DataError(f"{path}: file is empty") from None
            rows = list(reader)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    for i, row in enumerate(rows):
        if len(row) != len(header):
            raise DataError(f"{path}: row {i + 2} has {len(row)} cells, header has {len(header)}")

    labels = None
    if model.label_column is not None and model.label_column in header:
        idx = header.index(model.label_column)
        labels = np.array([1 if row[idx] == model.positive_token else 0 for row in rows])

    if model.encoder is not None:
        enc = model.encoder
        missing = [name for name in enc.names if name not in header]
        if missing:
            raise DataError(f"{path}: missing feature columns {missing}")
        cols = [header.index(name) for name in enc.names]
        table = Table(
            feature_names=list(enc.names),
            feature_kinds=list(enc.kinds),
            rows=[[row[j] for j in cols] for row in rows],
            labels=labels if labels is not None else np.zeros(len(rows), dtype=int),
            label_column=model.label_column or "",
            positive_token=model.positive_token or "",
        )
        return enc.transform(table).features, labels

    # No encoder: expect purely numeric feature columns matching input_dim.
    feature_cols = [j for j, name in enumerate(header) if name != model.label_column]
    if len(feature_cols) != model.arch.input_dim:
        raise DataError(
            f"{path}: found {len(feature_cols)} feature columns, "
            f"model expects {model.arch.input_dim}"
        )
    features = np.empty((len(rows), len(feature_cols)))
    for i, row in enumerate(rows):
        for k, j in enumerate(feature_cols):
            cell = row[j]
            if cell == MISSING:
                raise DataError(f"{path}: missing value at row {i + 2}, column {header[j]!r}")
            try:
                features[i, k] = float(cell)
            except ValueError:
                raise DataError(
                    f"{path}: non-numeric cell {cell!r} at row {i + 2}, column {header[j]!r}"
                ) from None
    return features, labels


def _score_rows(model: TrainedModel, features):
    scores = predict(model, features)
    rows = []
    for s in scores:
        interp = score_to_probability(float(s), model.prior)
        rows.append((float(s), interp.z, interp.upper_tail_p))
    return scores, rows


def cmd_score(args) -> int:
    model = TrainedModel.load(args.model)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    features, _ = _read_feature_rows(args.data, model)
    scores, rows = _score_rows(model, features)

    def write(path, ordered_rows):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["raw_score", "z", "upper_tail_p"])
            for raw, z, p in ordered_rows:
                writer.writerow([repr(raw), repr(z), repr(p)])

    scores_path = out / "scores.csv"
    write(scores_path, rows)
    print(f"scores written to {scores_path}")
    if args.sorted:
        order = np.argsort(-np.asarray(scores), kind="stable")
        sorted_path = out / "scores_sorted.csv"
        write(sorted_path, [rows[i] for i in order])
        print(f"sorted scores written to {sorted_path}")
    return 0


def cmd_evaluate(args) -> int:
    model = TrainedModel.load(args.model)
    features, labels = _read_feature_rows(args.data, model)
    if labels is None:
        raise DataError(
            "cannot evaluate: the model does not name a label column present in the data"
        )
    if labels.sum() == 0 or labels.sum() == len(labels):
        raise DataError("evaluation needs both classes present in the data")
    scores = predict(model, features)
    metrics = ranking_metrics(scores, labels)
    print(json.dumps(metrics.as_dict(), indent=2, sort_keys=True))
    return 0


def cmd_experiment(args) -> int:
    settings = _apply_overrides(load_settings(args.config), args)
    report = experiments.run_protocol(args.protocol, settings, args.out,
                                      n_runs=settings.n_runs,
                                      base_seed=settings.experiment.seed)
    _write_echo(Path(args.out), f"experiment:{args.protocol}", settings)
    for name, path in sorted(report.files.items()):
        print(f"{name}: {path}")
    for arm, agg in report.arms.items():
        m, s = agg.mean, agg.std
        print(f"{arm}: auc_roc={m['auc_roc']:.4f}+/-{s['auc_roc']:.4f} "
              f"auc_pr={m['auc_pr']:.4f}+/-{s['auc_pr']:.4f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="devnet",
        description="Anomaly-score learning from a few labeled anomalies "
                    "with a Gaussian-prior deviation loss.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="TOML or JSON config file")
    common.add_argument("--out", default="out", help="output directory (default: out)")
    common.add_argument("--seed", type=int, default=None, help="override the master seed")
    common.add_argument("--variant", choices=("def", "rep", "linear", "3hl"), default=None)
    common.add_argument("--labeled-anomalies", type=int, default=None,
                        dest="labeled_anomalies")
    common.add_argument("--contamination", type=float, default=None)
    common.add_argument("--runs", type=int, default=None)

    p_train = sub.add_parser("train", parents=[common], help="train a model from a config")
    p_train.set_defaults(func=cmd_train)

    p_score = sub.add_parser("score", help="score a CSV with a trained model")
    p_score.add_argument("--model", required=True)
    p_score.add_argument("--data", required=True)
    p_score.add_argument("--out", default="out")
    p_score.add_argument("--sorted", action="store_true",
                         help="also write scores sorted descending")
    p_score.set_defaults(func=cmd_score)

    p_eval = sub.add_parser("evaluate", help="compute ranking metrics on labeled data")
    p_eval.add_argument("--model", required=True)
    p_eval.add_argument("--data", required=True)
    p_eval.set_defaults(func=cmd_evaluate)

    p_exp = sub.add_parser("experiment", parents=[common], help="run an experiment protocol")
    p_exp.add_argument("--protocol", required=True, choices=experiments.PROTOCOLS)
    p_exp.set_defaults(func=cmd_experiment)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 4
    except DevnetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
