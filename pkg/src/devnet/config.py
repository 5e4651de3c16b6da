"""Run configuration: a TOML (or JSON) file declaring data source and settings.

Every knob has the library default, so a minimal config only names the data.
Unknown sections or keys are rejected to catch typos early.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .data import ExperimentSpec
from .deviation import LossConfig, PriorConfig
from .errors import ConfigError
from .optimizer import OptimizerConfig
from .trainer import TrainConfig

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

_SECTION_KEYS = {
    "data": {"csv", "label_column", "positive_token", "standardize", "column_kinds", "synth"},
    "data.synth": {"n_normal", "n_anomaly", "dim", "separation", "seed"},
    "experiment": {"train_fraction", "contamination", "labeled_anomalies", "runs", "seed"},
    "train": {"variant", "epochs", "batches_per_epoch", "batch_size"},
    "prior": {"mu", "sigma", "samples"},
    "loss": {"margin"},
    "optimizer": {"lr", "rho", "eps", "weight_decay"},
}


@dataclass
class SynthSource:
    n_normal: int = 5000
    n_anomaly: int = 250
    dim: int = 10
    separation: float = 3.0
    seed: int = 0


@dataclass
class DataSource:
    csv: str | None = None
    label_column: str | None = None
    positive_token: str | None = None
    column_kinds: dict = field(default_factory=dict)
    synth: SynthSource | None = None
    standardize: bool = True


@dataclass
class Settings:
    """Resolved configuration for one command invocation."""

    data: DataSource
    experiment: ExperimentSpec
    n_runs: int
    train: TrainConfig
    prior: PriorConfig
    loss: LossConfig
    optimizer: OptimizerConfig
    raw: dict = field(default_factory=dict)

    def echo(self) -> dict:
        """JSON-serializable copy of the resolved settings."""
        return {
            "data": {
                "csv": self.data.csv,
                "label_column": self.data.label_column,
                "positive_token": self.data.positive_token,
                "column_kinds": dict(self.data.column_kinds),
                "synth": None if self.data.synth is None else vars(self.data.synth),
                "standardize": self.data.standardize,
            },
            "experiment": {
                "train_fraction": self.experiment.train_fraction,
                "contamination": self.experiment.contamination_rate,
                "labeled_anomalies": self.experiment.n_labeled_anomalies,
                "seed": self.experiment.seed,
                "runs": self.n_runs,
            },
            "train": {
                "variant": self.train.variant,
                "epochs": self.train.n_epochs,
                "batches_per_epoch": self.train.n_batches,
                "batch_size": self.train.batch_size,
            },
            "prior": {"mu": self.prior.mu, "sigma": self.prior.sigma,
                      "samples": self.prior.n_samples},
            "loss": {"margin": self.loss.margin},
            "optimizer": {"lr": self.optimizer.lr, "rho": self.optimizer.rho,
                          "eps": self.optimizer.eps,
                          "weight_decay": self.optimizer.weight_decay},
        }


def _check_keys(section: str, mapping: dict) -> None:
    allowed = _SECTION_KEYS[section]
    unknown = sorted(set(mapping) - allowed)
    if unknown:
        raise ConfigError(f"unknown keys in [{section}]: {unknown}; allowed: {sorted(allowed)}")


def _parse(path: Path) -> dict:
    try:
        text = path.read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if path.suffix == ".json":
        try:
            return json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    try:
        return tomllib.loads(text.decode("utf-8"))
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: invalid TOML: {exc}") from exc


def load_settings(path) -> Settings:
    path = Path(path)
    doc = _parse(path)
    unknown = sorted(set(doc) - set(_SECTION_KEYS) - {"data.synth"})
    if unknown:
        raise ConfigError(f"unknown config sections: {unknown}")

    data_doc = dict(doc.get("data", {}))
    _check_keys("data", data_doc)
    synth = None
    if "synth" in data_doc:
        synth_doc = dict(data_doc["synth"])
        _check_keys("data.synth", synth_doc)
        synth = SynthSource(**synth_doc)
    source = DataSource(
        csv=data_doc.get("csv"),
        label_column=data_doc.get("label_column"),
        positive_token=data_doc.get("positive_token"),
        column_kinds=dict(data_doc.get("column_kinds", {})),
        synth=synth,
        standardize=bool(data_doc.get("standardize", True)),
    )
    if (source.csv is None) == (source.synth is None):
        raise ConfigError("config must set exactly one of [data].csv or [data.synth]")
    if source.csv is not None and (source.label_column is None or source.positive_token is None):
        raise ConfigError("[data] with a csv needs label_column and positive_token")

    exp_doc = dict(doc.get("experiment", {}))
    _check_keys("experiment", exp_doc)
    n_runs = int(exp_doc.get("runs", 10))
    if n_runs < 1:
        raise ConfigError(f"[experiment].runs must be >= 1, got {n_runs}")

    train_doc = dict(doc.get("train", {}))
    _check_keys("train", train_doc)
    prior_doc = dict(doc.get("prior", {}))
    _check_keys("prior", prior_doc)
    loss_doc = dict(doc.get("loss", {}))
    _check_keys("loss", loss_doc)
    opt_doc = dict(doc.get("optimizer", {}))
    _check_keys("optimizer", opt_doc)

    try:
        experiment = ExperimentSpec(
            train_fraction=float(exp_doc.get("train_fraction", 0.8)),
            contamination_rate=float(exp_doc.get("contamination", 0.02)),
            n_labeled_anomalies=int(exp_doc.get("labeled_anomalies", 30)),
            seed=int(exp_doc.get("seed", 0)),
        )
        train = TrainConfig(
            n_epochs=int(train_doc.get("epochs", 50)),
            n_batches=int(train_doc.get("batches_per_epoch", 20)),
            batch_size=int(train_doc.get("batch_size", 512)),
            seed=experiment.seed,
            variant=str(train_doc.get("variant", "def")),
        )
        prior = PriorConfig(
            mu=float(prior_doc.get("mu", 0.0)),
            sigma=float(prior_doc.get("sigma", 1.0)),
            n_samples=int(prior_doc.get("samples", 5000)),
        )
        loss = LossConfig(margin=float(loss_doc.get("margin", 5.0)))
        optimizer = OptimizerConfig(
            lr=float(opt_doc.get("lr", 0.001)),
            rho=float(opt_doc.get("rho", 0.9)),
            eps=float(opt_doc.get("eps", 1e-7)),
            weight_decay=float(opt_doc.get("weight_decay", 0.01)),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    return Settings(source, experiment, n_runs, train, prior, loss, optimizer, raw=doc)
