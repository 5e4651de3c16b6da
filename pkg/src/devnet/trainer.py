"""Training loop: stratified mini-batches, batch loss assembly, and the epoch schedule.

Every mini-batch is half labeled anomalies (sampled with replacement when the
labeled set is smaller than half a batch) and half unlabeled rows treated as
normal. Reference statistics are redrawn from the prior for every batch.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import data as data_mod
from .deviation import (
    LossConfig,
    PriorConfig,
    ReferenceStats,
    deviation,
    deviation_loss,
    loss_gradient_wrt_score,
    sample_reference,
)
from .errors import ConfigError, NumericError
from .network import Architecture, Parameters, backward, forward, init_parameters
from .optimizer import OptimizerConfig, init_rms_state, regularized_gradient, rmsprop_step

VARIANTS = ("def", "rep", "linear", "3hl")

_VARIANT_HIDDEN = {
    "def": (20,),
    "rep": (20,),
    "linear": (),
    "3hl": (1000, 250, 20),
}


def architecture_for_variant(variant: str, input_dim: int) -> Architecture:
    """Network shape for each ablation variant of the method."""
    if variant not in VARIANTS:
        raise ConfigError(f"unknown variant {variant!r}, expected one of {VARIANTS}")
    return Architecture(input_dim, _VARIANT_HIDDEN[variant], rep_mode=(variant == "rep"))


@dataclass(frozen=True)
class TrainConfig:
    n_epochs: int = 50
    n_batches: int = 20
    batch_size: int = 512
    seed: int = 0
    variant: str = "def"

    def __post_init__(self):
        if self.n_epochs < 1 or self.n_batches < 1:
            raise ConfigError("n_epochs and n_batches must be >= 1")
        if self.batch_size < 2 or self.batch_size % 2 != 0:
            raise ConfigError(
                f"batch_size must be a positive even integer, got {self.batch_size}"
            )
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown variant {self.variant!r}, expected one of {VARIANTS}")


@dataclass
class TrainingSet:
    """Unlabeled rows (treated as normal) plus the small labeled-anomaly set."""

    unlabeled: np.ndarray
    anomalies: np.ndarray

    def __post_init__(self):
        self.unlabeled = np.asarray(self.unlabeled, dtype=np.float64)
        self.anomalies = np.asarray(self.anomalies, dtype=np.float64)
        if self.unlabeled.ndim != 2 or self.anomalies.ndim != 2:
            raise ValueError("training matrices must be 2-D")
        if len(self.anomalies) < 1:
            raise ValueError("at least one labeled anomaly is required")
        if self.unlabeled.shape[1] != self.anomalies.shape[1]:
            raise ValueError(
                f"column mismatch: unlabeled has {self.unlabeled.shape[1]}, "
                f"anomalies have {self.anomalies.shape[1]}"
            )


def sample_minibatch(ts: TrainingSet, batch_size: int, rng: np.random.Generator):
    """Draw a half/half stratified batch; returns (rows, labels)."""
    if batch_size % 2 != 0:
        raise ConfigError(f"batch_size must be even, got {batch_size}")
    half = batch_size // 2
    if len(ts.unlabeled) < half:
        raise ConfigError(
            f"unlabeled set has {len(ts.unlabeled)} rows but half a batch is {half}; "
            "shrink batch_size"
        )
    anom_idx = rng.choice(len(ts.anomalies), size=half, replace=len(ts.anomalies) < half)
    norm_idx = rng.choice(len(ts.unlabeled), size=half, replace=False)
    batch = np.vstack([ts.unlabeled[norm_idx], ts.anomalies[anom_idx]])
    labels = np.concatenate([np.zeros(half, dtype=int), np.ones(half, dtype=int)])
    return batch, labels


def batch_loss(
    params: Parameters,
    batch: np.ndarray,
    labels: np.ndarray,
    ref: ReferenceStats,
    loss_cfg: LossConfig,
    weight_decay: float,
):
    """Mean deviation loss over the batch plus the L2 kernel penalty, with gradients."""
    out, cache = forward(params, batch)
    labels = np.asarray(labels)
    n = len(labels)
    if params.arch.rep_mode:
        y = labels[:, np.newaxis]
        per_row = deviation_loss(deviation(out, ref), y, loss_cfg).mean(axis=1)
        dscore = loss_gradient_wrt_score(out, y, ref, loss_cfg) / (n * out.shape[1])
    else:
        per_row = deviation_loss(deviation(out, ref), labels, loss_cfg)
        dscore = loss_gradient_wrt_score(out, labels, ref, loss_cfg) / n
    penalty = weight_decay * sum(float((w * w).sum()) for w in params.hidden_weights)
    loss = float(per_row.sum()) / n + penalty
    grads = regularized_gradient(params, backward(params, cache, dscore), weight_decay)
    return loss, grads


@dataclass
class TrainedModel:
    """A trained scoring network plus everything needed to reproduce its inputs."""

    arch: Architecture
    params: Parameters
    prior: PriorConfig
    loss: LossConfig
    scaler: data_mod.FeatureScaler | None = None
    encoder: data_mod.Encoder | None = None
    label_column: str | None = None
    positive_token: str | None = None
    training_log: list[float] = field(default_factory=list)

    def to_json(self) -> str:
        doc = {
            "format": "devnet-model",
            "version": 1,
            "architecture": {
                "input_dim": self.arch.input_dim,
                "hidden_sizes": list(self.arch.hidden_sizes),
                "rep_mode": self.arch.rep_mode,
            },
            "parameters": {
                "hidden": [
                    {
                        "weight": {"shape": list(w.shape), "data": w.ravel().tolist()},
                        "bias": b.tolist(),
                    }
                    for w, b in zip(self.params.hidden_weights, self.params.hidden_biases)
                ],
                "output": None if self.params.output is None else self.params.output.tolist(),
            },
            "prior": {"mu": self.prior.mu, "sigma": self.prior.sigma,
                      "n_samples": self.prior.n_samples},
            "loss": {"margin": self.loss.margin},
            "scaler": None if self.scaler is None else self.scaler.to_dict(),
            "encoder": None if self.encoder is None else self.encoder.to_dict(),
            "label_column": self.label_column,
            "positive_token": self.positive_token,
            "training_log": list(self.training_log),
        }
        return json.dumps(doc, sort_keys=True, separators=(",", ":"))

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_json())
            fh.write("\n")

    @classmethod
    def from_json(cls, text: str) -> "TrainedModel":
        doc = json.loads(text)
        if doc.get("format") != "devnet-model":
            raise ValueError("not a model document")
        if doc.get("version") != 1:
            raise ValueError(f"unsupported model version {doc.get('version')}")
        arch = Architecture(
            doc["architecture"]["input_dim"],
            tuple(doc["architecture"]["hidden_sizes"]),
            doc["architecture"]["rep_mode"],
        )
        hidden = doc["parameters"]["hidden"]
        hw = [np.array(h["weight"]["data"], dtype=np.float64).reshape(h["weight"]["shape"])
              for h in hidden]
        hb = [np.array(h["bias"], dtype=np.float64) for h in hidden]
        out = doc["parameters"]["output"]
        params = Parameters(arch, hw, hb,
                            None if out is None else np.array(out, dtype=np.float64))
        return cls(
            arch=arch,
            params=params,
            prior=PriorConfig(doc["prior"]["mu"], doc["prior"]["sigma"],
                              doc["prior"]["n_samples"]),
            loss=LossConfig(doc["loss"]["margin"]),
            scaler=None if doc["scaler"] is None
            else data_mod.FeatureScaler.from_dict(doc["scaler"]),
            encoder=None if doc["encoder"] is None
            else data_mod.Encoder.from_dict(doc["encoder"]),
            label_column=doc["label_column"],
            positive_token=doc["positive_token"],
            training_log=list(doc["training_log"]),
        )

    @classmethod
    def load(cls, path) -> "TrainedModel":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(fh.read())


def train(
    ts: TrainingSet,
    arch: Architecture,
    train_cfg: TrainConfig,
    prior: PriorConfig = PriorConfig(),
    loss_cfg: LossConfig = LossConfig(),
    opt_cfg: OptimizerConfig = OptimizerConfig(),
) -> TrainedModel:
    """Run the full schedule of stratified batches with fresh per-batch references.

    Deterministic for a given seed; the returned model records per-epoch mean
    loss in its training log.
    """
    expected = _VARIANT_HIDDEN[train_cfg.variant]
    if arch.hidden_sizes != expected or arch.rep_mode != (train_cfg.variant == "rep"):
        raise ConfigError(
            f"variant {train_cfg.variant!r} expects hidden sizes {expected} "
            f"(rep_mode={train_cfg.variant == 'rep'}), got {arch.hidden_sizes} "
            f"(rep_mode={arch.rep_mode})"
        )
    if ts.unlabeled.shape[1] != arch.input_dim:
        raise ValueError(
            f"training data has {ts.unlabeled.shape[1]} columns, "
            f"architecture expects {arch.input_dim}"
        )

    seed_init, seed_loop = np.random.SeedSequence(train_cfg.seed).spawn(2)
    params = init_parameters(arch, seed_init)
    rng = np.random.default_rng(seed_loop)
    state = init_rms_state(params)
    dims = arch.rep_dim if arch.rep_mode else None

    log = []
    for epoch in range(train_cfg.n_epochs):
        total = 0.0
        for batch_no in range(train_cfg.n_batches):
            batch, labels = sample_minibatch(ts, train_cfg.batch_size, rng)
            ref = sample_reference(prior, rng, dims=dims)
            loss, grads = batch_loss(params, batch, labels, ref, loss_cfg,
                                     opt_cfg.weight_decay)
            if not np.isfinite(loss):
                raise NumericError(
                    f"non-finite loss at epoch {epoch + 1}, batch {batch_no + 1}"
                )
            try:
                params, state = rmsprop_step(params, grads, state, opt_cfg)
            except NumericError as exc:
                raise NumericError(
                    f"epoch {epoch + 1}, batch {batch_no + 1}: {exc}"
                ) from exc
            total += loss
        log.append(total / train_cfg.n_batches)

    return TrainedModel(arch=arch, params=params, prior=prior, loss=loss_cfg,
                        training_log=log)


def predict(model: TrainedModel, features: np.ndarray) -> np.ndarray:
    """Anomaly scores for raw (unstandardized) feature rows; larger means more anomalous.

    In rep_mode the score is the mean per-dimension deviation of the
    representation from the prior.
    """
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.arch.input_dim:
        raise ValueError(
            f"feature matrix shape {x.shape} does not match input_dim {model.arch.input_dim}"
        )
    if model.scaler is not None:
        x = model.scaler.transform(x)
    out, _ = forward(model.params, x)
    if model.arch.rep_mode:
        return ((out - model.prior.mu) / model.prior.sigma).mean(axis=1)
    return out
