"""Gaussian-prior reference scores and the Z-score deviation loss.

Each mini-batch draws a fresh set of prior anomaly scores; their mean and
standard deviation anchor the deviation of every network score. Normal rows
are pulled toward the reference mean, labeled anomalies are pushed at least
``margin`` reference deviations above it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericError

SIGMA_GUARD = 1e-12


@dataclass(frozen=True)
class PriorConfig:
    """Gaussian prior on the anomaly scores of normal objects.

    ``n_samples`` draws are taken from N(mu, sigma^2) per mini-batch to form
    the reference statistics.
    """

    mu: float = 0.0
    sigma: float = 1.0
    n_samples: int = 5000

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if self.n_samples < 2:
            raise ValueError(f"n_samples must be >= 2, got {self.n_samples}")


@dataclass(frozen=True)
class ReferenceStats:
    """Mean and population standard deviation of one set of prior draws.

    Scalars in the default configuration; per-dimension vectors when the
    network emits representations instead of scalar scores.
    """

    mean: float | np.ndarray
    std: float | np.ndarray

    def __post_init__(self):
        if np.any(np.asarray(self.std) < 0):
            raise ValueError("reference std must be non-negative")


@dataclass(frozen=True)
class LossConfig:
    """Margin (in reference standard deviations) required of labeled anomalies."""

    margin: float = 5.0

    def __post_init__(self):
        if not self.margin > 0:
            raise ValueError(f"margin must be positive, got {self.margin}")


def sample_reference(prior: PriorConfig, rng: np.random.Generator, dims: int | None = None) -> ReferenceStats:
    """Draw ``prior.n_samples`` scores and return their mean and population std.

    With ``dims`` set, each of the ``dims`` output dimensions gets its own
    independent draw set and the stats are vectors of that length.
    """
    size = prior.n_samples if dims is None else (prior.n_samples, dims)
    draws = rng.normal(prior.mu, prior.sigma, size=size)
    return ReferenceStats(mean=draws.mean(axis=0), std=draws.std(axis=0))


def deviation(score, ref: ReferenceStats):
    """Z-score of ``score`` against the reference: (score - mean) / std."""
    if np.any(np.asarray(ref.std) < SIGMA_GUARD):
        raise NumericError(
            f"reference std below {SIGMA_GUARD}; deviation is numerically undefined"
        )
    return (score - ref.mean) / ref.std


def deviation_loss(dev, y, cfg: LossConfig = LossConfig()):
    """Per-object loss: (1-y)|dev| + y*max(0, margin - dev).

    ``y`` is 1 for labeled anomalies and 0 for (assumed) normal objects.
    Accepts scalars or broadcastable arrays.
    """
    dev = np.asarray(dev, dtype=np.float64)
    y = np.asarray(y)
    loss = (1 - y) * np.abs(dev) + y * np.maximum(0.0, cfg.margin - dev)
    return loss if loss.ndim else float(loss)


def loss_gradient_wrt_score(score, y, ref: ReferenceStats, cfg: LossConfig = LossConfig()):
    """Derivative of the deviation loss with respect to the raw score.

    Piecewise constant: sign(dev)/std for normals (zero exactly at dev=0),
    -1/std for anomalies below the margin, zero once the margin is met.
    """
    dev = np.asarray(deviation(score, ref), dtype=np.float64)
    y = np.asarray(y)
    grad_normal = np.sign(dev) / ref.std
    grad_anomaly = np.where(dev < cfg.margin, -1.0, 0.0) / ref.std
    grad = np.where(y == 1, grad_anomaly, grad_normal)
    return grad if grad.ndim else float(grad)
