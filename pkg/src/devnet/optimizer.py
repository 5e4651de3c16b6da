"""RMSprop updates with L2 weight decay on the hidden kernels."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericError
from .network import Gradients, Parameters, map_arrays


@dataclass(frozen=True)
class OptimizerConfig:
    lr: float = 0.001
    rho: float = 0.9
    eps: float = 1e-7
    weight_decay: float = 0.01

    def __post_init__(self):
        if not self.lr > 0:
            raise ValueError(f"lr must be positive, got {self.lr}")
        if not 0 < self.rho < 1:
            raise ValueError(f"rho must be in (0, 1), got {self.rho}")
        if not self.eps > 0:
            raise ValueError(f"eps must be positive, got {self.eps}")
        if self.weight_decay < 0:
            raise ValueError(f"weight_decay must be >= 0, got {self.weight_decay}")


# Running mean-square accumulators, one per parameter, same layout.
RmsState = Parameters


def init_rms_state(params: Parameters) -> RmsState:
    return params.zeros_like()


def regularized_gradient(params: Parameters, grads: Gradients, weight_decay: float) -> Gradients:
    """Add the gradient of weight_decay * sum(W^2) for every hidden kernel.

    Biases and the output unit are never decayed.
    """
    if params.arch != grads.arch:
        raise ValueError("parameters and gradients have mismatched layouts")
    hw = [g + 2.0 * weight_decay * w for w, g in zip(params.hidden_weights, grads.hidden_weights)]
    hb = [b.copy() for b in grads.hidden_biases]
    out = None if grads.output is None else grads.output.copy()
    return Parameters(params.arch, hw, hb, out)


def rmsprop_step(
    params: Parameters,
    grads: Gradients,
    state: RmsState,
    cfg: OptimizerConfig = OptimizerConfig(),
) -> tuple[Parameters, RmsState]:
    """One update: s <- rho*s + (1-rho)*g^2; theta <- theta - lr*g/(sqrt(s)+eps)."""
    for name, g in grads.named_arrays():
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient in {name}; training diverged")
    new_state = map_arrays(lambda g, s: cfg.rho * s + (1.0 - cfg.rho) * g * g, grads, state)
    new_params = map_arrays(
        lambda p, g, s: p - cfg.lr * g / (np.sqrt(s) + cfg.eps), params, grads, new_state
    )
    return new_params, new_state
