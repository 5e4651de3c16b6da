"""Shared test utilities: parameter flattening and finite-difference gradients.

The network's loss surface is piecewise linear in every single parameter, so
central differences are exact on a linear piece. A perturbation that crosses a
ReLU or loss kink lands on a different piece; such coordinates are detected by
comparing the activation/branch pattern at both perturbed points and masked
out of the comparison.
"""

import numpy as np

from devnet.deviation import deviation
from devnet.network import Parameters, forward
from devnet.trainer import batch_loss


def flatten(params: Parameters) -> np.ndarray:
    return np.concatenate([a.ravel() for _, a in params.named_arrays()])


def unflatten(template: Parameters, vec: np.ndarray) -> Parameters:
    pos = 0

    def take(arr):
        nonlocal pos
        chunk = vec[pos:pos + arr.size].reshape(arr.shape).copy()
        pos += arr.size
        return chunk

    hw, hb = [], []
    for w, b in zip(template.hidden_weights, template.hidden_biases):
        hw.append(take(w))
        hb.append(take(b))
    out = take(template.output) if template.output is not None else None
    assert pos == len(vec)
    return Parameters(template.arch, hw, hb, out)


def central_difference(fn, params: Parameters, step: float = 1e-5):
    """Central-difference gradient of ``fn`` at ``params``.

    ``fn`` maps Parameters to (value, pattern); coordinates whose two
    evaluations disagree on the pattern crossed a kink and come back masked
    as invalid.
    """
    base = flatten(params)
    grad = np.empty(len(base))
    valid = np.ones(len(base), dtype=bool)
    for j in range(len(base)):
        shifted = base.copy()
        shifted[j] = base[j] + step
        hi, pat_hi = fn(unflatten(params, shifted))
        shifted[j] = base[j] - step
        lo, pat_lo = fn(unflatten(params, shifted))
        grad[j] = (hi - lo) / (2.0 * step)
        valid[j] = pat_hi == pat_lo
    return grad, valid


def relative_error(analytic: np.ndarray, estimate: np.ndarray, floor: float = 1e-5) -> np.ndarray:
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(estimate)), floor)
    return np.abs(analytic - estimate) / denom


def relu_pattern(cache) -> bytes:
    return b"".join((z > 0).tobytes() for z in cache.pre_activations)


def weighted_score_fn(batch, weights):
    """Scalar objective sum_i weights_i * score_i with its activation pattern."""
    weights = np.asarray(weights, dtype=np.float64)

    def fn(params):
        out, cache = forward(params, batch)
        return float((weights * out).sum()), relu_pattern(cache)

    return fn


def batch_loss_fn(batch, labels, ref, loss_cfg, weight_decay):
    """Regularized batch loss with the pattern of every kinked term."""

    def fn(params):
        loss, _ = batch_loss(params, batch, labels, ref, loss_cfg, weight_decay)
        out, cache = forward(params, batch)
        dev = np.asarray(deviation(out, ref))
        pattern = (relu_pattern(cache)
                   + (dev > 0).tobytes()
                   + (dev < loss_cfg.margin).tobytes())
        return loss, pattern

    return fn


def random_parameters(arch, rng, scale: float = 0.7) -> Parameters:
    """Dense random weights and biases, away from the zero-bias init."""
    hw, hb = [], []
    sizes = (arch.input_dim,) + arch.hidden_sizes
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        hw.append(rng.normal(0.0, scale / np.sqrt(fan_in), size=(fan_in, fan_out)))
        hb.append(rng.normal(0.0, 0.1, size=fan_out))
    out = None if arch.rep_mode else rng.normal(0.0, scale, size=arch.rep_dim + 1)
    return Parameters(arch, hw, hb, out)
