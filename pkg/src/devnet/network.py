"""Anomaly scoring network: an MLP with ReLU hidden layers and one linear output unit.

Forward scoring and analytic backpropagation are implemented directly in
numpy for this fixed topology. All arithmetic is float64.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Architecture:
    """Network shape: input width, hidden layer widths, and the output mode.

    With ``rep_mode=True`` the network has no output unit and yields the last
    hidden representation per row instead of a scalar score.
    """

    input_dim: int
    hidden_sizes: tuple[int, ...] = (20,)
    rep_mode: bool = False

    def __post_init__(self):
        object.__setattr__(self, "hidden_sizes", tuple(int(h) for h in self.hidden_sizes))
        if self.input_dim < 1:
            raise ValueError(f"input_dim must be >= 1, got {self.input_dim}")
        if any(h < 1 for h in self.hidden_sizes):
            raise ValueError(f"hidden sizes must be >= 1, got {self.hidden_sizes}")
        if self.rep_mode and not self.hidden_sizes:
            raise ValueError("rep_mode requires at least one hidden layer")

    @property
    def rep_dim(self) -> int:
        """Width of the layer feeding the output unit (the input itself if no hidden layers)."""
        return self.hidden_sizes[-1] if self.hidden_sizes else self.input_dim


@dataclass
class Parameters:
    """Weights of the scoring network.

    ``hidden_weights[i]`` has shape (h_{i-1}, h_i) with h_0 the input width;
    ``output`` is a vector of length rep_dim + 1 whose last entry is the output
    bias, or None in rep_mode. Gradients reuse this layout.
    """

    arch: Architecture
    hidden_weights: list[np.ndarray] = field(repr=False)
    hidden_biases: list[np.ndarray] = field(repr=False)
    output: np.ndarray | None = field(repr=False)

    def __post_init__(self):
        sizes = (self.arch.input_dim,) + self.arch.hidden_sizes
        if len(self.hidden_weights) != len(self.arch.hidden_sizes):
            raise ValueError("hidden layer count does not match architecture")
        for i, (w, b) in enumerate(zip(self.hidden_weights, self.hidden_biases)):
            if w.shape != (sizes[i], sizes[i + 1]) or b.shape != (sizes[i + 1],):
                raise ValueError(
                    f"hidden layer {i} has shape {w.shape}/{b.shape}, "
                    f"expected {(sizes[i], sizes[i + 1])}/{(sizes[i + 1],)}"
                )
        if self.arch.rep_mode:
            if self.output is not None:
                raise ValueError("rep_mode parameters must not carry an output vector")
        elif self.output is None or self.output.shape != (self.arch.rep_dim + 1,):
            raise ValueError(f"output vector must have length {self.arch.rep_dim + 1}")

    def named_arrays(self):
        """Yield (name, array) pairs in a fixed order shared by gradients and optimizer state."""
        for i, (w, b) in enumerate(zip(self.hidden_weights, self.hidden_biases)):
            yield f"hidden[{i}].weight", w
            yield f"hidden[{i}].bias", b
        if self.output is not None:
            yield "output", self.output

    def zeros_like(self) -> "Parameters":
        return map_arrays(np.zeros_like, self)

    def copy(self) -> "Parameters":
        return map_arrays(np.copy, self)


# Gradients share the Parameters layout exactly.
Gradients = Parameters


def map_arrays(fn, *params: Parameters) -> Parameters:
    """Apply ``fn`` elementwise over corresponding arrays of one or more parameter sets."""
    first = params[0]
    for other in params[1:]:
        if other.arch != first.arch:
            raise ValueError("parameter sets have mismatched architectures")
    hw = [fn(*ws) for ws in zip(*(p.hidden_weights for p in params))]
    hb = [fn(*bs) for bs in zip(*(p.hidden_biases for p in params))]
    out = None if first.output is None else fn(*(p.output for p in params))
    return Parameters(first.arch, hw, hb, out)


def glorot_bound(fan_in: int, fan_out: int) -> float:
    return math.sqrt(6.0 / (fan_in + fan_out))


def init_parameters(arch: Architecture, seed) -> Parameters:
    """Glorot-uniform weights, zero biases. Deterministic for a given seed."""
    rng = np.random.default_rng(seed)
    sizes = (arch.input_dim,) + arch.hidden_sizes
    hw, hb = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = glorot_bound(fan_in, fan_out)
        hw.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        hb.append(np.zeros(fan_out))
    if arch.rep_mode:
        output = None
    else:
        m = arch.rep_dim
        bound = glorot_bound(m, 1)
        output = np.append(rng.uniform(-bound, bound, size=m), 0.0)
    return Parameters(arch, hw, hb, output)


@dataclass
class ForwardCache:
    """Per-layer pre/post activations retained for one backward pass."""

    inputs: np.ndarray
    pre_activations: list[np.ndarray]
    activations: list[np.ndarray]

    @property
    def n_rows(self) -> int:
        return self.inputs.shape[0]


def forward(params: Parameters, batch) -> tuple[np.ndarray, ForwardCache]:
    """Score a batch of rows.

    Returns (scores, cache) where scores has shape (n,) in scalar mode or
    (n, rep_dim) in rep_mode. The cache feeds ``backward``.
    """
    x = np.asarray(batch, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError(f"batch must be 2-D, got shape {x.shape}")
    if x.shape[1] != params.arch.input_dim:
        raise ValueError(
            f"batch has {x.shape[1]} columns, network expects {params.arch.input_dim}"
        )
    a = x
    pre, post = [], []
    for w, b in zip(params.hidden_weights, params.hidden_biases):
        z = a @ w + b
        a = np.maximum(z, 0.0)
        pre.append(z)
        post.append(a)
    cache = ForwardCache(x, pre, post)
    if params.arch.rep_mode:
        return a, cache
    scores = a @ params.output[:-1] + params.output[-1]
    return scores, cache


def score(params: Parameters, x) -> float | np.ndarray:
    """Score a single row. Equivalent to ``forward`` on a 1-row batch."""
    row = np.asarray(x, dtype=np.float64)
    if row.ndim != 1:
        raise ValueError(f"expected a single feature row, got shape {row.shape}")
    out, _ = forward(params, row[np.newaxis, :])
    if params.arch.rep_mode:
        return out[0]
    return float(out[0])


def backward(params: Parameters, cache: ForwardCache, dscore) -> Gradients:
    """Backpropagate d(sum_i dscore[i] * score_i)/dTheta through the cached pass.

    ``dscore`` has shape (n,) in scalar mode or (n, rep_dim) in rep_mode. The
    ReLU subgradient at exactly zero is taken as zero.
    """
    arch = params.arch
    d = np.asarray(dscore, dtype=np.float64)
    n = cache.n_rows
    if len(cache.pre_activations) != len(arch.hidden_sizes):
        raise ValueError("cache does not match the network architecture")
    expected = (n, arch.rep_dim) if arch.rep_mode else (n,)
    if d.shape != expected:
        raise ValueError(f"dscore has shape {d.shape}, expected {expected}")

    n_hidden = len(arch.hidden_sizes)
    grad_w: list[np.ndarray] = [None] * n_hidden
    grad_b: list[np.ndarray] = [None] * n_hidden

    if arch.rep_mode:
        grad_out = None
        delta = d * (cache.pre_activations[-1] > 0)
    else:
        last = cache.activations[-1] if n_hidden else cache.inputs
        grad_out = np.append(last.T @ d, d.sum())
        delta = None
        if n_hidden:
            delta = np.outer(d, params.output[:-1]) * (cache.pre_activations[-1] > 0)

    for i in range(n_hidden - 1, -1, -1):
        prev = cache.activations[i - 1] if i > 0 else cache.inputs
        grad_w[i] = prev.T @ delta
        grad_b[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ params.hidden_weights[i].T) * (cache.pre_activations[i - 1] > 0)

    return Parameters(arch, grad_w, grad_b, grad_out)
