"""Ranking metrics, the paired Wilcoxon signed-rank test, and run aggregation.

AUC-ROC uses the rank (Mann-Whitney) formulation with half credit for tied
scores. Average precision breaks score ties by stable input order, which is
the documented convention for tied rankings here.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError
from .interpret import normal_cdf


@dataclass(frozen=True)
class RankingMetrics:
    auc_roc: float
    auc_pr: float

    def as_dict(self) -> dict[str, float]:
        return {"auc_roc": self.auc_roc, "auc_pr": self.auc_pr}


def _tied_ranks(values: np.ndarray) -> np.ndarray:
    """1-based ranks with ties assigned the group average (midranks)."""
    order = np.argsort(values, kind="stable")
    sorted_vals = values[order]
    boundaries = np.flatnonzero(np.diff(sorted_vals)) + 1
    starts = np.concatenate([[0], boundaries])
    ends = np.concatenate([boundaries, [len(values)]])
    avg = (starts + ends + 1) / 2.0
    ranks = np.empty(len(values))
    ranks[order] = np.repeat(avg, ends - starts)
    return ranks


def auc_roc(scores, labels) -> float:
    """Probability a random positive outscores a random negative, ties worth 0.5.

    Computed from midranks, which is exactly the pairwise Mann-Whitney count.
    """
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    if s.shape != y.shape or s.ndim != 1:
        raise ValueError("scores and labels must be 1-D and the same length")
    n_pos = int((y == 1).sum())
    n_neg = int((y == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise DataError("auc_roc is undefined when only one class is present")
    ranks = _tied_ranks(s)
    pos_rank_sum = float(ranks[y == 1].sum())
    return (pos_rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def average_precision(scores, labels) -> float:
    """Mean precision at each positive's rank, scores sorted descending.

    Ties are broken by input order (stable sort), so the result is
    order-sensitive when scores tie.
    """
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    if s.shape != y.shape or s.ndim != 1:
        raise ValueError("scores and labels must be 1-D and the same length")
    n_pos = int((y == 1).sum())
    if n_pos == 0:
        raise DataError("average_precision is undefined without positives")
    order = np.argsort(-s, kind="stable")
    hits = (y[order] == 1)
    cum_pos = np.cumsum(hits)
    ranks = np.arange(1, len(s) + 1)
    return float((cum_pos[hits] / ranks[hits]).sum() / n_pos)


def ranking_metrics(scores, labels) -> RankingMetrics:
    return RankingMetrics(auc_roc(scores, labels), average_precision(scores, labels))


EXACT_LIMIT = 20


def wilcoxon_signed_rank(a, b) -> float:
    """Two-sided p-value of the paired Wilcoxon signed-rank test.

    Zero differences are dropped. Up to 20 pairs the null distribution is
    enumerated exactly over all sign assignments of the observed midranks;
    beyond that a normal approximation with tie and continuity corrections
    is used. The two-sided p is twice the smaller tail, capped at 1.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("paired samples must be 1-D and the same length")
    diff = a - b
    diff = diff[diff != 0]
    if len(diff) == 0:
        raise DataError("all differences are zero; the test is degenerate")
    n = len(diff)
    if n < 5:
        raise DataError(f"need >= 5 non-zero differences, got {n}")
    ranks = _tied_ranks(np.abs(diff))
    w_pos = float(ranks[diff > 0].sum())

    if n <= EXACT_LIMIT:
        # All 2^n subset sums of the midranks; midranks are multiples of 0.5,
        # so the sums are exact in float64.
        sums = np.zeros(1)
        for r in ranks:
            sums = np.concatenate([sums, sums + r])
        p_low = float((sums <= w_pos).mean())
        p_high = float((sums >= w_pos).mean())
        return min(1.0, 2.0 * min(p_low, p_high))

    mean = n * (n + 1) / 4.0
    var = n * (n + 1) * (2 * n + 1) / 24.0
    _, counts = np.unique(np.abs(diff), return_counts=True)
    var -= float((counts**3 - counts).sum()) / 48.0
    shift = 0.5 if w_pos > mean else (-0.5 if w_pos < mean else 0.0)
    z = (w_pos - mean - shift) / np.sqrt(var)
    return min(1.0, 2.0 * (1.0 - normal_cdf(abs(z))))


@dataclass
class RunAggregate:
    """Per-run metric dictionaries with their mean and sample standard deviation."""

    runs: list[dict[str, float]]
    seeds: list[int]
    mean: dict[str, float]
    std: dict[str, float]


def aggregate_runs(run_fn, n_runs: int = 10, base_seed: int = 0) -> RunAggregate:
    """Execute ``run_fn(seed)`` for consecutive seeds and aggregate its metrics.

    ``run_fn`` returns a mapping of metric name to value. The std is the
    sample (n-1) standard deviation, 0.0 for a single run.
    """
    if n_runs < 1:
        raise ConfigError(f"n_runs must be >= 1, got {n_runs}")
    runs, seeds = [], []
    for seed in range(base_seed, base_seed + n_runs):
        try:
            result = run_fn(seed)
        except Exception as exc:
            raise type(exc)(f"run with seed {seed} failed: {exc}") from exc
        runs.append(dict(result))
        seeds.append(seed)
    keys = list(runs[0])
    mean = {k: float(np.mean([r[k] for r in runs])) for k in keys}
    if n_runs == 1:
        std = {k: 0.0 for k in keys}
    else:
        std = {k: float(np.std([r[k] for r in runs], ddof=1)) for k in keys}
    return RunAggregate(runs, seeds, mean, std)


def scalability_sweep(
    sizes=None,
    dims=None,
    fixed_size: int = 5000,
    fixed_dim: int = 1000,
    n_epochs: int = 3,
    batch_size: int = 512,
    contamination: float = 0.02,
    n_labeled: int = 30,
    seed: int = 0,
    csv_path=None,
) -> list[tuple[int, int, float]]:
    """Wall time of train-plus-score on synthetic data along one axis.

    Exactly one of ``sizes`` (data sizes at ``fixed_dim``) or ``dims``
    (dimensionalities at ``fixed_size``) must be given, with at least three
    points. Each epoch makes one full pass over the data (batch count scales
    with data size), so both sweeps probe the linear cost model. One warm-up
    run on the smallest point is excluded from timing.
    """
    from . import trainer as trainer_mod
    from .data import synth_gaussian

    if (sizes is None) == (dims is None):
        raise ConfigError("pass exactly one of sizes or dims")
    axis = [int(v) for v in (sizes if sizes is not None else dims)]
    if len(axis) < 3:
        raise ConfigError(f"need at least 3 sweep points, got {len(axis)}")
    points = [(v, fixed_dim) if sizes is not None else (fixed_size, v) for v in axis]

    def run_point(n, d, run_seed):
        n_anom = max(n_labeled + 1, int(round(contamination * n)))
        ds = synth_gaussian(n - n_anom, n_anom, d, separation=3.0, seed=run_seed)
        labeled, remainder = ds.features[-n_labeled:], ds.features[: n - n_labeled]
        ts = trainer_mod.TrainingSet(remainder, labeled)
        arch = trainer_mod.architecture_for_variant("def", d)
        cfg = trainer_mod.TrainConfig(
            n_epochs=n_epochs,
            n_batches=max(1, -(-len(remainder) // batch_size)),
            batch_size=batch_size,
            seed=run_seed,
        )
        start = time.perf_counter()
        model = trainer_mod.train(ts, arch, cfg)
        trainer_mod.predict(model, ds.features)
        return time.perf_counter() - start

    smallest = min(points, key=lambda p: p[0] * p[1])
    run_point(*smallest, seed)  # warm-up, untimed

    rows = []
    for n, d in points:
        rows.append((n, d, run_point(n, d, seed)))

    if csv_path is not None:
        with open(csv_path, "w", encoding="utf-8") as fh:
            fh.write("n,d,wall_seconds\n")
            for n, d, secs in rows:
                fh.write(f"{n},{d},{secs!r}\n")
    return rows
