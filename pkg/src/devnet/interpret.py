"""Score interpretation under the Gaussian prior.

Because training anchors normal scores at the prior, a raw score converts
directly into a tail probability, and a desired confidence level converts
into a score threshold.
"""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass

from .deviation import PriorConfig

_SQRT2 = math.sqrt(2.0)


def normal_cdf(z: float) -> float:
    """Standard normal CDF via the complementary error function."""
    return 0.5 * math.erfc(-z / _SQRT2)


def normal_quantile(p: float) -> float:
    """Inverse standard normal CDF for p in (0, 1)."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must be in (0, 1), got {p}")
    return statistics.NormalDist().inv_cdf(p)


@dataclass(frozen=True)
class Interpretation:
    """A score with its prior Z-value and Gaussian tail probabilities."""

    score: float
    z: float
    two_sided_p: float
    upper_tail_p: float


def score_to_probability(score: float, prior: PriorConfig = PriorConfig()) -> Interpretation:
    """Tail probabilities of ``score`` under the prior.

    ``upper_tail_p`` is P(X >= score) for X ~ N(mu, sigma^2); ``two_sided_p``
    is the probability of falling at least |z| prior deviations from the mean
    on either side. Both are computed through erfc, so they stay accurate far
    into the tails.
    """
    z = (score - prior.mu) / prior.sigma
    upper_tail = 0.5 * math.erfc(z / _SQRT2)
    two_sided = math.erfc(abs(z) / _SQRT2)
    return Interpretation(score=float(score), z=z, two_sided_p=two_sided,
                          upper_tail_p=upper_tail)


def threshold_for_confidence(p: float, prior: PriorConfig = PriorConfig()) -> float:
    """Score above which objects have upper-tail probability at most 1 - p.

    Requires 0.5 < p < 1 so the threshold sits above the prior mean.
    """
    if not 0.5 < p < 1.0:
        raise ValueError(f"confidence level must be in (0.5, 1), got {p}")
    return prior.mu + prior.sigma * normal_quantile(p)
