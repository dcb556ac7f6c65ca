"""
Monte Carlo estimate of the exact conditional p-value.

Compositions are drawn uniformly with the stars-and-bars bijection: an
(m-1)-subset of {1, ..., total+m-1} marks the bar positions. Subsets come from
Floyd's algorithm, vectorised across draws, so memory is O(N*m) whatever the
total.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.stats import norm

from .errors import NumericalDegeneracyError, ValidationError
from .exact import DEFAULT_CAP, ConditionalLaw, _check_composition, composition_count, tie_threshold
from .model import nb_logpmf

__all__ = [
    "McConfig",
    "McEstimate",
    "gene_rng",
    "compositions_from_bars",
    "sample_bars",
    "sample_compositions",
    "sample_composition",
    "mc_pvalue",
    "choose_method",
    "wilson_interval",
]

ESTIMATORS = ("indicator", "self_normalized")


@dataclass(frozen=True)
class McConfig:
    n_samples: int = 1000
    seed: int = 0
    estimator: str = "self_normalized"
    ci_level: float = 0.95

    def __post_init__(self):
        if self.n_samples < 1:
            raise ValidationError("n_samples must be >= 1")
        if self.estimator not in ESTIMATORS:
            raise ValidationError(f"estimator must be one of {ESTIMATORS}")
        if not 0 < self.ci_level < 1:
            raise ValidationError("ci_level must lie in (0, 1)")


@dataclass(frozen=True)
class McEstimate:
    p_hat: float
    std_err: float
    ci_low: float
    ci_high: float
    n_samples: int
    estimator: str
    floored: bool = False


def gene_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Independent generator for one gene, keyed only by (seed, stream)."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed) & (2**64 - 1), int(stream)])))


def compositions_from_bars(bars, total: int) -> np.ndarray:
    """Map sorted bar positions b_1 < ... < b_{m-1} in {1..total+m-1} to compositions.

    With b_0 = 0 and b_m = total + m, part i is b_i - b_{i-1} - 1.
    """
    bars = np.atleast_2d(np.asarray(bars, dtype=np.int64))
    m = bars.shape[1] + 1
    n = bars.shape[0]
    full = np.empty((n, m + 1), dtype=np.int64)
    full[:, 0] = 0
    full[:, 1:m] = bars
    full[:, m] = total + m
    return np.diff(full, axis=1) - 1


def sample_bars(total: int, m: int, size: int, rng: np.random.Generator) -> np.ndarray:
    """``size`` uniform (m-1)-subsets of {1, ..., total+m-1}, each sorted ascending."""
    k = m - 1
    n = total + m - 1
    chosen = np.empty((size, k), dtype=np.int64)
    # Floyd: for j = n-k+1..n draw t ~ U{1..j}; keep t unless already taken, else take j.
    for step, j in enumerate(range(n - k + 1, n + 1)):
        t = rng.integers(1, j, endpoint=True, size=size)
        if step:
            taken = (chosen[:, :step] == t[:, None]).any(axis=1)
            t = np.where(taken, j, t)
        chosen[:, step] = t
    chosen.sort(axis=1)
    return chosen


def sample_compositions(total: int, m: int, size: int, rng: np.random.Generator) -> np.ndarray:
    """``size`` compositions drawn uniformly from all m-part compositions of ``total``."""
    if m < 2:
        raise ValidationError("m must be >= 2")
    if total < 0:
        raise ValidationError("total must be >= 0")
    return compositions_from_bars(sample_bars(total, m, size, rng), total)


def sample_composition(total: int, m: int, rng: np.random.Generator) -> tuple[int, ...]:
    return tuple(int(x) for x in sample_compositions(total, m, 1, rng)[0])


def wilson_interval(successes: int, n: int, level: float = 0.95) -> tuple[float, float]:
    z = norm.ppf(0.5 + level / 2)
    p = successes / n
    denom = 1 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    # the bounds are exact at the edges; rounding would leave a 1e-18 gap
    lo = 0.0 if successes == 0 else max(0.0, centre - half)
    hi = 1.0 if successes == n else min(1.0, centre + half)
    return lo, hi


def _joint_logprob(law: ConditionalLaw, comps: np.ndarray) -> np.ndarray:
    lp = np.zeros(comps.shape[0])
    for c, (mu, var) in enumerate(zip(law.means, law.variances)):
        lp += nb_logpmf(comps[:, c], mu, var)
    return lp


def mc_pvalue(
    law: ConditionalLaw,
    observed: Sequence[int],
    cfg: McConfig = McConfig(),
    stream: int = 0,
) -> McEstimate:
    """Estimate the exact p-value from ``cfg.n_samples`` uniform compositions.

    ``indicator`` is the plain fraction of draws no more likely than the
    observed composition, with a Wilson interval. ``self_normalized`` weights
    each draw by its null probability, which targets the probability-weighted
    p-value; its standard error comes from the ratio-estimator delta method.
    Estimates below 1/(N+1) are raised to that floor and flagged.
    """
    observed = _check_composition(law, observed)
    n = cfg.n_samples
    if law.total == 0:
        return McEstimate(1.0, 0.0, 1.0, 1.0, n, cfg.estimator)

    rng = gene_rng(cfg.seed, stream)
    comps = sample_compositions(law.total, law.m, n, rng)
    lp = _joint_logprob(law, comps)
    lp_obs = float(_joint_logprob(law, np.asarray([observed]))[0])
    extreme = lp <= tie_threshold(lp_obs)

    if cfg.estimator == "indicator":
        hits = int(extreme.sum())
        p_hat = hits / n
        se = math.sqrt(p_hat * (1 - p_hat) / n)
        lo, hi = wilson_interval(hits, n, cfg.ci_level)
    else:
        top = lp.max()
        if not np.isfinite(top):
            raise NumericalDegeneracyError(
                "every sampled composition has zero probability; increase n_samples or use the exact test"
            )
        w = np.exp(lp - top)
        w_sum = w.sum()
        p_hat = float(np.sum(w[extreme]) / w_sum)
        resid = extreme - p_hat
        se = float(math.sqrt(np.sum((w * resid) ** 2)) / w_sum)
        z = norm.ppf(0.5 + cfg.ci_level / 2)
        lo, hi = max(0.0, p_hat - z * se), min(1.0, p_hat + z * se)

    floor = 1.0 / (n + 1)
    floored = p_hat < floor
    if floored:
        p_hat = floor
        hi = max(hi, floor)
    lo = min(lo, p_hat)
    hi = max(hi, p_hat)
    return McEstimate(float(p_hat), float(se), float(lo), float(hi), n, cfg.estimator, floored)


def choose_method(total: int, m: int, cap: int | None = DEFAULT_CAP) -> str:
    """'exact' when enumeration fits under ``cap``, otherwise 'monte_carlo'."""
    if cap is None or composition_count(total, m) <= cap:
        return "exact"
    return "monte_carlo"
