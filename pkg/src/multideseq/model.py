"""
Negative-binomial count model for multi-condition differential expression.

Holds the count/sample containers, size factors, the raw-variance function,
the pooled expression estimate and the per-condition moments derived from it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numba import njit
from scipy.special import betaln, gammaln

from .errors import DimensionError, InvalidDispersionError, ValidationError

__all__ = [
    "CountMatrix",
    "SampleMeta",
    "DispersionModel",
    "GeneModel",
    "library_size_factors",
    "median_ratio_size_factors",
    "pooled_q0",
    "condition_moments",
    "nb_logpmf",
    "nb_pmf",
    "nb_log_table",
    "fit_gene",
]


@dataclass(frozen=True)
class CountMatrix:
    """Integer read counts, one row per gene and one column per sample."""

    genes: tuple[str, ...]
    samples: tuple[str, ...]
    counts: np.ndarray

    def __post_init__(self):
        genes = tuple(str(g) for g in self.genes)
        samples = tuple(str(s) for s in self.samples)
        counts = np.asarray(self.counts)
        if counts.size == 0:
            counts = counts.reshape(len(genes), len(samples))
        if counts.ndim != 2 or counts.shape != (len(genes), len(samples)):
            raise DimensionError(
                f"counts shape {counts.shape} does not match "
                f"{len(genes)} genes x {len(samples)} samples"
            )
        if counts.size and not np.all(np.isfinite(counts)):
            raise ValidationError("counts must be finite")
        if counts.size and (np.any(counts < 0) or np.any(counts != np.round(counts))):
            raise ValidationError("counts must be nonnegative integers")
        if len(set(genes)) != len(genes):
            raise ValidationError("duplicate gene identifiers")
        if len(set(samples)) != len(samples):
            raise ValidationError("duplicate sample identifiers")
        counts = counts.astype(np.int64)
        counts.setflags(write=False)
        object.__setattr__(self, "genes", genes)
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "counts", counts)

    @property
    def n_genes(self) -> int:
        return len(self.genes)

    @property
    def n_samples(self) -> int:
        return len(self.samples)

    def totals(self) -> np.ndarray:
        """Per-gene total count over all samples."""
        return self.counts.sum(axis=1)

    def select_samples(self, samples: Sequence[str]) -> "CountMatrix":
        idx = [self.samples.index(s) for s in samples]
        return CountMatrix(self.genes, tuple(samples), self.counts[:, idx])


@dataclass(frozen=True)
class SampleMeta:
    """Size factor and condition label of every sample.

    ``conditions`` fixes the order A_1, ..., A_m used everywhere downstream
    (composition coordinates, output columns). When omitted it is the order of
    first appearance in ``condition_of``.
    """

    samples: tuple[str, ...]
    size_factors: np.ndarray
    condition_of: tuple[str, ...]
    conditions: tuple[str, ...] = ()

    def __post_init__(self):
        samples = tuple(str(s) for s in self.samples)
        labels = tuple(str(c) for c in self.condition_of)
        sf = np.asarray(self.size_factors, dtype=float)
        if sf.shape != (len(samples),) or len(labels) != len(samples):
            raise DimensionError("size_factors and condition_of must have one entry per sample")
        if not np.all(np.isfinite(sf)) or np.any(sf <= 0):
            raise ValidationError("size factors must be finite and > 0")
        conditions = tuple(str(c) for c in self.conditions) or tuple(dict.fromkeys(labels))
        if len(set(conditions)) != len(conditions):
            raise ValidationError("duplicate condition labels")
        unknown = set(labels) - set(conditions)
        if unknown:
            raise ValidationError(f"samples mapped to undeclared conditions: {sorted(unknown)}")
        empty = [c for c in conditions if c not in labels]
        if empty:
            raise ValidationError(f"conditions without samples: {empty}")
        if len(conditions) < 2:
            raise ValidationError("at least two conditions are required")
        sf.setflags(write=False)
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "size_factors", sf)
        object.__setattr__(self, "condition_of", labels)
        object.__setattr__(self, "conditions", conditions)

    @property
    def m(self) -> int:
        return len(self.conditions)

    def mask(self, condition: str) -> np.ndarray:
        if condition not in self.conditions:
            raise ValidationError(f"unknown condition {condition!r}")
        return np.array([c == condition for c in self.condition_of])

    def restrict(self, conditions: Sequence[str]) -> tuple["SampleMeta", np.ndarray]:
        """Keep only samples in ``conditions``; also returns the column index used."""
        keep = np.flatnonzero([c in conditions for c in self.condition_of])
        meta = SampleMeta(
            tuple(self.samples[j] for j in keep),
            self.size_factors[keep],
            tuple(self.condition_of[j] for j in keep),
            tuple(c for c in self.conditions if c in conditions),
        )
        return meta, keep


@dataclass(frozen=True)
class DispersionModel:
    """Raw-variance function nu(q) giving the extra-Poisson variance.

    kinds:
      ``constant_cv2``  nu(q) = alpha * q**2
      ``power``         nu(q) = alpha * q**beta
      ``table``         linear interpolation through (q_grid, nu_grid),
                        constant beyond the ends
    """

    kind: str = "constant_cv2"
    alpha: float = 0.1
    beta: float = 2.0
    q_grid: tuple[float, ...] = field(default=())
    nu_grid: tuple[float, ...] = field(default=())

    def __post_init__(self):
        if self.kind not in ("constant_cv2", "power", "table"):
            raise ValidationError(f"unknown dispersion kind {self.kind!r}")
        if self.kind == "table":
            q = np.asarray(self.q_grid, dtype=float)
            v = np.asarray(self.nu_grid, dtype=float)
            if q.size == 0 or q.shape != v.shape:
                raise ValidationError("table dispersion needs equal-length, nonempty grids")
            if np.any(np.diff(q) <= 0):
                raise ValidationError("table q_grid must be strictly increasing")
            if np.any(v < 0) or not np.all(np.isfinite(v)):
                raise ValidationError("table nu values must be finite and >= 0")
        else:
            if not np.isfinite(self.alpha) or self.alpha < 0:
                raise ValidationError("alpha must be >= 0")
            if self.kind == "power" and (not np.isfinite(self.beta) or self.beta <= 0):
                raise ValidationError("beta must be > 0")

    @classmethod
    def poisson(cls) -> "DispersionModel":
        return cls("constant_cv2", alpha=0.0)

    def __call__(self, q):
        q = np.asarray(q, dtype=float)
        if self.kind == "constant_cv2":
            out = self.alpha * q * q
        elif self.kind == "power":
            out = self.alpha * np.power(q, self.beta)
        else:
            out = np.interp(q, self.q_grid, self.nu_grid)
        return out if out.ndim else float(out)

    def describe(self) -> str:
        if self.kind == "constant_cv2":
            return f"constant_cv2:{self.alpha!r}"
        if self.kind == "power":
            return f"power:{self.alpha!r},{self.beta!r}"
        return f"table:{len(self.q_grid)} points"


@dataclass(frozen=True)
class GeneModel:
    q0_hat: float
    totals: tuple[int, ...]
    mu_hat: tuple[float, ...]
    var_hat: tuple[float, ...]

    @property
    def total(self) -> int:
        return int(sum(self.totals))


def library_size_factors(counts: CountMatrix) -> np.ndarray:
    """Library sizes scaled to geometric mean one."""
    lib = counts.counts.sum(axis=0).astype(float)
    if np.any(lib <= 0):
        raise ValidationError("library-size factors need every sample to have reads")
    return lib / np.exp(np.mean(np.log(lib)))


def median_ratio_size_factors(counts: CountMatrix) -> np.ndarray:
    """Median-of-ratios size factors over genes with no zero count."""
    k = counts.counts.astype(float)
    usable = np.all(k > 0, axis=1)
    if not np.any(usable):
        raise ValidationError("median-of-ratios needs at least one gene with no zero counts")
    logk = np.log(k[usable])
    log_geo = logk.mean(axis=1, keepdims=True)
    return np.exp(np.median(logk - log_geo, axis=0))


def pooled_q0(counts_row, meta: SampleMeta, normalize: bool = True) -> float:
    """Pooled expression estimate sum_j k_j / s_j, averaged over samples if ``normalize``."""
    k = np.asarray(counts_row, dtype=float)
    if k.shape != meta.size_factors.shape:
        raise DimensionError(
            f"counts row has {k.size} entries but there are {meta.size_factors.size} samples"
        )
    q = float(np.sum(k / meta.size_factors))
    return q / k.size if normalize else q


def condition_moments(q0_hat: float, meta: SampleMeta, disp: DispersionModel, condition: str):
    """Null mean and variance of the total count of ``condition``.

    Returns ``(mu_hat, var_hat)`` with ``var_hat >= mu_hat``; the variance is
    built as ``mu_hat + sum s_j**2 * nu(q0)`` so the bound holds exactly in
    floating point.
    """
    if q0_hat < 0:
        raise ValidationError("q0_hat must be >= 0")
    s = meta.size_factors[meta.mask(condition)]
    if q0_hat == 0:
        return 0.0, 0.0
    mu = float(np.sum(s) * q0_hat)
    extra = float(np.sum(s * s) * disp(q0_hat))
    return mu, mu + extra


_STIRLING_MIN = 10.0


def _stirling_tail(x):
    # log Gamma(x) minus its Stirling approximation, |error| < 1e-12 for x >= 10
    x2 = x * x
    return (1.0 / 12.0 - (1.0 / 360.0 - (1.0 / 1260.0 - 1.0 / (1680.0 * x2)) / x2) / x2) / x


def _log_rising(r, k):
    """log Gamma(r + k) - log Gamma(r) for r >= 10 and r + k >= 10."""
    rk = r + k
    return (r - 0.5) * np.log1p(k / r) + k * np.log(rk) - k + _stirling_tail(rk) - _stirling_tail(r)


def nb_logpmf(k, mean: float, variance: float):
    """Log pmf of the negative binomial with the given mean and variance.

    ``variance == mean`` falls back to the Poisson pmf and ``mean == 0`` is the
    point mass at zero. Vectorised over ``k``.
    """
    if variance < mean:
        raise InvalidDispersionError(f"variance {variance!r} < mean {mean!r}")
    k = np.asarray(k, dtype=float)
    if mean <= 0:
        out = np.where(k == 0, 0.0, -np.inf)
        return out if out.ndim else float(out)
    excess = variance - mean
    if excess == 0:
        out = k * np.log(mean) - mean - gammaln(k + 1.0)
        return out if out.ndim else float(out)
    # r = mean**2 / excess, success probability mean / variance
    r = mean * mean / excess
    log_p = -math.log1p(excess / mean)
    log_1mp = math.log(excess / variance)
    # log C(k + r - 1, k); when r or k is large the lgamma differences cancel
    # badly, so expand the larger argument's gamma ratio directly
    with np.errstate(all="ignore"):
        big_k = (k >= _STIRLING_MIN) & (k >= r)
        log_binom = np.where(
            big_k,
            _log_rising(k + 1.0, r - 1.0) - gammaln(r),
            _log_rising(r, k) - gammaln(k + 1.0) if r >= _STIRLING_MIN else -betaln(r, k + 1.0) - np.log(r + k),
        )
    out = log_binom + r * log_p + np.where(k == 0, 0.0, k * log_1mp)
    return out if out.ndim else float(out)


def nb_pmf(k, mean: float, variance: float):
    return np.exp(nb_logpmf(k, mean, variance))


_ANCHOR_STRIDE = 4096


@njit(cache=True, nogil=True)
def _fill_between_anchors(out, stride, r, log_step):
    # pmf(j) / pmf(j-1) = (j - 1 + r) / j * (1 - p); r < 0 flags the Poisson ratio mean / j
    n = out.shape[0]
    for start in range(0, n, stride):
        acc = out[start]
        comp = 0.0
        for j in range(start + 1, min(start + stride, n)):
            if r < 0.0:
                inc = log_step - math.log(j)
            else:
                inc = math.log((j - 1.0 + r) / j) + log_step
            y = inc - comp
            t = acc + y
            comp = (t - acc) - y
            acc = t
            out[j] = acc


def nb_log_table(upto: int, mean: float, variance: float) -> np.ndarray:
    """``nb_logpmf`` at 0..upto, via the pmf ratio recurrence between exact anchors.

    Same values as the direct formula to ~1e-12 relative, several times faster
    for long tables.
    """
    if variance < mean:
        raise InvalidDispersionError(f"variance {variance!r} < mean {mean!r}")
    n = int(upto) + 1
    if mean <= 0 or n <= _ANCHOR_STRIDE:
        return np.asarray(nb_logpmf(np.arange(n), mean, variance), dtype=float).reshape(n)
    out = np.empty(n)
    anchors = np.arange(0, n, _ANCHOR_STRIDE)
    out[anchors] = nb_logpmf(anchors, mean, variance)
    excess = variance - mean
    if excess == 0:
        _fill_between_anchors(out, _ANCHOR_STRIDE, -1.0, math.log(mean))
    else:
        _fill_between_anchors(out, _ANCHOR_STRIDE, mean * mean / excess, math.log(excess / variance))
    return out


def fit_gene(
    counts_row,
    meta: SampleMeta,
    disp: DispersionModel,
    normalize: bool = True,
) -> GeneModel:
    """Fit the null model of one gene: pooled q0, per-condition totals and moments."""
    k = np.asarray(counts_row, dtype=np.int64)
    q0 = pooled_q0(k, meta, normalize)
    totals, mus, vars_ = [], [], []
    for cond in meta.conditions:
        totals.append(int(k[meta.mask(cond)].sum()))
        mu, var = condition_moments(q0, meta, disp, cond)
        mus.append(mu)
        vars_.append(var)
    return GeneModel(q0, tuple(totals), tuple(mus), tuple(vars_))
