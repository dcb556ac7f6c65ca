"""
FDR control, the pooled pairwise baseline, and the significance rule.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .engine import analyze_gene
from .errors import ValidationError
from .model import CountMatrix, DispersionModel, SampleMeta

__all__ = [
    "OMNIBUS",
    "PvalueSet",
    "SignificanceCall",
    "bh_adjust",
    "pooled_pairwise_adjust",
    "run_pairwise_baseline",
    "pair_label",
    "normalized_condition_means",
    "max_fold_change",
    "call_significance",
]

OMNIBUS = "omnibus"


def pair_label(a: str, b: str) -> str:
    return f"{a} vs {b}"


@dataclass(frozen=True)
class PvalueSet:
    """Flat table of (gene, comparison, raw p[, adjusted p]) entries."""

    gene_ids: tuple[str, ...]
    comparisons: tuple[str, ...]
    pvalues: np.ndarray
    adjusted: np.ndarray | None = None

    def __post_init__(self):
        p = np.asarray(self.pvalues, dtype=float)
        if not (len(self.gene_ids) == len(self.comparisons) == p.size):
            raise ValidationError("gene_ids, comparisons and pvalues must align")
        if np.any((p < 0) | (p > 1)) or np.any(np.isnan(p)):
            raise ValidationError("p-values must lie in [0, 1]")
        object.__setattr__(self, "gene_ids", tuple(self.gene_ids))
        object.__setattr__(self, "comparisons", tuple(self.comparisons))
        object.__setattr__(self, "pvalues", p)
        if self.adjusted is not None:
            object.__setattr__(self, "adjusted", np.asarray(self.adjusted, dtype=float))

    def __len__(self):
        return self.pvalues.size

    def lookup(self, adjusted: bool = True) -> dict[tuple[str, str], float]:
        vals = self.adjusted if adjusted else self.pvalues
        return {(g, c): float(v) for g, c, v in zip(self.gene_ids, self.comparisons, vals)}

    def min_by_gene(self, adjusted: bool = True) -> dict[str, float]:
        vals = self.adjusted if adjusted else self.pvalues
        out: dict[str, float] = {}
        for g, v in zip(self.gene_ids, vals):
            out[g] = min(out.get(g, np.inf), float(v))
        return out


@dataclass(frozen=True)
class SignificanceCall:
    gene_id: str
    max_fold_change: float
    adj_p: float
    significant: bool


def bh_adjust(pvalues) -> np.ndarray:
    """Benjamini-Hochberg step-up adjusted p-values, in input order."""
    p = np.asarray(pvalues, dtype=float)
    if p.ndim != 1:
        raise ValidationError("bh_adjust expects a 1-d vector")
    if np.any(np.isnan(p)) or np.any((p < 0) | (p > 1)):
        raise ValidationError("p-values must lie in [0, 1]")
    n = p.size
    if n == 0:
        return p.copy()
    order = np.argsort(p, kind="stable")
    # n / rank >= 1, so rounding cannot push an adjusted value below its raw p
    scaled = p[order] * (n / np.arange(1, n + 1))
    adj_sorted = np.minimum.accumulate(scaled[::-1])[::-1]
    out = np.empty(n)
    out[order] = np.minimum(adj_sorted, 1.0)
    return out


def pooled_pairwise_adjust(sets: PvalueSet) -> PvalueSet:
    """One-step pooled adjustment: BH over all pairwise p-values together.

    Each adjusted value stays attached to its (gene, comparison) entry.
    """
    return PvalueSet(sets.gene_ids, sets.comparisons, sets.pvalues, bh_adjust(sets.pvalues))


def run_pairwise_baseline(
    counts: CountMatrix,
    meta: SampleMeta,
    disp: DispersionModel,
    normalize: bool = True,
) -> PvalueSet:
    """Two-condition exact test for every pair of conditions.

    Each pair is refitted on its own samples, as running a two-condition
    analysis per pair would. Returns C(m, 2) * n_genes entries ordered by pair,
    then gene.
    """
    if list(meta.samples) != list(counts.samples):
        raise ValidationError("sample order of counts and metadata differ")
    genes, comps, pvals = [], [], []
    for a, b in itertools.combinations(meta.conditions, 2):
        sub_meta, keep = meta.restrict((a, b))
        sub = counts.counts[:, keep]
        label = pair_label(a, b)
        for i, g in enumerate(counts.genes):
            res = analyze_gene(sub[i], sub_meta, disp, normalize=normalize, cap=None)
            genes.append(g)
            comps.append(label)
            pvals.append(res.p_raw)
    return PvalueSet(tuple(genes), tuple(comps), np.asarray(pvals))


def normalized_condition_means(counts_row, meta: SampleMeta) -> np.ndarray:
    """Mean of size-factor-normalised counts within each condition."""
    k = np.asarray(counts_row, dtype=float) / meta.size_factors
    return np.array([k[meta.mask(c)].mean() for c in meta.conditions])


def max_fold_change(means: Sequence[float], pseudocount: float = 0.5) -> float:
    """Largest larger/smaller ratio over all pairs of condition means.

    A pair with a zero mean gets ``pseudocount`` added to both sides; two zero
    means give ratio 1.
    """
    best = 1.0
    for x, y in itertools.combinations([float(v) for v in means], 2):
        hi, lo = max(x, y), min(x, y)
        if lo == 0:
            hi, lo = hi + pseudocount, lo + pseudocount
        best = max(best, hi / lo)
    return best


def call_significance(
    gene_ids: Sequence[str],
    adj_p,
    fold_changes,
    fc_threshold: float | None = 4.0,
    alpha: float = 0.05,
) -> list[SignificanceCall]:
    """Significant iff adj_p < alpha and (when a threshold is given) fold change >= threshold.

    For the pairwise pipeline pass the per-gene minimum adjusted pairwise p.
    NaN adjusted p-values (skipped genes) are never significant.
    """
    calls = []
    for g, p, fc in zip(gene_ids, adj_p, fold_changes):
        p, fc = float(p), float(fc)
        sig = bool(p < alpha) and (fc_threshold is None or fc >= fc_threshold)
        calls.append(SignificanceCall(str(g), fc, p, sig))
    return calls
