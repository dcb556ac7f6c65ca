"""Per-gene test dispatch shared by the omnibus pipeline and the pairwise baseline."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exact import DEFAULT_CAP, ConditionalLaw, exact_pvalue
from .model import DispersionModel, GeneModel, SampleMeta, fit_gene
from .montecarlo import McConfig, choose_method, mc_pvalue

__all__ = ["GeneResult", "analyze_gene"]


@dataclass(frozen=True)
class GeneResult:
    model: GeneModel
    method: str
    p_raw: float
    std_err: float = float("nan")
    ci_low: float = float("nan")
    ci_high: float = float("nan")
    floored: bool = False


def analyze_gene(
    counts_row,
    meta: SampleMeta,
    disp: DispersionModel,
    *,
    normalize: bool = True,
    cap: int | None = DEFAULT_CAP,
    mc: McConfig = McConfig(),
    stream: int = 0,
    force_method: str | None = None,
) -> GeneResult:
    """Fit one gene and compute its conditional p-value, exact or Monte Carlo.

    All-zero genes short-circuit to p = 1. ``stream`` keys the gene's random
    stream so results do not depend on evaluation order.
    """
    gm = fit_gene(np.asarray(counts_row), meta, disp, normalize)
    if gm.total == 0:
        return GeneResult(gm, "exact", 1.0)
    law = ConditionalLaw.from_gene(gm)
    method = force_method or choose_method(gm.total, meta.m, cap)
    if method == "exact":
        return GeneResult(gm, "exact", exact_pvalue(law, gm.totals, cap=None))
    est = mc_pvalue(law, gm.totals, mc, stream=stream)
    return GeneResult(gm, "monte_carlo", est.p_hat, est.std_err, est.ci_low, est.ci_high, est.floored)
