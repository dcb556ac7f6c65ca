"""
End-to-end omnibus and pairwise pipelines: configuration, per-gene dispatch,
FDR adjustment, fold changes, significance calls and result files.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .engine import analyze_gene
from .errors import MultiDESeqError, ValidationError
from .exact import DEFAULT_CAP
from .ingest import format_float, load_conditions, load_counts, load_size_factors, write_table
from .model import (
    CountMatrix,
    DispersionModel,
    SampleMeta,
    library_size_factors,
    median_ratio_size_factors,
)
from .montecarlo import ESTIMATORS, McConfig
from .multitest import (
    bh_adjust,
    call_significance,
    max_fold_change,
    normalized_condition_means,
    pooled_pairwise_adjust,
    run_pairwise_baseline,
)

__all__ = ["RunConfig", "OmnibusResult", "build_meta", "run_omnibus", "run_pipeline", "run_pairwise_pipeline"]

SIZE_FACTOR_MODES = ("library_size", "median_ratios", "file")


@dataclass(frozen=True)
class RunConfig:
    counts_path: str | None = None
    conditions_path: str | None = None
    output_path: str | None = None
    dispersion: DispersionModel = field(default_factory=DispersionModel)
    size_factors: str = "library_size"
    size_factor_path: str | None = None
    normalize: bool = True
    estimator: str = "self_normalized"
    mc_samples: int = 1000
    ci_level: float = 0.95
    seed: int = 0
    cap: int | None = DEFAULT_CAP
    force_method: str | None = None
    alpha: float = 0.05
    fc_threshold: float = 4.0
    use_fold_change: bool = True
    threads: int = 1

    def __post_init__(self):
        if self.size_factors not in SIZE_FACTOR_MODES:
            raise ValidationError(f"size_factors must be one of {SIZE_FACTOR_MODES}")
        if self.size_factors == "file" and not self.size_factor_path:
            raise ValidationError("size_factors='file' needs size_factor_path")
        if self.estimator not in ESTIMATORS:
            raise ValidationError(f"estimator must be one of {ESTIMATORS}")
        if self.mc_samples < 1:
            raise ValidationError("mc_samples must be >= 1")
        if not 0 < self.alpha < 1:
            raise ValidationError("alpha must lie in (0, 1)")
        if self.fc_threshold <= 0:
            raise ValidationError("fc_threshold must be > 0")
        if self.cap is not None and self.cap < 1:
            raise ValidationError("cap must be >= 1")
        if self.threads < 1:
            raise ValidationError("threads must be >= 1")
        if self.force_method not in (None, "exact", "monte_carlo"):
            raise ValidationError("force_method must be exact, monte_carlo or unset")

    @property
    def mc(self) -> McConfig:
        return McConfig(self.mc_samples, self.seed, self.estimator, self.ci_level)

    def echo(self) -> dict:
        d = asdict(self)
        d["dispersion"] = self.dispersion.describe()
        return d


@dataclass
class OmnibusResult:
    conditions: tuple[str, ...]
    rows: list[dict]

    @property
    def n_significant(self) -> int:
        return sum(bool(r["significant"]) for r in self.rows)


def build_meta(counts: CountMatrix, conditions: dict[str, str], cfg: RunConfig) -> SampleMeta:
    """Sample metadata in count-table column order, with size factors per ``cfg``."""
    missing = [s for s in counts.samples if s not in conditions]
    if missing:
        raise ValidationError(f"samples without a condition: {missing}")
    order = tuple(dict.fromkeys(conditions[s] for s in conditions if s in counts.samples))
    if cfg.size_factors == "library_size":
        sf = library_size_factors(counts)
    elif cfg.size_factors == "median_ratios":
        sf = median_ratio_size_factors(counts)
    else:
        given = load_size_factors(cfg.size_factor_path)
        lacking = [s for s in counts.samples if s not in given]
        if lacking:
            raise ValidationError(f"no size factor for samples {lacking}")
        sf = np.array([given[s] for s in counts.samples])
    return SampleMeta(counts.samples, sf, tuple(conditions[s] for s in counts.samples), order)


def _gene_job(args):
    i, row, meta, cfg = args
    try:
        return analyze_gene(
            row,
            meta,
            cfg.dispersion,
            normalize=cfg.normalize,
            cap=cfg.cap,
            mc=cfg.mc,
            stream=i,
            force_method=cfg.force_method,
        ), ""
    except MultiDESeqError as exc:
        return None, f"{type(exc).__name__}: {exc}"


def run_omnibus(counts: CountMatrix, meta: SampleMeta, cfg: RunConfig) -> OmnibusResult:
    """Omnibus m-condition test for every gene, BH-adjusted across genes.

    Row order follows the count table regardless of ``cfg.threads``; genes that
    fail get an ``error`` entry and blank p-values.
    """
    if list(meta.samples) != list(counts.samples):
        raise ValidationError("sample order of counts and metadata differ")
    jobs = [(i, counts.counts[i], meta, cfg) for i in range(counts.n_genes)]
    if cfg.threads > 1:
        with ThreadPoolExecutor(cfg.threads) as pool:
            results = list(pool.map(_gene_job, jobs))
    else:
        results = [_gene_job(j) for j in jobs]

    p_raw = np.array([np.nan if r is None else r.p_raw for r, _ in results])
    ok = ~np.isnan(p_raw)
    p_adj = np.full(p_raw.shape, np.nan)
    p_adj[ok] = bh_adjust(p_raw[ok])
    folds = [max_fold_change(normalized_condition_means(counts.counts[i], meta)) for i in range(counts.n_genes)]
    calls = call_significance(
        counts.genes, p_adj, folds, cfg.fc_threshold if cfg.use_fold_change else None, cfg.alpha
    )

    rows = []
    for i, ((res, err), call) in enumerate(zip(results, calls)):
        totals = counts.counts[i][None, :]
        row = {"gene": counts.genes[i], "error": err, "significant": call.significant,
               "max_fold_change": call.max_fold_change, "p_adj": p_adj[i]}
        for c in meta.conditions:
            row[f"k_{c}"] = int(totals[0, meta.mask(c)].sum())
        row["k_total"] = int(counts.counts[i].sum())
        if res is None:
            row.update(q0_hat=np.nan, method="", p_raw=np.nan, mc_std_err=np.nan,
                       mc_ci_low=np.nan, mc_ci_high=np.nan, p_floored=False)
        else:
            row.update(q0_hat=res.model.q0_hat, method=res.method, p_raw=res.p_raw,
                       mc_std_err=res.std_err, mc_ci_low=res.ci_low, mc_ci_high=res.ci_high,
                       p_floored=res.floored)
        rows.append(row)
    return OmnibusResult(meta.conditions, rows)


def result_columns(conditions) -> list[str]:
    return (["gene"] + [f"k_{c}" for c in conditions]
            + ["k_total", "q0_hat", "method", "p_raw", "mc_std_err", "mc_ci_low", "mc_ci_high",
               "p_adj", "max_fold_change", "significant", "p_floored", "error"])


def _format_row(row: dict) -> dict:
    out = {}
    for key, val in row.items():
        if isinstance(val, (bool, np.bool_)):
            out[key] = "true" if val else "false"
        elif key == "max_fold_change":
            out[key] = f"{val:.4f}"
        elif isinstance(val, (float, np.floating)):
            out[key] = format_float(val)
        else:
            out[key] = val
    return out


def _load_inputs(cfg: RunConfig) -> tuple[CountMatrix, SampleMeta]:
    if not cfg.counts_path or not cfg.conditions_path:
        raise ValidationError("counts and conditions paths are required")
    counts = load_counts(cfg.counts_path)
    meta = build_meta(counts, load_conditions(cfg.conditions_path), cfg)
    return counts, meta


def _write_manifest(cfg: RunConfig, path: Path, started: float, extra: dict) -> Path:
    manifest = {
        "version": __version__,
        "config": cfg.echo(),
        "seed": cfg.seed,
        "cap": cfg.cap,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        "elapsed_s": time.perf_counter() - started,
        **extra,
    }
    mpath = path.with_name(path.name + ".manifest.json")
    mpath.write_text(json.dumps(manifest, indent=2, default=str) + "\n")
    return mpath


def run_pipeline(cfg: RunConfig, counts: CountMatrix | None = None, meta: SampleMeta | None = None) -> OmnibusResult:
    """Run the omnibus analysis and, if ``cfg.output_path`` is set, write results plus manifest."""
    started = time.perf_counter()
    if counts is None:
        counts, meta = _load_inputs(cfg)
    result = run_omnibus(counts, meta, cfg)
    if cfg.output_path:
        path = Path(cfg.output_path)
        write_table(path, result_columns(result.conditions), [_format_row(r) for r in result.rows])
        methods = [r["method"] for r in result.rows]
        _write_manifest(cfg, path, started, {
            "pipeline": "omnibus",
            "conditions": list(result.conditions),
            "n_genes": counts.n_genes,
            "n_exact": methods.count("exact"),
            "n_monte_carlo": methods.count("monte_carlo"),
            "n_errors": sum(bool(r["error"]) for r in result.rows),
            "n_significant": result.n_significant,
        })
    return result


def run_pairwise_pipeline(cfg: RunConfig, counts: CountMatrix | None = None, meta: SampleMeta | None = None) -> list[dict]:
    """Pairwise exact tests with pooled BH; one output row per gene."""
    started = time.perf_counter()
    if counts is None:
        counts, meta = _load_inputs(cfg)
    pset = pooled_pairwise_adjust(run_pairwise_baseline(counts, meta, cfg.dispersion, cfg.normalize))
    raw, adj = pset.lookup(adjusted=False), pset.lookup()
    labels = list(dict.fromkeys(pset.comparisons))
    min_adj = pset.min_by_gene()
    folds = [max_fold_change(normalized_condition_means(counts.counts[i], meta)) for i in range(counts.n_genes)]
    calls = call_significance(
        counts.genes, [min_adj[g] for g in counts.genes], folds,
        cfg.fc_threshold if cfg.use_fold_change else None, cfg.alpha,
    )
    rows = []
    for g, call in zip(counts.genes, calls):
        row = {"gene": g}
        for lab in labels:
            row[f"p_raw[{lab}]"] = raw[(g, lab)]
            row[f"p_adj[{lab}]"] = adj[(g, lab)]
        row.update(min_p_adj=call.adj_p, max_fold_change=call.max_fold_change, significant=call.significant)
        rows.append(row)
    if cfg.output_path:
        path = Path(cfg.output_path)
        cols = ["gene"] + [f"{k}[{lab}]" for lab in labels for k in ("p_raw", "p_adj")] + \
               ["min_p_adj", "max_fold_change", "significant"]
        write_table(path, cols, [_format_row(r) for r in rows])
        _write_manifest(cfg, path, started, {
            "pipeline": "pairwise",
            "comparisons": labels,
            "n_genes": counts.n_genes,
            "n_significant": sum(r["significant"] for r in rows),
        })
    return rows
