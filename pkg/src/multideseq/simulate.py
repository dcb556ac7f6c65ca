"""
Negative-binomial RNA-seq simulation and the replicated power/FDR comparison
of the m-way test against pooled pairwise testing.

Generator defaults (baseline expression log-uniform over four decades,
log-normal library sizes around 2e6, squared CV decreasing in the mean toward
0.1) aim at a realistic count regime, not at reproducing any one tool's
internal parameter files.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction

import numpy as np

from .errors import ValidationError
from .model import CountMatrix, DispersionModel, SampleMeta, library_size_factors
from .multitest import pooled_pairwise_adjust, run_pairwise_baseline

__all__ = [
    "SimScenario",
    "SimTruth",
    "ReplicateResult",
    "ExperimentReport",
    "generate_dataset",
    "replicate_scenario",
    "run_power_fdr_experiment",
    "expected_de_proportion",
    "write_report_csv",
    "EXPERIMENT_MC_SAMPLES",
    "EXPERIMENT_CAP",
]

# At N = 1000 the 1/(N+1) floor sits above most BH thresholds over 1000 genes,
# which leaves the Monte Carlo genes almost no chance of rejection.
EXPERIMENT_MC_SAMPLES = 5000
# Exact enumeration up to 2e5 compositions (totals up to ~630 at m = 3).
EXPERIMENT_CAP = 200_000


@dataclass(frozen=True)
class SimScenario:
    n_genes: int = 1000
    n_conditions: int = 3
    replicates_per_condition: int = 3
    n_de_genes: int = 100
    fold_change: float = 2.0
    de_condition_index: int = -1
    log10_expression_span: float = 4.0
    library_size: float = 2e6
    library_log_sd: float = 0.25
    dispersion_floor: float = 0.1
    dispersion_scale: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.n_conditions < 2:
            raise ValidationError("need at least two conditions")
        if self.replicates_per_condition < 1:
            raise ValidationError("need at least one replicate per condition")
        if not 0 <= self.n_de_genes <= self.n_genes:
            raise ValidationError("n_de_genes must lie in [0, n_genes]")
        if self.fold_change <= 0:
            raise ValidationError("fold_change must be > 0")
        if not -self.n_conditions <= self.de_condition_index < self.n_conditions:
            raise ValidationError("de_condition_index out of range")

    def dispersion(self, mean):
        """Squared coefficient of variation as a function of the per-sample mean."""
        mean = np.maximum(np.asarray(mean, dtype=float), 1e-12)
        return self.dispersion_floor + self.dispersion_scale / np.sqrt(mean)

    def matching_dispersion_model(self) -> DispersionModel:
        """Tabulated nu(q) = phi(q) * q**2 matching the generator's dispersion."""
        q = np.logspace(-3, 8, 500)
        return DispersionModel("table", q_grid=tuple(q), nu_grid=tuple(self.dispersion(q) * q * q))

    @property
    def condition_labels(self) -> tuple[str, ...]:
        return tuple(f"C{c + 1}" for c in range(self.n_conditions))


@dataclass(frozen=True)
class SimTruth:
    is_de: np.ndarray
    true_means: np.ndarray  # genes x conditions, expression strength per unit library


def generate_dataset(scenario: SimScenario) -> tuple[CountMatrix, SampleMeta, SimTruth]:
    """Draw one count matrix with its design and ground truth.

    Size factors in the returned metadata are library-size factors estimated
    from the drawn counts, as a real analysis would use.
    """
    sc = scenario
    rng = np.random.default_rng(np.random.SeedSequence([sc.seed, 0x5EED]))
    u = rng.uniform(0.0, sc.log10_expression_span, size=sc.n_genes)
    props = 10.0**u
    props /= props.sum()

    is_de = np.zeros(sc.n_genes, dtype=bool)
    is_de[rng.choice(sc.n_genes, size=sc.n_de_genes, replace=False)] = True
    means = np.repeat(props[:, None], sc.n_conditions, axis=1)
    de_col = sc.de_condition_index % sc.n_conditions
    means[is_de, de_col] *= sc.fold_change

    labels = sc.condition_labels
    cond_of = tuple(labels[c] for c in range(sc.n_conditions) for _ in range(sc.replicates_per_condition))
    samples = tuple(f"{c}_r{r + 1}" for c in labels for r in range(sc.replicates_per_condition))
    col_cond = np.repeat(np.arange(sc.n_conditions), sc.replicates_per_condition)
    lib = sc.library_size * np.exp(rng.normal(0.0, sc.library_log_sd, size=len(samples)))

    mu = means[:, col_cond] * lib[None, :]
    phi = sc.dispersion(mu)
    # gamma-Poisson mixture: NB with mean mu and variance mu + phi * mu**2
    lam = rng.gamma(shape=1.0 / phi, scale=phi * mu)
    counts = rng.poisson(lam)

    cm = CountMatrix(tuple(f"g{i:05d}" for i in range(sc.n_genes)), samples, counts)
    meta = SampleMeta(samples, library_size_factors(cm), cond_of, labels)
    return cm, meta, SimTruth(is_de, means)


@dataclass(frozen=True)
class ReplicateResult:
    replicate: int
    seed: int
    true_mway: int
    true_pairwise: int
    false_mway: int
    false_pairwise: int
    subset_violations: int

    @staticmethod
    def _fdr(false: int, true: int) -> float:
        total = false + true
        return false / total if total else 0.0

    @property
    def fdr_mway(self) -> float:
        return self._fdr(self.false_mway, self.true_mway)

    @property
    def fdr_pairwise(self) -> float:
        return self._fdr(self.false_pairwise, self.true_pairwise)

    @property
    def true_difference(self) -> int:
        return self.true_mway - self.true_pairwise

    @property
    def false_difference(self) -> int:
        return self.false_mway - self.false_pairwise


@dataclass
class ExperimentReport:
    scenario: SimScenario
    replicates: list[ReplicateResult] = field(default_factory=list)

    def summary(self, attr: str = "true_difference") -> dict[str, float]:
        """Six-number summary of a per-replicate quantity."""
        x = np.array([getattr(r, attr) for r in self.replicates], dtype=float)
        q1, med, q3 = np.quantile(x, [0.25, 0.5, 0.75])
        return {"min": x.min(), "q1": q1, "median": med, "mean": x.mean(), "q3": q3, "max": x.max()}


def replicate_scenario(scenario: SimScenario, replicate: int) -> SimScenario:
    seed = int(np.random.SeedSequence([scenario.seed, replicate]).generate_state(1, np.uint32)[0])
    return replace(scenario, seed=seed)


def run_power_fdr_experiment(scenario: SimScenario, n_replicates: int, test_cfg=None) -> ExperimentReport:
    """Replicated comparison of the omnibus test with pooled pairwise testing.

    Significance is adjusted p < alpha without a fold-change gate for both
    methods (per-gene minimum pooled-adjusted p for pairwise). ``test_cfg`` is a
    RunConfig; its seed is replaced per replicate by the replicate seed. By
    default the test uses the dispersion the data were generated with.
    """
    from .pipeline import RunConfig, run_omnibus

    if test_cfg is None:
        test_cfg = RunConfig(
            dispersion=scenario.matching_dispersion_model(),
            mc_samples=EXPERIMENT_MC_SAMPLES,
            cap=EXPERIMENT_CAP,
        )
    report = ExperimentReport(scenario)
    for r in range(n_replicates):
        sc = replicate_scenario(scenario, r)
        counts, meta, truth = generate_dataset(sc)
        cfg = replace(test_cfg, seed=sc.seed, use_fold_change=False)
        omni = run_omnibus(counts, meta, cfg)
        sig_m = np.array([row["significant"] for row in omni.rows])

        pairs = pooled_pairwise_adjust(run_pairwise_baseline(counts, meta, cfg.dispersion, cfg.normalize))
        min_adj = pairs.min_by_gene()
        sig_p = np.array([min_adj[g] < cfg.alpha for g in counts.genes])

        de = truth.is_de
        report.replicates.append(
            ReplicateResult(
                replicate=r,
                seed=sc.seed,
                true_mway=int(np.sum(sig_m & de)),
                true_pairwise=int(np.sum(sig_p & de)),
                false_mway=int(np.sum(sig_m & ~de)),
                false_pairwise=int(np.sum(sig_p & ~de)),
                subset_violations=int(np.sum(sig_p & ~sig_m)),
            )
        )
    return report


def expected_de_proportion(c: int) -> tuple[Fraction, Fraction]:
    """Share of truly DE tests for the m-way and the pairwise design.

    Canonical setup: 100 DE genes out of 1000, one condition shifted against
    the other c - 1.
    """
    if c < 2:
        raise ValidationError("c must be >= 2")
    return Fraction(100, 1000), Fraction((c - 1) * 100, math.comb(c, 2) * 1000)


REPORT_COLUMNS = (
    "replicate",
    "seed",
    "true_mway",
    "true_pairwise",
    "false_mway",
    "false_pairwise",
    "fdr_mway",
    "fdr_pairwise",
    "true_difference",
    "subset_violations",
)


def write_report_csv(report: ExperimentReport, path) -> None:
    """One row per replicate, then a ``mean`` summary row."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(REPORT_COLUMNS)
        for r in report.replicates:
            w.writerow([getattr(r, c) if c not in ("fdr_mway", "fdr_pairwise") else f"{getattr(r, c):.17g}"
                        for c in REPORT_COLUMNS])
        if report.replicates:
            means = ["mean", ""]
            for c in REPORT_COLUMNS[2:]:
                means.append(f"{np.mean([getattr(r, c) for r in report.replicates]):.17g}")
            w.writerow(means)
