"""Multi-condition negative-binomial differential expression with exact and Monte Carlo p-values."""

__version__ = "0.1.0"

from .errors import (
    DimensionError,
    InfeasibleEnumerationError,
    InvalidDispersionError,
    MultiDESeqError,
    NumericalDegeneracyError,
    ParseError,
    ValidationError,
)
from .model import (
    CountMatrix,
    DispersionModel,
    GeneModel,
    SampleMeta,
    condition_moments,
    fit_gene,
    library_size_factors,
    median_ratio_size_factors,
    nb_logpmf,
    nb_pmf,
    pooled_q0,
)
from .exact import (
    DEFAULT_CAP,
    ConditionalLaw,
    composition_count,
    enumerate_compositions,
    exact_pvalue,
    log_joint_prob,
)
from .montecarlo import (
    McConfig,
    McEstimate,
    choose_method,
    mc_pvalue,
    sample_composition,
    sample_compositions,
)
from .multitest import (
    PvalueSet,
    SignificanceCall,
    bh_adjust,
    call_significance,
    max_fold_change,
    pooled_pairwise_adjust,
    run_pairwise_baseline,
)

