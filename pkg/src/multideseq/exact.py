"""
Exact conditional test over all integer compositions of a gene's total count.

The p-value is the null probability mass of every composition that is no more
likely than the observed one, divided by the total mass of compositions with
the observed sum. Enumeration is Theta(total**(m-1)); ``DEFAULT_CAP`` bounds it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np
from numba import njit

from .errors import InfeasibleEnumerationError, NumericalDegeneracyError, ValidationError
from .model import GeneModel, nb_log_table, nb_logpmf

__all__ = [
    "DEFAULT_CAP",
    "TIE_RTOL",
    "ConditionalLaw",
    "composition_count",
    "enumerate_compositions",
    "log_joint_prob",
    "exact_log_sums",
    "exact_pvalue",
]

DEFAULT_CAP = 20_000_000
TIE_RTOL = 1e-12


@dataclass(frozen=True)
class ConditionalLaw:
    """Null moments of the m condition totals, plus the observed grand total."""

    means: tuple[float, ...]
    variances: tuple[float, ...]
    total: int

    def __post_init__(self):
        if len(self.means) != len(self.variances) or len(self.means) < 2:
            raise ValidationError("need matching means/variances for at least two conditions")
        if self.total < 0:
            raise ValidationError("total must be >= 0")
        object.__setattr__(self, "means", tuple(float(x) for x in self.means))
        object.__setattr__(self, "variances", tuple(float(x) for x in self.variances))
        object.__setattr__(self, "total", int(self.total))

    @property
    def m(self) -> int:
        return len(self.means)

    @classmethod
    def from_gene(cls, gene: GeneModel) -> "ConditionalLaw":
        return cls(gene.mu_hat, gene.var_hat, gene.total)

    def log_tables(self, upto: int | None = None) -> np.ndarray:
        """Per-condition log pmf at 0..upto (default: the total), shape (m, upto+1)."""
        n = self.total if upto is None else upto
        return np.vstack([nb_log_table(n, mu, var) for mu, var in zip(self.means, self.variances)])


def composition_count(total: int, m: int) -> int:
    """Number of nonnegative integer m-vectors summing to ``total`` (exact)."""
    if total < 0 or m < 1:
        return 0
    return math.comb(total + m - 1, m - 1)


def enumerate_compositions(total: int, m: int, cap: int | None = DEFAULT_CAP) -> Iterator[tuple[int, ...]]:
    """Yield every m-part composition of ``total`` once, in colexicographic order."""
    if m < 2:
        raise ValidationError("m must be >= 2")
    if total < 0:
        raise ValidationError("total must be >= 0")
    n = composition_count(total, m)
    if cap is not None and n > cap:
        raise InfeasibleEnumerationError(
            f"{n} compositions of {total} into {m} parts exceeds the cap of {cap}; "
            "use the Monte Carlo test"
        )
    return _colex(total, m)


def _colex(total: int, m: int) -> Iterator[tuple[int, ...]]:
    a = [0] * m
    a[0] = total
    while True:
        yield tuple(a)
        j = 0
        while j < m - 1 and a[j] == 0:
            j += 1
        if j == m - 1:
            return
        t = a[j]
        a[j] = 0
        a[0] = t - 1
        a[j + 1] += 1


def _check_composition(law: ConditionalLaw, comp: Sequence[int]) -> tuple[int, ...]:
    comp = tuple(int(x) for x in comp)
    if len(comp) != law.m:
        raise ValidationError(f"composition has {len(comp)} parts, law has {law.m} conditions")
    if any(x < 0 for x in comp):
        raise ValidationError("composition parts must be >= 0")
    if sum(comp) != law.total:
        raise ValidationError(f"composition sums to {sum(comp)}, expected {law.total}")
    return comp


def log_joint_prob(law: ConditionalLaw, comp: Sequence[int]) -> float:
    """Unconditional joint log-probability of the condition totals ``comp``."""
    comp = _check_composition(law, comp)
    return float(sum(nb_logpmf(a, mu, var) for a, mu, var in zip(comp, law.means, law.variances)))


def tie_threshold(log_p_obs: float) -> float:
    """Largest log-probability still counted as 'no more likely than observed'."""
    return log_p_obs + TIE_RTOL * max(1.0, abs(log_p_obs))


@njit(cache=True, nogil=True)
def _colex_log_sums(tables, total, threshold):
    m = tables.shape[0]
    a = np.zeros(m, dtype=np.int64)
    a[0] = total
    mx = -np.inf
    s_all = 0.0
    c_all = 0.0
    s_num = 0.0
    c_num = 0.0
    while True:
        lp = 0.0
        for c in range(m):
            lp += tables[c, a[c]]
        if lp > -np.inf:
            if lp > mx:
                scale = math.exp(mx - lp)
                s_all *= scale
                c_all *= scale
                s_num *= scale
                c_num *= scale
                mx = lp
            e = math.exp(lp - mx)
            # Kahan summation
            y = e - c_all
            t = s_all + y
            c_all = (t - s_all) - y
            s_all = t
            if lp <= threshold:
                y = e - c_num
                t = s_num + y
                c_num = (t - s_num) - y
                s_num = t
        j = 0
        while j < m - 1 and a[j] == 0:
            j += 1
        if j == m - 1:
            break
        t0 = a[j]
        a[j] = 0
        a[0] = t0 - 1
        a[j + 1] += 1
    if s_all <= 0.0:
        return -np.inf, -np.inf
    log_num = mx + math.log(s_num) if s_num > 0.0 else -np.inf
    return log_num, mx + math.log(s_all)


def exact_log_sums(tables: np.ndarray, observed: Sequence[int]) -> tuple[float, float]:
    """Log numerator and log denominator of the exact p-value.

    ``tables[c, a]`` is the log-probability that condition ``c`` has total ``a``.
    """
    tables = np.ascontiguousarray(tables, dtype=np.float64)
    total = int(sum(observed))
    lp_obs = 0.0
    for c, a in enumerate(observed):
        lp_obs += float(tables[c, a])
    return _colex_log_sums(tables, total, tie_threshold(lp_obs))


def exact_pvalue(law: ConditionalLaw, observed: Sequence[int], cap: int | None = DEFAULT_CAP) -> float:
    """Exact conditional p-value of ``observed`` under ``law``.

    Raises InfeasibleEnumerationError when the number of compositions exceeds
    ``cap`` (pass ``cap=None`` to enumerate regardless).
    """
    observed = _check_composition(law, observed)
    n = composition_count(law.total, law.m)
    if cap is not None and n > cap:
        raise InfeasibleEnumerationError(
            f"{n} compositions of {law.total} into {law.m} parts exceeds the cap of {cap}; "
            "use the Monte Carlo test"
        )
    if law.total == 0:
        return 1.0
    log_num, log_den = exact_log_sums(law.log_tables(), observed)
    if not np.isfinite(log_den) or not np.isfinite(log_num):
        raise NumericalDegeneracyError("observed composition has zero probability under the null law")
    return min(1.0, math.exp(log_num - log_den))
