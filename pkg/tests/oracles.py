"""Independent reference computations used only by the tests.

Nothing here imports the code paths under test beyond plain data containers:
pmfs come from mpmath, compositions from a recursive generator, sums are
accumulated in high precision.
"""

import functools

import mpmath
import numpy as np

mpmath.mp.dps = 40


def mp_nb_pmf(k, mean, variance):
    """NB pmf by moment conversion, in mpmath precision."""
    k = int(k)
    mean = mpmath.mpf(mean)
    variance = mpmath.mpf(variance)
    if mean == 0:
        return mpmath.mpf(1) if k == 0 else mpmath.mpf(0)
    if variance == mean:
        return mpmath.exp(k * mpmath.log(mean) - mean - mpmath.loggamma(k + 1))
    r = mean * mean / (variance - mean)
    p = mean / variance
    logc = mpmath.loggamma(k + r) - mpmath.loggamma(r) - mpmath.loggamma(k + 1)
    return mpmath.exp(logc + r * mpmath.log(p) + k * mpmath.log(1 - p))


def compositions(total, m):
    """All m-part compositions of ``total`` by recursion (order irrelevant)."""
    if m == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in compositions(total - first, m - 1):
            yield (first,) + rest


def brute_force_pvalue(means, variances, observed, tie_rtol=mpmath.mpf("1e-30")):
    """Exact conditional p-value by summing every composition in mpmath."""
    total = sum(observed)
    tables = [[mp_nb_pmf(a, mu, var) for a in range(total + 1)] for mu, var in zip(means, variances)]

    def prob(comp):
        out = mpmath.mpf(1)
        for c, a in enumerate(comp):
            out *= tables[c][a]
        return out

    p_obs = prob(observed)
    limit = p_obs * (1 + tie_rtol)
    num = mpmath.mpf(0)
    den = mpmath.mpf(0)
    for comp in compositions(total, len(means)):
        p = prob(comp)
        den += p
        if p <= limit:
            num += p
    return num / den, den


def two_condition_pvalue(mean1, var1, mean2, var2, k1, k2):
    """Two-condition exact test written directly over a1 = 0..k.

    Log pmfs come from mpmath so the oracle stays accurate for huge NB size
    parameters, where scipy's nbinom loses digits.
    """
    k = k1 + k2
    lp = np.array([
        float(mpmath.log(mp_nb_pmf(a, mean1, var1) * mp_nb_pmf(k - a, mean2, var2))) for a in range(k + 1)
    ])
    lp_obs = lp[k1]
    keep = lp <= lp_obs + 1e-12 * max(1.0, abs(lp_obs))
    w = np.exp(lp - lp.max())
    return float(mpmath.fsum(w[keep]) / mpmath.fsum(w))


def convolution_log_total(means, variances, total):
    """log P(sum of condition totals == total) by direct convolution in mpmath."""
    dist = [mpmath.mpf(1)] + [mpmath.mpf(0)] * total
    for mu, var in zip(means, variances):
        pmf = [mp_nb_pmf(a, mu, var) for a in range(total + 1)]
        dist = [mpmath.fsum(dist[j] * pmf[i - j] for j in range(i + 1)) for i in range(total + 1)]
    return mpmath.log(dist[total])


def reference_bh(p):
    from statsmodels.stats.multitest import multipletests

    return multipletests(np.asarray(p, dtype=float), method="fdr_bh")[1]


def uniform_fraction_extreme(means, variances, observed):
    """Share of compositions (counted, not weighted) no more likely than the observed one."""
    total = sum(observed)
    tables = [[float(mpmath.log(mp_nb_pmf(a, mu, var))) for a in range(total + 1)]
              for mu, var in zip(means, variances)]
    lp_obs = sum(tables[c][a] for c, a in enumerate(observed))
    limit = lp_obs + 1e-12 * max(1.0, abs(lp_obs))
    hits = n = 0
    for comp in compositions(total, len(means)):
        n += 1
        hits += sum(tables[c][a] for c, a in enumerate(comp)) <= limit
    return hits / n


def random_law(rng, m, total, symmetric):
    """Null moments for m conditions built the same way a fitted gene would be."""
    reps = rng.integers(1, 4, size=m)
    if symmetric:
        reps[:] = reps[0]
        base = rng.uniform(0.5, 2.0, size=reps[0])
        sf = [base] * m
    else:
        sf = [rng.uniform(0.5, 2.0, size=r) for r in reps]
    alpha = 0.0 if rng.random() < 0.2 else float(rng.uniform(0.01, 0.5))
    s_all = np.concatenate(sf)
    q0 = max(total, 1) / s_all.sum() * float(rng.uniform(0.5, 1.5))
    means, variances = [], []
    for s in sf:
        mu = float(np.sum(s) * q0)
        means.append(mu)
        variances.append(mu + float(np.sum(s * s)) * alpha * q0 * q0)
    return means, variances


@functools.lru_cache(maxsize=512)
def composition_array(total, m):
    """All m-part compositions of ``total`` as an int array, built by recursion."""
    if m == 1:
        return np.array([[total]], dtype=np.int64)
    blocks = []
    for first in range(total + 1):
        rest = composition_array(total - first, m - 1)
        blocks.append(np.column_stack([np.full(len(rest), first, dtype=np.int64), rest]))
    return np.vstack(blocks)


def brute_force_pvalue_fsum(means, variances, observed):
    """Exact p-value by full enumeration: mpmath log pmfs, exactly rounded sums (math.fsum).

    Fast enough for m = 4 at totals near 60, where the pure mpmath oracle is not.
    """
    import math

    total = int(sum(observed))
    def mp_log(a, mu, var):
        p = mp_nb_pmf(a, mu, var)
        return float(mpmath.log(p)) if p > 0 else -np.inf

    tables = np.array([[mp_log(a, mu, var) for a in range(total + 1)] for mu, var in zip(means, variances)])
    comps = composition_array(total, len(means))
    lp = np.zeros(len(comps))
    for c in range(len(means)):
        lp += tables[c, comps[:, c]]
    lp_obs = sum(tables[c, a] for c, a in enumerate(observed))
    keep = lp <= lp_obs + 1e-12 * max(1.0, abs(lp_obs))
    top = lp.max()
    w = np.exp(lp - top)
    return math.fsum(w[keep]) / math.fsum(w)
