"""
Wall-clock scaling of the exact test against the Monte Carlo estimator.

Exact cost grows with the composition count, Theta(total**(m-1)); the Monte
Carlo cost at fixed N does not depend on the total beyond the subset draws.
"""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass

import numpy as np

from .exact import ConditionalLaw, composition_count, exact_pvalue
from .model import DispersionModel
from .montecarlo import McConfig, mc_pvalue

__all__ = ["BenchPoint", "bench_law", "run_scaling_bench", "median_times", "loglog_slope", "write_bench_csv"]

METHODS = {"exact": None, "mc_1000": 1000, "mc_5000": 5000}


@dataclass(frozen=True)
class BenchPoint:
    total_count: int
    m: int
    method: str
    rep: int
    wall_time: float
    ops_estimate: int
    skipped: bool = False


def bench_law(total: int, m: int, replicates: int = 3, disp: DispersionModel | None = None):
    """Symmetric null law for ``total`` reads spread over m conditions of unit-size-factor samples,
    with an off-centre observed composition."""
    disp = disp or DispersionModel()
    q0 = total / (m * replicates)
    mu = replicates * q0
    var = mu + replicates * float(disp(q0))
    law = ConditionalLaw((mu,) * m, (var,) * m, total)
    weights = np.arange(m, 0, -1, dtype=float) + m
    obs = np.floor(total * weights / weights.sum()).astype(int)
    obs[-1] += total - obs.sum()
    return law, tuple(int(x) for x in obs)


def _ops(method: str, total: int, m: int) -> int:
    if method == "exact":
        return composition_count(total, m)
    return METHODS[method] * m


def _run_once(method: str, law, obs, seed: int) -> float:
    start = time.perf_counter()
    if method == "exact":
        exact_pvalue(law, obs, cap=None)
    else:
        mc_pvalue(law, obs, McConfig(METHODS[method], seed))
    return time.perf_counter() - start


def run_scaling_bench(
    totals,
    m: int = 3,
    methods=("exact", "mc_1000", "mc_5000"),
    repetitions: int = 3,
    disp: DispersionModel | None = None,
    timeout: float = 300.0,
    seed: int = 0,
) -> list[BenchPoint]:
    """Time each (total, method) ``repetitions`` times, single-threaded.

    One warm-up call per method is discarded (it also triggers JIT
    compilation). An exact point whose predicted time, extrapolated from the
    last completed exact point by composition count, exceeds ``timeout`` is
    recorded as skipped.
    """
    points: list[BenchPoint] = []
    for method in methods:
        if method not in METHODS:
            raise ValueError(f"unknown bench method {method!r}")
        law, obs = bench_law(10, m, disp=disp)
        _run_once(method, law, obs, seed)
        last = None  # (ops, seconds) of the latest exact point
        for total in sorted(totals):
            ops = _ops(method, total, m)
            law, obs = bench_law(total, m, disp=disp)
            if method == "exact" and last is not None and last[1] * ops / last[0] > timeout:
                points += [BenchPoint(total, m, method, r, float("nan"), ops, True) for r in range(repetitions)]
                continue
            times = [_run_once(method, law, obs, seed + r) for r in range(repetitions)]
            points += [BenchPoint(total, m, method, r, t, ops) for r, t in enumerate(times)]
            last = (ops, float(np.median(times)))
    return points


def median_times(points, method: str) -> tuple[np.ndarray, np.ndarray]:
    """(totals, median wall time) for one method, skipped points excluded."""
    by_total: dict[int, list[float]] = {}
    for p in points:
        if p.method == method and not p.skipped:
            by_total.setdefault(p.total_count, []).append(p.wall_time)
    totals = np.array(sorted(by_total), dtype=float)
    return totals, np.array([np.median(by_total[int(t)]) for t in totals])


def loglog_slope(points, method: str) -> float:
    """Least-squares slope of log median time against log total."""
    totals, times = median_times(points, method)
    if totals.size < 2:
        raise ValueError(f"need at least two timed totals for {method!r}")
    slope, _ = np.polyfit(np.log(totals), np.log(times), 1)
    return float(slope)


def write_bench_csv(points, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["total_count", "m", "method", "rep", "wall_time_s", "ops_estimate",
                    "ln_total_count", "ln_wall_time_s", "skipped"])
        for p in points:
            ln_t = "" if p.skipped or p.wall_time <= 0 else f"{math.log(p.wall_time):.6g}"
            w.writerow([p.total_count, p.m, p.method, p.rep, "" if p.skipped else f"{p.wall_time:.6g}",
                        p.ops_estimate, f"{math.log(p.total_count):.6g}" if p.total_count > 0 else "",
                        ln_t, "true" if p.skipped else "false"])
