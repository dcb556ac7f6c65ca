"""
Exact versus Monte Carlo runtime
================================

Exact enumeration over three conditions costs Theta(total**2) compositions.
Monte Carlo at fixed N costs about the same whatever the total.
"""

from multideseq.bench import loglog_slope, median_times, run_scaling_bench

totals = [300, 1000, 3000, 10000]
points = run_scaling_bench(totals, m=3, methods=("exact", "mc_1000", "mc_5000"), repetitions=3)

for method in ("exact", "mc_1000", "mc_5000"):
    t, sec = median_times(points, method)
    cells = "  ".join(f"{int(x):>6d}: {s * 1e3:8.2f} ms" for x, s in zip(t, sec))
    print(f"{method:8s} {cells}   slope {loglog_slope(points, method):.2f}")

# write_bench_csv(points, "runtime.csv") gives a plot-ready table with log columns
ops = {p.total_count: p.ops_estimate for p in points if p.method == "exact"}
print("\nexact compositions per total:", ops)
