"""
Command-line interface.

Subcommands:
  test      omnibus m-condition test (exact or Monte Carlo per gene)
  pairwise  pairwise two-condition tests with pooled BH adjustment
  simulate  replicated power/FDR experiment on simulated data
  bench     exact vs Monte Carlo runtime scaling
  summary   six-number summary of per-gene total counts

Exit codes: 0 success, 1 configuration or parse error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .errors import InfeasibleEnumerationError, NumericalDegeneracyError, ValidationError
from .exact import DEFAULT_CAP
from .model import DispersionModel
from .simulate import EXPERIMENT_CAP, EXPERIMENT_MC_SAMPLES

EXIT_CONFIG = 1
EXIT_RUNTIME = 2


def parse_dispersion(spec: str) -> DispersionModel:
    """``constant_cv2:ALPHA``, ``power:ALPHA,BETA``, ``table:PATH`` or ``poisson``."""
    kind, _, arg = spec.partition(":")
    try:
        if kind == "poisson":
            return DispersionModel.poisson()
        if kind == "constant_cv2":
            return DispersionModel("constant_cv2", alpha=float(arg or 0.1))
        if kind == "power":
            alpha, beta = (float(x) for x in arg.split(","))
            return DispersionModel("power", alpha=alpha, beta=beta)
        if kind == "table":
            from .ingest import load_dispersion_table

            q, nu = load_dispersion_table(arg)
            return DispersionModel("table", q_grid=q, nu_grid=nu)
    except ValueError as exc:
        raise ValidationError(f"bad dispersion spec {spec!r}: {exc}") from None
    raise ValidationError(f"unknown dispersion spec {spec!r}")


def _cap(text: str):
    return None if text.lower() in ("none", "inf") else int(float(text))


def _add_model_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--dispersion", default="constant_cv2:0.1",
                   help="constant_cv2:ALPHA | power:ALPHA,BETA | table:PATH | poisson")
    p.add_argument("--size-factors", default="library_size", choices=["library_size", "median_ratios", "file"])
    p.add_argument("--size-factor-file", dest="size_factor_path", default=None)
    p.add_argument("--no-normalize", dest="normalize", action="store_false",
                   help="pooled expression as a plain sum over samples instead of the mean")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--fc-threshold", type=float, default=4.0)
    p.add_argument("--no-fold-change", dest="use_fold_change", action="store_false")


def _add_test_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--estimator", default="self_normalized", choices=["self_normalized", "indicator"])
    p.add_argument("--mc-samples", type=int, default=1000)
    p.add_argument("--ci-level", type=float, default=0.95)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--cap", type=_cap, default=DEFAULT_CAP, help="max compositions to enumerate ('none' = no cap)")
    p.add_argument("--force-method", choices=["exact", "monte_carlo"], default=None)
    p.add_argument("--threads", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="multideseq", description=__doc__.split("\n\n")[0])
    parser.add_argument("--config", default=None, help="JSON file of option defaults (keys = option names)")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, help_ in (("test", "omnibus test"), ("pairwise", "pairwise baseline")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--counts", dest="counts_path", required=False)
        p.add_argument("--conditions", dest="conditions_path", required=False)
        p.add_argument("--out", dest="output_path", required=False)
        _add_model_flags(p)
        _add_test_flags(p)

    p = sub.add_parser("simulate", help="power/FDR experiment")
    p.add_argument("--n-genes", type=int, default=1000)
    p.add_argument("--n-conditions", type=int, default=3)
    p.add_argument("--replicates-per-condition", type=int, default=3)
    p.add_argument("--n-de-genes", type=int, default=100)
    p.add_argument("--fold-change", type=float, default=2.0)
    p.add_argument("--n-replicates", type=int, default=10)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--out", dest="output_path", default=None)
    _add_test_flags(p)
    p.set_defaults(mc_samples=EXPERIMENT_MC_SAMPLES, cap=EXPERIMENT_CAP)

    p = sub.add_parser("bench", help="runtime scaling")
    p.add_argument("--totals", type=int, nargs="+", default=[300, 1000, 3000, 10000])
    p.add_argument("--m", type=int, default=3)
    p.add_argument("--methods", nargs="+", default=["exact", "mc_1000", "mc_5000"])
    p.add_argument("--repetitions", type=int, default=3)
    p.add_argument("--timeout", type=float, default=300.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", dest="output_path", default=None)

    p = sub.add_parser("summary", help="summary of per-gene total counts")
    p.add_argument("--counts", dest="counts_path", required=True)
    return parser


def _parse(argv):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        with open(args.config) as fh:
            defaults = json.load(fh)
        for action in parser._subparsers._group_actions[0].choices[args.command]._actions:
            if action.dest in defaults:
                action.default = defaults[action.dest]
                action.required = False
        args = parser.parse_args(argv)
    return args


def _print_config(d: dict) -> None:
    print("# resolved config: " + json.dumps(d, sort_keys=True, default=str), file=sys.stderr)


def _run_config(args):
    from .pipeline import RunConfig

    return RunConfig(
        counts_path=args.counts_path,
        conditions_path=args.conditions_path,
        output_path=args.output_path,
        dispersion=parse_dispersion(args.dispersion),
        size_factors=args.size_factors,
        size_factor_path=args.size_factor_path,
        normalize=args.normalize,
        estimator=args.estimator,
        mc_samples=args.mc_samples,
        ci_level=args.ci_level,
        seed=args.seed,
        cap=args.cap,
        force_method=args.force_method,
        alpha=args.alpha,
        fc_threshold=args.fc_threshold,
        use_fold_change=args.use_fold_change,
        threads=args.threads,
    )


def _cmd_test(args) -> int:
    from .pipeline import run_pipeline

    cfg = _run_config(args)
    _print_config(cfg.echo())
    result = run_pipeline(cfg)
    print(f"{len(result.rows)} genes tested, {result.n_significant} significant")
    return 0


def _cmd_pairwise(args) -> int:
    from .pipeline import run_pairwise_pipeline

    cfg = _run_config(args)
    _print_config(cfg.echo())
    rows = run_pairwise_pipeline(cfg)
    print(f"{len(rows)} genes tested, {sum(r['significant'] for r in rows)} significant")
    return 0


def _cmd_simulate(args) -> int:
    from .pipeline import RunConfig
    from .simulate import SimScenario, run_power_fdr_experiment, write_report_csv

    sc = SimScenario(
        n_genes=args.n_genes,
        n_conditions=args.n_conditions,
        replicates_per_condition=args.replicates_per_condition,
        n_de_genes=args.n_de_genes,
        fold_change=args.fold_change,
        seed=args.seed,
    )
    cfg = RunConfig(
        dispersion=sc.matching_dispersion_model(),
        estimator=args.estimator,
        mc_samples=args.mc_samples,
        ci_level=args.ci_level,
        cap=args.cap,
        force_method=args.force_method,
        alpha=args.alpha,
        use_fold_change=False,
        threads=args.threads,
    )
    _print_config({"scenario": vars(sc), "test": cfg.echo(), "n_replicates": args.n_replicates})
    report = run_power_fdr_experiment(sc, args.n_replicates, cfg)
    if args.output_path:
        write_report_csv(report, args.output_path)
    for attr in ("true_difference", "false_difference", "fdr_mway", "fdr_pairwise"):
        s = report.summary(attr)
        print(attr + "\t" + "\t".join(f"{k}={v:.4g}" for k, v in s.items()))
    return 0


def _cmd_bench(args) -> int:
    from .bench import loglog_slope, run_scaling_bench, write_bench_csv

    _print_config(vars(args))
    points = run_scaling_bench(args.totals, args.m, args.methods, args.repetitions,
                               timeout=args.timeout, seed=args.seed)
    if args.output_path:
        write_bench_csv(points, args.output_path)
    for method in args.methods:
        try:
            print(f"{method}\tlog-log slope {loglog_slope(points, method):.3f}")
        except (ValueError, np.linalg.LinAlgError):
            print(f"{method}\ttoo few points for a slope")
    return 0


def _cmd_summary(args) -> int:
    from .ingest import load_counts, summarize_totals

    _print_config(vars(args))
    s = summarize_totals(load_counts(args.counts_path))
    print("Min.\t1st Qu.\tMedian\tMean\t3rd Qu.\tMax.")
    print("\t".join(f"{v:.10g}" for v in s.as_tuple()))
    return 0


COMMANDS = {
    "test": _cmd_test,
    "pairwise": _cmd_pairwise,
    "simulate": _cmd_simulate,
    "bench": _cmd_bench,
    "summary": _cmd_summary,
}


def main(argv=None) -> int:
    try:
        args = _parse(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else 0
    try:
        return COMMANDS[args.command](args)
    except (InfeasibleEnumerationError, NumericalDegeneracyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (ValidationError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
