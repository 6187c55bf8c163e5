"""Command-line entry point.

Subcommands mirror the pipeline stages so expensive steps can be cached and
rerun independently:

    synth      generate a synthetic dataset plus planted-truth sidecar
    validate   load a dataset and report violations
    shares     solve the coefficient LP and emit per-task shares
    probs      solve the probability LP over precomputed shares
    crossval   leave-one-out sweep over precomputed shares
    analyze    scatter/correlation/histogram plot data
    run        all stages into one output directory with a manifest

Exit codes: 0 success, 1 validation/config failure, 2 solver failure,
3 I/O failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

from . import analysis, crossval, dataset as ds, lp_core, prob_model, share_model, synthetic

log = logging.getLogger("taskdecomp")

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_SOLVER = 2
EXIT_IO = 3


@dataclass
class RunConfig:
    input_path: str
    out_dir: str
    epsilon: float = share_model.DEFAULT_EPSILON
    normalize_shares: bool = True
    outlier_strong: float = crossval.DEFAULT_STRONG_THRESHOLD
    outlier_review: float = crossval.DEFAULT_REVIEW_THRESHOLD
    bins: int = 50
    seed: int = 0
    jobs: int = 1
    dump_lp: bool = False

    def validate(self) -> None:
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError(f"--epsilon must be in (0, 1), got {self.epsilon}")
        if self.outlier_strong < self.outlier_review:
            raise ValueError("--outlier-strong must be >= --outlier-review")
        if self.bins < 1:
            raise ValueError("--bins must be >= 1")
        if self.jobs < 1:
            raise ValueError("--jobs must be >= 1")

    def to_json_dict(self) -> dict:
        return {
            "input": str(self.input_path),
            "out": str(self.out_dir),
            "epsilon": self.epsilon,
            "normalize_shares": self.normalize_shares,
            "outlier_strong": self.outlier_strong,
            "outlier_review": self.outlier_review,
            "bins": self.bins,
            "seed": self.seed,
            "jobs": self.jobs,
            "dump_lp": self.dump_lp,
        }


def _add_common_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--epsilon", type=float, default=share_model.DEFAULT_EPSILON,
                   help="band half-width for both LPs (default 0.01)")
    p.add_argument("--no-normalize-shares", action="store_true",
                   help="feed raw shares into the probability LP (sensitivity runs)")
    p.add_argument("--outlier-strong", type=float, default=crossval.DEFAULT_STRONG_THRESHOLD,
                   help="|p - p'| above this flags a strong outlier (default 0.5)")
    p.add_argument("--outlier-review", type=float, default=crossval.DEFAULT_REVIEW_THRESHOLD,
                   help="|p - p'| above this flags a job for review (default 0.2)")
    p.add_argument("--bins", type=int, default=50, help="histogram bins (default 50)")
    p.add_argument("--seed", type=int, default=0, help="generator seed")
    p.add_argument("--jobs", type=int, default=1,
                   help="cross-validation parallelism (default 1)")
    p.add_argument("--dump-lp", action="store_true",
                   help="write the LPs in text interchange format")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="taskdecomp",
        description="Decompose job-level automation probabilities into task-level ones.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", help="generate a synthetic dataset")
    p_synth.add_argument("--out", required=True, help="output directory")
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument("--num-jobs", type=int, default=100)
    p_synth.add_argument("--tasks-min", type=int, default=6)
    p_synth.add_argument("--tasks-max", type=int, default=14)
    p_synth.add_argument("--clusters", type=int, default=10)
    p_synth.add_argument("--density", type=float, default=0.05,
                         help="intra-cluster cross-job task pair edge probability")
    p_synth.add_argument("--same-job-density", type=float, default=0.0)
    p_synth.add_argument("--cluster-probs", type=str, default=None,
                         help="comma-separated automation probability per cluster")
    p_synth.add_argument("--prob-jitter", type=float, default=0.0)
    p_synth.add_argument("--identical-within-cluster", action="store_true")
    p_synth.add_argument("--flip-job-index", type=int, default=None,
                         help="plant an outlier by flipping one job's probability")

    p_validate = sub.add_parser("validate", help="check a dataset")
    p_validate.add_argument("input", help="dataset directory or JSON file")

    for name, help_text in (
        ("shares", "solve the coefficient LP"),
        ("probs", "solve the probability LP"),
        ("crossval", "leave-one-out cross-validation"),
        ("analyze", "emit plot data and correlations"),
        ("run", "run the full pipeline"),
    ):
        p_stage = sub.add_parser(name, help=help_text)
        p_stage.add_argument("input", help="dataset directory or JSON file")
        p_stage.add_argument("--out", required=True, help="output directory")
        if name in ("probs", "crossval", "analyze"):
            p_stage.add_argument("--shares", dest="shares_csv", default=None,
                                 help="shares.csv from a prior `shares` run")
        if name in ("crossval", "analyze"):
            p_stage.add_argument("--task-probs", dest="task_probs_csv", default=None,
                                 help="task_probs.csv from a prior `probs` run")
        _add_common_flags(p_stage)
    return parser


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    config = RunConfig(
        input_path=args.input,
        out_dir=args.out,
        epsilon=args.epsilon,
        normalize_shares=not args.no_normalize_shares,
        outlier_strong=args.outlier_strong,
        outlier_review=args.outlier_review,
        bins=args.bins,
        seed=args.seed,
        jobs=args.jobs,
        dump_lp=args.dump_lp,
    )
    config.validate()
    return config


def _load_dataset(path) -> ds.Dataset:
    return ds.load_any(path)


def _get_shares(config: RunConfig, data: ds.Dataset, out: Path, shares_csv=None):
    """Load cached shares when given, otherwise solve the coefficient LP."""
    if shares_csv:
        return share_model.read_shares_csv(shares_csv, use_normalized=config.normalize_shares), None
    coeffs = share_model.solve_shares(data, config.epsilon)
    table = share_model.compute_shares(coeffs, data, normalize=config.normalize_shares)
    return table, coeffs


# ---------------------------------------------------------------------------
# Stage implementations
# ---------------------------------------------------------------------------


def cmd_synth(args: argparse.Namespace) -> int:
    cluster_probs = None
    if args.cluster_probs:
        cluster_probs = tuple(float(v) for v in args.cluster_probs.split(","))
    config = synthetic.GeneratorConfig(
        num_jobs=args.num_jobs,
        tasks_per_job=(args.tasks_min, args.tasks_max),
        num_clusters=args.clusters,
        cluster_probs=cluster_probs,
        relatedness_density=args.density,
        same_job_density=args.same_job_density,
        prob_jitter=args.prob_jitter,
        identical_within_cluster=args.identical_within_cluster,
        flip_job_index=args.flip_job_index,
    )
    data, truth = synthetic.generate_synthetic(config, args.seed)
    out = Path(args.out)
    ds.save_dataset_csv(data, out)
    synthetic.save_truth(truth, out / "truth.json")
    log.info("wrote %d jobs / %d tasks / %d edges to %s",
             len(data.jobs), len(data.tasks), len(data.graph.edges), out)
    return EXIT_OK


def cmd_validate(args: argparse.Namespace) -> int:
    try:
        data = _load_dataset(args.input)
    except ds.DatasetError as exc:
        report = {"clean": False, "violations": exc.violations}
        print(json.dumps(report, indent=2))
        return EXIT_VALIDATION
    report = {
        "clean": True,
        "violations": [],
        "jobs": len(data.jobs),
        "tasks": len(data.tasks),
        "edges": len(data.graph.edges),
    }
    print(json.dumps(report, indent=2))
    return EXIT_OK


def _stage_shares(config: RunConfig, data: ds.Dataset, out: Path) -> dict:
    coeffs = share_model.solve_shares(data, config.epsilon)
    table = share_model.compute_shares(coeffs, data, normalize=config.normalize_shares)
    share_model.write_coefficients_csv(coeffs, out / "coefficients.csv")
    share_model.write_shares_csv(table, out / "shares.csv")
    share_model.write_share_summary(coeffs, out / "share_summary.json")
    if config.dump_lp:
        lp_core.write_lp_text(share_model.build_share_lp(data, config.epsilon), out / "share.lp")
    return {
        "objective": coeffs.objective,
        "mean_delta": coeffs.mean_delta,
        "num_variables": coeffs.num_variables,
        "num_constraints": coeffs.num_constraints,
        "unconstrained_by_relations": len(coeffs.unconstrained_jobs),
    }


def _stage_probs(config: RunConfig, data: ds.Dataset, table, out: Path) -> tuple[dict, prob_model.TaskProbabilities]:
    result = prob_model.solve_task_probs(data, table, config.epsilon)
    prob_model.write_task_probs_csv(result, table, out / "task_probs.csv")
    prob_model.write_pair_diffs_csv(result, out / "pair_diffs.csv")
    prob_model.write_prob_summary(result, out / "prob_summary.json")
    if config.dump_lp:
        lp_core.write_lp_text(prob_model.build_prob_lp(data, table, config.epsilon), out / "prob.lp")
    return (
        {
            "objective": result.objective,
            "mean_pair_diff": result.mean_pair_diff,
            "num_variables": result.num_variables,
            "num_constraints": result.num_constraints,
            "num_pair_variables": len(result.pair_delta),
            "unanchored_tasks": len(result.unanchored_tasks),
        },
        result,
    )


def _stage_crossval(config: RunConfig, data: ds.Dataset, table, full, out: Path) -> dict:
    report = crossval.run_crossval(
        data,
        table,
        config.epsilon,
        full_solution=full,
        strong_threshold=config.outlier_strong,
        review_threshold=config.outlier_review,
        bins=config.bins,
        parallelism=config.jobs,
    )
    crossval.write_crossval_jobs_csv(report, out / "crossval_jobs.csv")
    crossval.write_crossval_tasks_csv(report, out / "crossval_tasks.csv")
    crossval.write_crossval_histograms(report, out / "crossval_histograms.json")
    return {
        "jobs": len(report.jobs),
        "unreconstructable": len(report.unreconstructable),
        "tier_counts": report.tier_counts(),
    }


def _stage_analyze(config: RunConfig, data: ds.Dataset, table, full, out: Path) -> dict:
    scatter = analysis.share_vs_probability(table, full)
    analysis.write_scatter_csv(scatter, out / "fig_share_vs_probability.csv", "share", "probability")
    correlations: dict = {
        "share_vs_probability": {"r": scatter.r, "n": scatter.n},
        "attributes": {},
    }
    for attr in analysis.all_attributes(data):
        try:
            series = analysis.attribute_vs_probability(data, attr)
        except ValueError:
            continue
        analysis.write_scatter_csv(series, out / f"fig_attr_{attr}.csv", "level", "probability")
        correlations["attributes"][attr] = {
            "r": series.r,
            "n": series.n,
            "skipped": series.skipped,
        }
    pair_hist = prob_model.pair_diff_distribution(full, data.graph, config.bins)
    analysis.write_histogram_csv(pair_hist, out / "fig_pair_diff_hist.csv")
    prob_hist = analysis.make_histogram(
        [full.probs[t] for t in sorted(full.probs)], (0.0, 1.0), config.bins
    )
    analysis.write_histogram_csv(prob_hist, out / "fig_task_prob_hist.csv")
    correlations["pair_diff"] = {"mean": pair_hist.mean, "count": pair_hist.total}
    analysis.write_analysis_summary(correlations, out / "analysis_summary.json")
    return correlations


def _run_stage(name: str, fn, *args):
    start = time.perf_counter()
    try:
        result = fn(*args)
    except lp_core.SolverBreakdownError:
        log.error("stage %s failed", name)
        raise
    log.info("stage %s finished in %.2fs", name, time.perf_counter() - start)
    return result


def cmd_stage(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    data = _load_dataset(config.input_path)
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    command = args.command

    if command == "shares":
        _run_stage("shares", _stage_shares, config, data, out)
        return EXIT_OK

    table, coeffs = _get_shares(config, data, out, getattr(args, "shares_csv", None))
    if coeffs is not None:
        # No cached shares were given: persist the ones just solved.
        share_model.write_coefficients_csv(coeffs, out / "coefficients.csv")
        share_model.write_shares_csv(table, out / "shares.csv")
    if command == "probs":
        _run_stage("probs", _stage_probs, config, data, table, out)
        return EXIT_OK

    full = None
    cached = getattr(args, "task_probs_csv", None)
    if cached:
        full = prob_model.read_task_probs_csv(cached, epsilon=config.epsilon)
    if command == "crossval":
        _run_stage("crossval", _stage_crossval, config, data, table, full, out)
        return EXIT_OK
    if command == "analyze":
        if full is None:
            full = prob_model.solve_task_probs(data, table, config.epsilon)
        _run_stage("analyze", _stage_analyze, config, data, table, full, out)
        return EXIT_OK
    raise AssertionError(f"unhandled command {command!r}")


def cmd_run(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    data = _load_dataset(config.input_path)
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    manifest: dict = {
        "config": config.to_json_dict(),
        "dataset": {
            "jobs": len(data.jobs),
            "tasks": len(data.tasks),
            "edges": len(data.graph.edges),
        },
        "solver": {
            "backend": lp_core.SOLVER_BACKEND,
            "feasibility_tolerance": lp_core.FEASIBILITY_TOL,
            "optimality_tolerance": lp_core.OPTIMALITY_TOL,
        },
        "stages": {},
    }

    manifest["stages"]["shares"] = _run_stage("shares", _stage_shares, config, data, out)
    table = share_model.read_shares_csv(out / "shares.csv", use_normalized=config.normalize_shares)
    prob_stats, full = _run_stage("probs", _stage_probs, config, data, table, out)
    manifest["stages"]["probs"] = prob_stats
    manifest["stages"]["crossval"] = _run_stage(
        "crossval", _stage_crossval, config, data, table, full, out
    )
    analyze_stats = _run_stage("analyze", _stage_analyze, config, data, table, full, out)
    manifest["stages"]["analyze"] = {
        "share_vs_probability_r": analyze_stats["share_vs_probability"]["r"],
        "attributes": sorted(analyze_stats["attributes"]),
    }
    with open(out / "manifest.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(manifest, fh, indent=2, allow_nan=False)
        fh.write("\n")
    return EXIT_OK


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s", stream=sys.stderr)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "synth":
            return cmd_synth(args)
        if args.command == "validate":
            return cmd_validate(args)
        if args.command == "run":
            return cmd_run(args)
        return cmd_stage(args)
    except (ds.DatasetError, ValueError) as exc:
        log.error("%s", exc)
        return EXIT_VALIDATION
    except lp_core.SolverBreakdownError as exc:
        log.error("solver failure: %s", exc)
        return EXIT_SOLVER
    except OSError as exc:
        log.error("I/O failure: %s", exc)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
