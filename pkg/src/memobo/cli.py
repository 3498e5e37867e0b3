"""Command-line front end.

Subcommands: optimize (one run, optionally meta-learning), reduce-bounds
(derive and persist reduced bounds for a task), similar (nearest stored
task for a point cloud), bench (paired baseline-vs-meta benchmark), and
report (re-render stored results). All commands are deterministic given
their flags and seed; exit codes are 0 on success, 1 on run/data failure,
2 on usage errors.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import bounds_reduction, param_space, similarity, simtask
from .acquisition import AcquisitionConfig
from .bounds_reduction import ReductionConfig
from .memory import (
    LongTermMemory,
    MemoryFormatError,
    MemoryNotFoundError,
    ProceduralEntry,
    SemanticEntry,
    parse_cloud_text,
    resolve_memory_root,
)
from .orchestrator import (
    BenchReport,
    BudgetConfig,
    make_task_pairs,
    paired_benchmark,
    run_optimization,
    run_with_meta_learning,
)


def _parse_budget(text: str) -> BudgetConfig:
    parts = text.split(",")
    if len(parts) != 3:
        raise ValueError(f"budget must be 'init,infill,final', got {text!r}")
    return BudgetConfig(*(int(p) for p in parts))


def _parse_percentiles(text: str) -> tuple[float, float]:
    parts = text.split(",")
    if len(parts) != 2:
        raise ValueError(f"percentiles must be 'x,X', got {text!r}")
    return float(parts[0]), float(parts[1])


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--memory-root", default=None,
                        help="memory directory (env MEMOBO_MEMORY_ROOT as fallback)")
    parser.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="memobo",
        description="memory-backed Bayesian optimization of noisy black boxes",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_opt = sub.add_parser("optimize", help="run one optimization")
    _add_common(p_opt)
    p_opt.add_argument("--task-seed", type=int, default=None)
    p_opt.add_argument("--difficulty", choices=simtask.DIFFICULTIES, default="medium")
    p_opt.add_argument("--task-file", default=None, help="serialized synthetic task")
    p_opt.add_argument("--task-label", default=None)
    p_opt.add_argument("--budget", default="10,20,5")
    p_opt.add_argument("--beta", type=float, default=0.65)
    p_opt.add_argument("--meta", action="store_true",
                       help="reduce bounds from the most similar stored task")
    p_opt.add_argument("--cloud", default=None,
                       help="point-cloud file of the new task (for --meta)")
    p_opt.add_argument("--best-fraction", type=float, default=0.35)
    p_opt.add_argument("--alpha-dm", type=float, default=0.15)
    p_opt.add_argument("--alpha-w", type=float, default=0.15)
    p_opt.add_argument("--percentiles", default="0.05,0.95")

    p_red = sub.add_parser("reduce-bounds", help="derive reduced bounds for a task")
    _add_common(p_red)
    p_red.add_argument("--task", required=True)
    p_red.add_argument("--best-fraction", type=float, default=0.35)
    p_red.add_argument("--alpha-dm", type=float, default=0.15)
    p_red.add_argument("--alpha-w", type=float, default=0.15)
    p_red.add_argument("--percentiles", default="0.05,0.95")

    p_sim = sub.add_parser("similar", help="nearest stored task for a cloud")
    _add_common(p_sim)
    p_sim.add_argument("--cloud", required=True)
    p_sim.add_argument("--store-as", default=None,
                       help="also store the cloud under this task label")

    p_bench = sub.add_parser("bench", help="paired baseline/meta benchmark")
    _add_common(p_bench)
    p_bench.add_argument("--pairs", type=int, default=7)
    p_bench.add_argument("--runs", type=int, default=6)
    p_bench.add_argument("--budget", default="10,20,5")
    p_bench.add_argument("--beta", type=float, default=0.65)
    p_bench.add_argument("--similarity", type=float, default=0.9)
    p_bench.add_argument("--difficulties", default="medium,hard")
    p_bench.add_argument("--source-runs", type=int, default=3)
    p_bench.add_argument("--jobs", type=int, default=1)
    p_bench.add_argument("--format", choices=("text", "csv"), default="text")
    p_bench.add_argument("--csv-out", default=None)
    p_bench.add_argument("--best-fraction", type=float, default=0.35)
    p_bench.add_argument("--alpha-dm", type=float, default=0.15)
    p_bench.add_argument("--alpha-w", type=float, default=0.15)
    p_bench.add_argument("--percentiles", default="0.05,0.95")

    p_rep = sub.add_parser("report", help="re-render stored results")
    _add_common(p_rep)
    p_rep.add_argument("--bench-csv", default=None)
    return parser


def _reduction_config(args: argparse.Namespace) -> ReductionConfig:
    lo, hi = _parse_percentiles(args.percentiles)
    return ReductionConfig(
        best_fraction=args.best_fraction, alpha_dm=args.alpha_dm,
        alpha_w=args.alpha_w, lo_percentile=lo, hi_percentile=hi,
    )


def cmd_optimize(args: argparse.Namespace) -> int:
    memory = LongTermMemory(resolve_memory_root(args.memory_root))
    budget = _parse_budget(args.budget)
    if args.task_file:
        task = simtask.SimTask.from_text(Path(args.task_file).read_text("utf-8"))
    elif args.task_seed is not None:
        task = simtask.make_task(args.task_seed, args.difficulty, label=args.task_label)
    else:
        raise ValueError("provide --task-seed or --task-file")
    acq = AcquisitionConfig(beta=args.beta)

    if args.meta:
        cloud = None
        if args.cloud:
            cloud = parse_cloud_text(Path(args.cloud).read_text("utf-8"), args.cloud)
        elif memory.list_tasks():
            raise ValueError("--meta needs --cloud when semantic memory is non-empty")
        result = run_with_meta_learning(
            cloud, task, memory, budget, args.seed,
            task_label=args.task_label, acq=acq,
            reduction=_reduction_config(args),
        )
    else:
        result = run_optimization(
            task, task.space, budget, args.seed, memory,
            task_label=args.task_label, acq=acq,
        )

    for w in result.metadata.get("warnings", []):
        print(f"warning: {w}")
    for rec in result.records:
        print(
            f"iter {rec.iteration:3d}  {rec.phase:<14s} score={rec.score:.6f}"
        )
    if "similar_task" in result.metadata:
        print(
            f"similar task: {result.metadata['similar_task']} "
            f"(distance {result.metadata['similar_distance']:.6f})"
        )
    best = " ".join(f"{v:.6f}" for v in result.best_params)
    print(f"task {result.task} run {result.run_id}")
    print(f"best params: {best}")
    print(f"final score: {result.final_score:.6f}")
    return 0


def cmd_reduce_bounds(args: argparse.Namespace) -> int:
    memory = LongTermMemory(resolve_memory_root(args.memory_root))
    records = memory.query_iterations(args.task)
    if not records:
        print(f"error: no episodic data for task {args.task!r}", file=sys.stderr)
        return 1
    config = _reduction_config(args)
    reduced = bounds_reduction.reduce_bounds(
        args.task, memory, param_space.default_space(), config, args.seed
    )
    memory.store_procedural(
        ProceduralEntry(task=args.task, kind="reduced_bounds", payload=reduced)
    )
    sys.stdout.write(bounds_reduction.format_bounds_report(reduced))
    if reduced.insufficient_data:
        print("note: fewer iterations than the minimum; bounds left unchanged")
    return 0


def cmd_similar(args: argparse.Namespace) -> int:
    memory = LongTermMemory(resolve_memory_root(args.memory_root))
    cloud = parse_cloud_text(Path(args.cloud).read_text("utf-8"), args.cloud)
    if args.store_as:
        memory.store_cloud(SemanticEntry(task=args.store_as, points=cloud))
    try:
        task, distance = similarity.most_similar(cloud, memory)
    except similarity.EmptySemanticStoreError:
        print("error: semantic memory is empty", file=sys.stderr)
        return 1
    print(f"{task} {distance:.6f}")
    return 0


# -- bench report rendering ---------------------------------------------------


def render_bench_text(report: BenchReport) -> str:
    lines = [
        f"paired benchmark seed={report.seed} "
        f"budget={report.budget[0]},{report.budget[1]},{report.budget[2]} "
        f"runs-per-condition={report.runs_per_condition}",
        f"{'task':<10s} {'condition':<9s} {'mean':>8s} {'sd':>8s} "
        f"{'median':>8s} {'worst':>8s} {'best':>8s}",
    ]
    for label in report.pair_labels:
        for condition in report.CONDITIONS:
            s = report.stats_for(label, condition)
            lines.append(
                f"{label:<10s} {condition:<9s} {s.mean:8.4f} {s.sd:8.4f} "
                f"{s.median:8.4f} {s.worst:8.4f} {s.best:8.4f}"
            )
    lines.append(f"overall baseline mean: {report.overall_mean('baseline'):.6f}")
    lines.append(f"overall meta mean:     {report.overall_mean('meta'):.6f}")
    p_line = f"paired wilcoxon two-sided p-value: {report.p_value:.6g}"
    if report.p_degenerate:
        p_line += " (degenerate: all per-task differences zero)"
    if not report.reliable:
        p_line += " (unreliable: fewer than 5 pairs)"
    lines.append(p_line)
    return "\n".join(lines) + "\n"


def render_bench_csv(report: BenchReport) -> str:
    lines = [
        f"# seed={report.seed}",
        f"# budget={report.budget[0]},{report.budget[1]},{report.budget[2]}",
        f"# runs_per_condition={report.runs_per_condition}",
        "pair,condition,run,score",
    ]
    for label in report.pair_labels:
        for condition in report.CONDITIONS:
            for r, score in enumerate(report.scores[(label, condition)], start=1):
                lines.append(f"{label},{condition},{r},{score!r}")
    return "\n".join(lines) + "\n"


def parse_bench_csv(text: str) -> BenchReport:
    """Rebuild a report from its CSV; aggregates recompute identically."""
    from . import stats as _stats

    meta = {"seed": 0, "budget": (0, 0, 0), "runs_per_condition": 0}
    scores: dict[tuple[str, str], list[float]] = {}
    labels: list[str] = []
    for line in text.splitlines():
        if not line.strip():
            continue
        if line.startswith("#"):
            key, _, value = line[1:].strip().partition("=")
            if key == "seed":
                meta["seed"] = int(value)
            elif key == "budget":
                meta["budget"] = tuple(int(v) for v in value.split(","))
            elif key == "runs_per_condition":
                meta["runs_per_condition"] = int(value)
            continue
        if line.startswith("pair,"):
            continue
        pair, condition, run, score = line.split(",")
        if pair not in labels:
            labels.append(pair)
        scores.setdefault((pair, condition), []).append(float(score))
    base = [float(np.mean(scores[(p, "baseline")])) for p in labels]
    meta_means = [float(np.mean(scores[(p, "meta")])) for p in labels]
    test = _stats.wilcoxon_signed_rank(np.array(meta_means) - np.array(base), 0.0)
    return BenchReport(
        seed=meta["seed"], budget=meta["budget"],
        runs_per_condition=meta["runs_per_condition"], pair_labels=labels,
        scores=scores, p_value=test.p_value, p_degenerate=test.degenerate,
        reliable=len(labels) >= 5,
    )


def cmd_bench(args: argparse.Namespace) -> int:
    root = resolve_memory_root(args.memory_root)
    memory = LongTermMemory(root)
    budget = _parse_budget(args.budget)
    difficulties = tuple(args.difficulties.split(","))
    for d in difficulties:
        if d not in simtask.DIFFICULTIES:
            raise ValueError(f"unknown difficulty {d!r}")
    pairs = make_task_pairs(
        args.pairs, args.seed, similarity_level=args.similarity,
        difficulties=difficulties,
    )
    report = paired_benchmark(
        pairs, args.runs, budget, args.seed, memory=memory,
        source_runs=args.source_runs, jobs=args.jobs,
        reduction=_reduction_config(args), acq=AcquisitionConfig(beta=args.beta),
    )
    csv_text = render_bench_csv(report)
    csv_path = Path(args.csv_out) if args.csv_out else root / f"bench-seed{args.seed}.csv"
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    csv_path.write_text(csv_text, encoding="utf-8")
    if args.format == "csv":
        sys.stdout.write(csv_text)
    else:
        sys.stdout.write(render_bench_text(report))
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    if args.bench_csv:
        path = Path(args.bench_csv)
        if not path.exists():
            print(f"error: no such file {path}", file=sys.stderr)
            return 1
        report = parse_bench_csv(path.read_text("utf-8"))
        sys.stdout.write(render_bench_text(report))
        return 0
    memory = LongTermMemory(resolve_memory_root(args.memory_root))
    tasks = memory.episodic_tasks()
    if not tasks:
        print("error: memory holds no runs", file=sys.stderr)
        return 1
    for task in tasks:
        records = memory.query_iterations(task)
        runs = sorted({r.run_id for r in records})
        finals = [r.score for r in records if r.phase == "final_eval"]
        best = max(r.score for r in records)
        line = (
            f"task {task}: runs={len(runs)} iterations={len(records)} "
            f"best-score={best:.6f}"
        )
        if finals:
            line += f" mean-final={float(np.mean(finals)):.6f}"
        print(line)
    return 0


_COMMANDS = {
    "optimize": cmd_optimize,
    "reduce-bounds": cmd_reduce_bounds,
    "similar": cmd_similar,
    "bench": cmd_bench,
    "report": cmd_report,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (MemoryNotFoundError, MemoryFormatError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:  # bad flag values
        print(f"{parser.prog}: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # run failures
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
