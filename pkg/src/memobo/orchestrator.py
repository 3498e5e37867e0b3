"""Optimization runs, meta-learning warm starts, and the paired benchmark.

A run walks three phases over a (possibly reduced) parameter space: a
maximin Latin Hypercube initial design, model-guided infill that evaluates
the expected-quantile-improvement maximizer each iteration, and repeated
final evaluations of the surrogate's best predicted point. Every
evaluation lands in episodic memory; the optimized parameters land in
procedural memory.

The meta-learning variant first retrieves the most similar known task by
point-cloud shape, loads (or derives) its reduced bounds, and runs the
same loop over the restricted space. The paired benchmark replays the
with/without comparison across synthetic task pairs and reports a paired
Wilcoxon p-value over per-task means.
"""

from __future__ import annotations

import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import acquisition, bounds_reduction, cmaes, gp, lhs, param_space, similarity, stats
from .acquisition import AcquisitionConfig
from .bounds_reduction import ReducedBounds, ReductionConfig
from .memory import (
    PHASE_FINAL,
    PHASE_INFILL,
    PHASE_INITIAL,
    IterationRecord,
    LongTermMemory,
    MemoryNotFoundError,
    ProceduralEntry,
)
from .param_space import ParameterSpace
from .seeding import derive_seed, make_rng
from .simtask import SimTask, make_evaluator, make_task, perturb_task

DESIGN_RESTARTS = 100
ACQ_BUDGET = 1500
ACQ_RESTARTS = 2
ACQ_PROBES = 100
ACQ_POPSIZE = 40  # big generations amortize the per-generation cost
GP_RESTARTS = 2
GP_FIT_EVALS = 240
GP_REFIT_EVALS = 100


class OptimizationAborted(RuntimeError):
    """Evaluator failure mid-run; records written so far are retained."""

    def __init__(self, message: str, records: list[IterationRecord]):
        super().__init__(message)
        self.records = records


@dataclass(frozen=True)
class BudgetConfig:
    init: int = 10
    infill: int = 20
    final_reps: int = 5

    def __post_init__(self) -> None:
        if min(self.init, self.infill, self.final_reps) < 1:
            raise ValueError("all budget phases must be >= 1")

    @property
    def total(self) -> int:
        return self.init + self.infill + self.final_reps

    def as_tuple(self) -> tuple[int, int, int]:
        return (self.init, self.infill, self.final_reps)


@dataclass
class RunResult:
    task: str
    run_id: int
    records: list[IterationRecord]
    best_params: np.ndarray
    final_score: float
    metadata: dict = field(default_factory=dict)


Evaluator = Callable[[np.ndarray, np.random.Generator], float]


def _as_evaluator(task_or_evaluator) -> tuple[Evaluator, str | None]:
    if isinstance(task_or_evaluator, SimTask):
        return make_evaluator(task_or_evaluator), task_or_evaluator.label
    if callable(task_or_evaluator):
        return task_or_evaluator, None
    raise TypeError("expected a SimTask or an evaluator callable")


def _maximize(
    objective_batch: Callable[[np.ndarray], np.ndarray],
    m: int,
    seed: int,
    budget: int,
    restarts: int,
) -> np.ndarray:
    """Maximize a batched criterion over the unit box; probe-guarded.

    CMA-ES restarts begin from Latin Hypercube starts; 100 seeded uniform
    probes join the candidate set, so the returned point is never worse
    than the best probe.
    """
    starts = lhs.maximin_lhs(restarts, m, derive_seed(seed, "acq-starts"), restarts=10)
    res = cmaes.minimize_restarts(
        lambda pts: -objective_batch(pts),
        np.zeros(m), np.ones(m),
        budget=budget, restarts=restarts, seed=derive_seed(seed, "acq-cma"),
        x0s=starts.points, popsize=ACQ_POPSIZE, batch=True,
    )
    probes = make_rng(derive_seed(seed, "acq-probes")).random((ACQ_PROBES, m))
    probe_vals = objective_batch(probes)
    k = int(np.argmax(probe_vals))
    if probe_vals[k] > -res.best_f:
        return probes[k]
    return res.best_x


def run_optimization(
    task_or_evaluator,
    space: ParameterSpace,
    budget: BudgetConfig,
    seed: int,
    memory: LongTermMemory,
    task_label: str | None = None,
    run_id: int | None = None,
    acq: AcquisitionConfig | None = None,
    extra_metadata: dict | None = None,
) -> RunResult:
    """One full optimization run; all iterations recorded in memory.

    Deterministic given (task, space, budget, seed). The final phase
    re-evaluates the model's best predicted point `final_reps` times and
    reports their mean as the run's score.
    """
    evaluator, label = _as_evaluator(task_or_evaluator)
    task = task_label or label
    if task is None:
        raise ValueError("task_label is required for a bare evaluator")
    if run_id is None:
        run_id = memory.next_run_id(task)
    base_beta = acq.beta if acq is not None else AcquisitionConfig().beta
    m = space.dimension
    rng_eval = make_rng(derive_seed(seed, "eval"))
    records: list[IterationRecord] = []
    points: list[np.ndarray] = []
    scores: list[float] = []

    def evaluate_at(u: np.ndarray, iteration: int, phase: str) -> float:
        raw = param_space.unscale(space, u)
        try:
            score = float(evaluator(raw, rng_eval))
        except Exception as exc:
            raise OptimizationAborted(
                f"evaluator failed at iteration {iteration}: {exc}", records
            ) from exc
        rec = IterationRecord(
            task=task, run_id=run_id, iteration=iteration, phase=phase,
            params=tuple(raw), score=score,
        )
        memory.record_iteration(rec)
        records.append(rec)
        return score

    design = lhs.maximin_lhs(
        budget.init, m, derive_seed(seed, "design"), restarts=DESIGN_RESTARTS
    )
    for i, u in enumerate(design.points):
        points.append(u)
        scores.append(evaluate_at(u, i + 1, PHASE_INITIAL))

    warm = None
    model = None
    tau_f = 0.0
    for t in range(1, budget.infill + 1):
        model = gp.fit(
            np.array(points), np.array(scores), derive_seed(seed, "gp", t),
            restarts=GP_RESTARTS,
            max_evals=GP_FIT_EVALS if warm is None else GP_REFIT_EVALS,
            warm_start=warm,
        )
        warm = model.hyper
        tau_f = model.noise_std
        cfg = AcquisitionConfig(beta=base_beta, tau_future=tau_f)
        incumbent = acquisition.q_min(model, np.array(points), cfg.beta)
        u_next = _maximize(
            lambda pts: np.asarray(acquisition.eqi(model, pts, cfg, incumbent)),
            m, derive_seed(seed, "acq", t), ACQ_BUDGET, ACQ_RESTARTS,
        )
        points.append(u_next)
        scores.append(evaluate_at(u_next, budget.init + t, PHASE_INFILL))

    model = gp.fit(
        np.array(points), np.array(scores), derive_seed(seed, "gp", "final"),
        restarts=GP_RESTARTS, max_evals=GP_REFIT_EVALS, warm_start=warm,
    )
    mean_argmin = _maximize(
        lambda pts: -model.posterior(pts)[0],
        m, derive_seed(seed, "final-mean"), ACQ_BUDGET, ACQ_RESTARTS,
    )
    candidates = np.vstack([np.array(points), mean_argmin])
    cand_means = model.posterior(candidates)[0]
    best_u = candidates[int(np.argmin(cand_means))]
    best_raw = param_space.unscale(space, best_u)

    final_scores = [
        evaluate_at(best_u, budget.init + budget.infill + r, PHASE_FINAL)
        for r in range(1, budget.final_reps + 1)
    ]
    final_score = float(np.mean(final_scores))

    memory.store_procedural(
        ProceduralEntry(
            task=task, kind="optimized_params",
            payload={"params": [float(v) for v in best_raw],
                     "names": list(space.names)},
            created_run=run_id,
        )
    )
    metadata = {
        "space": param_space.serialize_space(space),
        "seed": seed,
        "budget": budget.as_tuple(),
        "beta": base_beta,
        "tau_future_policy": "fitted-noise-std",
        "tau_future_last": tau_f,
        "acq_budget": ACQ_BUDGET,
        "acq_restarts": ACQ_RESTARTS,
        "final_candidates": "evaluated-points+posterior-mean-argmin",
        "warnings": [],
    }
    if extra_metadata:
        metadata.update(extra_metadata)
    return RunResult(
        task=task, run_id=run_id, records=records,
        best_params=best_raw, final_score=final_score, metadata=metadata,
    )


def load_or_reduce_bounds(
    task: str,
    memory: LongTermMemory,
    space: ParameterSpace,
    config: ReductionConfig,
    seed: int,
) -> ReducedBounds:
    """Reduced bounds from procedural memory, derived and stored on miss."""
    try:
        entry = memory.load_procedural(task, "reduced_bounds")
        payload = entry.payload
        if isinstance(payload, ReducedBounds):
            return payload
    except MemoryNotFoundError:
        pass
    reduced = bounds_reduction.reduce_bounds(task, memory, space, config, seed)
    memory.store_procedural(
        ProceduralEntry(task=task, kind="reduced_bounds", payload=reduced)
    )
    return reduced


def run_with_meta_learning(
    new_task_cloud: np.ndarray,
    task_or_evaluator,
    memory: LongTermMemory,
    budget: BudgetConfig,
    seed: int,
    task_label: str | None = None,
    space: ParameterSpace | None = None,
    acq: AcquisitionConfig | None = None,
    reduction: ReductionConfig | None = None,
    descriptor_config: similarity.DescriptorConfig | None = None,
) -> RunResult:
    """Optimization over bounds reduced from the most similar known task.

    With an empty semantic store the run falls back to the unrestricted
    space and flags a warning in its metadata.
    """
    space = space or param_space.default_space()
    reduction = reduction or ReductionConfig()
    descriptor_config = descriptor_config or similarity.DescriptorConfig()
    extra: dict = {"meta": True}
    warnings: list[str] = []
    active = space
    try:
        similar, distance = similarity.most_similar(
            new_task_cloud, memory, descriptor_config
        )
        reduced = load_or_reduce_bounds(
            similar, memory, space, reduction, derive_seed(seed, "reduce", similar)
        )
        active = param_space.restrict(space, reduced)
        extra["similar_task"] = similar
        extra["similar_distance"] = distance
        if reduced.insufficient_data:
            warnings.append(f"insufficient episodic data for {similar}; bounds unchanged")
    except similarity.EmptySemanticStoreError:
        warnings.append("semantic memory empty; falling back to default bounds")
    extra["warnings"] = warnings
    return run_optimization(
        task_or_evaluator, active, budget, seed, memory,
        task_label=task_label, acq=acq, extra_metadata=extra,
    )


# -- paired benchmark -------------------------------------------------------


@dataclass(frozen=True)
class TaskPair:
    label: str
    source: SimTask
    target: SimTask


def make_task_pairs(
    n_pairs: int,
    seed: int,
    similarity_level: float = 0.9,
    difficulties: Sequence[str] = ("hard", "hard", "medium"),
) -> list[TaskPair]:
    """Synthetic source/target pairs with controlled resemblance."""
    pairs = []
    for i in range(n_pairs):
        difficulty = difficulties[i % len(difficulties)]
        source = make_task(
            derive_seed(seed, "pair", i), difficulty, label=f"pair{i}_src"
        )
        target = perturb_task(
            source, similarity_level, derive_seed(seed, "pair-perturb", i),
            label=f"pair{i}_tgt",
        )
        pairs.append(TaskPair(label=f"pair{i}", source=source, target=target))
    return pairs


@dataclass(frozen=True)
class ConditionStats:
    mean: float
    sd: float
    median: float
    worst: float
    best: float


@dataclass
class BenchReport:
    seed: int
    budget: tuple[int, int, int]
    runs_per_condition: int
    pair_labels: list[str]
    scores: dict[tuple[str, str], list[float]]  # (pair, condition) -> per-run scores
    p_value: float
    p_degenerate: bool
    reliable: bool
    reduced_bounds: dict[str, ReducedBounds] = field(default_factory=dict)

    CONDITIONS = ("baseline", "meta")

    def stats_for(self, pair: str, condition: str) -> ConditionStats:
        vals = np.array(self.scores[(pair, condition)])
        sd = float(np.std(vals, ddof=1)) if vals.size > 1 else 0.0
        return ConditionStats(
            mean=float(np.mean(vals)), sd=sd, median=float(np.median(vals)),
            worst=float(np.min(vals)), best=float(np.max(vals)),
        )

    def overall_mean(self, condition: str) -> float:
        vals = [v for (p, c), run_scores in sorted(self.scores.items())
                if c == condition for v in run_scores]
        return float(np.mean(vals))

    def per_task_means(self, condition: str) -> list[float]:
        return [self.stats_for(p, condition).mean for p in self.pair_labels]


def _bench_run_args(
    pairs: list[TaskPair],
    runs_per_condition: int,
    budget: BudgetConfig,
    seed: int,
    root: str,
    spaces: dict[str, ParameterSpace],
    acq: AcquisitionConfig,
) -> list[tuple]:
    args = []
    for pair in pairs:
        for r in range(1, runs_per_condition + 1):
            run_seed = derive_seed(seed, "bench-run", pair.label, r)
            for condition in BenchReport.CONDITIONS:
                space = spaces[pair.label] if condition == "meta" else pair.target.space
                args.append(
                    (pair.label, condition, r, pair.target.to_text(),
                     param_space.serialize_space(space), budget.as_tuple(),
                     run_seed, f"{root}/runs/seed{seed}", acq.beta)
                )
    return args


def _bench_worker(arg: tuple) -> tuple[str, str, int, float]:
    (pair_label, condition, r, task_text, space_text, budget_tuple,
     run_seed, root, beta) = arg
    task = SimTask.from_text(task_text)
    space = param_space.parse_space(space_text)
    run_root = f"{root}/{pair_label}-{condition}-r{r}"
    mem = LongTermMemory(run_root)
    result = run_optimization(
        task, space, BudgetConfig(*budget_tuple), run_seed, mem,
        acq=AcquisitionConfig(beta=beta),
        extra_metadata={"condition": condition, "pair": pair_label},
    )
    return pair_label, condition, r, result.final_score


def build_knowledge_base(
    pairs: list[TaskPair],
    budget: BudgetConfig,
    memory: LongTermMemory,
    source_runs: int,
    knowledge_seed: int,
    acq: AcquisitionConfig | None = None,
) -> None:
    """Populate episodic memory with plain runs on each pair's source task.

    Already-present runs are kept, so a knowledge base can be shared across
    benchmark invocations with the same pairs and knowledge seed.
    """
    acq = acq or AcquisitionConfig()
    for pair in pairs:
        existing_runs = {r.run_id for r in memory.query_iterations(pair.source.label)}
        for r in range(len(existing_runs) + 1, source_runs + 1):
            run_optimization(
                pair.source, pair.source.space, budget,
                derive_seed(knowledge_seed, "kb", pair.label, r), memory, acq=acq,
            )


def paired_benchmark(
    task_pairs: list[TaskPair],
    runs_per_condition: int,
    budget: BudgetConfig,
    seed: int,
    memory: LongTermMemory | None = None,
    source_runs: int = 5,
    jobs: int = 1,
    reduction: ReductionConfig | None = None,
    acq: AcquisitionConfig | None = None,
    knowledge_seed: int | None = None,
    disable_reduction: bool = False,
) -> BenchReport:
    """Baseline vs meta-learning comparison over task pairs.

    For each pair, `source_runs` plain runs on the source task populate
    episodic memory (skipped if already present, so a knowledge base can
    be shared), reduced bounds are derived from them, and then each
    condition optimizes the target `runs_per_condition` times. Baseline
    and meta runs of the same index share a seed, so with identical
    spaces they produce identical results (paired, common random
    numbers). Runs may execute in parallel; `jobs` changes neither the
    scores nor their order.
    """
    if memory is None:
        tmp = tempfile.TemporaryDirectory(prefix="memobo-bench-")
        memory = LongTermMemory(tmp.name)
        memory._tmp_guard = tmp  # keep alive for the report's lifetime
    reduction = reduction or ReductionConfig()
    acq = acq or AcquisitionConfig()
    if knowledge_seed is None:
        knowledge_seed = derive_seed(seed, "knowledge")

    build_knowledge_base(task_pairs, budget, memory, source_runs, knowledge_seed, acq)
    spaces: dict[str, ParameterSpace] = {}
    reduced_map: dict[str, ReducedBounds] = {}
    for pair in task_pairs:
        if disable_reduction:
            spaces[pair.label] = pair.target.space
            continue
        reduced = load_or_reduce_bounds(
            pair.source.label, memory, pair.source.space, reduction,
            derive_seed(knowledge_seed, "reduce", pair.label),
        )
        reduced_map[pair.label] = reduced
        spaces[pair.label] = param_space.restrict(pair.target.space, reduced)

    args = _bench_run_args(
        task_pairs, runs_per_condition, budget, seed, str(memory.root), spaces, acq
    )
    if jobs <= 1:
        outcomes = [_bench_worker(a) for a in args]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_bench_worker, args, chunksize=1))

    scores: dict[tuple[str, str], list[float]] = {}
    for pair in task_pairs:
        for condition in BenchReport.CONDITIONS:
            scores[(pair.label, condition)] = [np.nan] * runs_per_condition
    for pair_label, condition, r, final_score in outcomes:
        scores[(pair_label, condition)][r - 1] = final_score

    labels = [p.label for p in task_pairs]
    base_means = [float(np.mean(scores[(p, "baseline")])) for p in labels]
    meta_means = [float(np.mean(scores[(p, "meta")])) for p in labels]
    diffs = np.array(meta_means) - np.array(base_means)
    test = stats.wilcoxon_signed_rank(diffs, 0.0)
    return BenchReport(
        seed=seed, budget=budget.as_tuple(), runs_per_condition=runs_per_condition,
        pair_labels=labels, scores=scores, p_value=test.p_value,
        p_degenerate=test.degenerate, reliable=len(task_pairs) >= 5,
        reduced_bounds=reduced_map,
    )
