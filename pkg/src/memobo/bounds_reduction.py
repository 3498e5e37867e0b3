"""Per-task reduction of parameter bounds from the best past iterations.

For each parameter, the scaled values it took among the best fraction of a
task's episodic iterations are tested for uniformity. A roughly uniform
spread means the whole range keeps producing good results and the bound is
left alone. A non-uniform spread is shrunk: if a Wilcoxon test says the
values sit off-center, only the far side is pulled in (to an outlier-robust
percentile); if they are off-uniform but centered, both sides are pulled
in. Reduced bounds always nest inside the defaults.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from . import param_space, stats
from .param_space import ParameterSpace

DECISION_UNCHANGED = "unchanged"
DECISION_LOWER = "lower-raised"
DECISION_UPPER = "upper-lowered"
DECISION_BOTH = "both"

MIN_ITERATIONS = 15


@dataclass(frozen=True)
class ReductionConfig:
    best_fraction: float = 0.35
    alpha_dm: float = 0.15
    alpha_w: float = 0.15
    lo_percentile: float = 0.05
    hi_percentile: float = 0.95
    min_iterations: int = MIN_ITERATIONS
    dvm_replicates: int = 10_000

    def __post_init__(self) -> None:
        if not (0.0 < self.best_fraction <= 1.0):
            raise ValueError("best_fraction must be in (0, 1]")
        for a in (self.alpha_dm, self.alpha_w):
            if not (0.0 < a < 1.0):
                raise ValueError("alpha risks must be in (0, 1)")
        if not (0.0 <= self.lo_percentile < self.hi_percentile <= 1.0):
            raise ValueError("need 0 <= lo < hi <= 1 for the percentiles")


@dataclass(frozen=True)
class BoundDecision:
    name: str
    default_lower: float
    default_upper: float
    lower: float
    upper: float
    decision: str


@dataclass(frozen=True)
class ReducedBounds:
    """Reduced ranges for one task plus how and from what they were derived."""

    task: str
    entries: tuple[BoundDecision, ...]
    provenance: dict = field(compare=False)

    @property
    def bounds_map(self) -> dict[str, tuple[float, float]]:
        return {e.name: (e.lower, e.upper) for e in self.entries}

    @property
    def insufficient_data(self) -> bool:
        return bool(self.provenance.get("insufficient_data", False))

    @property
    def any_change(self) -> bool:
        return any(e.decision != DECISION_UNCHANGED for e in self.entries)

    def to_dict(self) -> dict:
        return {
            "task": self.task,
            "entries": [asdict(e) for e in self.entries],
            "provenance": self.provenance,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ReducedBounds":
        return cls(
            task=doc["task"],
            entries=tuple(BoundDecision(**e) for e in doc["entries"]),
            provenance=dict(doc["provenance"]),
        )


def select_best(records: list, fraction: float) -> list:
    """The ceil(fraction * N) highest-scoring records.

    Ties at the cutoff keep the earlier (run_id, iteration) record, so the
    selection is deterministic for any score pattern.
    """
    if not records:
        raise ValueError("cannot select from an empty record collection")
    if not (0.0 < fraction <= 1.0):
        raise ValueError("fraction must be in (0, 1]")
    count = int(np.ceil(fraction * len(records)))
    ordered = sorted(records, key=lambda r: (-r.score, r.run_id, r.iteration))
    return ordered[:count]


def _unchanged(space: ParameterSpace) -> tuple[BoundDecision, ...]:
    return tuple(
        BoundDecision(b.name, b.lower, b.upper, b.lower, b.upper, DECISION_UNCHANGED)
        for b in space.bounds
    )


def reduce_bounds(
    task: str,
    episodic_store,
    space: ParameterSpace,
    config: ReductionConfig = ReductionConfig(),
    seed: int = 0,
) -> ReducedBounds:
    """Derive reduced bounds for `task` from its episodic records.

    With fewer than `config.min_iterations` records the bounds come back
    unchanged and flagged, since the tests are unreliable on tiny samples.
    """
    records = episodic_store.query_iterations(task)
    provenance: dict = {
        "run_ids": sorted({r.run_id for r in records}),
        "n_iterations_total": len(records),
        "config": asdict(config),
        "seed": seed,
    }
    if len(records) < config.min_iterations:
        provenance["insufficient_data"] = True
        provenance["n_best_used"] = 0
        return ReducedBounds(task=task, entries=_unchanged(space), provenance=provenance)

    best = select_best(records, config.best_fraction)
    provenance["insufficient_data"] = False
    provenance["n_best_used"] = len(best)
    raw = np.array([r.params_array() for r in best])
    scaled = param_space.scale(space, raw)

    entries = []
    for j, bound in enumerate(space.bounds):
        values = scaled[:, j]
        lower, upper = bound.lower, bound.upper
        p_dm = stats.dudewicz_vdm_test(
            values, seed=seed, replicates=config.dvm_replicates
        ).p_value
        if p_dm >= config.alpha_dm:
            decision = DECISION_UNCHANGED
        else:
            p_w = stats.wilcoxon_signed_rank(values, 0.5).p_value
            median = stats.percentile(values, 0.5)
            # unscale the percentile back to raw units (same affine map as
            # param_space.unscale, per component)
            q_lo = stats.percentile(values, config.lo_percentile)
            q_hi = stats.percentile(values, config.hi_percentile)
            lo_val = bound.lower * (1.0 - q_lo) + bound.upper * q_lo
            hi_val = bound.lower * (1.0 - q_hi) + bound.upper * q_hi
            if p_w < config.alpha_w and median > 0.5:
                decision, lower = DECISION_LOWER, lo_val
            elif p_w < config.alpha_w and median < 0.5:
                decision, upper = DECISION_UPPER, hi_val
            else:
                decision, lower, upper = DECISION_BOTH, lo_val, hi_val
        entries.append(
            BoundDecision(bound.name, bound.lower, bound.upper, lower, upper, decision)
        )
    return ReducedBounds(task=task, entries=tuple(entries), provenance=provenance)


def _fmt(v: float) -> str:
    return f"{v:g}"


def format_bounds_report(reduced: ReducedBounds) -> str:
    """One `name default -> reduced decision` row per parameter."""
    lines = [f"reduced bounds for task {reduced.task}"]
    for e in reduced.entries:
        lines.append(
            f"{e.name} {_fmt(e.default_lower)}:{_fmt(e.default_upper)} -> "
            f"{_fmt(e.lower)}:{_fmt(e.upper)} {e.decision}"
        )
    return "\n".join(lines) + "\n"
