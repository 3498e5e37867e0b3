"""Synthetic noisy bin-picking stand-in tasks over the default 9-d box.

A task is a latent success-probability field built from a few Gaussian
bumps over the scaled parameter cube, plus a floor. Scoring one parameter
set runs an episode of 15 grasp attempts: each attempt succeeds with
p_s(u), otherwise yields a partial (half-credit) outcome with conditional
probability p_p(u)/(1-p_s(u)), otherwise fails. The episode score is
(successes + 0.5 partials) / 15, so evaluation noise is binomial-scale,
heterogeneous, and bounded.

Bumps are deliberately axis-skewed: each one is narrow along a small
`active` subset of dimensions and nearly flat elsewhere, so the set of
good parameter values is tight in a few coordinates and diffuse in the
rest. That makes per-parameter bounds reduction genuinely informative.
Difficulty presets control how many dimensions are active and how narrow
they are.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import param_space
from .param_space import ParameterSpace
from .seeding import derive_seed, make_rng

ATTEMPTS = 15
PARTIAL_CREDIT = 0.5
PARTIAL_FRACTION = 0.5  # share of the non-success mass that yields partials
PARTIAL_CAP = 0.3
PEAK_CAP = 0.98

DIFFICULTIES = ("easy", "medium", "hard")
_BUMPS = {"easy": 2, "medium": 3, "hard": 4}
_ACTIVE_DIMS = {"easy": 2, "medium": 2, "hard": 3}
_ACTIVE_WIDTH = {"easy": (0.28, 0.50), "medium": (0.22, 0.42), "hard": (0.16, 0.34)}
_INACTIVE_WIDTH = (2.0, 4.0)


@dataclass(frozen=True)
class EpisodeResult:
    successes: int
    partials: int

    @property
    def score(self) -> float:
        return (self.successes + PARTIAL_CREDIT * self.partials) / ATTEMPTS


@dataclass(frozen=True)
class SimTask:
    """Latent success/partial fields over the scaled parameter box."""

    label: str
    centers: np.ndarray   # (K, m) bump centers in scaled space
    widths: np.ndarray    # (K, m) per-dimension bump widths
    heights: np.ndarray   # (K,) bump heights above the floor
    floor: float
    space: ParameterSpace = field(default_factory=param_space.default_space)
    seed: int = 0
    difficulty: str = "medium"
    partial_fraction: float = PARTIAL_FRACTION  # share of non-success mass

    def __post_init__(self) -> None:
        c = np.atleast_2d(np.asarray(self.centers, dtype=float))
        w = np.atleast_2d(np.asarray(self.widths, dtype=float))
        h = np.asarray(self.heights, dtype=float).reshape(-1)
        if c.size == 0:
            c = c.reshape(0, self.space.dimension)
            w = w.reshape(0, self.space.dimension)
        object.__setattr__(self, "centers", c)
        object.__setattr__(self, "widths", w)
        object.__setattr__(self, "heights", h)
        if c.shape != w.shape or c.shape[0] != h.size:
            raise ValueError("centers/widths/heights shapes disagree")
        if not (0.0 <= self.floor <= 1.0) or np.any(h < 0):
            raise ValueError("floor and heights must be non-negative, floor <= 1")
        if self.floor + (h.max() if h.size else 0.0) > 1.0:
            raise ValueError("peak success probability exceeds 1")

    def success_prob(self, u: np.ndarray) -> np.ndarray | float:
        """p_s at scaled points u ((m,) or (k, m))."""
        pts = np.asarray(u, dtype=float)
        single = pts.ndim == 1
        pts = np.atleast_2d(pts)
        if self.heights.size == 0:
            val = np.full(pts.shape[0], self.floor)
        else:
            z = (pts[:, None, :] - self.centers[None, :, :]) / self.widths[None, :, :]
            bump = np.exp(-0.5 * np.sum(z**2, axis=2))  # (k, K)
            val = self.floor + np.max(self.heights[None, :] * bump, axis=1)
        return float(val[0]) if single else val

    def partial_prob(self, u: np.ndarray) -> np.ndarray | float:
        ps = self.success_prob(u)
        if isinstance(ps, float):
            return min(self.partial_fraction * (1.0 - ps), PARTIAL_CAP)
        return np.minimum(self.partial_fraction * (1.0 - ps), PARTIAL_CAP)

    @property
    def peak_location(self) -> np.ndarray:
        """Scaled location of the highest bump (the floor if there is none)."""
        if self.heights.size == 0:
            return np.full(self.space.dimension, 0.5)
        return self.centers[int(np.argmax(self.heights))].copy()

    def to_text(self) -> str:
        doc = {
            "label": self.label,
            "seed": self.seed,
            "difficulty": self.difficulty,
            "floor": self.floor,
            "partial_fraction": self.partial_fraction,
            "centers": self.centers.tolist(),
            "widths": self.widths.tolist(),
            "heights": self.heights.tolist(),
            "space": param_space.serialize_space(self.space),
        }
        return json.dumps(doc, sort_keys=True, indent=1) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "SimTask":
        doc = json.loads(text)
        return cls(
            label=doc["label"],
            centers=np.array(doc["centers"], dtype=float),
            widths=np.array(doc["widths"], dtype=float),
            heights=np.array(doc["heights"], dtype=float),
            floor=float(doc["floor"]),
            space=param_space.parse_space(doc["space"]),
            seed=int(doc["seed"]),
            difficulty=doc["difficulty"],
            partial_fraction=float(doc.get("partial_fraction", PARTIAL_FRACTION)),
        )


def make_task(seed: int, difficulty: str = "medium", label: str | None = None) -> SimTask:
    """Deterministic synthetic task; harder presets are narrower and bumpier."""
    if difficulty not in DIFFICULTIES:
        raise ValueError(f"difficulty must be one of {DIFFICULTIES}")
    space = param_space.default_space()
    m = space.dimension
    rng = make_rng(derive_seed("simtask", seed, difficulty))
    n_bumps = _BUMPS[difficulty]
    floor = float(rng.uniform(0.05, 0.25))
    peak = float(rng.uniform(0.85, PEAK_CAP))
    n_active = _ACTIVE_DIMS[difficulty]
    w_lo, w_hi = _ACTIVE_WIDTH[difficulty]

    centers = rng.uniform(0.1, 0.9, size=(n_bumps, m))
    widths = rng.uniform(*_INACTIVE_WIDTH, size=(n_bumps, m))
    for k in range(n_bumps):
        active = rng.choice(m, size=n_active, replace=False)
        widths[k, active] = rng.uniform(w_lo, w_hi, size=n_active)
    heights = np.concatenate(
        [[peak - floor], rng.uniform(0.3, 0.6, size=n_bumps - 1) * (peak - floor)]
    )
    return SimTask(
        label=label or f"sim-{difficulty}-{seed}",
        centers=centers, widths=widths, heights=heights, floor=floor,
        space=space, seed=seed, difficulty=difficulty,
    )


def perturb_task(
    task: SimTask, similarity: float, seed: int, label: str | None = None
) -> SimTask:
    """A task resembling `task`; similarity 1 reproduces it exactly.

    Bump centers move by (1-similarity) times a displacement drawn once
    per bump (at most 0.25 per coordinate) and heights jitter by up to
    (1-similarity) * 0.1.
    """
    if not (0.0 <= similarity <= 1.0):
        raise ValueError("similarity must be in [0, 1]")
    rng = make_rng(derive_seed("perturb", task.seed, seed))
    k, m = task.centers.shape
    delta = rng.uniform(-0.25, 0.25, size=(k, m))
    centers = np.clip(task.centers + (1.0 - similarity) * delta, 0.02, 0.98)
    jitter = rng.uniform(-0.1, 0.1, size=k)
    heights = np.clip(
        task.heights + (1.0 - similarity) * jitter, 0.02, PEAK_CAP - task.floor
    )
    return SimTask(
        label=label or f"{task.label}~s{similarity:g}-{seed}",
        centers=centers, widths=task.widths.copy(), heights=heights,
        floor=task.floor, space=task.space, seed=task.seed,
        difficulty=task.difficulty, partial_fraction=task.partial_fraction,
    )


def evaluate(task: SimTask, params, rng: np.random.Generator) -> EpisodeResult:
    """Run one 15-attempt episode at raw parameters; consumes 15 draws."""
    raw = params.as_array() if hasattr(params, "as_array") else np.asarray(params, dtype=float)
    u = param_space.scale(task.space, raw)
    ps = float(task.success_prob(u))
    pp = float(task.partial_prob(u))
    draws = rng.random(ATTEMPTS)
    successes = int(np.count_nonzero(draws < ps))
    partials = int(np.count_nonzero((draws >= ps) & (draws < ps + pp)))
    return EpisodeResult(successes=successes, partials=partials)


def make_evaluator(task: SimTask):
    """Adapter from a SimTask to the orchestrator's evaluator interface."""

    def evaluator(raw: np.ndarray, rng: np.random.Generator) -> float:
        return evaluate(task, raw, rng).score

    return evaluator
