"""Shape similarity between tasks via D2 point-cloud distributions.

A task's point cloud is summarized by the histogram of random pairwise
distances normalized by their mean (the D2 shape distribution), which is
invariant to rigid motion and uniform scale up to sampling noise. The
most similar known task is the one whose descriptor sits at minimal
Euclidean distance from the query's. Any fixed-length embedding could be
swapped in behind the same descriptor/distance contract.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .seeding import make_rng

HISTOGRAM_SUPPORT = 3.0  # upper edge after mean-normalization; overflow clamps


class CloudTooSmallError(ValueError):
    """Descriptor needs at least 4 points."""


class DegenerateCloudError(ValueError):
    """All points coincide; pairwise distances carry no shape."""


class EmptySemanticStoreError(LookupError):
    """No stored tasks to compare against."""


@dataclass(frozen=True)
class DescriptorConfig:
    bins: int = 64
    pair_samples: int = 100_000
    seed: int = 0


@dataclass(frozen=True)
class ShapeDescriptor:
    """Normalized D2 histogram plus the scale constant that normalized it."""

    histogram: np.ndarray
    mean_distance: float

    def __post_init__(self) -> None:
        h = np.asarray(self.histogram, dtype=float)
        object.__setattr__(self, "histogram", h)
        if np.any(h < 0) or abs(float(h.sum()) - 1.0) > 1e-9:
            raise ValueError("histogram must be non-negative and sum to 1")


def descriptor(cloud: np.ndarray, config: DescriptorConfig = DescriptorConfig()) -> ShapeDescriptor:
    """D2 descriptor of a point cloud; deterministic given the config seed.

    The cloud is canonically sorted before seeded pair sampling, so the
    descriptor is exactly invariant to point order.
    """
    pts = np.atleast_2d(np.asarray(cloud, dtype=float))
    n = pts.shape[0]
    if n < 4:
        raise CloudTooSmallError(f"descriptor needs >= 4 points, got {n}")
    order = np.lexsort((pts[:, 2], pts[:, 1], pts[:, 0]))
    pts = pts[order]
    rng = make_rng(config.seed)
    i = rng.integers(0, n, size=config.pair_samples)
    j = rng.integers(0, n - 1, size=config.pair_samples)
    j = j + (j >= i)  # j != i without rejection
    dists = np.linalg.norm(pts[i] - pts[j], axis=1)
    mean_d = float(dists.mean())
    if mean_d <= 0.0:
        raise DegenerateCloudError("zero-diameter cloud")
    normalized = np.minimum(dists / mean_d, np.nextafter(HISTOGRAM_SUPPORT, 0.0))
    counts, _ = np.histogram(normalized, bins=config.bins, range=(0.0, HISTOGRAM_SUPPORT))
    hist = counts.astype(float) / config.pair_samples
    return ShapeDescriptor(histogram=hist, mean_distance=mean_d)


def descriptor_distance(a: ShapeDescriptor, b: ShapeDescriptor) -> float:
    """Euclidean distance between descriptor histograms."""
    if a.histogram.size != b.histogram.size:
        raise ValueError(
            f"descriptor sizes differ: {a.histogram.size} vs {b.histogram.size}"
        )
    return float(np.linalg.norm(a.histogram - b.histogram))


def most_similar(
    query_cloud: np.ndarray,
    semantic_store,
    config: DescriptorConfig = DescriptorConfig(),
) -> tuple[str, float]:
    """Stored task with minimal descriptor distance to the query cloud.

    Ties break lexicographically by task label. The store must expose
    `list_tasks()` and `load_cloud(task)`.
    """
    tasks = sorted(semantic_store.list_tasks())
    if not tasks:
        raise EmptySemanticStoreError("semantic store holds no tasks")
    query = descriptor(query_cloud, config)
    best_task = None
    best_dist = np.inf
    for task in tasks:
        entry = semantic_store.load_cloud(task)
        cached = getattr(entry, "descriptor", None)
        desc = cached if isinstance(cached, ShapeDescriptor) else descriptor(entry.points, config)
        dist = descriptor_distance(query, desc)
        if dist < best_dist:
            best_task, best_dist = task, dist
    assert best_task is not None
    return best_task, float(best_dist)
