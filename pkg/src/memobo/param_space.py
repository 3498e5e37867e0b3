"""Bounded continuous parameter spaces and raw <-> unit-cube scaling.

Every internal component (design, surrogate, acquisition, search) works in
the scaled unit hypercube; raw values only appear at black-box evaluation
time and in persisted records. Spaces are immutable and safe to share.
"""

from __future__ import annotations

from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field

import numpy as np


class BoundsViolationError(ValueError):
    """A value or a reduced range falls outside its parameter bound."""


@dataclass(frozen=True)
class ParameterBound:
    """One named continuous parameter with raw-unit bounds."""

    name: str
    lower: float
    upper: float

    def __post_init__(self) -> None:
        if not self.name:
            raise ValueError("parameter name must be nonempty")
        if not (self.lower < self.upper):
            raise ValueError(
                f"parameter {self.name!r}: lower ({self.lower}) must be "
                f"strictly below upper ({self.upper})"
            )

    @property
    def width(self) -> float:
        return self.upper - self.lower


@dataclass(frozen=True)
class ParameterSpace:
    """Ordered collection of parameter bounds; dimension m == len(bounds)."""

    bounds: tuple[ParameterBound, ...]
    name: str = "space"

    def __post_init__(self) -> None:
        if len(self.bounds) < 1:
            raise ValueError("a parameter space needs at least one parameter")
        names = [b.name for b in self.bounds]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate parameter names in space: {names}")
        object.__setattr__(self, "bounds", tuple(self.bounds))

    @property
    def dimension(self) -> int:
        return len(self.bounds)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(b.name for b in self.bounds)

    @property
    def lower(self) -> np.ndarray:
        return np.array([b.lower for b in self.bounds], dtype=float)

    @property
    def upper(self) -> np.ndarray:
        return np.array([b.upper for b in self.bounds], dtype=float)


@dataclass(frozen=True)
class ParamVector:
    """Raw-unit parameter values tied to the space they were drawn from."""

    values: tuple[float, ...]
    space: ParameterSpace = field(repr=False)

    def __post_init__(self) -> None:
        vals = tuple(float(v) for v in self.values)
        object.__setattr__(self, "values", vals)
        check_within(self.space, np.asarray(vals))

    def as_array(self) -> np.ndarray:
        return np.array(self.values, dtype=float)


def check_within(space: ParameterSpace, v: np.ndarray) -> None:
    """Raise BoundsViolationError naming the first out-of-bounds parameter."""
    v = np.asarray(v, dtype=float)
    if v.shape[-1] != space.dimension:
        raise ValueError(
            f"expected {space.dimension} values, got {v.shape[-1]}"
        )
    lo, hi = space.lower, space.upper
    bad = (v < lo) | (v > hi)
    if np.any(bad):
        j = int(np.argmax(np.atleast_2d(bad).any(axis=0)))
        b = space.bounds[j]
        raise BoundsViolationError(
            f"parameter {b.name!r} value outside [{b.lower}, {b.upper}]"
        )


def _values(v: "ParamVector | np.ndarray | Iterable[float]") -> np.ndarray:
    if isinstance(v, ParamVector):
        return v.as_array()
    return np.asarray(v, dtype=float)


def scale(space: ParameterSpace, v: "ParamVector | np.ndarray") -> np.ndarray:
    """Map raw values into [0,1]^m; affine and strictly increasing per axis.

    Accepts a single vector or an (n, m) batch. Out-of-bounds components
    raise BoundsViolationError naming the parameter.
    """
    arr = _values(v)
    check_within(space, arr)
    lo, hi = space.lower, space.upper
    return (arr - lo) / (hi - lo)


def unscale(space: ParameterSpace, u: np.ndarray) -> np.ndarray:
    """Map unit-cube values back to raw units (inverse of `scale`)."""
    u = np.asarray(u, dtype=float)
    if u.shape[-1] != space.dimension:
        raise ValueError(f"expected {space.dimension} values, got {u.shape[-1]}")
    if np.any(u < 0.0) or np.any(u > 1.0):
        raise BoundsViolationError("unit-cube component outside [0, 1]")
    lo, hi = space.lower, space.upper
    # lo*(1-u) + hi*u hits the bounds exactly at u=0 and u=1
    return lo * (1.0 - u) + hi * u


def restrict(
    space: ParameterSpace,
    reduced: "Mapping[str, tuple[float, float]] | object",
) -> ParameterSpace:
    """Return a new space with ranges narrowed to `reduced`.

    `reduced` is a mapping {name: (lower, upper)} or any object exposing a
    `bounds_map` property with that shape (e.g. a ReducedBounds record).
    Every reduced range must be nested inside the original one. Parameters
    absent from the mapping keep their original range.
    """
    if not isinstance(reduced, Mapping):
        reduced = reduced.bounds_map  # type: ignore[union-attr]
    unknown = set(reduced) - set(space.names)
    if unknown:
        raise ValueError(f"reduced bounds name unknown parameters: {sorted(unknown)}")
    new_bounds = []
    for b in space.bounds:
        if b.name not in reduced:
            new_bounds.append(b)
            continue
        lo, hi = (float(x) for x in reduced[b.name])
        if not (lo < hi):
            raise BoundsViolationError(
                f"parameter {b.name!r}: inverted reduced range [{lo}, {hi}]"
            )
        if lo < b.lower or hi > b.upper:
            raise BoundsViolationError(
                f"parameter {b.name!r}: reduced range [{lo}, {hi}] not nested "
                f"inside [{b.lower}, {b.upper}]"
            )
        new_bounds.append(ParameterBound(b.name, lo, hi))
    return ParameterSpace(tuple(new_bounds), name=space.name)


# Factory defaults for the 9-parameter tuning problem this package ships
# benchmarks for; raw units are tool-specific.
_DEFAULT_RANGES = (
    ("p1", -20.0, 20.0),
    ("p2", 5.0, 15.0),
    ("p3", 16.0, 100.0),
    ("p4", 5.0, 30.0),
    ("p5", 5.0, 30.0),
    ("p6", 5.0, 40.0),
    ("p7", 30.0, 300.0),
    ("p8", 5.0, 20.0),
    ("p9", 1.0, 10.0),
)


def default_space() -> ParameterSpace:
    """The default 9-parameter space used by the synthetic benchmark."""
    return ParameterSpace(
        tuple(ParameterBound(n, lo, hi) for n, lo, hi in _DEFAULT_RANGES),
        name="default",
    )


def serialize_space(space: ParameterSpace) -> str:
    """Render a space as text: a header line, then `name lower upper` rows."""
    lines = [f"space {space.name}"]
    for b in space.bounds:
        lines.append(f"{b.name} {b.lower!r} {b.upper!r}")
    return "\n".join(lines) + "\n"


def parse_space(text: str) -> ParameterSpace:
    """Inverse of `serialize_space`."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("space "):
        raise ValueError("space text must start with a 'space <name>' header")
    name = lines[0].split(maxsplit=1)[1]
    bounds = []
    for ln in lines[1:]:
        parts = ln.split()
        if len(parts) != 3:
            raise ValueError(f"malformed bound line: {ln!r}")
        bounds.append(ParameterBound(parts[0], float(parts[1]), float(parts[2])))
    return ParameterSpace(tuple(bounds), name=name)
