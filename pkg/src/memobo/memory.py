"""File-backed long-term memory: episodic, procedural, and semantic stores.

Layout under the root directory:

    episodic/<task>.log        one tab-separated line per iteration, append-only
    procedural/<task>.<kind>   latest JSON snapshot (optimized_params | reduced_bounds)
    semantic/<task>.xyz        point cloud, one `x y z` line per point

Episodic lines carry `task run iter phase p1 ... pm score` with shortest
round-trip float text, so records re-read exactly. Snapshot writes go
through a temp file plus rename; appends are single lines, so concurrent
writers on different tasks are safe. At most one writer per task at a time
is the caller's responsibility.
"""

from __future__ import annotations

import json
import os
import re
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

PHASE_INITIAL = "initial_design"
PHASE_INFILL = "infill_eqi"
PHASE_FINAL = "final_eval"
PHASES = (PHASE_INITIAL, PHASE_INFILL, PHASE_FINAL)

PROCEDURAL_KINDS = ("optimized_params", "reduced_bounds")

_TASK_RE = re.compile(r"^[A-Za-z0-9][A-Za-z0-9_.~-]*$")

MEMORY_ROOT_ENV = "MEMOBO_MEMORY_ROOT"


class MemoryNotFoundError(KeyError):
    """Requested entry does not exist (distinct from an I/O failure)."""


class MemoryFormatError(ValueError):
    """A stored file failed to parse; message carries the line number."""


class DuplicateRecordError(ValueError):
    """An episodic record with the same (task, run, iteration) key exists."""


def _check_task(task: str) -> str:
    if not _TASK_RE.match(task):
        raise ValueError(f"invalid task label {task!r}")
    return task


@dataclass(frozen=True)
class IterationRecord:
    """One episodic entry: where, when, which parameters, which score."""

    task: str
    run_id: int
    iteration: int
    phase: str
    params: tuple[float, ...]
    score: float

    def __post_init__(self) -> None:
        _check_task(self.task)
        if self.phase not in PHASES:
            raise ValueError(f"unknown phase {self.phase!r}")
        object.__setattr__(self, "run_id", int(self.run_id))
        object.__setattr__(self, "iteration", int(self.iteration))
        object.__setattr__(self, "params", tuple(float(v) for v in self.params))
        object.__setattr__(self, "score", float(self.score))
        if not np.isfinite(self.score) or not (0.0 <= self.score <= 1.0):
            raise ValueError(f"score must be finite in [0, 1], got {self.score}")

    def params_array(self) -> np.ndarray:
        return np.array(self.params, dtype=float)


@dataclass(frozen=True)
class ProceduralEntry:
    task: str
    kind: str
    payload: object
    created_run: int | None = None

    def __post_init__(self) -> None:
        _check_task(self.task)
        if self.kind not in PROCEDURAL_KINDS:
            raise ValueError(f"unknown procedural kind {self.kind!r}")


@dataclass(frozen=True)
class SemanticEntry:
    task: str
    points: np.ndarray
    descriptor: object | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        _check_task(self.task)
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        if pts.size == 0 or pts.shape[1] != 3:
            raise ValueError("point cloud must be a nonempty (n, 3) array")
        object.__setattr__(self, "points", pts)


def _format_record(rec: IterationRecord) -> str:
    fields = [rec.task, str(rec.run_id), str(rec.iteration), rec.phase]
    fields.extend(repr(v) for v in rec.params)
    fields.append(repr(rec.score))
    return "\t".join(fields)


def _parse_record(line: str, path: Path, lineno: int) -> IterationRecord:
    parts = line.rstrip("\n").split("\t")
    if len(parts) < 6:
        raise MemoryFormatError(f"{path}:{lineno}: expected >= 6 fields")
    try:
        return IterationRecord(
            task=parts[0],
            run_id=int(parts[1]),
            iteration=int(parts[2]),
            phase=parts[3],
            params=tuple(float(v) for v in parts[4:-1]),
            score=float(parts[-1]),
        )
    except (ValueError, IndexError) as exc:
        raise MemoryFormatError(f"{path}:{lineno}: {exc}") from exc


class LongTermMemory:
    """Handle over one memory root; cheap to construct, no global state."""

    def __init__(self, root: str | os.PathLike[str]) -> None:
        self.root = Path(root)
        self._episodic = self.root / "episodic"
        self._procedural = self.root / "procedural"
        self._semantic = self.root / "semantic"
        for d in (self._episodic, self._procedural, self._semantic):
            d.mkdir(parents=True, exist_ok=True)
        self._known_keys: dict[str, set[tuple[int, int]]] = {}
        self._append_handles: dict[str, object] = {}

    def close(self) -> None:
        for fh in self._append_handles.values():
            fh.close()
        self._append_handles.clear()

    def __del__(self) -> None:
        try:
            self.close()
        except Exception:
            pass

    # -- episodic ---------------------------------------------------------

    def _episodic_path(self, task: str) -> Path:
        return self._episodic / f"{_check_task(task)}.log"

    def _keys(self, task: str) -> set[tuple[int, int]]:
        keys = self._known_keys.get(task)
        if keys is None:
            keys = {(r.run_id, r.iteration) for r in self.query_iterations(task)}
            self._known_keys[task] = keys
        return keys

    def record_iteration(self, rec: IterationRecord) -> None:
        """Durable append of one record; key (task, run, iter) must be new."""
        keys = self._keys(rec.task)
        key = (rec.run_id, rec.iteration)
        if key in keys:
            raise DuplicateRecordError(
                f"duplicate episodic record {rec.task}/{rec.run_id}/{rec.iteration}"
            )
        fh = self._append_handles.get(rec.task)
        if fh is None:
            fh = open(self._episodic_path(rec.task), "a", encoding="utf-8")
            self._append_handles[rec.task] = fh
        fh.write(_format_record(rec) + "\n")
        fh.flush()
        keys.add(key)

    def query_iterations(self, task: str) -> list[IterationRecord]:
        """All records for a task ordered by (run_id, iteration)."""
        path = self._episodic_path(task)
        if not path.exists():
            return []
        records = []
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                records.append(_parse_record(line, path, lineno))
        records.sort(key=lambda r: (r.run_id, r.iteration))
        return records

    def next_run_id(self, task: str) -> int:
        """Smallest unused positive run id for a task."""
        recs = self.query_iterations(task)
        return 1 + max((r.run_id for r in recs), default=0)

    def episodic_tasks(self) -> list[str]:
        return sorted(p.stem for p in self._episodic.glob("*.log"))

    # -- procedural -------------------------------------------------------

    def _procedural_path(self, task: str, kind: str) -> Path:
        if kind not in PROCEDURAL_KINDS:
            raise ValueError(f"unknown procedural kind {kind!r}")
        return self._procedural / f"{_check_task(task)}.{kind}"

    def store_procedural(self, entry: ProceduralEntry) -> None:
        """Store the latest snapshot for (task, kind); earlier ones are replaced."""
        payload = entry.payload
        if hasattr(payload, "to_dict"):
            payload = payload.to_dict()
        elif isinstance(payload, np.ndarray):
            payload = payload.tolist()
        doc = {
            "task": entry.task,
            "kind": entry.kind,
            "created_run": entry.created_run,
            "payload": payload,
        }
        self._atomic_write(
            self._procedural_path(entry.task, entry.kind),
            json.dumps(doc, sort_keys=True, indent=1) + "\n",
        )

    def load_procedural(self, task: str, kind: str) -> ProceduralEntry:
        path = self._procedural_path(task, kind)
        if not path.exists():
            raise MemoryNotFoundError(f"no procedural entry {task}/{kind}")
        doc = json.loads(path.read_text(encoding="utf-8"))
        payload = doc["payload"]
        if kind == "reduced_bounds":
            from .bounds_reduction import ReducedBounds

            payload = ReducedBounds.from_dict(payload)
        return ProceduralEntry(
            task=doc["task"], kind=doc["kind"], payload=payload,
            created_run=doc.get("created_run"),
        )

    # -- semantic ---------------------------------------------------------

    def _semantic_path(self, task: str) -> Path:
        return self._semantic / f"{_check_task(task)}.xyz"

    def store_cloud(self, entry: SemanticEntry) -> None:
        lines = ["# point cloud for task " + entry.task]
        lines.extend(
            f"{float(p[0])!r} {float(p[1])!r} {float(p[2])!r}" for p in entry.points
        )
        self._atomic_write(self._semantic_path(entry.task), "\n".join(lines) + "\n")

    def load_cloud(self, task: str) -> SemanticEntry:
        path = self._semantic_path(task)
        if not path.exists():
            raise MemoryNotFoundError(f"no point cloud for task {task!r}")
        return SemanticEntry(task=task, points=parse_cloud_text(path.read_text("utf-8"), source=str(path)))

    def list_tasks(self) -> list[str]:
        """Tasks that have a semantic (point cloud) entry."""
        return sorted(p.stem for p in self._semantic.glob("*.xyz"))

    # -- shared -----------------------------------------------------------

    @staticmethod
    def _atomic_write(path: Path, text: str) -> None:
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                fh.write(text)
                fh.flush()
                os.fsync(fh.fileno())
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise


def parse_cloud_text(text: str, source: str = "<string>") -> np.ndarray:
    """Parse `x y z` lines (comments start with #) into an (n, 3) array."""
    points = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        parts = stripped.split()
        if len(parts) != 3:
            raise MemoryFormatError(
                f"{source}:{lineno}: expected 3 coordinates, got {len(parts)}"
            )
        try:
            points.append([float(v) for v in parts])
        except ValueError as exc:
            raise MemoryFormatError(f"{source}:{lineno}: {exc}") from exc
    if not points:
        raise MemoryFormatError(f"{source}: no points found")
    return np.array(points, dtype=float)


def resolve_memory_root(cli_value: str | None) -> Path:
    """Memory root from the CLI flag, falling back to the environment."""
    if cli_value:
        return Path(cli_value)
    env = os.environ.get(MEMORY_ROOT_ENV)
    if env:
        return Path(env)
    return Path("memobo-memory")


def iterations_by_run(records: Iterable[IterationRecord]) -> dict[int, list[IterationRecord]]:
    out: dict[int, list[IterationRecord]] = {}
    for rec in records:
        out.setdefault(rec.run_id, []).append(rec)
    for recs in out.values():
        recs.sort(key=lambda r: r.iteration)
    return out
