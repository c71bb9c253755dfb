"""Linear trace certification of groups of witness points.

For a group of points on a union of complete components, the sum of a generic
linear projection over the group is an affine function of the slice offset as
the slice moves in a parallel family. Three parallel slices give two samples
to interpolate and one to check.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable

import numpy as np

from .embedding import SliceSet, as_rng, random_unit, shifted_slice
from .scheduler import Job, Scheduler, make_job
from .tracker import MonodromyHomotopy, PathResult, TrackSettings
from .witness import WitnessSet

__all__ = [
    "TRACE_TOL",
    "TraceGrid",
    "Certificate",
    "GridBuilder",
    "build_trace_grid",
    "trace_sums",
    "predict",
    "trace_test",
    "certify_partition",
]

TRACE_TOL = 1e-8
MATCH_TOL = 1e-4
_MAX_GAMMA_RETRIES = 3
_MAX_SLICE_RETRIES = 5
_MIN_PROJECTION_DISTANCE = 1e-2


@dataclass(frozen=True, eq=False)
class TraceGrid:
    """The base witness set plus two index-aligned copies on parallel slices.

    ``abscissae`` are the first offset coordinate of the three slices; the
    offsets differ only along a common direction, so the family is a line.
    """

    base: WitnessSet
    grid1: WitnessSet
    grid2: WitnessSet
    projection: np.ndarray
    abscissae: tuple[complex, complex, complex]

    def __post_init__(self):
        if not (self.base.degree == self.grid1.degree == self.grid2.degree):
            raise ValueError("grid witness sets must have equal degree")
        c0, c1, c2 = self.abscissae
        if min(abs(c0 - c1), abs(c0 - c2), abs(c1 - c2)) == 0:
            raise ValueError("abscissae must be pairwise distinct")
        if len(self.projection) != self.base.emb.n:
            raise ValueError("projection must have n entries")

    @cached_property
    def values(self) -> np.ndarray:
        """3 x d projected coordinates, row j on slice j."""
        rows = [w.coordinates @ self.projection for w in (self.base, self.grid1, self.grid2)]
        return np.array(rows).reshape(3, self.base.degree)

    @property
    def degree(self) -> int:
        return self.base.degree

    @classmethod
    def from_parts(cls, base: WitnessSet, grid1: WitnessSet, grid2: WitnessSet, projection) -> "TraceGrid":
        absc = (base.slice.offsets[0], grid1.slice.offsets[0], grid2.slice.offsets[0])
        return cls(base, grid1, grid2, np.asarray(projection, dtype=complex), tuple(complex(a) for a in absc))


@dataclass(frozen=True)
class Certificate:
    group: frozenset[int]
    predicted: complex
    actual: complex
    residual: float
    passed: bool


def trace_sums(grid: TraceGrid, group: Iterable[int]) -> np.ndarray:
    """Projected coordinate sums of ``group`` on the three grid slices."""
    idx = sorted(set(group))
    return grid.values[:, idx].sum(axis=1)


def predict(abscissae, sums) -> complex:
    """Value at the third abscissa of the line through the first two samples."""
    c0, c1, c2 = abscissae
    s0, s1 = sums[0], sums[1]
    return complex(s0 + (s1 - s0) * (c2 - c0) / (c1 - c0))


def _certificate(group, abscissae, sums, trace_tol: float) -> Certificate:
    predicted = predict(abscissae, sums)
    actual = complex(sums[2])
    residual = abs(predicted - actual)
    return Certificate(frozenset(group), predicted, actual, residual, residual < trace_tol)


def trace_test(grid: TraceGrid, group: Iterable[int], trace_tol: float = TRACE_TOL) -> Certificate:
    group = frozenset(group)
    if not group:
        raise ValueError("group must be nonempty")
    if min(group) < 0 or max(group) >= grid.degree:
        raise ValueError("group index out of range")
    return _certificate(group, grid.abscissae, trace_sums(grid, group), trace_tol)


def certify_partition(grid: TraceGrid, partition: Iterable[Iterable[int]],
                      trace_tol: float = TRACE_TOL) -> tuple[bool, list[Certificate]]:
    groups = [frozenset(g) for g in partition]
    members = sorted(i for g in groups for i in g)
    if members != list(range(grid.degree)):
        raise ValueError("groups must partition the witness indices")
    certs = [trace_test(grid, g, trace_tol) for g in groups]
    return all(c.passed for c in certs), certs


# --- building the grid --------------------------------------------------------------------


def _distinct(points, tol: float = MATCH_TOL) -> bool:
    for i in range(len(points)):
        for j in range(i + 1, len(points)):
            if np.abs(points[i] - points[j]).max() <= tol:
                return False
    return True


@dataclass
class _Side:
    shift: complex
    slice: SliceSet
    results: list = field(default_factory=list)
    pending: set = field(default_factory=set)
    attempts: int = 0


class GridBuilder:
    """Job source tracking the base points onto two parallel slices.

    A side whose paths fail or collide is redone with a fresh gamma; every few
    attempts the side also moves to a fresh parallel slice.
    """

    def __init__(self, w: WitnessSet, rng, settings: TrackSettings | None = None):
        self.w = w
        self.rng = as_rng(rng)
        self.settings = settings or TrackSettings()
        k = w.dim
        # offsets move along one direction so the three slices lie on a line
        self.direction = np.concatenate([[1.0], random_unit(self.rng, (k - 1,))]) if k > 1 else np.ones(1)
        self.projection = self._pick_projection()
        self.paths = 0
        self.failures = 0
        self.sides: list[_Side] = []
        for _ in range(2):
            shift = self._pick_shift()
            self.sides.append(_Side(shift, shifted_slice(w.slice, self.direction, shift)))
        self._queue: list[Job] = []
        self._owner: dict[int, tuple[int, int]] = {}
        for s in range(2):
            self._launch(s)

    def _pick_projection(self) -> np.ndarray:
        # a projection in the span of the slice normals is constant on every slice
        # up to the offset, so every group would pass; redraw such a projection
        normals = self.w.slice.normals
        while True:
            proj = random_unit(self.rng, (self.w.emb.n,))
            coef, *_ = np.linalg.lstsq(normals.T, proj, rcond=None)
            if np.linalg.norm(proj - normals.T @ coef) > _MIN_PROJECTION_DISTANCE * np.linalg.norm(proj):
                return proj

    def _pick_shift(self) -> complex:
        used = [0j] + [side.shift for side in self.sides]
        while True:
            shift = random_unit(self.rng)
            if all(abs(shift - u) > 1e-3 for u in used):
                return shift

    def _launch(self, s: int):
        side = self.sides[s]
        if side.attempts >= _MAX_GAMMA_RETRIES * _MAX_SLICE_RETRIES:
            raise RuntimeError("trace grid construction keeps failing")
        if side.attempts and side.attempts % _MAX_GAMMA_RETRIES == 0:
            side.shift = self._pick_shift()
            side.slice = shifted_slice(self.w.slice, self.direction, side.shift)
        side.attempts += 1
        side.results = [None] * self.w.degree
        side.pending = set(range(self.w.degree))
        h = MonodromyHomotopy(self.w.emb, self.w.slice, side.slice, random_unit(self.rng))
        for i, p in enumerate(self.w.points):
            job = make_job(h, p, self.settings)
            self._owner[job.id] = (s, i)
            self._queue.append(job)

    @property
    def done(self) -> bool:
        return not self._queue and all(not side.pending for side in self.sides)

    def next_jobs(self, capacity: int) -> list[Job]:
        out, self._queue = self._queue[:capacity], self._queue[capacity:]
        return out

    def apply(self, job: Job, result: PathResult | None) -> None:
        self.paths += 1
        s, i = self._owner.pop(job.id)
        side = self.sides[s]
        if result is None or not result.ok:
            self.failures += 1
        else:
            side.results[i] = result.end_point
        side.pending.discard(i)
        if not side.pending and (any(p is None for p in side.results) or not _distinct(side.results)):
            self._launch(s)

    def grid(self) -> TraceGrid:
        if not self.done:
            raise RuntimeError("grid not finished")
        sets = [WitnessSet(self.w.emb.with_slice(side.slice), tuple(side.results)) for side in self.sides]
        return TraceGrid.from_parts(self.w, sets[0], sets[1], self.projection)


def build_trace_grid(w: WitnessSet, rng, settings: TrackSettings | None = None,
                     scheduler: Scheduler | None = None) -> TraceGrid:
    builder = GridBuilder(w, rng, settings)
    (scheduler or Scheduler(1)).run(builder)
    return builder.grid()
