"""Monodromy breakup of a witness set into irreducible pieces.

Two engines, both job sources for the scheduler:

``ClassicEngine``
    Loop at a time: move all d points to a fresh random slice, bring them back
    with a second gamma, read off the permutation, merge its cycles, and run the
    trace test on the whole partition.

``EdgewiseEngine``
    Edge at a time: one tracked path connects a point on one slice to a point on
    another. Points on all slices live in one union-find; base points in the
    same class lie on the same component. Trace sums are kept per class, so a
    merge only recertifies the merged class. Slice pairs that keep producing
    nothing get picked less often.
"""

from __future__ import annotations

import enum
import logging
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .embedding import SliceSet, as_rng, random_slice, random_unit
from .scheduler import Job, Scheduler, SchedulerStats, make_job
from .trace import (MATCH_TOL, TRACE_TOL, Certificate, GridBuilder, TraceGrid, _certificate, _distinct,
                    certify_partition, trace_test)
from .tracker import MonodromyHomotopy, PathResult, TrackSettings
from .witness import ResampleError, WitnessSet, resample

__all__ = [
    "UnionFind",
    "Match",
    "match_endpoint",
    "SliceNode",
    "PointGraph",
    "EdgeLedger",
    "select_edge",
    "BreakupStats",
    "BreakupResult",
    "ClassicEngine",
    "EdgewiseEngine",
    "run_classic",
    "run_edgewise",
    "two_edge_loop",
]

FAILURE_PENALTY = 3

log = logging.getLogger(__name__)


class UnionFind:
    """Disjoint sets over 0..n-1 with path compression and union by rank; can grow."""

    def __init__(self, n: int = 0):
        self.parent = list(range(n))
        self.rank = [0] * n

    def __len__(self) -> int:
        return len(self.parent)

    def add(self) -> int:
        self.parent.append(len(self.parent))
        self.rank.append(0)
        return len(self.parent) - 1

    def find(self, a: int) -> int:
        root = a
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[a] != root:
            self.parent[a], a = root, self.parent[a]
        return root

    def union(self, a: int, b: int) -> bool:
        """Join the sets of a and b; False if they were already one set."""
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if self.rank[ra] < self.rank[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        if self.rank[ra] == self.rank[rb]:
            self.rank[ra] += 1
        return True

    def groups(self, members: Sequence[int] | None = None) -> list[list[int]]:
        """Classes restricted to ``members`` (default all), sorted by smallest element."""
        members = range(len(self)) if members is None else members
        out: dict[int, list[int]] = {}
        for m in members:
            out.setdefault(self.find(m), []).append(m)
        return sorted((sorted(g) for g in out.values()), key=lambda g: g[0])


class Match(enum.Enum):
    NEW = "new"
    AMBIGUOUS = "ambiguous"


def match_endpoint(candidates: Sequence[np.ndarray], p, match_tol: float = MATCH_TOL) -> int | Match:
    """Index of the unique candidate within ``match_tol`` (max norm) of p."""
    if len(candidates) == 0:
        return Match.NEW
    dist = np.abs(np.asarray(candidates) - np.asarray(p)).max(axis=1)
    hits = np.flatnonzero(dist <= match_tol)
    if len(hits) == 0:
        return Match.NEW
    if len(hits) > 1:
        return Match.AMBIGUOUS
    return int(hits[0])


# --- point graph for the edgewise engine ---------------------------------------------------


@dataclass
class SliceNode:
    id: int
    slice: SliceSet
    points: list[np.ndarray] = field(default_factory=list)
    point_ids: list[int] = field(default_factory=list)

    @property
    def known(self) -> int:
        return len(self.points)


class PointGraph:
    """All known points on all slices, joined by tracked edges.

    Node 0 is the base slice; global ids 0..d-1 are its points in witness order.
    Each class carries the trace sums of its base members and, once it passes,
    its certificate.
    """

    def __init__(self, base: WitnessSet, slices: Sequence[SliceSet], grid: TraceGrid | None,
                 trace_tol: float = TRACE_TOL):
        self.d = base.degree
        self.grid = grid
        self.trace_tol = trace_tol
        self.nodes = [SliceNode(0, base.slice)] + [SliceNode(i + 1, s) for i, s in enumerate(slices)]
        self.uf = UnionFind()
        self.owner: list[tuple[int, int]] = []
        self.sums: dict[int, np.ndarray] = {}
        self.members: dict[int, list[int]] = {}
        self.certificates: dict[int, Certificate] = {}
        for p in base.points:
            self.add_point(0, p)
        for i in range(self.d):
            self.sums[i] = grid.values[:, i].copy() if grid is not None else np.zeros(3, dtype=complex)
            self.members[i] = [i]
            self._certify(i)

    def add_point(self, node: int, point) -> int:
        gid = self.uf.add()
        nd = self.nodes[node]
        self.owner.append((node, nd.known))
        nd.points.append(np.asarray(point, dtype=complex))
        nd.point_ids.append(gid)
        return gid

    def point(self, gid: int) -> np.ndarray:
        node, local = self.owner[gid]
        return self.nodes[node].points[local]

    def node_of(self, gid: int) -> int:
        return self.owner[gid][0]

    def _certify(self, root: int) -> None:
        if self.grid is None:
            return
        cert = _certificate(self.members[root], self.grid.abscissae, self.sums[root], self.trace_tol)
        if cert.passed:
            self.certificates[root] = cert
        else:
            self.certificates.pop(root, None)

    def join(self, a: int, b: int) -> bool:
        """Union two points; True when two classes holding base points merged."""
        ra, rb = self.uf.find(a), self.uf.find(b)
        if ra == rb:
            return False
        merging = ra in self.members and rb in self.members
        self.uf.union(ra, rb)
        root = self.uf.find(ra)
        other = rb if root == ra else ra
        if other in self.members:
            if root in self.members:
                self.members[root] = sorted(self.members[root] + self.members.pop(other))
                self.sums[root] = self.sums[root] + self.sums.pop(other)
            else:
                self.members[root] = self.members.pop(other)
                self.sums[root] = self.sums.pop(other)
        self.certificates.pop(other, None)
        if merging:
            self._certify(root)
        return merging

    def certified(self, gid: int) -> bool:
        return self.uf.find(gid) in self.certificates

    @property
    def all_certified(self) -> bool:
        return self.grid is not None and all(r in self.certificates for r in self.members)

    def groups(self) -> list[list[int]]:
        return self.uf.groups(range(self.d))

    def candidate_sources(self) -> list[int]:
        return [g for g in range(len(self.uf)) if not self.certified(g)]


@dataclass
class EdgeLedger:
    n_slices: int
    edges: list[tuple[int, int, int, int, complex]] = field(default_factory=list)
    n_rej: dict[tuple[int, int], int] = field(default_factory=dict)
    n_paths: int = 0

    def __post_init__(self):
        for a in range(self.n_slices):
            for b in range(a + 1, self.n_slices):
                self.n_rej.setdefault((a, b), 0)

    @staticmethod
    def pair(a: int, b: int) -> tuple[int, int]:
        return (a, b) if a < b else (b, a)

    def reject(self, a: int, b: int, amount: int = 1) -> None:
        self.n_rej[self.pair(a, b)] += amount


def select_edge(ledger: EdgeLedger, graph: PointGraph, rng) -> tuple[int, tuple[int, int], complex]:
    """Pick (source point, (source slice, target slice), gamma).

    The source is uniform over known points in uncertified classes; the target
    slice has weight 1 / (1 + N_rej) for its pair with the source slice.
    """
    rng = as_rng(rng)
    sources = graph.candidate_sources()
    if not sources:
        raise ValueError("no uncertified group to work on")
    src = sources[int(rng.integers(len(sources)))]
    a = graph.node_of(src)
    targets = [b for b in range(ledger.n_slices) if b != a]
    weights = np.array([1.0 / (1.0 + ledger.n_rej[ledger.pair(a, b)]) for b in targets])
    b = targets[int(rng.choice(len(targets), p=weights / weights.sum()))]
    return src, (a, b), random_unit(rng)


# --- results -------------------------------------------------------------------------------


@dataclass
class BreakupStats:
    algorithm: str
    paths_tracked: int = 0
    grid_paths: int = 0
    merges: int = 0
    failures: int = 0
    crossings: int = 0
    loops: int = 0
    loops_discarded: int = 0
    edges: int = 0
    new_points: int = 0
    late_results: int = 0
    full_trace_residual: float = float("nan")
    rejections: dict[str, int] = field(default_factory=dict)
    time_initial: float = 0.0
    time_main: float = 0.0
    master_busy: float = 0.0
    track_min: float = 0.0
    track_max: float = 0.0
    wall_time: float = 0.0

    @property
    def loop_paths(self) -> int:
        return self.paths_tracked - self.grid_paths

    @property
    def paths_per_merge(self) -> float:
        return self.loop_paths / self.merges if self.merges else float("inf")

    def absorb(self, sched: SchedulerStats) -> None:
        self.master_busy = sched.master_busy
        self.track_min = float(min(sched.worker_busy))
        self.track_max = float(max(sched.worker_busy))


@dataclass
class BreakupResult:
    groups: list[list[int]]
    certified: bool
    certificates: list[Certificate]
    stats: BreakupStats
    grid: TraceGrid | None = None
    scheduler: SchedulerStats | None = None

    @property
    def degrees(self) -> list[int]:
        return sorted(len(g) for g in self.groups)

    def as_sets(self) -> set[frozenset[int]]:
        return {frozenset(g) for g in self.groups}


# --- classic engine ------------------------------------------------------------------------


class ClassicEngine:
    """Loops of 2d paths through a fresh slice; certification after every loop.

    ``back_gamma`` maps the outgoing gamma to the returning one (default: a
    fresh random gamma). Passing ``lambda g: 1 / g`` retraces every path.
    """

    def __init__(self, w: WitnessSet, grid: TraceGrid, max_loops: int, rng,
                 settings: TrackSettings | None = None, trace_tol: float = TRACE_TOL,
                 match_tol: float = MATCH_TOL, max_paths: int | None = None,
                 back_gamma: Callable[[complex], complex] | None = None, stats: BreakupStats | None = None):
        if max_loops < 1:
            raise ValueError("need at least one loop")
        self.w, self.grid = w, grid
        self.max_loops = max_loops
        self.rng = as_rng(rng)
        self.settings = settings or TrackSettings()
        self.trace_tol, self.match_tol = trace_tol, match_tol
        self.max_paths = max_paths
        self.back_gamma = back_gamma
        self.stats = stats or BreakupStats("classic")
        self.partition = UnionFind(w.degree)
        self.certified, self.certificates = certify_partition(grid, self.partition.groups(), trace_tol)
        self.permutations: list[list[int]] = []
        self._phase = "idle"
        self._queue: list[Job] = []
        self._slot: dict[int, int] = {}
        self._results: list[np.ndarray | None] = []
        self._pending = 0
        self._K: SliceSet | None = None
        self._gamma_out = 1.0

    @property
    def d(self) -> int:
        return self.w.degree

    @property
    def done(self) -> bool:
        if self._phase != "idle":
            return False
        if self.certified or self.stats.loops >= self.max_loops:
            return True
        return self.max_paths is not None and self.stats.paths_tracked + 2 * self.d > self.max_paths

    def _dispatch(self, h: MonodromyHomotopy, starts) -> None:
        self._results = [None] * self.d
        self._pending = self.d
        for i, p in enumerate(starts):
            job = make_job(h, p, self.settings)
            self._slot[job.id] = i
            self._queue.append(job)

    def next_jobs(self, capacity: int) -> list[Job]:
        if self._phase == "idle" and not self.done:
            self.stats.loops += 1
            self._K = random_slice(self.w.emb.n, self.w.dim, self.rng)
            self._gamma_out = random_unit(self.rng)
            self._phase = "out"
            self._dispatch(MonodromyHomotopy(self.w.emb, self.w.slice, self._K, self._gamma_out), self.w.points)
        out, self._queue = self._queue[:capacity], self._queue[capacity:]
        return out

    def apply(self, job: Job, result: PathResult | None) -> None:
        self.stats.paths_tracked += 1
        i = self._slot.pop(job.id)
        if result is None or not result.ok:
            self.stats.failures += 1
        else:
            self._results[i] = result.end_point
        self._pending -= 1
        if self._pending:
            return
        if any(p is None for p in self._results):
            self._discard()
        elif self._phase == "out":
            mids = list(self._results)
            if not _distinct(mids, self.match_tol):
                self.stats.crossings += 1
                self._discard()
                return
            g2 = self.back_gamma(self._gamma_out) if self.back_gamma else random_unit(self.rng)
            self._phase = "back"
            emb_k = self.w.emb.with_slice(self._K)
            self._dispatch(MonodromyHomotopy(emb_k, self._K, self.w.slice, g2), mids)
        else:
            self._finish_loop()

    def _discard(self) -> None:
        self.stats.loops_discarded += 1
        self._phase = "idle"

    def _finish_loop(self) -> None:
        perm = [match_endpoint(self.w.points, p, self.match_tol) for p in self._results]
        if any(isinstance(j, Match) for j in perm) or sorted(perm) != list(range(self.d)):
            self.stats.crossings += 1
            self._discard()
            return
        self.permutations.append(perm)
        for i, j in enumerate(perm):
            if self.partition.union(i, j):
                self.stats.merges += 1
        self.certified, self.certificates = certify_partition(self.grid, self.partition.groups(), self.trace_tol)
        self._phase = "idle"

    def result(self) -> BreakupResult:
        return BreakupResult(self.partition.groups(), self.certified, self.certificates, self.stats, self.grid)


# --- edgewise engine -----------------------------------------------------------------------


class EdgewiseEngine:
    """One path per job between slice nodes; stop as soon as every class certifies."""

    def __init__(self, w: WitnessSet, grid: TraceGrid, n_slices: int, rng,
                 settings: TrackSettings | None = None, trace_tol: float = TRACE_TOL,
                 match_tol: float = MATCH_TOL, max_paths: int | None = None,
                 failure_penalty: int = FAILURE_PENALTY, stats: BreakupStats | None = None):
        if n_slices < 1:
            raise ValueError("need at least one new slice")
        self.w, self.grid = w, grid
        self.rng = as_rng(rng)
        self.settings = settings or TrackSettings()
        self.match_tol = match_tol
        self.max_paths = max_paths
        self.failure_penalty = failure_penalty
        self.stats = stats or BreakupStats("edgewise")
        slices = [random_slice(w.emb.n, w.dim, self.rng) for _ in range(n_slices)]
        self.graph = PointGraph(w, slices, grid, trace_tol)
        self.ledger = EdgeLedger(n_slices + 1)
        self._emb = [w.emb.with_slice(node.slice) for node in self.graph.nodes]
        self._meta: dict[int, tuple[int, int, int, complex]] = {}
        self._finished = self.graph.all_certified

    @property
    def certified(self) -> bool:
        return self.graph.all_certified

    @property
    def done(self) -> bool:
        if self._finished or self.graph.all_certified:
            self._finished = True
            return True
        return self.max_paths is not None and self.stats.paths_tracked + len(self._meta) >= self.max_paths

    def next_jobs(self, capacity: int) -> list[Job]:
        jobs = []
        for _ in range(capacity):
            if self.done:
                break
            src, (a, b), gamma = select_edge(self.ledger, self.graph, self.rng)
            nodes = self.graph.nodes
            h = MonodromyHomotopy(self._emb[a], nodes[a].slice, nodes[b].slice, gamma)
            job = make_job(h, self.graph.point(src), self.settings)
            self._meta[job.id] = (src, a, b, gamma)
            jobs.append(job)
        return jobs

    def apply(self, job: Job, result: PathResult | None) -> None:
        src, a, b, gamma = self._meta.pop(job.id)
        self.stats.paths_tracked += 1
        self.ledger.n_paths += 1
        if self._finished:
            self.stats.late_results += 1
            return
        self.stats.edges += 1
        if result is None or not result.ok:
            self.stats.failures += 1
            self.ledger.reject(a, b, self.failure_penalty)
            return
        self.apply_edge(src, a, b, result.end_point, gamma)

    def apply_edge(self, src: int, a: int, b: int, end_point, gamma: complex = 1.0) -> None:
        """Record one tracked edge from point ``src`` on slice a to ``end_point`` on slice b."""
        target = self.graph.nodes[b]
        m = match_endpoint(target.points, end_point, self.match_tol)
        if m is Match.AMBIGUOUS or (m is Match.NEW and target.known >= self.w.degree):
            self.stats.crossings += 1
            self.ledger.reject(a, b, self.failure_penalty)
            return
        if m is Match.NEW:
            dst = self.graph.add_point(b, end_point)
            self.stats.new_points += 1
        else:
            dst = target.point_ids[m]
        self.ledger.edges.append((a, src, b, dst, gamma))
        if self.graph.join(src, dst):
            self.stats.merges += 1
        elif m is not Match.NEW:
            self.ledger.reject(a, b)
        if self.graph.all_certified:
            self._finished = True

    def result(self) -> BreakupResult:
        self.stats.rejections = {f"{a}-{b}": n for (a, b), n in sorted(self.ledger.n_rej.items())}
        groups = self.graph.groups()
        if self.graph.all_certified:
            certs = [self.graph.certificates[self.graph.uf.find(g[0])] for g in groups]
        else:
            _, certs = certify_partition(self.grid, groups, self.graph.trace_tol)
        return BreakupResult(groups, self.graph.all_certified, certs, self.stats, self.grid)


def two_edge_loop(w: WitnessSet, K: SliceSet, gamma1: complex, gamma2: complex,
                  settings: TrackSettings | None = None, match_tol: float = MATCH_TOL,
                  scheduler: Scheduler | None = None) -> tuple[list[int] | None, list[np.ndarray | None]]:
    """Track the witness points to K with gamma1 and back with gamma2.

    Returns the permutation (point i returns to point perm[i]) and the returned
    points; the permutation is None when a path fails or matching is not a bijection.
    """
    try:
        mid = resample(w, K, gamma1, settings, scheduler)
        back = resample(mid, w.slice, gamma2, settings, scheduler)
    except ResampleError:
        return None, []
    perm = [match_endpoint(w.points, p, match_tol) for p in back.points]
    if any(isinstance(j, Match) for j in perm) or sorted(perm) != list(range(w.degree)):
        return None, list(back.points)
    return perm, list(back.points)


# --- drivers -------------------------------------------------------------------------------


def _build_grid(w: WitnessSet, rng, settings, scheduler: Scheduler, stats: BreakupStats):
    builder = GridBuilder(w, rng, settings)
    sched_stats = scheduler.run(builder)
    stats.grid_paths = builder.paths
    stats.paths_tracked += builder.paths
    stats.failures += builder.failures
    stats.time_initial = sched_stats.wall_time
    grid = builder.grid()
    # the whole witness set is a union of components, so it must pass; if not, points are missing
    full = trace_test(grid, range(w.degree))
    stats.full_trace_residual = full.residual
    if not full.passed:
        log.warning("complete witness set fails the trace test (residual %.3g): witness set is incomplete, "
                    "no partition can certify", full.residual)
    return grid, sched_stats


def _uncertified(w: WitnessSet, stats: BreakupStats) -> BreakupResult:
    return BreakupResult([[i] for i in range(w.degree)], False, [], stats)


def _finish(engine, w, stats, grid_stats: SchedulerStats, scheduler: Scheduler, t0: float) -> BreakupResult:
    main = scheduler.run(engine)
    total = SchedulerStats(n_workers=scheduler.n_workers)
    total += grid_stats
    total += main
    stats.time_main = main.wall_time
    stats.absorb(total)
    stats.master_busy = main.master_busy
    stats.wall_time = time.perf_counter() - t0
    res = engine.result()
    res.scheduler = total
    return res


def run_classic(w: WitnessSet, max_loops: int, rng, settings: TrackSettings | None = None,
                scheduler: Scheduler | None = None, trace_tol: float = TRACE_TOL,
                match_tol: float = MATCH_TOL, max_paths: int | None = None,
                back_gamma: Callable[[complex], complex] | None = None) -> BreakupResult:
    """Loop-at-a-time breakup with at most ``max_loops`` loops."""
    t0 = time.perf_counter()
    rng = as_rng(rng)
    scheduler = scheduler or Scheduler(1)
    stats = BreakupStats("classic")
    if max_paths is not None and max_paths < 2 * w.degree:
        return _uncertified(w, stats)
    grid, grid_stats = _build_grid(w, rng, settings, scheduler, stats)
    engine = ClassicEngine(w, grid, max_loops, rng, settings, trace_tol, match_tol, max_paths, back_gamma, stats)
    return _finish(engine, w, stats, grid_stats, scheduler, t0)


def run_edgewise(w: WitnessSet, n_slices: int, max_paths: int | None, rng, settings: TrackSettings | None = None,
                 scheduler: Scheduler | None = None, trace_tol: float = TRACE_TOL,
                 match_tol: float = MATCH_TOL, failure_penalty: int = FAILURE_PENALTY) -> BreakupResult:
    """Edge-at-a-time breakup over ``n_slices`` new slices, at most ``max_paths`` paths in total."""
    t0 = time.perf_counter()
    rng = as_rng(rng)
    scheduler = scheduler or Scheduler(1)
    stats = BreakupStats("edgewise")
    if max_paths is not None and max_paths < 2 * w.degree:
        return _uncertified(w, stats)
    grid, grid_stats = _build_grid(w, rng, settings, scheduler, stats)
    engine = EdgewiseEngine(w, grid, n_slices, rng, settings, trace_tol, match_tol, max_paths,
                            failure_penalty, stats)
    return _finish(engine, w, stats, grid_stats, scheduler, t0)
