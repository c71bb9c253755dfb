"""Master/worker execution of single-path tracking jobs.

The coordinator (this process) owns all algorithm state. It asks a job source
for work whenever a worker is free, hands each job to a worker, and applies
results one at a time in arrival order. Jobs and results are plain values, so
with ``n_workers == 1`` everything runs inline and is bit-reproducible.
"""

from __future__ import annotations

import itertools
import json
import logging
import multiprocessing
import os
import time
from concurrent.futures import FIRST_COMPLETED, Future, ProcessPoolExecutor, wait
from dataclasses import dataclass, field
from typing import IO, Iterable, Protocol

import numpy as np

from .embedding import EmbeddedSystem, SliceSet
from .polysys import PolySystem, Term
from .tracker import MonodromyHomotopy, PathResult, TotalDegreeHomotopy, TrackSettings, track

__all__ = [
    "Job",
    "make_job",
    "JobSource",
    "BatchSource",
    "SchedulerStats",
    "Scheduler",
    "run",
    "execute_job",
    "read_trace",
    "replay",
]

log = logging.getLogger(__name__)


@dataclass
class Job:
    id: int
    homotopy: MonodromyHomotopy | TotalDegreeHomotopy
    start: np.ndarray
    settings: TrackSettings


_job_ids = itertools.count()


def make_job(homotopy, start, settings: TrackSettings) -> Job:
    """New job with a process-unique id."""
    return Job(next(_job_ids), homotopy, np.asarray(start, dtype=complex), settings)


class JobSource(Protocol):
    """What the scheduler needs from an algorithm.

    ``next_jobs`` may return fewer jobs than requested (or none) when the
    algorithm is waiting on results; ``apply`` receives ``None`` for a job
    whose worker failed twice.
    """

    @property
    def done(self) -> bool: ...

    def next_jobs(self, capacity: int) -> list[Job]: ...

    def apply(self, job: Job, result: PathResult | None) -> None: ...


class BatchSource:
    """A fixed list of independent jobs; results collected by job order."""

    def __init__(self, jobs: Iterable[Job]):
        self.jobs = list(jobs)
        self.results: list[PathResult | None] = [None] * len(self.jobs)
        self._index = {job.id: i for i, job in enumerate(self.jobs)}
        self._next = 0
        self._applied = 0

    @property
    def done(self) -> bool:
        return self._applied == len(self.jobs)

    def next_jobs(self, capacity: int) -> list[Job]:
        out = self.jobs[self._next:self._next + capacity]
        self._next += len(out)
        return out

    def apply(self, job: Job, result: PathResult | None) -> None:
        self.results[self._index[job.id]] = result
        self._applied += 1


@dataclass
class SchedulerStats:
    n_workers: int = 1
    worker_busy: list[float] = field(default_factory=list)
    worker_cpu: list[float] = field(default_factory=list)
    jobs_per_worker: list[int] = field(default_factory=list)
    master_busy: float = 0.0
    master_idle: float = 0.0
    wall_time: float = 0.0
    jobs_dispatched: int = 0
    jobs_failed: int = 0
    retries: int = 0

    def __post_init__(self):
        for name in ("worker_busy", "worker_cpu", "jobs_per_worker"):
            if not getattr(self, name):
                setattr(self, name, [0] * self.n_workers if name == "jobs_per_worker" else [0.0] * self.n_workers)

    @property
    def master_share(self) -> float:
        """Fraction of wall time the coordinator spent certifying and scheduling."""
        return self.master_busy / self.wall_time if self.wall_time > 0 else 0.0

    @property
    def master_idle_fraction(self) -> float:
        return self.master_idle / self.wall_time if self.wall_time > 0 else 0.0

    @property
    def worker_idle_fraction(self) -> float:
        cap = self.n_workers * self.wall_time
        return 1.0 - sum(self.worker_busy) / cap if cap > 0 else 0.0

    @property
    def total_track_cpu(self) -> float:
        return float(sum(self.worker_cpu))

    def __iadd__(self, other: "SchedulerStats") -> "SchedulerStats":
        if other.n_workers != self.n_workers:
            raise ValueError("cannot combine stats from different worker counts")
        for i in range(self.n_workers):
            self.worker_busy[i] += other.worker_busy[i]
            self.worker_cpu[i] += other.worker_cpu[i]
            self.jobs_per_worker[i] += other.jobs_per_worker[i]
        self.master_busy += other.master_busy
        self.master_idle += other.master_idle
        self.wall_time += other.wall_time
        self.jobs_dispatched += other.jobs_dispatched
        self.jobs_failed += other.jobs_failed
        self.retries += other.retries
        return self

    def as_dict(self) -> dict:
        return {
            "n_workers": self.n_workers,
            "worker_busy": list(self.worker_busy),
            "worker_cpu": list(self.worker_cpu),
            "jobs_per_worker": list(self.jobs_per_worker),
            "master_busy": self.master_busy,
            "master_idle": self.master_idle,
            "wall_time": self.wall_time,
            "jobs_dispatched": self.jobs_dispatched,
            "jobs_failed": self.jobs_failed,
            "retries": self.retries,
        }


def execute_job(job: Job) -> tuple[PathResult, float, float, int]:
    """Worker entry point: track one path, report wall and CPU seconds."""
    w0, c0 = time.perf_counter(), time.process_time()
    result = track(job.homotopy, job.start, job.settings)
    return result, time.perf_counter() - w0, time.process_time() - c0, os.getpid()


# --- job trace serialization ----------------------------------------------------------


def _cvec(a) -> list:
    a = np.asarray(a, dtype=complex).ravel()
    return [[float(v.real), float(v.imag)] for v in a]


def _uncvec(data) -> np.ndarray:
    return np.array([complex(re, im) for re, im in data], dtype=complex)


def _system_to_dict(p: PolySystem) -> dict:
    return {
        "n": p.n_vars,
        "names": list(p.var_names),
        "polys": [[[t.coeff.real, t.coeff.imag, list(t.exponents)] for t in poly] for poly in p.polys],
    }


def _system_from_dict(d: dict) -> PolySystem:
    polys = tuple(tuple(Term(complex(re, im), tuple(e)) for re, im, e in poly) for poly in d["polys"])
    return PolySystem(d["n"], polys, tuple(d["names"]))


def _slice_to_dict(s: SliceSet) -> dict:
    return {"normals": [_cvec(row) for row in s.normals], "offsets": _cvec(s.offsets)}


def _slice_from_dict(d: dict) -> SliceSet:
    return SliceSet(np.array([_uncvec(r) for r in d["normals"]]), _uncvec(d["offsets"]))


def homotopy_to_dict(h) -> dict:
    if isinstance(h, MonodromyHomotopy):
        e = h.embedded
        return {
            "kind": "monodromy",
            "base": _system_to_dict(e.base),
            "nonlinear": _system_to_dict(e.nonlinear),
            "slack": [_cvec(r) for r in e.slack_coeffs],
            "slice": _slice_to_dict(e.slice),
            "L_start": _slice_to_dict(h.L_start),
            "L_target": _slice_to_dict(h.L_target),
            "gamma": _cvec([h.gamma])[0],
        }
    if isinstance(h, TotalDegreeHomotopy):
        return {"kind": "total_degree", "target": _system_to_dict(h.target), "gamma": _cvec([h.gamma])[0]}
    raise TypeError(f"cannot serialize {type(h).__name__}")


def homotopy_from_dict(d: dict):
    gamma = complex(*d["gamma"])
    if d["kind"] == "total_degree":
        return TotalDegreeHomotopy(_system_from_dict(d["target"]), gamma)
    emb = EmbeddedSystem(
        _system_from_dict(d["base"]),
        np.array([_uncvec(r) for r in d["slack"]]),
        _slice_from_dict(d["slice"]),
        _system_from_dict(d["nonlinear"]),
    )
    return MonodromyHomotopy(emb, _slice_from_dict(d["L_start"]), _slice_from_dict(d["L_target"]), gamma)


def _settings_to_dict(s: TrackSettings) -> dict:
    return dict(s.__dict__)


class _TraceWriter:
    def __init__(self, sink: IO[str]):
        self.sink = sink

    def job(self, job: Job):
        rec = {
            "type": "job",
            "id": job.id,
            "homotopy": homotopy_to_dict(job.homotopy),
            "start": _cvec(job.start),
            "settings": _settings_to_dict(job.settings),
        }
        self.sink.write(json.dumps(rec) + "\n")

    def result(self, job: Job, result: PathResult | None, worker: int):
        rec = {"type": "result", "id": job.id, "worker": worker}
        if result is None:
            rec["status"] = None
        else:
            rec.update(status=result.status.value, end_point=_cvec(result.end_point),
                       steps=result.steps_taken, newton=result.newton_iters_total)
        self.sink.write(json.dumps(rec) + "\n")


def read_trace(lines: Iterable[str]) -> tuple[list[Job], dict[int, dict]]:
    """Parse a recorded job/result stream back into jobs and raw result records."""
    jobs, results = [], {}
    cache: dict[str, object] = {}
    for line in lines:
        line = line.strip()
        if not line:
            continue
        rec = json.loads(line)
        if rec["type"] == "job":
            key = json.dumps(rec["homotopy"], sort_keys=True)
            if key not in cache:
                cache[key] = homotopy_from_dict(rec["homotopy"])
            jobs.append(Job(rec["id"], cache[key], _uncvec(rec["start"]), TrackSettings(**rec["settings"])))
        else:
            results[rec["id"]] = rec
    return jobs, results


# --- the scheduler ----------------------------------------------------------------------


class Scheduler:
    """Runs job sources on ``n_workers`` executors.

    One worker means inline serial execution. More workers use a process pool
    that lives as long as the scheduler (use it as a context manager, or call
    ``close``). ``trace`` is an optional text stream receiving the job/result
    record as JSON lines.
    """

    def __init__(self, n_workers: int = 1, trace: IO[str] | None = None):
        if n_workers < 1:
            raise ValueError("n_workers must be >= 1")
        self.n_workers = n_workers
        self._trace = _TraceWriter(trace) if trace is not None else None
        self._pool: ProcessPoolExecutor | None = None
        self._pids: dict[int, int] = {}

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def close(self):
        if self._pool is not None:
            self._pool.shutdown(wait=True, cancel_futures=True)
            self._pool = None

    def _worker_index(self, pid: int) -> int:
        if pid not in self._pids:
            self._pids[pid] = len(self._pids) % self.n_workers
        return self._pids[pid]

    def run(self, source: JobSource) -> SchedulerStats:
        if self.n_workers == 1:
            return self._run_serial(source)
        return self._run_pool(source)

    def _record(self, stats: SchedulerStats, job: Job, result, busy, cpu, worker):
        stats.worker_busy[worker] += busy
        stats.worker_cpu[worker] += cpu
        stats.jobs_per_worker[worker] += 1
        if self._trace:
            self._trace.result(job, result, worker)

    def _run_serial(self, source: JobSource) -> SchedulerStats:
        stats = SchedulerStats(n_workers=1)
        t_start = time.perf_counter()
        while True:
            m0 = time.perf_counter()
            jobs = [] if source.done else source.next_jobs(1)
            stats.master_busy += time.perf_counter() - m0
            if not jobs:
                break
            for job in jobs:
                stats.jobs_dispatched += 1
                if self._trace:
                    self._trace.job(job)
                w0 = time.perf_counter()
                result = None
                for attempt in range(2):
                    try:
                        result, busy, cpu, _ = execute_job(job)
                        break
                    except Exception:  # worker failure: one retry, then a recorded failure
                        log.exception("job %d failed on attempt %d", job.id, attempt + 1)
                        busy, cpu = time.perf_counter() - w0, 0.0
                        if attempt == 0:
                            stats.retries += 1
                stats.master_idle += time.perf_counter() - w0
                if result is None:
                    stats.jobs_failed += 1
                self._record(stats, job, result, busy, cpu, 0)
                m0 = time.perf_counter()
                source.apply(job, result)
                stats.master_busy += time.perf_counter() - m0
        stats.wall_time = time.perf_counter() - t_start
        return stats

    def _run_pool(self, source: JobSource) -> SchedulerStats:
        if self._pool is None:
            ctx = multiprocessing.get_context("fork") if "fork" in multiprocessing.get_all_start_methods() else None
            self._pool = ProcessPoolExecutor(max_workers=self.n_workers, mp_context=ctx)
        stats = SchedulerStats(n_workers=self.n_workers)
        in_flight: dict[Future, tuple[Job, int]] = {}
        t_start = time.perf_counter()

        def submit(job: Job, attempt: int):
            in_flight[self._pool.submit(execute_job, job)] = (job, attempt)

        while True:
            m0 = time.perf_counter()
            free = self.n_workers - len(in_flight)
            if free > 0 and not source.done:
                for job in source.next_jobs(free):
                    stats.jobs_dispatched += 1
                    if self._trace:
                        self._trace.job(job)
                    submit(job, 0)
            stats.master_busy += time.perf_counter() - m0
            if not in_flight:
                break
            w0 = time.perf_counter()
            finished, _ = wait(list(in_flight), return_when=FIRST_COMPLETED)
            stats.master_idle += time.perf_counter() - w0
            m0 = time.perf_counter()
            for fut in finished:
                job, attempt = in_flight.pop(fut)
                try:
                    result, busy, cpu, pid = fut.result()
                except Exception:
                    log.exception("job %d failed on attempt %d", job.id, attempt + 1)
                    if attempt == 0:
                        stats.retries += 1
                        submit(job, 1)
                        continue
                    stats.jobs_failed += 1
                    self._record(stats, job, None, 0.0, 0.0, 0)
                    source.apply(job, None)
                    continue
                self._record(stats, job, result, busy, cpu, self._worker_index(pid))
                source.apply(job, result)
            stats.master_busy += time.perf_counter() - m0
        stats.wall_time = time.perf_counter() - t_start
        return stats


def run(source: JobSource, n_workers: int = 1, trace: IO[str] | None = None) -> SchedulerStats:
    """One-shot convenience wrapper around ``Scheduler``."""
    with Scheduler(n_workers, trace) as sched:
        return sched.run(source)


def replay(jobs: list[Job], n_workers: int = 1) -> tuple[SchedulerStats, list[PathResult | None]]:
    """Re-execute a recorded workload; returns stats and results in job order."""
    source = BatchSource(jobs)
    stats = run(source, n_workers)
    return stats, source.results
