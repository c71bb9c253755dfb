"""Initial witness points from a total-degree homotopy on the embedded system."""

from __future__ import annotations

import math

import numpy as np

from .embedding import EmbeddedSystem, as_rng, random_unit
from .polysys import PolySystem
from .scheduler import BatchSource, Scheduler, make_job
from .tracker import TotalDegreeHomotopy, TrackSettings
from .witness import WitnessSet, validate

__all__ = [
    "BudgetExceeded",
    "NoWitnessPoints",
    "WITNESS_SETTINGS",
    "total_degree_solve",
    "witness_points",
]

DEFAULT_BUDGET = 10_000
DUPLICATE_TOL = 1e-8
SLACK_TOL = 1e-8
# Witness points of a badly placed slice are reached very late in t; the
# start homotopy needs a finer minimum step than the monodromy loops.
WITNESS_SETTINGS = TrackSettings(step_min=1e-10)


class BudgetExceeded(ValueError):
    pass


class NoWitnessPoints(RuntimeError):
    pass


def total_degree_solve(sys: PolySystem, rng, settings: TrackSettings | None = None,
                       scheduler: Scheduler | None = None, budget: int = DEFAULT_BUDGET) -> list[np.ndarray]:
    """Isolated regular solutions of a square system reachable from x_i^{d_i} = 1.

    Failed and diverging paths are dropped; endpoints closer than 1e-8 are
    reported once.
    """
    if not sys.is_square:
        raise ValueError("total_degree_solve needs a square system")
    total = math.prod(sys.degrees)
    if total > budget:
        raise BudgetExceeded(f"total degree {total} exceeds budget {budget}")
    settings = settings or WITNESS_SETTINGS
    h = TotalDegreeHomotopy(sys, random_unit(as_rng(rng)))
    source = BatchSource(make_job(h, p, settings) for p in h.start_points())
    (scheduler or Scheduler(1)).run(source)
    found: list[np.ndarray] = []
    for r in source.results:
        if r is None or not r.ok:
            continue
        if all(np.abs(r.end_point - q).max() > DUPLICATE_TOL for q in found):
            found.append(r.end_point)
    return found


def witness_points(emb: EmbeddedSystem, rng, settings: TrackSettings | None = None,
                   scheduler: Scheduler | None = None, budget: int = DEFAULT_BUDGET) -> WitnessSet:
    """Witness set of the k-dimensional part: total-degree solutions with zero slack."""
    sols = total_degree_solve(emb.combined, rng, settings, scheduler, budget)
    pts = tuple(p for p in sols if np.abs(emb.slack(p)).max() < SLACK_TOL)
    if not pts:
        raise NoWitnessPoints(f"no solutions with zero slack; is dimension {emb.k} right?")
    w = WitnessSet(emb, pts)
    report = validate(w)
    if not report.passed:
        raise RuntimeError(f"witness validation failed: {report}")
    return w
