"""Witness sets: an embedded system, its slice, and the slice's points on the component."""

from __future__ import annotations

from dataclasses import dataclass
from typing import IO

import numpy as np

from .embedding import EmbeddedSystem, SliceSet, embed
from .polysys import PolySystem
from .scheduler import BatchSource, Scheduler, make_job
from .tracker import MonodromyHomotopy, TrackSettings

__all__ = [
    "WitnessSet",
    "ValidationReport",
    "ResampleError",
    "validate",
    "resample",
    "write_witness",
    "read_witness",
    "RESIDUAL_TOL",
    "SEPARATION_TOL",
]

RESIDUAL_TOL = 1e-8
SEPARATION_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class WitnessSet:
    """Points are kept in embedded coordinates (n + k entries, slack ~ 0)."""

    emb: EmbeddedSystem
    points: tuple[np.ndarray, ...]

    def __post_init__(self):
        pts = []
        for p in self.points:
            p = np.array(p, dtype=complex)
            if p.shape != (self.emb.n_total,):
                raise ValueError(f"witness point has shape {p.shape}, expected ({self.emb.n_total},)")
            p.setflags(write=False)
            pts.append(p)
        object.__setattr__(self, "points", tuple(pts))

    @property
    def slice(self) -> SliceSet:
        return self.emb.slice

    @property
    def dim(self) -> int:
        return self.emb.k

    @property
    def degree(self) -> int:
        return len(self.points)

    @property
    def coordinates(self) -> np.ndarray:
        """d x n array of the points with slack coordinates dropped."""
        return np.array([p[: self.emb.n] for p in self.points]).reshape(self.degree, self.emb.n)


@dataclass
class ValidationReport:
    residuals: list[float]
    slack: list[float]
    min_separation: float
    tol_res: float
    tol_sep: float

    @property
    def residual_ok(self) -> list[bool]:
        return [r < self.tol_res for r in self.residuals]

    @property
    def slack_ok(self) -> list[bool]:
        return [s < self.tol_res for s in self.slack]

    @property
    def separation_ok(self) -> bool:
        return self.min_separation > self.tol_sep

    @property
    def passed(self) -> bool:
        return all(self.residual_ok) and all(self.slack_ok) and self.separation_ok


def validate(w: WitnessSet, tol_res: float = RESIDUAL_TOL, tol_sep: float = SEPARATION_TOL) -> ValidationReport:
    residuals = [float(np.abs(w.emb.residual(p)).max()) for p in w.points]
    slack = [float(np.abs(w.emb.slack(p)).max(initial=0.0)) for p in w.points]
    sep = np.inf
    for i in range(w.degree):
        for j in range(i + 1, w.degree):
            sep = min(sep, float(np.abs(w.points[i] - w.points[j]).max()))
    return ValidationReport(residuals, slack, sep, tol_res, tol_sep)


class ResampleError(RuntimeError):
    def __init__(self, failed: list[int]):
        self.failed = failed
        super().__init__(f"{len(failed)} path(s) failed: indices {failed}")


def resample(w: WitnessSet, L_new: SliceSet, gamma: complex, settings: TrackSettings | None = None,
             scheduler: Scheduler | None = None) -> WitnessSet:
    """Move every witness point to ``L_new``; point i of the result is the image of point i."""
    settings = settings or TrackSettings()
    if complex(gamma) == 0:
        raise ValueError("gamma must be nonzero")
    if L_new.normals.shape != w.slice.normals.shape:
        raise ValueError("L_new must have the same n and k as the witness slice")
    h = MonodromyHomotopy(w.emb, w.slice, L_new, gamma)
    source = BatchSource(make_job(h, p, settings) for p in w.points)
    (scheduler or Scheduler(1)).run(source)
    failed = [i for i, r in enumerate(source.results) if r is None or not r.ok]
    if failed:
        raise ResampleError(failed)
    return WitnessSet(w.emb.with_slice(L_new), tuple(r.end_point for r in source.results))


# --- file format ------------------------------------------------------------------------


def _fmt(values) -> str:
    return " ".join(f"{v.real:.17g} {v.imag:.17g}" for v in np.asarray(values, dtype=complex))


def write_witness(w: WitnessSet, out: IO[str]) -> None:
    """Header ``n``, ``k``, ``d``; k slice lines ``c0 c1 .. cn``; d point lines (n + k values)."""
    out.write(f"n {w.emb.n}\nk {w.dim}\nd {w.degree}\n")
    for j in range(w.dim):
        out.write(_fmt(np.concatenate([[w.slice.offsets[j]], w.slice.normals[j]])) + "\n")
    for p in w.points:
        out.write(_fmt(p) + "\n")


def _parse_complex_row(line: str, count: int, lineno: int) -> np.ndarray:
    parts = line.split()
    if len(parts) != 2 * count:
        raise ValueError(f"line {lineno}: expected {2 * count} numbers, got {len(parts)}")
    nums = np.array([float(v) for v in parts])
    return nums[0::2] + 1j * nums[1::2]


def read_witness(text: str, system: PolySystem, rng) -> WitnessSet:
    """Rebuild a witness set from file text and the system it belongs to.

    Slack coefficients are not stored in the file; fresh random ones are drawn
    from ``rng`` (points with zero slack solve every such embedding).
    """
    lines = [ln for ln in text.splitlines() if ln.strip()]
    header = {}
    for idx, key in enumerate("nkd"):
        parts = lines[idx].split() if idx < len(lines) else []
        if len(parts) != 2 or parts[0] != key:
            raise ValueError(f"line {idx + 1}: expected '{key} <int>'")
        header[key] = int(parts[1])
    n, k, d = header["n"], header["k"], header["d"]
    if n != system.n_vars:
        raise ValueError(f"witness file is for n={n}, system has {system.n_vars} variables")
    if len(lines) != 3 + k + d:
        raise ValueError(f"expected {3 + k + d} lines, found {len(lines)}")
    rows = [_parse_complex_row(lines[3 + j], n + 1, 4 + j) for j in range(k)]
    s = SliceSet(np.array([r[1:] for r in rows]), np.array([r[0] for r in rows]))
    points = tuple(_parse_complex_row(lines[3 + k + i], n + k, 4 + k + i) for i in range(d))
    return WitnessSet(embed(system, k, rng, slice=s), points)
