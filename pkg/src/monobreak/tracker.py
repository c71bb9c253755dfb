"""Predictor-corrector path tracking.

Two homotopies share one tracker:

* ``MonodromyHomotopy`` moves the slice rows of an embedded system from one
  slice to another, ``(1-t) L_start + gamma t L_target``, with the nonlinear
  rows fixed.
* ``TotalDegreeHomotopy`` deforms ``x_i^{d_i} - 1`` into a square target
  system (used to compute witness points from scratch).
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.linalg import LinAlgWarning, lu_factor, lu_solve

from .embedding import EmbeddedSystem, SliceSet
from .polysys import PolySystem

__all__ = [
    "TrackSettings",
    "PathStatus",
    "PathResult",
    "MonodromyHomotopy",
    "TotalDegreeHomotopy",
    "SingularJacobian",
    "homotopy_eval",
    "newton_correct",
    "track",
]

PIVOT_TOL = 1e-14
DIVERGENCE_NORM = 1e8
SLACK_TOL = 1e-8


@dataclass(frozen=True)
class TrackSettings:
    step_init: float = 0.1
    step_min: float = 1e-6
    step_max: float = 0.2
    newton_tol: float = 1e-8
    newton_max_iters: int = 4
    endpoint_tol: float = 1e-10
    step_expand: float = 1.5
    step_shrink: float = 0.5
    consecutive_successes_to_expand: int = 3

    def __post_init__(self):
        if not 0 < self.step_min <= self.step_init <= self.step_max < 1:
            raise ValueError("need 0 < step_min <= step_init <= step_max < 1")
        if self.newton_tol <= 0 or self.endpoint_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.newton_max_iters < 1 or self.consecutive_successes_to_expand < 1:
            raise ValueError("iteration counts must be positive")
        if not (0 < self.step_shrink < 1 < self.step_expand):
            raise ValueError("need 0 < step_shrink < 1 < step_expand")


class PathStatus(str, enum.Enum):
    SUCCESS = "Success"
    MIN_STEP = "MinStepReached"
    DIVERGED = "MaxItersDiverged"
    CROSSED = "Crossed"


@dataclass
class PathResult:
    status: PathStatus
    end_point: np.ndarray
    steps_taken: int = 0
    newton_iters_total: int = 0
    t_reached: float = 0.0
    residual: float = float("nan")

    @property
    def ok(self) -> bool:
        return self.status is PathStatus.SUCCESS


class SingularJacobian(ArithmeticError):
    pass


def _solve(jac: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Dense complex solve with partial pivoting; raises on a tiny pivot."""
    scale = max(1.0, float(np.abs(jac).max(initial=0.0)))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", LinAlgWarning)
        lu, piv = lu_factor(jac, check_finite=False)
    if np.abs(np.diagonal(lu)).min() <= PIVOT_TOL * scale:
        raise SingularJacobian
    return lu_solve((lu, piv), rhs, check_finite=False)


def newton_correct(evaluator: Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]],
                   x, tol: float, max_iters: int,
                   contraction: float | None = None) -> tuple[np.ndarray, bool, int]:
    """Newton's method on a square system.

    ``evaluator(x)`` returns ``(value, jacobian)``. Converged means the max-norm
    of an update dropped below ``tol * max(1, |x|)`` within ``max_iters``
    iterations, so large points are judged on relative accuracy. With
    ``contraction`` set, an update that is not at least that factor smaller
    than its predecessor aborts the iteration (guards against path jumping).
    """
    x = np.array(x, dtype=complex)
    prev = np.inf
    for it in range(1, max_iters + 1):
        value, jac = evaluator(x)
        try:
            dx = _solve(jac, -value)
        except SingularJacobian:
            return x, False, it
        x = x + dx
        size = float(np.abs(dx).max())
        if not np.isfinite(size):
            return x, False, it
        if size < tol * max(1.0, float(np.abs(x).max())):
            return x, True, it
        if contraction is not None and size > contraction * prev:
            return x, False, it
        prev = size
    return x, False, max_iters


@dataclass(frozen=True, eq=False)
class MonodromyHomotopy:
    """Slice rows interpolated as (1-t) L_start + gamma t L_target; slack carried in both."""

    embedded: EmbeddedSystem
    L_start: SliceSet
    L_target: SliceSet
    gamma: complex = 1.0

    def __post_init__(self):
        g = complex(self.gamma)
        if g == 0 or not np.isfinite(g):
            raise ValueError("gamma must be a finite nonzero complex number")
        if not np.isclose(abs(g), 1.0, rtol=0, atol=1e-12):
            raise ValueError("gamma must have modulus one")
        shape = self.embedded.slice.normals.shape
        if self.L_start.normals.shape != shape or self.L_target.normals.shape != shape:
            raise ValueError("slices must match the embedding's k and n")
        object.__setattr__(self, "gamma", g)

    @property
    def n_total(self) -> int:
        return self.embedded.n_total

    def _weights(self, t: float) -> tuple[complex, complex]:
        return 1.0 - t, self.gamma * t

    def eval(self, x, t: float) -> np.ndarray:
        x = np.asarray(x, dtype=complex)
        n = self.embedded.n
        a, b = self._weights(t)
        z = x[n:]
        lin = a * (self.L_start.residual(x[:n]) + z) + b * (self.L_target.residual(x[:n]) + z)
        return np.concatenate([self.embedded.nonlinear.eval(x), lin])

    def eval_jac(self, x, t: float) -> tuple[np.ndarray, np.ndarray]:
        x = np.asarray(x, dtype=complex)
        n, k = self.embedded.n, self.embedded.k
        a, b = self._weights(t)
        value, jac = self.embedded.nonlinear.eval_and_jacobian(x)
        z = x[n:]
        lin = a * (self.L_start.residual(x[:n]) + z) + b * (self.L_target.residual(x[:n]) + z)
        lin_jac = np.empty((k, n + k), dtype=complex)
        lin_jac[:, :n] = a * self.L_start.normals + b * self.L_target.normals
        lin_jac[:, n:] = (a + b) * np.eye(k)
        return np.concatenate([value, lin]), np.vstack([jac, lin_jac])

    def dt(self, x, t: float) -> np.ndarray:
        x = np.asarray(x, dtype=complex)
        n = self.embedded.n
        z = x[n:]
        lin = -(self.L_start.residual(x[:n]) + z) + self.gamma * (self.L_target.residual(x[:n]) + z)
        return np.concatenate([np.zeros(n, dtype=complex), lin])

    def endpoint_defect(self, x) -> PathStatus | None:
        # a monodromy path must stay on the z = 0 sheet
        if np.abs(np.asarray(x)[self.embedded.n:]).max(initial=0.0) >= SLACK_TOL:
            return PathStatus.CROSSED
        return None

    def reversed(self, gamma: complex | None = None) -> "MonodromyHomotopy":
        """Homotopy back from L_target to L_start; default gamma retraces this path."""
        g = 1.0 / self.gamma if gamma is None else gamma
        return MonodromyHomotopy(self.embedded.with_slice(self.L_target), self.L_target, self.L_start, g)


def homotopy_eval(h: MonodromyHomotopy, x, t: float) -> np.ndarray:
    if not 0.0 <= t <= 1.0:
        raise ValueError("t must lie in [0, 1]")
    x = np.asarray(x, dtype=complex)
    if x.shape != (h.n_total,):
        raise ValueError(f"point has shape {x.shape}, expected ({h.n_total},)")
    return h.eval(x, t)


@dataclass(frozen=True, eq=False)
class TotalDegreeHomotopy:
    """(1-t) gamma G(x) + t F(x) with G_i = x_i^{d_i} - 1."""

    target: PolySystem
    gamma: complex
    degrees: tuple[int, ...] = field(default=())

    def __post_init__(self):
        if not self.target.is_square:
            raise ValueError("total-degree homotopy needs a square system")
        object.__setattr__(self, "degrees", tuple(self.target.degrees))
        object.__setattr__(self, "gamma", complex(self.gamma))

    @property
    def n_total(self) -> int:
        return self.target.n_vars

    def _start(self, x):
        d = np.array(self.degrees)
        return x ** d - 1.0, d * x ** (d - 1)

    def eval(self, x, t: float) -> np.ndarray:
        x = np.asarray(x, dtype=complex)
        g, _ = self._start(x)
        return (1 - t) * self.gamma * g + t * self.target.eval(x)

    def eval_jac(self, x, t: float):
        x = np.asarray(x, dtype=complex)
        g, dg = self._start(x)
        f, jf = self.target.eval_and_jacobian(x)
        jac = t * jf
        jac[np.diag_indices_from(jac)] += (1 - t) * self.gamma * dg
        return (1 - t) * self.gamma * g + t * f, jac

    def dt(self, x, t: float) -> np.ndarray:
        x = np.asarray(x, dtype=complex)
        g, _ = self._start(x)
        return self.target.eval(x) - self.gamma * g

    def endpoint_defect(self, x) -> PathStatus | None:
        return None

    def start_points(self) -> list[np.ndarray]:
        """All prod(d_i) solutions of x_i^{d_i} = 1."""
        axes = [np.exp(2j * np.pi * np.arange(d) / d) for d in self.degrees]
        grid = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([g.ravel() for g in grid], axis=1)
        return [p.copy() for p in pts]


def _refine_endpoint(h, x, s: TrackSettings, max_iters: int = 8):
    """Newton at t = 1 until the residual is below endpoint_tol."""
    iters = 0
    for _ in range(max_iters):
        value, jac = h.eval_jac(x, 1.0)
        res = float(np.abs(value).max())
        try:
            dx = _solve(jac, -value)
        except SingularJacobian:
            return x, res, iters, False
        iters += 1
        x = x + dx
        if res < s.endpoint_tol and float(np.abs(dx).max()) < s.endpoint_tol:
            break
    res = float(np.abs(h.eval(x, 1.0)).max())
    return x, res, iters, res < s.endpoint_tol


def track(h, start, s: TrackSettings | None = None) -> PathResult:
    """Follow one solution path of ``h`` from t = 0 to t = 1.

    Euler predictor along the implicit tangent ``J_x dx = -dH/dt``, Newton
    corrector at the new t, step halving on failure and growth after a run of
    successes, then a final refinement at t = 1.
    """
    s = s or TrackSettings()
    x = np.array(start, dtype=complex)
    if x.shape != (h.n_total,):
        raise ValueError(f"start point has shape {x.shape}, expected ({h.n_total},)")
    t = 0.0
    step = s.step_init
    streak = 0
    steps = 0
    newton_total = 0

    def corrector_at(tt):
        return lambda y: h.eval_jac(y, tt)

    while t < 1.0:
        dt = min(step, 1.0 - t)
        t_new = 1.0 if 1.0 - (t + dt) < 1e-14 else t + dt
        value, jac = h.eval_jac(x, t)
        try:
            tangent = _solve(jac, -h.dt(x, t))
        except SingularJacobian:
            tangent = None
        if tangent is not None:
            guess = x + (t_new - t) * tangent
            x_new, ok, iters = newton_correct(corrector_at(t_new), guess, s.newton_tol,
                                              s.newton_max_iters, contraction=0.5)
            newton_total += iters
        else:
            ok = False
        if ok:
            x, t = x_new, t_new
            steps += 1
            if float(np.abs(x).max()) > DIVERGENCE_NORM:
                return PathResult(PathStatus.DIVERGED, x, steps, newton_total, t)
            streak += 1
            if streak >= s.consecutive_successes_to_expand:
                step = min(step * s.step_expand, s.step_max)
                streak = 0
        else:
            streak = 0
            step *= s.step_shrink
            if step < s.step_min:
                return PathResult(PathStatus.MIN_STEP, x, steps, newton_total, t)

    x, res, iters, ok = _refine_endpoint(h, x, s)
    newton_total += iters
    if not ok:
        return PathResult(PathStatus.DIVERGED, x, steps, newton_total, 1.0, res)
    defect = h.endpoint_defect(x)
    if defect is not None:
        return PathResult(defect, x, steps, newton_total, 1.0, res)
    return PathResult(PathStatus.SUCCESS, x, steps, newton_total, 1.0, res)
