"""Generic linear slices and the slack-variable embedding.

The embedded system for dimension k of f(x) = 0 in n unknowns is::

    g_i(x) + sum_j b_ij z_j = 0      i = 1..n
    L_j(x) + z_j            = 0      j = 1..k

with n + k unknowns (x, z). When f has exactly n equations g = f; otherwise f is
first squared up to n rows (random combinations if m > n, zero rows if m < n).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .polysys import PolySystem

__all__ = [
    "SliceSet",
    "EmbeddedSystem",
    "as_rng",
    "random_unit",
    "random_slice",
    "parallel_slice",
    "shifted_slice",
    "slice_residual",
    "embed",
]

RANK_TOL = 1e-8


def as_rng(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def random_unit(rng: np.random.Generator, shape=()) -> np.ndarray | complex:
    """Complex numbers of modulus one with uniformly distributed argument."""
    z = np.exp(2j * np.pi * rng.random(shape))
    return complex(z) if shape == () else z


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class SliceSet:
    """k affine hyperplanes  offsets + normals @ x = 0  in C^n."""

    normals: np.ndarray
    offsets: np.ndarray

    def __post_init__(self):
        normals = _frozen(self.normals)
        offsets = _frozen(self.offsets)
        if normals.ndim != 2 or offsets.shape != (normals.shape[0],):
            raise ValueError("normals must be k x n and offsets length k")
        if not (np.all(np.isfinite(normals)) and np.all(np.isfinite(offsets))):
            raise ValueError("slice coefficients must be finite")
        k, n = normals.shape
        if k < 1 or k > n:
            raise ValueError(f"invalid slice shape {normals.shape}")
        if np.linalg.svd(normals, compute_uv=False)[-1] <= RANK_TOL:
            raise ValueError("slice normals are rank deficient")
        object.__setattr__(self, "normals", normals)
        object.__setattr__(self, "offsets", offsets)

    @property
    def k(self) -> int:
        return self.normals.shape[0]

    @property
    def n(self) -> int:
        return self.normals.shape[1]

    def residual(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=complex)
        if x.shape != (self.n,):
            raise ValueError(f"point has shape {x.shape}, expected ({self.n},)")
        return self.offsets + self.normals @ x

    def with_offsets(self, offsets) -> "SliceSet":
        return SliceSet(self.normals, offsets)

    def is_parallel_to(self, other: "SliceSet") -> bool:
        return self.normals.shape == other.normals.shape and np.array_equal(self.normals, other.normals)

    def __eq__(self, other):
        if not isinstance(other, SliceSet):
            return NotImplemented
        return np.array_equal(self.normals, other.normals) and np.array_equal(self.offsets, other.offsets)

    __hash__ = None


def slice_residual(s: SliceSet, x) -> np.ndarray:
    return s.residual(x)


def random_slice(n: int, k: int, rng) -> SliceSet:
    """k generic hyperplanes in C^n; every coefficient has modulus one."""
    if not 1 <= k < n:
        raise ValueError(f"need 1 <= k < n, got k={k}, n={n}")
    rng = as_rng(rng)
    while True:
        normals = random_unit(rng, (k, n))
        offsets = random_unit(rng, (k,))
        try:
            return SliceSet(normals, offsets)
        except ValueError:  # rank failure, probability zero
            continue


def parallel_slice(s: SliceSet, rng) -> SliceSet:
    """Same normals, fresh random unit-modulus offsets."""
    rng = as_rng(rng)
    while True:
        offsets = random_unit(rng, (s.k,))
        if not np.any(offsets == s.offsets):
            return s.with_offsets(offsets)


def shifted_slice(s: SliceSet, direction, shift: complex) -> SliceSet:
    """Parallel slice with offsets moved along ``direction`` by ``shift``."""
    return s.with_offsets(s.offsets + shift * np.asarray(direction, dtype=complex))


@dataclass(frozen=True, eq=False)
class EmbeddedSystem:
    """Square embedding of ``base`` for a k-dimensional component.

    ``nonlinear`` holds the first n rows (in n + k unknowns); the slice rows are
    kept separately as ``slice`` so homotopies can move them without rebuilding
    polynomials. ``combined`` is the full square system.
    """

    base: PolySystem
    slack_coeffs: np.ndarray
    slice: SliceSet
    nonlinear: PolySystem
    mixing: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.base.n_vars

    @property
    def k(self) -> int:
        return self.slice.k

    @property
    def n_total(self) -> int:
        return self.n + self.k

    def with_slice(self, s: SliceSet) -> "EmbeddedSystem":
        if s.normals.shape != self.slice.normals.shape:
            raise ValueError("incompatible slice dimensions")
        return EmbeddedSystem(self.base, self.slack_coeffs, s, self.nonlinear, self.mixing)

    @property
    def combined(self) -> PolySystem:
        n, k = self.n, self.k
        rows = self.nonlinear.to_dicts()
        for j in range(k):
            row = {(0,) * (n + k): self.slice.offsets[j]}
            for i in range(n):
                e = [0] * (n + k)
                e[i] = 1
                row[tuple(e)] = self.slice.normals[j, i]
            e = [0] * (n + k)
            e[n + j] = 1
            row[tuple(e)] = 1.0
            rows.append(row)
        return PolySystem.from_dicts(n + k, rows, self.nonlinear.var_names)

    def residual(self, x) -> np.ndarray:
        """Residual of the combined system at a point with n + k coordinates."""
        x = np.asarray(x, dtype=complex)
        return np.concatenate([self.nonlinear.eval(x), self.slice.residual(x[: self.n]) + x[self.n:]])

    def slack(self, x) -> np.ndarray:
        return np.asarray(x, dtype=complex)[self.n:]


def embed(sys: PolySystem, k: int, rng, slice: SliceSet | None = None) -> EmbeddedSystem:
    """Slack-variable embedding of ``sys`` for dimension k.

    A caller-supplied ``slice`` replaces the random one (used to reproduce
    hand-built examples).
    """
    n, m = sys.n_vars, sys.n_polys
    if not 1 <= k <= n - 1:
        raise ValueError(f"dimension k={k} out of range 1..{n - 1}")
    rng = as_rng(rng)
    if slice is None:
        slice = random_slice(n, k, rng)
    elif slice.normals.shape != (k, n):
        raise ValueError("supplied slice has wrong shape")
    slack = random_unit(rng, (n, k))
    mixing = random_unit(rng, (n, m)) if m > n else None

    polys = sys.to_dicts()
    if mixing is not None:
        squared = []
        for i in range(n):
            row: dict = {}
            for j, p in enumerate(polys):
                for e, c in p.items():
                    row[e] = row.get(e, 0) + mixing[i, j] * c
            squared.append(row)
    else:
        squared = polys + [{} for _ in range(n - m)]

    rows = []
    pad = (0,) * k
    for i, p in enumerate(squared):
        row = {e + pad: c for e, c in p.items()}
        for j in range(k):
            e = [0] * (n + k)
            e[n + j] = 1
            row[tuple(e)] = slack[i, j]
        rows.append(row)
    names = tuple(sys.var_names) + tuple(f"z{j + 1}" for j in range(k))
    nonlinear = PolySystem.from_dicts(n + k, rows, names)
    return EmbeddedSystem(sys, _frozen(slack), slice, nonlinear, None if mixing is None else _frozen(mixing))
