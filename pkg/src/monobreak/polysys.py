"""Sparse multivariate polynomial systems over the complex numbers.

A system is stored as a list of polynomials, each a list of ``Term`` objects
(coefficient plus exponent vector). Evaluation and differentiation are compiled
once into dense index arrays so the tracker can call them in a tight loop.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

__all__ = [
    "ParseError",
    "Term",
    "PolySystem",
    "parse_system",
    "format_system",
    "format_complex",
]


class ParseError(ValueError):
    """Raised on malformed system text. Carries 1-based line and column."""

    def __init__(self, message: str, line: int | None = None, col: int | None = None):
        self.line = line
        self.col = col
        where = f" (line {line}, column {col})" if line is not None else ""
        super().__init__(message + where)


@dataclass(frozen=True)
class Term:
    coeff: complex
    exponents: tuple[int, ...]

    def __post_init__(self):
        if self.coeff == 0:
            raise ValueError("term coefficient must be nonzero")
        if not (math.isfinite(self.coeff.real) and math.isfinite(self.coeff.imag)):
            raise ValueError("term coefficient must be finite")
        if any(e < 0 for e in self.exponents):
            raise ValueError("exponents must be non-negative")

    @property
    def degree(self) -> int:
        return sum(self.exponents)


def _grlex_key(exps: tuple[int, ...]) -> tuple:
    # descending total degree, then descending lex
    return (-sum(exps), tuple(-e for e in exps))


def _canonical(terms: dict[tuple[int, ...], complex]) -> tuple[Term, ...]:
    return tuple(
        Term(complex(c), e) for e, c in sorted(terms.items(), key=lambda kv: _grlex_key(kv[0])) if c != 0
    )


@dataclass(frozen=True, eq=False)
class PolySystem:
    """Immutable system f = (f_1, ..., f_m) in ``n_vars`` unknowns."""

    n_vars: int
    polys: tuple[tuple[Term, ...], ...]
    var_names: tuple[str, ...] = field(default=())

    def __post_init__(self):
        if self.n_vars < 1:
            raise ValueError("n_vars must be positive")
        if not self.var_names:
            object.__setattr__(self, "var_names", tuple(f"x{j + 1}" for j in range(self.n_vars)))
        if len(self.var_names) != self.n_vars:
            raise ValueError("var_names length must equal n_vars")
        polys = []
        for i, poly in enumerate(self.polys):
            if not poly:
                raise ValueError(f"polynomial {i + 1} is identically zero")
            seen = set()
            for t in poly:
                if len(t.exponents) != self.n_vars:
                    raise ValueError(f"polynomial {i + 1}: exponent vector length {len(t.exponents)} != {self.n_vars}")
                if t.exponents in seen:
                    raise ValueError(f"polynomial {i + 1}: duplicate exponent {t.exponents}")
                seen.add(t.exponents)
            polys.append(tuple(sorted(poly, key=lambda t: _grlex_key(t.exponents))))
        object.__setattr__(self, "polys", tuple(polys))

    @classmethod
    def from_dicts(cls, n_vars: int, polys: Sequence[dict[tuple[int, ...], complex]],
                   var_names: Sequence[str] = ()) -> "PolySystem":
        """Build from ``{exponent tuple: coefficient}`` maps; zero coefficients are dropped."""
        return cls(n_vars, tuple(_canonical(dict(p)) for p in polys), tuple(var_names))

    def to_dicts(self) -> list[dict[tuple[int, ...], complex]]:
        return [{t.exponents: t.coeff for t in poly} for poly in self.polys]

    @property
    def n_polys(self) -> int:
        return len(self.polys)

    @property
    def degrees(self) -> tuple[int, ...]:
        return tuple(max(t.degree for t in poly) for poly in self.polys)

    @property
    def is_square(self) -> bool:
        return self.n_polys == self.n_vars

    def __eq__(self, other):
        if not isinstance(other, PolySystem):
            return NotImplemented
        return self.n_vars == other.n_vars and self.polys == other.polys

    def __hash__(self):
        return hash((self.n_vars, self.polys))

    def __getstate__(self):
        # compile before pickling so worker processes do not redo it for every job
        self._c_eval, self._c_jac
        return dict(self.__dict__)

    def __setstate__(self, state):
        self.__dict__.update(state)

    # --- compiled representation -------------------------------------------------

    @cached_property
    def _c_eval(self):
        exps, rows, coeffs = [], [], []
        for i, poly in enumerate(self.polys):
            for t in poly:
                exps.append(t.exponents)
                rows.append(i)
                coeffs.append(t.coeff)
        exps = np.array(exps, dtype=np.intp).reshape(-1, self.n_vars)
        mat = np.zeros((self.n_polys, len(coeffs)), dtype=complex)
        mat[rows, np.arange(len(coeffs))] = coeffs
        return exps, mat

    @cached_property
    def _c_jac(self):
        exps, rows, coeffs = [], [], []
        n = self.n_vars
        for i, poly in enumerate(self.polys):
            for t in poly:
                for j, e in enumerate(t.exponents):
                    if e == 0:
                        continue
                    de = list(t.exponents)
                    de[j] -= 1
                    exps.append(de)
                    rows.append(i * n + j)
                    coeffs.append(t.coeff * e)
        exps = np.array(exps, dtype=np.intp).reshape(-1, n)
        mat = np.zeros((self.n_polys * n, len(coeffs)), dtype=complex)
        if coeffs:
            mat[rows, np.arange(len(coeffs))] = coeffs
        return exps, mat

    @cached_property
    def _c_maxdeg(self) -> int:
        return max(max(t.exponents) if t.exponents else 0 for poly in self.polys for t in poly)

    def _power_table(self, x: np.ndarray) -> np.ndarray:
        d = self._c_maxdeg
        table = np.empty((self.n_vars, d + 1), dtype=complex)
        table[:, 0] = 1.0
        if d:
            table[:, 1:] = x[:, None]
            np.cumprod(table[:, 1:], axis=1, out=table[:, 1:])
        return table

    def _check_point(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=complex)
        if x.shape != (self.n_vars,):
            raise ValueError(f"point has shape {x.shape}, expected ({self.n_vars},)")
        return x

    @staticmethod
    def _monomials(table: np.ndarray, exps: np.ndarray) -> np.ndarray:
        cols = np.arange(table.shape[0])
        return table[cols, exps].prod(axis=1)

    def eval(self, x) -> np.ndarray:
        """Residual vector (f_1(x), ..., f_m(x))."""
        x = self._check_point(x)
        exps, mat = self._c_eval
        return mat @ self._monomials(self._power_table(x), exps)

    def jacobian(self, x) -> np.ndarray:
        """m x n matrix of partial derivatives at x."""
        x = self._check_point(x)
        exps, mat = self._c_jac
        if exps.shape[0] == 0:
            return np.zeros((self.n_polys, self.n_vars), dtype=complex)
        return (mat @ self._monomials(self._power_table(x), exps)).reshape(self.n_polys, self.n_vars)

    def eval_and_jacobian(self, x) -> tuple[np.ndarray, np.ndarray]:
        x = self._check_point(x)
        table = self._power_table(x)
        exps, mat = self._c_eval
        value = mat @ self._monomials(table, exps)
        jexps, jmat = self._c_jac
        if jexps.shape[0] == 0:
            return value, np.zeros((self.n_polys, self.n_vars), dtype=complex)
        jac = (jmat @ self._monomials(table, jexps)).reshape(self.n_polys, self.n_vars)
        return value, jac


# --- text format -------------------------------------------------------------------


def _fmt_real(v: float) -> str:
    if v.is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


def format_complex(c: complex) -> str:
    """Shortest round-trip text for a coefficient: ``a``, ``(a+bi)`` or ``bi``."""
    re_, im = float(c.real), float(c.imag)
    if im == 0:
        return _fmt_real(re_)
    if re_ == 0:
        return f"{_fmt_real(im)}i"
    sign = "-" if im < 0 else "+"
    return f"({_fmt_real(re_)}{sign}{_fmt_real(abs(im))}i)"


def _format_poly(poly: Sequence[Term], names: Sequence[str]) -> str:
    parts = []
    for t in poly:
        factors = []
        for name, e in zip(names, t.exponents):
            if e == 1:
                factors.append(name)
            elif e > 1:
                factors.append(f"{name}^{e}")
        c = t.coeff
        if factors and c == 1:
            body = "*".join(factors)
        elif factors and c == -1:
            body = "-" + "*".join(factors)
        else:
            body = "*".join([format_complex(c)] + factors)
        parts.append(body)
    text = parts[0]
    for p in parts[1:]:
        text += " - " + p[1:] if p.startswith("-") else " + " + p
    return text + ";"


def format_system(sys: PolySystem) -> str:
    """Render in the system file format (first line n, then one polynomial per line)."""
    names = [f"x{j + 1}" for j in range(sys.n_vars)]
    return "\n".join([str(sys.n_vars)] + [_format_poly(p, names) for p in sys.polys]) + "\n"


class _Parser:
    """Recursive-descent parser for one polynomial; expands products on the fly."""

    def __init__(self, text: str, start: int, n: int, line_of):
        self.text = text
        self.pos = start
        self.n = n
        self.line_of = line_of

    def error(self, msg: str, pos: int | None = None):
        if pos is None:
            pos = self.pos
            if pos >= len(self.text):  # point just past the last token, not at the end of the file
                pos = len(self.text.rstrip())
        line, col = self.line_of(pos)
        raise ParseError(msg, line, col)

    def skip(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def peek(self) -> str:
        self.skip()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def poly(self) -> dict:
        result: dict = {}
        sign = 1
        if self.peek() in ("+", "-"):
            sign = -1 if self.text[self.pos] == "-" else 1
            self.pos += 1
        while True:
            term = self.product()
            for e, c in term.items():
                result[e] = result.get(e, 0) + sign * c
            ch = self.peek()
            if ch in ("+", "-"):
                sign = -1 if ch == "-" else 1
                self.pos += 1
            else:
                return result

    def product(self) -> dict:
        acc = self.power()
        while self.peek() == "*":
            self.pos += 1
            acc = _mul(acc, self.power())
        return acc

    def power(self) -> dict:
        base = self.atom()
        if self.peek() == "^":
            self.pos += 1
            self.skip()
            start = self.pos
            while self.pos < len(self.text) and self.text[self.pos].isdigit():
                self.pos += 1
            if start == self.pos:
                self.error("expected integer exponent")
            e = int(self.text[start:self.pos])
            out = {(0,) * self.n: 1}
            for _ in range(e):
                out = _mul(out, base)
            return out
        return base

    def atom(self) -> dict:
        ch = self.peek()
        zero = (0,) * self.n
        if ch == "(":
            self.pos += 1
            inner = self.poly()
            if self.peek() != ")":
                self.error("expected ')'")
            self.pos += 1
            return inner
        if ch.isdigit() or ch == ".":
            start = self.pos
            m = _NUMBER.match(self.text, self.pos)
            if not m:
                self.error("malformed number")
            self.pos = m.end()
            value = float(m.group(0))
            if self.pos < len(self.text) and self.text[self.pos] == "i" and not self._ident_follows(self.pos + 1):
                self.pos += 1
                return {zero: complex(0, value)}
            return {zero: complex(value)}
        if ch.isalpha() or ch == "_":
            start = self.pos
            while self.pos < len(self.text) and (self.text[self.pos].isalnum() or self.text[self.pos] == "_"):
                self.pos += 1
            name = self.text[start:self.pos]
            if name == "i":
                return {zero: 1j}
            m = _VAR.fullmatch(name)
            if not m or not 1 <= int(m.group(1)) <= self.n:
                self.error(f"unknown variable {name!r}", start)
            e = [0] * self.n
            e[int(m.group(1)) - 1] = 1
            return {tuple(e): complex(1)}
        self.error("unexpected character " + (repr(ch) if ch else "end of input"))

    def _ident_follows(self, pos: int) -> bool:
        return pos < len(self.text) and (self.text[pos].isalnum() or self.text[pos] == "_")


def _mul(a: dict, b: dict) -> dict:
    out: dict = {}
    for ea, ca in a.items():
        for eb, cb in b.items():
            e = tuple(x + y for x, y in zip(ea, eb))
            out[e] = out.get(e, 0) + ca * cb
    return out


_NUMBER = re.compile(r"(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?")
_VAR = re.compile(r"x(\d+)")


def parse_system(text: str) -> PolySystem:
    """Parse the system file format.

    >>> parse_system("2\\nx1 + x2;\\nx1*x2 - 1;").degrees
    (1, 2)
    """
    line_starts = [0] + [i + 1 for i, ch in enumerate(text) if ch == "\n"]

    def line_of(pos: int) -> tuple[int, int]:
        lo = 0
        for idx, s in enumerate(line_starts):
            if s <= pos:
                lo = idx
        return lo + 1, pos - line_starts[lo] + 1

    first_nl = text.find("\n")
    header = text if first_nl < 0 else text[:first_nl]
    try:
        n = int(header.strip())
    except ValueError:
        raise ParseError("first line must be the number of variables", 1, 1) from None
    if n < 1:
        raise ParseError("number of variables must be positive", 1, 1)
    pos = len(text) if first_nl < 0 else first_nl + 1
    polys = []
    while True:
        p = _Parser(text, pos, n, line_of)
        if p.peek() == "":
            break
        start = p.pos
        terms = p.poly()
        if p.peek() != ";":
            p.error("expected ';'")
        p.pos += 1
        cleaned = {e: c for e, c in terms.items() if c != 0}
        if not cleaned:
            raise ParseError("zero polynomial", *line_of(start))
        polys.append(cleaned)
        pos = p.pos
    if not polys:
        raise ParseError("no polynomials", 1, 1)
    return PolySystem.from_dicts(n, polys)
