"""Generators for the standard test systems, as input-format text or PolySystem."""

from __future__ import annotations

from .polysys import PolySystem, parse_system

__all__ = ["cyclic", "adjacent_minors", "EXAMPLES", "example"]


def _x(i: int) -> str:
    return f"x{i + 1}"


def cyclic(n: int) -> PolySystem:
    """The cyclic-n roots system: elementary-like cyclic sums of length 1..n-1 and prod - 1."""
    if n < 2:
        raise ValueError("cyclic needs n >= 2")
    lines = []
    for length in range(1, n):
        terms = ["*".join(_x((i + j) % n) for j in range(length)) for i in range(n)]
        lines.append(" + ".join(terms) + ";")
    lines.append("*".join(_x(i) for i in range(n)) + " - 1;")
    return parse_system(f"{n}\n" + "\n".join(lines) + "\n")


def adjacent_minors(n: int) -> PolySystem:
    """Adjacent 2x2 minors of a generic 2 x n matrix [[x1..xn], [x(n+1)..x(2n)]]."""
    if n < 2:
        raise ValueError("adjacent_minors needs n >= 2")
    top = [_x(i) for i in range(n)]
    bot = [_x(n + i) for i in range(n)]
    lines = [f"{top[j]}*{bot[j + 1]} - {top[j + 1]}*{bot[j]};" for j in range(n - 1)]
    return parse_system(f"{2 * n}\n" + "\n".join(lines) + "\n")


EXAMPLES = {
    "parabola": "2\nx2^2 - x1;\n",
    "two-hyperbolas": "2\n(x1*x2 - 1)*(x1*x2 + 1);\n",
    "hyperbolas-and-line": "2\n(x1*x2 - 1)*(x1*x2 + 1)*(x1 - x2);\n",
}


def example(name: str) -> PolySystem:
    """Named system: an entry of EXAMPLES, ``cyclic-<n>`` or ``minors-2x<n>``."""
    if name in EXAMPLES:
        return parse_system(EXAMPLES[name])
    if name.startswith("cyclic-"):
        return cyclic(int(name.split("-", 1)[1]))
    if name.startswith("minors-2x"):
        return adjacent_minors(int(name[len("minors-2x"):]))
    raise KeyError(f"unknown example {name!r}")
