import numpy as np
import pytest

from monobreak.embedding import SliceSet, embed
from monobreak.polysys import parse_system
from monobreak.startsolve import witness_points
from monobreak.systems import cyclic
from monobreak.witness import WitnessSet

PARABOLA = "2\nx2^2 - x1;\n"


def line_x(c: complex) -> SliceSet:
    """The vertical line x1 = c in C^2."""
    return SliceSet(np.array([[1.0, 0.0]]), np.array([-c]))


def parabola_witness(c: complex = 1.0, seed: int = 0) -> WitnessSet:
    """Witness set of y^2 = x on x = c with the analytic points (c, +-sqrt(c))."""
    sys_ = parse_system(PARABOLA)
    emb = embed(sys_, 1, np.random.default_rng(seed), slice=line_x(c))
    r = np.sqrt(complex(c))
    return WitnessSet(emb, (np.array([c, r, 0]), np.array([c, -r, 0])))


@pytest.fixture(scope="session")
def cyclic4_witness():
    rng = np.random.default_rng(0)
    return witness_points(embed(cyclic(4), 1, rng), rng)


@pytest.fixture
def parabola():
    return parabola_witness()


def cyclic4_factor(point) -> int:
    """Label of the cyclic-4 quadric through ``point``: 0 for x1 x2 = 1, 1 for x1 x2 = -1.

    The curve lies in x1 + x3 = x2 + x4 = 0, where the system reduces to (x1 x2)^2 = 1.
    """
    v = point[0] * point[1]
    if abs(point[0] + point[2]) < 1e-6:
        return 0 if abs(v - 1) < 1e-6 else 1
    raise AssertionError("point off the expected components")


ACCEPTANCE_LINES: list[str] = []


def record_criterion(number, ok: bool, detail: str) -> None:
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'} - {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
