import numpy as np
import pytest

from monobreak.embedding import embed
from monobreak.polysys import parse_system
from monobreak.startsolve import BudgetExceeded, NoWitnessPoints, total_degree_solve, witness_points
from monobreak.systems import adjacent_minors, cyclic
from monobreak.witness import validate
from oracles import quadratic_pair_roots


def test_total_degree_solve_matches_quadratic_formula():
    sols = total_degree_solve(parse_system("2\nx1 + x2 - 3;\nx1*x2 - 2;\n"), 0)
    expected = quadratic_pair_roots(3, 2)
    assert len(sols) == 2
    for p in sols:
        assert min(abs(p[0] - a) + abs(p[1] - b) for a, b in expected) < 1e-10


def test_total_degree_needs_square_system():
    with pytest.raises(ValueError):
        total_degree_solve(parse_system("2\nx1 - 1;\n"), 0)


def test_budget_exceeded():
    with pytest.raises(BudgetExceeded):
        total_degree_solve(cyclic(4), 0, budget=10)


@pytest.mark.parametrize("text, k, d", [
    ("2\nx2^2 - x1;\n", 1, 2),
    ("2\n(x1*x2 - 1)*(x1*x2 + 1);\n", 1, 4),
    ("2\n(x1*x2 - 1)*(x1*x2 + 1)*(x1 - x2);\n", 1, 5),
])
def test_witness_degrees_small(text, k, d):
    w = witness_points(embed(parse_system(text), k, 1), np.random.default_rng(1))
    assert w.degree == d and validate(w).passed


def test_cyclic4_has_four_witness_points(cyclic4_witness):
    assert cyclic4_witness.degree == 4
    assert validate(cyclic4_witness).passed


@pytest.mark.parametrize("seed", range(6))
def test_cyclic4_degree_is_stable_over_seeds(seed):
    rng = np.random.default_rng(seed)
    assert witness_points(embed(cyclic(4), 1, rng), rng).degree == 4


def test_adjacent_minors_2x4_degree():
    rng = np.random.default_rng(0)
    w = witness_points(embed(adjacent_minors(4), 5, rng), rng)
    assert w.degree == 8


def test_wrong_dimension_has_no_witness_points():
    # cyclic-4 has no 2-dimensional component
    rng = np.random.default_rng(0)
    with pytest.raises(NoWitnessPoints):
        witness_points(embed(cyclic(4), 2, rng), rng)
