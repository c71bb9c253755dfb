import numpy as np
import pytest

from monobreak.embedding import SliceSet, embed, parallel_slice, random_slice, random_unit, shifted_slice
from monobreak.polysys import parse_system
from monobreak.systems import adjacent_minors, cyclic


def test_random_unit_has_modulus_one():
    v = random_unit(np.random.default_rng(0), (50,))
    assert np.allclose(np.abs(v), 1)
    assert isinstance(random_unit(np.random.default_rng(0)), complex)


def test_random_slice_shape_and_bounds():
    s = random_slice(4, 2, 0)
    assert (s.k, s.n) == (2, 4)
    with pytest.raises(ValueError):
        random_slice(3, 3, 0)
    with pytest.raises(ValueError):
        random_slice(3, 0, 0)


def test_rank_deficient_slice_rejected():
    with pytest.raises(ValueError):
        SliceSet(np.array([[1, 1], [2, 2]]), np.array([0, 1]))


def test_slice_arrays_are_read_only():
    s = random_slice(3, 1, 0)
    with pytest.raises(ValueError):
        s.offsets[0] = 0


def test_parallel_and_shifted_slices():
    s = random_slice(4, 2, 1)
    p = parallel_slice(s, 2)
    assert p.is_parallel_to(s) and not np.array_equal(p.offsets, s.offsets)
    d = np.array([1, 0.5j])
    q = shifted_slice(s, d, 2)
    assert np.allclose(q.offsets - s.offsets, 2 * d)


def test_embedding_square_case_preserves_solutions():
    sys_ = parse_system("2\nx2^2 - x1;\n")
    emb = embed(sys_, 1, 0)
    assert emb.combined.is_square and emb.n_total == 3
    # a point on the curve and on the slice, with z = 0, solves the embedding
    a, c = emb.slice.normals[0], emb.slice.offsets[0]
    # solve a0 y^2 + a1 y + c = 0 for y, x = y^2
    y = np.roots([a[0], a[1], c])[0]
    x = np.array([y * y, y, 0])
    assert np.abs(emb.residual(x)).max() < 1e-12
    assert emb.slack(x)[0] == 0


@pytest.mark.parametrize("sys_, k", [(adjacent_minors(4), 5), (cyclic(4), 1)])
def test_embedding_is_square(sys_, k):
    emb = embed(sys_, k, 3)
    assert emb.combined.n_vars == emb.combined.n_polys == sys_.n_vars + k


def test_overdetermined_system_is_mixed():
    sys_ = parse_system("2\nx1*x2 - 1;\nx1*x2 - 1;\nx1*x2 - 1;\n")
    emb = embed(sys_, 1, 4)
    assert emb.mixing is not None and emb.mixing.shape == (2, 3)
    x = np.array([2, 0.5, 0])
    assert np.abs(emb.nonlinear.eval(x)).max() < 1e-12


def test_embed_rejects_bad_dimension():
    with pytest.raises(ValueError):
        embed(cyclic(4), 0, 0)
    with pytest.raises(ValueError):
        embed(cyclic(4), 4, 0)


def test_embedding_is_seed_deterministic():
    a, b = embed(cyclic(4), 1, 9), embed(cyclic(4), 1, 9)
    assert a.slice == b.slice and np.array_equal(a.slack_coeffs, b.slack_coeffs)
