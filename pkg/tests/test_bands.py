import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lploc.bands import (
    BandMatrix,
    FiniteOperator,
    assemble,
    banach_norm,
    diagonal_product,
    read_coo,
    scaling_equivalence_check,
    shift_sequence,
)
from lploc.errors import PreconditionError
from lploc.hull import hull_identity
from lploc.lattice import Box
from lploc.potential import tower_hierarchy


def random_band(rng, box, reach=2, density=0.6):
    diags = {}
    for k in np.ndindex(*([2 * reach + 1] * box.dim)):
        if rng.random() < density:
            off = tuple(int(x) - reach for x in k)
            diags[off] = rng.standard_normal(box.shape)
    return BandMatrix(box, diags)


def random_box(rng):
    d = int(rng.integers(1, 3))
    lo = tuple(int(x) for x in rng.integers(-5, 5, size=d))
    return Box(lo, tuple(a + int(rng.integers(0, 12)) for a in lo))


@settings(max_examples=60)
@given(st.integers(0, 2**31))
def test_product_matches_dense(seed):
    rng = np.random.default_rng(seed)
    box = random_box(rng)
    A, B = random_band(rng, box), random_band(rng, box)
    Z = diagonal_product(A, B)
    assert np.max(np.abs(Z.to_dense() - A.to_dense() @ B.to_dense()), initial=0) <= 1e-13


@settings(max_examples=30)
@given(st.integers(0, 2**31))
def test_product_associative(seed):
    rng = np.random.default_rng(seed)
    box = random_box(rng)
    A, B, C = (random_band(rng, box) for _ in range(3))
    left = diagonal_product(diagonal_product(A, B), C).to_dense()
    right = diagonal_product(A, diagonal_product(B, C)).to_dense()
    oracle = A.to_dense() @ B.to_dense() @ C.to_dense()
    assert np.max(np.abs(left - oracle), initial=0) <= 1e-13
    assert np.max(np.abs(right - oracle), initial=0) <= 1e-13


def test_identity_product():
    rng = np.random.default_rng(0)
    box = Box.cube(2, 5)
    B = random_band(rng, box)
    assert np.array_equal(diagonal_product(BandMatrix.identity(box), B).to_dense(), B.to_dense())


def test_unit_shift_times_diagonal():
    box = Box((0,), (2,))
    w = np.array([2.0, 3.0, 5.0])
    S = BandMatrix(box, {(1,): np.ones(3)})
    D = BandMatrix(box, {(0,): w})
    Z = diagonal_product(S, D)
    assert Z.offsets == [(1,)]
    assert np.array_equal(Z.diagonals[(1,)], [3.0, 5.0, 0.0])
    assert np.array_equal(shift_sequence(w, (1,)), [3.0, 5.0, 0.0])
    assert np.array_equal(shift_sequence(w, (-1,)), [0.0, 2.0, 3.0])


def test_dense_round_trip():
    rng = np.random.default_rng(2)
    box = Box((1, -1), (4, 2))
    A = random_band(rng, box)
    assert np.array_equal(BandMatrix.from_dense(box, A.to_dense()).to_dense(), A.to_dense())


def test_banach_norm():
    box = Box.cube(1, 6)
    assert banach_norm(BandMatrix.identity(box), 3.0) == 1.0
    A = BandMatrix(box, {(2,): np.full(6, -2.0)})
    assert banach_norm(A, 1.0) == pytest.approx(2 * np.exp(2))
    rng = np.random.default_rng(1)
    B = random_band(rng, box)
    norms = [banach_norm(B, s) for s in np.linspace(0, 3, 10)]
    assert all(b >= a for a, b in zip(norms, norms[1:]))


def test_assemble_examples():
    v = 0.7
    H = assemble(np.array([0.0, v]), Box((0,), (1,)), 0.1)
    assert np.array_equal(H.dense(), [[0.0, 0.1], [0.1, v]])
    vals = np.arange(9.0)
    H0 = assemble(vals, Box.cube(2, 3), 0.0)
    assert np.array_equal(H0.dense(), np.diag(vals))
    T = assemble(np.zeros(4), Box.cube(2, 2), 1.0, "periodic").dense()
    # each site of the 2x2 torus has one neighbour per axis, reached twice
    assert np.array_equal(T, [[0, 2, 2, 0], [2, 0, 0, 2], [2, 0, 0, 2], [0, 2, 2, 0]])


def test_assemble_hull_point_and_gershgorin():
    hier = tower_hierarchy(2, 2, 5)
    for boundary in ("dirichlet", "periodic"):
        H = assemble(hull_identity(hier, 4), Box.cube(2, 16), 0.05, boundary, level=4)
        M = H.dense()
        assert np.array_equal(M, M.T)
        assert H.bands().is_hermitian()
        off = M - np.diag(np.diag(M))
        assert np.max(np.abs(off).sum(axis=1)) <= 2 * 2 * 0.05 + 1e-15
    H = assemble(hier, Box.cube(2, 4), 0.0, target_radius=0.01)
    assert H.potential[1] == pytest.approx(65 / 256)
    with pytest.raises(PreconditionError):
        assemble(hull_identity(hier, 4), Box.cube(2, 4), 0.1)


def test_periodic_ring():
    M = assemble(np.zeros(5), Box.cube(1, 5), 1.0, "periodic").dense()
    assert M[0, 4] == M[4, 0] == 1 and M.sum() == 10


def test_scaling_equivalence():
    rng = np.random.default_rng(0)
    rep = scaling_equivalence_check(rng.random(16), Box.cube(1, 16), 0.03)
    assert rep.passed
    assert scaling_equivalence_check(rng.random(16), Box.cube(1, 16), 1.0).identical_matrices
    two = FiniteOperator(Box.cube(1, 2), "dirichlet", 0.5, np.array([0.0, 0.3]))
    assert scaling_equivalence_check(two.potential, two.box, 0.5).max_deviation <= 1e-15
    with pytest.raises(PreconditionError):
        scaling_equivalence_check(np.zeros(2), Box.cube(1, 2), 0.0)


def test_coo_round_trip(tmp_path):
    rng = np.random.default_rng(5)
    H = assemble(rng.random(20), Box.cube(1, 20), 1 / 3).dense()
    from lploc.bands import write_coo

    write_coo(tmp_path / "h.coo", H)
    assert np.array_equal(read_coo(tmp_path / "h.coo", 20), H)
    first = (tmp_path / "h.coo").read_text().splitlines()[0].split()
    assert first[0] == "0" and first[1] == "0"
