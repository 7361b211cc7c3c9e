import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import chisquare

from lploc.errors import DepthExhausted
from lploc.hull import (
    HullPoint,
    SamplingFunction,
    apply_sampling,
    embed,
    evaluate,
    hull_add,
    hull_distance,
    hull_identity,
    hull_neg,
    hull_translate,
    orbit_witness,
    random_hull_point,
    sample_at_level,
    sample_potential,
)
from lploc.potential import eval_certified, eval_truncated, tail_bound, tower_hierarchy

G1 = tower_hierarchy(1, 2, 5)
G2 = tower_hierarchy(2, 2, 5)


def point(*res, hier=G1):
    return HullPoint(hier, tuple((r,) for r in res))


hull_points = st.builds(
    lambda seed, hier, depth: random_hull_point(seed, hier, depth),
    st.integers(0, 2**32),
    st.sampled_from([G1, G2]),
    st.integers(0, 5),
)


def triples():
    return st.tuples(st.sampled_from([G1, G2]), st.integers(0, 5), st.lists(st.integers(0, 2**32), min_size=3, max_size=3)).map(
        lambda a: tuple(random_hull_point(s, a[0], a[1]) for s in a[2])
    )


def test_identity():
    assert hull_identity(G1, 3).residues == ((0,), (0,), (0,))


def test_spec_arithmetic():
    assert hull_add(point(1, 3, 11), point(1, 1, 5)) == point(0, 0, 0)
    assert hull_neg(point(1, 3, 3)) == point(1, 1, 13)
    assert hull_translate(hull_identity(G1, 3), (1,)) == point(1, 1, 1)
    assert embed(G1, (16,), 3) == hull_identity(G1, 3)


def test_incompatible_rejected():
    with pytest.raises(ValueError):
        point(1, 2)
    with pytest.raises(ValueError):
        point(2)
    with pytest.raises(DepthExhausted):
        hull_identity(G1, 6)


@settings(max_examples=300)
@given(triples())
def test_group_axioms(abc):
    a, b, c = abc
    e = hull_identity(a.hierarchy, a.depth)
    assert hull_add(hull_add(a, b), c) == hull_add(a, hull_add(b, c))
    assert hull_add(a, b) == hull_add(b, a)
    assert hull_add(e, a) == a
    assert hull_add(a, hull_neg(a)) == e


@given(hull_points, st.lists(st.integers(-10**9, 10**9), min_size=2, max_size=2))
def test_translation_inverse_and_witness(omega, n):
    n = tuple(n[: omega.hierarchy.d])
    back = hull_translate(hull_translate(omega, n), tuple(-x for x in n))
    assert back == omega
    t = orbit_witness(omega)
    assert embed(omega.hierarchy, t, omega.depth) == omega


def test_witness_examples():
    assert orbit_witness(point(1, 3, 11)) == (11,)
    assert orbit_witness(hull_identity(G1, 4)) == (0,)


@given(hull_points, st.integers(0, 5), st.lists(st.integers(-10**6, 10**6), min_size=4, max_size=4))
def test_action_compatibility(omega, k, nm):
    d = omega.hierarchy.d
    k = min(k, omega.depth)
    n, m = tuple(nm[:d]), tuple(nm[2 : 2 + d])
    lhs = evaluate(hull_translate(omega, n), m, k)
    assert lhs == evaluate(omega, tuple(a + b for a, b in zip(n, m)), k)


def test_sample_potential_examples():
    target = Fraction(1, 100)
    omega = embed(G1, (3,), 5)
    assert sample_potential(omega, (2,), target) == eval_certified(G1, (5,), target)
    assert sample_potential(hull_identity(G1, 5), (0,), target).center == 0
    assert evaluate(point(1, 3, 3), (0,), 2) == Fraction(11, 16)
    deep = tower_hierarchy(1, 2, 7)
    # the level-k sum over residues equals the defining sum with the full tower
    omega = random_hull_point(5, G1, 5)
    for n in range(-5, 5):
        direct = sum(
            Fraction((n + omega.residues[v - 1][0]) % G1.n(v)[0], G1.denominator(v)) for v in range(1, 6)
        )
        assert evaluate(omega, (n,), 5) == direct
        assert eval_truncated(deep, (n + omega.top[0],), 7) in sample_at_level(omega, (n,), 4)


def test_sample_potential_depth_exhausted():
    with pytest.raises(DepthExhausted):
        sample_potential(hull_identity(G1, 2), (0,), Fraction(1, 1000))


def test_hull_distance():
    a = random_hull_point(1, G1, 5)
    assert hull_distance(a, a, 4).center == 0
    b = random_hull_point(2, G1, 5)
    assert hull_distance(a, b, 4).center == hull_distance(b, a, 4).center
    e = hull_identity(G1, 3)
    t1 = hull_translate(e, (1,))
    assert hull_distance(e, t1, 3).center >= Fraction(1, 2) - tail_bound(G1, 3)


def test_hull_distance_brute():
    for seed in range(4):
        a, b = random_hull_point(seed, G2, 3), random_hull_point(seed + 10, G2, 3)
        brute = max(abs(evaluate(a, (x, y), 3) - evaluate(b, (x, y), 3)) for x in range(16) for y in range(16))
        assert hull_distance(a, b, 3).center == brute


def test_sampling_functions():
    target = Fraction(1, 100)
    f0 = SamplingFunction("evaluation_at_zero", target_radius=target)
    for n in range(-3, 4):
        assert apply_sampling(f0, embed(G1, (n,), 5)) == eval_certified(G1, (n,), target)
    per = SamplingFunction("periodic_level", level=2)
    for seed in range(10):
        w = random_hull_point(seed, G1, 5)
        assert apply_sampling(per, hull_translate(w, (4,))) == apply_sampling(per, w)
    dist = SamplingFunction("distance_to_identity", level=3)
    assert apply_sampling(dist, hull_identity(G1, 5)).center == 0
    with pytest.raises(ValueError):
        SamplingFunction("periodic_level")


def test_random_point_determinism_and_serialisation():
    a = random_hull_point(42, G2, 5)
    assert a == random_hull_point(42, G2, 5)
    assert HullPoint.from_dict(G2, a.to_dict()) == a
    assert str(point(1, 3, 11)) == "1 | 3 | 11"


def test_depth_one_marginal_uniform():
    hier = tower_hierarchy(1, 3, 4)
    rng = random.Random(0)
    counts = [0] * 9
    for _ in range(10_000):
        counts[random_hull_point(rng.getrandbits(64), hier, 2).residues[1][0]] += 1
    assert chisquare(counts).pvalue > 0.01
    tops = [0] * 3
    for s in range(10_000):
        tops[random_hull_point(s, hier, 1).top[0]] += 1
    assert chisquare(tops).pvalue > 0.01
