import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from repground.corrstats import cosine_distance, pearson, rank, spearman
from repground.errors import DegenerateInputError, ValidationError

from oracles import average_ranks, textbook_pearson, textbook_spearman

finite = st.floats(-1e3, 1e3, allow_nan=False)
vectors = st.integers(2, 6).flatmap(lambda d: st.tuples(st.lists(finite, min_size=d, max_size=d),
                                                        st.lists(finite, min_size=d, max_size=d)))


@pytest.mark.parametrize("t, v, expected", [
    ([1, 0], [1, 0], 0.0),
    ([1, 0], [0, 1], 1.0),
    ([1, 0], [-1, 0], 2.0),
])
def test_cosine_distance_examples(t, v, expected):
    assert cosine_distance(t, v) == expected


def test_cosine_distance_zero_norm():
    with pytest.raises(DegenerateInputError):
        cosine_distance([0, 0], [1, 0])


def test_cosine_distance_dimension_mismatch():
    with pytest.raises(ValidationError):
        cosine_distance([1, 0], [1, 0, 0])


@given(vectors, st.floats(1e-3, 1e3), st.floats(1e-3, 1e3))
@settings(max_examples=200)
def test_cosine_symmetric_and_scale_invariant(pair, a, b):
    t, v = np.array(pair[0]), np.array(pair[1])
    assume(np.linalg.norm(t) > 1e-3 and np.linalg.norm(v) > 1e-3)
    d = cosine_distance(t, v)
    assert 0.0 <= d <= 2.0
    assert d == cosine_distance(v, t)
    assert cosine_distance(a * t, b * v) == pytest.approx(d, abs=1e-12)


@pytest.mark.parametrize("x, expected", [
    ([10, 20, 30], [1, 2, 3]),
    ([5, 5], [1.5, 1.5]),
    ([3, 1, 3, 2], [3.5, 1, 3.5, 2]),
])
def test_rank_examples(x, expected):
    assert rank(x).tolist() == expected
    assert average_ranks(x) == expected


def test_rank_nonfinite():
    with pytest.raises(ValidationError):
        rank([1.0, float("nan")])


@given(st.lists(st.integers(-5, 5), min_size=1, max_size=30))
def test_rank_matches_brute_force(x):
    r = rank(x)
    assert r.tolist() == average_ranks(x)
    n = len(x)
    assert r.sum() == n * (n + 1) / 2
    assert r.min() >= 1 and r.max() <= n


def test_spearman_examples():
    assert spearman([1, 2, 3], [10, 20, 30]) == 1.0
    assert spearman([1, 2, 3], [3, 2, 1]) == -1.0
    x, y = [1, 2, 2, 4], [1, 3, 2, 4]
    assert spearman(x, y) == pytest.approx(textbook_spearman(x, y), abs=1e-12)


def test_spearman_errors():
    with pytest.raises(DegenerateInputError):
        spearman([1, 1, 1], [1, 2, 3])
    with pytest.raises(ValidationError):
        spearman([1, 2, 3], [1, 2])


def test_pearson_examples():
    assert pearson([1, 2, 3], [2, 4, 6]) == 1.0
    with pytest.raises(DegenerateInputError):
        pearson([1, 2, 3], [1, 1, 1])


def test_pearson_seeded_pairs_match_textbook():
    rng = np.random.default_rng(50)
    x, y = rng.standard_normal((2, 50))
    y = 0.3 * x + y
    assert pearson(x, y) == pytest.approx(textbook_pearson(x, y), abs=1e-12)


@given(st.lists(st.tuples(finite, finite), min_size=3, max_size=25))
@settings(max_examples=150)
def test_symmetry(pairs):
    x, y = map(np.array, zip(*pairs))
    assume(np.ptp(x) > 1e-6 and np.ptp(y) > 1e-6)
    assert pearson(x, y) == pearson(y, x)
    assert spearman(x, y) == spearman(y, x)


@given(st.lists(st.tuples(st.integers(-20, 20), st.integers(-20, 20)), min_size=3, max_size=25),
       st.sampled_from([-3.0, -0.5, 2.0, 7.0]), st.floats(-10, 10),
       st.sampled_from([-2.0, 0.25, 4.0]), st.floats(-10, 10))
def test_pearson_affine(pairs, a, b, c, d):
    x, y = map(lambda v: np.array(v, dtype=float), zip(*pairs))
    assume(np.ptp(x) > 0 and np.ptp(y) > 0)
    assert pearson(a * x + b, c * y + d) == pytest.approx(np.sign(a * c) * pearson(x, y), abs=1e-9)


@given(st.lists(st.tuples(st.integers(-20, 20), finite), min_size=3, max_size=25))
def test_spearman_monotone_invariance(pairs):
    x, y = map(lambda v: np.array(v, dtype=float), zip(*pairs))
    assume(np.ptp(x) > 0 and np.ptp(y) > 0)
    assert spearman(x ** 3 + 2 * x, y) == spearman(x, y)
    assert spearman(np.exp(x / 10), y) == spearman(x, y)
