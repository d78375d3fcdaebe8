import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from simrec.errors import AbsentItemError, DimensionMismatchError, ParseError, ZeroNormError
from simrec.image import FeatureVectorStore, load_vectors, parse_vectors, rank_by_image, write_vectors


def test_load_two_lines():
    store = parse_vectors(["a\t1,2,3,4\n", "b\t0,1,0,0\n"])
    assert store.dim == 4 and len(store) == 2


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatchError) as info:
        parse_vectors(["a\t1,2,3,4", "b\t1,2,3"])
    assert info.value.lineno == 2


def test_zero_norm():
    with pytest.raises(ZeroNormError):
        parse_vectors(["a\t0,0,0"])


def test_parse_failure():
    with pytest.raises(ParseError) as info:
        parse_vectors(["a\t1,x"])
    assert type(info.value) is ParseError


def test_cosine_examples():
    store = FeatureVectorStore(["a", "b", "c"], [[1, 0], [0, 1], [1, 1]])
    assert store.cosine_similarity("a", "a") == pytest.approx(1.0)
    assert store.cosine_similarity("a", "b") == 0.0
    assert store.cosine_similarity("c", "a") == pytest.approx(1 / math.sqrt(2), abs=1e-12)
    with pytest.raises(AbsentItemError):
        store.cosine_similarity("a", "zzz")


def _store_with_cosines(cos):
    vecs = [[1.0, 0.0]] + [[c, math.sqrt(1 - c * c)] for c in cos]
    return FeatureVectorStore(["q"] + [f"p{k}" for k in range(len(cos))], vecs)


def test_rank_order():
    store = _store_with_cosines([0.9, 0.1, 0.5])
    ranked = rank_by_image(store, "q", ["p0", "p1", "p2"], 3)
    assert [x for x, _ in ranked] == ["p0", "p2", "p1"]


def test_k_larger_than_pool():
    store = _store_with_cosines([0.9, 0.1])
    assert len(rank_by_image(store, "q", ["p0", "p1"], 50)) == 2


def test_missing_vector_ranks_last():
    store = _store_with_cosines([0.9, 0.1])
    ranked = rank_by_image(store, "q", ["ghost", "p1", "ghost2", "p0"], 4)
    assert [x for x, _ in ranked] == ["p0", "p1", "ghost", "ghost2"]


def test_missing_query():
    with pytest.raises(AbsentItemError):
        rank_by_image(_store_with_cosines([0.9]), "nope", ["p0"], 1)


def test_ties_by_dense_order():
    store = FeatureVectorStore(["q", "x", "y"], [[1, 0], [1, 1], [1, 1]])
    assert [i for i, _ in store.rank("q", ["y", "x"], 2)] == ["x", "y"]
    assert [i for i, _ in store.rank("q", ["y", "x"], 2, order={"y": 0, "x": 1})] == ["y", "x"]


vecs = arrays(np.float64, (6, 5), elements=st.floats(-10, 10)).filter(
    lambda a: np.all(np.linalg.norm(a, axis=1) > 1e-3))


@given(vecs, st.floats(0.01, 1000))
def test_cosine_properties_and_scale_invariance(v, scale):
    ids = [f"i{k}" for k in range(6)]
    store = FeatureVectorStore(ids, v)
    scaled = FeatureVectorStore(ids, v * scale)
    for a in ids:
        assert store.cosine_similarity(a, a) == pytest.approx(1.0, abs=1e-6)
        for b in ids:
            assert abs(store.cosine_similarity(a, b) - store.cosine_similarity(b, a)) < 1e-6
            assert -1 - 1e-12 <= store.cosine_similarity(a, b) <= 1 + 1e-12
    # exact ties may reorder under float rounding, so compare scores position by position
    r1 = store.rank("i0", ids[1:], 5)
    r2 = scaled.rank("i0", ids[1:], 5)
    assert np.allclose([s for _, s in r1], [s for _, s in r2], atol=1e-12)
    s1 = dict(r1)
    assert all(abs(s1[x] - s) <= 1e-12 for x, s in r2)


def test_file_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    v = rng.normal(size=(4, 3))
    p = tmp_path / "v.tsv"
    write_vectors(p, ["a", "b", "c", "d"], v)
    store = load_vectors(p)
    assert store.ids == ["a", "b", "c", "d"]
    assert np.allclose(store.vectors, v, rtol=1e-8)
