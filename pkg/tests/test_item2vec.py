import math

import numpy as np
import pytest

import oracles
from conftest import make_events
from gradcheck import sgns_instance
from simrec import item2vec
from simrec.data import ItemIndex, build_corpus
from simrec.errors import AbsentItemError, FormatVersionError
from simrec.image import FeatureVectorStore
from simrec.item2vec import (
    EmbeddingModel,
    Item2VecConfig,
    generate_pairs,
    init_model,
    load_item2vec,
    rank_by_item2vec,
    sgns_loss,
    train,
    train_step,
    write_embedding,
)


def random_model(rng, n=10, d=5):
    index = ItemIndex([f"i{k}" for k in range(n)])
    return EmbeddingModel(index, rng.normal(size=(n, d)), rng.normal(size=(n, d)), rng.normal(size=n))


def test_pairs_window_one():
    assert generate_pairs(["A", "B", "C"], 1) == [("A", "B"), ("B", "A"), ("B", "C"), ("C", "B")]


def test_pairs_window_two():
    pairs = generate_pairs(["A", "B", "C"], 2)
    assert len(pairs) == 6 and ("A", "C") in pairs and ("C", "A") in pairs


def test_pairs_single_item():
    assert generate_pairs(["A"], 2) == []


def test_pairs_skip_identical_items():
    assert generate_pairs(["A", "B", "A"], 2) == [("A", "B"), ("B", "A"), ("B", "A"), ("A", "B")]


def test_loss_at_zero_params():
    index = ItemIndex([f"i{k}" for k in range(12)])
    model = EmbeddingModel(index, np.zeros((12, 4)), np.zeros((12, 4)), np.zeros(12))
    assert sgns_loss(model, 0, 1, list(range(2, 10))) == pytest.approx(9 * math.log(2), abs=1e-12)


def test_loss_matches_oracle(rng):
    for _ in range(20):
        m = random_model(rng)
        negs = [int(x) for x in rng.integers(2, 10, size=4)]
        expect = oracles.sgns_loss(m.input[0], m.weights[1], m.bias[1],
                                   [m.weights[k] for k in negs], [m.bias[k] for k in negs])
        assert abs(sgns_loss(m, 0, 1, negs) - expect) <= 1e-10


def test_zero_lr_leaves_params(rng):
    m = random_model(rng)
    before = m.copy()
    train_step(m, 0, 1, [2, 3], 0.0)
    assert m.same_params(before)


def test_step_decreases_loss(rng):
    m = random_model(rng)
    before = sgns_loss(m, 0, 1, [2, 3, 4])
    assert train_step(m, 0, 1, [2, 3, 4], 0.01) == pytest.approx(before, abs=1e-12)
    assert sgns_loss(m, 0, 1, [2, 3, 4]) < before


def test_finite_difference_gradients():
    rng = np.random.default_rng(7)
    assert max(sgns_instance(rng) for _ in range(30)) < 1e-4


def two_cluster_corpus(rng, users=200):
    rows, t = [], 0
    for u in range(users):
        cluster = u % 2
        for _ in range(10):
            t += 1
            rows.append((f"u{u}", f"c{cluster}_{int(rng.integers(5))}", t))
    return build_corpus(make_events(rows))


def test_two_clusters_separate(rng):
    model = train(two_cluster_corpus(rng), Item2VecConfig(dim=16, epochs=10))
    assert item2vec.score(model, "c0_0", "c0_1") > item2vec.score(model, "c0_0", "c1_0")
    assert item2vec.score(model, "c1_2", "c1_3") > item2vec.score(model, "c1_2", "c0_4")


def test_zero_epochs_is_init(rng):
    c = two_cluster_corpus(rng, 20)
    model = train(c, Item2VecConfig(dim=8, epochs=0, seed=3))
    assert model.same_params(init_model(c.item_index, 8, np.random.default_rng(3)))


def test_same_seed_identical(rng):
    c = two_cluster_corpus(rng, 40)
    cfg = Item2VecConfig(dim=8, epochs=2, seed=11)
    assert train(c, cfg).same_params(train(c, cfg))


def test_multiworker_trains(rng):
    c = two_cluster_corpus(rng, 100)
    model = train(c, Item2VecConfig(dim=8, epochs=3, workers=2))
    assert np.all(np.isfinite(model.input))
    assert model.loss_history[-1] < model.loss_history[0]


def test_loss_decreases_first_epochs(rng):
    model = train(two_cluster_corpus(rng), Item2VecConfig(dim=16, epochs=3, learning_rate=0.025))
    h = model.loss_history
    assert h[0] > h[1] > h[2]


def test_score_equals_cosine_of_input_rows(rng):
    m = random_model(rng)
    store = FeatureVectorStore(m.index.ids, m.input)
    for a, b in [("i0", "i1"), ("i3", "i7"), ("i2", "i2")]:
        assert abs(item2vec.score(m, a, b) - store.cosine_similarity(a, b)) <= 1e-12


def test_weights_table_unused_at_scoring(rng):
    m = random_model(rng)
    pool = [f"i{k}" for k in range(1, 10)]
    before = rank_by_item2vec(m, "i0", pool, 5)
    m.weights[:] = rng.normal(size=m.weights.shape)
    m.bias[:] = rng.normal(size=m.bias.shape)
    assert rank_by_item2vec(m, "i0", pool, 5) == before


def test_rank_unknown(rng):
    m = random_model(rng)
    ranked = rank_by_item2vec(m, "i0", ["zz", "i1", "i2"], 3)
    assert ranked[-1][0] == "zz"
    with pytest.raises(AbsentItemError):
        rank_by_item2vec(m, "nope", ["i1"], 1)


def test_config_validation():
    with pytest.raises(ValueError):
        Item2VecConfig(learning_rate=0)
    with pytest.raises(ValueError):
        Item2VecConfig(window=0)


def test_file_round_trip(tmp_path, rng):
    m = random_model(rng)
    p = tmp_path / "m.emb"
    write_embedding(p, m)
    back = load_item2vec(p)
    assert back.index == m.index
    assert np.allclose(back.input, m.input, rtol=1e-8) and np.allclose(back.bias, m.bias, rtol=1e-8)


def test_bad_header(tmp_path):
    p = tmp_path / "m.emb"
    p.write_text("simrec-emb v9 1 2 1\n")
    with pytest.raises(FormatVersionError):
        load_item2vec(p)
    p.write_text("garbage\n")
    with pytest.raises(FormatVersionError) as info:
        load_item2vec(p)
    assert str(p) in str(info.value)
