import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from cpgrules.classifier import (GruModel, NaiveBayesModel, TrainConfig, compute_metrics, gradient_check,
                                 gradient_check_report, softmax, split_corpus, train_gru)
from cpgrules.classifier.gru import PARAM_NAMES, EmptySentence
from cpgrules.classifier.metrics import EmptyTestSet, aggregate
from cpgrules.embeddings import EmbeddingTable
from cpgrules.errors import ConfigError, DataError, InsufficientData
from cpgrules.textprep import LABELS, prepare_sentence


# ---------------------------------------------------------------- GRU math

@pytest.mark.parametrize("seed", range(3))
def test_gradient_check_small(seed):
    rng = np.random.default_rng(100 + seed)
    model = GruModel.init(4, 3, seed=seed)
    X = rng.normal(size=(4, 4))
    assert gradient_check(model, (X, seed % 4)) < 1e-6


def test_gradient_check_epsilon_bounds():
    model = GruModel.init(2, 2)
    with pytest.raises(ValueError):
        gradient_check(model, (np.ones((2, 2)), 0), epsilon=1e-2)
    with pytest.raises(ValueError):
        gradient_check(model, (np.ones((2, 2)), 0), epsilon=1e-8)


def test_report_covers_every_tensor():
    model = GruModel.init(3, 2, seed=5)
    rep = gradient_check_report(model, (np.ones((3, 3)), "A"))
    assert set(rep) == set(PARAM_NAMES)


def test_padded_batch_gradients_match_finite_differences():
    rng = np.random.default_rng(0)
    model = GruModel.init(3, 4, seed=1)
    X = rng.normal(size=(3, 5, 3))
    mask = np.array([[1, 1, 1, 1, 1], [1, 1, 1, 0, 0], [1, 0, 0, 0, 0]], dtype=float)
    X[mask == 0] = 0.0
    y = np.array([0, 2, 3])
    _, grads = model.loss_and_grads(X, mask, y)
    eps = 1e-5
    for name in PARAM_NAMES:
        flat = model.params[name].reshape(-1)
        num = np.zeros_like(flat)
        for i in range(flat.size):
            o = flat[i]
            flat[i] = o + eps
            lp, _ = model.loss_and_grads(X, mask, y)
            flat[i] = o - eps
            lm, _ = model.loss_and_grads(X, mask, y)
            flat[i] = o
            num[i] = (lp - lm) / (2 * eps)
        a = grads[name].reshape(-1)
        assert np.linalg.norm(a - num) <= 1e-6 * (np.linalg.norm(a) + np.linalg.norm(num) + 1e-12)


def test_padding_does_not_change_per_sequence_loss():
    rng = np.random.default_rng(3)
    model = GruModel.init(3, 4, seed=2)
    a, b = rng.normal(size=(5, 3)), rng.normal(size=(2, 3))
    X = np.zeros((2, 5, 3))
    X[0], X[1, :2] = a, b
    mask = np.array([[1] * 5, [1, 1, 0, 0, 0]], dtype=float)
    batch, _ = model.loss_and_grads(X, mask, np.array([1, 2]))
    la, _ = model.loss_and_grads(a[None], np.ones((1, 5)), np.array([1]))
    lb, _ = model.loss_and_grads(b[None], np.ones((1, 2)), np.array([2]))
    assert batch == pytest.approx((la + lb) / 2, abs=1e-12)
    np.testing.assert_allclose(model.proba(b), softmax(model._forward(X, mask)[1])[1], atol=1e-12)


def test_init_bounds_and_zero_biases():
    model = GruModel.init(9, 16, seed=0)
    assert np.abs(model.params["Wz"]).max() <= math.sqrt(1 / 9)
    assert np.abs(model.params["Uz"]).max() <= math.sqrt(1 / 16)
    for b in ("bz", "br", "bh", "bo"):
        assert not model.params[b].any()


@settings(max_examples=100, deadline=None)
@given(arrays(np.float64, (3, 4), elements=st.floats(-500, 500, allow_nan=False)))
def test_softmax_rows_sum_to_one(logits):
    p = softmax(logits)
    assert np.all(p >= 0)
    np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-12)


def test_hidden_states_shape_and_empty_sentence():
    model = GruModel.init(3, 5, seed=0)
    assert model.hidden_states(np.ones((4, 3))).shape == (4, 5)
    with pytest.raises(EmptySentence):
        model.proba(np.zeros((0, 3)))


def test_persistence_round_trip(tmp_path):
    model = GruModel.init(6, 4, seed=3)
    model.save(tmp_path / "m.json")
    back = GruModel.load(tmp_path / "m.json")
    for name in PARAM_NAMES:
        np.testing.assert_array_equal(back.params[name], model.params[name])
    X = np.random.default_rng(0).normal(size=(5, 6))
    np.testing.assert_array_equal(back.proba(X), model.proba(X))
    back.save(tmp_path / "again.json")
    assert (tmp_path / "m.json").read_bytes() == (tmp_path / "again.json").read_bytes()


def test_load_rejects_bad_files(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(DataError):
        GruModel.load(p)
    p.write_text('{"format": "something-else"}')
    with pytest.raises(DataError):
        GruModel.load(p)


# ---------------------------------------------------------------- training

def tiny_corpus():
    rows = [("C-A", "treatment with aspirin is recommended for adults"),
            ("C-C", "smoking leads to stroke"), ("A", "initiate the dose"), ("NA", "the panel met twice")]
    out = []
    for i in range(12):
        for label, text in rows:
            out.append(prepare_sentence(f"{text} {i}", doc_id="t", sent_index=len(out), label=label))
    return out


def tiny_table():
    words = sorted({t.normalized for s in tiny_corpus() for t in s.tokens})
    rng = np.random.default_rng(0)
    return EmbeddingTable(words, rng.normal(size=(len(words), 6)))


def test_split_is_stratified_and_seeded():
    corpus = tiny_corpus()
    train, test = split_corpus(corpus, 0.75, seed=1)
    assert len(train) + len(test) == len(corpus)
    assert Counter(s.label for s in train) == {lab: 9 for lab in LABELS}
    again, _ = split_corpus(corpus, 0.75, seed=1)
    assert [s.raw for s in again] == [s.raw for s in train]
    other, _ = split_corpus(corpus, 0.75, seed=2)
    assert [s.raw for s in other] != [s.raw for s in train]


def test_training_is_deterministic():
    cfg = TrainConfig(epochs=2, hidden_dim=4, seed=7)
    m1, r1 = train_gru(tiny_corpus(), cfg, tiny_table())
    m2, r2 = train_gru(tiny_corpus(), cfg, tiny_table())
    assert m1.to_dict() == m2.to_dict()
    assert r1.to_dict() == r2.to_dict()


def test_training_learns_tiny_corpus():
    cfg = TrainConfig(epochs=30, hidden_dim=8, learning_rate=0.01, seed=0)
    model, metrics = train_gru(tiny_corpus(), cfg, tiny_table())
    assert metrics.accuracy == 1.0
    assert model.history[-1] < model.history[0]


@pytest.mark.parametrize("kwargs", [{"epochs": 0}, {"train_fraction": 1.0}, {"learning_rate": 0},
                                    {"hidden_dim": 0}, {"feature_mode": "bag"}])
def test_train_config_validation(kwargs):
    with pytest.raises(ConfigError):
        TrainConfig(**kwargs)


# ---------------------------------------------------------------- naive Bayes

def test_naive_bayes_hand_computed():
    train = [prepare_sentence("a b", label="C-A"), prepare_sentence("a a", label="C-A"),
             prepare_sentence("c", label="NA")]
    nb = NaiveBayesModel.fit(train)
    # vocabulary {a, b, c}; C-A counts a=3 b=1 (total 4); NA counts c=1 (total 1)
    lj = nb.log_joint(["a", "c", "z"])
    want_ca = math.log(2 / 3) + math.log(4 / 7) + math.log(1 / 7) + math.log(1 / 7)
    want_na = math.log(1 / 3) + math.log(1 / 4) + math.log(2 / 4) + math.log(1 / 4)
    assert lj[LABELS.index("C-A")] == pytest.approx(want_ca, abs=1e-12)
    assert lj[LABELS.index("NA")] == pytest.approx(want_na, abs=1e-12)
    assert lj[LABELS.index("C-C")] == -math.inf
    probs = nb.proba(["a", "c", "z"])
    assert probs.sum() == pytest.approx(1.0)
    assert nb.predict(prepare_sentence("a b a"))[0] == "C-A"


def test_naive_bayes_needs_two_classes():
    with pytest.raises(InsufficientData):
        NaiveBayesModel.fit([prepare_sentence("a", label="NA")])


# ---------------------------------------------------------------- metrics

labels_st = st.lists(st.sampled_from(LABELS), min_size=1, max_size=40)


@settings(max_examples=200, deadline=None)
@given(labels_st, st.data())
def test_confusion_matrix_oracle(gold, data):
    pred = data.draw(st.lists(st.sampled_from(LABELS), min_size=len(gold), max_size=len(gold)))
    m = compute_metrics(gold, pred)
    for i, g in enumerate(LABELS):
        assert sum(m.confusion[i]) == gold.count(g)
        for j, p in enumerate(LABELS):
            assert m.confusion[i][j] == sum(1 for a, b in zip(gold, pred) if a == g and b == p)
    assert m.accuracy == pytest.approx(sum(a == b for a, b in zip(gold, pred)) / len(gold), abs=1e-12)


def test_metrics_errors_and_aggregate():
    with pytest.raises(EmptyTestSet):
        compute_metrics([], [])
    runs = [compute_metrics(["NA", "A"], ["NA", "A"]), compute_metrics(["NA", "A"], ["NA", "NA"])]
    agg = aggregate(runs)
    assert agg["accuracy_mean"] == pytest.approx(0.75)
    assert agg["accuracy_std"] == pytest.approx(0.25)
