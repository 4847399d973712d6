import json
import math

import numpy as np
import pytest

from conftest import make_synthetic_corpus
from satdscan.classifier import (
    DEFAULT_RULES,
    BackendFailure,
    Classification,
    DegenerateData,
    GradientMismatch,
    MajorityBackend,
    MissingLabelInTrain,
    NgramModel,
    PatternRuleSet,
    TrainConfig,
    argmax_label,
    available_backends,
    classify,
    evaluate_gradient,
    get_backend,
    one_hot,
    train_ngram,
)
from satdscan.classifier.kernels import KERNELS_ENV, NUMPY_BACKEND, as_csr
from satdscan.classifier.ngram import build_vocabulary, featurize
from satdscan.corpus import LabeledExample, SplitSpec, split
from satdscan.labels import LABEL_ORDER, Label

UNIFORM = {label: 1.0 / 6.0 for label in LABEL_ORDER}


def _ex(text, label, project="p"):
    return LabeledExample(project=project, text=text, label=label)


# --- Classification contract ----------------------------------------------------

def test_uniform_scores_tie_break_to_first_label():
    assert argmax_label(UNIFORM) is Label.NON_SATD
    c = Classification(label=Label.NON_SATD, scores=UNIFORM)
    assert c.label is Label.NON_SATD
    with pytest.raises(ValueError):
        Classification(label=Label.SCIENTIFIC, scores=UNIFORM)


def test_two_way_tie_breaks_to_lower_order_index():
    scores = {Label.NON_SATD: 0.1, Label.CODE_DESIGN: 0.3, Label.DOCUMENTATION: 0.1,
              Label.TEST: 0.3, Label.REQUIREMENT: 0.1, Label.SCIENTIFIC: 0.1}
    assert argmax_label(scores) is Label.CODE_DESIGN
    Classification(label=Label.CODE_DESIGN, scores=scores)


def test_classification_validation():
    with pytest.raises(ValueError):
        Classification(label=Label.NON_SATD, scores={Label.NON_SATD: 1.0})
    bad_sum = dict(UNIFORM)
    bad_sum[Label.TEST] = 0.5
    with pytest.raises(ValueError):
        Classification(label=Label.TEST, scores=bad_sum)
    out_of_range = dict(one_hot(Label.TEST))
    out_of_range[Label.TEST] = 1.5
    out_of_range[Label.NON_SATD] = -0.5
    with pytest.raises(ValueError):
        Classification(label=Label.TEST, scores=out_of_range)


def test_wire_round_trip():
    c = Classification(label=Label.TEST, scores=one_hot(Label.TEST))
    wire = c.to_wire()
    assert wire["label"] == "test"
    assert set(wire["scores"]) == {"non-satd", "code-design", "documentation",
                                   "test", "requirement", "scientific"}
    assert Classification.from_wire(wire) == c


# --- classify() ------------------------------------------------------------------

PATTERNS = DEFAULT_RULES


def test_classify_empty_input():
    assert classify([], PATTERNS) == []


def test_classify_rejects_unnormalized_text():
    with pytest.raises(ValueError, match=r"texts\[1\]"):
        classify(["fine text", "Not Normalized"], PATTERNS)


def test_classify_order_preserved_under_permutation():
    texts = ["todo improve this", "plain statement", "an ugly hack", "not correct yet"]
    base = [c.label for c in classify(texts, PATTERNS)]
    assert base == [Label.REQUIREMENT, Label.NON_SATD, Label.CODE_DESIGN, Label.SCIENTIFIC]
    perm = [2, 0, 3, 1]
    permuted = [c.label for c in classify([texts[i] for i in perm], PATTERNS)]
    assert permuted == [base[i] for i in perm]


class _Boom:
    def classify_batch(self, texts):
        raise RuntimeError("kaput")


class _ShortChanger:
    def classify_batch(self, texts):
        return []


def test_classify_wraps_backend_exceptions():
    with pytest.raises(BackendFailure) as exc:
        classify(["some text", "more text"], _Boom())
    assert (exc.value.start, exc.value.stop) == (0, 2)
    assert "kaput" in str(exc.value)


def test_classify_rejects_wrong_result_count():
    with pytest.raises(BackendFailure):
        classify(["some text"], _ShortChanger())


def test_majority_backend_fit_and_tie_break():
    examples = [_ex("a b", Label.TEST)] * 3 + [_ex("c d", Label.SCIENTIFIC)] * 2
    assert MajorityBackend.fit(examples).label is Label.TEST
    tied = [_ex("a b", Label.TEST), _ex("c d", Label.SCIENTIFIC)]
    assert MajorityBackend.fit(tied).label is Label.TEST  # lower order index
    results = classify(["x", "y"], MajorityBackend(Label.SCIENTIFIC))
    assert [r.label for r in results] == [Label.SCIENTIFIC] * 2


# --- pattern rules -----------------------------------------------------------------

def test_patterns_first_match_wins():
    assert PATTERNS.match("todo workaround") is Label.REQUIREMENT
    assert PATTERNS.match("this does not work at all") is Label.CODE_DESIGN
    assert PATTERNS.match("results not correct") is Label.SCIENTIFIC
    assert PATTERNS.match("nothing special") is Label.NON_SATD


def test_patterns_match_substrings():
    assert PATTERNS.match("hackish solution") is Label.CODE_DESIGN


def test_patterns_validation():
    with pytest.raises(ValueError):
        PatternRuleSet(rules=(("TODO", Label.REQUIREMENT),))
    with pytest.raises(ValueError):
        PatternRuleSet(rules=(("", Label.REQUIREMENT),))
    with pytest.raises(ValueError):
        PatternRuleSet(rules=(("todo", "requirement"),))


def test_patterns_from_file(tmp_path):
    path = tmp_path / "rules.json"
    path.write_text(json.dumps({
        "rules": [{"pattern": "slow", "label": "scientific"}],
        "default": "documentation",
    }))
    rules = PatternRuleSet.from_file(path)
    assert rules.match("slow convergence") is Label.SCIENTIFIC
    assert rules.match("anything else") is Label.DOCUMENTATION
    [result] = rules.classify_batch(["slow here"])
    assert result.scores == one_hot(Label.SCIENTIFIC)


# --- vocabulary and features ---------------------------------------------------------

def test_build_vocabulary_frequency_threshold():
    assert build_vocabulary(["a b a", "a c"], min_frequency=2) == {"a": 0}
    vocab = build_vocabulary(["a b a", "a c"], min_frequency=1)
    assert vocab == {"a": 0, "a b": 1, "a c": 2, "b": 3, "b a": 4, "c": 5}


def test_featurize_counts_and_csr_shape():
    vocab = build_vocabulary(["a b a", "a c"], min_frequency=1)
    indptr, indices, data = featurize(["a b a", "zzz", ""], vocab)
    assert indptr.tolist() == [0, 4, 4, 4]
    assert indices.tolist() == [0, 1, 3, 4]   # a, "a b", b, "b a"
    assert data.tolist() == [2.0, 1.0, 1.0, 1.0]
    assert indptr.dtype == np.int64 and indices.dtype == np.int64
    assert data.dtype == np.float64


# --- kernels ---------------------------------------------------------------------------

def _random_batch(rng, n=40, n_features=30):
    rows = []
    for _ in range(n):
        nnz = rng.integers(0, 6)
        cols = sorted(rng.choice(n_features, size=nnz, replace=False).tolist())
        rows.append([(int(j), float(rng.integers(1, 4))) for j in cols])
    indptr, indices, data = as_csr(rows)
    weights = rng.normal(size=(len(LABEL_ORDER), n_features + 1))
    labels = rng.integers(0, len(LABEL_ORDER), size=n).astype(np.int64)
    return indptr, indices, data, weights, labels, n_features


def test_kernel_closed_form_at_zero_weights():
    backend = NUMPY_BACKEND
    indptr, indices, data = as_csr([[(0, 2.0), (3, 1.0)]])
    weights = np.zeros((6, 5))
    probs = backend.softmax(backend.logits(indptr, indices, data, weights))
    assert np.allclose(probs, 1.0 / 6.0)
    labels = np.array([2], dtype=np.int64)
    loss, grad = backend.xent_grad(indptr, indices, data, probs, labels, 4)
    assert math.isclose(loss, math.log(6.0), rel_tol=1e-12)
    expected_bias = np.full(6, 1.0 / 6.0)
    expected_bias[2] -= 1.0
    assert np.allclose(grad[:, 4], expected_bias)
    assert np.allclose(grad[:, 0], 2.0 * expected_bias)
    assert np.allclose(grad[:, 3], 1.0 * expected_bias)
    assert np.allclose(grad[:, 1], 0.0) and np.allclose(grad[:, 2], 0.0)


@pytest.mark.skipif("numba" not in available_backends(), reason="numba unavailable")
def test_kernel_backends_agree():
    numba_backend = get_backend("numba")
    numpy_backend = get_backend("numpy")
    rng = np.random.default_rng(123)
    for _ in range(5):
        indptr, indices, data, weights, labels, nf = _random_batch(rng)
        lg_a = numba_backend.logits(indptr, indices, data, weights)
        lg_b = numpy_backend.logits(indptr, indices, data, weights)
        assert np.allclose(lg_a, lg_b, rtol=1e-12, atol=1e-12)
        sm_a = numba_backend.softmax(lg_a)
        sm_b = numpy_backend.softmax(lg_b)
        assert np.allclose(sm_a, sm_b, rtol=1e-12, atol=1e-12)
        loss_a, grad_a = numba_backend.xent_grad(indptr, indices, data, sm_a, labels, nf)
        loss_b, grad_b = numpy_backend.xent_grad(indptr, indices, data, sm_b, labels, nf)
        assert math.isclose(loss_a, loss_b, rel_tol=1e-10)
        assert np.allclose(grad_a, grad_b, rtol=1e-10, atol=1e-12)


def test_backend_selection_by_env(monkeypatch):
    monkeypatch.setenv(KERNELS_ENV, "numpy")
    assert get_backend().name == "numpy"
    monkeypatch.delenv(KERNELS_ENV)
    assert get_backend().name in available_backends()
    monkeypatch.setenv(KERNELS_ENV, "fancy")
    with pytest.raises(ValueError):
        get_backend()
    assert get_backend("numpy") is NUMPY_BACKEND


# --- training ---------------------------------------------------------------------------

def _toy_train():
    train = (
        [_ex("alpha beta alpha", Label.NON_SATD)] * 6
        + [_ex("gamma delta gamma", Label.TEST)] * 6
    )
    validation = [
        _ex("alpha beta alpha", Label.NON_SATD),
        _ex("gamma delta gamma", Label.TEST),
    ]
    return train, validation


TOY_CONFIG = TrainConfig(max_epochs=12, require_all_labels=False)


def test_training_fits_separable_data():
    train, validation = _toy_train()
    model = train_ngram(train, validation, TOY_CONFIG)
    labels = [c.label for c in model.classify_batch(["alpha beta alpha", "gamma delta gamma"])]
    assert labels == [Label.NON_SATD, Label.TEST]
    meta = model.training_meta
    assert set(meta) >= {"seed", "epochs", "learning_rate", "weight_decay",
                         "batch_size", "min_frequency", "best_validation_loss",
                         "stopped_early"}


def test_predictions_match_dense_softmax_oracle():
    train, validation = _toy_train()
    model = train_ngram(train, validation, TOY_CONFIG)
    texts = ["alpha beta alpha", "gamma delta gamma", "alpha gamma"]

    # independent dense re-implementation of scoring
    F = len(model.vocabulary)
    indptr, indices, data = featurize(texts, model.vocabulary)
    X = np.zeros((len(texts), F + 1))
    X[:, F] = 1.0
    for i in range(len(texts)):
        for p in range(indptr[i], indptr[i + 1]):
            X[i, indices[p]] += data[p]
    logits = X @ model.weights.T
    e = np.exp(logits - logits.max(axis=1, keepdims=True))
    probs = e / e.sum(axis=1, keepdims=True)

    got = model.scores(texts)
    assert np.allclose(got, probs, rtol=1e-10, atol=1e-12)
    for row, cls in zip(probs, model.classify_batch(texts)):
        assert cls.label is LABEL_ORDER[int(np.argmax(row))]


def test_training_is_deterministic():
    train, validation = _toy_train()
    a = train_ngram(train, validation, TOY_CONFIG)
    b = train_ngram(train, validation, TOY_CONFIG)
    assert np.array_equal(a.weights, b.weights)
    assert a.vocabulary == b.vocabulary
    assert a.training_meta == b.training_meta


def test_training_single_step_matches_hand_computation():
    # One full-batch epoch: step = lr * mean gradient, then decoupled decay
    # on feature columns only.
    train = [
        _ex("alpha alpha", Label.NON_SATD),
        _ex("beta beta", Label.TEST),
        _ex("alpha beta", Label.NON_SATD),
        _ex("beta alpha", Label.TEST),
    ]
    validation = [_ex("alpha alpha", Label.NON_SATD)]
    lr, wd = 0.3, 0.25
    base = dict(learning_rate=lr, batch_size=8, max_epochs=1,
                min_frequency=1, require_all_labels=False)
    plain = train_ngram(train, validation, TrainConfig(weight_decay=0.0, **base))
    decayed = train_ngram(train, validation, TrainConfig(weight_decay=wd, **base))

    F = len(plain.vocabulary)
    texts = [ex.text for ex in train]
    indptr, indices, data = featurize(texts, plain.vocabulary)
    X = np.zeros((len(train), F + 1))
    X[:, F] = 1.0
    for i in range(len(train)):
        for p in range(indptr[i], indptr[i + 1]):
            X[i, indices[p]] += data[p]
    Y = np.zeros((len(train), 6))
    for i, ex in enumerate(train):
        Y[i, ex.label.order_index] = 1.0
    probs0 = np.full((len(train), 6), 1.0 / 6.0)  # softmax of zero weights
    grad = (probs0 - Y).T @ X / len(train)
    expected = -lr * grad

    assert np.allclose(plain.weights, expected, rtol=1e-10, atol=1e-12)
    assert np.array_equal(decayed.weights[:, F], plain.weights[:, F])  # bias undecayed
    assert np.allclose(decayed.weights[:, :F], plain.weights[:, :F] * (1 - lr * wd),
                       rtol=0, atol=1e-15)


def test_training_stops_on_rising_validation_loss():
    train = (
        [_ex("wa wa wa", Label.NON_SATD)] * 8
        + [_ex("wb wb wb", Label.TEST)] * 8
    )
    # validation labels contradict training: loss rises every epoch
    validation = [
        _ex("wa wa wa", Label.TEST),
        _ex("wb wb wb", Label.NON_SATD),
    ]
    config = TrainConfig(max_epochs=30, patience=2, require_all_labels=False)
    model = train_ngram(train, validation, config)
    assert model.training_meta["stopped_early"] is True
    assert model.training_meta["epochs"] == 3  # 1 improving + patience 2


def test_training_input_validation():
    train, validation = _toy_train()
    with pytest.raises(MissingLabelInTrain) as exc:
        train_ngram(train, validation, TrainConfig())
    assert exc.value.label is Label.CODE_DESIGN
    with pytest.raises(ValueError):
        train_ngram([], validation, TOY_CONFIG)
    with pytest.raises(ValueError):
        train_ngram(train, [], TOY_CONFIG)
    degenerate = [_ex("same text", Label.TEST)] * 4
    with pytest.raises(DegenerateData):
        train_ngram(degenerate, validation, TOY_CONFIG)


# --- gradient check -----------------------------------------------------------------------

def test_gradient_check_passes_on_trained_model():
    train, validation = _toy_train()
    model = train_ngram(train, validation, TOY_CONFIG)
    report = evaluate_gradient(model, train[:4] + train[-4:], seed=0)
    assert report.passed
    assert report.checked >= 1
    assert report.worst_relative_error < report.threshold == 1e-4


def test_gradient_check_rejects_bad_numerics():
    train, validation = _toy_train()
    model = train_ngram(train, validation, TOY_CONFIG)
    with pytest.raises(GradientMismatch) as exc:
        evaluate_gradient(model, train[:4] + train[-4:], seed=0, step=0.75)
    assert exc.value.report.passed is False
    assert "relative error" in str(exc.value)


def test_gradient_check_batch_limits():
    train, validation = _toy_train()
    model = train_ngram(train, validation, TOY_CONFIG)
    with pytest.raises(ValueError):
        evaluate_gradient(model, train)  # 12 > 8
    with pytest.raises(ValueError):
        evaluate_gradient(model, [])


# --- persistence ---------------------------------------------------------------------------

def test_model_round_trip(tmp_path):
    train, validation = _toy_train()
    model = train_ngram(train, validation, TOY_CONFIG)
    path = tmp_path / "model.json"
    model.save(path)
    loaded = NgramModel.load(path)
    assert np.array_equal(loaded.weights, model.weights)
    assert loaded.vocabulary == model.vocabulary
    assert loaded.training_meta == model.training_meta
    texts = ["alpha beta alpha", "gamma delta gamma"]
    assert [c.to_wire() for c in loaded.classify_batch(texts)] == \
           [c.to_wire() for c in model.classify_batch(texts)]


def test_model_load_rejects_foreign_containers(tmp_path):
    train, validation = _toy_train()
    model = train_ngram(train, validation, TOY_CONFIG)
    path = tmp_path / "model.json"
    model.save(path)
    payload = json.loads(path.read_text())

    for mutation in (
        {"format": "other"},
        {"version": 99},
        {"labels": list(reversed(payload["labels"]))},
    ):
        bad = {**payload, **mutation}
        bad_path = tmp_path / "bad.json"
        bad_path.write_text(json.dumps(bad))
        with pytest.raises(ValueError):
            NgramModel.load(bad_path)


def test_model_validates_shape():
    with pytest.raises(ValueError):
        NgramModel(vocabulary={"a": 0, "b": 2}, weights=np.zeros((6, 3)))
    with pytest.raises(ValueError):
        NgramModel(vocabulary={"a": 0}, weights=np.zeros((6, 3)))
    with pytest.raises(ValueError):
        NgramModel(vocabulary={"a": 0}, weights=np.full((6, 2), np.nan))


# --- baseline dominance ---------------------------------------------------------------------

def test_trained_model_beats_majority_on_synthetic(small_corpus):
    train, validation, test = split(small_corpus, SplitSpec(0.8, 0.1, 0.1, seed=0))
    model = train_ngram(train, validation, TrainConfig(max_epochs=25))
    majority = MajorityBackend.fit(train)

    texts = [ex.text for ex in test]
    want = [ex.label for ex in test]
    model_acc = sum(c.label is w for c, w in zip(model.classify_batch(texts), want)) / len(want)
    maj_acc = sum(c.label is w for c, w in zip(majority.classify_batch(texts), want)) / len(want)
    assert model_acc > 0.7
    assert model_acc > maj_acc
