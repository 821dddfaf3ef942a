import numpy as np
import pytest
from hypothesis import given, strategies as st

from mea_reservoir.classifier import (
    Hyperparams, SLPModel, confusion_matrix, cross_entropy, cross_entropy_grad,
    cross_session_eval, cross_validate, load_model, predict, predict_many, save_model,
    softmax, stratified_folds, train_slp, train_slp_primal,
)
from mea_reservoir.readout import FeatureVector


def numeric_grad(W, b, X, y, h=1e-6):
    gW = np.zeros_like(W)
    gb = np.zeros_like(b)
    for idx in np.ndindex(W.shape):
        Wp, Wm = W.copy(), W.copy()
        Wp[idx] += h
        Wm[idx] -= h
        gW[idx] = (cross_entropy(Wp, b, X, y) - cross_entropy(Wm, b, X, y)) / (2 * h)
    for k in range(b.size):
        bp, bm = b.copy(), b.copy()
        bp[k] += h
        bm[k] -= h
        gb[k] = (cross_entropy(W, bp, X, y) - cross_entropy(W, bm, X, y)) / (2 * h)
    return gW, gb


def rel_err(a, b):
    return np.max(np.abs(a - b)) / max(1e-12, np.max(np.abs(a)) + np.max(np.abs(b)))


@pytest.mark.parametrize("seed", range(5))
def test_gradient_check(seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(12, 8))
    y = rng.integers(0, 3, 12)
    W = rng.normal(size=(3, 8))
    b = rng.normal(size=3)
    gW, gb = cross_entropy_grad(W, b, X, y)
    nW, nb = numeric_grad(W, b, X, y)
    assert rel_err(gW, nW) < 1e-5
    assert rel_err(gb, nb) < 1e-5


@given(st.integers(0, 2**32 - 1), st.floats(-50, 50))
def test_softmax_normalized_and_shift_invariant(seed, shift):
    s = np.random.default_rng(seed).normal(scale=10, size=(5, 10))
    p = softmax(s)
    assert np.allclose(p.sum(axis=1), 1.0)
    assert np.all(p >= 0)
    assert np.allclose(softmax(s + shift), p)
    assert np.array_equal(np.argmax(s + shift, axis=1), np.argmax(s, axis=1))


def test_softmax_extreme_scores_finite():
    p = softmax(np.array([[1e4, -1e4, 0.0]]))
    assert np.all(np.isfinite(p)) and p[0, 0] == pytest.approx(1.0)


def separable(n_per, n_classes, d, seed, gap=5.0):
    rng = np.random.default_rng(seed)
    centers = rng.normal(scale=gap, size=(n_classes, d))
    X = np.concatenate([centers[c] + rng.normal(size=(n_per, d)) for c in range(n_classes)])
    y = np.repeat(np.arange(n_classes), n_per)
    return X, y


def test_two_separable_classes_fit_perfectly():
    X, y = separable(20, 2, 5, seed=0)
    m = train_slp(X, y, Hyperparams(n_classes=2))
    assert np.all(predict_many(m, X) == y)


def test_zero_learning_rate_keeps_init():
    X, y = separable(10, 3, 4, seed=1)
    m = train_slp(X, y, Hyperparams(learning_rate=0.0, n_classes=3))
    assert not m.weights.any() and not m.bias.any()


def test_training_is_deterministic():
    X, y = separable(10, 3, 4, seed=2)
    hp = Hyperparams(n_classes=3, epochs=50, seed=9)
    a, b = train_slp(X, y, hp), train_slp(X, y, hp)
    assert np.array_equal(a.weights, b.weights) and np.array_equal(a.bias, b.bias)


@pytest.mark.parametrize("bs, std", [(16, False), (1, False), (7, True)])
def test_dual_matches_primal(bs, std):
    rng = np.random.default_rng(bs)
    X = rng.poisson(1.0, size=(37, 60)).astype(float)
    y = rng.integers(0, 4, 37)
    hp = Hyperparams(batch_size=bs, epochs=30, n_classes=4, standardize=std, seed=3)
    a, b = train_slp(X, y, hp), train_slp_primal(X, y, hp)
    assert np.allclose(a.weights, b.weights, atol=1e-10)
    assert np.allclose(a.bias, b.bias, atol=1e-10)


def test_training_lowers_loss():
    X, y = separable(15, 4, 6, seed=4, gap=1.0)
    hp = Hyperparams(n_classes=4, epochs=200)
    m = train_slp(X, y, hp)
    zero = cross_entropy(np.zeros((4, 6)), np.zeros(4), X, y)
    assert cross_entropy(m.weights, m.bias, X, y) < zero


def test_predict_zero_model_uniform():
    m = SLPModel(np.zeros((10, 4096)), np.zeros(10))
    fv = FeatureVector(np.ones(4096, np.int64), 3, np.zeros(4096, bool))
    label, probs = predict(m, fv)
    assert label == 0
    assert np.allclose(probs, 0.1)


def test_predict_shape_mismatch():
    m = SLPModel(np.zeros((10, 5)), np.zeros(10))
    with pytest.raises(ValueError):
        m.scores(np.zeros((1, 4)))


def test_bad_labels_rejected():
    with pytest.raises(ValueError):
        train_slp(np.zeros((3, 2)), np.array([0, 1, 10]))


def test_folds_for_200_trials():
    y = np.repeat(np.arange(10), 20)
    folds = stratified_folds(np.random.default_rng(0).permutation(y), 5, seed=1)
    labels = np.random.default_rng(0).permutation(y)
    allidx = np.concatenate(folds)
    assert sorted(allidx.tolist()) == list(range(200))
    for f in folds:
        assert f.size == 40
        assert np.all(np.bincount(labels[f], minlength=10) == 4)


@given(st.lists(st.integers(0, 4), min_size=10, max_size=80), st.integers(2, 5), st.integers(0, 1000))
def test_fold_partition_properties(labels, k, seed):
    y = np.array(labels)
    if y.size < k:
        return
    folds = stratified_folds(y, k, seed)
    sizes = [f.size for f in folds]
    assert max(sizes) - min(sizes) <= 1
    allidx = np.concatenate(folds)
    assert np.array_equal(np.sort(allidx), np.arange(y.size))
    for c in np.unique(y):
        per = [np.sum(y[f] == c) for f in folds]
        assert max(per) - min(per) <= 1


def test_folds_are_seeded():
    y = np.repeat(np.arange(10), 20)
    a = stratified_folds(y, 5, 3)
    b = stratified_folds(y, 5, 3)
    c = stratified_folds(y, 5, 4)
    assert all(np.array_equal(p, q) for p, q in zip(a, b))
    assert not all(np.array_equal(p, q) for p, q in zip(a, c))


def test_separable_cv_is_perfect():
    X, y = separable(20, 10, 30, seed=5, gap=10.0)
    rep = cross_validate(X, y, k=5, seed=0)
    assert np.all(rep.fold_accuracy == 1.0)
    assert rep.accuracy == 1.0 and rep.sd == 0.0
    assert np.array_equal(rep.confusion.sum(axis=1), np.full(10, 20))


def test_cv_report_consistency():
    X, y = separable(20, 10, 30, seed=6, gap=0.7)
    rep = cross_validate(X, y, k=5, seed=1, hp=Hyperparams(epochs=100))
    assert np.all((rep.fold_accuracy >= 0) & (rep.fold_accuracy <= 1))
    assert rep.confusion.sum() == 200
    assert np.allclose(rep.per_class_accuracy, np.diag(rep.confusion) / 20)
    assert rep.mean == pytest.approx(rep.accuracy)  # equal-size folds


def test_permuted_labels_give_chance():
    rng = np.random.default_rng(0)
    X = rng.poisson(2.0, size=(200, 300)).astype(float)
    y0 = np.repeat(np.arange(10), 20)
    accs = []
    for seed in range(20):
        y = np.random.default_rng(seed).permutation(y0)
        accs.append(cross_validate(X, y, k=5, seed=seed, hp=Hyperparams(epochs=100)).mean)
    assert 0.05 <= np.mean(accs) <= 0.15


def test_confusion_matrix():
    cm = confusion_matrix([0, 1, 1, 2], [0, 2, 1, 2], 3)
    assert cm.tolist() == [[1, 0, 0], [0, 1, 1], [0, 0, 1]]


def fvs_from(X, y, window=0.005):
    return [FeatureVector(np.pad(x, (0, 4096 - x.size)), int(c), np.zeros(4096, bool), window_s=window)
            for x, c in zip(X, y)]


def test_cross_session_same_data():
    X, y = separable(10, 10, 20, seed=7, gap=1.5)
    fvs = fvs_from(X, y)
    hp = Hyperparams(epochs=200)
    scores = cross_session_eval(fvs, {"same": fvs}, hp)
    m = train_slp(fvs, hp=hp)
    train_acc = np.mean(predict_many(m, np.stack([f.values for f in fvs])) == y)
    assert scores["same"].accuracy >= train_acc
    assert scores["same"].shuffled_accuracy < scores["same"].accuracy


def test_cross_session_schema_mismatch():
    X, y = separable(10, 10, 20, seed=8)
    with pytest.raises(ValueError):
        cross_session_eval(fvs_from(X, y), {"other": fvs_from(X, y, window=0.01)}, Hyperparams(epochs=5))


def test_model_roundtrip(tmp_path):
    X, y = separable(10, 3, 6, seed=9)
    m = train_slp(X, y, Hyperparams(n_classes=3, epochs=20, standardize=True))
    p = tmp_path / "m.slpm"
    save_model(m, p)
    back = load_model(p)
    assert back.weights.shape == (3, 6)
    assert np.allclose(back.scores(X), m.scores(X))
    data = p.read_bytes()
    assert data[:4] == b"SLPM" and len(data) == 14 + 8 * (18 + 3)
    p.write_bytes(b"XXXX" + data[4:])
    with pytest.raises(ValueError):
        load_model(p)
