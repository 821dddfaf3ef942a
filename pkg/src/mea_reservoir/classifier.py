"""Single-layer perceptron readout: softmax over an affine map, trained by SGD.

Training uses mini-batch SGD on the mean cross-entropy for a fixed number of
epochs, with no validation split and no early stopping.

Weights start at zero and every SGD update adds a combination of training
rows, so the weight matrix always equals ``A.T @ X`` for some coefficient
matrix ``A`` (one row per training sample). The loop therefore runs on the
Gram matrix ``X @ X.T`` and updates ``A``; its cost does not depend on the
4096 feature dimensions. :func:`train_slp_primal` is the textbook loop kept
as a cross-check.
"""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from numba import njit

from .readout import FeatureVector, feature_matrix, shuffle_spatial

log = logging.getLogger(__name__)

N_CLASSES = 10

SLPM_MAGIC = b"SLPM"
SLPM_VERSION = 1
_SLPM_HEADER = struct.Struct("<4sHII")


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class Hyperparams:
    learning_rate: float = 0.01
    batch_size: int = 16
    epochs: int = 1000
    seed: int = 0
    standardize: bool = False
    n_classes: int = N_CLASSES


@dataclass(eq=False)
class SLPModel:
    weights: np.ndarray  # (n_classes, n_features)
    bias: np.ndarray  # (n_classes,)
    hp: Hyperparams = field(default_factory=Hyperparams)
    feature_mean: np.ndarray | None = None
    feature_scale: np.ndarray | None = None

    @property
    def n_classes(self) -> int:
        return self.weights.shape[0]

    @property
    def n_features(self) -> int:
        return self.weights.shape[1]

    def transform(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if self.feature_mean is not None:
            X = (X - self.feature_mean) / self.feature_scale
        return X

    def scores(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(self.transform(X))
        if X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got {X.shape[1]}")
        return X @ self.weights.T + self.bias

    def folded(self) -> "SLPModel":
        """Equivalent model with standardization folded into the affine map."""
        if self.feature_mean is None:
            return self
        w = self.weights / self.feature_scale
        b = self.bias - w @ self.feature_mean
        return SLPModel(w, b, self.hp)


def softmax(scores: np.ndarray) -> np.ndarray:
    z = scores - scores.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def cross_entropy(weights, bias, X, y) -> float:
    """Mean cross-entropy of the softmax classifier on ``(X, y)``."""
    s = X @ weights.T + bias
    s = s - s.max(axis=1, keepdims=True)
    logz = np.log(np.exp(s).sum(axis=1))
    return float(np.mean(logz - s[np.arange(len(y)), y]))


def cross_entropy_grad(weights, bias, X, y) -> tuple[np.ndarray, np.ndarray]:
    """Analytic gradient of :func:`cross_entropy` w.r.t. weights and bias."""
    p = softmax(X @ weights.T + bias)
    p[np.arange(len(y)), y] -= 1.0
    p /= len(y)
    return p.T @ X, p.sum(axis=0)


def _as_arrays(features, labels=None):
    if labels is None:
        return feature_matrix(features)
    return np.asarray(features, dtype=np.float64), np.asarray(labels, dtype=np.int64)


def train_slp(features, labels=None, hp: Hyperparams | None = None) -> SLPModel:
    """Fit an SLP to ``features`` (FeatureVectors, or an array plus ``labels``)."""
    hp = hp or Hyperparams()
    X, y = _as_arrays(features, labels)
    n, d = X.shape
    if n == 0:
        raise ValueError("no training samples")
    if y.min() < 0 or y.max() >= hp.n_classes:
        raise ValueError("labels out of range")

    mean = scale = None
    if hp.standardize:
        mean = X.mean(axis=0)
        scale = X.std(axis=0)
        scale[scale == 0] = 1.0
        X = (X - mean) / scale

    Y = np.zeros((n, hp.n_classes))
    Y[np.arange(n), y] = 1.0
    A = np.zeros((n, hp.n_classes))
    b = np.zeros(hp.n_classes)
    if hp.learning_rate != 0 and hp.epochs > 0:
        K = X @ X.T
        perms = _epoch_orders(n, hp)
        ok = _sgd_dual(K, Y, perms, hp.learning_rate, hp.batch_size, A, b)
        if ok >= 0:
            raise TrainingError(f"non-finite parameters in epoch {ok}")
    return SLPModel(A.T @ X, b, hp, mean, scale)


def _epoch_orders(n: int, hp: Hyperparams) -> np.ndarray:
    rng = np.random.default_rng(hp.seed)
    return np.stack([rng.permutation(n) for _ in range(hp.epochs)]) if hp.epochs else np.zeros((0, n), np.int64)


@njit(cache=True)
def _sgd_dual(K, Y, perms, lr, batch_size, A, b):
    n, n_cls = Y.shape
    s = np.empty((batch_size, n_cls))
    for e in range(perms.shape[0]):
        for start in range(0, n, batch_size):
            stop = min(start + batch_size, n)
            m = stop - start
            for r in range(m):
                i = perms[e, start + r]
                for c in range(n_cls):
                    acc = b[c]
                    for j in range(n):
                        acc += A[j, c] * K[i, j]
                    s[r, c] = acc
            for r in range(m):
                mx = s[r, 0]
                for c in range(1, n_cls):
                    mx = max(mx, s[r, c])
                tot = 0.0
                for c in range(n_cls):
                    s[r, c] = np.exp(s[r, c] - mx)
                    tot += s[r, c]
                i = perms[e, start + r]
                for c in range(n_cls):
                    g = lr * (s[r, c] / tot - Y[i, c]) / m
                    A[i, c] -= g
                    b[c] -= g
        for c in range(n_cls):
            if not np.isfinite(b[c]):
                return e
    return -1


def train_slp_primal(features, labels=None, hp: Hyperparams | None = None) -> SLPModel:
    """Same optimizer as :func:`train_slp`, written directly on the weights."""
    hp = hp or Hyperparams()
    X, y = _as_arrays(features, labels)
    n, d = X.shape
    mean = scale = None
    if hp.standardize:
        mean = X.mean(axis=0)
        scale = X.std(axis=0)
        scale[scale == 0] = 1.0
        X = (X - mean) / scale
    W = np.zeros((hp.n_classes, d))
    b = np.zeros(hp.n_classes)
    if hp.learning_rate != 0:
        for perm in _epoch_orders(n, hp):
            for start in range(0, n, hp.batch_size):
                idx = perm[start:start + hp.batch_size]
                gW, gb = cross_entropy_grad(W, b, X[idx], y[idx])
                W -= hp.learning_rate * gW
                b -= hp.learning_rate * gb
    return SLPModel(W, b, hp, mean, scale)


def predict(model: SLPModel, fv) -> tuple[int, np.ndarray]:
    """Label (lowest index on ties) and class probabilities for one sample."""
    x = fv.values if isinstance(fv, FeatureVector) else fv
    probs = softmax(model.scores(np.asarray(x, dtype=np.float64)[None, :]))[0]
    return int(np.argmax(probs)), probs


def predict_many(model: SLPModel, X: np.ndarray) -> np.ndarray:
    return np.argmax(model.scores(X), axis=1)


@dataclass
class CVReport:
    fold_accuracy: np.ndarray
    per_class_accuracy: np.ndarray
    confusion: np.ndarray  # rows: true label, columns: prediction
    folds: list[np.ndarray]
    predictions: np.ndarray

    @property
    def mean(self) -> float:
        return float(self.fold_accuracy.mean())

    @property
    def sd(self) -> float:
        return float(self.fold_accuracy.std(ddof=1)) if self.fold_accuracy.size > 1 else 0.0

    @property
    def accuracy(self) -> float:
        """Pooled accuracy over all held-out predictions."""
        return float(np.trace(self.confusion) / self.confusion.sum())


def stratified_folds(labels: np.ndarray, k: int = 5, seed: int = 0) -> list[np.ndarray]:
    """Seeded, label-stratified partition of sample indices into ``k`` folds.

    Each class is shuffled and dealt round-robin; the starting fold rotates
    from class to class so fold sizes differ by at most one.
    """
    labels = np.asarray(labels)
    if k < 2 or k > labels.size:
        raise ValueError("need 2 <= k <= number of samples")
    rng = np.random.default_rng(seed)
    assign = np.empty(labels.size, dtype=np.int64)
    offset = 0
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        idx = idx[rng.permutation(idx.size)]
        assign[idx] = (np.arange(idx.size) + offset) % k
        offset += idx.size
    return [np.flatnonzero(assign == f) for f in range(k)]


def _fold_seed(seed: int, fold: int) -> int:
    return int(np.random.SeedSequence([seed, fold]).generate_state(1)[0])


def confusion_matrix(y_true, y_pred, n_classes: int = N_CLASSES) -> np.ndarray:
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (np.asarray(y_true), np.asarray(y_pred)), 1)
    return cm


def per_class_accuracy(cm: np.ndarray) -> np.ndarray:
    totals = cm.sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(totals > 0, np.diag(cm) / np.maximum(totals, 1), np.nan)


def cross_validate(features, labels=None, k: int = 5, hp: Hyperparams | None = None, seed: int = 0) -> CVReport:
    """Stratified k-fold CV; each fold's model is frozen after training."""
    hp = hp or Hyperparams()
    X, y = _as_arrays(features, labels)
    folds = stratified_folds(y, k, seed)
    preds = np.empty_like(y)
    acc = np.empty(k)
    for f, test in enumerate(folds):
        train = np.setdiff1d(np.arange(y.size), test)
        missing = set(range(hp.n_classes)) & set(np.unique(y)) - set(np.unique(y[train]))
        if missing:
            raise ValueError(f"classes {sorted(missing)} absent from training fold {f}")
        fold_hp = Hyperparams(**{**hp.__dict__, "seed": _fold_seed(seed, f)})
        model = train_slp(X[train], y[train], fold_hp)
        preds[test] = predict_many(model, X[test])
        acc[f] = np.mean(preds[test] == y[test])
    cm = confusion_matrix(y, preds, hp.n_classes)
    return CVReport(acc, per_class_accuracy(cm), cm, folds, preds)


@dataclass
class SessionScore:
    accuracy: float
    per_class_accuracy: np.ndarray
    confusion: np.ndarray
    shuffled_accuracy: float
    shuffled_per_class_accuracy: np.ndarray


def _check_schema(reference: Sequence[FeatureVector], other: Sequence[FeatureVector], name: str):
    w_ref = {fv.window_s for fv in reference}
    w_other = {fv.window_s for fv in other}
    if w_ref != w_other:
        raise ValueError(f"session {name!r} uses windows {sorted(w_other)}, training used {sorted(w_ref)}")


def cross_session_eval(
    train: Sequence[FeatureVector],
    tests: Mapping[str, Sequence[FeatureVector]],
    hp: Hyperparams | None = None,
    shuffle_seed: int = 0,
) -> dict[str, SessionScore]:
    """Train once on ``train``; score every test session as-is and spatially shuffled."""
    hp = hp or Hyperparams()
    model = train_slp(train, hp=hp)
    out = {}
    for k, (name, fvs) in enumerate(tests.items()):
        _check_schema(train, fvs, name)
        X, y = feature_matrix(fvs)
        pred = predict_many(model, X)
        cm = confusion_matrix(y, pred, hp.n_classes)
        ss = np.random.SeedSequence([shuffle_seed, k]).generate_state(len(fvs))
        Xs, _ = feature_matrix([shuffle_spatial(fv, int(s)) for fv, s in zip(fvs, ss)])
        pred_s = predict_many(model, Xs)
        cm_s = confusion_matrix(y, pred_s, hp.n_classes)
        out[name] = SessionScore(
            float(np.mean(pred == y)), per_class_accuracy(cm), cm,
            float(np.mean(pred_s == y)), per_class_accuracy(cm_s),
        )
    return out


def save_model(model: SLPModel, path: str | Path) -> None:
    """Write the flat ``SLPM`` binary (standardization folded in)."""
    m = model.folded()
    with open(path, "wb") as fh:
        fh.write(_SLPM_HEADER.pack(SLPM_MAGIC, SLPM_VERSION, m.n_classes, m.n_features))
        fh.write(np.ascontiguousarray(m.weights, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(m.bias, dtype="<f8").tobytes())


def load_model(path: str | Path) -> SLPModel:
    data = Path(path).read_bytes()
    magic, version, n_classes, n_features = _SLPM_HEADER.unpack_from(data)
    if magic != SLPM_MAGIC:
        raise ValueError(f"bad magic {magic!r}")
    if version != SLPM_VERSION:
        raise ValueError(f"unsupported SLPM version {version}")
    body = np.frombuffer(data, dtype="<f8", offset=_SLPM_HEADER.size)
    if body.size != n_classes * n_features + n_classes:
        raise ValueError("SLPM payload size does not match header")
    w = body[: n_classes * n_features].reshape(n_classes, n_features).copy()
    b = body[n_classes * n_features:].copy()
    return SLPModel(w, b, Hyperparams(n_classes=n_classes))
