"""Three-class linear stance classifier trained with a multi-class hinge loss."""

from __future__ import annotations

import csv
import json
from collections import Counter
from dataclasses import dataclass, field
from datetime import date, timedelta
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from . import ANTI, CLASSES, NEUTRAL, PRO
from .corpus import Corpus, DataError, Tweet

MODEL_FORMAT = "polardyn-stance-model"
MODEL_VERSION = 1
CLASS_INDEX = {c: i for i, c in enumerate(CLASSES)}


def extract_features(t: Tweet) -> Counter:
    """Namespaced counts: ``U:`` unigrams, ``B:`` bigrams, ``H:`` hashtags.

    Hashtags are tokens too, so each also yields a unigram.
    """
    toks = t.tokens
    feats = Counter("U:" + w for w in toks)
    feats.update("B:" + a + " " + b for a, b in zip(toks, toks[1:]))
    feats.update("H:" + h for h in t.hashtags)
    return feats


def _matrix(feature_maps: Sequence[Counter], vocab: dict[str, int]) -> sp.csr_matrix:
    indptr, indices, values = [0], [], []
    for fm in feature_maps:
        cols = [(vocab[f], n) for f, n in fm.items() if f in vocab]
        cols.sort()
        indices.extend(c for c, _ in cols)
        values.extend(float(n) for _, n in cols)
        indptr.append(len(indices))
    return sp.csr_matrix(
        (np.asarray(values, dtype=np.float64), np.asarray(indices, dtype=np.int64), np.asarray(indptr)),
        shape=(len(feature_maps), len(vocab)),
    )


def build_vocabulary(feature_maps: Iterable[Counter]) -> dict[str, int]:
    feats = set()
    for fm in feature_maps:
        feats.update(fm)
    return {f: i for i, f in enumerate(sorted(feats))}


@dataclass
class StanceModel:
    vocabulary: dict[str, int]
    weights: np.ndarray  # (n_classes, n_features)
    seed: int
    hyper: dict = field(default_factory=dict)
    train_accuracy: float | None = None
    classes: tuple[str, ...] = CLASSES

    def scores(self, tweets: Sequence[Tweet]) -> np.ndarray:
        X = _matrix([extract_features(t) for t in tweets], self.vocabulary)
        return np.asarray(X @ self.weights.T)

    def predict_many(self, tweets: Sequence[Tweet]) -> list[str]:
        if not tweets:
            return []
        # np.argmax takes the first maximum: the Pro < Neutral < Anti tie order
        idx = np.argmax(self.scores(tweets), axis=1)
        return [self.classes[i] for i in idx]

    def to_json(self) -> dict:
        vocab = sorted(self.vocabulary, key=self.vocabulary.__getitem__)
        return {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "classes": list(self.classes),
            "seed": self.seed,
            "hyper": self.hyper,
            "train_accuracy": self.train_accuracy,
            "vocabulary": vocab,
            "weights": self.weights.tolist(),
        }

    @classmethod
    def from_json(cls, doc: dict) -> StanceModel:
        if doc.get("format") != MODEL_FORMAT or doc.get("version") != MODEL_VERSION:
            raise DataError(f"not a version-{MODEL_VERSION} stance model file")
        vocab = {f: i for i, f in enumerate(doc["vocabulary"])}
        w = np.asarray(doc["weights"], dtype=np.float64).reshape(len(doc["classes"]), len(vocab))
        return cls(vocab, w, int(doc["seed"]), dict(doc.get("hyper", {})), doc.get("train_accuracy"), tuple(doc["classes"]))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), ensure_ascii=False) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> StanceModel:
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


def predict(m: StanceModel, t: Tweet) -> str:
    return m.predict_many([t])[0]


def hinge_objective(W: np.ndarray, X: sp.csr_matrix, y: np.ndarray, reg: float) -> float:
    """reg/2 ||W||^2 + mean_i max(0, 1 + max_{r != y_i} w_r.x_i - w_{y_i}.x_i)."""
    S = np.asarray(X @ W.T)
    rows = np.arange(len(y))
    true = S[rows, y]
    S_other = S.copy()
    S_other[rows, y] = -np.inf
    loss = np.maximum(0.0, 1.0 + S_other.max(axis=1) - true)
    return 0.5 * reg * float(np.sum(W * W)) + float(loss.mean())


def hinge_subgradient(W: np.ndarray, X: sp.csr_matrix, y: np.ndarray, reg: float) -> np.ndarray:
    S = np.asarray(X @ W.T)
    rows = np.arange(len(y))
    S_other = S.copy()
    S_other[rows, y] = -np.inf
    rival = S_other.argmax(axis=1)
    active = 1.0 + S_other[rows, rival] - S[rows, y] > 0
    G = np.zeros_like(S)
    G[rows[active], rival[active]] += 1.0
    G[rows[active], y[active]] -= 1.0
    return reg * W + np.asarray((X.T @ G).T) / len(y)


def _sgd_step(W: np.ndarray, X: sp.csr_matrix, y: np.ndarray, lo: int, hi: int, reg: float, eta: float) -> None:
    """In-place ``W -= eta * hinge_subgradient(W, X[lo:hi], y[lo:hi], reg)``
    on the raw CSR arrays, skipping scipy's per-slice overhead."""
    n = hi - lo
    a, b = X.indptr[lo], X.indptr[hi]
    cols, vals = X.indices[a:b], X.data[a:b]
    row_of = np.repeat(np.arange(n), np.diff(X.indptr[lo : hi + 1]))
    contrib = W[:, cols] * vals
    S = np.stack([np.bincount(row_of, weights=contrib[c], minlength=n) for c in range(W.shape[0])], axis=1)
    yb = y[lo:hi]
    rows = np.arange(n)
    S_other = S.copy()
    S_other[rows, yb] = -np.inf
    rival = S_other.argmax(axis=1)
    active = 1.0 + S_other[rows, rival] - S[rows, yb] > 0
    G = np.zeros_like(S)
    G[rows[active], rival[active]] += 1.0
    G[rows[active], yb[active]] -= 1.0
    upd = G[row_of].T * vals * (eta / n)
    W *= 1.0 - eta * reg
    for c in range(W.shape[0]):
        np.subtract.at(W[c], cols, upd[c])


def _check_classes(labels: Sequence[str], where: str = "training data") -> None:
    unknown = set(labels) - set(CLASSES)
    if unknown:
        raise ValueError(f"unknown classes in {where}: {sorted(unknown)}")
    missing = [c for c in CLASSES if c not in set(labels)]
    if missing:
        raise ValueError(f"{where} has no examples of class(es) {missing}")


def train(
    data: Sequence[tuple[Tweet, str]],
    seed: int = 0,
    epochs: int = 30,
    reg: float = 1e-4,
    lr: float = 0.5,
    batch_size: int = 8,
) -> StanceModel:
    """Fit a Crammer-Singer multi-class hinge model by minibatch subgradient
    descent. Epoch order is a seeded shuffle, so weights are a deterministic
    function of (data order, seed, hyperparameters)."""
    labels = [c for _, c in data]
    _check_classes(labels)
    fmaps = [extract_features(t) for t, _ in data]
    vocab = build_vocabulary(fmaps)
    X = _matrix(fmaps, vocab)
    y = np.array([CLASS_INDEX[c] for c in labels])
    W = np.zeros((len(CLASSES), len(vocab)))
    rng = np.random.default_rng(seed)
    step = 0
    for _ in range(epochs):
        order = rng.permutation(len(y))
        Xe, ye = X[order], y[order]
        for start in range(0, len(y), batch_size):
            eta = lr / (1.0 + lr * reg * step)
            _sgd_step(W, Xe, ye, start, min(start + batch_size, len(y)), reg, eta)
            step += 1
    train_acc = float(np.mean(np.argmax(np.asarray(X @ W.T), axis=1) == y))
    hyper = {"epochs": epochs, "reg": reg, "lr": lr, "batch_size": batch_size}
    return StanceModel(vocab, W, seed, hyper, train_acc)


# --------------------------------------------------------------------------
# evaluation
# --------------------------------------------------------------------------


@dataclass
class EvalReport:
    fold_accuracies: list[float]
    mean: float
    std: float
    confusion: list[list[float]]  # row-normalized, rows = truth, order CLASSES
    confusion_counts: list[list[int]]
    leakage_free: bool
    seed: int
    classes: tuple[str, ...] = CLASSES

    def to_json(self) -> dict:
        return {
            "classes": list(self.classes),
            "fold_accuracies": self.fold_accuracies,
            "mean": self.mean,
            "std": self.std,
            "confusion": self.confusion,
            "confusion_counts": self.confusion_counts,
            "leakage_free": self.leakage_free,
            "seed": self.seed,
        }


def stratified_folds(labels: Sequence[str], k: int, seed: int) -> list[list[int]]:
    """Deal each class's shuffled indices round-robin across ``k`` folds."""
    rng = np.random.default_rng(seed)
    folds: list[list[int]] = [[] for _ in range(k)]
    pos = 0
    for c in CLASSES:
        idx = [i for i, lab in enumerate(labels) if lab == c]
        for i in rng.permutation(idx).tolist() if idx else []:
            folds[pos % k].append(int(i))
            pos += 1
    return [sorted(f) for f in folds]


def cross_validate(data: Sequence[tuple[Tweet, str]], k: int = 20, seed: int = 0, **train_kw) -> EvalReport:
    if k < 2:
        raise ValueError("k must be >= 2")
    if len(data) < k:
        raise ValueError(f"need at least k={k} examples, got {len(data)}")
    labels = [c for _, c in data]
    folds = stratified_folds(labels, k, seed)
    counts = np.zeros((len(CLASSES), len(CLASSES)), dtype=np.int64)
    accs = []
    leak_free = True
    for f, test_idx in enumerate(folds):
        test_set = set(test_idx)
        train_data = [data[i] for i in range(len(data)) if i not in test_set]
        _check_classes([c for _, c in train_data], where=f"training split of fold {f}")
        model = train(train_data, seed=seed + f, **train_kw)
        train_feats = set()
        for t, _ in train_data:
            train_feats.update(extract_features(t))
        if not set(model.vocabulary) <= train_feats:
            leak_free = False
        test = [data[i] for i in test_idx]
        pred = model.predict_many([t for t, _ in test])
        hits = 0
        for (_, truth), guess in zip(test, pred):
            counts[CLASS_INDEX[truth], CLASS_INDEX[guess]] += 1
            hits += truth == guess
        accs.append(hits / len(test))
    row_tot = counts.sum(axis=1, keepdims=True)
    conf = np.divide(counts, row_tot, out=np.zeros(counts.shape), where=row_tot > 0)
    return EvalReport(
        fold_accuracies=accs,
        mean=float(np.mean(accs)),
        std=float(np.std(accs, ddof=1)),
        confusion=conf.tolist(),
        confusion_counts=counts.tolist(),
        leakage_free=leak_free,
        seed=seed,
    )


# --------------------------------------------------------------------------
# gold data and daily series
# --------------------------------------------------------------------------


def read_gold(path: str | Path, corpus: Corpus) -> list[tuple[Tweet, str]]:
    """Join a (tweet_id, class) CSV against the corpus, in file order."""
    by_id = {t.id: t for t in corpus}
    out = []
    with open(path, encoding="utf-8", newline="") as fh:
        for lineno, row in enumerate(csv.DictReader(fh), start=2):
            tid, cls = row.get("tweet_id"), (row.get("class") or "").strip().lower()
            if cls not in CLASS_INDEX:
                raise DataError(f"{path}:{lineno}: unknown class {cls!r}")
            if tid not in by_id:
                raise DataError(f"{path}:{lineno}: tweet {tid!r} not in corpus")
            out.append((by_id[tid], cls))
    return out


def daily_stance_proportions(
    corpus: Corpus,
    model: StanceModel | None = None,
    predictions: Sequence[str] | None = None,
) -> list[tuple[date, tuple[float, float, float] | None]]:
    """Per UTC day from the first to the last corpus day, fractions of
    (pro, neutral, anti) predictions; days without tweets map to None."""
    if len(corpus) == 0:
        raise ValueError("empty corpus")
    if predictions is None:
        if model is None:
            raise ValueError("need a model or precomputed predictions")
        predictions = model.predict_many(corpus.tweets)
    per_day: dict[date, Counter] = {}
    for t, c in zip(corpus, predictions):
        per_day.setdefault(t.day, Counter())[c] += 1
    days = corpus.days
    out = []
    d = days[0]
    while d <= days[-1]:
        cnt = per_day.get(d)
        if not cnt:
            out.append((d, None))
        else:
            n = sum(cnt.values())
            out.append((d, (cnt[PRO] / n, cnt[NEUTRAL] / n, cnt[ANTI] / n)))
        d += timedelta(days=1)
    return out
