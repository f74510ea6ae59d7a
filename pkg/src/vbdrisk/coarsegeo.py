"""Zone-level text geolocation: binary-TF / IDF / l2 bag of unigrams feeding a
multinomial logistic regression trained by full-batch gradient descent."""

from __future__ import annotations

import csv
import json
import logging
import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy import sparse

from .errors import FormatError, ValidationError

log = logging.getLogger(__name__)

_TOKEN = re.compile(r"[^\W_]+")


def tokenize(text: str) -> list[str]:
    return _TOKEN.findall(text.lower())


@dataclass
class ZoneModel:
    vocabulary: dict[str, int]
    idf: np.ndarray
    zone_labels: list[str]
    weights: np.ndarray  # (n_zones, n_terms)
    intercepts: np.ndarray
    prior: np.ndarray
    l2: float = 1.0
    epochs_run: int = 0

    def to_json(self) -> dict:
        return {
            "vocabulary": self.vocabulary,
            "idf": self.idf.tolist(),
            "zone_labels": self.zone_labels,
            "weights": self.weights.tolist(),
            "intercepts": self.intercepts.tolist(),
            "prior": self.prior.tolist(),
            "l2": self.l2,
            "epochs_run": self.epochs_run,
        }

    @classmethod
    def from_json(cls, d: dict) -> "ZoneModel":
        return cls({k: int(v) for k, v in d["vocabulary"].items()}, np.asarray(d["idf"], float),
                   list(d["zone_labels"]), np.asarray(d["weights"], float),
                   np.asarray(d["intercepts"], float), np.asarray(d["prior"], float),
                   float(d.get("l2", 1.0)), int(d.get("epochs_run", 0)))

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh, sort_keys=True)

    @classmethod
    def load(cls, path: str | Path) -> "ZoneModel":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))


def _rows(texts: Iterable[str], vocabulary: dict[str, int], idf: np.ndarray) -> sparse.csr_matrix:
    indptr = [0]
    indices: list[int] = []
    data: list[float] = []
    for text in texts:
        cols = sorted({vocabulary[t] for t in tokenize(text or "") if t in vocabulary})
        vals = idf[cols] if cols else np.zeros(0)
        norm = math.sqrt(float(np.dot(vals, vals)))
        if norm > 0:
            indices.extend(cols)
            data.extend((vals / norm).tolist())
        indptr.append(len(indices))
    return sparse.csr_matrix((np.asarray(data, float), np.asarray(indices, np.int64),
                              np.asarray(indptr, np.int64)), shape=(len(indptr) - 1, len(idf)))


def featurize(text: str, model: ZoneModel) -> dict[int, float]:
    """Sparse unit vector (column -> value); empty dict when no token is in vocabulary."""
    row = _rows([text], model.vocabulary, model.idf)
    return dict(zip(row.indices.tolist(), row.data.tolist()))


def transform(texts: Sequence[str], model: ZoneModel) -> sparse.csr_matrix:
    return _rows(texts, model.vocabulary, model.idf)


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _loss_grad(W, b, X, Y, l2, n):
    P = _softmax(X @ W.T + b)
    logp = np.log(np.clip((P * Y).sum(axis=1), 1e-300, None))
    loss = -logp.mean() + 0.5 * l2 / n * float((W * W).sum())
    G = (P - Y) / n
    gW = np.asarray(X.T @ G).T + l2 / n * W
    gb = G.sum(axis=0)
    return loss, gW, gb


def fit(corpus: Sequence[tuple[str, str]], l2: float = 1.0, max_epochs: int = 1000,
        grad_tol: float = 1e-6, lr: float | None = None, return_losses: bool = False):
    """Train on ``(text, zone_label)`` pairs.

    The step size defaults to ``1.9/L`` for the gradient Lipschitz bound ``L`` of the
    loss with unit-norm features, so the loss never increases between epochs.
    """
    labels = sorted({z for _, z in corpus})
    if len(labels) < 2:
        raise ValidationError("zone corpus needs at least two distinct labels")
    n = len(corpus)
    docs = [set(tokenize(t or "")) for t, _ in corpus]
    vocab_terms = sorted(set().union(*docs))
    vocabulary = {t: i for i, t in enumerate(vocab_terms)}
    df = np.zeros(len(vocab_terms))
    for d in docs:
        for t in d:
            df[vocabulary[t]] += 1
    idf = np.log((1.0 + n) / (1.0 + df)) + 1.0

    X = _rows((t for t, _ in corpus), vocabulary, idf)
    lab_idx = {z: k for k, z in enumerate(labels)}
    y = np.array([lab_idx[z] for _, z in corpus])
    Y = np.zeros((n, len(labels)))
    Y[np.arange(n), y] = 1.0
    prior = Y.mean(axis=0)

    W = np.zeros((len(labels), len(vocab_terms)))
    b = np.log(np.clip(prior, 1e-12, None))
    b -= b.mean()
    step = lr if lr is not None else 1.9 / (1.0 + l2 / n)
    losses = []
    epoch = 0
    for epoch in range(1, max_epochs + 1):
        loss, gW, gb = _loss_grad(W, b, X, Y, l2, n)
        losses.append(loss)
        gnorm = math.sqrt(float((gW * gW).sum() + (gb * gb).sum()))
        if gnorm < grad_tol:
            break
        W -= step * gW
        b -= step * gb
    else:
        log.info("zone classifier stopped at max_epochs=%d (grad norm %.3g)", max_epochs, gnorm)
    model = ZoneModel(vocabulary, idf, labels, W, b, prior, l2, epoch)
    return (model, losses) if return_losses else model


def predict_proba(text: str, model: ZoneModel) -> np.ndarray:
    x = transform([text], model)
    if x.nnz == 0:
        return model.prior.copy()
    return _softmax(np.asarray(x @ model.weights.T).ravel() + model.intercepts)


def predict_zone(text: str, model: ZoneModel) -> tuple[str, float]:
    """Most probable zone and its probability; empty or all-unknown text falls
    back to the training prior."""
    p = predict_proba(text, model)
    k = int(np.argmax(p))  # labels are sorted, so ties go to the smaller label
    return model.zone_labels[k], float(p[k])


def predict_many(texts: Sequence[str], model: ZoneModel) -> list[tuple[str, float]]:
    X = transform(texts, model)
    P = _softmax(np.asarray(X @ model.weights.T) + model.intercepts)
    empty = np.diff(X.indptr) == 0
    P[empty] = model.prior
    ks = P.argmax(axis=1)
    return [(model.zone_labels[k], float(P[i, k])) for i, k in enumerate(ks)]


def load_corpus(path: str | Path) -> list[tuple[str, str]]:
    """Read ``zone_label,text`` CSV into ``(text, zone_label)`` pairs."""
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["zone_label", "text"]:
            raise FormatError(f"{path}: expected header zone_label,text")
        for row in reader:
            if len(row) != 2:
                raise FormatError(f"{path}: malformed row {row!r}")
            out.append((row[1], row[0]))
    return out
