"""Small dense binary classifiers in numpy: five dense layers with dropout
after each of the first four, sigmoid head, trained on cross-entropy with
SGD (momentum) or RMSProp.  All randomness comes from the seed."""

from __future__ import annotations

import numpy as np

DEFAULT_WIDTHS = (64, 64, 32, 16)


def _sigmoid(z):
    return np.where(z >= 0, 1.0 / (1.0 + np.exp(-np.abs(z))), np.exp(-np.abs(z)) / (1.0 + np.exp(-np.abs(z))))


class DenseNet:
    def __init__(self, n_in: int, widths=DEFAULT_WIDTHS, dropout: float = 0.3, seed: int = 0):
        self.sizes = [n_in, *widths, 1]
        self.dropout = dropout
        self.seed = seed
        rng = np.random.default_rng(seed)
        self.W = []
        self.b = []
        for a, c in zip(self.sizes[:-1], self.sizes[1:]):
            self.W.append(rng.normal(0.0, np.sqrt(2.0 / a), size=(a, c)))
            self.b.append(np.zeros(c))

    @property
    def n_dense(self) -> int:
        return len(self.W)

    @property
    def n_dropout(self) -> int:
        return len(self.W) - 1

    def _forward(self, X, rng=None):
        acts = [X]
        masks = []
        h = X
        for k in range(self.n_dense - 1):
            h = np.maximum(h @ self.W[k] + self.b[k], 0.0)
            if rng is not None and self.dropout > 0:
                m = (rng.random(h.shape) >= self.dropout) / (1.0 - self.dropout)
                h = h * m
            else:
                m = None
            masks.append(m)
            acts.append(h)
        z = (h @ self.W[-1] + self.b[-1]).ravel()
        return z, acts, masks

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        z, _, _ = self._forward(np.asarray(X, dtype=float))
        return _sigmoid(z)

    def fit(self, X: np.ndarray, y: np.ndarray, optimizer: str = "sgd", epochs: int = 60,
            batch_size: int = 32, lr: float | None = None, pos_weight: float = 1.0) -> list[float]:
        """Minibatch training; returns the mean loss per epoch."""
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        rng = np.random.default_rng(self.seed + 1)
        if optimizer == "sgd":
            lr = 0.01 if lr is None else lr
            vel = [np.zeros_like(w) for w in self.W] + [np.zeros_like(b) for b in self.b]
        elif optimizer == "rmsprop":
            lr = 1e-3 if lr is None else lr
            sq = [np.zeros_like(w) for w in self.W] + [np.zeros_like(b) for b in self.b]
        else:
            raise ValueError(f"unknown optimizer {optimizer!r}")
        params = self.W + self.b
        history = []
        n = len(y)
        for _ in range(epochs):
            order = rng.permutation(n)
            total = 0.0
            for start in range(0, n, batch_size):
                idx = order[start:start + batch_size]
                xb, yb = X[idx], y[idx]
                wb = np.where(yb > 0.5, pos_weight, 1.0)
                z, acts, masks = self._forward(xb, rng)
                p = _sigmoid(z)
                eps = 1e-12
                total += float(-(wb * (yb * np.log(p + eps) + (1 - yb) * np.log(1 - p + eps))).sum())
                g = (wb * (p - yb) / len(idx))[:, None]
                gW = [None] * self.n_dense
                gb = [None] * self.n_dense
                for k in range(self.n_dense - 1, -1, -1):
                    gW[k] = acts[k].T @ g
                    gb[k] = g.sum(axis=0)
                    if k > 0:
                        g = g @ self.W[k].T
                        if masks[k - 1] is not None:
                            g = g * masks[k - 1]
                        g = g * (acts[k] > 0)
                grads = gW + gb
                if optimizer == "sgd":
                    for j, (prm, gr) in enumerate(zip(params, grads)):
                        vel[j] = 0.9 * vel[j] - lr * gr
                        prm += vel[j]
                else:
                    for j, (prm, gr) in enumerate(zip(params, grads)):
                        sq[j] = 0.9 * sq[j] + 0.1 * gr * gr
                        prm -= lr * gr / (np.sqrt(sq[j]) + 1e-7)
            history.append(total / n)
        return history

    def to_json(self) -> dict:
        return {"sizes": self.sizes, "dropout": self.dropout, "seed": self.seed,
                "W": [w.tolist() for w in self.W], "b": [b.tolist() for b in self.b]}

    @classmethod
    def from_json(cls, d: dict) -> "DenseNet":
        net = cls.__new__(cls)
        net.sizes = list(d["sizes"])
        net.dropout = float(d["dropout"])
        net.seed = int(d["seed"])
        net.W = [np.array(w, dtype=float).reshape(a, c)
                 for w, a, c in zip(d["W"], net.sizes[:-1], net.sizes[1:])]
        net.b = [np.array(b, dtype=float) for b in d["b"]]
        return net
