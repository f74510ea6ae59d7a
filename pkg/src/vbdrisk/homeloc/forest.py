"""CART trees (Gini) and a bootstrap random forest, written for the
prune stage: a record survives when at least one tree calls it a home."""

from __future__ import annotations

import math

import numpy as np

from ..errors import ValidationError


class DecisionTree:
    def __init__(self, max_features: int | None = None, max_depth: int | None = None,
                 min_samples_leaf: int = 1):
        self.max_features = max_features
        self.max_depth = max_depth
        self.min_samples_leaf = min_samples_leaf

    def fit(self, X: np.ndarray, y: np.ndarray, rng: np.random.Generator) -> "DecisionTree":
        n, d = X.shape
        k = self.max_features or d
        feature, threshold, left, right, value = [], [], [], [], []

        def new_node():
            feature.append(-1)
            threshold.append(0.0)
            left.append(-1)
            right.append(-1)
            value.append(0.0)
            return len(feature) - 1

        root = new_node()
        stack = [(root, np.arange(n), 0)]
        while stack:
            node, idx, depth = stack.pop()
            ys = y[idx]
            value[node] = float(ys.mean())
            if (len(idx) < 2 * self.min_samples_leaf or value[node] in (0.0, 1.0)
                    or (self.max_depth is not None and depth >= self.max_depth)):
                continue
            split = self._best_split(X[idx], ys, rng.choice(d, size=min(k, d), replace=False))
            if split is None:
                continue
            f, thr = split
            mask = X[idx, f] <= thr
            feature[node] = int(f)
            threshold[node] = float(thr)
            lnode, rnode = new_node(), new_node()
            left[node], right[node] = lnode, rnode
            stack.append((rnode, idx[~mask], depth + 1))
            stack.append((lnode, idx[mask], depth + 1))

        self.feature = np.array(feature, dtype=np.int64)
        self.threshold = np.array(threshold)
        self.left = np.array(left, dtype=np.int64)
        self.right = np.array(right, dtype=np.int64)
        self.value = np.array(value)
        return self

    def _best_split(self, X, y, feats):
        n = len(y)
        msl = self.min_samples_leaf
        total_pos = y.sum()
        best = None
        best_score = math.inf
        for f in feats:
            order = np.argsort(X[:, f], kind="stable")
            xs = X[order, f]
            cum = np.cumsum(y[order])
            nl = np.arange(1, n)
            valid = xs[1:] > xs[:-1]
            valid &= (nl >= msl) & (n - nl >= msl)
            if not valid.any():
                continue
            pl = cum[:-1]
            pr = total_pos - pl
            nr = n - nl
            gl = 1.0 - (pl / nl) ** 2 - (1 - pl / nl) ** 2
            gr = 1.0 - (pr / nr) ** 2 - (1 - pr / nr) ** 2
            score = np.where(valid, nl * gl + nr * gr, np.inf)
            i = int(np.argmin(score))
            if score[i] < best_score - 1e-12:
                best_score = score[i]
                best = (int(f), 0.5 * (xs[i] + xs[i + 1]))
        return best

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(len(X), dtype=np.int64)
        rows = np.arange(len(X))
        while True:
            inner = self.feature[node] >= 0
            if not inner.any():
                break
            f = np.where(inner, self.feature[node], 0)
            go_left = X[rows, f] <= self.threshold[node]
            node = np.where(inner, np.where(go_left, self.left[node], self.right[node]), node)
        return self.value[node]

    def to_json(self) -> dict:
        return {"feature": self.feature.tolist(), "threshold": self.threshold.tolist(),
                "left": self.left.tolist(), "right": self.right.tolist(), "value": self.value.tolist()}

    @classmethod
    def from_json(cls, d: dict) -> "DecisionTree":
        t = cls()
        t.feature = np.array(d["feature"], dtype=np.int64)
        t.threshold = np.array(d["threshold"], dtype=float)
        t.left = np.array(d["left"], dtype=np.int64)
        t.right = np.array(d["right"], dtype=np.int64)
        t.value = np.array(d["value"], dtype=float)
        return t


class RandomForest:
    def __init__(self, n_trees: int = 100, max_features: int | None = None,
                 max_depth: int | None = None, min_samples_leaf: int = 1, seed: int = 0):
        self.n_trees = n_trees
        self.max_features = max_features
        self.max_depth = max_depth
        self.min_samples_leaf = min_samples_leaf
        self.seed = seed
        self.trees: list[DecisionTree] = []

    def fit(self, X: np.ndarray, y: np.ndarray) -> "RandomForest":
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        if len(np.unique(y)) < 2:
            raise ValidationError("forest training data must contain both home and non-home records")
        k = self.max_features or max(1, int(math.sqrt(X.shape[1])))
        rng = np.random.default_rng(self.seed)
        self.trees = []
        for _ in range(self.n_trees):
            trng = np.random.default_rng(int(rng.integers(2**63)))
            boot = trng.integers(0, len(y), len(y))
            tree = DecisionTree(k, self.max_depth, self.min_samples_leaf)
            self.trees.append(tree.fit(X[boot], y[boot], trng))
        return self

    def votes(self, X: np.ndarray) -> np.ndarray:
        """(n_trees, n) boolean matrix of per-tree home votes."""
        X = np.asarray(X, dtype=float)
        return np.array([t.predict_proba(X) > 0.5 for t in self.trees]).reshape(len(self.trees), len(X))

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return np.mean([t.predict_proba(np.asarray(X, float)) for t in self.trees], axis=0)

    def keep_mask(self, X: np.ndarray) -> np.ndarray:
        return self.votes(X).any(axis=0)

    def to_json(self) -> dict:
        return {"n_trees": self.n_trees, "max_features": self.max_features,
                "max_depth": self.max_depth, "min_samples_leaf": self.min_samples_leaf,
                "seed": self.seed, "trees": [t.to_json() for t in self.trees]}

    @classmethod
    def from_json(cls, d: dict) -> "RandomForest":
        f = cls(d["n_trees"], d["max_features"], d["max_depth"], d["min_samples_leaf"], d["seed"])
        f.trees = [DecisionTree.from_json(t) for t in d["trees"]]
        return f
