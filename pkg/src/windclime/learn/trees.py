"""CART trees plus the random forest and gradient boosting built on them.

Trees are stored as flat arrays (``feature``, ``threshold``, ``left``,
``right``, ``value``) so they serialize to JSON without pickling. Leaves have
``feature == -1``; a sample goes left when ``x[feature] <= threshold``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass
class Tree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray  # (n_nodes, n_outputs)

    def apply(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(len(X), dtype=np.int64)
        rows = np.arange(len(X))
        while True:
            feat = self.feature[node]
            inner = feat >= 0
            if not inner.any():
                return node
            go_left = X[rows[inner], feat[inner]] <= self.threshold[node[inner]]
            node[inner] = np.where(go_left, self.left[node[inner]], self.right[node[inner]])

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]

    def to_dict(self) -> dict:
        return {"feature": self.feature.tolist(), "threshold": self.threshold.tolist(),
                "left": self.left.tolist(), "right": self.right.tolist(),
                "value": self.value.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Tree":
        return cls(np.asarray(d["feature"], np.int64), np.asarray(d["threshold"], float),
                   np.asarray(d["left"], np.int64), np.asarray(d["right"], np.int64),
                   np.asarray(d["value"], float).reshape(len(d["feature"]), -1))


def _best_split(X, T, node_order, features, min_leaf):
    """Best (gain, feature, threshold) over ``features`` for one node.

    ``node_order`` is ``(m, f)``: the node's row indices sorted by each
    candidate feature. ``T`` holds one-hot class indicators or a single
    regression column. The score maximised is the usual proxy, the sum over
    children of squared target totals divided by child size.
    """
    m = len(node_order)
    vals = X[node_order, features[None, :]]
    Ts = T[node_order]  # (m, f, k)
    left = np.cumsum(Ts, axis=0)[:-1]
    total = Ts[:, 0, :].sum(axis=0)
    right = total - left
    nl = np.arange(1, m, dtype=float)[:, None]
    nr = m - nl
    score = (left ** 2).sum(axis=2) / nl + (right ** 2).sum(axis=2) / nr
    valid = vals[:-1] < vals[1:]
    if min_leaf > 1:
        valid &= (nl >= min_leaf) & (nr >= min_leaf)
    if not valid.any():
        return None
    score = np.where(valid, score, -np.inf)
    flat = int(np.argmax(score))
    p, f = divmod(flat, len(features))
    gain = score[p, f] - (total ** 2).sum() / m
    thr = 0.5 * (vals[p, f] + vals[p + 1, f])
    if thr >= vals[p + 1, f]:  # midpoint rounded up onto the right value
        thr = vals[p, f]
    return gain, int(features[f]), float(thr)


def build_tree(X, targets, *, leaf_value, max_depth=None, min_samples_leaf=1,
               max_features=None, rng=None, regression=False, n_outputs=1, order=None):
    """Grow a CART tree.

    ``targets`` is ``(n, k)``: one-hot labels or a regression column.
    ``leaf_value(idx)`` returns the stored value (length ``n_outputs``) for
    the samples ``idx`` reaching a leaf. ``order`` may pass a precomputed
    ``argsort(X, axis=0)``.
    """
    n, d = X.shape
    if order is None:
        order = np.argsort(X, axis=0, kind="stable")
    member = np.zeros(n, dtype=bool)
    feature, threshold, left, right, value = [], [], [], [], []

    def new_node():
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(None)
        return len(feature) - 1

    def split_over(idx, feats):
        O = order[:, feats]
        member[:] = False
        member[idx] = True
        node_order = O.T[member[O.T]].reshape(len(feats), len(idx)).T
        return _best_split(X, targets, node_order, feats, min_samples_leaf)

    stack = [(np.arange(n), 0, new_node())]
    while stack:
        idx, depth, node = stack.pop()
        T = targets[idx]
        pure = (not regression and np.count_nonzero(T.sum(axis=0)) <= 1) or \
               (regression and np.ptp(T) == 0)
        split = None
        if not pure and len(idx) >= 2 * min_samples_leaf and (max_depth is None or depth < max_depth):
            if max_features is None or max_features >= d:
                split = split_over(idx, np.arange(d))
            else:
                perm = rng.permutation(d)
                split = split_over(idx, perm[:max_features])
                if split is None:
                    split = split_over(idx, perm[max_features:])
            if split is not None and split[0] <= 1e-12:
                split = None
        if split is None:
            value[node] = np.asarray(leaf_value(idx), float).reshape(n_outputs)
            continue
        _, f, thr = split
        go_left = X[idx, f] <= thr
        feature[node], threshold[node] = f, thr
        value[node] = np.zeros(n_outputs)
        left[node] = new_node()
        right[node] = new_node()
        stack.append((idx[~go_left], depth + 1, right[node]))
        stack.append((idx[go_left], depth + 1, left[node]))

    return Tree(np.array(feature, np.int64), np.array(threshold, float),
                np.array(left, np.int64), np.array(right, np.int64),
                np.vstack(value).reshape(len(feature), n_outputs))


def resolve_max_features(spec, d: int):
    if spec in (None, "all"):
        return None
    if spec == "sqrt":
        return max(1, int(math.sqrt(d)))
    if spec == "log2":
        return max(1, int(math.log2(d)))
    if isinstance(spec, float) and 0 < spec <= 1:
        return max(1, int(spec * d))
    return int(spec)


class RandomForest:
    def __init__(self, trees=None):
        self.trees = trees or []

    def fit(self, X, y, n_classes, hp, rng):
        n, d = X.shape
        onehot = np.eye(n_classes)[y]
        mf = resolve_max_features(hp["max_features"], d)
        self.trees = []
        for _ in range(int(hp["n_trees"])):
            boot = rng.integers(0, n, n) if hp["bootstrap"] else np.arange(n)
            Xb, Yb = X[boot], onehot[boot]

            def leaf(idx, Yb=Yb):
                c = Yb[idx].sum(axis=0)
                return c / c.sum()

            self.trees.append(build_tree(Xb, Yb, leaf_value=leaf, max_depth=hp["max_depth"],
                                         min_samples_leaf=int(hp["min_samples_leaf"]),
                                         max_features=mf, rng=rng, n_outputs=n_classes))
        return self

    def scores(self, X):
        return np.mean([t.predict(X) for t in self.trees], axis=0)

    def to_params(self):
        return {"trees": [t.to_dict() for t in self.trees]}

    @classmethod
    def from_params(cls, p):
        return cls([Tree.from_dict(t) for t in p["trees"]])


def _softmax(F):
    Z = F - F.max(axis=1, keepdims=True)
    E = np.exp(Z)
    return E / E.sum(axis=1, keepdims=True)


class GradientBoosting:
    """Multinomial-deviance boosting, one depth-limited tree per class per round."""

    def __init__(self, init=None, trees=None, learning_rate=0.1):
        self.init = init
        self.trees = trees or []
        self.learning_rate = learning_rate

    def fit(self, X, y, n_classes, hp, rng):
        n = len(X)
        K = n_classes
        Y = np.eye(K)[y]
        prior = np.clip(Y.mean(axis=0), 1e-12, None)
        self.init = np.log(prior)
        self.learning_rate = float(hp["learning_rate"])
        F = np.tile(self.init, (n, 1))
        order = np.argsort(X, axis=0, kind="stable")
        self.trees = []
        for _ in range(int(hp["n_estimators"])):
            P = _softmax(F)
            round_trees = []
            for k in range(K):
                r = Y[:, k] - P[:, k]
                p = P[:, k]

                def leaf(idx, r=r, p=p):
                    num = r[idx].sum() * (K - 1) / K
                    den = (p[idx] * (1 - p[idx])).sum()
                    return 0.0 if abs(den) < 1e-150 else num / den

                tree = build_tree(X, r[:, None], leaf_value=leaf, max_depth=int(hp["max_depth"]),
                                  min_samples_leaf=int(hp["min_samples_leaf"]), regression=True,
                                  order=order)
                F[:, k] += self.learning_rate * tree.predict(X)[:, 0]
                round_trees.append(tree)
            self.trees.append(round_trees)
        return self

    def decision(self, X):
        F = np.tile(self.init, (len(X), 1))
        for round_trees in self.trees:
            for k, t in enumerate(round_trees):
                F[:, k] += self.learning_rate * t.predict(X)[:, 0]
        return F

    def scores(self, X):
        return _softmax(self.decision(X))

    def to_params(self):
        return {"init": self.init.tolist(), "learning_rate": self.learning_rate,
                "trees": [[t.to_dict() for t in rt] for rt in self.trees]}

    @classmethod
    def from_params(cls, p):
        return cls(np.asarray(p["init"], float),
                   [[Tree.from_dict(t) for t in rt] for rt in p["trees"]], p["learning_rate"])
