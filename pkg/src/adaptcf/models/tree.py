"""CART classification trees (weighted Gini) with leaf-box extraction."""

from dataclasses import dataclass, field

import numpy as np

from .base import Family, Model, ModelError, as_matrix, frozen_array

LEAF = -1


@dataclass(frozen=True, eq=False)
class DecisionTree(Model):
    """Binary tree stored as parallel arrays in left-to-right pre-order.

    Internal node ``i`` sends ``x`` left when ``x[feature[i]] <= threshold[i]``.
    Leaves have ``feature == -1`` and carry a class label in ``value``.
    The training set is kept so that adaptation can refit on old and new data.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    n_features: int
    n_classes: int = 2
    max_depth: int = 6
    min_samples_leaf: int = 1
    train_X: np.ndarray = None
    train_y: np.ndarray = None
    train_w: np.ndarray = None
    info: dict = field(default_factory=dict, compare=False, repr=False)

    family = Family.DECISION_TREE

    def __post_init__(self):
        for name, dt in (("feature", np.int64), ("left", np.int64), ("right", np.int64),
                         ("value", np.int64), ("threshold", np.float64)):
            object.__setattr__(self, name, frozen_array(getattr(self, name), dt))
        n = self.feature.size
        if n == 0 or any(getattr(self, a).shape != (n,) for a in ("threshold", "left", "right", "value")):
            raise ModelError("tree arrays must be non-empty and of equal length")
        internal = self.feature != LEAF
        if np.any(self.feature[internal] >= self.n_features) or np.any(self.feature[internal] < 0):
            raise ModelError("split feature index out of range")
        if not np.all(np.isfinite(self.threshold[internal])):
            raise ModelError("split thresholds must be finite")
        # children after their parent and each node reachable once => finite tree
        parents = np.flatnonzero(internal)
        kids = np.concatenate([self.left[internal], self.right[internal]])
        if (np.any(kids <= np.tile(parents, 2)) or np.any(kids >= n)
                or len(set(kids.tolist())) != kids.size or kids.size != n - 1):
            raise ModelError("malformed tree: children must be distinct later nodes")
        leaves = ~internal
        if np.any(self.value[leaves] < 0) or np.any(self.value[leaves] >= self.n_classes):
            raise ModelError("leaf labels must be class indices")
        if self.train_X is None:
            object.__setattr__(self, "train_X", frozen_array(np.zeros((0, self.n_features))))
            object.__setattr__(self, "train_y", frozen_array(np.zeros(0), np.int64))
            object.__setattr__(self, "train_w", frozen_array(np.zeros(0)))
        else:
            object.__setattr__(self, "train_X", frozen_array(np.reshape(self.train_X, (-1, self.n_features))))
            object.__setattr__(self, "train_y", frozen_array(self.train_y, np.int64))
            object.__setattr__(self, "train_w", frozen_array(self.train_w))

    @property
    def differentiable(self) -> bool:
        return False

    def _leaf_index(self, x) -> int:
        i = 0
        while self.feature[i] != LEAF:
            i = self.left[i] if x[self.feature[i]] <= self.threshold[i] else self.right[i]
        return int(i)

    def predict_batch(self, X) -> np.ndarray:
        X = as_matrix(X, self.n_features)
        node = np.zeros(X.shape[0], dtype=np.int64)
        rows = np.arange(X.shape[0])
        active = self.feature[node] != LEAF
        while np.any(active):
            r, n = rows[active], node[active]
            go_left = X[r, self.feature[n]] <= self.threshold[n]
            node[r] = np.where(go_left, self.left[n], self.right[n])
            active = self.feature[node] != LEAF
        return self.value[node].astype(np.int64)

    def leaf_boxes(self):
        """Yield ``(node, label, lower, upper)`` per leaf in left-to-right order.

        A leaf holds exactly the points with ``lower < x <= upper``
        coordinate-wise (bounds may be infinite).
        """
        stack = [(0, np.full(self.n_features, -np.inf), np.full(self.n_features, np.inf))]
        while stack:
            node, lo, hi = stack.pop()
            f = self.feature[node]
            if f == LEAF:
                yield node, int(self.value[node]), lo, hi
                continue
            t = self.threshold[node]
            lhi = hi.copy()
            lhi[f] = min(hi[f], t)
            rlo = lo.copy()
            rlo[f] = max(lo[f], t)
            stack.append((self.right[node], rlo, hi))
            stack.append((self.left[node], lo, lhi))

    def params(self) -> dict:
        return {
            "feature": self.feature.tolist(), "threshold": self.threshold.tolist(),
            "left": self.left.tolist(), "right": self.right.tolist(),
            "value": self.value.tolist(), "n_classes": self.n_classes,
            "max_depth": self.max_depth, "min_samples_leaf": self.min_samples_leaf,
            "train_X": self.train_X.tolist(), "train_y": self.train_y.tolist(),
            "train_w": self.train_w.tolist(),
        }


def _best_split(X, y, w, n_classes, min_leaf):
    """Lowest weighted-Gini split as ``(feature, threshold, impurity)``; first wins ties."""
    n, d = X.shape
    onehot = np.zeros((n, n_classes))
    onehot[np.arange(n), y] = w
    total = onehot.sum(axis=0)
    W = total.sum()
    best = None
    for f in range(d):
        order = np.argsort(X[:, f], kind="stable")
        xs = X[order, f]
        cum = np.cumsum(onehot[order], axis=0)[:-1]
        pos = np.arange(1, n)
        ok = (xs[:-1] < xs[1:]) & (pos >= min_leaf) & (n - pos >= min_leaf)
        if not ok.any():
            continue
        wl = cum.sum(axis=1)
        wr = W - wl
        rc = total - cum
        with np.errstate(divide="ignore", invalid="ignore"):
            gl = np.where(wl > 0, wl - (cum ** 2).sum(axis=1) / wl, 0.0)
            gr = np.where(wr > 0, wr - (rc ** 2).sum(axis=1) / wr, 0.0)
        imp = np.where(ok, gl + gr, np.inf)
        i = int(np.argmin(imp))
        if best is None or imp[i] < best[2]:
            lo, hi = xs[i], xs[i + 1]
            t = 0.5 * (lo + hi)
            if not lo <= t < hi:
                t = lo
            best = (f, float(t), float(imp[i]))
    return best


def fit_tree(X, y, sample_weights=None, n_classes=None, max_depth=6, min_samples_leaf=1):
    """Grow a CART tree; zero-weight samples are dropped before growing."""
    w = np.ones(len(y)) if sample_weights is None else np.asarray(sample_weights, dtype=np.float64)
    keep = w > 0
    X, y, w = X[keep], np.asarray(y, dtype=np.int64)[keep], w[keep]
    if len(y) == 0:
        raise ModelError("zero total sample weight")
    n_classes = int(y.max()) + 1 if n_classes is None else n_classes
    if max_depth < 0 or min_samples_leaf < 1:
        raise ModelError("max_depth must be >= 0 and min_samples_leaf >= 1")
    nodes = []

    def grow(idx, depth):
        me = len(nodes)
        counts = np.bincount(y[idx], weights=w[idx], minlength=n_classes)
        label = int(np.argmax(counts))
        nodes.append([LEAF, 0.0, LEAF, LEAF, label])
        if depth >= max_depth or np.count_nonzero(counts) <= 1 or idx.size < 2 * min_samples_leaf:
            return me
        split = _best_split(X[idx], y[idx], w[idx], n_classes, min_samples_leaf)
        if split is None:
            return me
        f, t, imp = split
        parent = counts.sum() - (counts ** 2).sum() / counts.sum()
        if parent - imp <= 1e-12 * counts.sum():
            return me
        mask = X[idx, f] <= t
        nodes[me][:2] = [f, t]
        nodes[me][2] = grow(idx[mask], depth + 1)
        nodes[me][3] = grow(idx[~mask], depth + 1)
        return me

    grow(np.arange(len(y)), 0)
    cols = list(zip(*nodes))
    return DecisionTree(cols[0], cols[1], cols[2], cols[3], cols[4], n_features=X.shape[1],
                        n_classes=n_classes, max_depth=max_depth,
                        min_samples_leaf=min_samples_leaf, train_X=X, train_y=y, train_w=w)
