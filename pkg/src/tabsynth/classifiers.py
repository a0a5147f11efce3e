"""Built-in classifier plugins for the utility evaluation.

Two deterministic baselines implementing the plugin protocol (name,
fit(features, labels), predict_proba(features) with rows summing to 1):
a multinomial logistic regression trained by full-batch gradient
descent from a zero init, and a CART decision tree on Gini impurity
with vectorized split search. Both accept string class labels and keep
a sorted class list so probability columns have a stable order.
"""

from __future__ import annotations

import numpy as np


def _as_labels(y):
    classes = sorted(set(y))
    if len(classes) < 2:
        raise ValueError("single-class training data")
    index = {c: i for i, c in enumerate(classes)}
    return classes, np.array([index[v] for v in y], dtype=np.intp)


class LogisticRegressionClassifier:
    """Multinomial logistic regression, full-batch gradient descent.

    Zero-initialized weights make the fit deterministic; iteration stops
    when the gradient norm drops below tol or after max_iter passes.
    """

    name = "logistic_regression"

    def __init__(self, lr=0.5, max_iter=5000, tol=1e-5):
        self.lr = lr
        self.max_iter = max_iter
        self.tol = tol
        self.classes = None
        self.W = None
        self.b = None

    def fit(self, F, y):
        F = np.asarray(F, dtype=np.float64)
        self.classes, yi = _as_labels(y)
        n, d = F.shape
        k = len(self.classes)
        self.W = np.zeros((d, k))
        self.b = np.zeros(k)
        onehot = np.zeros((n, k))
        onehot[np.arange(n), yi] = 1.0
        for _ in range(self.max_iter):
            z = F @ self.W + self.b
            z -= z.max(axis=1, keepdims=True)
            p = np.exp(z)
            p /= p.sum(axis=1, keepdims=True)
            err = (p - onehot) / n
            gW = F.T @ err
            gb = err.sum(axis=0)
            gnorm = np.sqrt((gW * gW).sum() + (gb * gb).sum())
            if gnorm < self.tol:
                break
            self.W -= self.lr * gW
            self.b -= self.lr * gb
        return self

    def predict_proba(self, F):
        z = np.asarray(F, dtype=np.float64) @ self.W + self.b
        z -= z.max(axis=1, keepdims=True)
        p = np.exp(z)
        return p / p.sum(axis=1, keepdims=True)


class DecisionTreeClassifier:
    """CART with Gini impurity and deterministic tie-breaking.

    Splits scan features in index order and thresholds in value order;
    a candidate replaces the incumbent only when strictly better, so
    equal-quality splits resolve to the lowest feature index and
    threshold. Leaves store class-count distributions.
    """

    name = "decision_tree"

    def __init__(self, max_depth=12, min_samples_split=2):
        self.max_depth = max_depth
        self.min_samples_split = min_samples_split
        self.classes = None
        self.root = None

    def fit(self, F, y):
        F = np.asarray(F, dtype=np.float64)
        self.classes, yi = _as_labels(y)
        self.root = self._grow(F, yi, depth=0)
        return self

    def _leaf(self, yi):
        counts = np.bincount(yi, minlength=len(self.classes)).astype(float)
        return {"leaf": True, "probs": counts / counts.sum()}

    def _best_split(self, F, yi):
        """Vectorized Gini search; returns (feature, threshold) or None."""
        n, d = F.shape
        k = len(self.classes)
        parent = np.bincount(yi, minlength=k).astype(float)
        best = (np.inf, None, None)
        for j in range(d):
            order = np.argsort(F[:, j], kind="stable")
            v = F[order, j]
            labels = yi[order]
            # prefix class counts after each row
            onehot = np.zeros((n, k))
            onehot[np.arange(n), labels] = 1.0
            left = np.cumsum(onehot, axis=0)
            cut = np.nonzero(v[1:] > v[:-1])[0]   # split between i and i+1
            if cut.size == 0:
                continue
            nl = (cut + 1).astype(float)
            nr = n - nl
            lc = left[cut]
            rc = parent[None, :] - lc
            gini_l = 1.0 - ((lc / nl[:, None]) ** 2).sum(axis=1)
            gini_r = 1.0 - ((rc / nr[:, None]) ** 2).sum(axis=1)
            score = (nl * gini_l + nr * gini_r) / n
            i = int(np.argmin(score))          # first minimum: lowest threshold
            if score[i] < best[0] - 1e-15:
                thr = 0.5 * (v[cut[i]] + v[cut[i] + 1])
                best = (score[i], j, thr)
        return None if best[1] is None else (best[1], best[2])

    def _grow(self, F, yi, depth):
        if (depth >= self.max_depth or len(yi) < self.min_samples_split
                or np.unique(yi).size == 1):
            return self._leaf(yi)
        split = self._best_split(F, yi)
        if split is None:
            return self._leaf(yi)
        j, thr = split
        mask = F[:, j] <= thr
        return {"leaf": False, "feature": j, "threshold": thr,
                "left": self._grow(F[mask], yi[mask], depth + 1),
                "right": self._grow(F[~mask], yi[~mask], depth + 1)}

    def predict_proba(self, F):
        F = np.asarray(F, dtype=np.float64)
        out = np.empty((F.shape[0], len(self.classes)))
        for i, row in enumerate(F):
            node = self.root
            while not node["leaf"]:
                node = (node["left"] if row[node["feature"]]
                        <= node["threshold"] else node["right"])
            out[i] = node["probs"]
        return out


def builtin_plugins():
    """Factories for the default plugin set."""
    return [("logistic_regression", LogisticRegressionClassifier),
            ("decision_tree", DecisionTreeClassifier)]
