"""Bootstrap-aggregated regression trees (CART, squared-error splits).

Trees are grown until leaves are pure or cannot be split further, and every
split considers all features. Among splits of equal variance reduction the
lower feature index wins, then the lower threshold.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numba
import numpy as np

from .base import Model

_REL_TIE = 1e-12


@numba.njit(cache=True, nogil=True)
def _grow(X, y, min_leaf, max_depth):
    n, d = X.shape
    cap = 2 * n + 1
    feature = np.full(cap, -1, np.int32)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, np.int32)
    right = np.full(cap, -1, np.int32)
    value = np.zeros(cap)

    # Row f of order/xs/ys holds sample ids, feature-f values and targets sorted
    # by feature f; each node owns the same contiguous [lo, hi) slice of every
    # row, so split scans read memory sequentially.
    order = np.empty((d, n), np.int64)
    xs = np.empty((d, n))
    ys = np.empty((d, n))
    for f in range(d):
        o = np.argsort(X[:, f], kind="mergesort")
        for k in range(n):
            order[f, k] = o[k]
            xs[f, k] = X[o[k], f]
            ys[f, k] = y[o[k]]
    goes_left = np.zeros(n, np.bool_)
    buf_o = np.empty(n, np.int64)
    buf_x = np.empty(n)
    buf_y = np.empty(n)

    stack_node = np.empty(cap, np.int64)
    stack_lo = np.empty(cap, np.int64)
    stack_hi = np.empty(cap, np.int64)
    stack_depth = np.empty(cap, np.int64)
    stack_node[0] = 0
    stack_lo[0] = 0
    stack_hi[0] = n
    stack_depth[0] = 0
    top = 1
    n_nodes = 1

    while top > 0:
        top -= 1
        node = stack_node[top]
        lo = stack_lo[top]
        hi = stack_hi[top]
        depth = stack_depth[top]
        m = hi - lo

        total = 0.0
        ymin = np.inf
        ymax = -np.inf
        for k in range(lo, hi):
            v = ys[0, k]
            total += v
            if v < ymin:
                ymin = v
            if v > ymax:
                ymax = v
        value[node] = total / m
        if m < 2 * min_leaf or ymin == ymax or (max_depth >= 0 and depth >= max_depth):
            continue

        parent = total * total / m
        best_gain = 0.0
        best_f = -1
        best_thr = 0.0
        best_pos = -1
        for f in range(d):
            acc = 0.0
            for k in range(lo, hi - 1):
                acc += ys[f, k]
                n_left = k - lo + 1
                if n_left < min_leaf or m - n_left < min_leaf:
                    continue
                xa = xs[f, k]
                xb = xs[f, k + 1]
                if xa == xb:
                    continue
                rest = total - acc
                gain = acc * acc / n_left + rest * rest / (m - n_left) - parent
                if gain > best_gain + _REL_TIE * abs(best_gain) and gain > _REL_TIE * abs(parent):
                    best_gain = gain
                    best_f = f
                    thr = 0.5 * (xa + xb)
                    if thr >= xb:
                        thr = xa
                    best_thr = thr
                    best_pos = k
        if best_f < 0:
            continue

        n_left = best_pos - lo + 1
        for k in range(lo, hi):
            goes_left[order[best_f, k]] = k <= best_pos
        for f in range(d):
            a = lo
            b = lo + n_left
            for k in range(lo, hi):
                s = order[f, k]
                if goes_left[s]:
                    buf_o[a] = s
                    buf_x[a] = xs[f, k]
                    buf_y[a] = ys[f, k]
                    a += 1
                else:
                    buf_o[b] = s
                    buf_x[b] = xs[f, k]
                    buf_y[b] = ys[f, k]
                    b += 1
            for k in range(lo, hi):
                order[f, k] = buf_o[k]
                xs[f, k] = buf_x[k]
                ys[f, k] = buf_y[k]

        li = n_nodes
        ri = n_nodes + 1
        n_nodes += 2
        feature[node] = best_f
        threshold[node] = best_thr
        left[node] = li
        right[node] = ri
        # push right first so the left subtree is numbered first
        stack_node[top] = ri
        stack_lo[top] = lo + n_left
        stack_hi[top] = hi
        stack_depth[top] = depth + 1
        top += 1
        stack_node[top] = li
        stack_lo[top] = lo
        stack_hi[top] = lo + n_left
        stack_depth[top] = depth + 1
        top += 1

    return (feature[:n_nodes].copy(), threshold[:n_nodes].copy(), left[:n_nodes].copy(),
            right[:n_nodes].copy(), value[:n_nodes].copy())


@numba.njit(cache=True, nogil=True)
def _apply(X, feature, threshold, left, right, value):
    out = np.empty(X.shape[0])
    for i in range(X.shape[0]):
        node = 0
        while feature[node] >= 0:
            if X[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = value[node]
    return out


class RegressionTree:
    __slots__ = ("feature", "threshold", "left", "right", "value")

    def __init__(self, feature, threshold, left, right, value):
        self.feature = np.ascontiguousarray(feature, dtype=np.int32)
        self.threshold = np.ascontiguousarray(threshold, dtype=np.float64)
        self.left = np.ascontiguousarray(left, dtype=np.int32)
        self.right = np.ascontiguousarray(right, dtype=np.int32)
        self.value = np.ascontiguousarray(value, dtype=np.float64)

    @property
    def n_nodes(self):
        return len(self.feature)

    def predict(self, X):
        X = np.ascontiguousarray(X, dtype=np.float64)
        return _apply(X, self.feature, self.threshold, self.left, self.right, self.value)


def fit_tree(X, y, min_leaf: int = 1, max_depth: int | None = None) -> RegressionTree:
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    return RegressionTree(*_grow(X, y, min_leaf, -1 if max_depth is None else max_depth))


class ForestModel(Model):
    kind = "forest"

    def __init__(self, trees, n_inputs, seed=None, bootstrap=True):
        self.trees = list(trees)
        self.n_inputs = n_inputs
        self.seed = seed
        self.bootstrap = bootstrap

    def predict(self, X, workers: int = 1):
        X = np.ascontiguousarray(self._check(X))
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                preds = list(pool.map(lambda t: t.predict(X), self.trees))
        else:
            preds = [t.predict(X) for t in self.trees]
        # fixed summation order keeps results independent of worker count
        total = np.zeros(len(X))
        for p in preds:
            total += p
        return total / len(self.trees)

    def get_state(self):
        sizes = np.array([t.n_nodes for t in self.trees], dtype=np.int64)
        arrays = {"sizes": sizes}
        for name in RegressionTree.__slots__:
            arrays[name] = np.concatenate([getattr(t, name) for t in self.trees])
        return {"n_inputs": self.n_inputs, "seed": self.seed, "bootstrap": self.bootstrap}, arrays

    @classmethod
    def from_state(cls, meta, arrays):
        bounds = np.concatenate([[0], np.cumsum(arrays["sizes"])])
        trees = [RegressionTree(*(arrays[name][lo:hi] for name in RegressionTree.__slots__))
                 for lo, hi in zip(bounds[:-1], bounds[1:])]
        return cls(trees, meta["n_inputs"], meta["seed"], meta["bootstrap"])


def fit_forest(X, y, n_trees: int = 100, seed: int = 0, bootstrap: bool = True,
               min_leaf: int = 1, max_depth: int | None = None, workers: int = 1) -> ForestModel:
    """Grow ``n_trees`` trees, each on a with-replacement resample of the rows.

    Per-tree seeds are spawned from ``seed``, so the result does not depend on
    ``workers``. ``bootstrap=False`` trains every tree on the rows as given.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    n = len(y)
    if n == 0:
        raise ValueError("no training rows")
    children = np.random.SeedSequence(seed).spawn(n_trees)

    def grow(child):
        if bootstrap:
            idx = np.random.default_rng(child).integers(0, n, n)
            return fit_tree(X[idx], y[idx], min_leaf, max_depth)
        return fit_tree(X, y, min_leaf, max_depth)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            trees = list(pool.map(grow, children))
    else:
        trees = [grow(c) for c in children]
    return ForestModel(trees, X.shape[1], seed, bootstrap)
