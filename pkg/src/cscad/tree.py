"""One-step-ahead tree predictors over lagged windows.

The whitening step removes a variable's own temporal correlation by
subtracting a conditional-mean prediction: a regression tree for continuous
columns, a classification tree (majority leaf) for discrete ones, both grown
greedily CART-style on (previous w values -> next value) pairs. A paired
predictor fits one tree per target column over the joint lagged features of
both columns. What remains after subtraction (or state-difference encoding)
is the residual series the density models consume.
"""

from dataclasses import dataclass, field

import numpy as np

from .exceptions import SeriesTooShort, StateOutOfRange, WindowExceedsSeries
from .schema import CONTINUOUS, DISCRETE

REGRESSION = "regression"
CLASSIFICATION = "classification"


@dataclass
class ResidualSeries:
    """Whitened residuals: real-valued for continuous sources, encoded
    difference states for discrete ones."""

    kind: str
    values: np.ndarray
    alphabet_size: int = 0

    def __len__(self):
        return len(self.values)


def encode_discrete_residual(predicted, actual, m):
    """Map a (predicted, actual) state pair to a residual state id.

    Every correct prediction collapses to the reserved id 0; the m(m-1)
    ordered mismatch pairs get distinct ids 1..m(m-1), so the alphabet has
    exactly m*m - m + 1 states.
    """
    predicted = int(predicted)
    actual = int(actual)
    if not (0 <= predicted < m):
        raise StateOutOfRange(f"predicted state {predicted} outside 0..{m - 1}")
    if not (0 <= actual < m):
        raise StateOutOfRange(f"actual state {actual} outside 0..{m - 1}")
    if predicted == actual:
        return 0
    return 1 + predicted * (m - 1) + (actual if actual < predicted else actual - 1)


def residual_alphabet_size(m):
    return m * m - m + 1


def _encode_states(predicted, actual, m):
    predicted = np.asarray(predicted, dtype=np.int64)
    actual = np.asarray(actual, dtype=np.int64)
    if predicted.size and (predicted.min() < 0 or predicted.max() >= m):
        raise StateOutOfRange(f"predicted states outside 0..{m - 1}")
    if actual.size and (actual.min() < 0 or actual.max() >= m):
        raise StateOutOfRange(f"actual states outside 0..{m - 1}")
    shifted = np.where(actual < predicted, actual, actual - 1)
    return np.where(predicted == actual, 0, 1 + predicted * (m - 1) + shifted)


class _Node:
    __slots__ = ("feature", "threshold", "categories", "left", "right", "value")

    def __init__(self, value):
        self.feature = -1
        self.threshold = 0.0
        self.categories = None
        self.left = None
        self.right = None
        self.value = value


def _sse(total, total_sq, n):
    # squared error around the mean without forming the mean explicitly
    return total_sq - total * total / n


class DecisionTree:
    """Greedy binary CART. Continuous features split on thresholds, discrete
    features on category subsets (groups ordered by target statistic, best
    prefix cut). Regression leaves hold the mean, classification leaves the
    majority class."""

    def __init__(self, kind, max_depth=6, min_leaf=5):
        self.kind = kind
        self.max_depth = max_depth
        self.min_leaf = min_leaf
        self.root_ = None

    def fit(self, X, y, feature_kinds):
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        self.feature_kinds_ = tuple(feature_kinds)
        if self.kind == CLASSIFICATION:
            self.n_classes_ = int(y.max()) + 1 if y.size else 1
        self.root_ = self._grow(X, y, depth=0)
        return self

    def _leaf_value(self, y):
        if self.kind == REGRESSION:
            return float(y.mean())
        counts = np.bincount(y.astype(np.int64), minlength=self.n_classes_)
        return float(np.argmax(counts))

    def _node_cost(self, y):
        n = y.size
        if self.kind == REGRESSION:
            return _sse(y.sum(), (y * y).sum(), n)
        counts = np.bincount(y.astype(np.int64), minlength=self.n_classes_)
        return n - (counts * counts).sum() / n

    def _grow(self, X, y, depth):
        node = _Node(self._leaf_value(y))
        n = y.size
        if depth >= self.max_depth or n < 2 * self.min_leaf:
            return node
        parent_cost = self._node_cost(y)
        if parent_cost <= 1e-12:
            return node
        best = self._best_split(X, y, parent_cost)
        if best is None:
            return node
        feature, threshold, categories, mask = best
        node.feature = feature
        node.threshold = threshold
        node.categories = categories
        node.left = self._grow(X[mask], y[mask], depth + 1)
        node.right = self._grow(X[~mask], y[~mask], depth + 1)
        return node

    def _best_split(self, X, y, parent_cost):
        n = y.size
        best_cost = parent_cost - 1e-12
        best = None
        for j, fk in enumerate(self.feature_kinds_):
            x = X[:, j]
            if fk == CONTINUOUS:
                found = self._split_threshold(x, y)
            else:
                found = self._split_categories(x, y)
            if found is None:
                continue
            cost, threshold, categories = found
            if cost < best_cost:
                best_cost = cost
                if categories is None:
                    mask = x <= threshold
                else:
                    mask = np.isin(x.astype(np.int64), list(categories))
                best = (j, threshold, categories, mask)
        return best

    def _prefix_costs(self, y_ordered):
        # cost of every prefix/suffix partition of the ordered targets
        n = y_ordered.size
        n_left = np.arange(1, n, dtype=np.float64)
        n_right = n - n_left
        if self.kind == REGRESSION:
            cy = np.cumsum(y_ordered)[:-1]
            cy2 = np.cumsum(y_ordered * y_ordered)[:-1]
            left = cy2 - cy * cy / n_left
            right = (cy2[-1] + y_ordered[-1] ** 2 - cy2) - (
                cy[-1] + y_ordered[-1] - cy
            ) ** 2 / n_right
            return left + right
        onehot = np.zeros((n, self.n_classes_))
        onehot[np.arange(n), y_ordered.astype(np.int64)] = 1.0
        cl = np.cumsum(onehot, axis=0)[:-1]
        cr = cl[-1] + onehot[-1] - cl
        left = n_left - (cl * cl).sum(axis=1) / n_left
        right = n_right - (cr * cr).sum(axis=1) / n_right
        return left + right

    def _split_threshold(self, x, y):
        order = np.argsort(x, kind="mergesort")
        xs = x[order]
        if xs[0] == xs[-1]:
            return None
        costs = self._prefix_costs(y[order])
        cut = np.arange(1, x.size)
        valid = (
            (xs[:-1] != xs[1:])
            & (cut >= self.min_leaf)
            & (x.size - cut >= self.min_leaf)
        )
        if not valid.any():
            return None
        costs = np.where(valid, costs, np.inf)
        i = int(np.argmin(costs))
        threshold = 0.5 * (xs[i] + xs[i + 1])
        return float(costs[i]), threshold, None

    def _split_categories(self, x, y):
        codes = x.astype(np.int64)
        cats = np.unique(codes)
        if cats.size < 2:
            return None
        if self.kind == REGRESSION:
            # Breiman ordering: sort categories by mean target
            scores = np.array([y[codes == c].mean() for c in cats])
        else:
            majority = int(np.argmax(np.bincount(y.astype(np.int64), minlength=self.n_classes_)))
            scores = np.array([(y[codes == c] == majority).mean() for c in cats])
        order = np.argsort(scores, kind="mergesort")
        cats = cats[order]
        rank = {c: r for r, c in enumerate(cats)}
        ranked = np.array([rank[c] for c in codes])
        sort_idx = np.argsort(ranked, kind="mergesort")
        y_ordered = y[sort_idx]
        ranked_sorted = ranked[sort_idx]
        costs = self._prefix_costs(y_ordered)
        cut = np.arange(1, x.size)
        valid = (
            (ranked_sorted[:-1] != ranked_sorted[1:])
            & (cut >= self.min_leaf)
            & (x.size - cut >= self.min_leaf)
        )
        if not valid.any():
            return None
        costs = np.where(valid, costs, np.inf)
        i = int(np.argmin(costs))
        left_cats = frozenset(int(c) for c in cats[: ranked_sorted[i] + 1])
        return float(costs[i]), 0.0, left_cats

    def predict(self, X):
        X = np.asarray(X, dtype=np.float64)
        out = np.empty(X.shape[0])
        for i, row in enumerate(X):
            node = self.root_
            while node.left is not None:
                if node.categories is not None:
                    go_left = int(row[node.feature]) in node.categories
                else:
                    go_left = row[node.feature] <= node.threshold
                node = node.left if go_left else node.right
            out[i] = node.value
        return out


@dataclass
class TreePredictor:
    """One fitted tree per target column, all reading the same lagged
    features (w lags of every input column)."""

    trees: tuple
    kinds: tuple
    cardinalities: tuple
    window: int
    max_depth: int = 6
    min_leaf: int = 5

    @property
    def n_columns(self):
        return len(self.trees)


def _as_columns(series):
    series = np.asarray(series, dtype=np.float64)
    if series.ndim == 1:
        series = series[:, None]
    return series


def _lagged_features(series, w, kinds):
    n, c = series.shape
    feats = []
    feat_kinds = []
    for j in range(c):
        for lag in range(1, w + 1):
            feats.append(series[w - lag : n - lag, j])
            feat_kinds.append(kinds[j])
    return np.stack(feats, axis=1), feat_kinds


def fit_tree_predictor(series, w, kinds, cardinalities=None, max_depth=6, min_leaf=5):
    """Fit the predictor(s) mapping each w-step lagged window to the next
    value of every column. `series` is one column or a paired two-column
    sequence; `kinds` gives continuous/discrete per column."""
    if w < 1:
        raise SeriesTooShort(f"window {w} must be >= 1")
    series = _as_columns(series)
    if isinstance(kinds, str):
        kinds = (kinds,)
    kinds = tuple(kinds)
    n, c = series.shape
    if len(kinds) != c:
        raise SeriesTooShort(f"{c} columns but {len(kinds)} kinds")
    if n <= w:
        raise SeriesTooShort(f"sequence of {n} steps cannot feed a window of {w}")
    if cardinalities is None:
        cardinalities = tuple(
            int(series[:, j].max()) + 1 if kinds[j] == DISCRETE else 0 for j in range(c)
        )
    X, feat_kinds = _lagged_features(series, w, kinds)
    trees = []
    for j in range(c):
        kind = REGRESSION if kinds[j] == CONTINUOUS else CLASSIFICATION
        tree = DecisionTree(kind, max_depth=max_depth, min_leaf=min_leaf)
        if kind == CLASSIFICATION:
            tree.fit(X, series[w:, j], feat_kinds)
            tree.n_classes_ = max(tree.n_classes_, cardinalities[j])
        else:
            tree.fit(X, series[w:, j], feat_kinds)
        trees.append(tree)
    return TreePredictor(
        trees=tuple(trees),
        kinds=kinds,
        cardinalities=tuple(cardinalities),
        window=w,
        max_depth=max_depth,
        min_leaf=min_leaf,
    )


def predict_next(predictor, series):
    """Per-column one-step predictions for every complete lagged window."""
    series = _as_columns(series)
    X, _ = _lagged_features(series, predictor.window, predictor.kinds)
    return np.stack([tree.predict(X) for tree in predictor.trees], axis=1)


def whiten(series, predictor):
    """Subtract the predictable part of each column, leaving residuals.

    Continuous columns keep the signed difference; discrete columns encode
    the (predicted, actual) state pair. Output length is input length minus
    the window. Returns one ResidualSeries per column (a bare ResidualSeries
    for single-column input).
    """
    series = _as_columns(series)
    n = series.shape[0]
    w = predictor.window
    if w > n - 1:
        raise WindowExceedsSeries(f"window {w} exceeds series of {n} steps")
    preds = predict_next(predictor, series)
    out = []
    for j, kind in enumerate(predictor.kinds):
        actual = series[w:, j]
        if kind == CONTINUOUS:
            out.append(ResidualSeries(CONTINUOUS, actual - preds[:, j]))
        else:
            m = predictor.cardinalities[j]
            states = _encode_states(np.rint(preds[:, j]), np.rint(actual), m)
            out.append(ResidualSeries(DISCRETE, states, residual_alphabet_size(m)))
    return out[0] if len(out) == 1 else tuple(out)
