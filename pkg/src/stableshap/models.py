"""Built-in predictors and derivative machinery.

Provides differentiable models (logistic regression, tanh MLP) with exact
gradients/Hessians, a piecewise-constant tree ensemble, and finite-difference
fallbacks for models without analytic derivatives. Large finite-difference
steps (one marginal standard deviation per numeric feature) are deliberate:
they probe model behavior across substantial feature changes rather than
approximating an infinitesimal derivative.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import (
    CapabilityError,
    ConfigurationError,
    Dataset,
    DimensionError,
    _frozen_array,
)

try:  # optional: routing through many trees is much faster compiled
    from numba import njit as _njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - depends on environment
    _HAVE_NUMBA = False


if _HAVE_NUMBA:

    @_njit(cache=True)
    def _route_trees(points, feature, threshold, left, right, value, offsets, out):
        for t in range(offsets.size):
            root = offsets[t]
            for i in range(points.shape[0]):
                node = root
                while feature[node] >= 0:
                    if points[i, feature[node]] < threshold[node]:
                        node = left[node]
                    else:
                        node = right[node]
                out[t, i] = value[node]


def _sigmoid(z):
    out = np.empty_like(z, dtype=float)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


@dataclass(frozen=True)
class LogisticRegressionModel:
    """p(x) = sigmoid(w.x + b); output always in (0, 1)."""

    weights: np.ndarray
    bias: float

    def __post_init__(self):
        object.__setattr__(self, "weights", _frozen_array(self.weights))
        object.__setattr__(self, "bias", float(self.bias))

    @property
    def d(self) -> int:
        return self.weights.size

    def predict(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        return _sigmoid(points @ self.weights + self.bias)

    def gradient(self, x: np.ndarray) -> np.ndarray:
        p = float(self.predict(x)[0])
        return p * (1.0 - p) * self.weights

    def hessian(self, x: np.ndarray) -> np.ndarray:
        p = float(self.predict(x)[0])
        return p * (1.0 - p) * (1.0 - 2.0 * p) * np.outer(self.weights, self.weights)


@dataclass(frozen=True)
class MlpModel:
    """One-hidden-layer perceptron: tanh hidden activation, sigmoid output."""

    w1: np.ndarray  # (h, d)
    b1: np.ndarray  # (h,)
    w2: np.ndarray  # (h,)
    b2: float

    def __post_init__(self):
        w1 = _frozen_array(self.w1)
        b1 = _frozen_array(self.b1)
        w2 = _frozen_array(self.w2)
        if w1.ndim != 2 or b1.shape != (w1.shape[0],) or w2.shape != (w1.shape[0],):
            raise DimensionError("MLP layer shapes do not chain")
        object.__setattr__(self, "w1", w1)
        object.__setattr__(self, "b1", b1)
        object.__setattr__(self, "w2", w2)
        object.__setattr__(self, "b2", float(self.b2))

    @property
    def d(self) -> int:
        return self.w1.shape[1]

    def predict(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        hidden = np.tanh(points @ self.w1.T + self.b1)
        return _sigmoid(hidden @ self.w2 + self.b2)

    def gradient(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float).ravel()
        a1 = np.tanh(self.w1 @ x + self.b1)
        p = float(_sigmoid(np.array([self.w2 @ a1 + self.b2]))[0])
        # dz2/dx, then chain through the output sigmoid
        u = self.w1.T @ (self.w2 * (1.0 - a1**2))
        return p * (1.0 - p) * u

    def hessian(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float).ravel()
        a1 = np.tanh(self.w1 @ x + self.b1)
        p = float(_sigmoid(np.array([self.w2 @ a1 + self.b2]))[0])
        sp = p * (1.0 - p)
        spp = sp * (1.0 - 2.0 * p)
        u = self.w1.T @ (self.w2 * (1.0 - a1**2))
        # d(u)/dx: tanh'' = -2 tanh (1 - tanh^2)
        inner = self.w1.T * (-2.0 * self.w2 * a1 * (1.0 - a1**2))
        h = spp * np.outer(u, u) + sp * (inner @ self.w1)
        return 0.5 * (h + h.T)


@dataclass(frozen=True)
class DecisionTree:
    """Axis-aligned binary tree stored as flat node arrays.

    ``left[i] == -1`` marks a leaf; routing is strict less-than: a point goes
    left iff x[feature] < threshold, so threshold ties route right.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    def __post_init__(self):
        for name, dtype in (
            ("feature", np.int64),
            ("left", np.int64),
            ("right", np.int64),
        ):
            object.__setattr__(self, name, _frozen_array(getattr(self, name), dtype=dtype))
        object.__setattr__(self, "threshold", _frozen_array(self.threshold))
        object.__setattr__(self, "value", _frozen_array(self.value))

    def predict(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        idx = np.zeros(points.shape[0], dtype=np.int64)
        while True:
            internal = self.left[idx] >= 0
            if not np.any(internal):
                break
            rows = np.flatnonzero(internal)
            nodes = idx[rows]
            go_left = points[rows, self.feature[nodes]] < self.threshold[nodes]
            idx[rows] = np.where(go_left, self.left[nodes], self.right[nodes])
        return self.value[idx]


@dataclass(frozen=True)
class TreeEnsembleModel:
    """Mean of per-tree outputs; piecewise constant in the inputs."""

    trees: tuple[DecisionTree, ...]

    def __post_init__(self):
        object.__setattr__(self, "trees", tuple(self.trees))
        if not self.trees:
            raise ValueError("ensemble needs at least one tree")
        object.__setattr__(self, "_packed", None)

    def _pack(self):
        """Concatenate all trees into shared node arrays so one routing loop
        advances every (tree, sample) pair simultaneously."""
        packed = self._packed
        if packed is None:
            offsets = np.cumsum([0] + [t.feature.size for t in self.trees[:-1]])
            shift = lambda arr, off: np.where(arr >= 0, arr + off, arr)
            packed = (
                np.concatenate([t.feature for t in self.trees]),
                np.concatenate([t.threshold for t in self.trees]),
                np.concatenate([shift(t.left, o) for t, o in zip(self.trees, offsets)]),
                np.concatenate([shift(t.right, o) for t, o in zip(self.trees, offsets)]),
                np.concatenate([t.value for t in self.trees]),
                offsets,
            )
            object.__setattr__(self, "_packed", packed)
        return packed

    def predict(self, points: np.ndarray) -> np.ndarray:
        points = np.ascontiguousarray(np.atleast_2d(np.asarray(points, dtype=float)))
        feature, threshold, left, right, value, offsets = self._pack()
        n = points.shape[0]
        if _HAVE_NUMBA:
            leaf_values = np.empty((len(self.trees), n))
            _route_trees(points, feature, threshold, left, right, value, offsets, leaf_values)
            return leaf_values.mean(axis=0)
        idx = np.broadcast_to(offsets[:, None].astype(np.int32), (len(self.trees), n)).copy()
        rows = np.arange(n)
        while True:
            feat = feature[idx]
            internal = feat >= 0  # leaves carry feature == -1
            if not internal.any():
                break
            vals = points[rows, np.where(internal, feat, 0)]
            go_left = vals < threshold[idx]
            nxt = np.where(go_left, left[idx], right[idx]).astype(np.int32)
            idx = np.where(internal, nxt, idx)
        return value[idx].mean(axis=0)

    def leaf_range(self) -> tuple[float, float]:
        lo = min(t.value[t.left < 0].min() for t in self.trees)
        hi = max(t.value[t.left < 0].max() for t in self.trees)
        return float(lo), float(hi)


@dataclass(frozen=True)
class FiniteDifferenceConfig:
    """Step sizes for derivative stencils, plus one-hot column groups.

    Numeric steps default to the marginal standard deviation of each feature.
    Columns in ``categorical_groups`` are differenced by swapping the active
    level instead of stepping.
    """

    step_sizes: np.ndarray
    categorical_groups: tuple[tuple[int, ...], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "step_sizes", _frozen_array(self.step_sizes))
        object.__setattr__(
            self,
            "categorical_groups",
            tuple(tuple(int(i) for i in g) for g in self.categorical_groups),
        )

    @property
    def d(self) -> int:
        return self.step_sizes.size

    def categorical_columns(self) -> set[int]:
        return {i for g in self.categorical_groups for i in g}

    def numeric_columns(self) -> list[int]:
        cat = self.categorical_columns()
        return [i for i in range(self.d) if i not in cat]

    @classmethod
    def from_dataset(cls, dataset: Dataset, scale: float = 1.0) -> "FiniteDifferenceConfig":
        steps = dataset.rows.std(axis=0, ddof=1) * scale
        cat = {i for g in dataset.categorical_groups for i in g}
        steps = np.array([1.0 if i in cat else steps[i] for i in range(dataset.d)])
        return cls(step_sizes=steps, categorical_groups=dataset.categorical_groups)


def analytic_gradient(model, x: np.ndarray) -> np.ndarray:
    """Exact gradient of predict at x, for models that support it."""
    if not hasattr(model, "gradient"):
        raise CapabilityError(f"{type(model).__name__} has no analytic gradient")
    return np.asarray(model.gradient(np.asarray(x, dtype=float).ravel()))


def analytic_hessian(model, x: np.ndarray) -> np.ndarray:
    """Exact symmetric Hessian of predict at x, for models that support it."""
    if not hasattr(model, "hessian"):
        raise CapabilityError(f"{type(model).__name__} has no analytic Hessian")
    return np.asarray(model.hessian(np.asarray(x, dtype=float).ravel()))


def _check_steps(cfg: FiniteDifferenceConfig):
    numeric = cfg.numeric_columns()
    if numeric and np.any(cfg.step_sizes[numeric] <= 0):
        raise ConfigurationError("finite-difference step sizes must be positive")


def _active_level(x, group):
    active = [c for c in group if x[c] == 1.0]
    if len(active) != 1:
        raise ConfigurationError(f"point is not one-hot on columns {group}")
    return active[0]


def fd_gradient(model, x: np.ndarray, cfg: FiniteDifferenceConfig) -> np.ndarray:
    """Central-difference gradient with per-feature steps.

    For a one-hot group the pseudo-partial of an inactive column c is
    f(x with level c active) - f(x), and 0 for the active column: the
    prediction change from switching the category.
    """
    x = np.asarray(x, dtype=float).ravel()
    if x.size != cfg.d:
        raise DimensionError("x length does not match step_sizes")
    _check_steps(cfg)
    numeric = cfg.numeric_columns()
    points = [x]
    for j in numeric:
        h = cfg.step_sizes[j]
        up, dn = x.copy(), x.copy()
        up[j] += h
        dn[j] -= h
        points.append(up)
        points.append(dn)
    swaps: list[tuple[int, int]] = []  # (column, row offset in batch)
    for group in cfg.categorical_groups:
        a = _active_level(x, group)
        for c in group:
            if c == a:
                continue
            swapped = x.copy()
            swapped[list(group)] = 0.0
            swapped[c] = 1.0
            swaps.append((c, len(points)))
            points.append(swapped)
    preds = model.predict(np.array(points))
    f0 = preds[0]
    grad = np.zeros(cfg.d)
    for pos, j in enumerate(numeric):
        up, dn = preds[1 + 2 * pos], preds[2 + 2 * pos]
        grad[j] = (up - dn) / (2.0 * cfg.step_sizes[j])
    for c, row in swaps:
        grad[c] = preds[row] - f0
    return grad


def fd_hessian(model, x: np.ndarray, cfg: FiniteDifferenceConfig) -> np.ndarray:
    """Second-order central-difference Hessian, symmetrized.

    Diagonal entries use (f(x+h) - 2 f(x) + f(x-h)) / h^2 and off-diagonals
    the four-point stencil. Rows and columns of one-hot columns are zeroed:
    the swap derivative has no meaningful second-order interaction.
    """
    x = np.asarray(x, dtype=float).ravel()
    if x.size != cfg.d:
        raise DimensionError("x length does not match step_sizes")
    _check_steps(cfg)
    numeric = cfg.numeric_columns()
    h = cfg.step_sizes
    points = [x]
    for j in numeric:
        up, dn = x.copy(), x.copy()
        up[j] += h[j]
        dn[j] -= h[j]
        points.append(up)
        points.append(dn)
    pair_rows = {}
    for ai, j in enumerate(numeric):
        for k in numeric[ai + 1 :]:
            base = len(points)
            for sj, sk in ((1, 1), (1, -1), (-1, 1), (-1, -1)):
                p = x.copy()
                p[j] += sj * h[j]
                p[k] += sk * h[k]
                points.append(p)
            pair_rows[(j, k)] = base
    preds = model.predict(np.array(points))
    f0 = preds[0]
    hess = np.zeros((cfg.d, cfg.d))
    for pos, j in enumerate(numeric):
        up, dn = preds[1 + 2 * pos], preds[2 + 2 * pos]
        hess[j, j] = (up - 2.0 * f0 + dn) / h[j] ** 2
    for (j, k), base in pair_rows.items():
        pp, pm, mp, mm = preds[base : base + 4]
        hess[j, k] = hess[k, j] = (pp - pm - mp + mm) / (4.0 * h[j] * h[k])
    return 0.5 * (hess + hess.T)


@dataclass(frozen=True)
class FiniteDifferenceModel:
    """Wraps a predictor, adding gradient/hessian via finite differences."""

    model: object
    config: FiniteDifferenceConfig

    def predict(self, points: np.ndarray) -> np.ndarray:
        return self.model.predict(points)

    def gradient(self, x: np.ndarray) -> np.ndarray:
        return fd_gradient(self.model, x, self.config)

    def hessian(self, x: np.ndarray) -> np.ndarray:
        return fd_hessian(self.model, x, self.config)


def with_finite_differences(model, cfg: FiniteDifferenceConfig) -> FiniteDifferenceModel:
    return FiniteDifferenceModel(model=model, config=cfg)


# ---------------------------------------------------------------------------
# Training. Quality is not the point here; determinism is. Every trainer is a
# pure function of (X, y, seed).
# ---------------------------------------------------------------------------


def train_logistic(X: np.ndarray, y: np.ndarray, l2: float = 1e-6, n_iter: int = 40) -> LogisticRegressionModel:
    """Newton's method on the ridge-regularized logistic loss."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, d = X.shape
    Xa = np.hstack([X, np.ones((n, 1))])
    w = np.zeros(d + 1)
    for _ in range(n_iter):
        p = _sigmoid(Xa @ w)
        grad = Xa.T @ (p - y) / n + l2 * w
        weights = p * (1.0 - p)
        hess = (Xa.T * weights) @ Xa / n + l2 * np.eye(d + 1)
        step = np.linalg.solve(hess, grad)
        w = w - step
        if np.max(np.abs(step)) < 1e-10:
            break
    return LogisticRegressionModel(weights=w[:d], bias=w[d])


def train_mlp(
    X: np.ndarray,
    y: np.ndarray,
    hidden: int = 50,
    seed: int = 0,
    n_iter: int = 400,
    lr: float = 0.5,
) -> MlpModel:
    """Full-batch gradient descent on the cross-entropy loss."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, d = X.shape
    rng = np.random.default_rng(seed)
    w1 = rng.normal(0.0, 1.0 / np.sqrt(d), size=(hidden, d))
    b1 = np.zeros(hidden)
    w2 = rng.normal(0.0, 1.0 / np.sqrt(hidden), size=hidden)
    b2 = 0.0
    for _ in range(n_iter):
        z1 = X @ w1.T + b1
        a1 = np.tanh(z1)
        p = _sigmoid(a1 @ w2 + b2)
        delta = (p - y) / n
        g_w2 = a1.T @ delta
        g_b2 = delta.sum()
        back = np.outer(delta, w2) * (1.0 - a1**2)
        g_w1 = back.T @ X
        g_b1 = back.sum(axis=0)
        w1 -= lr * g_w1
        b1 -= lr * g_b1
        w2 -= lr * g_w2
        b2 -= lr * g_b2
    return MlpModel(w1=w1, b1=b1, w2=w2, b2=b2)


def _best_split(X, y, idx, feats, min_leaf):
    best = None  # (gain, feature, threshold)
    y_node = y[idx]
    total = y_node.sum()
    n = idx.size
    base = total * total / n
    for f in feats:
        xs = X[idx, f]
        order = np.argsort(xs, kind="stable")
        xs_sorted = xs[order]
        ys_sorted = y_node[order]
        csum = np.cumsum(ys_sorted)
        # candidate split after position i (0-based), left has i+1 points
        counts = np.arange(1, n)
        valid = (xs_sorted[1:] != xs_sorted[:-1]) & (counts >= min_leaf) & (n - counts >= min_leaf)
        if not np.any(valid):
            continue
        left_sum = csum[:-1]
        gain = left_sum**2 / counts + (total - left_sum) ** 2 / (n - counts) - base
        gain = np.where(valid, gain, -np.inf)
        pos = int(np.argmax(gain))
        if gain[pos] <= 1e-12:
            continue
        thr = 0.5 * (xs_sorted[pos] + xs_sorted[pos + 1])
        if best is None or gain[pos] > best[0]:
            best = (gain[pos], f, thr)
    return best


def _grow_tree(X, y, idx, rng, max_depth, min_leaf, n_feats):
    feature, threshold, left, right, value = [], [], [], [], []

    def add_node():
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(0.0)
        return len(feature) - 1

    def build(node_idx, depth):
        node = add_node()
        y_node = y[node_idx]
        value[node] = float(y_node.mean())
        if depth >= max_depth or node_idx.size < 2 * min_leaf or np.all(y_node == y_node[0]):
            return node
        d = X.shape[1]
        feats = np.sort(rng.choice(d, size=n_feats, replace=False)) if n_feats < d else np.arange(d)
        best = _best_split(X, y, node_idx, feats, min_leaf)
        if best is None:
            return node
        _, f, thr = best
        go_left = X[node_idx, f] < thr
        feature[node] = int(f)
        threshold[node] = float(thr)
        left[node] = build(node_idx[go_left], depth + 1)
        right[node] = build(node_idx[~go_left], depth + 1)
        return node

    build(idx, 0)
    return DecisionTree(
        feature=np.array(feature),
        threshold=np.array(threshold),
        left=np.array(left),
        right=np.array(right),
        value=np.array(value),
    )


def train_tree_ensemble(
    X: np.ndarray,
    y: np.ndarray,
    n_trees: int = 50,
    max_depth: int = 8,
    min_leaf: int = 5,
    max_features: str | int = "sqrt",
    seed: int = 0,
) -> TreeEnsembleModel:
    """Random-forest-style ensemble: greedy CART on bootstrap resamples."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, d = X.shape
    if max_features == "sqrt":
        n_feats = max(1, int(np.sqrt(d)))
    elif max_features == "all":
        n_feats = d
    else:
        n_feats = int(max_features)
    trees = []
    for t in range(n_trees):
        rng = np.random.default_rng(np.random.SeedSequence((seed, t)))
        boot = rng.integers(0, n, size=n)
        trees.append(_grow_tree(X, y, boot, rng, max_depth, min_leaf, n_feats))
    return TreeEnsembleModel(trees=tuple(trees))


# ---------------------------------------------------------------------------
# JSON persistence for model parameters.
# ---------------------------------------------------------------------------


def model_to_dict(model) -> dict:
    if isinstance(model, LogisticRegressionModel):
        return {"kind": "logistic", "weights": model.weights.tolist(), "bias": model.bias}
    if isinstance(model, MlpModel):
        return {
            "kind": "mlp",
            "w1": model.w1.tolist(),
            "b1": model.b1.tolist(),
            "w2": model.w2.tolist(),
            "b2": model.b2,
        }
    if isinstance(model, TreeEnsembleModel):
        return {
            "kind": "tree_ensemble",
            "trees": [
                {
                    "feature": t.feature.tolist(),
                    "threshold": t.threshold.tolist(),
                    "left": t.left.tolist(),
                    "right": t.right.tolist(),
                    "value": t.value.tolist(),
                }
                for t in model.trees
            ],
        }
    raise CapabilityError(f"cannot serialize {type(model).__name__}")


def model_from_dict(payload: dict):
    kind = payload.get("kind")
    if kind == "logistic":
        return LogisticRegressionModel(weights=np.array(payload["weights"]), bias=payload["bias"])
    if kind == "mlp":
        return MlpModel(
            w1=np.array(payload["w1"]),
            b1=np.array(payload["b1"]),
            w2=np.array(payload["w2"]),
            b2=payload["b2"],
        )
    if kind == "tree_ensemble":
        trees = tuple(
            DecisionTree(
                feature=np.array(t["feature"]),
                threshold=np.array(t["threshold"]),
                left=np.array(t["left"]),
                right=np.array(t["right"]),
                value=np.array(t["value"]),
            )
            for t in payload["trees"]
        )
        return TreeEnsembleModel(trees=trees)
    raise ValueError(f"unknown model kind {kind!r}")


def save_model(model, path: str | Path):
    Path(path).write_text(json.dumps(model_to_dict(model), sort_keys=True))


def load_model(path: str | Path):
    return model_from_dict(json.loads(Path(path).read_text()))
