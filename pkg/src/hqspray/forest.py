"""Random forest of unpruned Gini trees, written from scratch.

Trees are stored as flat arrays in pre-order. Every random draw comes from a
generator derived from ``(rng_seed, tree index)`` so fitting is reproducible
and trees could be grown in any order.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from . import rng as rngmod

FEATURE_NAMES = ("contact_frequency", "degree", "duration")
MODEL_MAGIC = "hqspray-forest 1"
_QUANTUM = 1e9
LEAF = -1


class ModelFormatError(ValueError):
    pass


@dataclass
class Dataset:
    X: np.ndarray  # (n, 3) float64
    y: np.ndarray  # (n,) int64, 0 or 1
    nodes: list[str] = field(default_factory=list)
    days: list[int] = field(default_factory=list)
    feature_names: tuple[str, ...] = FEATURE_NAMES

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64).reshape(-1, len(self.feature_names))
        self.y = np.asarray(self.y, dtype=np.int64)
        if self.X.shape[0] != self.y.shape[0]:
            raise ValueError("X and y row counts differ")
        if not np.isfinite(self.X).all():
            raise ValueError("non-finite feature value")
        if not np.isin(self.y, (0, 1)).all():
            raise ValueError("labels must be 0 or 1")
        if not self.nodes:
            self.nodes = [""] * len(self.y)
        if not self.days:
            self.days = [0] * len(self.y)

    def __len__(self):
        return int(self.y.shape[0])

    def subset(self, idx) -> Dataset:
        idx = list(idx)
        return Dataset(self.X[idx], self.y[idx], [self.nodes[i] for i in idx], [self.days[i] for i in idx],
                       self.feature_names)


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 200
    max_depth: int | None = None
    max_features: int = 2
    min_samples_split: int = 2
    rng_seed: int = 0
    bootstrap: bool = True

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if not 1 <= self.max_features <= len(FEATURE_NAMES):
            raise ValueError(f"max_features must be in [1, {len(FEATURE_NAMES)}]")
        if self.max_depth is not None and self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if self.min_samples_split < 2:
            raise ValueError("min_samples_split must be >= 2")


def gini(counts) -> float:
    total = sum(counts)
    if total <= 0:
        raise ValueError("gini of an empty node")
    return 1.0 - sum((c / total) ** 2 for c in counts)


def _purity_key(c0: int, c1: int) -> float:
    n = c0 + c1
    return float(np.rint((c0 * c0 + c1 * c1) / n * _QUANTUM))


def best_split(X: np.ndarray, y: np.ndarray, features, min_samples_split: int = 2):
    """``(feature, threshold)`` minimising weighted child Gini, or ``None``.

    Thresholds are midpoints between consecutive distinct values. Ties go to
    the lower feature index, then the lower threshold. A split is only
    returned if it strictly lowers impurity.
    """
    n = len(y)
    if n < min_samples_split or n < 2:
        return None
    c1 = int(y.sum())
    parent = _purity_key(n - c1, c1)
    best_key, best = -1.0, None
    for f in sorted(features):
        order = np.argsort(X[:, f], kind="stable")
        vals = np.ascontiguousarray(X[order, f])
        labs = np.ascontiguousarray(y[order], dtype=np.int64)
        key, thr = _kernels.split_scan(vals, labs)
        if key > best_key:
            best_key, best = key, (int(f), float(thr))
    if best is None or best_key <= parent:
        return None
    return best


class Tree:
    """One decision tree in flat pre-order arrays; leaves have ``feature == -1``."""

    def __init__(self):
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.counts: list[tuple[int, int]] = []

    def _add(self, feature=LEAF, threshold=0.0, counts=(0, 0)) -> int:
        self.feature.append(feature)
        self.threshold.append(threshold)
        self.left.append(-1)
        self.right.append(-1)
        self.counts.append(counts)
        return len(self.feature) - 1

    def __len__(self):
        return len(self.feature)

    def depth(self) -> int:
        best = 0
        stack = [(0, 0)]
        while stack:
            i, d = stack.pop()
            best = max(best, d)
            if self.feature[i] != LEAF:
                stack += [(self.left[i], d + 1), (self.right[i], d + 1)]
        return best

    def leaf_of(self, x) -> int:
        i = 0
        while self.feature[i] != LEAF:
            i = self.left[i] if x[self.feature[i]] <= self.threshold[i] else self.right[i]
        return i

    def vote(self, x) -> int:
        c0, c1 = self.counts[self.leaf_of(x)]
        return 1 if c1 >= c0 else 0

    def freeze(self) -> None:
        self._f = np.array(self.feature, dtype=np.int64)
        self._t = np.array(self.threshold, dtype=np.float64)
        self._l = np.array(self.left, dtype=np.int64)
        self._r = np.array(self.right, dtype=np.int64)
        c = np.array(self.counts, dtype=np.int64).reshape(-1, 2)
        self._v = (c[:, 1] >= c[:, 0]).astype(np.int64)

    def votes(self, X: np.ndarray) -> np.ndarray:
        if not hasattr(self, "_f"):
            self.freeze()
        node = np.zeros(X.shape[0], dtype=np.int64)
        rows = np.arange(X.shape[0])
        while True:
            f = self._f[node]
            inner = f != LEAF
            if not inner.any():
                return self._v[node]
            ri = rows[inner]
            ni = node[inner]
            go_left = X[ri, f[inner]] <= self._t[ni]
            node[ri] = np.where(go_left, self._l[ni], self._r[ni])


def fit_tree(X: np.ndarray, y: np.ndarray, cfg: ForestConfig, gen: np.random.Generator) -> Tree:
    """Grow one unpruned tree on all rows of ``(X, y)``."""
    tree = Tree()
    n_feat = X.shape[1]
    root_idx = np.arange(len(y))
    # (row indices, depth, parent node, is-left) ; pre-order via LIFO with right pushed first
    stack = [(root_idx, 0, -1, False)]
    while stack:
        idx, depth, parent, is_left = stack.pop()
        yy = y[idx]
        c1 = int(yy.sum())
        counts = (len(idx) - c1, c1)
        split = None
        if 0 < c1 < len(idx) and len(idx) >= cfg.min_samples_split and (cfg.max_depth is None or depth < cfg.max_depth):
            perm = gen.permutation(n_feat)
            Xi = X[idx]
            split = best_split(Xi, yy, perm[:cfg.max_features], cfg.min_samples_split)
            if split is None and cfg.max_features < n_feat:
                # the drawn features are constant here; keep looking like a full scan would
                split = best_split(Xi, yy, perm[cfg.max_features:], cfg.min_samples_split)
        if split is None:
            node = tree._add(LEAF, 0.0, counts)
        else:
            f, thr = split
            node = tree._add(f, thr, counts)
        if parent >= 0:
            if is_left:
                tree.left[parent] = node
            else:
                tree.right[parent] = node
        if split is not None:
            mask = X[idx, f] <= thr
            stack.append((idx[~mask], depth + 1, node, False))
            stack.append((idx[mask], depth + 1, node, True))
    tree.freeze()
    return tree


class RandomForest:
    def __init__(self, trees: list[Tree], config: ForestConfig, feature_names=FEATURE_NAMES):
        self.trees = trees
        self.config = config
        self.feature_names = tuple(feature_names)

    @classmethod
    def fit(cls, data: Dataset, cfg: ForestConfig = ForestConfig()) -> RandomForest:
        y = data.y
        if len(y) == 0 or y.min() == y.max():
            raise ValueError("degenerate training set: need rows of both classes")
        n = len(y)
        trees = []
        for t in range(cfg.n_trees):
            gen = rngmod.stream(cfg.rng_seed, rngmod.FOREST, t)
            if cfg.bootstrap:
                idx = gen.integers(n, size=n)
                Xb, yb = data.X[idx], y[idx]
            else:
                Xb, yb = data.X, y
            trees.append(fit_tree(Xb, yb, cfg, gen))
        return cls(trees, cfg, data.feature_names)

    def vote_counts(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64).reshape(-1, len(self.feature_names))
        return np.sum([t.votes(X) for t in self.trees], axis=0)

    def predict_many(self, X) -> np.ndarray:
        ones = self.vote_counts(X)
        # a tied vote goes to the high-quality class
        return (2 * ones >= len(self.trees)).astype(np.int64)

    def predict(self, features) -> int:
        return int(self.predict_many([features])[0])

    # ---- persistence ----------------------------------------------------
    def dumps(self) -> str:
        lines = [MODEL_MAGIC, "features " + " ".join(self.feature_names), f"trees {len(self.trees)}"]
        for k, t in enumerate(self.trees):
            lines.append(f"tree {k} {len(t)}")
            for i in range(len(t)):
                if t.feature[i] == LEAF:
                    lines.append(f"leaf {t.counts[i][0]} {t.counts[i][1]}")
                else:
                    lines.append(f"split {t.feature[i]} {t.threshold[i]!r}")
        lines.append("end")
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str, expect_features=FEATURE_NAMES) -> RandomForest:
        lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
        if not lines or lines[0] != MODEL_MAGIC:
            raise ModelFormatError("not a hqspray forest model")
        if len(lines) < 3 or not lines[1].startswith("features "):
            raise ModelFormatError("missing feature list")
        names = tuple(lines[1].split()[1:])
        if expect_features is not None and names != tuple(expect_features):
            raise ModelFormatError(f"model features {names} do not match expected {tuple(expect_features)}")
        try:
            n_trees = int(lines[2].split()[1])
        except (IndexError, ValueError):
            raise ModelFormatError("bad tree count") from None
        pos = 3
        trees = []

        def build(tree: Tree) -> int:
            nonlocal pos
            if pos >= len(lines):
                raise ModelFormatError("truncated tree")
            parts = lines[pos].split()
            pos += 1
            if parts[0] == "leaf" and len(parts) == 3:
                return tree._add(LEAF, 0.0, (int(parts[1]), int(parts[2])))
            if parts[0] == "split" and len(parts) == 3:
                f = int(parts[1])
                if not 0 <= f < len(names):
                    raise ModelFormatError(f"split on unknown feature {f}")
                node = tree._add(f, float(parts[2]))
                tree.left[node] = build(tree)
                tree.right[node] = build(tree)
                return node
            raise ModelFormatError(f"bad node line {lines[pos - 1]!r}")

        for k in range(n_trees):
            if pos >= len(lines) or not lines[pos].startswith(f"tree {k}"):
                raise ModelFormatError(f"missing tree {k}")
            pos += 1
            t = Tree()
            build(t)
            t.freeze()
            trees.append(t)
        if pos >= len(lines) or lines[pos] != "end":
            raise ModelFormatError("missing end marker")
        return cls(trees, ForestConfig(n_trees=n_trees), names)


def train_test_split(data: Dataset, train_fraction: float = 0.7, rng_seed: int = 0) -> tuple[Dataset, Dataset]:
    if not 0 < train_fraction < 1:
        raise ValueError("train_fraction must be in (0, 1)")
    n = len(data)
    perm = rngmod.stream(rng_seed, rngmod.SPLIT).permutation(n)
    n_train = math.ceil(train_fraction * n - 1e-9)
    return data.subset(perm[:n_train].tolist()), data.subset(perm[n_train:].tolist())


@dataclass
class ClassificationMetrics:
    accuracy: float
    precision: dict[int, float]
    recall: dict[int, float]
    f1: dict[int, float]
    support: dict[int, int]
    confusion: list[list[int]]  # confusion[true][pred]


def metrics_from_labels(y_true, y_pred) -> ClassificationMetrics:
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if len(y_true) == 0:
        raise ValueError("empty evaluation set")
    cm = [[int(np.sum((y_true == t) & (y_pred == p))) for p in (0, 1)] for t in (0, 1)]
    prec, rec, f1, sup = {}, {}, {}, {}
    for c in (0, 1):
        tp = cm[c][c]
        pred_c = cm[0][c] + cm[1][c]
        true_c = cm[c][0] + cm[c][1]
        p = tp / pred_c if pred_c else 0.0
        r = tp / true_c if true_c else 0.0
        prec[c], rec[c], sup[c] = p, r, true_c
        f1[c] = 2 * p * r / (p + r) if p + r > 0 else 0.0
    acc = (cm[0][0] + cm[1][1]) / len(y_true)
    return ClassificationMetrics(acc, prec, rec, f1, sup, cm)


def evaluate(forest: RandomForest, test: Dataset) -> ClassificationMetrics:
    return metrics_from_labels(test.y, forest.predict_many(test.X))


def classification_report(m: ClassificationMetrics) -> str:
    total = m.support[0] + m.support[1]
    lines = [f"{'':>12}{'precision':>10}{'recall':>10}{'f1-score':>10}{'support':>10}", ""]
    for c in (0, 1):
        lines.append(f"{float(c):>12.1f}{m.precision[c]:>10.2f}{m.recall[c]:>10.2f}{m.f1[c]:>10.2f}{m.support[c]:>10d}")
    lines += ["", f"{'accuracy':>12}{'':>10}{'':>10}{m.accuracy:>10.2f}{total:>10d}"]
    return "\n".join(lines) + "\n"
