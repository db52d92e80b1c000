from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from hqspray.forest import (
    FEATURE_NAMES, Dataset, ForestConfig, ModelFormatError, RandomForest, Tree, best_split, classification_report,
    evaluate, fit_tree, gini, metrics_from_labels, train_test_split,
)
from hqspray import rng as rngmod


def test_gini_values():
    assert gini((2, 2)) == 0.5
    assert gini((4, 0)) == 0.0
    assert gini((3, 1)) == 0.375
    with pytest.raises(ValueError):
        gini((0, 0))


def one_d(values, labels):
    X = np.zeros((len(values), 3))
    X[:, 0] = values
    return X, np.array(labels, dtype=np.int64)


def test_best_split_example():
    X, y = one_d([1, 2, 8, 9], [0, 0, 1, 1])
    assert best_split(X, y, [0]) == (0, 5.0)


def test_best_split_none_cases():
    X, y = one_d([3, 3, 3, 3], [0, 1, 0, 1])
    assert best_split(X, y, [0]) is None
    X, y = one_d([1, 2, 3], [1, 1, 1])
    assert best_split(X, y, [0]) is None


def oracle_split(values, labels):
    """Exhaustive search with exact rational arithmetic."""
    values = [Fraction(v) for v in values]
    n = len(values)
    parent = 1 - sum(Fraction(labels.count(c), n) ** 2 for c in (0, 1))
    best = None
    for t in sorted({(a + b) / 2 for a in set(values) for b in set(values) if a < b
                     and not any(a < v < b for v in values)}):
        left = [l for v, l in zip(values, labels) if v <= t]
        right = [l for v, l in zip(values, labels) if v > t]
        w = sum(Fraction(len(side), n) * (1 - sum(Fraction(side.count(c), len(side)) ** 2 for c in (0, 1)))
                for side in (left, right))
        if best is None or w < best[0]:
            best = (w, t)
    if best is None or best[0] >= parent:
        return None
    return best[1]


@given(st.lists(st.tuples(st.integers(0, 6), st.integers(0, 1)), min_size=2, max_size=8))
def test_best_split_matches_oracle(rows):
    values = [float(v) for v, _ in rows]
    labels = [l for _, l in rows]
    want = oracle_split(values, labels)
    X, y = one_d(values, labels)
    got = best_split(X, y, [0])
    assert (None if got is None else Fraction(got[1])) == want


def test_tie_goes_to_lower_feature():
    X = np.array([[1, 1, 0], [2, 2, 0], [8, 8, 0], [9, 9, 0]], dtype=float)
    y = np.array([0, 0, 1, 1])
    assert best_split(X, y, [1, 0]) == (0, 5.0)


def boxes(n=300, seed=0):
    g = np.random.default_rng(seed)
    half = n // 2
    X = np.vstack([g.uniform(0, 10, (half, 3)), g.uniform(20, 30, (n - half, 3))])
    y = np.array([0] * half + [1] * (n - half))
    return Dataset(X, y)


def test_separable_training_accuracy_one():
    ds = boxes(200)
    f = RandomForest.fit(ds, ForestConfig(n_trees=20))
    assert (f.predict_many(ds.X) == ds.y).all()


def test_single_class_rejected():
    with pytest.raises(ValueError, match="degenerate training set"):
        RandomForest.fit(Dataset(np.ones((5, 3)), np.zeros(5, dtype=int)))


def test_one_tree_forest_equals_tree():
    ds = boxes(60, 3)
    cfg = ForestConfig(n_trees=1, max_features=3, bootstrap=False, rng_seed=7)
    f = RandomForest.fit(ds, cfg)
    t = fit_tree(ds.X, ds.y, cfg, rngmod.stream(7, rngmod.FOREST, 0))
    probe = np.random.default_rng(1).uniform(-5, 35, (200, 3))
    assert (f.predict_many(probe) == t.votes(probe)).all()


def test_leaves_pure_or_identical():
    g = np.random.default_rng(5)
    X = g.integers(0, 4, (120, 3)).astype(float)
    y = g.integers(0, 2, 120)
    cfg = ForestConfig(n_trees=5)
    for k in range(5):
        gen = rngmod.stream(0, rngmod.FOREST, k)
        idx = gen.integers(120, size=120)
        Xb, yb = X[idx], y[idx]
        tree = fit_tree(Xb, yb, cfg, gen)
        leaves = {}
        for i in range(len(yb)):
            leaves.setdefault(tree.leaf_of(Xb[i]), []).append(i)
        for rows in leaves.values():
            assert len(set(yb[rows])) == 1 or len({tuple(Xb[r]) for r in rows}) == 1


def test_max_depth_respected():
    ds = boxes(100)
    ds.y[::7] = 1 - ds.y[::7]
    f = RandomForest.fit(ds, ForestConfig(n_trees=5, max_depth=2))
    assert max(t.depth() for t in f.trees) <= 2


def _forest_with_votes(ones, total):
    trees = []
    for k in range(total):
        t = Tree()
        t._add(counts=(0, 1) if k < ones else (1, 0))
        t.freeze()
        trees.append(t)
    return RandomForest(trees, ForestConfig(n_trees=total))


@pytest.mark.parametrize("ones,total,want", [(120, 200, 1), (100, 200, 1), (0, 200, 0), (99, 200, 0)])
def test_majority_and_tie(ones, total, want):
    assert _forest_with_votes(ones, total).predict([1.0, 2.0, 3.0]) == want


def test_fit_is_deterministic():
    ds = boxes(100, 2)
    ds.y[::5] = 1 - ds.y[::5]
    a = RandomForest.fit(ds, ForestConfig(n_trees=15, rng_seed=3)).dumps()
    assert a == RandomForest.fit(ds, ForestConfig(n_trees=15, rng_seed=3)).dumps()
    assert a != RandomForest.fit(ds, ForestConfig(n_trees=15, rng_seed=4)).dumps()


def test_split_sizes_and_determinism():
    ds10 = Dataset(np.arange(30.0).reshape(10, 3), np.arange(10) % 2)
    tr, te = train_test_split(ds10)
    assert (len(tr), len(te)) == (7, 3)
    tr2, _ = train_test_split(ds10)
    assert tr.X.tolist() == tr2.X.tolist()
    big = Dataset(np.zeros((522, 3)), np.zeros(522, dtype=int))
    assert [len(p) for p in train_test_split(big)] == [366, 156]


def test_metrics_arithmetic():
    # class 1: TP=3, FP=1, FN=2
    y_true = [1, 1, 1, 1, 1, 0, 0]
    y_pred = [1, 1, 1, 0, 0, 1, 0]
    m = metrics_from_labels(y_true, y_pred)
    assert m.precision[1] == 0.75 and m.recall[1] == 0.6
    assert round(m.f1[1], 4) == 0.6667
    perfect = metrics_from_labels([0, 1, 1], [0, 1, 1])
    assert perfect.accuracy == 1.0 and perfect.f1 == {0: 1.0, 1: 1.0}


@given(st.lists(st.tuples(st.integers(0, 1), st.integers(0, 1)), min_size=1, max_size=60))
def test_metric_identities(pairs):
    t = [a for a, _ in pairs]
    p = [b for _, b in pairs]
    m = metrics_from_labels(t, p)
    tp = sum(1 for a, b in pairs if a == b == 1)
    tn = sum(1 for a, b in pairs if a == b == 0)
    assert m.accuracy == (tp + tn) / len(pairs)
    for c in (0, 1):
        pr, rc = m.precision[c], m.recall[c]
        assert m.f1[c] == (2 * pr * rc / (pr + rc) if pr + rc > 0 else 0.0)
        assert m.support[c] == t.count(c)


def test_report_shape():
    m = metrics_from_labels([0, 0, 1, 1, 1], [0, 1, 1, 1, 0])
    lines = classification_report(m).splitlines()
    assert lines[0].split() == ["precision", "recall", "f1-score", "support"]
    assert lines[2].split()[0] == "0.0" and lines[3].split()[0] == "1.0"
    assert lines[-1].split()[0] == "accuracy"


def test_model_round_trip_and_checks():
    ds = boxes(80, 9)
    f = RandomForest.fit(ds, ForestConfig(n_trees=7))
    text = f.dumps()
    g = RandomForest.loads(text)
    probe = np.random.default_rng(0).uniform(0, 30, (100, 3))
    assert (g.predict_many(probe) == f.predict_many(probe)).all()
    assert g.dumps() == text
    swapped = text.replace("features " + " ".join(FEATURE_NAMES), "features degree contact_frequency duration")
    with pytest.raises(ModelFormatError):
        RandomForest.loads(swapped)
    with pytest.raises(ModelFormatError):
        RandomForest.loads(text.replace("features " + " ".join(FEATURE_NAMES), "features a b"))
    with pytest.raises(ModelFormatError):
        RandomForest.loads("garbage")


def test_single_tree_flag():
    ds = boxes(40)
    assert len(RandomForest.fit(ds, ForestConfig(n_trees=1)).trees) == 1


def test_evaluate_on_boxes():
    tr, te = train_test_split(boxes(300, 1))
    assert evaluate(RandomForest.fit(tr, ForestConfig(n_trees=30)), te).accuracy >= 0.95
