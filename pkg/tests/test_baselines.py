import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from vulnlex import artifacts
from vulnlex.baselines import (FitError, best_split, gnb_fit, gnb_predict, logreg_fit,
                               logreg_objective, logreg_predict, mlp_fit, mlp_init,
                               mlp_loss_and_grad, mlp_predict, tree_fit, tree_predict)
from vulnlex.numerics import Rng, gradient_check


def toy(seed, n=40, d=3, shift=1.0):
    rng = Rng(seed)
    y = (rng.random(n) < 0.5).astype(np.int64)
    y[:2] = [0, 1]
    X = rng.normal((n, d)) + shift * y[:, None]
    return X, y


# -- Gaussian naive Bayes ---------------------------------------------------

def test_gnb_symmetric_query_is_half():
    m = gnb_fit([[-1.0], [-1.0], [1.0], [1.0]], [0, 0, 1, 1])
    assert gnb_predict(m, [0.0]) == pytest.approx(0.5, abs=1e-15)


def test_gnb_identical_distributions_give_prior():
    X = np.array([[0.0], [2.0], [0.0], [2.0], [0.0], [2.0]])
    y = np.array([0, 0, 1, 1, 1, 1])
    m = gnb_fit(X, y)
    for q in (-3.0, 0.5, 7.0):
        assert gnb_predict(m, [q]) == pytest.approx(4 / 6, abs=1e-12)
    assert m.priors.sum() == pytest.approx(1.0, abs=1e-12)


def test_gnb_matches_hand_posterior():
    X = [[1.0, 2.0], [2.0, 1.0], [3.0, 3.0], [5.0, 4.0], [6.0, 6.0]]
    y = [0, 0, 0, 1, 1]
    q = (4.0, 3.5)
    eps = 1e-9 * max(np.var([r[0] for r in X]), np.var([r[1] for r in X]))

    def density(rows):
        out = 1.0
        for j in range(2):
            col = [r[j] for r in rows]
            mu = sum(col) / len(col)
            var = sum((c - mu) ** 2 for c in col) / len(col) + eps
            out *= math.exp(-(q[j] - mu) ** 2 / (2 * var)) / math.sqrt(2 * math.pi * var)
        return out

    p0 = 3 / 5 * density(X[:3])
    p1 = 2 / 5 * density(X[3:])
    assert abs(gnb_predict(gnb_fit(X, y), list(q)) - p1 / (p0 + p1)) < 1e-9


def test_gnb_errors_and_variance_floor():
    with pytest.raises(FitError):
        gnb_fit([[1.0], [2.0]], [1, 1])
    with pytest.raises(FitError):
        gnb_fit(np.zeros((2, 0)), [0, 1])
    m = gnb_fit([[1.0, 5.0], [1.0, 7.0]], [0, 1])
    assert np.all(m.variances >= m.epsilon) and m.epsilon > 0


@given(st.integers(0, 2 ** 32))
def test_gnb_sample_order_invariance(seed):
    X, y = toy(seed, n=20)
    perm = Rng(seed).permutation(len(y))
    a, b = gnb_fit(X, y), gnb_fit(X[perm], y[perm])
    np.testing.assert_allclose(a.score(X), b.score(X), rtol=1e-12, atol=1e-15)


# -- decision tree ------------------------------------------------------------

def _gini(labels):
    if not labels:
        return 0.0
    p = sum(labels) / len(labels)
    return 1 - p * p - (1 - p) * (1 - p)


def brute_split(X, y):
    n = len(y)
    parent = _gini(list(y))
    best = None
    for f in range(X.shape[1]):
        vals = sorted(set(X[:, f]))
        for lo, hi in zip(vals, vals[1:]):
            t = (lo + hi) / 2
            left = [y[i] for i in range(n) if X[i, f] <= t]
            right = [y[i] for i in range(n) if X[i, f] > t]
            gain = parent - (len(left) * _gini(left) + len(right) * _gini(right)) / n
            if best is None or gain > best[2] + 1e-12:
                best = (f, t, gain)
    return best


def test_tree_separable_1d():
    m = tree_fit([[0.0], [1.0], [2.0], [3.0]], [0, 0, 1, 1], max_depth=5)
    assert m.root.depth() == 1
    assert m.root.threshold == 1.5
    assert np.array_equal(tree_predict(m, [[0.0], [1.0], [2.0], [3.0]]), [0, 0, 1, 1])


def test_tree_six_point_split_matches_brute_force():
    X = np.array([[1.0, 5.0], [2.0, 3.0], [3.0, 4.0], [4.0, 1.0], [5.0, 6.0], [6.0, 2.0]])
    y = np.array([0, 1, 0, 1, 0, 1])
    f, t, gain = best_split(X, y)
    bf, bt, bgain = brute_split(X, y)
    assert (f, t) == (bf, bt)
    assert gain == pytest.approx(bgain, abs=1e-12)


@given(arrays(np.float64, st.tuples(st.integers(2, 12), st.integers(1, 3)),
              elements=st.integers(-3, 3).map(float)), st.data())
def test_best_split_matches_brute_force(X, data):
    y = np.array(data.draw(st.lists(st.integers(0, 1), min_size=len(X), max_size=len(X))))
    got, want = best_split(X, y), brute_split(X, y)
    if want is None or want[2] <= 1e-12:
        assert got is None
    else:
        assert got[:2] == want[:2]
        assert got[2] == pytest.approx(want[2], abs=1e-12)


@given(st.integers(0, 2 ** 32), st.integers(0, 4))
def test_tree_respects_max_depth(seed, depth):
    X, y = toy(seed, n=30, d=2, shift=0.3)
    m = tree_fit(X, y, max_depth=depth)
    assert m.root.depth() <= depth
    s = tree_predict(m, X)
    assert np.all((s >= 0) & (s <= 1))


def test_tree_single_class_is_leaf():
    m = tree_fit([[1.0], [2.0]], [1, 1])
    assert m.root.is_leaf and tree_predict(m, [5.0]) == 1.0


# -- logistic regression -------------------------------------------------------

def test_logreg_antisymmetric_bias():
    xs = Rng(2).normal((6, 2))
    X = np.vstack([xs, -xs])
    y = np.r_[np.ones(6), np.zeros(6)].astype(int)
    m = logreg_fit(X, y)
    assert abs(m.bias) < 1e-6


def test_logreg_separable_pair():
    m = logreg_fit([[-1.0], [1.0]], [0, 1])
    assert logreg_predict(m, [-1.0]) < 0.5 < logreg_predict(m, [1.0])


def _grid_best(X, y, axes):
    best = np.inf
    for point in itertools.product(*axes):
        w, b = np.array(point[:-1]), point[-1]
        best = min(best, logreg_objective(w, b, X, y))
    return best


def test_logreg_beats_grid_search_1d():
    X = np.array([[-2.0], [-1.0], [0.0], [0.5], [2.0]])
    y = np.array([0, 1, 0, 1, 1])
    m = logreg_fit(X, y)
    grid = np.linspace(-4, 4, 401)
    best = _grid_best(X, y, [grid, grid])
    assert logreg_objective(m.weights, m.bias, X, y) <= best + 1e-4


def test_logreg_beats_grid_search_2d():
    X = np.array([[0.0, 1.0], [1.0, -1.0], [2.0, 0.5], [-1.0, -1.0], [0.5, 2.0], [-2.0, 0.0]])
    y = np.array([1, 0, 1, 0, 1, 0])
    m = logreg_fit(X, y)
    grid = np.linspace(-3, 3, 61)
    best = _grid_best(X, y, [grid, grid, grid])
    assert logreg_objective(m.weights, m.bias, X, y) <= best + 1e-4


@given(st.integers(0, 2 ** 32))
def test_logreg_order_invariant(seed):
    X, y = toy(seed, n=25, d=2)
    perm = Rng(seed).permutation(len(y))
    a, b = logreg_fit(X, y), logreg_fit(X[perm], y[perm])
    np.testing.assert_allclose(a.weights, b.weights, atol=1e-7)
    assert abs(a.bias - b.bias) < 1e-7


# -- MLP -----------------------------------------------------------------------

@given(st.integers(0, 2 ** 32))
def test_mlp_gradient(seed):
    rng = Rng(seed)
    X = rng.normal((5, 3))
    y = (rng.random(5) < 0.5).astype(float)
    params = mlp_init(3, 4, rng)

    def f(p):
        return mlp_loss_and_grad(p, X, y)

    assert gradient_check(f, params) < 1e-6


def test_mlp_zero_weights_score_output_bias():
    X, y = toy(0, n=10)
    m = mlp_fit(X, y, max_iter=1)
    for k in ("w1", "b1", "w2"):
        getattr(m, k)[...] = 0.0
    m.b2[0] = 0.3
    assert np.allclose(mlp_predict(m, X), 1 / (1 + np.exp(-0.3)), atol=1e-15)


def test_mlp_learns_xor():
    X = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
    y = np.array([0, 1, 1, 0])
    solved = [seed for seed in range(5)
              if np.array_equal(mlp_predict(mlp_fit(X, y, seed=seed), X) >= 0.5, y == 1)]
    assert solved


def test_mlp_deterministic_but_order_sensitive():
    X, y = toy(3, n=30)
    a, b = mlp_fit(X, y, max_iter=5), mlp_fit(X, y, max_iter=5)
    assert np.array_equal(a.w1, b.w1) and a.history == b.history
    assert len(a.history) == 5
    perm = Rng(1).permutation(30)
    c = mlp_fit(X[perm], y[perm], max_iter=5)
    assert not np.array_equal(a.w1, c.w1)


def test_mlp_early_stopping():
    X, y = toy(5, n=40, shift=4.0)
    m = mlp_fit(X, y, max_iter=300)
    assert len(m.history) <= 300
    h = m.history
    if len(h) < 300:
        assert min(h[-10:]) > min(h[:-10]) - 1e-4


# -- shared --------------------------------------------------------------------

FITTERS = {
    "gnb": lambda X, y: gnb_fit(X, y),
    "tree": lambda X, y: tree_fit(X, y, 3),
    "logreg": lambda X, y: logreg_fit(X, y),
    "mlp": lambda X, y: mlp_fit(X, y, max_iter=20),
}


@pytest.mark.parametrize("kind", sorted(FITTERS))
def test_scores_in_unit_interval(kind):
    X, y = toy(7)
    m = FITTERS[kind](X, y)
    probe = np.vstack([X, 1e3 * Rng(8).normal((5, 3)), -1e3 * np.ones((1, 3))])
    s = m.score(probe)
    assert s.shape == (len(probe),)
    assert np.all((s >= 0) & (s <= 1))


@pytest.mark.parametrize("kind", sorted(FITTERS))
def test_serialization_round_trip(tmp_path, kind):
    X, y = toy(9)
    m = FITTERS[kind](X, y)
    artifacts.save_model(m, tmp_path / "m.json", {"seed": 0})
    back, meta = artifacts.load_model(tmp_path / "m.json")
    assert back.kind == kind and meta["seed"] == 0
    probe = Rng(10).normal((12, 3))
    assert np.array_equal(back.score(probe), m.score(probe))
    artifacts.save_model(back, tmp_path / "again.json", {"seed": 0})
    assert (tmp_path / "again.json").read_bytes() == (tmp_path / "m.json").read_bytes()
