"""Non-recurrent classifiers over pooled embedding vectors.

Each model scores a feature vector with a value in [0, 1] (the estimated
probability of the vulnerable class) and round-trips through the versioned
JSON model format via ``parameters()`` / ``from_parts``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .numerics import AdamState, NonFiniteError, Rng, adam_step, log_sigmoid, sigmoid


class FitError(ValueError):
    pass


class ConvergenceError(RuntimeError):
    def __init__(self, msg: str, grad_norm: float):
        super().__init__(msg)
        self.grad_norm = grad_norm


def _check_xy(X, y, need_both: bool = True) -> tuple[np.ndarray, np.ndarray]:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y, dtype=np.int64).ravel()
    if X.shape[0] == 0:
        raise FitError("empty training set")
    if X.shape[1] == 0:
        raise FitError("zero-length feature vectors")
    if X.shape[0] != y.shape[0]:
        raise FitError(f"{X.shape[0]} feature rows but {y.shape[0]} labels")
    if need_both and len(np.unique(y)) < 2:
        raise FitError("training set needs both classes")
    return X, y


def _rows(x) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    return np.atleast_2d(x), x.ndim == 1


def _arr(a) -> list:
    return np.asarray(a, dtype=np.float64).tolist()


# --------------------------------------------------------------------------
# Gaussian naive Bayes

@dataclass
class GnbModel:
    priors: np.ndarray          # (2,)
    means: np.ndarray           # (2, d)
    variances: np.ndarray       # (2, d), smoothed
    epsilon: float
    kind = "gnb"

    def joint_log_likelihood(self, X: np.ndarray) -> np.ndarray:
        out = np.empty((X.shape[0], 2))
        for c in range(2):
            var = self.variances[c]
            out[:, c] = (np.log(self.priors[c])
                         - 0.5 * np.sum(np.log(2.0 * np.pi * var))
                         - 0.5 * np.sum((X - self.means[c]) ** 2 / var, axis=1))
        return out

    def score(self, x) -> np.ndarray | float:
        X, single = _rows(x)
        jll = self.joint_log_likelihood(X)
        s = sigmoid(jll[:, 1] - jll[:, 0])
        return float(s[0]) if single else s

    def config(self) -> dict:
        return {"var_smoothing": 1e-9}

    def parameters(self) -> dict:
        return {"priors": _arr(self.priors), "means": _arr(self.means),
                "variances": _arr(self.variances), "epsilon": self.epsilon}

    @classmethod
    def from_parts(cls, config: dict, params: dict) -> "GnbModel":
        return cls(np.array(params["priors"]), np.array(params["means"]),
                   np.array(params["variances"]), float(params["epsilon"]))


def gnb_fit(X, y, var_smoothing: float = 1e-9) -> GnbModel:
    """Closed-form fit; variances are smoothed by ``var_smoothing`` times the
    largest per-feature variance of the whole training set."""
    X, y = _check_xy(X, y)
    eps = var_smoothing * float(np.var(X, axis=0).max())
    eps = max(eps, 1e-300)  # all-constant features: keep variances positive
    priors = np.array([np.mean(y == 0), np.mean(y == 1)])
    means = np.stack([X[y == c].mean(axis=0) for c in (0, 1)])
    variances = np.stack([X[y == c].var(axis=0) + eps for c in (0, 1)])
    return GnbModel(priors, means, variances, eps)


def gnb_predict(model: GnbModel, x):
    return model.score(x)


# --------------------------------------------------------------------------
# decision tree

@dataclass
class TreeNode:
    value: float                        # positive fraction of training rows reaching the node
    n_samples: int
    feature: int = -1
    threshold: float = 0.0
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None

    @property
    def is_leaf(self) -> bool:
        return self.left is None

    def depth(self) -> int:
        if self.is_leaf:
            return 0
        return 1 + max(self.left.depth(), self.right.depth())

    def to_dict(self) -> dict:
        d = {"value": self.value, "n_samples": self.n_samples}
        if not self.is_leaf:
            d.update(feature=self.feature, threshold=self.threshold,
                     left=self.left.to_dict(), right=self.right.to_dict())
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TreeNode":
        if "left" not in d:
            return cls(float(d["value"]), int(d["n_samples"]))
        return cls(float(d["value"]), int(d["n_samples"]), int(d["feature"]), float(d["threshold"]),
                   cls.from_dict(d["left"]), cls.from_dict(d["right"]))


def _gini_weighted(pos: np.ndarray, n: np.ndarray) -> np.ndarray:
    # n * gini for a binary node: 2 * pos * neg / n
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(n > 0, 2.0 * pos * (n - pos) / np.maximum(n, 1), 0.0)


def best_split(X: np.ndarray, y: np.ndarray) -> tuple[int, float, float] | None:
    """Best Gini split over all (feature, midpoint) candidates.

    Returns ``(feature, threshold, impurity_decrease)`` or ``None`` when no
    candidate lowers the impurity. Ties go to the lowest feature index, then
    the lowest threshold.
    """
    n = len(y)
    total_pos = float(y.sum())
    parent = float(_gini_weighted(np.array(total_pos), np.array(float(n))))
    best = None
    best_gain = 1e-12
    for f in range(X.shape[1]):
        order = np.argsort(X[:, f], kind="stable")
        xs = X[order, f]
        ys = y[order]
        cut = np.nonzero(xs[1:] > xs[:-1])[0]   # split after position cut
        if cut.size == 0:
            continue
        n_left = (cut + 1).astype(np.float64)
        pos_left = np.cumsum(ys)[cut].astype(np.float64)
        child = _gini_weighted(pos_left, n_left) + _gini_weighted(total_pos - pos_left, n - n_left)
        gains = (parent - child) / n
        k = int(np.argmax(gains))
        if gains[k] > best_gain + 1e-12:
            best_gain = float(gains[k])
            best = (f, float((xs[cut[k]] + xs[cut[k] + 1]) / 2.0), best_gain)
    return best


@dataclass
class TreeModel:
    root: TreeNode
    max_depth: int
    kind = "tree"

    def _leaf_value(self, x: np.ndarray) -> float:
        node = self.root
        while not node.is_leaf:
            node = node.left if x[node.feature] <= node.threshold else node.right
        return node.value

    def score(self, x):
        X, single = _rows(x)
        s = np.array([self._leaf_value(row) for row in X])
        return float(s[0]) if single else s

    def config(self) -> dict:
        return {"max_depth": self.max_depth, "criterion": "gini"}

    def parameters(self) -> dict:
        return {"root": self.root.to_dict()}

    @classmethod
    def from_parts(cls, config: dict, params: dict) -> "TreeModel":
        return cls(TreeNode.from_dict(params["root"]), int(config["max_depth"]))


def tree_fit(X, y, max_depth: int = 5) -> TreeModel:
    X, y = _check_xy(X, y, need_both=False)
    if max_depth < 0:
        raise FitError("max_depth must be non-negative")

    def grow(rows: np.ndarray, depth: int) -> TreeNode:
        ys = y[rows]
        node = TreeNode(float(ys.mean()), len(rows))
        if depth >= max_depth or ys.min() == ys.max():
            return node
        split = best_split(X[rows], ys)
        if split is None:
            return node
        node.feature, node.threshold, _ = split
        go_left = X[rows, node.feature] <= node.threshold
        node.left = grow(rows[go_left], depth + 1)
        node.right = grow(rows[~go_left], depth + 1)
        return node

    return TreeModel(grow(np.arange(len(y)), 0), max_depth)


def tree_predict(model: TreeModel, x):
    return model.score(x)


# --------------------------------------------------------------------------
# logistic regression

@dataclass
class LogRegModel:
    weights: np.ndarray
    bias: float
    C: float = 1.0
    n_iter: int = 0
    kind = "logreg"

    def score(self, x):
        X, single = _rows(x)
        s = sigmoid(X @ self.weights + self.bias)
        return float(s[0]) if single else s

    def config(self) -> dict:
        return {"C": self.C, "penalty": "l2", "fit_intercept": True}

    def parameters(self) -> dict:
        return {"weights": _arr(self.weights), "bias": self.bias, "n_iter": self.n_iter}

    @classmethod
    def from_parts(cls, config: dict, params: dict) -> "LogRegModel":
        return cls(np.array(params["weights"], dtype=np.float64), float(params["bias"]),
                   float(config["C"]), int(params.get("n_iter", 0)))


def logreg_objective(w: np.ndarray, b: float, X: np.ndarray, y: np.ndarray,
                     C: float = 1.0) -> float:
    """``0.5 |w|^2 + C * sum(log-loss)``; the bias is not penalized."""
    z = X @ w + b
    nll = -np.sum(y * log_sigmoid(z) + (1 - y) * log_sigmoid(-z))
    return float(0.5 * w @ w + C * nll)


def logreg_fit(X, y, C: float = 1.0, tol: float = 1e-6, max_iter: int = 1000) -> LogRegModel:
    """Damped Newton descent on the L2-regularized negative log-likelihood."""
    X, y = _check_xy(X, y)
    if X.shape[0] < 2:
        raise FitError("logistic regression needs at least two samples")
    n, d = X.shape
    Xb = np.hstack([X, np.ones((n, 1))])
    theta = np.zeros(d + 1)
    reg = np.ones(d + 1)
    reg[-1] = 0.0
    yf = y.astype(np.float64)

    def objective(t):
        return logreg_objective(t[:-1], t[-1], X, yf, C)

    f = objective(theta)
    gnorm = np.inf
    for it in range(1, max_iter + 1):
        p = sigmoid(Xb @ theta)
        grad = C * Xb.T @ (p - yf) + reg * theta
        gnorm = float(np.linalg.norm(grad))
        if gnorm < tol:
            return LogRegModel(theta[:-1].copy(), float(theta[-1]), C, it - 1)
        hess = C * (Xb.T * (p * (1 - p))) @ Xb + np.diag(reg) + 1e-12 * np.eye(d + 1)
        try:
            direction = -np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            direction = -grad
        step = 1.0
        slope = float(grad @ direction)
        while True:
            cand = theta + step * direction
            fc = objective(cand)
            if fc <= f + 1e-4 * step * slope or step < 1e-12:
                break
            step *= 0.5
        if not np.isfinite(fc):
            raise NonFiniteError("non-finite logistic loss")
        theta, f = cand, fc
    raise ConvergenceError(f"logistic regression did not converge in {max_iter} iterations "
                           f"(gradient norm {gnorm:.3g})", gnorm)


def logreg_predict(model: LogRegModel, x):
    return model.score(x)


# --------------------------------------------------------------------------
# multi-layer perceptron

@dataclass
class MlpModel:
    w1: np.ndarray      # (d, hidden)
    b1: np.ndarray      # (hidden,)
    w2: np.ndarray      # (hidden, 1)
    b2: np.ndarray      # (1,)
    max_iter: int = 300
    history: list[float] = field(default_factory=list)
    kind = "mlp"

    def params(self) -> dict[str, np.ndarray]:
        return {"w1": self.w1, "b1": self.b1, "w2": self.w2, "b2": self.b2}

    def score(self, x):
        X, single = _rows(x)
        s = mlp_forward(self.params(), X)
        return float(s[0]) if single else s

    def config(self) -> dict:
        return {"hidden_units": self.w1.shape[1], "activation": "relu", "max_iter": self.max_iter,
                "solver": "adam"}

    def parameters(self) -> dict:
        return {k: _arr(v) for k, v in self.params().items()}

    @classmethod
    def from_parts(cls, config: dict, params: dict) -> "MlpModel":
        p = {k: np.array(params[k], dtype=np.float64) for k in ("w1", "b1", "w2", "b2")}
        return cls(p["w1"], p["b1"], p["w2"].reshape(-1, 1), p["b2"].reshape(1),
                   int(config["max_iter"]))


def mlp_forward(params: dict[str, np.ndarray], X: np.ndarray) -> np.ndarray:
    h = np.maximum(X @ params["w1"] + params["b1"], 0.0)
    return sigmoid(h @ params["w2"][:, 0] + params["b2"][0])


def mlp_loss_and_grad(params: dict[str, np.ndarray], X: np.ndarray,
                      y: np.ndarray) -> tuple[float, dict[str, np.ndarray]]:
    """Mean log-loss of the network over ``X`` and its parameter gradients."""
    pre = X @ params["w1"] + params["b1"]
    h = np.maximum(pre, 0.0)
    z = h @ params["w2"][:, 0] + params["b2"][0]
    n = X.shape[0]
    loss = float(-np.mean(y * log_sigmoid(z) + (1 - y) * log_sigmoid(-z)))
    dz = (sigmoid(z) - y) / n
    dh = np.outer(dz, params["w2"][:, 0]) * (pre > 0)
    return loss, {
        "w1": X.T @ dh,
        "b1": dh.sum(axis=0),
        "w2": (h.T @ dz)[:, None],
        "b2": np.array([dz.sum()]),
    }


def mlp_init(d: int, hidden: int, rng: Rng) -> dict[str, np.ndarray]:
    a1 = np.sqrt(6.0 / (d + hidden))
    a2 = np.sqrt(6.0 / (hidden + 1))
    return {"w1": rng.uniform(-a1, a1, (d, hidden)), "b1": rng.uniform(-a1, a1, hidden),
            "w2": rng.uniform(-a2, a2, (hidden, 1)), "b2": rng.uniform(-a2, a2, 1)}


def mlp_fit(X, y, max_iter: int = 300, hidden_units: int = 100, seed: int = 0,
            learning_rate: float = 0.001, batch_size: int = 200,
            tol: float = 1e-4, n_iter_no_change: int = 10) -> MlpModel:
    """Adam on mini-batches of ``min(batch_size, n)`` rows.

    Stops after ``max_iter`` epochs, or earlier once the epoch loss has
    failed to improve on the best loss by ``tol`` for ``n_iter_no_change``
    consecutive epochs.
    """
    X, y = _check_xy(X, y)
    yf = y.astype(np.float64)
    n, d = X.shape
    rng = Rng(seed)
    params = mlp_init(d, hidden_units, rng.spawn(1))
    shuffle = rng.spawn(2)
    state = AdamState.for_params(params, learning_rate=learning_rate)
    bs = min(batch_size, n)
    history: list[float] = []
    best = np.inf
    stale = 0
    for epoch in range(max_iter):
        order = shuffle.permutation(n)
        total = 0.0
        for start in range(0, n, bs):
            rows = order[start:start + bs]
            loss, grads = mlp_loss_and_grad(params, X[rows], yf[rows])
            if not np.isfinite(loss):
                raise NonFiniteError(f"non-finite MLP loss at epoch {epoch + 1}")
            adam_step(params, grads, state)
            total += loss * len(rows)
        epoch_loss = total / n
        history.append(epoch_loss)
        if epoch_loss > best - tol:
            stale += 1
        else:
            stale = 0
        best = min(best, epoch_loss)
        if stale >= n_iter_no_change:
            break
    return MlpModel(params["w1"], params["b1"], params["w2"], params["b2"], max_iter, history)


def mlp_predict(model: MlpModel, x):
    return model.score(x)


MODEL_CLASSES = {"gnb": GnbModel, "tree": TreeModel, "logreg": LogRegModel, "mlp": MlpModel}
