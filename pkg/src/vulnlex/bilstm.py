"""Stacked bidirectional LSTM classifier with hand-written BPTT.

Layout: input dropout, then ``layers`` bidirectional LSTM layers each
followed by dropout, then a single sigmoid unit reading the concatenation of
the last forward state and the first backward state. Trained with Adam on
mean squared error.

Sequences are batched with a validity mask. The forward direction scans
positions ``0..L-1``; the backward direction scans ``L-1..0`` by reversing
each sequence's valid prefix, so padding never enters either recurrence.
Gate order inside the fused weight blocks is input, forget, cell, output.
"""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

import numpy as np

from .embedding import EmbeddingModel, embed_sequence
from .lexer import TokenStream
from .numerics import AdamState, NonFiniteError, Rng, ShapeError, adam_step, mse_loss, sigmoid

log = logging.getLogger(__name__)

GATES = ("input", "forget", "cell", "output")


class TrainingDiverged(NonFiniteError):
    def __init__(self, epoch: int, batch: int):
        super().__init__(f"non-finite loss at epoch {epoch}, batch {batch}")
        self.epoch = epoch
        self.batch = batch


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 50
    batch_size: int = 128
    dropout_rate: float = 0.2
    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    clip_norm: float | None = None
    seed: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class BiLstmNetwork:
    input_dim: int
    hidden: int = 50
    layers: int = 3
    dropout_rate: float = 0.2
    params: dict[str, np.ndarray] = field(default_factory=dict)

    kind = "bilstm"

    def layer_input_dim(self, k: int) -> int:
        return self.input_dim if k == 0 else 2 * self.hidden

    def copy(self) -> "BiLstmNetwork":
        return replace(self, params={k: v.copy() for k, v in self.params.items()})

    def config(self) -> dict:
        return {"input_dim": self.input_dim, "hidden": self.hidden, "layers": self.layers,
                "dropout_rate": self.dropout_rate, "gate_order": list(GATES)}

    def parameters(self) -> dict:
        """Layer-indexed, per-gate parameter blocks for the JSON model file."""
        h = self.hidden
        out = {}
        for k in range(self.layers):
            block = {}
            for d in ("forward", "backward"):
                W, U, b = (self.params[f"l{k}.{d}.{n}"] for n in "WUb")
                block[d] = {g: {"W": W[:, j * h:(j + 1) * h].tolist(),
                                "U": U[:, j * h:(j + 1) * h].tolist(),
                                "b": b[j * h:(j + 1) * h].tolist()} for j, g in enumerate(GATES)}
            out[f"layer_{k}"] = block
        out["head"] = {"w": self.params["head.w"].tolist(), "b": self.params["head.b"].tolist()}
        return out

    @classmethod
    def from_parts(cls, config: dict, params: dict) -> "BiLstmNetwork":
        net = cls(int(config["input_dim"]), int(config["hidden"]), int(config["layers"]),
                  float(config["dropout_rate"]))
        for k in range(net.layers):
            for d in ("forward", "backward"):
                gates = params[f"layer_{k}"][d]
                for n in "WUb":
                    net.params[f"l{k}.{d}.{n}"] = np.concatenate(
                        [np.asarray(gates[g][n], dtype=np.float64) for g in GATES], axis=-1)
        net.params["head.w"] = np.asarray(params["head"]["w"], dtype=np.float64)
        net.params["head.b"] = np.asarray(params["head"]["b"], dtype=np.float64)
        return net

    def score(self, X, lengths=None) -> np.ndarray:
        return forward(self, X, lengths, mode="infer")


def _orthogonal(rows: int, cols: int, rng: Rng) -> np.ndarray:
    a = rng.normal((max(rows, cols), min(rows, cols)))
    q, r = np.linalg.qr(a)
    q = q * np.sign(np.diag(r))
    return np.ascontiguousarray(q.T if rows < cols else q)


def init_network(input_dim: int, hidden: int = 50, layers: int = 3,
                 dropout_rate: float = 0.2, seed: int = 0) -> BiLstmNetwork:
    """Glorot-uniform input weights, orthogonal recurrent weights, forget bias 1."""
    rng = Rng(seed).spawn(11)
    net = BiLstmNetwork(input_dim, hidden, layers, dropout_rate)
    for k in range(layers):
        d_in = net.layer_input_dim(k)
        limit = np.sqrt(6.0 / (d_in + 4 * hidden))
        for d in ("forward", "backward"):
            b = np.zeros(4 * hidden)
            b[hidden:2 * hidden] = 1.0
            net.params[f"l{k}.{d}.W"] = rng.uniform(-limit, limit, (d_in, 4 * hidden))
            net.params[f"l{k}.{d}.U"] = _orthogonal(hidden, 4 * hidden, rng)
            net.params[f"l{k}.{d}.b"] = b
    limit = np.sqrt(6.0 / (2 * hidden + 1))
    net.params["head.w"] = rng.uniform(-limit, limit, 2 * hidden)
    net.params["head.b"] = np.zeros(1)
    return net


# --------------------------------------------------------------------------
# forward / backward

def _as_batch(X, lengths) -> tuple[np.ndarray, np.ndarray, bool]:
    X = np.asarray(X, dtype=np.float64)
    single = X.ndim == 2
    if single:
        X = X[None]
        lengths = [X.shape[1] if lengths is None else lengths]
    if lengths is None:
        lengths = [X.shape[1]] * X.shape[0]
    lengths = np.asarray(lengths, dtype=np.int64).reshape(-1)
    if X.ndim != 3 or lengths.shape[0] != X.shape[0]:
        raise ShapeError(f"bad batch shapes: X {X.shape}, lengths {lengths.shape}")
    if np.any(lengths < 1):
        raise ValueError("valid length must be at least 1")
    if np.any(lengths > X.shape[1]):
        raise ValueError("valid length exceeds sequence length")
    return X, lengths, single


def _reverse_index(lengths: np.ndarray, T: int) -> np.ndarray:
    """Per-row index that reverses the valid prefix and fixes the padding."""
    t = np.arange(T)[None, :]
    L = lengths[:, None]
    return np.where(t < L, L - 1 - t, t)


def _gather(A: np.ndarray, idx: np.ndarray) -> np.ndarray:
    return np.take_along_axis(A, idx[:, :, None], axis=1)


def _scan(X: np.ndarray, mask: np.ndarray, W: np.ndarray, U: np.ndarray, b: np.ndarray):
    """One LSTM direction over (B, T, D) inputs in scan order."""
    B, T, _ = X.shape
    h_dim = U.shape[0]
    xz = X @ W + b
    h = np.zeros((B, h_dim))
    c = np.zeros((B, h_dim))
    out = np.zeros((B, T, h_dim))
    cache = {k: np.zeros((B, T, h_dim)) for k in ("i", "f", "g", "o", "tc", "h_prev", "c_prev")}
    for t in range(T):
        z = xz[:, t] + h @ U
        i = sigmoid(z[:, :h_dim])
        f = sigmoid(z[:, h_dim:2 * h_dim])
        g = np.tanh(z[:, 2 * h_dim:3 * h_dim])
        o = sigmoid(z[:, 3 * h_dim:])
        c_new = f * c + i * g
        tc = np.tanh(c_new)
        h_new = o * tc
        m = mask[:, t, None]
        for k, v in (("i", i), ("f", f), ("g", g), ("o", o), ("tc", tc), ("h_prev", h), ("c_prev", c)):
            cache[k][:, t] = v
        out[:, t] = m * h_new
        h = np.where(m, h_new, h)
        c = np.where(m, c_new, c)
    cache["x"] = X
    cache["mask"] = mask
    return out, cache


def _scan_backward(d_out: np.ndarray, cache: dict, W: np.ndarray, U: np.ndarray):
    """BPTT for one direction. Returns (dX, dW, dU, db)."""
    B, T, h_dim = d_out.shape
    mask = cache["mask"]
    dh = np.zeros((B, h_dim))
    dc = np.zeros((B, h_dim))
    dZ = np.zeros((B, T, 4 * h_dim))
    dU = np.zeros_like(U)
    for t in range(T - 1, -1, -1):
        m = mask[:, t, None].astype(np.float64)
        i, f, g, o, tc = (cache[k][:, t] for k in ("i", "f", "g", "o", "tc"))
        dh_new = m * (dh + d_out[:, t])
        dc_new = m * dc + dh_new * o * (1.0 - tc * tc)
        dz = np.concatenate([
            dc_new * g * i * (1.0 - i),
            dc_new * cache["c_prev"][:, t] * f * (1.0 - f),
            dc_new * i * (1.0 - g * g),
            dh_new * tc * o * (1.0 - o),
        ], axis=1)
        dZ[:, t] = dz
        dU += cache["h_prev"][:, t].T @ dz
        dh = (1.0 - m) * dh + dz @ U.T
        dc = (1.0 - m) * dc + dc_new * f
    X = cache["x"]
    dW = X.reshape(-1, X.shape[2]).T @ dZ.reshape(-1, 4 * h_dim)
    dX = dZ @ W.T
    return dX, dW, dU, dZ.sum(axis=(0, 1))


def _dropout_mask(rng: Rng | None, rate: float, shape: tuple[int, ...]) -> np.ndarray | None:
    if rng is None or rate <= 0.0:
        return None
    keep = 1.0 - rate
    return rng.bernoulli_mask(keep, shape) / keep


def forward(net: BiLstmNetwork, X, lengths=None, mode: str = "infer",
            rng: Rng | None = None, params: dict | None = None):
    """Scores in [0, 1] for a batch (or one sequence).

    ``mode="train"`` applies inverted dropout drawn from ``rng`` (none when
    ``rng`` is None) and also returns the activation cache for
    :func:`backward`.
    """
    if mode not in ("train", "infer"):
        raise ValueError(f"unknown mode {mode!r}")
    p = net.params if params is None else params
    X, lengths, single = _as_batch(X, lengths)
    if X.shape[2] != net.input_dim:
        raise ShapeError(f"input dim {X.shape[2]} != network input dim {net.input_dim}")
    B, T, _ = X.shape
    mask = np.arange(T)[None, :] < lengths[:, None]
    rev = _reverse_index(lengths, T)
    train = mode == "train"
    drop_rng = rng if train else None
    h = net.hidden

    cache: dict = {"lengths": lengths, "mask": mask, "rev": rev, "drops": [], "layers": []}
    drop = _dropout_mask(drop_rng, net.dropout_rate, X.shape)
    cache["drops"].append(drop)
    inp = X if drop is None else X * drop
    for k in range(net.layers):
        out_f, cf = _scan(inp, mask, p[f"l{k}.forward.W"], p[f"l{k}.forward.U"], p[f"l{k}.forward.b"])
        out_b_rev, cb = _scan(_gather(inp, rev), mask, p[f"l{k}.backward.W"],
                              p[f"l{k}.backward.U"], p[f"l{k}.backward.b"])
        H = np.concatenate([out_f, _gather(out_b_rev, rev)], axis=2)
        cache["layers"].append((cf, cb))
        drop = _dropout_mask(drop_rng, net.dropout_rate, H.shape)
        cache["drops"].append(drop)
        inp = H if drop is None else H * drop
    rows = np.arange(B)
    readout = np.concatenate([inp[rows, lengths - 1, :h], inp[:, 0, h:]], axis=1)
    z = readout @ p["head.w"] + p["head.b"][0]
    if not np.all(np.isfinite(z)):
        raise NonFiniteError("non-finite activation in BiLSTM forward pass")
    scores = sigmoid(z)
    cache["readout"] = readout
    cache["scores"] = scores
    cache["shape"] = X.shape
    out = scores[0] if single else scores
    return (out, cache) if train else out


def backward(net: BiLstmNetwork, cache: dict, d_scores, params: dict | None = None) -> dict[str, np.ndarray]:
    """Exact parameter gradients given dLoss/dScore for each sequence."""
    p = net.params if params is None else params
    d_scores = np.asarray(d_scores, dtype=np.float64).reshape(-1)
    B, T, _ = cache["shape"]
    if d_scores.shape[0] != B:
        raise ShapeError(f"cache holds {B} sequences but {d_scores.shape[0]} score gradients given")
    h = net.hidden
    lengths, rev = cache["lengths"], cache["rev"]
    s = cache["scores"]
    dz = d_scores * s * (1.0 - s)
    grads = {"head.w": cache["readout"].T @ dz, "head.b": np.array([dz.sum()])}
    d_read = np.outer(dz, p["head.w"])
    rows = np.arange(B)
    dH = np.zeros((B, T, 2 * h))
    dH[rows, lengths - 1, :h] += d_read[:, :h]
    dH[:, 0, h:] += d_read[:, h:]
    for k in range(net.layers - 1, -1, -1):
        drop = cache["drops"][k + 1]
        if drop is not None:
            dH = dH * drop
        cf, cb = cache["layers"][k]
        dXf, dW, dU, db = _scan_backward(dH[:, :, :h], cf, p[f"l{k}.forward.W"], p[f"l{k}.forward.U"])
        grads[f"l{k}.forward.W"], grads[f"l{k}.forward.U"], grads[f"l{k}.forward.b"] = dW, dU, db
        dXb_rev, dW, dU, db = _scan_backward(_gather(dH[:, :, h:], rev), cb,
                                             p[f"l{k}.backward.W"], p[f"l{k}.backward.U"])
        grads[f"l{k}.backward.W"], grads[f"l{k}.backward.U"], grads[f"l{k}.backward.b"] = dW, dU, db
        dH = dXf + _gather(dXb_rev, rev)
    return grads


def loss_and_grad(net: BiLstmNetwork, X, lengths, y, rng: Rng | None = None,
                  params: dict | None = None) -> tuple[float, dict[str, np.ndarray]]:
    """MSE between scores and labels, with gradients for every parameter."""
    scores, cache = forward(net, X, lengths, mode="train", rng=rng, params=params)
    loss, d_scores = mse_loss(np.atleast_1d(scores), np.atleast_1d(np.asarray(y, dtype=np.float64)))
    return loss, backward(net, cache, d_scores, params=params)


# --------------------------------------------------------------------------
# training

def _clip(grads: dict[str, np.ndarray], max_norm: float) -> None:
    norm = np.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
    if norm > max_norm:
        for g in grads.values():
            g *= max_norm / norm


def accuracy(net: BiLstmNetwork, X, lengths, y, threshold: float = 0.5, batch_size: int = 256) -> float:
    scores = predict_scores(net, X, lengths, batch_size)
    return float(np.mean((scores >= threshold).astype(np.int64) == np.asarray(y)))


def predict_scores(net: BiLstmNetwork, X, lengths, batch_size: int = 256) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    return np.concatenate([forward(net, X[i:i + batch_size], lengths[i:i + batch_size])
                           for i in range(0, len(X), batch_size)]) if len(X) else np.empty(0)


def fit(net: BiLstmNetwork, train: tuple, validation: tuple | None = None,
        config: TrainConfig = TrainConfig(), track_train_accuracy: bool = False):
    """Train a copy of ``net``; returns ``(trained_net, history)``.

    ``train`` and ``validation`` are ``(X, lengths, y)`` triples with ``X``
    shaped ``(n, max_len, input_dim)``. Each history entry holds the epoch's
    mean training loss and, when a validation set is given, its accuracy.
    """
    X, lengths, y = (np.asarray(a) for a in train)
    n = len(y)
    if n == 0:
        raise ValueError("empty training set")
    net = net.copy()
    net.dropout_rate = config.dropout_rate
    y = y.astype(np.float64)
    root = Rng(config.seed)
    shuffle_rng, drop_rng = root.spawn(1), root.spawn(2)
    state = AdamState.for_params(net.params, learning_rate=config.learning_rate, beta1=config.beta1,
                                 beta2=config.beta2, epsilon=config.epsilon)
    history = []
    for epoch in range(1, config.epochs + 1):
        order = shuffle_rng.permutation(n)
        total = 0.0
        for b_idx, start in enumerate(range(0, n, config.batch_size), start=1):
            rows = order[start:start + config.batch_size]
            try:
                loss, grads = loss_and_grad(net, X[rows], lengths[rows], y[rows], rng=drop_rng)
            except NonFiniteError:
                raise TrainingDiverged(epoch, b_idx) from None
            if not np.isfinite(loss):
                raise TrainingDiverged(epoch, b_idx)
            if config.clip_norm is not None:
                _clip(grads, config.clip_norm)
            adam_step(net.params, grads, state)
            total += loss * len(rows)
        entry = {"epoch": epoch, "train_loss": total / n, "val_accuracy": None}
        if validation is not None and len(validation[2]):
            entry["val_accuracy"] = accuracy(net, *validation)
        if track_train_accuracy:
            entry["train_accuracy"] = accuracy(net, X, lengths, y)
        history.append(entry)
        log.info("epoch %d loss %.6f val_acc %s", epoch, entry["train_loss"], entry["val_accuracy"])
    return net, history


# --------------------------------------------------------------------------
# token-level helpers

def embed_batch(streams: Sequence[TokenStream], emb: EmbeddingModel,
                max_len: int = 200) -> tuple[np.ndarray, np.ndarray]:
    """Stack embedded streams; empty streams get one zero row so every
    sequence has a valid length of at least one."""
    X = np.zeros((len(streams), max_len, emb.dim))
    lengths = np.ones(len(streams), dtype=np.int64)
    for r, s in enumerate(streams):
        X[r], L = embed_sequence(s, emb, max_len)
        lengths[r] = max(L, 1)
    return X, lengths


def predict(net: BiLstmNetwork, stream: TokenStream, emb: EmbeddingModel,
            threshold: float = 0.5, max_len: int = 200) -> dict:
    if emb.dim != net.input_dim:
        raise ShapeError(f"embedding dim {emb.dim} != network input dim {net.input_dim}")
    X, lengths = embed_batch([stream], emb, max_len)
    score = float(forward(net, X, lengths)[0])
    return {"score": score, "label": int(score >= threshold)}
