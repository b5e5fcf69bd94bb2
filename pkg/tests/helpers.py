"""Shared constructions for the unit and acceptance suites."""
import math

import numpy as np

from vulnlex import bilstm
from vulnlex.numerics import Rng, gradient_check


def tiny_bilstm_case(seed: int, max_dim: int = 4, max_hidden: int = 3, max_len: int = 6):
    """A random small network with perturbed parameters, a two-sequence batch
    (second sequence shorter than the first, both padded), and targets."""
    rng = Rng(seed)
    d = 1 + int(rng.integers(max_dim, 1)[0])
    h = 1 + int(rng.integers(max_hidden, 1)[0])
    layers = 1 + int(rng.integers(3, 1)[0])
    T = 1 + int(rng.integers(max_len, 1)[0])
    net = bilstm.init_network(d, h, layers, dropout_rate=0.0, seed=seed)
    for k in net.params:
        net.params[k] = net.params[k] + 0.5 * rng.normal(net.params[k].shape)
    X = rng.normal((2, T + 2, d))
    lengths = np.array([T, max(1, T - 1)])
    y = np.array([1.0, 0.0])
    return net, X, lengths, y


def bilstm_gradient_error(net, X, lengths, y, step: float = 1e-5) -> float:
    def f(p):
        return bilstm.loss_and_grad(net, X, lengths, y, params=p)

    return gradient_check(f, net.params, step)


def _sig(z):
    return 1.0 / (1.0 + math.exp(-z))


def reference_lstm(xs, W, U, b):
    """Step-by-step scalar LSTM recurrence with fused i, f, g, o blocks."""
    h_dim = U.shape[0]
    h = [0.0] * h_dim
    c = [0.0] * h_dim
    states = []
    for x in xs:
        z = [b[j] + sum(x[k] * W[k, j] for k in range(len(x))) + sum(h[k] * U[k, j] for k in range(h_dim))
             for j in range(4 * h_dim)]
        new_h, new_c = [], []
        for u in range(h_dim):
            i = _sig(z[u])
            f = _sig(z[h_dim + u])
            g = math.tanh(z[2 * h_dim + u])
            o = _sig(z[3 * h_dim + u])
            new_c.append(f * c[u] + i * g)
            new_h.append(o * math.tanh(new_c[-1]))
        h, c = new_h, new_c
        states.append(h)
    return states


def reference_score(net, x, length):
    """Score of one sequence computed with :func:`reference_lstm` only."""
    seq = [list(row) for row in x[:length]]
    for k in range(net.layers):
        fw = reference_lstm(seq, *(net.params[f"l{k}.forward.{n}"] for n in "WUb"))
        bw = reference_lstm(seq[::-1], *(net.params[f"l{k}.backward.{n}"] for n in "WUb"))[::-1]
        seq = [fw[t] + bw[t] for t in range(length)]
    h = net.hidden
    readout = seq[length - 1][:h] + seq[0][h:]
    z = net.params["head.b"][0] + sum(a * w for a, w in zip(readout, net.params["head.w"]))
    return _sig(z)
