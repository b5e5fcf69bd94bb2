"""Dense numerics shared by every learned model.

Matrices are plain ``float64`` numpy arrays. This module adds the pieces the
models need on top: checked products, stable activations, the MSE loss,
bias-corrected Adam, a counter-based RNG that is reproducible across
platforms, and a central-difference gradient checker.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

ParamSet = dict[str, np.ndarray]


class NonFiniteError(FloatingPointError):
    """A computation produced NaN or Inf."""


class ShapeError(ValueError):
    pass


def check_finite(x: np.ndarray | float, what: str = "value") -> None:
    if not np.all(np.isfinite(x)):
        raise NonFiniteError(f"non-finite {what}")


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(f"matmul expects 2-D operands, got {a.ndim}-D and {b.ndim}-D")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul dimension mismatch: {a.shape} x {b.shape}")
    with np.errstate(over="ignore", invalid="ignore"):
        out = a @ b
    check_finite(out, "matmul output")
    return out


# --------------------------------------------------------------------------
# activations

def sigmoid(x: np.ndarray | float) -> np.ndarray:
    """Logistic function, evaluated without overflow for any finite input."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid_grad(y: np.ndarray) -> np.ndarray:
    """Derivative of the sigmoid expressed through its output ``y``."""
    return y * (1.0 - y)


def tanh(x: np.ndarray | float) -> np.ndarray:
    return np.tanh(np.asarray(x, dtype=np.float64))


def tanh_grad(y: np.ndarray) -> np.ndarray:
    """Derivative of tanh expressed through its output ``y``."""
    return 1.0 - y * y


def log_sigmoid(x: np.ndarray | float) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return -np.logaddexp(0.0, -x)


# --------------------------------------------------------------------------
# loss

def mse_loss(predicted: np.ndarray, target: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean squared error and its gradient with respect to ``predicted``."""
    p = np.asarray(predicted, dtype=np.float64).ravel()
    t = np.asarray(target, dtype=np.float64).ravel()
    if p.shape != t.shape:
        raise ShapeError(f"length mismatch: {p.size} vs {t.size}")
    if p.size == 0:
        raise ShapeError("mse_loss needs at least one element")
    diff = p - t
    loss = float(np.mean(diff * diff))
    check_finite(loss, "loss")
    return loss, (2.0 / p.size) * diff


# --------------------------------------------------------------------------
# Adam

@dataclass
class AdamState:
    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step_count: int = 0
    first_moment: ParamSet = field(default_factory=dict)
    second_moment: ParamSet = field(default_factory=dict)

    def __post_init__(self):
        if not (0.0 < self.beta1 < 1.0 and 0.0 < self.beta2 < 1.0):
            raise ValueError("beta1 and beta2 must lie in (0, 1)")

    @classmethod
    def for_params(cls, params: Mapping[str, np.ndarray], **kwargs) -> "AdamState":
        state = cls(**kwargs)
        for k, p in params.items():
            state.first_moment[k] = np.zeros_like(p, dtype=np.float64)
            state.second_moment[k] = np.zeros_like(p, dtype=np.float64)
        return state


def adam_step(params: ParamSet, grads: Mapping[str, np.ndarray],
              state: AdamState) -> tuple[ParamSet, AdamState]:
    """One bias-corrected Adam update, applied in place.

    Missing moment buffers are created as zeros. Returns ``(params, state)``
    for convenience; both are the objects passed in.
    """
    if set(grads) != set(params):
        raise ShapeError(f"gradient keys {sorted(grads)} do not match parameters {sorted(params)}")
    for k, g in grads.items():
        if g.shape != params[k].shape:
            raise ShapeError(f"gradient shape {g.shape} != parameter shape {params[k].shape} for {k!r}")
        if not np.all(np.isfinite(g)):
            raise NonFiniteError(f"non-finite gradient for {k!r} at step {state.step_count + 1}")

    state.step_count += 1
    t = state.step_count
    bc1 = 1.0 - state.beta1 ** t
    bc2 = 1.0 - state.beta2 ** t
    for k, g in grads.items():
        m = state.first_moment.get(k)
        if m is None:
            m = state.first_moment[k] = np.zeros_like(params[k])
            state.second_moment[k] = np.zeros_like(params[k])
        v = state.second_moment[k]
        if m.shape != g.shape:
            raise ShapeError(f"moment shape {m.shape} != gradient shape {g.shape} for {k!r}")
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        params[k] -= state.learning_rate * (m / bc1) / (np.sqrt(v / bc2) + state.epsilon)
    return params, state


# --------------------------------------------------------------------------
# RNG

_MASK64 = (1 << 64) - 1
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)


def _splitmix64(z: np.ndarray) -> np.ndarray:
    z = z.copy()
    z ^= z >> np.uint64(30)
    z *= np.uint64(0xBF58476D1CE4E5B9)
    z ^= z >> np.uint64(27)
    z *= np.uint64(0x94D049BB133111EB)
    z ^= z >> np.uint64(31)
    return z


class Rng:
    """Counter-based generator: draw ``i`` is ``splitmix64(key + i * golden)``.

    The stream is a pure function of ``(seed, counter)``, so any language with
    64-bit wrapping arithmetic reproduces it exactly. Child streams for
    independent purposes come from :meth:`spawn`.
    """

    def __init__(self, seed: int):
        if not 0 <= int(seed) <= _MASK64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        self.seed = int(seed)
        self.counter = 0
        self._key = _splitmix64(np.array([self.seed], dtype=np.uint64))[0]

    def spawn(self, tag: int) -> "Rng":
        mixed = _splitmix64(np.array([self._key ^ np.uint64(tag & _MASK64)], dtype=np.uint64))[0]
        return Rng(int(mixed))

    def next_u64(self, n: int) -> np.ndarray:
        idx = np.arange(self.counter + 1, self.counter + n + 1, dtype=np.uint64)
        self.counter += n
        with np.errstate(over="ignore"):
            return _splitmix64(self._key + idx * _GOLDEN)

    def random(self, n: int) -> np.ndarray:
        """``n`` uniforms in [0, 1) with 53-bit resolution."""
        return (self.next_u64(n) >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))

    def uniform(self, low: float, high: float, shape: int | tuple[int, ...]) -> np.ndarray:
        size = int(np.prod(shape))
        return (low + (high - low) * self.random(size)).reshape(shape)

    def integers(self, high: int, n: int) -> np.ndarray:
        """``n`` integers in [0, high)."""
        return np.minimum((self.random(n) * high).astype(np.int64), high - 1)

    def normal(self, shape: int | tuple[int, ...]) -> np.ndarray:
        size = int(np.prod(shape))
        u = self.random(2 * size)
        u1 = 1.0 - u[:size]  # (0, 1]
        u2 = u[size:]
        return (np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)).reshape(shape)

    def permutation(self, n: int) -> np.ndarray:
        return np.argsort(self.next_u64(n), kind="stable")

    def bernoulli_mask(self, keep: float, shape: tuple[int, ...]) -> np.ndarray:
        return (self.random(int(np.prod(shape))) < keep).reshape(shape)


# --------------------------------------------------------------------------
# gradient checking

def gradient_check(f: Callable[[ParamSet], tuple[float, Mapping[str, np.ndarray]]],
                   point: Mapping[str, np.ndarray], step: float = 1e-5) -> float:
    """Largest relative disagreement between analytic and numeric gradients.

    ``f`` maps a parameter set to ``(value, gradients)``. Each coordinate is
    perturbed by ``±step``; the error per coordinate is
    ``|analytic - numeric| / max(1, |analytic|, |numeric|)``.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    # C order so the flat view below aliases the parameter storage
    params = {k: np.array(v, dtype=np.float64, order="C") for k, v in point.items()}
    value, analytic = f(params)
    check_finite(value, "function value")
    worst = 0.0
    for k, p in params.items():
        flat = p.reshape(-1)
        ana = np.asarray(analytic[k], dtype=np.float64).reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            up = f(params)[0]
            flat[i] = orig - step
            down = f(params)[0]
            flat[i] = orig
            if not (np.isfinite(up) and np.isfinite(down)):
                raise NonFiniteError(f"non-finite evaluation perturbing {k}[{i}]")
            num = (up - down) / (2.0 * step)
            err = abs(ana[i] - num) / max(1.0, abs(ana[i]), abs(num))
            worst = max(worst, err)
    return worst
