"""Small fully connected network trained by backpropagation on squared error.

Hidden layers share one activation; the output layer is linear. Weight
matrices are stored ``(fan_out, fan_in)`` and batches are rows, so a layer
computes ``a @ W.T + b``.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np


class DimensionMismatch(ValueError):
    pass


class EmptyDataset(ValueError):
    pass


class Activation(str, enum.Enum):
    SIGMOID = "sigmoid"
    TANH = "tanh"
    RELU = "relu"


def _act(kind: Activation, z: np.ndarray) -> np.ndarray:
    if kind is Activation.TANH:
        return np.tanh(z)
    if kind is Activation.SIGMOID:
        return 0.5 * (1.0 + np.tanh(0.5 * z))
    return np.maximum(z, 0.0)


def _act_grad(kind: Activation, z: np.ndarray, a: np.ndarray) -> np.ndarray:
    if kind is Activation.TANH:
        return 1.0 - a * a
    if kind is Activation.SIGMOID:
        return a * (1.0 - a)
    return (z > 0).astype(z.dtype)


@dataclass(frozen=True)
class NetSpec:
    layer_sizes: tuple[int, ...]
    activation: Activation = Activation.TANH

    def __post_init__(self):
        object.__setattr__(self, "layer_sizes", tuple(int(s) for s in self.layer_sizes))
        object.__setattr__(self, "activation", Activation(self.activation))
        if len(self.layer_sizes) < 2 or min(self.layer_sizes) < 1:
            raise ValueError(f"need >= 2 layers of size >= 1, got {self.layer_sizes}")


@dataclass
class Network:
    spec: NetSpec
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def __post_init__(self):
        sizes = self.spec.layer_sizes
        if len(self.weights) != len(sizes) - 1 or len(self.biases) != len(sizes) - 1:
            raise DimensionMismatch("one weight matrix and bias vector per layer transition")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (sizes[i + 1], sizes[i]) or b.shape != (sizes[i + 1],):
                raise DimensionMismatch(
                    f"layer {i}: expected W {(sizes[i + 1], sizes[i])} and b {(sizes[i + 1],)}, "
                    f"got {w.shape} and {b.shape}"
                )

    @property
    def n_in(self) -> int:
        return self.spec.layer_sizes[0]

    @property
    def n_out(self) -> int:
        return self.spec.layer_sizes[-1]

    def copy(self) -> "Network":
        return Network(self.spec, [w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def params(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def __eq__(self, other) -> bool:
        if not isinstance(other, Network):
            return NotImplemented
        return self.spec == other.spec and all(
            np.array_equal(a, b) for a, b in zip(self.params(), other.params())
        )


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.05
    epochs: int = 2000
    batch_size: int | None = None  # None means full batch
    seed: int = 0
    momentum: float = 0.0

    def __post_init__(self):
        if not self.learning_rate >= 0:
            raise ValueError("learning_rate must be nonnegative")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size is not None and self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must be in [0, 1)")


def init(spec: NetSpec, seed: int = 0) -> Network:
    """Uniform weights in ``±sqrt(3 / fan_in)`` (unit variance per unit input), zero biases."""
    rng = np.random.default_rng(np.random.SeedSequence(int(seed)))
    weights, biases = [], []
    for fan_in, fan_out in zip(spec.layer_sizes[:-1], spec.layer_sizes[1:]):
        bound = np.sqrt(3.0 / fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return Network(spec, weights, biases)


def _as_batch(net: Network, x) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != net.n_in:
        raise DimensionMismatch(f"expected input width {net.n_in}, got shape {x.shape if not single else x.shape[1:]}")
    return x, single


def _forward_cache(net: Network, x: np.ndarray):
    zs, acts = [], [x]
    a = x
    last = len(net.weights) - 1
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = a @ w.T + b
        a = z if i == last else _act(net.spec.activation, z)
        zs.append(z)
        acts.append(a)
    return zs, acts


def forward(net: Network, x) -> np.ndarray:
    """Evaluate on one input vector or a batch of row vectors."""
    xb, single = _as_batch(net, x)
    out = _forward_cache(net, xb)[1][-1]
    return out[0] if single else out


def mse(net: Network, inputs, targets) -> float:
    x, _ = _as_batch(net, inputs)
    t = _targets(net, targets, x.shape[0])
    return float(np.mean((forward(net, x) - t) ** 2))


def _targets(net: Network, targets, m: int) -> np.ndarray:
    t = np.asarray(targets, dtype=np.float64)
    if t.ndim <= 1 and net.n_out == 1:
        t = t.reshape(-1, 1)
    elif t.ndim == 1:
        t = t[None, :]
    if t.shape != (m, net.n_out):
        raise DimensionMismatch(f"expected targets of shape {(m, net.n_out)}, got {t.shape}")
    return t


def gradients(net: Network, inputs, targets) -> tuple[float, list[np.ndarray]]:
    """Loss and its gradient w.r.t. every parameter (ordered as :meth:`Network.params`).

    The loss is the mean over samples and outputs of the squared error.
    """
    x, _ = _as_batch(net, inputs)
    t = _targets(net, targets, x.shape[0])
    zs, acts = _forward_cache(net, x)
    diff = acts[-1] - t
    loss = float(np.mean(diff**2))
    delta = 2.0 * diff / diff.size
    layer_grads: list[tuple[np.ndarray, np.ndarray]] = []
    for i in range(len(net.weights) - 1, -1, -1):
        layer_grads.append((delta.T @ acts[i], delta.sum(axis=0)))
        if i:
            delta = (delta @ net.weights[i]) * _act_grad(net.spec.activation, zs[i - 1], acts[i])
    grads = [g for pair in reversed(layer_grads) for g in pair]
    return loss, grads


def train(net: Network, inputs, targets, cfg: TrainConfig = TrainConfig()) -> tuple[Network, list[float]]:
    """Gradient descent on a private copy; returns the trained copy and per-epoch loss.

    ``history[e]`` is the loss over the whole dataset at the start of epoch ``e``.
    """
    if len(inputs) == 0:
        raise EmptyDataset("no training examples")
    x, _ = _as_batch(net, inputs)
    t = _targets(net, targets, x.shape[0])
    net = net.copy()
    params = net.params()
    velocity = [np.zeros_like(p) for p in params]
    rng = np.random.default_rng(np.random.SeedSequence(int(cfg.seed)))
    m = x.shape[0]
    history: list[float] = []
    for _ in range(cfg.epochs):
        if cfg.batch_size is None or cfg.batch_size >= m:
            loss, grads = gradients(net, x, t)
            history.append(loss)
            _step(params, velocity, grads, cfg)
            continue
        history.append(float(np.mean((forward(net, x) - t) ** 2)))
        order = rng.permutation(m)
        for start in range(0, m, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            _, grads = gradients(net, x[idx], t[idx])
            _step(params, velocity, grads, cfg)
    return net, history


def _step(params, velocity, grads, cfg: TrainConfig) -> None:
    for p, v, g in zip(params, velocity, grads):
        if cfg.momentum:
            v *= cfg.momentum
            v -= cfg.learning_rate * g
            p += v
        else:
            p -= cfg.learning_rate * g


GradFn = Callable[[Network, np.ndarray, np.ndarray], tuple[float, list[np.ndarray]]]


def gradient_check(net: Network, x, target, epsilon: float = 1e-5, grad_fn: GradFn = gradients) -> float:
    """Worst relative error between ``grad_fn`` and central finite differences.

    Relative error is ``|a - n| / max(|a|, |n|, 1e-8)``; an all-zero gradient
    therefore scores 0.
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    t = np.atleast_2d(np.asarray(target, dtype=np.float64))
    _, analytic = grad_fn(net, x, t)
    probe = net.copy()
    worst = 0.0
    for p, g in zip(probe.params(), analytic):
        flat = p.reshape(-1)
        gflat = np.asarray(g).reshape(-1)
        for k in range(flat.size):
            orig = flat[k]
            flat[k] = orig + epsilon
            up = mse(probe, x, t)
            flat[k] = orig - epsilon
            down = mse(probe, x, t)
            flat[k] = orig
            numeric = (up - down) / (2 * epsilon)
            denom = max(abs(gflat[k]), abs(numeric), 1e-8)
            worst = max(worst, abs(gflat[k] - numeric) / denom)
    return worst


def to_dict(net: Network) -> dict:
    return {
        "layer_sizes": list(net.spec.layer_sizes),
        "activation": net.spec.activation.value,
        "weights": [w.tolist() for w in net.weights],
        "biases": [b.tolist() for b in net.biases],
    }


def from_dict(d: dict) -> Network:
    spec = NetSpec(tuple(d["layer_sizes"]), Activation(d["activation"]))
    return Network(
        spec,
        [np.array(w, dtype=np.float64).reshape(o, i) for w, o, i in zip(d["weights"], spec.layer_sizes[1:], spec.layer_sizes[:-1])],
        [np.array(b, dtype=np.float64) for b in d["biases"]],
    )


def save(net: Network, path: str | Path) -> None:
    # json writes floats with repr(), which round-trips exactly
    Path(path).write_text(json.dumps(to_dict(net), indent=1) + "\n")


def load(path: str | Path) -> Network:
    return from_dict(json.loads(Path(path).read_text()))
