"""Small float64 feed-forward networks with hand-written backprop and Adam.

Parameters of a network live in one flat vector; per-layer weight and bias
arrays are views into it. That keeps Adam, target tracking and snapshots to
single vectorized operations.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

SNAPSHOT_VERSION = 1


class ContractError(ValueError):
    """Raised when array shapes do not match a network's contract."""


class NonFiniteGradientError(FloatingPointError):
    pass


def _layer_views(flat: np.ndarray, sizes: Sequence[int]):
    weights, biases = [], []
    offset = 0
    for n_in, n_out in zip(sizes[:-1], sizes[1:]):
        w = flat[offset:offset + n_in * n_out].reshape(n_in, n_out)
        offset += n_in * n_out
        b = flat[offset:offset + n_out]
        offset += n_out
        weights.append(w)
        biases.append(b)
    return weights, biases


def n_params(sizes: Sequence[int]) -> int:
    return sum((i + 1) * o for i, o in zip(sizes[:-1], sizes[1:]))


class MlpNet:
    """ReLU multilayer perceptron with a linear output layer.

    ``sizes`` lists every layer width including input and output, e.g.
    ``(3, 256, 256, 1)``.
    """

    def __init__(self, sizes: Sequence[int], params: np.ndarray | None = None, name: str = "net"):
        self.sizes = tuple(int(s) for s in sizes)
        if len(self.sizes) < 2 or min(self.sizes) < 1:
            raise ContractError(f"invalid layer sizes {self.sizes}")
        size = n_params(self.sizes)
        if params is None:
            params = np.zeros(size)
        params = np.asarray(params, dtype=np.float64)
        if params.shape != (size,):
            raise ContractError(f"{name}: expected {size} parameters, got shape {params.shape}")
        self.params = params
        self.name = name
        self.weights, self.biases = _layer_views(self.params, self.sizes)

    @classmethod
    def init(cls, sizes: Sequence[int], rng: np.random.Generator, name: str = "net",
             output_scale: float = 1e-2) -> "MlpNet":
        """Fan-in scaled uniform init; the output layer is shrunk by ``output_scale``."""
        net = cls(sizes, name=name)
        last = len(net.weights) - 1
        for k, (w, b) in enumerate(zip(net.weights, net.biases)):
            bound = 1.0 / np.sqrt(w.shape[0])
            scale = output_scale if k == last else 1.0
            w[...] = scale * rng.uniform(-bound, bound, size=w.shape)
            b[...] = scale * rng.uniform(-bound, bound, size=b.shape)
        return net

    @property
    def in_dim(self) -> int:
        return self.sizes[0]

    @property
    def out_dim(self) -> int:
        return self.sizes[-1]

    def copy(self, name: str | None = None) -> "MlpNet":
        return MlpNet(self.sizes, self.params.copy(), name=name or self.name)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return forward(self, x)

    def __repr__(self) -> str:
        return f"MlpNet({self.name!r}, sizes={self.sizes})"


class MlpGrads:
    """Gradient accumulator with the same flat layout as an :class:`MlpNet`."""

    def __init__(self, sizes: Sequence[int], flat: np.ndarray | None = None):
        self.sizes = tuple(sizes)
        self.flat = np.zeros(n_params(self.sizes)) if flat is None else flat
        self.weights, self.biases = _layer_views(self.flat, self.sizes)

    @classmethod
    def zeros_like(cls, net: MlpNet) -> "MlpGrads":
        return cls(net.sizes)

    def zero(self) -> None:
        self.flat[...] = 0.0

    def __iadd__(self, other: "MlpGrads") -> "MlpGrads":
        if other.sizes != self.sizes:
            raise ContractError("gradient shapes differ")
        self.flat += other.flat
        return self


def _as_batch(net: MlpNet, x: np.ndarray) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != net.in_dim:
        raise ContractError(f"{net.name}: expected input width {net.in_dim}, got shape {x.shape}")
    return x, single


def forward_cached(net: MlpNet, x: np.ndarray):
    """Forward pass that also returns the activations needed by backward."""
    x, single = _as_batch(net, x)
    acts = [x]
    h = x
    last = len(net.weights) - 1
    for k, (w, b) in enumerate(zip(net.weights, net.biases)):
        h = h @ w + b
        if k < last:
            h = np.maximum(h, 0.0)
        acts.append(h)
    out = h[0] if single else h
    return out, acts


def forward(net: MlpNet, x: np.ndarray) -> np.ndarray:
    """Evaluate the network on one input vector or a batch of row vectors."""
    return forward_cached(net, x)[0]


def backward(net: MlpNet, x: np.ndarray, output_grad: np.ndarray, cache=None,
             need_params: bool = True, need_input: bool = True):
    """Reverse-mode gradients of ``sum(output * output_grad)``.

    Returns ``(grads, input_grad)``. Either part can be skipped with the
    ``need_*`` flags, in which case ``None`` is returned in its place.
    """
    if cache is None:
        _, cache = forward_cached(net, x)
    acts = cache
    g = np.asarray(output_grad, dtype=np.float64)
    single = g.ndim == 1
    if single:
        g = g[None, :]
    if g.shape != acts[-1].shape:
        raise ContractError(f"{net.name}: output_grad shape {g.shape} != output shape {acts[-1].shape}")

    grads = MlpGrads.zeros_like(net) if need_params else None
    n_layers = len(net.weights)
    for k in range(n_layers - 1, -1, -1):
        if k < n_layers - 1:
            g = g * (acts[k + 1] > 0.0)
        if grads is not None:
            grads.weights[k][...] = acts[k].T @ g
            grads.biases[k][...] = g.sum(axis=0)
        if k > 0 or need_input:
            g = g @ net.weights[k].T
    input_grad = None
    if need_input:
        input_grad = g[0] if single else g
    return grads, input_grad


@dataclass
class AdamState:
    """Bias-corrected Adam moments for one flat parameter vector."""

    m: np.ndarray
    v: np.ndarray
    lr: float = 3e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0

    @classmethod
    def for_shape(cls, size: int, lr: float = 3e-4, **kw) -> "AdamState":
        return cls(np.zeros(size), np.zeros(size), lr=lr, **kw)

    @classmethod
    def for_net(cls, net: MlpNet, lr: float = 3e-4, **kw) -> "AdamState":
        return cls.for_shape(net.params.size, lr=lr, **kw)


def adam_update(state: AdamState, params: np.ndarray, grad: np.ndarray, name: str = "params") -> None:
    """In-place Adam step on a flat parameter array."""
    if params.shape != state.m.shape or grad.shape != params.shape:
        raise ContractError(f"{name}: Adam shapes differ")
    if not np.all(np.isfinite(grad)):
        raise NonFiniteGradientError(f"non-finite gradient for {name}")
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    state.m *= b1
    state.m += (1.0 - b1) * grad
    state.v *= b2
    state.v += (1.0 - b2) * grad * grad
    m_hat = state.m / (1.0 - b1 ** state.t)
    v_hat = state.v / (1.0 - b2 ** state.t)
    params -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)


def adam_step(state: AdamState, net: MlpNet, grads: MlpGrads) -> MlpNet:
    adam_update(state, net.params, grads.flat, name=net.name)
    return net


def soft_update(target: MlpNet, online: MlpNet, tau: float) -> MlpNet:
    """Move ``target`` toward ``online``: target <- tau*online + (1-tau)*target."""
    if not 0.0 < tau <= 1.0:
        raise ValueError(f"tau must lie in (0, 1], got {tau}")
    if target.sizes != online.sizes:
        raise ContractError("soft_update between differently shaped networks")
    target.params *= 1.0 - tau
    target.params += tau * online.params
    return target


def save_nets(path: str | Path, nets: dict[str, MlpNet]) -> None:
    """Write networks to a versioned JSON file.

    Floats are stored with ``repr`` precision so loading is bit-exact.
    """
    blob = {
        "version": SNAPSHOT_VERSION,
        "nets": {k: {"sizes": list(n.sizes), "params": n.params.tolist()} for k, n in nets.items()},
    }
    Path(path).write_text(json.dumps(blob))


def load_nets(path: str | Path) -> dict[str, MlpNet]:
    blob = json.loads(Path(path).read_text())
    if blob.get("version") != SNAPSHOT_VERSION:
        raise ValueError(f"unsupported snapshot version {blob.get('version')}")
    return {k: MlpNet(v["sizes"], np.array(v["params"], dtype=np.float64), name=k)
            for k, v in blob["nets"].items()}
