"""Small fully-connected networks with hand-written backprop and Adam.

Parameters are float64 numpy arrays.  ``forward`` accepts a single input
vector or a batch of row vectors; parameter gradients from a batch are summed
over its rows.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, ShapeError, UsageError

ACTIVATIONS = ("tanh", "identity")
CHECKPOINT_VERSION = 1


@dataclass
class Layer:
    weight: np.ndarray  # (out, in)
    bias: np.ndarray  # (out,)
    activation: str = "tanh"

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ConfigError(f"unknown activation {self.activation!r}")
        if self.weight.ndim != 2 or self.bias.shape != (self.weight.shape[0],):
            raise ShapeError(f"layer weight {self.weight.shape} and bias {self.bias.shape} disagree")


class Network:
    def __init__(self, layers: list[Layer]):
        for prev, nxt in zip(layers, layers[1:]):
            if prev.weight.shape[0] != nxt.weight.shape[1]:
                raise ShapeError(f"layer output {prev.weight.shape[0]} feeds input {nxt.weight.shape[1]}")
        self.layers = layers
        self.version = 0

    @classmethod
    def build(cls, sizes, rng: np.random.Generator, hidden_activation="tanh",
              output_activation="identity", hidden_gain=np.sqrt(2.0), output_gain=0.01) -> "Network":
        """Uniform fan-in initialisation: U(-a, a) with a = gain * sqrt(3 / fan_in); zero biases."""
        sizes = list(sizes)
        if len(sizes) < 2:
            raise ConfigError("a network needs at least an input and an output size")
        layers = []
        for i, (n_in, n_out) in enumerate(zip(sizes[:-1], sizes[1:])):
            last = i == len(sizes) - 2
            gain = output_gain if last else hidden_gain
            bound = gain * np.sqrt(3.0 / n_in)
            layers.append(Layer(rng.uniform(-bound, bound, (n_out, n_in)), np.zeros(n_out),
                                output_activation if last else hidden_activation))
        return cls(layers)

    @property
    def in_size(self) -> int:
        return self.layers[0].weight.shape[1]

    @property
    def out_size(self) -> int:
        return self.layers[-1].weight.shape[0]

    @property
    def params(self) -> list[np.ndarray]:
        out = []
        for layer in self.layers:
            out += [layer.weight, layer.bias]
        return out

    def set_params(self, params: list[np.ndarray]) -> None:
        check_congruent(self.params, params)
        for i, layer in enumerate(self.layers):
            layer.weight = np.array(params[2 * i], dtype=float)
            layer.bias = np.array(params[2 * i + 1], dtype=float)
        self.version += 1

    def copy(self) -> "Network":
        return Network([Layer(l.weight.copy(), l.bias.copy(), l.activation) for l in self.layers])

    def __call__(self, x) -> np.ndarray:
        return forward(self, x)[0]


@dataclass
class Cache:
    network: Network
    version: int
    inputs: list[np.ndarray]  # input to each layer
    outputs: list[np.ndarray]  # post-activation of each layer
    batched: bool


@dataclass
class Gradient:
    params: list[np.ndarray]
    input: np.ndarray


@dataclass
class OptimizerState:
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)
    step: int = 0

    @classmethod
    def for_params(cls, params, lr: float, **kwargs) -> "OptimizerState":
        return cls(lr=lr, m=[np.zeros_like(p) for p in params], v=[np.zeros_like(p) for p in params], **kwargs)


def check_congruent(a: list[np.ndarray], b: list[np.ndarray]) -> None:
    if len(a) != len(b) or any(np.shape(x) != np.shape(y) for x, y in zip(a, b)):
        raise ShapeError("parameter lists are not shape-congruent")


def forward(net: Network, x) -> tuple[np.ndarray, Cache]:
    x = np.asarray(x, dtype=float)
    batched = x.ndim == 2
    if x.ndim not in (1, 2) or x.shape[-1] != net.in_size:
        raise ShapeError(f"network expects input size {net.in_size}, got shape {x.shape}")
    h = x if batched else x[None, :]
    inputs, outputs = [], []
    for layer in net.layers:
        inputs.append(h)
        z = h @ layer.weight.T + layer.bias
        h = np.tanh(z) if layer.activation == "tanh" else z
        outputs.append(h)
    out = h if batched else h[0]
    return out, Cache(net, net.version, inputs, outputs, batched)


def backward(net: Network, cache: Cache, output_grad) -> Gradient:
    """Gradients of ``sum(output * output_grad)`` with respect to parameters and input."""
    if cache.network is not net or cache.version != net.version:
        raise UsageError("stale cache: network parameters changed since forward()")
    g = np.asarray(output_grad, dtype=float)
    expected = cache.outputs[-1].shape if cache.batched else cache.outputs[-1].shape[1:]
    if g.shape != expected:
        raise ShapeError(f"output_grad shape {g.shape} does not match output {expected}")
    if not cache.batched:
        g = g[None, :]
    grads: list[np.ndarray] = []
    for layer, h_in, h_out in zip(reversed(net.layers), reversed(cache.inputs), reversed(cache.outputs)):
        if layer.activation == "tanh":
            g = g * (1.0 - h_out ** 2)
        grads = [g.T @ h_in, g.sum(axis=0)] + grads
        g = g @ layer.weight
    return Gradient(grads, g if cache.batched else g[0])


def adam_step(params: list[np.ndarray], grads: list[np.ndarray],
              state: OptimizerState) -> tuple[list[np.ndarray], OptimizerState]:
    """Bias-corrected Adam; returns new parameter arrays and a new state."""
    check_congruent(params, grads)
    check_congruent(params, state.m)
    step = state.step + 1
    b1, b2 = state.beta1, state.beta2
    m = [b1 * mi + (1 - b1) * g for mi, g in zip(state.m, grads)]
    v = [b2 * vi + (1 - b2) * g * g for vi, g in zip(state.v, grads)]
    c1 = 1 - b1 ** step
    c2 = 1 - b2 ** step
    new = [p - state.lr * (mi / c1) / (np.sqrt(vi / c2) + state.eps) for p, mi, vi in zip(params, m, v)]
    return new, OptimizerState(state.lr, b1, b2, state.eps, m, v, step)


def clip_by_global_norm(grads: list[np.ndarray], max_norm: float) -> tuple[list[np.ndarray], float]:
    norm = float(np.sqrt(sum(float(np.sum(g * g)) for g in grads)))
    if norm > max_norm:
        scale = max_norm / (norm + 1e-6)
        grads = [g * scale for g in grads]
    return grads, norm


def gradient_check(net: Network, loss_fn, x, h: float = 1e-3, backward_fn=None) -> float:
    """Largest relative disagreement between backprop and finite differences.

    ``loss_fn(output) -> (loss, dloss/doutput)`` must broadcast over a leading
    batch axis (one loss per row): every single-entry perturbation of a layer is
    evaluated as one batched forward pass.  Derivatives use the fourth-order
    central stencil.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ShapeError("gradient_check takes a single input vector")
    out, cache = forward(net, x)
    _, dout = loss_fn(out)
    analytic = (backward_fn or backward)(net, cache, dout).params
    stencil = ((2 * h, -1.0), (h, 8.0), (-h, -8.0), (-2 * h, 1.0))

    worst = 0.0
    for idx, layer in enumerate(net.layers):
        h_in = cache.inputs[idx][0]
        z = h_in @ layer.weight.T + layer.bias
        n_out, n_in = layer.weight.shape
        # row r of each batch perturbs one parameter; weights first, then biases
        dz_weight = np.zeros((n_out * n_in, n_out))
        dz_weight[np.arange(n_out * n_in), np.repeat(np.arange(n_out), n_in)] = np.tile(h_in, n_out)
        dz_bias = np.eye(n_out)
        numeric_w = np.zeros(n_out * n_in)
        numeric_b = np.zeros(n_out)
        for step, coef in stencil:
            numeric_w += coef * _downstream_loss(net, idx, z + step * dz_weight, loss_fn)
            numeric_b += coef * _downstream_loss(net, idx, z + step * dz_bias, loss_fn)
        for a, n in ((analytic[2 * idx].reshape(-1), numeric_w / (12 * h)),
                     (analytic[2 * idx + 1], numeric_b / (12 * h))):
            err = np.abs(a - n) / np.maximum(1e-8, np.abs(a) + np.abs(n))
            worst = max(worst, float(err.max(initial=0.0)))
    return worst


def _downstream_loss(net: Network, idx: int, z: np.ndarray, loss_fn) -> np.ndarray:
    """Loss for a batch of pre-activations ``z`` at layer ``idx``."""
    layer = net.layers[idx]
    h = np.tanh(z) if layer.activation == "tanh" else z
    for nxt in net.layers[idx + 1:]:
        h = h @ nxt.weight.T + nxt.bias
        if nxt.activation == "tanh":
            h = np.tanh(h)
    return np.asarray(loss_fn(h)[0], dtype=float).reshape(-1)


def save_checkpoint(path, networks: dict[str, Network], extras: dict[str, np.ndarray] | None = None) -> None:
    """Write networks to an ``.npz`` archive.

    Layout (format version 1)::

        format_version             int64 scalar
        networks                   names joined by ','
        <name>/num_layers          int64 scalar
        <name>/<i>/weight, bias    float64 arrays
        <name>/<i>/activation      str scalar
        extra/<key>                float64 arrays (e.g. a policy log-std)
    """
    arrays: dict[str, np.ndarray] = {
        "format_version": np.array(CHECKPOINT_VERSION),
        "networks": np.array(",".join(networks)),
    }
    for name, net in networks.items():
        arrays[f"{name}/num_layers"] = np.array(len(net.layers))
        for i, layer in enumerate(net.layers):
            arrays[f"{name}/{i}/weight"] = layer.weight
            arrays[f"{name}/{i}/bias"] = layer.bias
            arrays[f"{name}/{i}/activation"] = np.array(layer.activation)
    for key, value in (extras or {}).items():
        arrays[f"extra/{key}"] = np.asarray(value, dtype=float)
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def load_checkpoint(path) -> tuple[dict[str, Network], dict[str, np.ndarray]]:
    with np.load(Path(path), allow_pickle=False) as data:
        version = int(data["format_version"])
        if version != CHECKPOINT_VERSION:
            raise ConfigError(f"unsupported checkpoint format version {version}")
        names = [n for n in str(data["networks"]).split(",") if n]
        networks = {}
        for name in names:
            layers = [Layer(data[f"{name}/{i}/weight"].copy(), data[f"{name}/{i}/bias"].copy(),
                            str(data[f"{name}/{i}/activation"]))
                      for i in range(int(data[f"{name}/num_layers"]))]
            networks[name] = Network(layers)
        extras = {k.split("/", 1)[1]: data[k].copy() for k in data.files if k.startswith("extra/")}
    return networks, extras
