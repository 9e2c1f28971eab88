"""Dense feed-forward networks on flat float64 parameter vectors.

A model is a value: an architecture plus one flat vector. The flat
layout is fixed and relied on by serialization and by the parameter
distance computations elsewhere in the package:

    layer 0 weight (fan_in x fan_out, row-major), layer 0 bias,
    layer 1 weight, layer 1 bias, ...

Hidden layers use ReLU. Output heads: ``logits`` (raw affine output),
``softmax_simplex`` (rows on the probability simplex), and ``scalar``
(single raw output, used for value functions). All arithmetic is
float64; nothing here depends on global random state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NumericError

HEADS = ("logits", "softmax_simplex", "scalar")


@dataclass(frozen=True)
class ArchSpec:
    """Shape of a dense network; owns no parameters."""

    input_dim: int
    hidden_dims: tuple[int, ...] = ()
    output_dim: int = 1
    hidden_activation: str = "relu"
    output_head: str = "logits"

    def __post_init__(self) -> None:
        object.__setattr__(self, "hidden_dims", tuple(int(h) for h in self.hidden_dims))
        if self.input_dim < 1 or self.output_dim < 1:
            raise ConfigError("input_dim and output_dim must be positive")
        if any(h < 1 for h in self.hidden_dims):
            raise ConfigError("hidden layer widths must be positive")
        if self.hidden_activation != "relu":
            raise ConfigError(f"unsupported hidden activation: {self.hidden_activation!r}")
        if self.output_head not in HEADS:
            raise ConfigError(f"unsupported output head: {self.output_head!r}")
        if self.output_head == "scalar" and self.output_dim != 1:
            raise ConfigError("scalar head requires output_dim == 1")

    def layer_dims(self) -> list[tuple[int, int]]:
        """(fan_in, fan_out) per affine layer, input to output."""
        dims = (self.input_dim, *self.hidden_dims, self.output_dim)
        return list(zip(dims[:-1], dims[1:]))


def param_count(arch: ArchSpec) -> int:
    """Total parameters: sum of fan_in * fan_out + fan_out over layers."""
    return sum(fi * fo + fo for fi, fo in arch.layer_dims())


def layer_slices(arch: ArchSpec) -> list[tuple[slice, slice]]:
    """(weight, bias) slices of each layer inside the flat vector."""
    slices = []
    offset = 0
    for fan_in, fan_out in arch.layer_dims():
        w = slice(offset, offset + fan_in * fan_out)
        b = slice(w.stop, w.stop + fan_out)
        slices.append((w, b))
        offset = b.stop
    return slices


@dataclass
class MlpModel:
    """A network: architecture plus its flat float64 parameter vector."""

    arch: ArchSpec
    params: np.ndarray

    def __post_init__(self) -> None:
        self.params = np.asarray(self.params, dtype=np.float64)
        expected = param_count(self.arch)
        if self.params.ndim != 1 or self.params.size != expected:
            raise ConfigError(
                f"parameter vector has size {self.params.size}, arch needs {expected}"
            )


def init_params(arch: ArchSpec, rng: np.random.Generator) -> np.ndarray:
    """Uniform(-lim, lim) weights with lim = sqrt(6/(fan_in+fan_out)); zero biases."""
    parts = []
    for fan_in, fan_out in arch.layer_dims():
        lim = math.sqrt(6.0 / (fan_in + fan_out))
        parts.append(rng.uniform(-lim, lim, size=fan_in * fan_out))
        parts.append(np.zeros(fan_out))
    return np.concatenate(parts)


def unflatten(arch: ArchSpec, params: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
    """(weight matrix, bias vector) views per layer; no copies."""
    params = np.asarray(params, dtype=np.float64)
    if params.size != param_count(arch):
        raise ConfigError(
            f"parameter vector has size {params.size}, arch needs {param_count(arch)}"
        )
    layers = []
    for (wsl, bsl), (fan_in, fan_out) in zip(layer_slices(arch), arch.layer_dims()):
        layers.append((params[wsl].reshape(fan_in, fan_out), params[bsl]))
    return layers


def flatten(layers: list[tuple[np.ndarray, np.ndarray]]) -> np.ndarray:
    """Inverse of unflatten; bit-exact round trip."""
    parts = []
    for weight, bias in layers:
        parts.append(np.asarray(weight, dtype=np.float64).ravel())
        parts.append(np.asarray(bias, dtype=np.float64).ravel())
    return np.concatenate(parts)


def softmax(z: np.ndarray) -> np.ndarray:
    """Row-wise softmax with max subtraction."""
    z = np.asarray(z, dtype=np.float64)
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    m = z.max(axis=-1, keepdims=True)
    return z - m - np.log(np.exp(z - m).sum(axis=-1, keepdims=True))


class _ForwardCache:
    """Activations kept for one backward pass."""

    __slots__ = ("inputs", "pre", "out")

    def __init__(self, inputs: np.ndarray, pre: list[np.ndarray], out: np.ndarray):
        self.inputs = inputs  # inputs[l] feeds affine layer l
        self.pre = pre        # pre[l] is the affine output of layer l
        self.out = out        # post-head output


def _check_batch(arch: ArchSpec, batch: np.ndarray) -> np.ndarray:
    x = np.asarray(batch, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != arch.input_dim:
        raise ConfigError(
            f"batch shape {x.shape} incompatible with input_dim {arch.input_dim}"
        )
    return x


def forward_cached(model: MlpModel, batch: np.ndarray) -> tuple[np.ndarray, _ForwardCache]:
    x = _check_batch(model.arch, batch)
    layers = unflatten(model.arch, model.params)
    inputs, pre = [], []
    h = x
    for index, (weight, bias) in enumerate(layers):
        inputs.append(h)
        z = h @ weight + bias
        pre.append(z)
        if index < len(layers) - 1:
            h = np.maximum(z, 0.0)
    out = softmax(pre[-1]) if model.arch.output_head == "softmax_simplex" else pre[-1]
    return out, _ForwardCache(inputs, pre, out)


def forward(model: MlpModel, batch: np.ndarray) -> np.ndarray:
    """Post-head output for a 2-D batch, shape (n, output_dim)."""
    return forward_cached(model, batch)[0]


def forward_logits(model: MlpModel, batch: np.ndarray) -> np.ndarray:
    """Pre-head affine output; equals forward() for logits/scalar heads."""
    return forward_cached(model, batch)[1].pre[-1]


def backward_from_output(
    model: MlpModel, cache: _ForwardCache, dout: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Backpropagate d(objective)/d(head output).

    Returns (flat parameter gradient, gradient w.r.t. the input batch).
    The head Jacobian is applied here, so ``dout`` is always taken
    against the post-head output.
    """
    arch = model.arch
    dout = np.asarray(dout, dtype=np.float64)
    if dout.shape != cache.out.shape:
        raise ConfigError(f"dout shape {dout.shape} != output shape {cache.out.shape}")
    if arch.output_head == "softmax_simplex":
        y = cache.out
        dz = (dout - (dout * y).sum(axis=1, keepdims=True)) * y
    else:
        dz = dout
    grad = np.empty(param_count(arch))
    slices = layer_slices(arch)
    layers = unflatten(arch, model.params)
    dinput = np.zeros_like(cache.inputs[0])
    for index in range(len(layers) - 1, -1, -1):
        weight, _ = layers[index]
        wsl, bsl = slices[index]
        grad[wsl] = (cache.inputs[index].T @ dz).ravel()
        grad[bsl] = dz.sum(axis=0)
        dh = dz @ weight.T
        if index > 0:
            dz = dh * (cache.pre[index - 1] > 0.0)
        else:
            dinput = dh
    return grad, dinput


def _first_nonfinite_layer(cache: _ForwardCache) -> int:
    for index, z in enumerate(cache.pre):
        if not np.isfinite(z).all():
            return index
    return len(cache.pre) - 1


def ce_loss_from_logits(logits: np.ndarray, labels: np.ndarray) -> float:
    """Mean cross-entropy of integer labels under the given logits."""
    logp = log_softmax(logits)
    return float(-logp[np.arange(labels.size), labels].mean())


def backward_ce(
    model: MlpModel, batch: np.ndarray, labels: np.ndarray
) -> tuple[float, np.ndarray]:
    """Mean cross-entropy loss and its flat parameter gradient.

    Requires the ``logits`` head; raises NumericError naming the first
    offending layer if the loss is not finite.
    """
    if model.arch.output_head != "logits":
        raise ConfigError("cross-entropy backward requires the logits head")
    labels = np.asarray(labels)
    if labels.ndim != 1 or labels.size == 0:
        raise ConfigError("labels must be a non-empty 1-D integer array")
    if labels.min() < 0 or labels.max() >= model.arch.output_dim:
        raise ConfigError("label out of range for the output dimension")
    out, cache = forward_cached(model, batch)
    if labels.size != out.shape[0]:
        raise ConfigError(f"{out.shape[0]} rows but {labels.size} labels")
    loss = ce_loss_from_logits(out, labels)
    if not math.isfinite(loss):
        raise NumericError(
            f"non-finite loss; first non-finite activations at layer "
            f"{_first_nonfinite_layer(cache)}"
        )
    probs = softmax(out)
    dz = probs.copy()
    dz[np.arange(labels.size), labels] -= 1.0
    dz /= labels.size
    grad, _ = backward_from_output(model, cache, dz)
    return loss, grad


@dataclass(frozen=True)
class SgdConfig:
    """Plain minibatch SGD with optional decoupled L2 weight decay."""

    learning_rate: float = 0.1
    weight_decay: float = 0.0
    batch_size: int = 64
    epochs: int = 20

    def __post_init__(self) -> None:
        if self.learning_rate < 0 or self.weight_decay < 0:
            raise ConfigError("learning_rate and weight_decay must be non-negative")
        if self.batch_size < 1 or self.epochs < 0:
            raise ConfigError("batch_size must be >= 1 and epochs >= 0")


def sgd_epoch(
    model: MlpModel,
    features: np.ndarray,
    labels: np.ndarray,
    cfg: SgdConfig,
    rng: np.random.Generator,
) -> MlpModel:
    """Run cfg.epochs of shuffled minibatch SGD; returns a new model.

    Each epoch reshuffles; the short final batch is used as is. The
    update is params -= lr * (grad + weight_decay * params).
    """
    features = _check_batch(model.arch, features)
    n = features.shape[0]
    if n == 0:
        raise ConfigError("cannot train on an empty dataset")
    labels = np.asarray(labels)
    params = model.params.copy()
    work = MlpModel(model.arch, params)
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            take = order[start : start + cfg.batch_size]
            _, grad = backward_ce(work, features[take], labels[take])
            params -= cfg.learning_rate * (grad + cfg.weight_decay * params)
    return work
