"""Feed-forward softmax classifier over a flat parameter vector.

Every function here is pure: parameters live in one contiguous float64
vector whose layout is fixed by :class:`ModelSpec` (layer by layer, each
layer stored as its ``fan_in x fan_out`` weight matrix in row-major order
followed by its ``fan_out`` biases).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._validation import ContractViolation, as_vector, check_same_length

PROB_FLOOR = 1e-12


@dataclass(frozen=True)
class ModelSpec:
    input_dim: int
    num_classes: int
    hidden_dims: tuple[int, ...] = (64,)
    activation: str = "relu"

    def __post_init__(self):
        object.__setattr__(self, "hidden_dims", tuple(int(h) for h in self.hidden_dims))
        if self.input_dim < 1:
            raise ContractViolation(f"input_dim must be >= 1, got {self.input_dim}")
        if self.num_classes < 2:
            raise ContractViolation(f"num_classes must be >= 2, got {self.num_classes}")
        if any(h < 1 for h in self.hidden_dims):
            raise ContractViolation(f"hidden_dims must be positive, got {self.hidden_dims}")
        if self.activation != "relu":
            raise ContractViolation(f"unsupported activation {self.activation!r}")

    @property
    def layer_dims(self) -> list[tuple[int, int]]:
        sizes = [self.input_dim, *self.hidden_dims, self.num_classes]
        return list(zip(sizes[:-1], sizes[1:]))

    @property
    def num_params(self) -> int:
        return sum((fan_in + 1) * fan_out for fan_in, fan_out in self.layer_dims)

    def to_dict(self) -> dict:
        return {
            "input_dim": self.input_dim,
            "hidden_dims": list(self.hidden_dims),
            "num_classes": self.num_classes,
            "activation": self.activation,
        }


@dataclass
class Minibatch:
    features: np.ndarray
    labels: np.ndarray = field(default=None)

    def __post_init__(self):
        self.features = np.atleast_2d(np.asarray(self.features, dtype=np.float64))
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)

    def __len__(self):
        return self.features.shape[0]


def unpack(spec: ModelSpec, params) -> list[tuple[np.ndarray, np.ndarray]]:
    """Split a flat vector into per-layer ``(W, b)`` views (no copies)."""
    params = as_vector(params, "params")
    if params.shape[0] != spec.num_params:
        raise ContractViolation(
            f"parameter vector has length {params.shape[0]}, spec needs {spec.num_params}"
        )
    layers = []
    offset = 0
    for fan_in, fan_out in spec.layer_dims:
        w = params[offset:offset + fan_in * fan_out].reshape(fan_in, fan_out)
        offset += fan_in * fan_out
        b = params[offset:offset + fan_out]
        offset += fan_out
        layers.append((w, b))
    return layers


def pack(layers) -> np.ndarray:
    return np.concatenate([np.concatenate([w.ravel(), b.ravel()]) for w, b in layers])


def init_params(spec: ModelSpec, seed: int) -> np.ndarray:
    """Glorot-uniform weights in +-sqrt(6 / (fan_in + fan_out)); zero biases."""
    rng = np.random.default_rng(seed)
    layers = []
    for fan_in, fan_out in spec.layer_dims:
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        layers.append((rng.uniform(-limit, limit, size=(fan_in, fan_out)), np.zeros(fan_out)))
    return pack(layers)


def _check_batch(spec: ModelSpec, batch: Minibatch, need_labels: bool) -> None:
    if batch.features.shape[1] != spec.input_dim:
        raise ContractViolation(
            f"batch has {batch.features.shape[1]} features, spec expects {spec.input_dim}"
        )
    if need_labels:
        if batch.labels is None:
            raise ContractViolation("batch has no labels")
        if batch.labels.shape[0] != batch.features.shape[0]:
            raise ContractViolation("features and labels disagree on row count")
        if len(batch) and (batch.labels.min() < 0 or batch.labels.max() >= spec.num_classes):
            raise ContractViolation(f"labels must lie in [0, {spec.num_classes})")


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _forward_cache(spec, params, x):
    layers = unpack(spec, params)
    activations = [x]
    pre = []
    h = x
    for idx, (w, b) in enumerate(layers):
        z = h @ w + b
        pre.append(z)
        h = np.maximum(z, 0.0) if idx < len(layers) - 1 else z
        activations.append(h)
    return layers, activations, pre, _softmax(pre[-1])


def forward(spec: ModelSpec, params, batch: Minibatch) -> np.ndarray:
    """Class-probability matrix, one softmax row per input row."""
    _check_batch(spec, batch, need_labels=False)
    return _forward_cache(spec, params, batch.features)[3]


def loss(spec: ModelSpec, params, batch: Minibatch) -> float:
    """Mean cross-entropy; probabilities are floored at 1e-12 before the log."""
    _check_batch(spec, batch, need_labels=True)
    if len(batch) == 0:
        raise ContractViolation("loss of an empty batch is undefined")
    probs = forward(spec, params, batch)
    picked = probs[np.arange(len(batch)), batch.labels]
    return float(-np.mean(np.log(np.maximum(picked, PROB_FLOOR))))


def gradient(spec: ModelSpec, params, batch: Minibatch) -> np.ndarray:
    """Back-propagated gradient of :func:`loss` with respect to every parameter."""
    _check_batch(spec, batch, need_labels=True)
    n = len(batch)
    if n == 0:
        raise ContractViolation("gradient of an empty batch is undefined")
    layers, activations, pre, probs = _forward_cache(spec, params, batch.features)
    delta = probs.copy()
    delta[np.arange(n), batch.labels] -= 1.0
    delta /= n
    grads = [None] * len(layers)
    for idx in range(len(layers) - 1, -1, -1):
        w, _ = layers[idx]
        grads[idx] = (activations[idx].T @ delta, delta.sum(axis=0))
        if idx:
            delta = (delta @ w.T) * (pre[idx - 1] > 0)
    return pack(grads)


def sgd_accumulate(delta, grad, alpha: float) -> np.ndarray:
    """One accumulation step ``delta - alpha * grad`` (returns a new array)."""
    delta = as_vector(delta, "delta")
    grad = as_vector(grad, "grad")
    check_same_length(delta, grad, "delta/grad")
    if alpha < 0:
        raise ContractViolation(f"alpha must be non-negative, got {alpha}")
    return delta - alpha * grad


def predict(spec: ModelSpec, params, features) -> np.ndarray:
    return forward(spec, params, Minibatch(features)).argmax(axis=1)
