"""Edge-device behaviour: local multi-step SGD, solo training, and PS participation."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import partial

import numpy as np

from . import model, server
from ._validation import ContractViolation, as_vector
from .dataset import LabeledDataset

CP = "CP"
DF = "DF"


@dataclass(frozen=True)
class TrainingConfig:
    batch_size: int = 10
    local_epochs: int = 1
    learning_rate: float = 0.01
    rounds: int = 20
    loss_tol: float = 0.0

    def __post_init__(self):
        if self.batch_size < 1 or self.local_epochs < 1 or self.rounds < 1:
            raise ContractViolation("batch_size, local_epochs and rounds must be >= 1")
        if not self.learning_rate > 0:
            raise ContractViolation(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.loss_tol < 0:
            raise ContractViolation(f"loss_tol must be >= 0, got {self.loss_tol}")

    def to_dict(self) -> dict:
        return {"batch_size": self.batch_size, "local_epochs": self.local_epochs,
                "learning_rate": self.learning_rate, "rounds": self.rounds,
                "loss_tol": self.loss_tol}


@dataclass
class DeviceState:
    id: int
    data: LabeledDataset
    params: np.ndarray | None = None
    strategy: str = CP
    loss_history: list = field(default_factory=list)


def round_seed(seed, device_id, round_index) -> list[int]:
    """Shuffle seed for one device in one round."""
    base = list(seed) if isinstance(seed, (list, tuple)) else [int(seed)]
    return base + [int(device_id), int(round_index)]


def minibatches(n: int, batch_size: int, rng: np.random.Generator):
    """Index arrays for one epoch. A single full batch keeps the original row order."""
    if batch_size >= n:
        yield np.arange(n)
        return
    order = rng.permutation(n)
    for start in range(0, n, batch_size):
        yield order[start:start + batch_size]


def local_training_round(spec, dev: DeviceState, base, cfg: TrainingConfig, seed,
                         grad_fn=None) -> np.ndarray:
    """Run ``H`` local epochs from ``base`` and return the accumulated delta.

    Gradients are taken at ``base + delta`` after each step.  ``grad_fn``
    overrides the network gradient, taking ``(params, Minibatch)``.
    """
    data = dev.data
    if len(data) == 0:
        raise ContractViolation(f"device {dev.id} has no data")
    if grad_fn is None:
        grad_fn = partial(model.gradient, spec)
    base = as_vector(base, "base")
    rng = np.random.default_rng(seed)
    delta = np.zeros_like(base)
    for _ in range(cfg.local_epochs):
        for idx in minibatches(len(data), cfg.batch_size, rng):
            batch = model.Minibatch(data.features[idx], data.labels[idx])
            delta = model.sgd_accumulate(delta, grad_fn(base + delta, batch), cfg.learning_rate)
    dev.params = base + delta
    return delta


def _eval_loss(spec, params, data: LabeledDataset) -> float:
    return model.loss(spec, params, model.Minibatch(data.features, data.labels))


def run_solo(spec, dev: DeviceState, cfg: TrainingConfig, eval_data: LabeledDataset,
             seed, init_params=None) -> float:
    """Train alone for up to ``cfg.rounds`` rounds; return the final eval loss."""
    if len(dev.data) == 0:
        raise ContractViolation(f"device {dev.id} has no data")
    params = model.init_params(spec, seed) if init_params is None else as_vector(init_params).copy()
    dev.loss_history = []
    prev = None
    for r in range(cfg.rounds):
        params = params + local_training_round(spec, dev, params, cfg, round_seed(seed, dev.id, r))
        current = _eval_loss(spec, params, eval_data)
        dev.loss_history.append(current)
        if prev is not None and abs(current - prev) < cfg.loss_tol:
            break
        prev = current
    dev.params = params
    return dev.loss_history[-1]


def collaborative_rounds(spec, devices: list[DeviceState], state: server.ServerState,
                         cfg: TrainingConfig, seed, rounds: int | None = None,
                         aux: LabeledDataset | None = None,
                         eval_data: LabeledDataset | None = None) -> list[dict]:
    """Drive the cooperators through ``rounds`` rounds against one server.

    Every round each cooperator downloads the same snapshot, trains locally,
    and the uploads are applied in a seeded order.  With ``aux`` given, each
    upload is scored on it against the round's snapshot.  Returns the
    per-round uploads.
    """
    for dev in devices:
        if dev.strategy != CP:
            raise ContractViolation(f"device {dev.id} is not a cooperator")
    rounds = cfg.rounds if rounds is None else rounds
    by_id = {dev.id: dev for dev in devices}
    for dev in devices:
        dev.loss_history = []
    history = []
    for _ in range(rounds):
        r = state.round_index
        snap = server.snapshot(state)
        deltas = {dev.id: local_training_round(spec, dev, snap.global_params, cfg,
                                               round_seed(seed, dev.id, r))
                  for dev in devices}
        order = server.upload_order(by_id, seed, r)
        if aux is not None:
            # score against the snapshot each delta was trained from, before any
            # of this round's uploads land, so tau does not depend on upload order
            for who in order:
                server.score_on_auxiliary(state, who, deltas[who], aux)
        for who in order:
            server.apply_update(state, who, deltas[who])
        state.round_index += 1
        if eval_data is not None:
            current = _eval_loss(spec, state.global_params, eval_data)
            for dev in devices:
                dev.loss_history.append(current)
        history.append(deltas)
    for dev in devices:
        dev.params = state.global_params.copy()
    return history


def participate(spec, dev: DeviceState, state: server.ServerState, cfg: TrainingConfig,
                seed, eval_data: LabeledDataset | None = None) -> list[np.ndarray]:
    """A lone cooperator's rounds against ``state``; returns its uploads in order."""
    history = collaborative_rounds(spec, [dev], state, cfg, seed, eval_data=eval_data)
    return [h[dev.id] for h in history]
