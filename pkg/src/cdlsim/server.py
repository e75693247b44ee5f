"""Parameter server: additive global updates and auxiliary-set scoring."""
from __future__ import annotations

from dataclasses import dataclass, field
from types import MappingProxyType

import numpy as np

from . import model
from ._validation import ContractViolation, as_vector, check_same_length
from .dataset import LabeledDataset

_ORDER_STREAM = 0xFFFF_FFFF


@dataclass
class ServerState:
    spec: model.ModelSpec
    global_params: np.ndarray
    update_log: list = field(default_factory=list)
    tau: dict = field(default_factory=dict)
    round_index: int = 0

    @classmethod
    def fresh(cls, spec: model.ModelSpec, params=None, seed: int | None = None) -> "ServerState":
        """New server holding ``params``, a seeded init, or all zeros."""
        if params is None:
            params = np.zeros(spec.num_params) if seed is None else model.init_params(spec, seed)
        params = as_vector(params, "params").copy()
        if params.shape[0] != spec.num_params:
            raise ContractViolation("initial parameters do not match the model spec")
        return cls(spec, params)


@dataclass(frozen=True)
class Snapshot:
    global_params: np.ndarray
    tau: MappingProxyType
    round_index: int


def apply_update(state: ServerState, who, delta) -> ServerState:
    """``w_global += delta`` and record the event. Mutates and returns ``state``."""
    delta = as_vector(delta, "delta")
    check_same_length(state.global_params, delta, "global_params/delta")
    state.global_params = state.global_params + delta
    state.update_log.append((who, state.round_index))
    return state


def score_on_auxiliary(state: ServerState, who, delta, aux: LabeledDataset) -> float:
    """Auxiliary loss of the model the upload would produce; stored as ``tau[who]``."""
    if len(aux) == 0:
        raise ContractViolation("auxiliary dataset is empty")
    delta = as_vector(delta, "delta")
    check_same_length(state.global_params, delta, "global_params/delta")
    value = model.loss(state.spec, state.global_params + delta,
                       model.Minibatch(aux.features, aux.labels))
    state.tau[who] = value
    return value


def snapshot(state: ServerState) -> Snapshot:
    params = state.global_params.copy()
    params.setflags(write=False)
    return Snapshot(params, MappingProxyType(dict(state.tau)), state.round_index)


def upload_order(ids, seed, round_index: int) -> list:
    """Seeded interleaving of one round's uploads."""
    ids = sorted(ids)
    base = list(seed) if isinstance(seed, (list, tuple)) else [int(seed)]
    rng = np.random.default_rng(base + [_ORDER_STREAM, int(round_index)])
    return [ids[j] for j in rng.permutation(len(ids))]


def state_dump(state: ServerState) -> dict:
    return {
        "round": state.round_index,
        "global_norm": float(np.linalg.norm(state.global_params)),
        "tau": {str(k): v for k, v in sorted(state.tau.items())},
    }
