"""End-to-end experiment: data -> solo losses -> tau -> clusters -> coalitions -> game."""
from __future__ import annotations

import copy
import csv
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema
import numpy as np

from . import cluster, dataset, device, game, model, server
from ._validation import ConfigError, ContractViolation

log = logging.getLogger(__name__)

REPORT_SCHEMA_VERSION = 1
DEFAULT_MASTER_SEED = 1

# Sub-seed streams derived from the master seed.
_DATA, _AUX, _PLAN, _SOLO_INIT, _SOLO_SHUFFLE, _SERVER_INIT, _BOOT_SHUFFLE, _COLLAB_SHUFFLE = range(1, 9)

DEFAULTS = {
    "master_seed": DEFAULT_MASTER_SEED,
    "model": {"hidden_dims": [64], "activation": "relu"},
    "training": {"batch_size": 10, "local_epochs": 1, "learning_rate": 0.01,
                 "rounds": 20, "loss_tol": 0.0},
    "payoff": {"B": "auto", "B_ratio": 10.0,
               "costs": {"c_plocal": 1.0, "c_pglobal": 0.2, "c_m": 0.1, "c_m_prime": 0.1}},
    "partition": {"num_participants": 10, "rows_per_participant": 300,
                  "scheme": "unbalanced", "classes_per_participant": None},
    "data_source": {"kind": "synthetic", "num_classes": 27, "rows_per_class": 600,
                    "input_dim": 20, "separation": 5.0, "noise": 1.0},
    "aux_fraction": 0.1,
    "phi_mode": "measured",
    "gain": None,
    "k_policy": "auto",
    "k_max": None,
    "tau_source": "bootstrap",
    "eval_on": "aux",
    "bootstrap_rounds": 1,
    "max_nash_players": game.MAX_ENUMERATION_PLAYERS,
}

_number = {"type": "number"}
_pos_int = {"type": "integer", "minimum": 1}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "cdlsim experiment config",
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "master_seed": {"type": "integer", "minimum": 0},
        "model": {
            "type": "object", "additionalProperties": False,
            "properties": {"hidden_dims": {"type": "array", "items": _pos_int},
                           "activation": {"enum": ["relu"]}},
        },
        "training": {
            "type": "object", "additionalProperties": False,
            "properties": {"batch_size": _pos_int, "local_epochs": _pos_int,
                           "learning_rate": {"type": "number", "exclusiveMinimum": 0},
                           "rounds": _pos_int, "loss_tol": {"type": "number", "minimum": 0}},
        },
        "payoff": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "B": {"oneOf": [{"const": "auto"}, {"type": "number", "exclusiveMinimum": 0}]},
                "B_ratio": {"type": "number", "exclusiveMinimum": 0},
                "costs": {
                    "type": "object", "additionalProperties": False,
                    "properties": {k: {"type": "number", "minimum": 0}
                                   for k in ("c_plocal", "c_pglobal", "c_m", "c_m_prime")},
                },
            },
        },
        "partition": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "num_participants": _pos_int,
                "rows_per_participant": {"oneOf": [_pos_int, {"type": "array", "items": _pos_int}]},
                "scheme": {"enum": ["unbalanced", "explicit"]},
                "classes_per_participant": {
                    "oneOf": [{"type": "null"},
                              {"type": "array", "items": {"type": "array", "minItems": 1,
                                                          "items": {"type": "integer", "minimum": 0}}}]},
            },
        },
        "data_source": {
            "type": "object",
            "properties": {
                "kind": {"enum": ["synthetic", "aras"]},
                "num_classes": {"type": "integer", "minimum": 2},
                "rows_per_class": _pos_int, "input_dim": _pos_int,
                "separation": {"type": "number", "exclusiveMinimum": 0},
                "noise": {"type": "number", "minimum": 0},
                "paths": {"oneOf": [{"type": "string"}, {"type": "array", "items": {"type": "string"}}]},
                "window_seconds": _pos_int,
                "resident": {"enum": [1, 2]},
                "min_class_rows": {"type": "integer", "minimum": 0},
            },
            "required": ["kind"],
        },
        "aux_fraction": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
        "phi_mode": {"enum": ["measured", "model"]},
        "gain": {"oneOf": [{"type": "null"}, {"type": "number", "minimum": 0, "exclusiveMaximum": 1}]},
        "k_policy": {"oneOf": [{"const": "auto"}, _pos_int]},
        "k_max": {"oneOf": [{"type": "null"}, {"type": "integer", "minimum": 2}]},
        "tau_source": {"enum": ["bootstrap", "theta"]},
        "eval_on": {"enum": ["aux", "local"]},
        "bootstrap_rounds": _pos_int,
        "max_nash_players": _pos_int,
    },
}


def _merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict) and key != "data_source":
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


@dataclass
class ExperimentConfig:
    """Validated experiment settings; ``raw`` is the fully-defaulted echo."""

    raw: dict = field(default_factory=lambda: copy.deepcopy(DEFAULTS))

    def __post_init__(self):
        try:
            jsonschema.validate(self.raw, CONFIG_SCHEMA)
        except jsonschema.ValidationError as exc:
            path = "/".join(str(p) for p in exc.absolute_path) or "<root>"
            raise ConfigError(f"config invalid at {path}: {exc.message}") from None
        try:
            self.training = device.TrainingConfig(**self.raw["training"])
            costs = game.CostModel(**self.raw["payoff"]["costs"])
        except (ContractViolation, TypeError) as exc:
            raise ConfigError(str(exc)) from None
        self.costs = costs
        if self.raw["aux_fraction"] >= 1:
            raise ConfigError("aux_fraction must be < 1: the auxiliary hold-out would leave "
                              "no rows for participants")
        part = self.raw["partition"]
        if part["scheme"] == "explicit" and part["classes_per_participant"] is None:
            raise ConfigError("partition.scheme 'explicit' needs classes_per_participant")
        src = self.raw["data_source"]
        if src["kind"] == "synthetic":
            src.update({k: v for k, v in DEFAULTS["data_source"].items() if k not in src})
        else:
            if "paths" not in src:
                raise ConfigError("data_source.paths is required for kind 'aras'")
            src.setdefault("window_seconds", 60)
            src.setdefault("resident", 1)
            src.setdefault("min_class_rows", 1)

    @classmethod
    def from_dict(cls, overrides: dict | None = None) -> "ExperimentConfig":
        if overrides is not None and not isinstance(overrides, dict):
            raise ConfigError("config must be a JSON object")
        return cls(_merge(DEFAULTS, overrides or {}))

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            overrides = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON ({exc})") from None
        return cls.from_dict(overrides)

    @property
    def master_seed(self) -> int:
        return self.raw["master_seed"]

    def seed(self, stream: int, *extra) -> list[int]:
        return [self.master_seed, stream, *extra]

    def to_dict(self) -> dict:
        return copy.deepcopy(self.raw)


@dataclass
class RunReport:
    payload: dict
    timings: dict
    device_losses: list
    summary_rows: list

    @property
    def cooperation_rate(self) -> float:
        return self.payload["cooperation_rate"]

    def to_dict(self) -> dict:
        out = dict(self.payload)
        out["timings"] = self.timings
        return out

    def write(self, out_dir) -> Path:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "report.json").write_text(json.dumps(self.to_dict(), indent=2) + "\n")
        with open(out_dir / "device_losses.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["device", "phase", "round", "loss"])
            writer.writerows(self.device_losses)
        write_summary_csv(self.summary_rows, out_dir / "summary.csv")
        return out_dir


SUMMARY_FIELDS = ["device", "strategy", "theta", "phi", "tau", "payoff"]


def write_summary_csv(rows, path_or_file) -> None:
    if hasattr(path_or_file, "write"):
        _write_summary(rows, path_or_file)
    else:
        with open(path_or_file, "w", newline="") as fh:
            _write_summary(rows, fh)


def _write_summary(rows, fh) -> None:
    writer = csv.DictWriter(fh, fieldnames=SUMMARY_FIELDS)
    writer.writeheader()
    writer.writerows(rows)


# ----------------------------------------------------------------- pipeline

def load_data(cfg: ExperimentConfig) -> dataset.LabeledDataset:
    src = cfg.raw["data_source"]
    if src["kind"] == "synthetic":
        return dataset.synth_generate(src["num_classes"], src["rows_per_class"], src["input_dim"],
                                      src["separation"], cfg.seed(_DATA), noise=src["noise"])
    patterns = src["paths"] if isinstance(src["paths"], list) else [src["paths"]]
    logs = []
    for pattern in patterns:
        logs.extend(dataset.parse_aras_glob(pattern))
    logs.sort(key=lambda lg: (lg.house_id, lg.day_index))
    parts = [dataset.windowize(lg, src["window_seconds"], src["resident"]) for lg in logs]
    return dataset.LabeledDataset.concatenate(parts, dataset.NUM_ACTIVITIES)


def build_plan(cfg: ExperimentConfig, pool: dataset.LabeledDataset) -> dataset.PartitionPlan:
    part = cfg.raw["partition"]
    n = part["num_participants"]
    rows = part["rows_per_participant"]
    rows = [rows] * n if isinstance(rows, int) else list(rows)
    seed = cfg.seed(_PLAN)
    if part["scheme"] == "explicit":
        return dataset.PartitionPlan(n, part["classes_per_participant"], rows, seed)
    min_rows = cfg.raw["data_source"].get("min_class_rows", 1)
    present = np.flatnonzero(pool.class_histogram >= max(min_rows, 1))
    if len(present) == 0:
        raise ContractViolation("no class has enough rows to build a partition plan")
    base = dataset.unbalanced_plan(n, len(present), rows[0], seed)
    classes = [[int(present[c]) for c in subset] for subset in base.classes_per_participant]
    return dataset.PartitionPlan(n, classes, rows, seed)


def _loss_on(spec, params, data) -> float:
    return model.loss(spec, params, model.Minibatch(data.features, data.labels))


def run_coalition(spec, cfg: ExperimentConfig, parts, members, aux=None, rounds=None):
    """Collaborative training among ``members``; returns (server state, devices)."""
    state = server.ServerState.fresh(spec, model.init_params(spec, cfg.seed(_SERVER_INIT)))
    devs = [device.DeviceState(i, parts[i], strategy=device.CP) for i in sorted(members)]
    device.collaborative_rounds(spec, devs, state, cfg.training, cfg.seed(_COLLAB_SHUFFLE),
                                rounds=rounds, aux=aux)
    return state, devs


def run_experiment(cfg: ExperimentConfig) -> RunReport:
    timings = {}
    t_all = t0 = time.perf_counter()

    # (1) data, auxiliary hold-out, partition
    data = load_data(cfg)
    aux, pool = dataset.holdout_split(data, cfg.raw["aux_fraction"], cfg.seed(_AUX))
    if len(aux) == 0:
        raise ContractViolation("auxiliary dataset is empty")
    plan = build_plan(cfg, pool)
    parts = dataset.partition(pool, plan)
    used = np.concatenate([p.row_ids for p in parts])
    if np.intersect1d(used, aux.row_ids).size or len(np.unique(used)) != len(used):
        raise ContractViolation("auxiliary rows leaked into participant partitions")
    spec = model.ModelSpec(data.input_dim, data.num_classes,
                           tuple(cfg.raw["model"]["hidden_dims"]), cfg.raw["model"]["activation"])
    n = plan.num_participants
    players = list(range(n))
    eval_sets = {i: aux if cfg.raw["eval_on"] == "aux" else parts[i] for i in players}
    timings["data"] = time.perf_counter() - t0

    # (2) solo training -> theta
    t0 = time.perf_counter()
    device_losses = []
    theta = {}
    for i in players:
        dev = device.DeviceState(i, parts[i], strategy=device.DF)
        theta[i] = device.run_solo(spec, dev, cfg.training, eval_sets[i], cfg.seed(_SOLO_SHUFFLE),
                                   init_params=model.init_params(spec, cfg.seed(_SOLO_INIT, i)))
        device_losses += [(i, "solo", r, v) for r, v in enumerate(dev.loss_history)]
    timings["solo"] = time.perf_counter() - t0

    # (3) bootstrap round -> tau
    t0 = time.perf_counter()
    boot_state = server.ServerState.fresh(spec, model.init_params(spec, cfg.seed(_SERVER_INIT)))
    boot_devs = [device.DeviceState(i, parts[i]) for i in players]
    device.collaborative_rounds(spec, boot_devs, boot_state, cfg.training, cfg.seed(_BOOT_SHUFFLE),
                                rounds=cfg.raw["bootstrap_rounds"], aux=aux)
    tau = dict(sorted(boot_state.tau.items()))
    server_dumps = [dict(server.state_dump(boot_state), phase="bootstrap")]
    timings["bootstrap"] = time.perf_counter() - t0

    # (4) clustering -> fair strategy profile
    cluster_input = tau if cfg.raw["tau_source"] == "bootstrap" else theta
    k_policy = cfg.raw["k_policy"]
    if n < 2:
        assignment = cluster.kmeans_1d(cluster_input, 1)
    elif k_policy == "auto":
        k_max = cfg.raw["k_max"] or max(2, min(n - 1, 5))
        assignment = cluster.cluster_values(cluster_input, k_max=k_max)
    else:
        if k_policy > n:
            raise ConfigError(f"k_policy {k_policy} exceeds the {n} participants")
        assignment = cluster.cluster_values(cluster_input, k=k_policy)
    strategies = cluster.fair_strategy(assignment)
    profile = cluster.as_profile(strategies)
    fair_coalition = frozenset(i for i, s in strategies.items() if s == device.CP)

    # (5) coalition training -> phi
    t0 = time.perf_counter()
    everyone = frozenset(players)
    coalitions = {everyone, fair_coalition}
    if cfg.raw["phi_mode"] == "measured":
        for i in players:
            coalitions.add(fair_coalition ^ {i})
    coalitions = sorted((c for c in coalitions if len(c) >= 2), key=lambda c: (len(c), sorted(c)))
    phi_table = {}
    for members in coalitions:
        state, _ = run_coalition(spec, cfg, parts, members)
        phi_table[members] = {i: _loss_on(spec, state.global_params, eval_sets[i]) for i in members}
        server_dumps.append(dict(server.state_dump(state), phase="collaborative",
                                 cooperators=sorted(members)))
    phi_all = phi_table.get(everyone, {})
    gain = cfg.raw["gain"]
    if gain is None:
        gain = game.calibrate_gain(theta, phi_all) if phi_all else 0.0
    if cfg.raw["phi_mode"] == "measured":
        losses = game.LossRecord(theta, phi_all, tau, gain=gain, phi_table=phi_table)
    else:
        losses = game.LossRecord(theta, phi_all, tau, gain=gain)
    timings["collaborative"] = time.perf_counter() - t0

    # collaborative loss trajectory of the played coalition, for plotting
    if len(fair_coalition) >= 2:
        state = server.ServerState.fresh(spec, model.init_params(spec, cfg.seed(_SERVER_INIT)))
        devs = [device.DeviceState(i, parts[i]) for i in sorted(fair_coalition)]
        device.collaborative_rounds(spec, devs, state, cfg.training, cfg.seed(_COLLAB_SHUFFLE),
                                    eval_data=aux)
        device_losses += [(d.id, "collaborative", r, v) for d in devs
                          for r, v in enumerate(d.loss_history)]

    # (6) payoffs and equilibrium analysis
    t0 = time.perf_counter()
    payoff_raw = cfg.raw["payoff"]
    if payoff_raw["B"] == "auto":
        B = payoff_raw["B_ratio"] * cfg.costs.c_plocal * float(np.median(list(theta.values())))
    else:
        B = float(payoff_raw["B"])
    pcfg = game.PayoffConfig(B, cfg.costs)
    outcome = game.profile_payoffs(profile, losses, pcfg)
    all_cp, all_df = tuple([game.CP] * n), tuple([game.DF] * n)
    examined = list(dict.fromkeys([profile, all_cp, all_df]))
    analysis = game.game_report(losses, pcfg, examined, cfg.raw["max_nash_players"])
    timings["game"] = time.perf_counter() - t0

    # (7) report
    phi_played = {i: losses.phi_for(i, fair_coalition) for i in sorted(fair_coalition)}
    summary_rows = [
        {"device": i, "strategy": strategies[i], "theta": theta[i],
         "phi": phi_played.get(i, ""), "tau": tau[i], "payoff": outcome.payoffs[i]}
        for i in players
    ]
    c = outcome.num_cooperators
    payload = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "config": cfg.to_dict(),
        "model_spec": dict(spec.to_dict(), num_params=spec.num_params),
        "symbols": {
            "N": n,
            "n": int(sum(len(s) for s in plan.classes_per_participant)),
            "iot_devices_per_participant": [len(s) for s in plan.classes_per_participant],
            "K": cfg.training.batch_size,
            "H": cfg.training.local_epochs,
            "alpha": cfg.training.learning_rate,
            "D_sizes": [len(p) for p in parts],
            "theta": {str(k): v for k, v in theta.items()},
            "phi": {str(k): v for k, v in phi_played.items()},
            "tau": {str(k): v for k, v in tau.items()},
            "B": B,
            **cfg.costs.to_dict(),
            "C": c,
            "N_minus_C": n - c,
        },
        "data": {
            "source": cfg.raw["data_source"]["kind"],
            "total_rows": len(data),
            "aux_rows": len(aux),
            "aux_histogram": aux.class_histogram.tolist(),
            "partition_plan": plan.to_dict(),
            "partition_histograms": [p.class_histogram.tolist() for p in parts],
            "aux_excluded": True,
        },
        "losses": losses.to_dict(),
        "phi_mode": cfg.raw["phi_mode"],
        "cluster": dict(assignment.to_dict(), input=cfg.raw["tau_source"],
                        values={str(k): v for k, v in cluster_input.items()}),
        "strategy_profile": list(profile),
        "outcome": outcome.to_dict(),
        "game": analysis,
        "cooperation_rate": c / n,
        "server": server_dumps,
    }
    timings["total"] = time.perf_counter() - t_all
    log.info("run finished: cooperation rate %.2f (%d/%d)", c / n, c, n)
    return RunReport(payload, timings, device_losses, summary_rows)


def paper_config_path() -> Path:
    return Path(__file__).with_name("configs") / "paper_experiment.json"


def paper_config(**overrides) -> ExperimentConfig:
    raw = json.loads(paper_config_path().read_text())
    return ExperimentConfig.from_dict(_merge(raw, overrides))
