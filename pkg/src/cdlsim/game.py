"""The N-player cooperate/defect training game and its pure Nash equilibria.

Players are identified by the keys of ``LossRecord.theta``; a strategy
profile is a tuple of ``"CP"``/``"DF"`` in sorted-player order.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from ._validation import ContractViolation, check_positive

CP = "CP"
DF = "DF"
LOSS_FLOOR = 1e-12
MAX_ENUMERATION_PLAYERS = 20


class MissingLossError(KeyError):
    def __init__(self, player, what="phi"):
        self.player = player
        super().__init__(f"no {what} loss available for player {player!r}")

    def __str__(self):
        return self.args[0]


@dataclass(frozen=True)
class CostModel:
    c_plocal: float = 1.0
    c_pglobal: float = 0.2
    c_m: float = 0.1
    c_m_prime: float = 0.1

    def __post_init__(self):
        for name in ("c_plocal", "c_pglobal", "c_m", "c_m_prime"):
            check_positive(getattr(self, name), name, allow_zero=True)

    @property
    def total(self) -> float:
        return self.c_plocal + self.c_m + self.c_m_prime + self.c_pglobal

    @property
    def participation(self) -> float:
        """Costs a defector saves: upload, download and global computation."""
        return self.c_m + self.c_m_prime + self.c_pglobal

    def to_dict(self) -> dict:
        return {"c_plocal": self.c_plocal, "c_pglobal": self.c_pglobal, "c_m": self.c_m,
                "c_m_prime": self.c_m_prime, "c_t": self.total}


@dataclass(frozen=True)
class PayoffConfig:
    B: float = 1.0
    costs: CostModel = field(default_factory=CostModel)

    def __post_init__(self):
        check_positive(self.B, "B")

    def to_dict(self) -> dict:
        return {"B": self.B, "costs": self.costs.to_dict()}


def _clamp(mapping) -> dict:
    return {k: max(float(v), LOSS_FLOOR) for k, v in (mapping or {}).items()}


@dataclass
class LossRecord:
    """Per-player losses.

    ``phi`` for a given cooperator set is resolved by :meth:`phi_for`: a lone
    cooperator has no partners and so gets its solo loss; otherwise an exact
    entry of ``phi_table`` (keyed by frozenset of cooperators) wins, then the
    linear ``gain`` model, then the coalition-independent ``phi`` map.
    """

    theta: dict
    phi: dict = field(default_factory=dict)
    tau: dict = field(default_factory=dict)
    gain: float | None = None
    phi_table: dict = field(default_factory=dict)

    def __post_init__(self):
        self.theta = _clamp(self.theta)
        self.phi = _clamp(self.phi)
        self.tau = _clamp(self.tau)
        self.phi_table = {frozenset(k): _clamp(v) for k, v in (self.phi_table or {}).items()}
        if self.gain is not None and not 0 <= self.gain < 1:
            raise ContractViolation(f"gain must lie in [0, 1), got {self.gain}")

    @property
    def players(self) -> list:
        return sorted(self.theta)

    @property
    def num_players(self) -> int:
        return len(self.theta)

    def theta_of(self, i) -> float:
        try:
            return self.theta[i]
        except KeyError:
            raise MissingLossError(i, "theta") from None

    def phi_for(self, i, coalition) -> float:
        coalition = frozenset(coalition)
        if i not in coalition:
            raise ContractViolation(f"player {i!r} is not in the cooperator set")
        if len(coalition) == 1:
            return self.theta_of(i)
        entry = self.phi_table.get(coalition)
        if entry is not None and i in entry:
            return entry[i]
        if self.gain is not None:
            n = self.num_players
            return max(self.theta_of(i) * (1 - self.gain * (len(coalition) - 1) / (n - 1)),
                       LOSS_FLOOR)
        if i in self.phi:
            return self.phi[i]
        raise MissingLossError(i)

    @property
    def size_only(self) -> bool:
        """True when phi depends on the cooperator set only through its size."""
        return not self.phi_table

    def to_dict(self) -> dict:
        out = {
            "theta": {str(k): v for k, v in sorted(self.theta.items())},
            "phi": {str(k): v for k, v in sorted(self.phi.items())},
            "tau": {str(k): v for k, v in sorted(self.tau.items())},
            "gain": self.gain,
        }
        if self.phi_table:
            out["phi_table"] = [
                {"cooperators": sorted(k), "phi": {str(p): v for p, v in sorted(e.items())}}
                for k, e in sorted(self.phi_table.items(), key=lambda kv: sorted(kv[0]))
            ]
        return out


@dataclass
class GameOutcome:
    profile: tuple
    payoffs: dict
    num_cooperators: int
    num_defectors: int

    def to_dict(self) -> dict:
        return {"profile": list(self.profile),
                "payoffs": {str(k): v for k, v in sorted(self.payoffs.items())},
                "num_cooperators": self.num_cooperators,
                "num_defectors": self.num_defectors}


class NashCheck(NamedTuple):
    is_nash: bool
    deviator: object = None
    gain: float = 0.0

    def __bool__(self):
        return self.is_nash


def payoff_cp(phi_i: float, cfg: PayoffConfig) -> float:
    if not phi_i > 0:
        raise ContractViolation(f"phi must be > 0, got {phi_i}")
    return cfg.B / phi_i - cfg.costs.total


def payoff_df(theta_i: float, cfg: PayoffConfig) -> float:
    if not theta_i > 0:
        raise ContractViolation(f"theta must be > 0, got {theta_i}")
    return cfg.B / theta_i - cfg.costs.c_plocal


def _check_profile(profile, losses: LossRecord) -> tuple:
    profile = tuple(profile)
    if len(profile) != losses.num_players:
        raise ContractViolation(
            f"profile has {len(profile)} entries for {losses.num_players} players")
    bad = [s for s in profile if s not in (CP, DF)]
    if bad:
        raise ContractViolation(f"unknown strategies {bad}")
    return profile


def profile_payoffs(profile, losses: LossRecord, cfg: PayoffConfig) -> GameOutcome:
    profile = _check_profile(profile, losses)
    players = losses.players
    coalition = frozenset(p for p, s in zip(players, profile) if s == CP)
    payoffs = {}
    for p, s in zip(players, profile):
        if s == CP:
            payoffs[p] = payoff_cp(losses.phi_for(p, coalition), cfg)
        else:
            payoffs[p] = payoff_df(losses.theta_of(p), cfg)
    c = len(coalition)
    return GameOutcome(profile, payoffs, c, len(players) - c)


def _flip(profile: tuple, idx: int) -> tuple:
    out = list(profile)
    out[idx] = DF if out[idx] == CP else CP
    return tuple(out)


def is_nash(profile, losses: LossRecord, cfg: PayoffConfig) -> NashCheck:
    """Nash iff no single player strictly gains by switching; ties keep it Nash."""
    profile = _check_profile(profile, losses)
    base = profile_payoffs(profile, losses, cfg).payoffs
    best = None
    for idx, p in enumerate(losses.players):
        gain = profile_payoffs(_flip(profile, idx), losses, cfg).payoffs[p] - base[p]
        if gain > 0 and (best is None or gain > best[1]):
            best = (p, gain)
    if best is None:
        return NashCheck(True)
    return NashCheck(False, *best)


def free_rider_condition(i, losses: LossRecord, cfg: PayoffConfig) -> bool:
    """True iff player ``i`` strictly prefers defecting from the all-cooperate profile."""
    phi = losses.phi_for(i, losses.players)
    theta = losses.theta_of(i)
    if not (phi > 0 and theta > 0):
        raise ContractViolation("losses must be positive")
    return cfg.B * (1.0 / phi - 1.0 / theta) < cfg.costs.participation


def all_profiles(n: int):
    return itertools.product((CP, DF), repeat=n)


def _enumerate_by_size(losses: LossRecord, cfg: PayoffConfig) -> list[tuple]:
    # phi depends only on (player, coalition size): vectorise over all 2^N profiles.
    players = losses.players
    n = len(players)
    theta = np.array([losses.theta_of(p) for p in players])
    phi_by_size = np.empty((n, n + 1))
    phi_by_size[:, 0] = np.nan
    for i, p in enumerate(players):
        for size in range(1, n + 1):
            others = [q for q in players if q != p][: size - 1]
            phi_by_size[i, size] = losses.phi_for(p, [p, *others])
    u_df = cfg.B / theta - cfg.costs.c_plocal
    u_cp = cfg.B / phi_by_size - cfg.costs.total

    codes = np.arange(2 ** n, dtype=np.int64)
    shifts = np.arange(n - 1, -1, -1, dtype=np.int64)
    is_df = ((codes[:, None] >> shifts[None, :]) & 1).astype(bool)
    size = n - is_df.sum(axis=1)
    rows = np.arange(n)[None, :]
    # CP player leaves: coalition shrinks to size-1 but its own payoff becomes u_df.
    stay_cp = u_cp[rows, np.maximum(size, 1)[:, None]]
    cp_gain = u_df[None, :] - stay_cp
    # DF player joins: coalition grows to size+1.
    join_cp = u_cp[rows, np.minimum(size + 1, n)[:, None]]
    df_gain = join_cp - u_df[None, :]
    gain = np.where(is_df, df_gain, cp_gain)
    stable = ~(gain > 0).any(axis=1)
    return [tuple(DF if b else CP for b in is_df[k]) for k in np.flatnonzero(stable)]


def enumerate_nash(losses: LossRecord, cfg: PayoffConfig,
                   max_players: int = MAX_ENUMERATION_PLAYERS) -> list[tuple]:
    """All pure-strategy equilibria, in lexicographic order (CP before DF)."""
    n = losses.num_players
    if n > max_players:
        raise ContractViolation(
            f"refusing to enumerate 2^{n} profiles; at most {max_players} players supported")
    if n == 0:
        return []
    if losses.size_only:
        return _enumerate_by_size(losses, cfg)
    return [p for p in all_profiles(n) if is_nash(p, losses, cfg)]


def calibrate_gain(theta: dict, phi_all_cp: dict) -> float:
    """Linear coalition gain matching measured all-cooperate losses, clipped to [0, 1)."""
    ratios = [1.0 - phi_all_cp[i] / theta[i] for i in phi_all_cp]
    if not ratios:
        return 0.0
    return float(np.clip(np.mean(ratios), 0.0, 1.0 - 1e-9))


def game_report(losses: LossRecord, cfg: PayoffConfig, profiles=None,
                max_players: int = MAX_ENUMERATION_PLAYERS) -> dict:
    """JSON-ready summary: payoffs of the examined profiles, equilibria, free riders."""
    players = losses.players
    n = len(players)
    if profiles is None:
        profiles = [tuple([CP] * n), tuple([DF] * n)]
    examined = []
    for prof in profiles:
        try:
            outcome = profile_payoffs(prof, losses, cfg)
            check = is_nash(prof, losses, cfg)
        except MissingLossError as exc:
            examined.append({"profile": list(prof), "error": str(exc)})
            continue
        row = outcome.to_dict()
        row["is_nash"] = check.is_nash
        if not check.is_nash:
            row["deviator"] = str(check.deviator)
            row["deviation_gain"] = check.gain
        examined.append(row)
    report = {"examined_profiles": examined}
    try:
        report["equilibria"] = [list(p) for p in enumerate_nash(losses, cfg, max_players)]
    except (ContractViolation, MissingLossError) as exc:
        report["equilibria"] = None
        report["equilibria_skipped"] = str(exc)
    try:
        report["free_rider_condition"] = {str(p): free_rider_condition(p, losses, cfg)
                                          for p in players}
    except MissingLossError as exc:
        report["free_rider_condition"] = None
        report["free_rider_skipped"] = str(exc)
    return report
