"""Random loss/cost tables shared by the game tests and the acceptance run."""
from __future__ import annotations

import itertools

from cdlsim import game


def random_table(rng, n, size_only=False, zero_comm=False):
    """Return (LossRecord, PayoffConfig, phi_of) for players 0..n-1.

    ``phi_of`` is a plain-dict lookup the oracle can use without touching the
    library's resolution rules: a lone cooperator keeps its solo loss.
    """
    theta = {i: float(rng.uniform(0.2, 3.0)) for i in range(n)}
    raw = {}
    gain = None
    if size_only:
        gain = float(rng.uniform(0.0, 0.9))
        for size in range(2, n + 1):
            for coalition in itertools.combinations(range(n), size):
                raw[frozenset(coalition)] = {
                    i: theta[i] * (1 - gain * (size - 1) / (n - 1)) for i in coalition}
        losses = game.LossRecord(theta, gain=gain)
    else:
        for size in range(2, n + 1):
            for coalition in itertools.combinations(range(n), size):
                raw[frozenset(coalition)] = {
                    i: theta[i] * float(rng.uniform(0.3, 1.2)) for i in coalition}
        losses = game.LossRecord(theta, phi_table=raw)

    def phi_of(i, coalition):
        if len(coalition) == 1:
            return theta[i]
        return raw[frozenset(coalition)][i]

    if zero_comm:
        costs = game.CostModel(float(rng.uniform(0, 1)), 0.0, 0.0, 0.0)
    else:
        costs = game.CostModel(*(float(c) for c in rng.uniform(0.01, 1.0, size=4)))
    cfg = game.PayoffConfig(float(rng.uniform(0.05, 2.0)), costs)
    return losses, cfg, phi_of


def oracle_equilibria(losses, cfg, phi_of):
    from oracles import brute_force_nash

    n = losses.num_players
    theta = [losses.theta[i] for i in range(n)]
    found = brute_force_nash(theta, phi_of, cfg.B, cfg.costs.c_plocal, cfg.costs.participation)
    return {tuple(game.CP if b else game.DF for b in prof) for prof in found}
