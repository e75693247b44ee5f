"""Independent reference implementations used to check the library.

Nothing here imports the code paths it checks.
"""
from __future__ import annotations

import itertools
import math

import numpy as np


def central_differences(f, x, step=1e-5):
    x = np.array(x, dtype=np.float64)
    out = np.empty_like(x)
    for j in range(x.size):
        hi, lo = x.copy(), x.copy()
        hi[j] += step
        lo[j] -= step
        out[j] = (f(hi) - f(lo)) / (2 * step)
    return out


def max_relative_error(analytic, numeric, floor=1e-6):
    analytic = np.asarray(analytic)
    numeric = np.asarray(numeric)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float(np.max(np.abs(analytic - numeric) / denom))


def _ss(seg):
    mean = math.fsum(seg) / len(seg)
    return math.fsum((v - mean) ** 2 for v in seg)


def brute_force_kmeans_ss(values, k):
    """Minimum within-cluster SS over every contiguous k-split of the sorted values."""
    xs = sorted(float(v) for v in values)
    n = len(xs)
    best = math.inf
    for cuts in itertools.combinations(range(1, n), k - 1):
        bounds = (0, *cuts, n)
        total = math.fsum(_ss(xs[a:b]) for a, b in zip(bounds[:-1], bounds[1:]))
        best = min(best, total)
    return best


def brute_force_nash(theta, phi_of, B, c_plocal, c_comm_total):
    """Pure equilibria by tabulating every profile's payoffs, then best responses.

    ``phi_of(i, coalition)`` gives the collaborative loss of player ``i`` when
    the cooperators are ``coalition`` (a frozenset containing ``i``).
    ``c_comm_total`` is c_m + c_m' + c_pglobal.  Players are 0..N-1 and
    profiles are tuples of booleans (True = cooperate).
    """
    n = len(theta)
    table = {}
    for prof in itertools.product([True, False], repeat=n):
        coalition = frozenset(i for i in range(n) if prof[i])
        pay = []
        for i in range(n):
            if prof[i]:
                pay.append(B * (1.0 / phi_of(i, coalition)) - (c_plocal + c_comm_total))
            else:
                pay.append(B * (1.0 / theta[i]) - c_plocal)
        table[prof] = pay
    equilibria = set()
    for prof, pay in table.items():
        stable = True
        for i in range(n):
            alt = list(prof)
            alt[i] = not alt[i]
            if table[tuple(alt)][i] > pay[i] + 1e-12 * max(1.0, abs(pay[i])):
                stable = False
                break
        if stable:
            equilibria.add(prof)
    return equilibria


def silhouette_by_hand(points, labels):
    points = [float(p) for p in points]
    scores = []
    for i, p in enumerate(points):
        own = [q for j, q in enumerate(points) if labels[j] == labels[i] and j != i]
        if not own:
            scores.append(0.0)
            continue
        a = sum(abs(p - q) for q in own) / len(own)
        b = min(
            sum(abs(p - q) for j, q in enumerate(points) if labels[j] == c)
            / sum(1 for lab in labels if lab == c)
            for c in set(labels) if c != labels[i]
        )
        scores.append((b - a) / max(a, b))
    return sum(scores) / len(scores)
