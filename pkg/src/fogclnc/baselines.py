"""Comparison delivery schemes and cache-placement policies.

All delivery baselines run at full F-AP power and return a Schedule that the
common validator accepts, together with the delivered sum-rate in bit/s.
"""

from __future__ import annotations

import numpy as np
from scipy.optimize import linear_sum_assignment

from .content import CacheMatrix, SideInfo
from .idnc import (
    DeliveryParams,
    Schedule,
    Transmission,
    Vertex,
    assemble_graph,
    exact_mwc,
    schedule_from_clique,
)

CACHE_KINDS = ("all", "none", "half", "fixed")


def _deliverable(t: int, u: int, cache: CacheMatrix, side: SideInfo, params: DeliveryParams) -> bool:
    if not params.covers(t, u):
        return False
    if cache.placement[side.wants[u], t]:
        return True
    return params.is_fap(t) and params.fetch_limit > 0


def _eligible(t, users, caps, cache, side, params, floor=None):
    floor = params.rate_threshold if floor is None else floor
    return [u for u in sorted(users) if _deliverable(t, u, cache, side, params) and caps[t, u] >= floor]


def optimal_uncoded(caps: np.ndarray, cache: CacheMatrix, side: SideInfo, params: DeliveryParams) -> tuple[Schedule, float]:
    """One user per transmitter, chosen by an exact max-weight assignment.

    Returns the schedule and its weight in bit/s/Hz.
    """
    n_tx, n_users = caps.shape
    value = np.zeros((n_users, n_tx))
    for t in range(n_tx):
        for u in _eligible(t, range(n_users), caps, cache, side, params):
            r = float(caps[t, u])
            value[u, t] = r if cache.placement[side.wants[u], t] else min(params.fronthaul_se, r)
    rows, cols = linear_sum_assignment(value, maximize=True)
    out = []
    for u, t in sorted(zip(rows.tolist(), cols.tolist()), key=lambda p: p[1]):
        if value[u, t] <= 0.0:
            continue
        f = side.wants[u]
        fetched = frozenset() if cache.placement[f, t] else frozenset({f})
        out.append(Transmission(t, float(caps[t, u]), ((u, f),), fetched))
    sched = Schedule(tuple(out))
    return sched, sched.weight(params.fronthaul_se)


def classical_idnc(partition, caps: np.ndarray, cache: CacheMatrix, side: SideInfo, params: DeliveryParams) -> tuple[Schedule, float]:
    """Max-cardinality XOR combination per transmitter, all sent at one common rate.

    Rates are ignored when forming the combinations; among equally large
    combinations the one with the larger total capacity wins. Every transmitter
    then uses the smallest capacity over all targeted users in the network.
    """
    coalitions = getattr(partition, "coalitions", partition)
    blocks = []
    for t, users in enumerate(coalitions):
        members = _eligible(t, users, caps, cache, side, params)
        if not members:
            blocks.append([])
            continue
        top = float(max(caps[t, u] for u in members))
        delta = 1.0 / (1.0 + len(members) * top)
        blocks.append(
            [
                Vertex(t, u, side.wants[u], 0.0, 1.0 + delta * float(caps[t, u]), not cache.placement[side.wants[u], t])
                for u in members
            ]
        )
    graph = assemble_graph(blocks, side, params)
    raw = schedule_from_clique(graph, exact_mwc(graph), cache, side)
    if not raw.transmissions:
        return raw, 0.0
    rate = float(min(caps[tx.transmitter, u] for tx in raw.transmissions for u in tx.users))
    sched = Schedule(tuple(Transmission(tx.transmitter, rate, tx.targets, tx.fetched) for tx in raw.transmissions))
    return sched, sched.weight(params.fronthaul_se)


def _rate_block(t, members, r, cache, side, params):
    out = []
    for u in members:
        f = side.wants[u]
        cached = bool(cache.placement[f, t])
        out.append(Vertex(t, u, f, r, r if cached else min(params.fronthaul_se, r), not cached))
    return out


def ra_idnc(partition, caps: np.ndarray, cache: CacheMatrix, side: SideInfo, params: DeliveryParams) -> tuple[Schedule, float]:
    """Rate-aware IDNC with a single rate shared by every transmitter.

    Each candidate rate is tried in ascending order; the first one reaching the
    largest total weight is kept.
    """
    coalitions = getattr(partition, "coalitions", partition)
    eligible = [_eligible(t, users, caps, cache, side, params) for t, users in enumerate(coalitions)]
    rates = sorted({float(caps[t, u]) for t, ms in enumerate(eligible) for u in ms})
    best, best_w = Schedule(), 0.0
    for r in rates:
        blocks = [_rate_block(t, [u for u in ms if caps[t, u] >= r], r, cache, side, params) for t, ms in enumerate(eligible)]
        graph = assemble_graph(blocks, side, params)
        sched = schedule_from_clique(graph, exact_mwc(graph), cache, side)
        w = sched.weight(params.fronthaul_se)
        if w > best_w * (1 + 1e-12):
            best, best_w = sched, w
    return best, best_w


def caching_policy(kind: str, num_files: int, num_faps: int, num_d2d: int, rng, cache_fraction: float = 1.0) -> CacheMatrix:
    """Heuristic placements; ``fixed`` caches a random ``floor(mu F)`` files per transmitter."""
    shape = (num_files, num_faps + num_d2d)
    if kind == "all":
        placement = np.ones(shape, dtype=bool)
    elif kind == "none":
        placement = np.zeros(shape, dtype=bool)
    elif kind == "half":
        placement = rng.random(shape) < 0.5
    elif kind == "fixed":
        slots = int(np.floor(cache_fraction * num_files + 1e-9))
        placement = np.zeros(shape, dtype=bool)
        for t in range(shape[1]):
            # prefix of a permutation, so larger fractions nest the smaller ones
            placement[rng.permutation(num_files)[:slots], t] = True
    else:
        raise ValueError(f"unknown caching policy {kind!r}")
    return CacheMatrix(placement, num_faps, cache_fraction)
