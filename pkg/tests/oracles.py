"""Independent reference computations used as test oracles.

Nothing here goes through the conflict graph: schedules are enumerated
directly from the delivery constraints.
"""

from itertools import combinations, permutations

import numpy as np

from fogclnc.content import CacheMatrix, SideInfo
from fogclnc.idnc import DeliveryParams


def decodes(combo, has, wanted):
    return set(combo) - set(has) == {wanted}


def best_transmission(t, users, caps, cache, side, params):
    """Best single-transmitter value over every user subset, sent at the subset's minimum capacity."""
    users = [u for u in users if params.covers(t, u)]
    best = 0.0
    for size in range(1, len(users) + 1):
        for group in combinations(users, size):
            rate = min(caps[t, u] for u in group)
            if rate < params.rate_threshold:
                continue
            combo = {side.wants[u] for u in group}
            if not all(decodes(combo, side.has[u], side.wants[u]) for u in group):
                continue
            fetched = {f for f in combo if not cache.placement[f, t]}
            if fetched and (t >= params.num_faps or len(fetched) > params.fetch_limit):
                continue
            value = sum(min(params.fronthaul_se, rate) if side.wants[u] in fetched else rate for u in group)
            best = max(best, value)
    return best


def schedule_space_optimum(coalitions, caps, cache, side, params):
    return sum(best_transmission(t, users, caps, cache, side, params) for t, users in enumerate(coalitions))


def best_injection(value):
    """Max total value over partial injections users -> transmitters, by enumeration."""
    n_users, n_tx = value.shape
    best = 0.0
    slots = list(range(n_tx)) + [None] * n_users
    for perm in set(permutations(slots, n_users)):
        total = sum(value[u, t] for u, t in enumerate(perm) if t is not None)
        best = max(best, total)
    return best


def random_instance(rng, max_tx=3, max_users=5, num_files=4, num_faps=None):
    """Small random delivery instance: coalitions, capacities, cache, side information."""
    n_tx = int(rng.integers(1, max_tx + 1))
    k = int(rng.integers(1, n_tx + 1)) if num_faps is None else min(num_faps, n_tx)
    n_users = int(rng.integers(1, max_users + 1))
    has = []
    wants = []
    for _ in range(n_users):
        size = int(rng.integers(0, num_files))
        h = frozenset(rng.choice(num_files, size=size, replace=False).tolist())
        missing = [f for f in range(num_files) if f not in h]
        has.append(h)
        wants.append(int(rng.choice(missing)))
    side = SideInfo(tuple(has), tuple(wants), num_files)
    # a few discrete rate levels make equal-rate coding possible
    caps = rng.choice([0.3, 0.8, 1.5, 2.0, 3.5], size=(n_tx, n_users))
    if rng.random() < 0.5:
        caps = caps + rng.uniform(0, 1e-3, size=caps.shape) * (rng.random(caps.shape) < 0.3)
    cache = CacheMatrix(rng.random((num_files, n_tx)) < 0.6, k)
    owner = rng.integers(-1, n_tx, size=n_users)
    coalitions = [frozenset(np.flatnonzero(owner == t).tolist()) for t in range(n_tx)]
    coverage = tuple(frozenset(u for u in range(n_users) if rng.random() < 0.8) for _ in range(n_tx - k))
    params = DeliveryParams(k, 0.5, float(rng.choice([1.0, 3.0, 10.0])), int(rng.integers(0, 3)), coverage)
    return coalitions, caps, cache, side, params
