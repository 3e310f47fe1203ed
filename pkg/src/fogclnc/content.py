"""File library, Has/Wants side information, requests and cache placement.

Files are indexed ``0..F-1`` internally; file ``f`` has popularity rank ``f + 1``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np


@dataclass(frozen=True)
class SideInfo:
    has: tuple[frozenset[int], ...]
    wants: tuple[int, ...]
    num_files: int

    def __post_init__(self):
        for u, (h, w) in enumerate(zip(self.has, self.wants)):
            if w in h:
                raise ValueError(f"user {u} wants file {w} it already has")

    @property
    def num_users(self) -> int:
        return len(self.wants)

    @cached_property
    def has_matrix(self) -> np.ndarray:
        """Boolean ``(U, F)`` matrix, True where the user already holds the file."""
        m = np.zeros((self.num_users, self.num_files), dtype=bool)
        for u, h in enumerate(self.has):
            m[u, list(h)] = True
        return m

    @cached_property
    def wants_array(self) -> np.ndarray:
        return np.asarray(self.wants, dtype=int)


@dataclass(frozen=True)
class CacheMatrix:
    """Binary placement; ``placement[f, t]`` over the global transmitter index."""

    placement: np.ndarray  # (F, K+N) bool
    num_faps: int
    cache_fraction: float = 1.0

    @property
    def fap_cache(self) -> np.ndarray:
        return self.placement[:, : self.num_faps]

    @property
    def ced2d_cache(self) -> np.ndarray:
        return self.placement[:, self.num_faps :]

    @property
    def num_files(self) -> int:
        return self.placement.shape[0]

    def cached(self, transmitter: int, f: int) -> bool:
        return bool(self.placement[f, transmitter])

    def count(self) -> int:
        return int(self.placement.sum())

    @classmethod
    def empty(cls, num_files: int, num_faps: int, num_d2d: int, cache_fraction: float = 1.0):
        return cls(np.zeros((num_files, num_faps + num_d2d), dtype=bool), num_faps, cache_fraction)


def zipf_pmf(gamma: float, num_files: int) -> np.ndarray:
    ranks = np.arange(1, num_files + 1, dtype=float)
    w = ranks ** (-gamma)
    return w / w.sum()


def init_has_sets(num_files: int, num_users: int, has_set_size: int, rng) -> tuple[frozenset[int], ...]:
    if not 0 <= has_set_size < num_files:
        raise ValueError("has_set_size must satisfy 0 <= size < num_files")
    return tuple(
        frozenset(rng.choice(num_files, size=has_set_size, replace=False).tolist())
        for _ in range(num_users)
    )


def sample_requests(
    gamma: float,
    num_files: int,
    has: tuple[frozenset[int], ...],
    rng,
    request_prob_cap: float = 0.0,
) -> tuple[int, ...]:
    """One wanted file per user, Zipf-distributed and renormalised over files not already held.

    With ``request_prob_cap > 0`` each user first draws a probability ``q`` in
    ``[0, request_prob_cap]`` and with probability ``q`` requests a uniformly
    random missing file instead of a Zipf draw.
    """
    pmf = zipf_pmf(gamma, num_files)
    wants = []
    for h in has:
        if len(h) >= num_files:
            raise ValueError("a user already holds every file")
        p = pmf.copy()
        p[list(h)] = 0.0
        if request_prob_cap > 0:
            q = rng.uniform(0.0, request_prob_cap)
            if rng.random() < q:
                p = (p > 0).astype(float)
        p /= p.sum()
        wants.append(int(rng.choice(num_files, p=p)))
    return tuple(wants)


def draw_side_info(config, rng) -> SideInfo:
    has = init_has_sets(config.num_files, config.num_users, config.has_size, rng)
    wants = sample_requests(config.zipf_exponent, config.num_files, has, rng, config.request_prob_cap)
    return SideInfo(has, wants, config.num_files)


def fetch_rate(fronthaul_capacity: float, link_rate: float) -> float:
    return min(fronthaul_capacity, link_rate)


def missing_files(users, transmitter: int, cache: CacheMatrix, side: SideInfo) -> set[int]:
    return {side.wants[u] for u in users if not cache.placement[side.wants[u], transmitter]}


def missing_count(users, transmitter: int, cache: CacheMatrix, side: SideInfo) -> int:
    """Distinct requested files of ``users`` absent from the transmitter's cache."""
    return len(missing_files(users, transmitter, cache, side))


def agent_index(transmitter: int, f: int, num_files: int) -> int:
    """Virtual-agent id of the (transmitter, file) pair; CE-D2D agents follow all F-AP agents."""
    return transmitter * num_files + f


def apply_actions(actions, num_files: int, num_faps: int, num_d2d: int, cache_fraction: float = 1.0) -> CacheMatrix:
    """Map a length ``F(K+N)`` cache/no-cache vector onto a placement matrix."""
    a = np.asarray(actions, dtype=bool)
    d = num_files * (num_faps + num_d2d)
    if a.shape != (d,):
        raise ValueError(f"expected {d} actions, got shape {a.shape}")
    placement = a.reshape(num_faps + num_d2d, num_files).T.copy()
    return CacheMatrix(placement, num_faps, cache_fraction)


def actions_of(cache: CacheMatrix) -> np.ndarray:
    return cache.placement.T.reshape(-1).copy()
