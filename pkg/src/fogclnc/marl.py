"""Multi-agent learning of the cache placement.

Each virtual agent owns one (transmitter, file) pair and a binary action:
index 0 caches the file, index 1 does not. All agents receive the same
reward, the weighted sum-rate minus a per-file caching cost.
"""

from __future__ import annotations

import csv
import math
from collections.abc import Callable
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

CACHE, SKIP = 0, 1

# env(t, actions) -> sum-rate for history entry t under the given cache actions
Environment = Callable[[int, np.ndarray], float]


def schedules(t: int, b: float = 1e5) -> tuple[float, float, float]:
    """Exploration temperature and the two learning rates at iteration ``t``."""
    return t / b, 1.0 / (1.0 + t) ** 0.6, 1.0 / (1.0 + t) ** 0.7


def sample_actions(rho: np.ndarray, rng) -> np.ndarray:
    """Boolean cache decisions, True where the uniform draw falls below the cache probability."""
    return rng.random(len(rho)) < rho[:, CACHE]


def reward(sum_rate: float, cache_count: int, omega: float, mu_cost: float) -> float:
    return omega * sum_rate - mu_cost * cache_count


def update_utility(x: np.ndarray, i: int, j_taken: int, r: float, alpha: float) -> np.ndarray:
    out = np.array(x, dtype=float, copy=True)
    out[i, j_taken] += alpha * (r - out[i, j_taken])
    return out


def update_utilities(x: np.ndarray, cached: np.ndarray, r: float, alpha: float) -> np.ndarray:
    """Vectorised utility update for all agents given their taken actions."""
    out = x.copy()
    taken = np.where(cached, CACHE, SKIP)
    rows = np.arange(len(x))
    out[rows, taken] += alpha * (r - out[rows, taken])
    return out


def boltzmann(x, sigma: float) -> np.ndarray:
    """Softmax over the last axis at inverse temperature ``sigma`` (max-shifted)."""
    x = np.asarray(x, dtype=float)
    with np.errstate(over="ignore"):
        e = np.exp(sigma * (x - x.max(axis=-1, keepdims=True)))
    return e / e.sum(axis=-1, keepdims=True)


def update_probability(rho, beta, lam: float) -> np.ndarray:
    rho = np.asarray(rho, dtype=float)
    return rho + lam * (np.asarray(beta, dtype=float) - rho)


def enforce_capacity(cached: np.ndarray, score: np.ndarray, num_files: int, slots: int) -> np.ndarray:
    """Keep at most ``slots`` files per transmitter, dropping the lowest-scoring placements."""
    out = cached.copy()
    if slots >= num_files:
        return out
    for start in range(0, len(cached), num_files):
        block = slice(start, start + num_files)
        idx = np.flatnonzero(out[block])
        if len(idx) > slots:
            # stable sort: ties keep the lower file index
            keep = idx[np.argsort(-score[block][idx], kind="stable")[:slots]]
            mask = np.zeros(num_files, dtype=bool)
            mask[keep] = True
            out[block] = mask
    return out


def entropy(rho: np.ndarray) -> np.ndarray:
    p = np.clip(rho, 1e-300, 1.0)
    return -(rho * np.log(p)).sum(axis=1)


@dataclass
class LearnerState:
    x: np.ndarray
    rho: np.ndarray
    t: int = 0

    @classmethod
    def initial(cls, num_agents: int) -> "LearnerState":
        return cls(np.zeros((num_agents, 2)), np.full((num_agents, 2), 0.5), 0)

    def decision(self) -> np.ndarray:
        """Deterministic placement: cache only where caching is strictly more likely."""
        return self.rho[:, CACHE] > self.rho[:, SKIP]


@dataclass
class TraceRow:
    iteration: int
    reward: float
    cache_count: int
    simplex_residual: float
    mean_entropy: float


@dataclass
class TrainResult:
    actions: np.ndarray
    state: LearnerState
    trace: list[TraceRow] = field(default_factory=list)


def train(
    env: Environment,
    num_agents: int,
    iterations: int,
    rng,
    *,
    omega: float = 1.0,
    mu_cost: float = 0.8,
    sigma_scale: float = 1e5,
    num_files: int | None = None,
    slots: int | None = None,
) -> TrainResult:
    """Run the learning loop for ``iterations`` steps against ``env``.

    When ``num_files`` and ``slots`` are given, sampled and final placements are
    trimmed to the per-transmitter cache size.
    """
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    state = LearnerState.initial(num_agents)
    limit = num_files is not None and slots is not None
    trace = []
    for t in range(1, iterations + 1):
        sigma, alpha, lam = schedules(t, sigma_scale)
        cached = sample_actions(state.rho, rng)
        if limit:
            cached = enforce_capacity(cached, state.rho[:, CACHE], num_files, slots)
        count = int(cached.sum())
        r = reward(env(t - 1, cached), count, omega, mu_cost)
        beta = boltzmann(state.x, sigma)
        state.x = update_utilities(state.x, cached, r, alpha)
        state.rho = update_probability(state.rho, beta, lam)
        state.t = t
        trace.append(
            TraceRow(
                t,
                r,
                count,
                float(np.max(np.abs(state.rho.sum(axis=1) - 1.0))),
                float(entropy(state.rho).mean()),
            )
        )
    final = state.decision()
    if limit:
        final = enforce_capacity(final, state.rho[:, CACHE], num_files, slots)
    return TrainResult(final, state, trace)


def q_learning(
    env: Environment,
    num_agents: int,
    iterations: int,
    rng,
    *,
    epsilon: float = 0.1,
    omega: float = 1.0,
    mu_cost: float = 0.8,
    num_files: int | None = None,
    slots: int | None = None,
) -> TrainResult:
    """Independent tabular Q-learners on the same two actions and shared reward.

    Each (agent, action) entry uses its own visit count n for the step size
    1 / (1 + n)^0.6; exploration is epsilon-greedy, greedy ties go to no-cache.
    """
    q = np.zeros((num_agents, 2))
    visits = np.zeros((num_agents, 2))
    limit = num_files is not None and slots is not None
    rows = np.arange(num_agents)
    trace = []
    for t in range(1, iterations + 1):
        greedy = q[:, CACHE] > q[:, SKIP]
        explore = rng.random(num_agents) < epsilon
        random_pick = rng.random(num_agents) < 0.5
        cached = np.where(explore, random_pick, greedy)
        if limit:
            cached = enforce_capacity(cached, q[:, CACHE] - q[:, SKIP], num_files, slots)
        count = int(cached.sum())
        r = reward(env(t - 1, cached), count, omega, mu_cost)
        taken = np.where(cached, CACHE, SKIP)
        visits[rows, taken] += 1
        step = 1.0 / (1.0 + visits[rows, taken]) ** 0.6
        q[rows, taken] += step * (r - q[rows, taken])
        trace.append(TraceRow(t, r, count, 0.0, 0.0))
    final = q[:, CACHE] > q[:, SKIP]
    if limit:
        final = enforce_capacity(final, q[:, CACHE] - q[:, SKIP], num_files, slots)
    probs = np.where(final[:, None], [[1.0, 0.0]], [[0.0, 1.0]])
    return TrainResult(final, LearnerState(q, probs, iterations), trace)


TRACE_FIELDS = ["iteration", "reward", "cache_count", "simplex_residual", "mean_entropy"]


def write_trace_rows(rows: list[TraceRow], fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(TRACE_FIELDS)
    for r in rows:
        w.writerow([r.iteration, f"{r.reward:.6g}", r.cache_count, f"{r.simplex_residual:.6g}", f"{r.mean_entropy:.6g}"])


def write_trace(rows: list[TraceRow], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="ascii") as fh:
        write_trace_rows(rows, fh)


def utility_gap_bound(sigma: float) -> float:
    """Largest expected-reward gain from deviating at temperature ``sigma`` (ln 2 / sigma)."""
    return math.inf if sigma == 0 else math.log(2.0) / sigma
