"""F-AP power control by fixed-point iteration and the schedule/power alternation."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .content import CacheMatrix, SideInfo
from .idnc import (
    DeliveryParams,
    Schedule,
    Transmission,
    build_graph,
    schedule_from_clique,
    solve_mwc,
)
from .topology import ChannelRealization, PowerProfile, capacity_matrix


def normalized_gains(channel: ChannelRealization) -> np.ndarray:
    """F-AP gains divided by the noise power, so SINR = P g / (1 + sum P' g')."""
    return channel.fap_gain / channel.noise_power


def _targets(schedule: Schedule, num_faps: int) -> list[list[int]]:
    return [list(schedule.targeted(k)) for k in range(num_faps)]


def power_update_step(powers: np.ndarray, schedule: Schedule, channel: ChannelRealization, pmax: float) -> np.ndarray:
    """One simultaneous (Jacobi) update of every F-AP power, clipped to [0, pmax].

    F-APs serving nobody are held at zero and so drop out of every interference sum.
    """
    g = normalized_gains(channel)
    k_count = g.shape[0]
    tau = _targets(schedule, k_count)
    active = np.array([len(t) > 0 for t in tau], dtype=bool)
    p = np.where(active, np.asarray(powers, dtype=float), 0.0)

    rx = p[:, None] * g
    interference = rx.sum(axis=0, keepdims=True) - rx  # (K, U), excludes own signal
    gamma = rx / (1.0 + interference)

    worst = np.zeros(k_count, dtype=int)
    for k in np.flatnonzero(active):
        users = sorted(tau[k])
        worst[k] = users[int(np.argmin(gamma[k, users]))]

    new = np.zeros(k_count)
    for k in np.flatnonzero(active):
        gk = gamma[k, worst[k]]
        num = len(tau[k]) * gk / (1.0 + gk)
        den = 0.0
        for l in np.flatnonzero(active):
            if l == k:
                continue
            v = worst[l]
            gl = gamma[l, v]
            # |tau_l| gamma_l^2/(1+gamma_l) * g_kv/(P_l g_lv), written without dividing by P_l
            den += len(tau[l]) * p[l] * g[l, v] * g[k, v] / ((1.0 + interference[l, v]) ** 2 * (1.0 + gl))
        new[k] = pmax if den <= 0.0 else num / den
    return np.clip(new, 0.0, pmax)


def rerate(schedule: Schedule, caps: np.ndarray, params: DeliveryParams) -> Schedule:
    """Re-evaluate each transmission at the minimum capacity of its targets.

    Transmissions whose new rate falls below the QoS threshold are dropped.
    """
    out = []
    for tx in schedule.transmissions:
        if not tx.targets:
            continue
        r = float(min(caps[tx.transmitter, u] for u in tx.users))
        if r + 1e-12 < params.rate_threshold:
            continue
        out.append(Transmission(tx.transmitter, r, tx.targets, tx.fetched))
    return Schedule(tuple(out))


def schedule_objective(schedule: Schedule, channel: ChannelRealization, fap_power, d2d_power: float, params: DeliveryParams) -> float:
    """Sum-rate (bit/s/Hz) of ``schedule`` with rates re-evaluated at the given powers."""
    caps = capacity_matrix(channel, PowerProfile(np.asarray(fap_power, dtype=float), d2d_power))
    return rerate(schedule, caps, params).weight(params.fronthaul_se)


@dataclass
class PowerResult:
    powers: np.ndarray
    converged: bool
    iterations: int
    residual: float
    fixed_point: np.ndarray
    trace: list[np.ndarray] = field(default_factory=list)


def optimize_power(
    schedule: Schedule,
    channel: ChannelRealization,
    pmax: float,
    params: DeliveryParams,
    d2d_power: float = 0.0,
    tol: float = 1e-6,
    max_iter: int = 500,
    record: bool = False,
) -> PowerResult:
    """Iterate the power update from full power until the relative change drops below ``tol``.

    Returns the iterate with the best schedule objective (the starting point
    included), plus the convergence status of the fixed-point run itself.
    """
    k_count = channel.fap_gain.shape[0]
    p = np.full(k_count, pmax)
    best_p = p.copy()
    best_val = schedule_objective(schedule, channel, p, d2d_power, params)
    trace = [p.copy()] if record else []
    residual = np.inf
    it = 0
    converged = False
    for it in range(1, max_iter + 1):
        nxt = power_update_step(p, schedule, channel, pmax)
        residual = float(np.max(np.abs(nxt - p))) / pmax if k_count else 0.0
        p = nxt
        if record:
            trace.append(p.copy())
        val = schedule_objective(schedule, channel, p, d2d_power, params)
        if val > best_val + 1e-12 * max(1.0, best_val):
            best_val, best_p = val, p.copy()
        if residual < tol:
            converged = True
            break
    return PowerResult(best_p, converged, it, residual, p.copy(), trace)


@dataclass
class ClncResult:
    schedule: Schedule
    powers: PowerProfile
    sum_rate: float  # bit/s
    outer_iterations: int
    power_iterations: int
    first_sum_rate: float


def alternate_clnc(
    partition,
    cache: CacheMatrix,
    side: SideInfo,
    channel: ChannelRealization,
    config,
    params: DeliveryParams,
) -> ClncResult:
    """Alternate MWC scheduling and power optimisation, keeping the best pair seen."""
    q = config.d2d_power
    fh = params.fronthaul_se
    p = np.full(config.num_faps, config.pmax)
    best: tuple[float, Schedule, np.ndarray] | None = None
    first = None
    prev_best = -np.inf
    power_iters = 0
    outer = 0
    for outer in range(1, config.clnc_max_outer + 1):
        caps = capacity_matrix(channel, PowerProfile(p, q))
        graph = build_graph(partition, cache, side, caps, params)
        sched = schedule_from_clique(graph, solve_mwc(graph, config.mwc), cache, side)
        val = sched.weight(fh)
        if first is None:
            first = val
        if best is None or val > best[0]:
            best = (val, sched, p.copy())

        pres = optimize_power(sched, channel, config.pmax, params, q, config.power_tol, config.power_max_iter)
        power_iters += pres.iterations
        new_p = pres.powers
        resched = rerate(sched, capacity_matrix(channel, PowerProfile(new_p, q)), params)
        rval = resched.weight(fh)
        if rval > best[0]:
            best = (rval, resched, new_p.copy())

        gain = best[0] - prev_best
        if gain <= config.clnc_tol * max(abs(best[0]), 1e-12) or np.array_equal(new_p, p):
            break
        prev_best = best[0]
        p = new_p

    val, sched, powers = best
    return ClncResult(
        sched,
        PowerProfile(powers, q),
        val * config.bandwidth,
        outer,
        power_iters,
        first * config.bandwidth,
    )
