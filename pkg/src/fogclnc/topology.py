"""Network geometry, channel draws, SINR and link capacities.

Transmitters are indexed globally: F-APs ``0..K-1`` followed by CE-D2D users
``K..K+N-1``. Powers are linear watts, gains are dimensionless power gains.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .config import ScenarioConfig

log = logging.getLogger(__name__)

MIN_DISTANCE_M = 1.0
SQRT3 = math.sqrt(3.0)


def in_hexagon(points: np.ndarray, radius: float) -> np.ndarray:
    """Membership test for a flat-topped regular hexagon centred at the origin."""
    pts = np.atleast_2d(points)
    x, y = np.abs(pts[:, 0]), np.abs(pts[:, 1])
    eps = 1e-9 * radius
    return (y <= SQRT3 / 2 * radius + eps) & (SQRT3 * x + y <= SQRT3 * radius + eps)


def sample_hexagon(n: int, radius: float, rng: np.random.Generator) -> np.ndarray:
    """Uniform points in the hexagon, by rejection from the circumscribed disc."""
    out = np.empty((0, 2))
    while len(out) < n:
        m = 2 * (n - len(out)) + 8
        r = radius * np.sqrt(rng.random(m))
        th = 2 * np.pi * rng.random(m)
        cand = np.column_stack([r * np.cos(th), r * np.sin(th)])
        out = np.vstack([out, cand[in_hexagon(cand, radius)]])
    return out[:n]


def fap_layout(k: int, radius: float) -> np.ndarray:
    """First F-AP at the centre, the rest on a ring of 2/3 radius along evenly spaced axes."""
    pos = np.zeros((k, 2))
    ring = k - 1
    for i in range(ring):
        th = 2 * np.pi * i / ring
        pos[i + 1] = (2.0 / 3.0 * radius * math.cos(th), 2.0 / 3.0 * radius * math.sin(th))
    return pos


@dataclass(frozen=True)
class Topology:
    cell_radius: float
    fap_positions: np.ndarray
    ced2d_positions: np.ndarray
    user_positions: np.ndarray
    d2d_range: float

    @property
    def num_faps(self) -> int:
        return len(self.fap_positions)

    @property
    def num_d2d(self) -> int:
        return len(self.ced2d_positions)

    @property
    def num_users(self) -> int:
        return len(self.user_positions)

    @property
    def num_transmitters(self) -> int:
        return self.num_faps + self.num_d2d

    @cached_property
    def fap_distance(self) -> np.ndarray:
        return _distances(self.fap_positions, self.user_positions)

    @cached_property
    def d2d_distance(self) -> np.ndarray:
        return _distances(self.ced2d_positions, self.user_positions)

    @cached_property
    def coverage(self) -> tuple[frozenset[int], ...]:
        """``coverage[n]`` is the user set within ``d2d_range`` of CE-D2D user ``n``."""
        return tuple(
            frozenset(np.flatnonzero(row <= self.d2d_range).tolist()) for row in self.d2d_distance
        )

    @cached_property
    def coverage_mask(self) -> np.ndarray:
        return self.d2d_distance <= self.d2d_range

    def with_users(self, user_positions: np.ndarray) -> "Topology":
        return Topology(
            self.cell_radius, self.fap_positions, self.ced2d_positions, user_positions, self.d2d_range
        )


def _distances(tx: np.ndarray, rx: np.ndarray) -> np.ndarray:
    if len(tx) == 0 or len(rx) == 0:
        return np.zeros((len(tx), len(rx)))
    return np.linalg.norm(tx[:, None, :] - rx[None, :, :], axis=-1)


def layout_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng([seed, 0])


def generate_topology(config: ScenarioConfig, rng: np.random.Generator) -> Topology:
    """Fixed F-AP / CE-D2D layout (derived from ``config.seed``) plus users drawn from ``rng``."""
    fixed = layout_rng(config.seed)
    faps = fap_layout(config.num_faps, config.cell_radius)
    d2d = sample_hexagon(config.num_d2d, config.cell_radius, fixed)
    users = sample_hexagon(config.num_users, config.cell_radius, rng)
    return Topology(config.cell_radius, faps, d2d, users, config.d2d_range)


def path_loss_db(link_kind: str, distance_m, d_min: float = MIN_DISTANCE_M):
    """Distance-dependent path loss in dB; ``distance_m`` in metres (scalar or array)."""
    d = np.asarray(distance_m, dtype=float)
    if np.any(d < d_min):
        log.debug("clamping %d distance(s) below %.3g m", int(np.sum(d < d_min)), d_min)
        d = np.maximum(d, d_min)
    d_km = d / 1000.0
    if link_kind == "cellular":
        out = 128.1 + 37.6 * np.log10(d_km)
    elif link_kind == "d2d":
        out = 148.0 + 40.0 * np.log10(d_km)
    else:
        raise ValueError(f"unknown link kind {link_kind!r}")
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class ChannelRealization:
    fap_gain: np.ndarray  # (K, U)
    d2d_gain: np.ndarray  # (N, U)
    noise_psd: float
    bandwidth: float

    @property
    def noise_power(self) -> float:
        return self.noise_psd * self.bandwidth


@dataclass(frozen=True)
class PowerProfile:
    fap_power: np.ndarray
    ced2d_power: float

    @classmethod
    def full(cls, config: ScenarioConfig) -> "PowerProfile":
        return cls(np.full(config.num_faps, config.pmax), config.d2d_power)


def _link_gains(pl_db: np.ndarray, shadowing_db: float, fading: bool, rng) -> np.ndarray:
    gain = 10.0 ** (-pl_db / 10.0)
    if shadowing_db > 0:
        gain = gain * 10.0 ** (rng.normal(0.0, shadowing_db, gain.shape) / 10.0)
    if fading:
        g = (rng.standard_normal(gain.shape) + 1j * rng.standard_normal(gain.shape)) / math.sqrt(2)
        gain = gain * np.abs(g) ** 2
    return gain


def draw_channel(
    topology: Topology,
    rng: np.random.Generator,
    config: ScenarioConfig | None = None,
) -> ChannelRealization:
    cfg = config or ScenarioConfig()
    fap_pl = np.asarray(path_loss_db("cellular", topology.fap_distance, cfg.min_distance))
    d2d_pl = np.asarray(path_loss_db("d2d", topology.d2d_distance, cfg.min_distance))
    fap = _link_gains(fap_pl, cfg.shadowing_db, cfg.fading, rng)
    d2d = _link_gains(d2d_pl, cfg.shadowing_db, cfg.fading, rng)
    return ChannelRealization(fap, d2d, cfg.noise_psd, cfg.bandwidth)


def fap_sinr_matrix(channel: ChannelRealization, fap_power: np.ndarray) -> np.ndarray:
    """``(K, U)`` SINR of every F-AP/user pair with all other F-APs interfering."""
    rx = np.asarray(fap_power, dtype=float)[:, None] * channel.fap_gain
    total = rx.sum(axis=0, keepdims=True)
    return rx / (total - rx + channel.noise_power)


def d2d_sinr_matrix(channel: ChannelRealization, power: float) -> np.ndarray:
    rx = power * channel.d2d_gain
    total = rx.sum(axis=0, keepdims=True)
    return rx / (total - rx + channel.noise_power)


def sinr(kind: str, index: int, user: int, powers: PowerProfile, h: ChannelRealization) -> float:
    """SINR of one link; cellular and D2D bands do not interfere with each other."""
    if kind == "fap":
        own = powers.fap_power[index] * h.fap_gain[index, user]
        other = float(np.dot(powers.fap_power, h.fap_gain[:, user])) - own
    elif kind == "d2d":
        own = powers.ced2d_power * h.d2d_gain[index, user]
        other = powers.ced2d_power * float(h.d2d_gain[:, user].sum()) - own
    else:
        raise ValueError(f"unknown transmitter kind {kind!r}")
    return float(own / (other + h.noise_power))


def capacity(sinr_value):
    """Spectral efficiency in bit/s/Hz."""
    return np.log2(1.0 + np.asarray(sinr_value)) if np.ndim(sinr_value) else math.log2(1.0 + sinr_value)


def capacity_matrix(channel: ChannelRealization, powers: PowerProfile) -> np.ndarray:
    """Stacked ``(K+N, U)`` link capacities in bit/s/Hz."""
    fap = np.log2(1.0 + fap_sinr_matrix(channel, powers.fap_power))
    d2d = np.log2(1.0 + d2d_sinr_matrix(channel, powers.ced2d_power))
    return np.vstack([fap, d2d])
