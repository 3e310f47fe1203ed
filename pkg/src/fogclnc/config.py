"""Scenario configuration and the plain-text ``key = value`` loader."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field, fields
from pathlib import Path


class ConfigError(ValueError):
    """Raised for an invalid configuration; ``key`` names the offending entry."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


def dbm_per_hz_to_watts(dbm_per_hz: float, bandwidth: float) -> float:
    return 10.0 ** ((dbm_per_hz - 30.0) / 10.0) * bandwidth


@dataclass
class ScenarioConfig:
    # network size
    num_users: int = 20
    num_faps: int = 3
    num_d2d: int = 4
    num_files: int = 10
    cell_radius: float = 1500.0
    d2d_range: float = 500.0

    # content
    cache_fraction: float = 0.5
    zipf_exponent: float = 0.5
    has_set_size: int | None = None  # None -> num_files // 2
    request_prob_cap: float = 0.0  # 0 disables the capped-request sampler

    # physical layer
    bandwidth: float = 10e6
    noise_dbm_hz: float = -174.0
    pmax_dbm_hz: float = -42.60
    d2d_power_dbm_hz: float = -42.60
    shadowing_db: float = 4.0
    fading: bool = True
    min_distance: float = 1.0

    # delivery
    fronthaul_capacity: float = 30e6
    fetch_limit: int = 5
    rate_threshold: float = 0.5
    mwc: str = "greedy"
    switch_pass_cap: int = 1000
    power_tol: float = 1e-6
    power_max_iter: int = 500
    clnc_tol: float = 1e-6
    clnc_max_outer: int = 20

    # caching / learning
    reward_weight: float = 1.0
    cache_cost: float = 0.8
    iterations: int = 2000
    sigma_scale: float = 1e5
    qlearning_epsilon: float = 0.1

    # experiment
    realizations: int = 200
    seed: int = 0
    schemes: tuple[str, ...] = ("clnc-cf", "ra-idnc", "classical-idnc", "optimal-uncoded")
    caching: tuple[str, ...] = ("fixed",)
    sweep_var: str = "num_users"
    sweep_values: tuple[float, ...] = ()
    workers: int = 1

    @property
    def pmax(self) -> float:
        return dbm_per_hz_to_watts(self.pmax_dbm_hz, self.bandwidth)

    @property
    def d2d_power(self) -> float:
        return dbm_per_hz_to_watts(self.d2d_power_dbm_hz, self.bandwidth)

    @property
    def noise_psd(self) -> float:
        return dbm_per_hz_to_watts(self.noise_dbm_hz, 1.0)

    @property
    def fronthaul_se(self) -> float:
        """Fronthaul capacity expressed in bit/s/Hz of the access bandwidth."""
        return self.fronthaul_capacity / self.bandwidth

    @property
    def has_size(self) -> int:
        return self.num_files // 2 if self.has_set_size is None else self.has_set_size

    @property
    def cache_slots(self) -> int:
        return int(math.floor(self.cache_fraction * self.num_files + 1e-9))

    @property
    def num_agents(self) -> int:
        return self.num_files * (self.num_faps + self.num_d2d)

    def replace(self, **changes) -> "ScenarioConfig":
        cfg = dataclasses.replace(self, **changes)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        for name in ("num_users", "num_faps", "num_files", "iterations", "realizations"):
            if getattr(self, name) < 1:
                raise ConfigError(name, "must be >= 1")
        if self.num_d2d < 0:
            raise ConfigError("num_d2d", "must be >= 0")
        if not 0.0 <= self.cache_fraction <= 1.0:
            raise ConfigError("cache_fraction", "must lie in [0, 1]")
        if self.rate_threshold < 0:
            raise ConfigError("rate_threshold", "must be >= 0")
        if self.cell_radius <= 0:
            raise ConfigError("cell_radius", "must be > 0")
        if self.d2d_range < 0:
            raise ConfigError("d2d_range", "must be >= 0")
        if not 0 <= self.has_size < self.num_files:
            raise ConfigError("has_set_size", "must satisfy 0 <= has_set_size < num_files")
        if self.fetch_limit < 0:
            raise ConfigError("fetch_limit", "must be >= 0")
        if self.fronthaul_capacity < 0:
            raise ConfigError("fronthaul_capacity", "must be >= 0")
        if not 0.0 <= self.request_prob_cap <= 1.0:
            raise ConfigError("request_prob_cap", "must lie in [0, 1]")
        if self.mwc not in ("greedy", "exact"):
            raise ConfigError("mwc", "must be 'greedy' or 'exact'")
        if self.sigma_scale <= 0:
            raise ConfigError("sigma_scale", "must be > 0")
        if self.workers < 1:
            raise ConfigError("workers", "must be >= 1")
        if self.sweep_var not in _FIELD_TYPES:
            raise ConfigError("sweep_var", f"unknown parameter {self.sweep_var!r}")
        from .harness import CACHING_POLICIES, SCHEMES

        for s in self.schemes:
            if s not in SCHEMES:
                raise ConfigError("schemes", f"unknown scheme {s!r}")
        for c in self.caching:
            if c not in CACHING_POLICIES:
                raise ConfigError("caching", f"unknown caching policy {c!r}")


_FIELD_TYPES = {f.name: f.type for f in fields(ScenarioConfig)}

# short aliases accepted in config files
ALIASES = {
    "U": "num_users",
    "K": "num_faps",
    "N": "num_d2d",
    "F": "num_files",
    "mu": "cache_fraction",
    "gamma": "zipf_exponent",
    "C_fh": "fronthaul_capacity",
    "l_k": "fetch_limit",
    "R_th": "rate_threshold",
    "omega": "reward_weight",
    "mu_cost": "cache_cost",
    "T": "iterations",
    "b": "sigma_scale",
    "R": "realizations",
}


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def parse_value(key: str, text: str):
    kind = _FIELD_TYPES[key]
    text = text.strip()
    try:
        if kind == "int":
            return int(text)
        if kind == "float":
            return float(text)
        if kind == "bool":
            return _parse_bool(text)
        if kind == "str":
            return text
        if kind == "int | None":
            return None if text.lower() in ("", "none") else int(text)
        if kind == "tuple[str, ...]":
            return tuple(p.strip() for p in text.split(",") if p.strip())
        if kind == "tuple[float, ...]":
            return tuple(float(p) for p in text.split(",") if p.strip())
    except ValueError as exc:
        raise ConfigError(key, str(exc)) from None
    raise ConfigError(key, f"unsupported field type {kind}")


def parse_config(text: str, base: ScenarioConfig | None = None) -> ScenarioConfig:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}", "expected 'key = value'")
        key, value = (p.strip() for p in line.split("=", 1))
        key = ALIASES.get(key, key)
        if key not in _FIELD_TYPES:
            raise ConfigError(key, "unknown key")
        values[key] = parse_value(key, value)
    cfg = dataclasses.replace(base or ScenarioConfig(), **values)
    cfg.validate()
    return cfg


def load_config(path: str | Path) -> ScenarioConfig:
    return parse_config(Path(path).read_text())


def format_config(cfg: ScenarioConfig) -> str:
    lines = []
    for f in fields(cfg):
        v = getattr(cfg, f.name)
        if isinstance(v, tuple):
            v = ",".join(str(x) for x in v)
        lines.append(f"{f.name} = {v}")
    return "\n".join(lines) + "\n"
