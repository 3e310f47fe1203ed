"""Monte-Carlo experiment driver: history generation, scheme runs and CSV output.

Random streams are keyed by ``(seed, stream, realization)`` and never by the
sweep point, so every sweep point sees the same underlying draws.
"""

from __future__ import annotations

import csv
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from . import marl
from .baselines import caching_policy, classical_idnc, optimal_uncoded, ra_idnc
from .config import ConfigError, ScenarioConfig
from .content import CacheMatrix, SideInfo, apply_actions, draw_side_info
from .delivery import clnc_cf, form_coalitions
from .idnc import DeliveryParams, build_graph, graph_to_dot, validate_schedule
from .topology import ChannelRealization, PowerProfile, Topology, capacity_matrix, draw_channel, generate_topology

log = logging.getLogger(__name__)

SCHEMES = ("clnc-cf", "ra-idnc", "classical-idnc", "optimal-uncoded")
CACHING_POLICIES = ("fixed", "all", "none", "half", "marl", "q-learning")
LEARNED = ("marl", "q-learning")
REWARD_UNIT = 1e6

# stream ids for np.random.default_rng([seed, stream, ...])
_USERS, _CHANNEL, _REQUESTS, _CACHE, _CLUSTER, _HIST_USERS, _HIST_DRAWS, _LEARN = range(1, 9)


class ScheduleError(RuntimeError):
    pass


def _rng(cfg: ScenarioConfig, stream: int, *index: int) -> np.random.Generator:
    return np.random.default_rng([cfg.seed, stream, *index])


@dataclass
class HistoryProfile:
    topology: Topology
    entries: list[tuple[ChannelRealization, SideInfo]]

    def __len__(self) -> int:
        return len(self.entries)


def generate_history(config: ScenarioConfig, rng=None, length: int | None = None) -> HistoryProfile:
    """``length`` (default ``config.iterations``) channel/request draws over one fixed topology."""
    n = config.iterations if length is None else length
    if n < 1:
        raise ValueError("history length must be >= 1")
    topo = generate_topology(config, _rng(config, _HIST_USERS))
    rng = _rng(config, _HIST_DRAWS) if rng is None else rng
    entries = [(draw_channel(topo, rng, config), draw_side_info(config, rng)) for _ in range(n)]
    return HistoryProfile(topo, entries)


def delivery_env(history: HistoryProfile, config: ScenarioConfig):
    """Environment callable for the learners: one full delivery run per history entry."""
    k, n, f = config.num_faps, config.num_d2d, config.num_files

    def env(t: int, actions: np.ndarray) -> float:
        channel, side = history.entries[t % len(history)]
        cache = apply_actions(actions, f, k, n, config.cache_fraction)
        out = clnc_cf(history.topology, channel, side, cache, config, np.random.default_rng([config.seed, _LEARN, t]))
        return out.sum_rate / REWARD_UNIT

    return env


def learn_cache(kind: str, history: HistoryProfile, config: ScenarioConfig, rng=None) -> tuple[CacheMatrix, marl.TrainResult]:
    rng = _rng(config, _LEARN, LEARNED.index(kind)) if rng is None else rng
    env = delivery_env(history, config)
    common = dict(
        omega=config.reward_weight,
        mu_cost=config.cache_cost,
        num_files=config.num_files,
        slots=config.cache_slots,
    )
    if kind == "marl":
        res = marl.train(env, config.num_agents, config.iterations, rng, sigma_scale=config.sigma_scale, **common)
    elif kind == "q-learning":
        res = marl.q_learning(env, config.num_agents, config.iterations, rng, epsilon=config.qlearning_epsilon, **common)
    else:
        raise ValueError(f"{kind!r} is not a learned caching policy")
    cache = apply_actions(res.actions, config.num_files, config.num_faps, config.num_d2d, config.cache_fraction)
    return cache, res


@dataclass
class MetricsRow:
    scheme: str
    caching: str
    sweep_var: str
    sweep_value: float
    realizations: int
    mean_sum_rate: float  # bit/s
    std_sum_rate: float
    mean_served_users: float
    mean_cached_files: float
    mean_reward: float
    mean_switch_passes: float
    mean_power_iterations: float


@dataclass
class Sample:
    sum_rate: float
    served: int
    cached: int
    switch_passes: int = 0
    power_iterations: int = 0


def _check(schedule, cache, side, caps, params, label):
    problems = validate_schedule(schedule, cache, side, caps, params)
    if problems:
        raise ScheduleError(f"{label}: " + "; ".join(problems))


def evaluate_realization(
    cfg: ScenarioConfig,
    r: int,
    learned: dict[str, CacheMatrix],
    fixed_topology: Topology | None = None,
    dump_dir: Path | None = None,
) -> dict[tuple[str, str], Sample]:
    """Run every (scheme, caching) pair of ``cfg`` on realization ``r``."""
    topo = fixed_topology or generate_topology(cfg, _rng(cfg, _USERS, r))
    channel = draw_channel(topo, _rng(cfg, _CHANNEL, r), cfg)
    side = draw_side_info(cfg, _rng(cfg, _REQUESTS, r))
    params = DeliveryParams.from_config(cfg, topo)
    full_caps = capacity_matrix(channel, PowerProfile.full(cfg))
    bw = cfg.bandwidth
    out = {}
    for ci, kind in enumerate(cfg.caching):
        if kind in learned:
            cache = learned[kind]
        else:
            cache = caching_policy(kind, cfg.num_files, cfg.num_faps, cfg.num_d2d, _rng(cfg, _CACHE, r, ci), cfg.cache_fraction)
        n_cached = cache.count()
        if "clnc-cf" in cfg.schemes:
            res = clnc_cf(topo, channel, side, cache, cfg, _rng(cfg, _CLUSTER, r, ci))
            caps = capacity_matrix(channel, res.powers)
            _check(res.schedule, cache, side, caps, params, "clnc-cf")
            partition = res.partition
            out["clnc-cf", kind] = Sample(
                res.sum_rate, len(res.schedule.served_users), n_cached, res.switch_passes, res.power_iterations
            )
            if dump_dir is not None:
                graph = build_graph(partition, cache, side, caps, params)
                (dump_dir / f"graph_r{r}_{kind}.dot").write_text(graph_to_dot(graph))
        else:
            switched, _ = form_coalitions(topo, channel, side, cache, cfg, _rng(cfg, _CLUSTER, r, ci))
            partition = switched.partition
        for scheme in cfg.schemes:
            if scheme == "clnc-cf":
                continue
            if scheme == "optimal-uncoded":
                sched, w = optimal_uncoded(full_caps, cache, side, params)
            elif scheme == "classical-idnc":
                sched, w = classical_idnc(partition, full_caps, cache, side, params)
            else:
                sched, w = ra_idnc(partition, full_caps, cache, side, params)
            _check(sched, cache, side, full_caps, params, scheme)
            out[scheme, kind] = Sample(w * bw, len(sched.served_users), n_cached)
    return out


def _point_config(cfg: ScenarioConfig, value) -> ScenarioConfig:
    if value is None:
        return cfg
    current = getattr(cfg, cfg.sweep_var)
    if isinstance(current, int) and not isinstance(current, bool):
        if value != int(value):
            raise ConfigError("sweep_values", f"{cfg.sweep_var} needs integer values, got {value}")
        value = int(value)
    return cfg.replace(**{cfg.sweep_var: value})


def _run_point(args):
    cfg, learned, fixed_topology, indices, dump_dir = args
    return [evaluate_realization(cfg, r, learned, fixed_topology, dump_dir if r == 0 else None) for r in indices]


def run_point(cfg: ScenarioConfig, dump_dir: Path | None = None) -> list[MetricsRow]:
    learned = {}
    fixed_topology = None
    if any(k in LEARNED for k in cfg.caching):
        history = generate_history(cfg)
        fixed_topology = history.topology
        for kind in cfg.caching:
            if kind in LEARNED:
                learned[kind], _ = learn_cache(kind, history, cfg)
                log.info("learned %s cache with %d placements", kind, learned[kind].count())
    indices = list(range(cfg.realizations))
    if cfg.workers > 1:
        chunks = [indices[i :: cfg.workers] for i in range(cfg.workers)]
        with ProcessPoolExecutor(cfg.workers) as pool:
            parts = list(pool.map(_run_point, [(cfg, learned, fixed_topology, c, dump_dir) for c in chunks]))
        by_index = {r: s for c, part in zip(chunks, parts) for r, s in zip(c, part)}
        samples = [by_index[r] for r in indices]
    else:
        samples = _run_point((cfg, learned, fixed_topology, indices, dump_dir))

    value = getattr(cfg, cfg.sweep_var)
    rows = []
    for kind in cfg.caching:
        for scheme in cfg.schemes:
            ss = [s[scheme, kind] for s in samples]
            rates = np.array([s.sum_rate for s in ss])
            cached = np.array([s.cached for s in ss], dtype=float)
            rewards = cfg.reward_weight * rates / REWARD_UNIT - cfg.cache_cost * cached
            rows.append(
                MetricsRow(
                    scheme,
                    kind,
                    cfg.sweep_var,
                    float(value),
                    len(ss),
                    float(rates.mean()),
                    float(rates.std()),
                    float(np.mean([s.served for s in ss])),
                    float(cached.mean()),
                    float(rewards.mean()),
                    float(np.mean([s.switch_passes for s in ss])),
                    float(np.mean([s.power_iterations for s in ss])),
                )
            )
    return rows


def run_experiment(config: ScenarioConfig, dump_dir: str | Path | None = None) -> list[MetricsRow]:
    """Average every scheme and caching policy over the realizations at each sweep point."""
    config.validate()
    dump = Path(dump_dir) if dump_dir is not None else None
    if dump is not None:
        dump.mkdir(parents=True, exist_ok=True)
    points = config.sweep_values or (None,)
    rows = []
    for value in points:
        cfg = _point_config(config, value)
        log.info("sweep %s=%s", cfg.sweep_var, getattr(cfg, cfg.sweep_var))
        point_dump = None
        if dump is not None:
            point_dump = dump / f"{cfg.sweep_var}_{getattr(cfg, cfg.sweep_var)}"
            point_dump.mkdir(exist_ok=True)
        rows.extend(run_point(cfg, point_dump))
    return rows


CSV_FIELDS = [f.name for f in fields(MetricsRow)]


def _fmt(v) -> str:
    if isinstance(v, float):
        return format(v, ".6g")
    return str(v)


def write_rows(rows: list[MetricsRow], fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    for row in rows:
        d = asdict(row)
        w.writerow([_fmt(d[k]) for k in CSV_FIELDS])


def emit_csv(rows: list[MetricsRow], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="ascii") as fh:
        write_rows(rows, fh)


def read_csv(path: str | Path) -> list[dict[str, str]]:
    with open(path, newline="", encoding="ascii") as fh:
        return list(csv.DictReader(fh))
