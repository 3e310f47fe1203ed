"""Rate-aware IDNC conflict graphs, maximum-weight-clique search and schedules.

Rates and weights are spectral efficiencies (bit/s/Hz); ``sum_rate`` converts
to bit/s. Capacities come as a stacked ``(K+N, U)`` matrix indexed by the
global transmitter id (F-APs first).
"""

from __future__ import annotations

from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .content import CacheMatrix, SideInfo

BRUTE_FORCE_LIMIT = 25
_TOL = 1e-12


@dataclass(frozen=True)
class DeliveryParams:
    """Per-realization constants shared by graph construction and validation."""

    num_faps: int
    rate_threshold: float
    fronthaul_se: float
    fetch_limit: int
    coverage: tuple[frozenset[int], ...] = ()

    @classmethod
    def from_config(cls, config, topology=None) -> "DeliveryParams":
        cov = topology.coverage if topology is not None else ()
        return cls(config.num_faps, config.rate_threshold, config.fronthaul_se, config.fetch_limit, cov)

    def is_fap(self, t: int) -> bool:
        return t < self.num_faps

    def covers(self, t: int, u: int) -> bool:
        if self.is_fap(t):
            return True
        n = t - self.num_faps
        return n < len(self.coverage) and u in self.coverage[n]


@dataclass(frozen=True)
class Vertex:
    transmitter: int
    user: int
    file: int
    rate: float
    weight: float
    fetched: bool = False

    @property
    def key(self):
        return (self.transmitter, self.user, self.rate)


@dataclass
class ConflictGraph:
    vertices: list[Vertex]
    adjacency: np.ndarray
    fetch_budget: dict[int, int] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.vertices)

    @cached_property
    def weights(self) -> np.ndarray:
        return np.array([v.weight for v in self.vertices], dtype=float)

    @cached_property
    def neighbour_masks(self) -> list[int]:
        masks = []
        for row in self.adjacency:
            m = 0
            for j in np.flatnonzero(row):
                m |= 1 << int(j)
            masks.append(m)
        return masks

    def weight_of(self, clique: Iterable[int]) -> float:
        return float(sum(self.vertices[i].weight for i in clique))

    def is_clique(self, clique: Sequence[int]) -> bool:
        ids = list(clique)
        if len(set(ids)) != len(ids):
            return False
        for a in range(len(ids)):
            for b in range(a + 1, len(ids)):
                if not self.adjacency[ids[a], ids[b]]:
                    return False
        return self.within_budget(ids)

    def within_budget(self, clique: Iterable[int]) -> bool:
        fetched: dict[int, set[int]] = {}
        for i in clique:
            v = self.vertices[i]
            if v.fetched:
                fetched.setdefault(v.transmitter, set()).add(v.file)
        return all(len(fs) <= self.fetch_budget.get(t, 0) for t, fs in fetched.items())


def weight_of(rate: float, cached: bool, fronthaul_capacity: float, bandwidth: float) -> float:
    """Vertex weight: the scheduled rate, capped by the fronthaul for fetched files."""
    if cached:
        return rate
    return min(fronthaul_capacity / bandwidth, rate)


def adjacent(v1: Vertex, v2: Vertex, side: SideInfo) -> bool:
    if v1.transmitter != v2.transmitter:
        return True
    if v1.user == v2.user or v1.rate != v2.rate:
        return False
    if v1.file == v2.file:
        return True
    return v1.file in side.has[v2.user] and v2.file in side.has[v1.user]


def candidate_rates(caps_row: np.ndarray, users: Sequence[int], u: int, threshold: float) -> list[float]:
    own = caps_row[u]
    return sorted({float(caps_row[w]) for w in users if threshold <= caps_row[w] <= own})


def transmitter_vertices(
    t: int,
    users: Iterable[int],
    caps: np.ndarray,
    cache: CacheMatrix,
    side: SideInfo,
    params: DeliveryParams,
) -> list[Vertex]:
    members = sorted(u for u in users if params.covers(t, u))
    row = caps[t]
    fetch_ok = params.is_fap(t) and params.fetch_limit > 0
    out = []
    for u in members:
        f = side.wants[u]
        cached = bool(cache.placement[f, t])
        if not cached and not fetch_ok:
            continue
        for r in candidate_rates(row, members, u, params.rate_threshold):
            w = r if cached else min(params.fronthaul_se, r)
            out.append(Vertex(t, u, f, r, w, not cached))
    return out


def _block_adjacency(vs: list[Vertex], side: SideInfo) -> np.ndarray:
    n = len(vs)
    if n == 0:
        return np.zeros((0, 0), dtype=bool)
    users = np.array([v.user for v in vs])
    files = np.array([v.file for v in vs])
    rates = np.array([v.rate for v in vs])
    hm = side.has_matrix
    # knows[i, j]: the user of vertex j holds the file of vertex i
    knows = hm[users[None, :], files[:, None]]
    decodable = (files[:, None] == files[None, :]) | (knows & knows.T)
    return (rates[:, None] == rates[None, :]) & (users[:, None] != users[None, :]) & decodable


def assemble_graph(blocks: list[list[Vertex]], side: SideInfo, params: DeliveryParams) -> ConflictGraph:
    vertices = [v for b in blocks for v in b]
    n = len(vertices)
    adj = np.ones((n, n), dtype=bool)
    start = 0
    for b in blocks:
        end = start + len(b)
        adj[start:end, start:end] = _block_adjacency(b, side)
        start = end
    budget = {t: params.fetch_limit for t in range(params.num_faps)}
    return ConflictGraph(vertices, adj, budget)


def build_graph(partition, cache: CacheMatrix, side: SideInfo, caps: np.ndarray, params: DeliveryParams) -> ConflictGraph:
    """Conflict graph over all coalitions; ``partition`` is a Partition or a per-transmitter list of user sets."""
    coalitions = getattr(partition, "coalitions", partition)
    blocks = [transmitter_vertices(t, users, caps, cache, side, params) for t, users in enumerate(coalitions)]
    return assemble_graph(blocks, side, params)


def greedy_mwc(graph: ConflictGraph) -> list[int]:
    """Repeatedly take the heaviest vertex still adjacent to everything chosen.

    Ties go to the lowest vertex id. A vertex whose fetched file would exceed its
    F-AP's fetch budget is skipped.
    """
    n = len(graph)
    if n == 0:
        return []
    order = np.lexsort((np.arange(n), -graph.weights))
    cand = np.ones(n, dtype=bool)
    fetched: dict[int, set[int]] = {}
    chosen = []
    for i in order:
        if not cand[i]:
            continue
        v = graph.vertices[i]
        if v.fetched:
            fs = fetched.setdefault(v.transmitter, set())
            if v.file not in fs and len(fs) >= graph.fetch_budget.get(v.transmitter, 0):
                cand[i] = False
                continue
            fs.add(v.file)
        chosen.append(int(i))
        cand &= graph.adjacency[i]
    return sorted(chosen)


def _enumerate_best(graph: ConflictGraph, ids: list[int], prune: bool) -> list[int]:
    """DFS over cliques in lexicographic order; returns the lexicographically first optimum."""
    masks = graph.neighbour_masks
    w = graph.weights
    verts = graph.vertices
    budget = graph.fetch_budget
    best_w = 0.0
    best: list[int] = []
    cur: list[int] = []
    fetched: dict[int, dict[int, int]] = {}

    def bound(cand: int) -> float:
        s = 0.0
        while cand:
            low = cand & -cand
            s += w[low.bit_length() - 1]
            cand ^= low
        return s

    def visit(cand: int, cur_w: float):
        nonlocal best_w, best
        while cand:
            if prune and cur_w + bound(cand) <= best_w + _TOL * max(1.0, best_w):
                return
            low = cand & -cand
            i = low.bit_length() - 1
            cand ^= low
            v = verts[i]
            if v.fetched:
                fs = fetched.setdefault(v.transmitter, {})
                if v.file not in fs and len(fs) >= budget.get(v.transmitter, 0):
                    continue
                fs[v.file] = fs.get(v.file, 0) + 1
            cur.append(i)
            nw = cur_w + w[i]
            if nw > best_w + _TOL * max(1.0, best_w):
                best_w, best = nw, list(cur)
            visit(cand & masks[i], nw)
            cur.pop()
            if v.fetched:
                fs = fetched[v.transmitter]
                fs[v.file] -= 1
                if fs[v.file] == 0:
                    del fs[v.file]

    start = 0
    for i in ids:
        start |= 1 << i
    visit(start, 0.0)
    return sorted(best)


def brute_force_mwc(graph: ConflictGraph) -> list[int]:
    """Exhaustive maximum-weight clique; small graphs only."""
    if len(graph) > BRUTE_FORCE_LIMIT:
        raise ValueError(f"brute force limited to {BRUTE_FORCE_LIMIT} vertices, got {len(graph)}")
    return _enumerate_best(graph, list(range(len(graph))), prune=False)


def exact_mwc(graph: ConflictGraph) -> list[int]:
    """Branch-and-bound maximum-weight clique, solved per transmitter block."""
    blocks: dict[int, list[int]] = {}
    for i, v in enumerate(graph.vertices):
        blocks.setdefault(v.transmitter, []).append(i)
    out = []
    for t in sorted(blocks):
        out.extend(_enumerate_best(graph, blocks[t], prune=True))
    return sorted(out)


def solve_mwc(graph: ConflictGraph, method: str = "greedy") -> list[int]:
    if method == "greedy":
        return greedy_mwc(graph)
    if method == "exact":
        return exact_mwc(graph)
    raise ValueError(f"unknown MWC method {method!r}")


@dataclass(frozen=True)
class Transmission:
    transmitter: int
    rate: float
    targets: tuple[tuple[int, int], ...]  # (user, wanted file)
    fetched: frozenset[int] = frozenset()

    @property
    def combo(self) -> frozenset[int]:
        return frozenset(f for _, f in self.targets)

    @property
    def users(self) -> tuple[int, ...]:
        return tuple(u for u, _ in self.targets)

    def user_rate(self, user_file: tuple[int, int], fronthaul_se: float) -> float:
        return min(fronthaul_se, self.rate) if user_file[1] in self.fetched else self.rate

    def weight(self, fronthaul_se: float) -> float:
        return sum(self.user_rate(tf, fronthaul_se) for tf in self.targets)


@dataclass(frozen=True)
class Schedule:
    transmissions: tuple[Transmission, ...] = ()

    def get(self, transmitter: int) -> Transmission | None:
        for tx in self.transmissions:
            if tx.transmitter == transmitter:
                return tx
        return None

    @property
    def served_users(self) -> list[int]:
        return sorted(u for tx in self.transmissions for u in tx.users)

    def targeted(self, transmitter: int) -> tuple[int, ...]:
        tx = self.get(transmitter)
        return tx.users if tx else ()

    def fetched_files(self, transmitter: int) -> frozenset[int]:
        tx = self.get(transmitter)
        return tx.fetched if tx else frozenset()

    def weight(self, fronthaul_se: float) -> float:
        return sum(tx.weight(fronthaul_se) for tx in self.transmissions)

    def user_rates(self, fronthaul_se: float) -> dict[int, float]:
        return {u: tx.user_rate((u, f), fronthaul_se) for tx in self.transmissions for u, f in tx.targets}


def schedule_from_clique(graph: ConflictGraph, clique: Iterable[int], cache: CacheMatrix, side: SideInfo) -> Schedule:
    per_tx: dict[int, list[Vertex]] = {}
    for i in clique:
        v = graph.vertices[i]
        per_tx.setdefault(v.transmitter, []).append(v)
    out = []
    for t in sorted(per_tx):
        vs = sorted(per_tx[t], key=lambda v: v.user)
        rates = {v.rate for v in vs}
        assert len(rates) == 1, f"clique mixes rates at transmitter {t}"
        fetched = frozenset(v.file for v in vs if not cache.placement[v.file, t])
        assert len(fetched) <= graph.fetch_budget.get(t, 0), f"fetch budget exceeded at transmitter {t}"
        out.append(Transmission(t, vs[0].rate, tuple((v.user, v.file) for v in vs), fetched))
    return Schedule(tuple(out))


def xor_decode(combo: Iterable[int], has: Iterable[int]) -> int | None:
    """The single unknown file of an XOR combination, or None if not instantly decodable."""
    unknown = set(combo) - set(has)
    if len(unknown) != 1:
        return None
    return unknown.pop()


def sum_rate(schedule: Schedule, fronthaul_capacity: float, bandwidth: float) -> float:
    """Delivered bit/s; users served with fetched files are capped by the fronthaul rate."""
    total = 0.0
    for tx in schedule.transmissions:
        link = tx.rate * bandwidth
        for _, f in tx.targets:
            total += min(fronthaul_capacity, link) if f in tx.fetched else link
    return total


def validate_schedule(
    schedule: Schedule,
    cache: CacheMatrix,
    side: SideInfo,
    caps: np.ndarray,
    params: DeliveryParams,
    rtol: float = 1e-9,
) -> list[str]:
    """Return the list of violated delivery constraints (empty when feasible)."""
    problems = []
    seen: set[int] = set()
    for tx in schedule.transmissions:
        t = tx.transmitter
        users = tx.users
        if len(set(users)) != len(users):
            problems.append(f"tx {t}: repeated user")
        clash = seen.intersection(users)
        if clash:
            problems.append(f"tx {t}: users {sorted(clash)} targeted twice")
        seen.update(users)
        if not users:
            continue
        if tx.rate < params.rate_threshold - rtol:
            problems.append(f"tx {t}: rate {tx.rate:.6g} below threshold")
        min_cap = min(caps[t, u] for u in users)
        if tx.rate > min_cap * (1 + rtol) + rtol:
            problems.append(f"tx {t}: rate {tx.rate:.6g} exceeds capacity {min_cap:.6g}")
        local = {f for f in tx.combo if cache.placement[f, t]}
        if tx.fetched & local:
            problems.append(f"tx {t}: fetched a cached file")
        if not tx.combo <= local | tx.fetched:
            problems.append(f"tx {t}: combo not available at transmitter")
        if tx.fetched and not params.is_fap(t):
            problems.append(f"tx {t}: CE-D2D user cannot fetch")
        if len(tx.fetched) > params.fetch_limit:
            problems.append(f"tx {t}: {len(tx.fetched)} fetched files exceed limit")
        for u, f in tx.targets:
            if not params.covers(t, u):
                problems.append(f"tx {t}: user {u} outside coverage")
            if side.wants[u] != f:
                problems.append(f"tx {t}: user {u} does not want file {f}")
            if xor_decode(tx.combo, side.has[u]) != side.wants[u]:
                problems.append(f"tx {t}: user {u} cannot decode")
    return problems


def graph_to_dot(graph: ConflictGraph, name: str = "idnc") -> str:
    lines = [f"graph {name} {{"]
    for i, v in enumerate(graph.vertices):
        tag = " fetch" if v.fetched else ""
        lines.append(
            f'  v{i} [label="t{v.transmitter} u{v.user} f{v.file}\\nr={v.rate:.3f} w={v.weight:.3f}{tag}"];'
        )
    n = len(graph)
    for i in range(n):
        for j in range(i + 1, n):
            if graph.adjacency[i, j]:
                lines.append(f"  v{i} -- v{j};")
    lines.append("}")
    return "\n".join(lines) + "\n"
