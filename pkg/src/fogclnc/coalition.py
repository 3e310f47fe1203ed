"""Coalition formation among F-AP and CE-D2D clusters (switch operations).

A user's utility is the rate it receives from its cluster's transmission,
evaluated by running the IDNC scheduler on that single cluster at fixed
(full) F-AP power.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .content import CacheMatrix, SideInfo, missing_count
from .idnc import DeliveryParams, Transmission, assemble_graph, schedule_from_clique, solve_mwc, transmitter_vertices

_EPS = 1e-9


class SwitchNonConvergence(RuntimeError):
    def __init__(self, partition: "Partition", passes: int):
        super().__init__(f"switch phase did not settle within {passes} passes")
        self.partition = partition
        self.passes = passes


@dataclass(frozen=True)
class Partition:
    """Disjoint user clusters, one per transmitter (F-APs first, then CE-D2D users)."""

    coalitions: tuple[frozenset[int], ...]
    num_faps: int
    num_users: int

    def __post_init__(self):
        seen: set[int] = set()
        for c in self.coalitions:
            if seen & c:
                raise ValueError("coalitions overlap")
            seen |= c

    @classmethod
    def empty(cls, num_faps: int, num_d2d: int, num_users: int) -> "Partition":
        return cls(tuple(frozenset() for _ in range(num_faps + num_d2d)), num_faps, num_users)

    @property
    def fap_coalitions(self) -> tuple[frozenset[int], ...]:
        return self.coalitions[: self.num_faps]

    @property
    def d2d_coalitions(self) -> tuple[frozenset[int], ...]:
        return self.coalitions[self.num_faps :]

    @property
    def unassigned(self) -> frozenset[int]:
        assigned = frozenset().union(*self.coalitions) if self.coalitions else frozenset()
        return frozenset(range(self.num_users)) - assigned

    def of(self, u: int) -> int | None:
        for t, c in enumerate(self.coalitions):
            if u in c:
                return t
        return None

    def move(self, u: int, dest: int | None) -> "Partition":
        cs = [c - {u} for c in self.coalitions]
        if dest is not None:
            cs[dest] = cs[dest] | {u}
        return Partition(tuple(cs), self.num_faps, self.num_users)


class CoalitionContext:
    """Local Phase II evaluations for one realization, memoised per (transmitter, members)."""

    def __init__(self, caps: np.ndarray, cache: CacheMatrix, side: SideInfo, params: DeliveryParams, method: str = "greedy"):
        self.caps = caps
        self.cache = cache
        self.side = side
        self.params = params
        self.method = method
        self._memo: dict[tuple[int, frozenset[int]], Transmission | None] = {}

    def evaluate(self, t: int, members: frozenset[int]) -> Transmission | None:
        key = (t, members)
        if key not in self._memo:
            vs = transmitter_vertices(t, members, self.caps, self.cache, self.side, self.params)
            graph = assemble_graph([vs], self.side, self.params)
            sched = schedule_from_clique(graph, solve_mwc(graph, self.method), self.cache, self.side)
            self._memo[key] = sched.transmissions[0] if sched.transmissions else None
        return self._memo[key]

    def utilities(self, t: int, members: frozenset[int]) -> dict[int, float]:
        tx = self.evaluate(t, members)
        if tx is None:
            return {}
        return {u: tx.user_rate((u, f), self.params.fronthaul_se) for u, f in tx.targets}

    def coalition_value(self, t: int, members: frozenset[int]) -> float:
        return sum(self.utilities(t, members).values())

    def can_join(self, u: int, t: int, members: frozenset[int]) -> bool:
        """Wanted file deliverable at ``t`` and the cluster's fetch budget still respected."""
        p = self.params
        if not p.covers(t, u):
            return False
        f = self.side.wants[u]
        if not self.cache.placement[f, t]:
            if not p.is_fap(t) or p.fetch_limit < 1:
                return False
            if missing_count(members | {u}, t, self.cache, self.side) > p.fetch_limit:
                return False
        return True

    def system_value(self, partition: Partition) -> float:
        return sum(self.coalition_value(t, c) for t, c in enumerate(partition.coalitions))


def init_partition(side: SideInfo, cache: CacheMatrix, params: DeliveryParams, num_transmitters: int, rng) -> Partition:
    """Random feasible clustering; users with no feasible cluster stay unassigned."""
    ctx = CoalitionContext(np.zeros((num_transmitters, side.num_users)), cache, side, params)
    coalitions = [frozenset() for _ in range(num_transmitters)]
    for u in range(side.num_users):
        options = [t for t in range(num_transmitters) if ctx.can_join(u, t, coalitions[t])]
        if options:
            t = options[int(rng.integers(len(options)))]
            coalitions[t] = coalitions[t] | {u}
    return Partition(tuple(coalitions), params.num_faps, side.num_users)


def user_utility(u: int, partition: Partition, ctx: CoalitionContext) -> float:
    t = partition.of(u)
    if t is None:
        return 0.0
    return ctx.utilities(t, partition.coalitions[t]).get(u, 0.0)


def prefers(u: int, c: int, partition: Partition, ctx: CoalitionContext) -> bool:
    """Whether ``u`` strictly prefers cluster ``c`` over its current one."""
    if partition.of(u) == c:
        return False
    members = partition.coalitions[c]
    if not ctx.can_join(u, c, members):
        return False
    joined = members | {u}
    new = ctx.utilities(c, joined)
    if new.get(u, 0.0) <= user_utility(u, partition, ctx) + _EPS:
        return False
    gain = sum(new.values()) - ctx.coalition_value(c, members)
    if gain <= _EPS:
        return False
    # the source cluster's loss must not cancel the gain, otherwise switches can cycle
    src = partition.of(u)
    if src is None:
        return True
    old = partition.coalitions[src]
    loss = ctx.coalition_value(src, old) - ctx.coalition_value(src, old - {u})
    return gain - loss > _EPS


@dataclass
class SwitchResult:
    partition: Partition
    passes: int
    switches: int
    trace: list[float] = field(default_factory=list)


def switch_phase(partition: Partition, ctx: CoalitionContext, pass_cap: int = 1000, record: bool = False) -> SwitchResult:
    """Round-robin switch operations until a full pass changes nothing."""
    p = partition
    fap = range(p.num_faps)
    d2d = range(p.num_faps, len(p.coalitions))
    trace = [ctx.system_value(p)] if record else []
    switches = 0
    for passes in range(1, pass_cap + 1):
        moved = False
        for candidates in (fap, d2d):
            for u in range(p.num_users):
                for c in candidates:
                    if prefers(u, c, p, ctx):
                        p = p.move(u, c)
                        switches += 1
                        moved = True
                        if record:
                            trace.append(ctx.system_value(p))
        if not moved:
            return SwitchResult(p, passes, switches, trace)
    raise SwitchNonConvergence(p, pass_cap)


def is_nash_stable(partition: Partition, ctx: CoalitionContext) -> bool:
    return not any(
        prefers(u, c, partition, ctx)
        for u in range(partition.num_users)
        for c in range(len(partition.coalitions))
    )
