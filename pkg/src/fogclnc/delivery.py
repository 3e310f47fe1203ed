"""End-to-end delivery for one interval: random clustering, switch phase, CLNC."""

from __future__ import annotations

from dataclasses import dataclass

from .coalition import CoalitionContext, Partition, init_partition, switch_phase
from .content import CacheMatrix, SideInfo
from .idnc import DeliveryParams, Schedule
from .power import alternate_clnc
from .topology import ChannelRealization, PowerProfile, Topology, capacity_matrix


@dataclass
class DeliveryOutcome:
    partition: Partition
    schedule: Schedule
    powers: PowerProfile
    sum_rate: float  # bit/s
    switch_passes: int
    power_iterations: int


def form_coalitions(topology: Topology, channel: ChannelRealization, side: SideInfo, cache: CacheMatrix, config, rng):
    """Random feasible clustering refined by switch operations at full F-AP power."""
    params = DeliveryParams.from_config(config, topology)
    caps = capacity_matrix(channel, PowerProfile.full(config))
    ctx = CoalitionContext(caps, cache, side, params, config.mwc)
    start = init_partition(side, cache, params, topology.num_transmitters, rng)
    return switch_phase(start, ctx, config.switch_pass_cap), ctx


def clnc_cf(topology: Topology, channel: ChannelRealization, side: SideInfo, cache: CacheMatrix, config, rng) -> DeliveryOutcome:
    switched, ctx = form_coalitions(topology, channel, side, cache, config, rng)
    res = alternate_clnc(switched.partition, cache, side, channel, config, ctx.params)
    return DeliveryOutcome(
        switched.partition, res.schedule, res.powers, res.sum_rate, switched.passes, res.power_iterations
    )
