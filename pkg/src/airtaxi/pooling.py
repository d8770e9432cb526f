"""Demand pooling by beam search over constrained set partitions.

The search tree has one level per demand: level j holds partitions of demands
0..j into feasible flight groups. Extending a level inserts the next demand
into every group it fits plus a fresh singleton, prunes conflicts, and keeps
the best `beam_width` partial partitions by truncated objective.
"""
from __future__ import annotations

import heapq
from typing import Iterable, NamedTuple, Optional, Sequence

from .model import (
    EPS,
    Demand,
    FlightRequest,
    Network,
    PoolingConfig,
    PoolingSolution,
    StructuralError,
    UnservableDemandError,
    demand_servable,
    demand_wait_cap,
)

VALUE_PER_PASSENGER = 120.0


class GroupCache(NamedTuple):
    """O(1) insertion-check state for one group."""

    max_quantile: float
    wait_cap: float
    sum_passengers: int
    sum_alpha: float


class PartitionNode(NamedTuple):
    """Partial partition: canonical groups, cached score, per-group caches."""

    groups: tuple[tuple[int, ...], ...]
    score: float
    caches: tuple[GroupCache, ...]


class BeamState(NamedTuple):
    """Search frontier after absorbing demands 0..level."""

    level: int
    frontier: tuple[PartitionNode, ...]
    lambda_group: float


def group_departure(group: Iterable[int], demands: Sequence[Demand]) -> float:
    """Earliest departure covering every member: the max arrival quantile."""
    return max(demands[i].quantile for i in group)


def group_feasible(group: Sequence[int], demands: Sequence[Demand], config: PoolingConfig) -> bool:
    """Capacity, deadlines and per-class waiting caps under the deduced departure."""
    members = [demands[i] for i in group]
    if sum(d.passengers for d in members) > config.capacity:
        return False
    f = max(d.quantile for d in members)
    return all(f <= demand_wait_cap(d, config) + EPS for d in members)


def truncated_objective(
    groups: Sequence[Sequence[int]],
    demands: Sequence[Demand],
    config: PoolingConfig,
    lambda_group: Optional[float] = None,
) -> float:
    """Objective of a (partial) partition: group openings plus weighted waits."""
    lam = config.lambda_for(len(demands)) if lambda_group is None else lambda_group
    total = 0.0
    for group in groups:
        f = group_departure(group, demands)
        total += lam
        for i in group:
            d = demands[i]
            total += config.alpha(d.service_class) * (f - d.mean)
    return total


def _cache_for(demand: Demand, config: PoolingConfig) -> GroupCache:
    return GroupCache(
        demand.quantile,
        demand_wait_cap(demand, config),
        demand.passengers,
        config.alpha(demand.service_class),
    )


def _require_servable(demand: Demand, config: PoolingConfig) -> None:
    if not demand_servable(demand, config):
        raise UnservableDemandError(
            f"demand {demand.id} cannot be served even as a singleton group"
        )


def _children(
    parent: PartitionNode,
    demand: Demand,
    config: PoolingConfig,
    lambda_group: float,
) -> list[PartitionNode]:
    alpha = config.alpha(demand.service_class)
    q, mean, w = demand.quantile, demand.mean, demand.passengers
    cap = demand_wait_cap(demand, config)
    out = []
    for g, cache in enumerate(parent.caches):
        if cache.sum_passengers + w > config.capacity:
            continue
        f_new = cache.max_quantile if cache.max_quantile >= q else q
        new_cap = cache.wait_cap if cache.wait_cap <= cap else cap
        if f_new > new_cap + EPS:
            continue
        delta = alpha * (f_new - mean) + cache.sum_alpha * (f_new - cache.max_quantile)
        groups = parent.groups[:g] + (parent.groups[g] + (demand.id,),) + parent.groups[g + 1 :]
        caches = parent.caches[:g] + (
            GroupCache(f_new, new_cap, cache.sum_passengers + w, cache.sum_alpha + alpha),
        ) + parent.caches[g + 1 :]
        out.append(PartitionNode(groups, parent.score + delta, caches))
    # fresh singleton group; always feasible for a servable demand
    out.append(
        PartitionNode(
            parent.groups + ((demand.id,),),
            parent.score + lambda_group + alpha * (q - mean),
            parent.caches + (_cache_for(demand, config),),
        )
    )
    return out


def extend_prune(
    frontier: Sequence[PartitionNode],
    new_demand: Demand,
    demands: Sequence[Demand],
    config: PoolingConfig,
    lambda_group: Optional[float] = None,
) -> list[PartitionNode]:
    """All feasible children of the frontier after inserting ``new_demand``."""
    lam = config.lambda_for(len(demands)) if lambda_group is None else lambda_group
    _require_servable(new_demand, config)
    children: list[PartitionNode] = []
    for parent in frontier:
        children.extend(_children(parent, new_demand, config, lam))
    return children


def retrieve_best(children: Sequence[PartitionNode], width: int) -> tuple[PartitionNode, ...]:
    """The ``width`` best nodes ascending by score, ties by canonical encoding."""
    return tuple(heapq.nsmallest(width, children, key=lambda n: (n.score, n.groups)))


def initial_state(
    demands: Sequence[Demand],
    config: PoolingConfig,
    lambda_group: Optional[float] = None,
) -> BeamState:
    """Root frontier: demand 0 alone in one group."""
    if not demands:
        raise StructuralError("at least one demand required")
    lam = config.lambda_for(len(demands)) if lambda_group is None else lambda_group
    first = demands[0]
    if first.id != 0:
        raise StructuralError("demand ids must equal their positions, starting at 0")
    _require_servable(first, config)
    alpha = config.alpha(first.service_class)
    root = PartitionNode(
        ((first.id,),),
        lam + alpha * first.arrival.quantile_offset,
        (_cache_for(first, config),),
    )
    return BeamState(0, (root,), lam)


def extend_incremental(
    state: BeamState,
    new_demand: Demand,
    demands: Sequence[Demand],
    config: PoolingConfig,
) -> BeamState:
    """Absorb one more demand: extend every frontier node, keep the best beam."""
    if new_demand.id != state.level + 1:
        raise StructuralError(
            f"expected demand {state.level + 1} next, got {new_demand.id}"
        )
    children = extend_prune(state.frontier, new_demand, demands, config, state.lambda_group)
    frontier = retrieve_best(children, config.beam_width)
    return BeamState(state.level + 1, frontier, state.lambda_group)


def beam_search(demands: Sequence[Demand], config: PoolingConfig) -> PoolingSolution:
    """Pool a day's demands for one origin-destination pair into flight groups.

    Demands must carry ids equal to their positions. Every demand ends up in
    exactly one group; each group departs at the max member quantile. With a
    beam wide enough to hold all feasible partitions the result is exact.
    """
    for pos, d in enumerate(demands):
        if d.id != pos:
            raise StructuralError("demand ids must equal their positions, starting at 0")
    state = initial_state(demands, config)
    for d in demands[1:]:
        state = extend_incremental(state, d, demands, config)
    best = state.frontier[0]
    return PoolingSolution(
        groups=best.groups,
        departures=tuple(c.max_quantile for c in best.caches),
    )


def to_requests(
    solution: PoolingSolution,
    demands: Sequence[Demand],
    origin: int,
    destination: int,
    network: Network,
    value_per_passenger: float = VALUE_PER_PASSENGER,
    id_start: int = 0,
) -> list[FlightRequest]:
    """Turn each pooled group into one flight request on the given leg."""
    if (origin, destination) not in network.legs:
        raise StructuralError(f"({origin}, {destination}) is not a bookable leg")
    fly = network.fly(origin, destination)
    by_id = {d.id: d for d in demands}
    requests = []
    for k, (group, f) in enumerate(zip(solution.groups, solution.departures)):
        pax = sum(by_id[i].passengers for i in group)
        requests.append(
            FlightRequest(
                id=id_start + k,
                origin=origin,
                destination=destination,
                depart_minute=f,
                arrive_minute=f + fly,
                value=value_per_passenger * pax,
                passengers=pax,
            )
        )
    return requests
