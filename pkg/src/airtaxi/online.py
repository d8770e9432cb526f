"""Accept-or-reject booking sessions.

A session is the broker's live state: demands grouped per origin-destination
pair (each pair owns its own beam frontier), the consolidated flight requests,
and one routing solution serving every request. Accepted demands are
commitments, so a new demand is taken only when, within the time budget, the
whole system can still be served: the demand is pooled incrementally, the
affected requests are detached from the current solution, and the search is
warm-started from the remainder.

propose() is pure: it either returns a fresh session (accept) or the original
object untouched (reject), so rollback is free.
"""
from __future__ import annotations

import hashlib
import time
from dataclasses import dataclass, replace
from typing import Mapping, Optional, Sequence

from . import schemas
from .model import (
    Aircraft,
    BatteryParams,
    ChargePlan,
    Demand,
    FlightRequest,
    Network,
    PoolingConfig,
    RoutingConfig,
    RoutingSolution,
    ZERO_CHARGE,
)
from .pooling import (
    BeamState,
    GroupCache,
    PartitionNode,
    VALUE_PER_PASSENGER,
    extend_incremental,
    initial_state,
)
from .model import demand_servable
from .routing import INF, RoutingContext, RoutingInstance, stratified_config, validate_routing
from .vns import uam_vns

DEFAULT_CHECKPOINTS = (5.0, 10.0, 20.0, 30.0)


class SessionError(RuntimeError):
    """Session cannot be built or updated as requested."""


@dataclass(frozen=True)
class PlacedDemand:
    """A demand together with the leg it wants to fly."""

    demand: Demand
    origin: int
    destination: int


@dataclass(frozen=True)
class PairState:
    """Beam frontier of one origin-destination pair.

    members holds global demand ids in insertion order; the beam's local
    demand ids are their positions in that tuple.
    """

    origin: int
    destination: int
    members: tuple[int, ...]
    beam: BeamState


@dataclass(frozen=True)
class Session:
    network: Network
    fleet: tuple[Aircraft, ...]
    battery: BatteryParams
    pooling_config: PoolingConfig
    routing_config: RoutingConfig
    demands: tuple[PlacedDemand, ...]
    pairs: tuple[PairState, ...]
    requests: tuple[FlightRequest, ...]
    request_members: Mapping[int, tuple[int, ...]]
    solution: RoutingSolution
    next_request_id: int
    checkpoints: tuple[float, ...] = DEFAULT_CHECKPOINTS

    def instance(self) -> RoutingInstance:
        return _instance(
            self.network, self.fleet, self.battery, self.routing_config, self.requests
        )


@dataclass(frozen=True)
class ProposeResult:
    accepted: bool
    session: Session
    elapsed_seconds: float
    first_success_seconds: Optional[float]
    reason: str
    # request ids that were dissolved because their group composition changed
    replaced_requests: tuple[int, ...] = ()


@dataclass(frozen=True)
class CheckpointReport:
    statuses: tuple[tuple[float, str], ...]
    final_status: str
    first_success_seconds: Optional[float]
    result: ProposeResult


def _instance(
    network: Network,
    fleet: tuple[Aircraft, ...],
    battery: BatteryParams,
    config: RoutingConfig,
    requests: Sequence[FlightRequest],
) -> RoutingInstance:
    instance = RoutingInstance(
        network=network,
        fleet=fleet,
        requests=tuple(requests),
        battery=battery,
        config=config,
    )
    cfg = stratified_config(instance)
    if cfg is not instance.config:
        instance = replace(instance, config=cfg)
    return instance


def _check_leg(network: Network, origin: int, destination: int) -> None:
    ids = {v.id for v in network.vertiports}
    if origin not in ids or destination not in ids:
        raise SessionError(f"unknown vertiport in leg ({origin}, {destination})")
    if (origin, destination) not in network.legs:
        raise SessionError(f"no leg from {origin} to {destination}")


def _resolve_pooling(config: Optional[PoolingConfig], n_initial: int) -> PoolingConfig:
    config = config or PoolingConfig()
    if config.lambda_group is None:
        config = replace(config, lambda_group=config.lambda_for(max(n_initial, 1)))
    return config


def _make_request(
    rid: int,
    key: tuple[int, ...],
    demands: Sequence[PlacedDemand],
    network: Network,
    origin: int,
    destination: int,
    departure: float,
) -> FlightRequest:
    pax = sum(demands[g].demand.passengers for g in key)
    fly = network.fly_time[(origin, destination)]
    return FlightRequest(
        id=rid,
        origin=origin,
        destination=destination,
        depart_minute=departure,
        arrive_minute=departure + fly,
        value=VALUE_PER_PASSENGER * pax,
        passengers=pax,
    )


def _local_copies(demands: Sequence[PlacedDemand], members: Sequence[int]) -> list[Demand]:
    return [replace(demands[g].demand, id=k) for k, g in enumerate(members)]


def build_session(
    placed: Sequence[PlacedDemand],
    network: Network,
    fleet: Sequence[Aircraft],
    battery: BatteryParams,
    *,
    pooling_config: Optional[PoolingConfig] = None,
    routing_config: Optional[RoutingConfig] = None,
    checkpoints: Sequence[float] = DEFAULT_CHECKPOINTS,
    build_budget_seconds: float = 300.0,
    seed: Optional[int] = None,
) -> Session:
    """Pool the initial demand book and solve it to full service.

    The group-count penalty weight is resolved once from the initial demand
    count and stays fixed for the session's lifetime, so later incremental
    extensions score against the same objective.
    """
    pooling = _resolve_pooling(pooling_config, len(placed))
    routing = routing_config or RoutingConfig()
    demands: list[PlacedDemand] = []
    for i, p in enumerate(placed):
        _check_leg(network, p.origin, p.destination)
        d = replace(p.demand, id=i)
        if not demand_servable(d, pooling):
            raise SessionError(f"demand {i} cannot be served even alone")
        demands.append(PlacedDemand(d, p.origin, p.destination))

    by_pair: dict[tuple[int, int], list[int]] = {}
    for i, p in enumerate(demands):
        by_pair.setdefault((p.origin, p.destination), []).append(i)

    pairs: list[PairState] = []
    requests: list[FlightRequest] = []
    request_members: dict[int, tuple[int, ...]] = {}
    next_id = 0
    for origin, destination in sorted(by_pair):
        members = tuple(by_pair[(origin, destination)])
        local = _local_copies(demands, members)
        beam = initial_state(local, pooling)
        for d in local[1:]:
            beam = extend_incremental(beam, d, local, pooling)
        pairs.append(PairState(origin, destination, members, beam))
        node = beam.frontier[0]
        for group, cache in zip(node.groups, node.caches):
            key = tuple(members[l] for l in group)
            requests.append(
                _make_request(next_id, key, demands, network, origin, destination, cache.max_quantile)
            )
            request_members[next_id] = key
            next_id += 1

    instance = _instance(network, tuple(fleet), battery, routing, requests)
    result = uam_vns(
        instance,
        seed=seed,
        time_budget_seconds=build_budget_seconds,
        stop_at_full_service=True,
    )
    if result.objective.n_unserved or result.objective.violation:
        raise SessionError(
            f"initial book is not fully servable within {build_budget_seconds} s "
            f"({result.objective.n_unserved} requests left unserved)"
        )
    return Session(
        network=network,
        fleet=tuple(fleet),
        battery=battery,
        pooling_config=pooling,
        routing_config=routing,
        demands=tuple(demands),
        pairs=tuple(pairs),
        requests=tuple(requests),
        request_members=request_members,
        solution=result.solution,
        next_request_id=next_id,
        checkpoints=tuple(checkpoints),
    )


def propose(
    session: Session,
    demand: Demand,
    origin: int,
    destination: int,
    time_budget_seconds: float,
    *,
    seed: Optional[int] = None,
) -> ProposeResult:
    """Try to take one more demand; accept only with full service restored.

    Structural problems (bad leg, unservable demand) reject before any budget
    is spent. Otherwise the demand joins its pair's beam, requests whose
    member sets changed are rebuilt under fresh ids and detached to unserved,
    and the search runs until full service or the budget runs out.
    """
    gid = len(session.demands)
    try:
        _check_leg(session.network, origin, destination)
        demand = replace(demand, id=gid)
        if not demand_servable(demand, session.pooling_config):
            raise SessionError("demand cannot be served even alone")
    except (ValueError, SessionError) as exc:
        return ProposeResult(False, session, 0.0, None, f"structural: {exc}")

    t0 = time.perf_counter()
    pooling = session.pooling_config
    demands = session.demands + (PlacedDemand(demand, origin, destination),)
    pair_idx = next(
        (i for i, p in enumerate(session.pairs) if (p.origin, p.destination) == (origin, destination)),
        None,
    )
    if pair_idx is None:
        members = (gid,)
        local = _local_copies(demands, members)
        beam = initial_state(local, pooling, pooling.lambda_group)
    else:
        pair = session.pairs[pair_idx]
        members = pair.members + (gid,)
        local = _local_copies(demands, members)
        beam = extend_incremental(pair.beam, local[-1], local, pooling)
    new_pair = PairState(origin, destination, members, beam)

    # requests of this pair, rebuilt from the extended beam's best partition
    inverse = {key: rid for rid, key in session.request_members.items()}
    node = beam.frontier[0]
    next_id = session.next_request_id
    pair_requests: list[FlightRequest] = []
    pair_members_map: dict[int, tuple[int, ...]] = {}
    fresh: set[int] = set()
    for group, cache in zip(node.groups, node.caches):
        key = tuple(members[l] for l in group)
        rid = inverse.get(key)
        if rid is None:
            rid = next_id
            next_id += 1
            fresh.add(rid)
        pair_requests.append(
            _make_request(rid, key, demands, session.network, origin, destination, cache.max_quantile)
        )
        pair_members_map[rid] = key

    old_members = set(members[:-1])
    old_pair_ids = {
        rid for rid, key in session.request_members.items() if key[0] in old_members
    }
    kept = set(pair_members_map) - fresh
    replaced = old_pair_ids - kept
    requests = tuple(r for r in session.requests if r.id not in replaced) + tuple(
        r for r in pair_requests if r.id in fresh
    )

    new_instance = _instance(
        session.network, session.fleet, session.battery, session.routing_config, requests
    )
    ctx = RoutingContext(new_instance)
    routes: list[list[tuple[int, ChargePlan]]] = []
    dropped: set[int] = set()
    for v_idx, route in enumerate(session.solution.routes):
        prev_key = ctx.key_of(v_idx)
        stops = []
        follower_reset = False
        for rid, plan in route:
            if rid in replaced:
                follower_reset = True
                continue
            if ctx.conn(prev_key, rid).cost == INF:
                dropped.add(rid)
                follower_reset = True
                continue
            stops.append((rid, ZERO_CHARGE if follower_reset else plan))
            follower_reset = False
            prev_key = rid
        routes.append(stops)
    start = RoutingSolution(
        routes=routes,
        unserved=fresh | dropped | set(session.solution.unserved),
    )

    result = uam_vns(
        new_instance,
        start=start,
        seed=seed,
        time_budget_seconds=time_budget_seconds,
        stop_at_full_service=True,
    )
    elapsed = time.perf_counter() - t0
    obj = result.objective
    if obj.n_unserved or obj.violation or validate_routing(result.solution, new_instance):
        return ProposeResult(False, session, elapsed, None, "no-full-service")

    members_map = {
        rid: key for rid, key in session.request_members.items() if rid not in replaced
    }
    members_map.update(pair_members_map)
    if pair_idx is None:
        pairs = tuple(sorted(
            session.pairs + (new_pair,), key=lambda p: (p.origin, p.destination)
        ))
    else:
        pairs = session.pairs[:pair_idx] + (new_pair,) + session.pairs[pair_idx + 1 :]
    new_session = Session(
        network=session.network,
        fleet=session.fleet,
        battery=session.battery,
        pooling_config=session.pooling_config,
        routing_config=session.routing_config,
        demands=demands,
        pairs=pairs,
        requests=requests,
        request_members=members_map,
        solution=result.solution,
        next_request_id=next_id,
        checkpoints=session.checkpoints,
    )
    return ProposeResult(
        True,
        new_session,
        elapsed,
        result.full_service_seconds,
        "accepted",
        tuple(sorted(replaced)),
    )


def checkpoint_report(
    session: Session,
    demand: Demand,
    origin: int,
    destination: int,
    checkpoints: Optional[Sequence[float]] = None,
    *,
    seed: Optional[int] = None,
) -> CheckpointReport:
    """Run one propose at the largest checkpoint, report status at each mark."""
    marks = tuple(sorted(checkpoints if checkpoints is not None else session.checkpoints))
    if not marks:
        raise ValueError("at least one checkpoint required")
    result = propose(session, demand, origin, destination, marks[-1], seed=seed)
    t = result.first_success_seconds
    statuses = tuple(
        (mark, "accept" if result.accepted and t is not None and t <= mark else "reject")
        for mark in marks
    )
    return CheckpointReport(
        statuses=statuses,
        final_status="accept" if result.accepted else "reject",
        first_success_seconds=t,
        result=result,
    )


# session snapshots


def _beam_to_dict(beam: BeamState) -> dict:
    return {
        "level": beam.level,
        "lambda_group": beam.lambda_group,
        "frontier": [
            {
                "groups": [list(g) for g in node.groups],
                "score": node.score,
                "caches": [list(c) for c in node.caches],
            }
            for node in beam.frontier
        ],
    }


def _beam_from_dict(obj: dict) -> BeamState:
    frontier = tuple(
        PartitionNode(
            groups=tuple(tuple(g) for g in node["groups"]),
            score=node["score"],
            caches=tuple(GroupCache(*c) for c in node["caches"]),
        )
        for node in obj["frontier"]
    )
    return BeamState(obj["level"], frontier, obj["lambda_group"])


def _pooling_config_to_dict(config: PoolingConfig) -> dict:
    return {
        "capacity": config.capacity,
        "t_regular": config.t_regular,
        "t_premium": config.t_premium,
        "alpha_regular": config.alpha_regular,
        "alpha_premium": config.alpha_premium,
        "lambda_group": config.lambda_group,
        "beam_width": config.beam_width,
    }


def _pooling_config_from_dict(obj: dict) -> PoolingConfig:
    return PoolingConfig(**obj)


def session_to_payload(session: Session) -> dict:
    network = schemas.dump_network(session.network)
    return {
        "schema_version": schemas.SCHEMA_VERSION,
        "kind": "session",
        "network": {k: network[k] for k in ("vertiports", "legs")},
        "fleet": [
            {"id": a.id, "start_vertiport": a.start_vertiport, "start_minute": a.start_minute}
            for a in session.fleet
        ],
        "battery": schemas.battery_to_dict(session.battery),
        "pooling_config": _pooling_config_to_dict(session.pooling_config),
        "routing_config": schemas.config_to_dict(session.routing_config),
        "demands": [
            {
                **schemas.demand_to_dict(p.demand),
                "origin": p.origin,
                "destination": p.destination,
            }
            for p in session.demands
        ],
        "pairs": [
            {
                "origin": p.origin,
                "destination": p.destination,
                "members": list(p.members),
                "beam": _beam_to_dict(p.beam),
            }
            for p in session.pairs
        ],
        "requests": [schemas.request_to_dict(r) for r in session.requests],
        "request_members": {
            str(rid): list(key) for rid, key in sorted(session.request_members.items())
        },
        "solution": schemas.dump_routing_solution(session.solution),
        "next_request_id": session.next_request_id,
        "checkpoints": list(session.checkpoints),
    }


def session_from_payload(payload: dict) -> Session:
    if payload.get("kind") != "session":
        raise schemas.SchemaError(f"expected kind 'session', got {payload.get('kind')!r}")
    if payload.get("schema_version") != schemas.SCHEMA_VERSION:
        raise schemas.SchemaError("unsupported schema_version")
    network_body = dict(payload["network"])
    network_body.setdefault("schema_version", schemas.SCHEMA_VERSION)
    network_body.setdefault("kind", "network")
    network = schemas.parse_network(network_body)
    fleet = tuple(
        Aircraft(a["id"], a["start_vertiport"], a["start_minute"]) for a in payload["fleet"]
    )
    demands = tuple(
        PlacedDemand(
            schemas.demand_from_dict(obj, f"demands[{i}]"),
            obj["origin"],
            obj["destination"],
        )
        for i, obj in enumerate(payload["demands"])
    )
    pairs = tuple(
        PairState(
            p["origin"],
            p["destination"],
            tuple(p["members"]),
            _beam_from_dict(p["beam"]),
        )
        for p in payload["pairs"]
    )
    return Session(
        network=network,
        fleet=fleet,
        battery=schemas.battery_from_dict(payload["battery"]),
        pooling_config=_pooling_config_from_dict(payload["pooling_config"]),
        routing_config=schemas.config_from_dict(payload["routing_config"]),
        demands=demands,
        pairs=pairs,
        requests=tuple(
            schemas.request_from_dict(obj, f"requests[{i}]")
            for i, obj in enumerate(payload["requests"])
        ),
        request_members={
            int(rid): tuple(key) for rid, key in payload["request_members"].items()
        },
        solution=schemas.parse_routing_solution(payload["solution"]),
        next_request_id=payload["next_request_id"],
        checkpoints=tuple(payload["checkpoints"]),
    )


def session_digest(session: Session) -> str:
    """Stable content hash, for rollback-purity checks."""
    text = schemas.canonical_dumps(session_to_payload(session))
    return hashlib.sha256(text.encode("utf-8")).hexdigest()
