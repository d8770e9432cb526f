"""Versioned JSON documents for every artifact the toolkit reads or writes.

Each document is an envelope {"schema_version", "kind", ...payload} with a
kind-specific body. Serialization is canonical (sorted keys, fixed
separators) so identical values produce identical bytes; parsing validates
shape and rebuilds the domain objects, raising SchemaError on any mismatch.
"""
from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Sequence, Union

from .model import (
    Aircraft,
    ArrivalProfile,
    BatteryParams,
    ChargePlan,
    Demand,
    DemandClass,
    FlightRequest,
    Network,
    PoolingSolution,
    RoutingConfig,
    RoutingSolution,
    Vertiport,
    VnsConfig,
)
from .routing import RoutingInstance

SCHEMA_VERSION = 1


class SchemaError(ValueError):
    """Document malformed, wrong kind, or wrong version."""


def canonical_dumps(payload: dict) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":")) + "\n"


def write_document(path: Union[str, Path], payload: dict) -> None:
    Path(path).write_text(canonical_dumps(payload), encoding="utf-8")


def read_document(path: Union[str, Path]) -> dict:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise SchemaError(f"cannot read {path}: {exc}") from exc
    if not isinstance(payload, dict):
        raise SchemaError(f"{path}: top level must be an object")
    return payload


def _envelope(kind: str, body: dict) -> dict:
    return {"schema_version": SCHEMA_VERSION, "kind": kind, **body}


def _expect(payload: dict, kind: str) -> None:
    if payload.get("kind") != kind:
        raise SchemaError(f"expected kind {kind!r}, got {payload.get('kind')!r}")
    if payload.get("schema_version") != SCHEMA_VERSION:
        raise SchemaError(
            f"unsupported schema_version {payload.get('schema_version')!r}"
        )


def _field(obj: dict, key: str, where: str) -> Any:
    try:
        return obj[key]
    except (KeyError, TypeError):
        raise SchemaError(f"{where}: missing field {key!r}") from None


# demands


def demand_to_dict(demand: Demand) -> dict:
    return {
        "id": demand.id,
        "passengers": demand.passengers,
        "mean_minute": demand.arrival.mean_minute,
        "quantile_offset": demand.arrival.quantile_offset,
        "service_class": demand.service_class.value,
        "latest_departure": demand.latest_departure,
    }


def demand_from_dict(obj: dict, where: str = "demand") -> Demand:
    try:
        service_class = DemandClass(_field(obj, "service_class", where))
    except ValueError as exc:
        raise SchemaError(f"{where}: {exc}") from None
    try:
        return Demand(
            id=_field(obj, "id", where),
            passengers=_field(obj, "passengers", where),
            arrival=ArrivalProfile(
                mean_minute=_field(obj, "mean_minute", where),
                quantile_offset=_field(obj, "quantile_offset", where),
            ),
            service_class=service_class,
            latest_departure=obj.get("latest_departure"),
        )
    except ValueError as exc:
        raise SchemaError(f"{where}: {exc}") from None


def dump_demands(demands: Sequence[Demand]) -> dict:
    return _envelope("demands", {"demands": [demand_to_dict(d) for d in demands]})


def parse_demands(payload: dict) -> list[Demand]:
    _expect(payload, "demands")
    items = _field(payload, "demands", "demands")
    return [demand_from_dict(obj, f"demands[{i}]") for i, obj in enumerate(items)]


# network


def dump_network(network: Network) -> dict:
    return _envelope(
        "network",
        {
            "vertiports": [
                {
                    "id": v.id,
                    "landing_fee": v.landing_fee,
                    "open_minute": v.open_minute,
                    "close_minute": v.close_minute,
                }
                for v in network.vertiports
            ],
            "legs": [
                {
                    "origin": i,
                    "destination": j,
                    "fly_time": network.fly_time[(i, j)],
                    "energy": network.energy[(i, j)],
                }
                for i, j in sorted(network.legs)
            ],
        },
    )


def parse_network(payload: dict) -> Network:
    _expect(payload, "network")
    vertiports = tuple(
        Vertiport(
            id=_field(v, "id", f"vertiports[{i}]"),
            landing_fee=_field(v, "landing_fee", f"vertiports[{i}]"),
            open_minute=_field(v, "open_minute", f"vertiports[{i}]"),
            close_minute=_field(v, "close_minute", f"vertiports[{i}]"),
        )
        for i, v in enumerate(_field(payload, "vertiports", "network"))
    )
    fly: dict[tuple[int, int], float] = {}
    energy: dict[tuple[int, int], float] = {}
    for i, leg in enumerate(_field(payload, "legs", "network")):
        where = f"legs[{i}]"
        key = (_field(leg, "origin", where), _field(leg, "destination", where))
        fly[key] = _field(leg, "fly_time", where)
        energy[key] = _field(leg, "energy", where)
    try:
        return Network(
            vertiports=vertiports, legs=frozenset(fly), fly_time=fly, energy=energy
        )
    except ValueError as exc:
        raise SchemaError(f"network: {exc}") from None


# flight requests


def request_to_dict(request: FlightRequest) -> dict:
    return {
        "id": request.id,
        "origin": request.origin,
        "destination": request.destination,
        "depart_minute": request.depart_minute,
        "arrive_minute": request.arrive_minute,
        "value": request.value,
        "passengers": request.passengers,
    }


def request_from_dict(obj: dict, where: str = "request") -> FlightRequest:
    try:
        return FlightRequest(
            id=_field(obj, "id", where),
            origin=_field(obj, "origin", where),
            destination=_field(obj, "destination", where),
            depart_minute=_field(obj, "depart_minute", where),
            arrive_minute=_field(obj, "arrive_minute", where),
            value=_field(obj, "value", where),
            passengers=_field(obj, "passengers", where),
        )
    except ValueError as exc:
        raise SchemaError(f"{where}: {exc}") from None


def dump_requests(requests: Sequence[FlightRequest]) -> dict:
    return _envelope("requests", {"requests": [request_to_dict(r) for r in requests]})


def parse_requests(payload: dict) -> list[FlightRequest]:
    _expect(payload, "requests")
    items = _field(payload, "requests", "requests")
    return [request_from_dict(obj, f"requests[{i}]") for i, obj in enumerate(items)]


# pooling solutions


def dump_pooling_solution(solution: PoolingSolution) -> dict:
    return _envelope(
        "pooling_solution",
        {
            "groups": [list(g) for g in solution.groups],
            "departures": list(solution.departures),
        },
    )


def parse_pooling_solution(payload: dict) -> PoolingSolution:
    _expect(payload, "pooling_solution")
    try:
        return PoolingSolution(
            groups=tuple(tuple(g) for g in _field(payload, "groups", "pooling_solution")),
            departures=tuple(_field(payload, "departures", "pooling_solution")),
        )
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"pooling_solution: {exc}") from None


# routing solutions


def _plan_to_dict(plan: ChargePlan) -> dict:
    return {
        "duration_after": plan.duration_after,
        "duration_before": plan.duration_before,
        "slow_after": plan.slow_after,
        "slow_before": plan.slow_before,
    }


def _plan_from_dict(obj: dict, where: str) -> ChargePlan:
    try:
        return ChargePlan(
            duration_after=_field(obj, "duration_after", where),
            duration_before=_field(obj, "duration_before", where),
            slow_after=_field(obj, "slow_after", where),
            slow_before=_field(obj, "slow_before", where),
        )
    except ValueError as exc:
        raise SchemaError(f"{where}: {exc}") from None


def dump_routing_solution(solution: RoutingSolution) -> dict:
    return _envelope(
        "routing_solution",
        {
            "routes": [
                [
                    {"request": rid, "charge": _plan_to_dict(plan)}
                    for rid, plan in route
                ]
                for route in solution.routes
            ],
            "unserved": sorted(solution.unserved),
        },
    )


def parse_routing_solution(payload: dict) -> RoutingSolution:
    _expect(payload, "routing_solution")
    routes = []
    for vi, route in enumerate(_field(payload, "routes", "routing_solution")):
        stops = []
        for si, stop in enumerate(route):
            where = f"routes[{vi}][{si}]"
            stops.append(
                (_field(stop, "request", where), _plan_from_dict(_field(stop, "charge", where), where))
            )
        routes.append(stops)
    return RoutingSolution(
        routes=routes,
        unserved=set(_field(payload, "unserved", "routing_solution")),
    )


# routing instances


def battery_to_dict(battery: BatteryParams) -> dict:
    return {
        "top_of_charge": battery.top_of_charge,
        "bottom_of_charge": battery.bottom_of_charge,
        "soc_min": battery.soc_min,
        "rate_slow": battery.rate_slow,
        "rate_fast": battery.rate_fast,
        "price": battery.price,
    }


def battery_from_dict(obj: dict) -> BatteryParams:
    try:
        return BatteryParams(
            top_of_charge=_field(obj, "top_of_charge", "battery"),
            bottom_of_charge=_field(obj, "bottom_of_charge", "battery"),
            soc_min=_field(obj, "soc_min", "battery"),
            rate_slow=_field(obj, "rate_slow", "battery"),
            rate_fast=_field(obj, "rate_fast", "battery"),
            price=_field(obj, "price", "battery"),
        )
    except ValueError as exc:
        raise SchemaError(f"battery: {exc}") from None


def config_to_dict(config: RoutingConfig) -> dict:
    return {
        "eta": config.eta,
        "delta": config.delta,
        "alpha_unserved": config.alpha_unserved,
        "alpha_fast": config.alpha_fast,
        "vns": {
            "stagnation_limit": config.vns.stagnation_limit,
            "beta_incr": config.vns.beta_incr,
            "beta_decr": config.vns.beta_decr,
            "update_period": config.vns.update_period,
            "validity_streak": config.vns.validity_streak,
            "time_budget_seconds": config.vns.time_budget_seconds,
        },
    }


def config_from_dict(obj: dict) -> RoutingConfig:
    vns = _field(obj, "vns", "config")
    try:
        return RoutingConfig(
            eta=_field(obj, "eta", "config"),
            delta=_field(obj, "delta", "config"),
            alpha_unserved=_field(obj, "alpha_unserved", "config"),
            alpha_fast=_field(obj, "alpha_fast", "config"),
            vns=VnsConfig(
                stagnation_limit=_field(vns, "stagnation_limit", "config.vns"),
                beta_incr=_field(vns, "beta_incr", "config.vns"),
                beta_decr=_field(vns, "beta_decr", "config.vns"),
                update_period=_field(vns, "update_period", "config.vns"),
                validity_streak=_field(vns, "validity_streak", "config.vns"),
                time_budget_seconds=_field(vns, "time_budget_seconds", "config.vns"),
            ),
        )
    except ValueError as exc:
        raise SchemaError(f"config: {exc}") from None


def dump_routing_instance(instance: RoutingInstance) -> dict:
    network = dump_network(instance.network)
    return _envelope(
        "routing_instance",
        {
            "network": {k: network[k] for k in ("vertiports", "legs")},
            "fleet": [
                {
                    "id": a.id,
                    "start_vertiport": a.start_vertiport,
                    "start_minute": a.start_minute,
                }
                for a in instance.fleet
            ],
            "requests": [request_to_dict(r) for r in instance.requests],
            "battery": battery_to_dict(instance.battery),
            "config": config_to_dict(instance.config),
        },
    )


def parse_routing_instance(payload: dict) -> RoutingInstance:
    _expect(payload, "routing_instance")
    network_body = dict(_field(payload, "network", "routing_instance"))
    network_body.setdefault("schema_version", SCHEMA_VERSION)
    network_body.setdefault("kind", "network")
    network = parse_network(network_body)
    fleet = tuple(
        Aircraft(
            id=_field(a, "id", f"fleet[{i}]"),
            start_vertiport=_field(a, "start_vertiport", f"fleet[{i}]"),
            start_minute=_field(a, "start_minute", f"fleet[{i}]"),
        )
        for i, a in enumerate(_field(payload, "fleet", "routing_instance"))
    )
    requests = tuple(
        request_from_dict(obj, f"requests[{i}]")
        for i, obj in enumerate(_field(payload, "requests", "routing_instance"))
    )
    try:
        return RoutingInstance(
            network=network,
            fleet=fleet,
            requests=requests,
            battery=battery_from_dict(_field(payload, "battery", "routing_instance")),
            config=config_from_dict(_field(payload, "config", "routing_instance")),
        )
    except ValueError as exc:
        raise SchemaError(f"routing_instance: {exc}") from None
