"""Hand-sized builders shared across the test modules.

Everything here is small enough to check by hand: a two-vertiport network
with flat 10-minute legs, integer energies and the default battery. Frozen
expected values in the tests are derived from these numbers.
"""
from typing import Optional, Sequence

from airtaxi.model import (
    Aircraft,
    ArrivalProfile,
    BatteryParams,
    Demand,
    DemandClass,
    FlightRequest,
    Network,
    RoutingConfig,
    Vertiport,
)
from airtaxi.routing import RoutingInstance


def demand(
    did: int,
    mean: float,
    offset: float = 5.0,
    pax: int = 1,
    premium: bool = False,
    deadline: Optional[float] = None,
) -> Demand:
    return Demand(
        id=did,
        passengers=pax,
        arrival=ArrivalProfile(mean, offset),
        service_class=DemandClass.PREMIUM if premium else DemandClass.REGULAR,
        latest_departure=deadline,
    )


def two_port_network(
    fee_a: float = 30.0,
    fee_b: float = 40.0,
    fly: float = 10.0,
    energy: float = 20.0,
) -> Network:
    fly_time = {(0, 1): fly, (1, 0): fly}
    return Network(
        vertiports=(Vertiport(0, fee_a), Vertiport(1, fee_b)),
        legs=frozenset(fly_time),
        fly_time=fly_time,
        energy={k: energy for k in fly_time},
    )


def request(
    rid: int,
    origin: int,
    destination: int,
    depart: float,
    network: Network,
    pax: int = 1,
    value: Optional[float] = None,
) -> FlightRequest:
    fly = network.fly_time[(origin, destination)]
    return FlightRequest(
        id=rid,
        origin=origin,
        destination=destination,
        depart_minute=depart,
        arrive_minute=depart + fly,
        value=120.0 * pax if value is None else value,
        passengers=pax,
    )


def tiny_instance(
    requests: Sequence[FlightRequest],
    n_aircraft: int = 1,
    start_vertiport: int = 0,
    network: Optional[Network] = None,
    battery: Optional[BatteryParams] = None,
    config: Optional[RoutingConfig] = None,
) -> RoutingInstance:
    net = network if network is not None else two_port_network()
    return RoutingInstance(
        network=net,
        fleet=tuple(Aircraft(v, start_vertiport, 420.0) for v in range(n_aircraft)),
        requests=tuple(requests),
        battery=battery if battery is not None else BatteryParams(),
        config=config if config is not None else RoutingConfig(),
    )
