"""Exact reference solvers: certified against naive enumeration and hand cases."""
import dataclasses

import pytest

from airtaxi.instgen import gen_demands, seed_stream
from airtaxi.model import BatteryParams, PoolingConfig, StructuralError, validate_pooling
from airtaxi.oracles import OracleLimits, OracleRefusal, exact_pooling, exact_routing
from airtaxi.pooling import group_feasible, truncated_objective
from airtaxi.routing import evaluate, validate_routing

from helpers import demand, request, tiny_instance, two_port_network


def _book(seed: int, n: int):
    return gen_demands(n, rng=seed_stream(seed, "oracle-tests"))


def _all_partitions(items):
    """Every set partition, one growing group assignment at a time."""
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for smaller in _all_partitions(rest):
        for k in range(len(smaller)):
            yield smaller[:k] + [[first] + smaller[k]] + smaller[k + 1 :]
        yield [[first]] + smaller


def _naive_best_score(demands, config):
    best = None
    for partition in _all_partitions(list(range(len(demands)))):
        if all(group_feasible(g, demands, config) for g in partition):
            score = truncated_objective(partition, demands, config)
            if best is None or score < best:
                best = score
    return best


def test_exact_pooling_matches_naive_enumeration():
    cfg = PoolingConfig()
    for seed in range(10):
        ds = _book(seed, 2 + seed % 5)
        solution, score = exact_pooling(ds, cfg)
        assert validate_pooling(solution, ds, cfg) == []
        assert score == pytest.approx(_naive_best_score(ds, cfg), abs=1e-9)
        assert score == pytest.approx(truncated_objective(solution.groups, ds, cfg), abs=1e-9)


def test_exact_pooling_invariant_under_demand_order():
    cfg = PoolingConfig()
    for seed in range(10):
        ds = _book(seed, 7)
        _, reference = exact_pooling(ds, cfg)
        perm_rng = seed_stream(seed, "oracle-perms")
        for _ in range(10):
            order = perm_rng.permutation(len(ds))
            shuffled = [dataclasses.replace(ds[j], id=i) for i, j in enumerate(order)]
            _, score = exact_pooling(shuffled, cfg)
            assert score == pytest.approx(reference, abs=1e-9)


def test_exact_pooling_is_deterministic():
    ds = _book(1, 6)
    cfg = PoolingConfig()
    assert exact_pooling(ds, cfg) == exact_pooling(ds, cfg)


def test_exact_pooling_refuses_large_books():
    ds = _book(0, 13)
    with pytest.raises(OracleRefusal):
        exact_pooling(ds, PoolingConfig())
    # a widened cap is an explicit opt-in
    solution, _ = exact_pooling(ds[:4], PoolingConfig(), OracleLimits(max_demands=4))
    assert validate_pooling(solution, ds[:4], PoolingConfig()) == []


def test_exact_pooling_structural_errors():
    with pytest.raises(StructuralError):
        exact_pooling([], PoolingConfig())
    with pytest.raises(StructuralError):
        exact_pooling([demand(2, 500.0)], PoolingConfig())
    with pytest.raises(StructuralError):
        exact_pooling([demand(0, 500.0, pax=5)], PoolingConfig())


# routing oracle hand cases on the two-vertiport network (fees 30/40, fly 10)

NET = two_port_network()
R0 = request(0, 0, 1, 480.0, NET, pax=2)  # value 240
R1 = request(1, 1, 0, 520.0, NET)  # value 120


def test_exact_routing_buys_minimal_energy():
    # serving all three needs exactly 23 units across the route, slow only
    inst = tiny_instance([R0, R1, request(2, 1, 0, 600.0, NET)])
    solution, obj = exact_routing(inst)
    assert obj.lexicographic() == (0, 0, 1033.0)
    assert validate_routing(solution, inst) == []
    assert evaluate(solution, inst) == obj


def test_exact_routing_prefers_fast_charge_over_skipping():
    # 60-unit legs and a 12-minute turnaround window: slow charging cannot
    # refill in time, one fast segment can
    net = two_port_network(energy=60.0)
    bat = BatteryParams(top_of_charge=100.0, soc_min=55.0)
    reqs = [request(0, 0, 1, 480.0, net, pax=2), request(1, 1, 0, 502.0, net)]
    inst = tiny_instance(reqs, network=net, battery=bat)
    solution, obj = exact_routing(inst)
    assert obj.lexicographic() == (0, 1, 410.0)
    assert validate_routing(solution, inst) == []


def test_exact_routing_skips_unreachable_request():
    # third request departs too soon for any feasible recharge
    inst = tiny_instance([R0, R1, request(2, 1, 0, 555.0, NET)])
    solution, obj = exact_routing(inst)
    assert obj.lexicographic() == (1, 0, 390.0)
    assert solution.unserved == {2}


def test_exact_routing_splits_across_two_aircraft():
    # simultaneous departures from vertiport 0 force one request per aircraft
    reqs = [request(0, 0, 1, 480.0, NET), request(1, 0, 1, 481.0, NET)]
    inst = tiny_instance(reqs, n_aircraft=2)
    solution, obj = exact_routing(inst)
    assert obj.n_unserved == 0
    assert sorted(len(r) for r in solution.routes) == [1, 1]


def test_exact_routing_refusals():
    many = [request(i, 0, 1, 480.0 + 40 * i, NET) for i in range(7)]
    with pytest.raises(OracleRefusal):
        exact_routing(tiny_instance(many))
    with pytest.raises(OracleRefusal):
        exact_routing(tiny_instance([R0], n_aircraft=3))
    fractional = tiny_instance([request(0, 0, 1, 480.5, NET)])
    with pytest.raises(OracleRefusal):
        exact_routing(fractional)
    # widened limits lift the aircraft cap explicitly
    solution, _ = exact_routing(
        tiny_instance([R0], n_aircraft=3), OracleLimits(max_aircraft=3)
    )
    assert solution.unserved == set()
