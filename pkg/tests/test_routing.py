"""Connection costs, charge simulation, objective and the routing validator.

Frozen numbers come from the two-vertiport helper network: 10-minute legs,
20 energy units per leg, fees 30/40, eta 34, delta 10, battery 92/0/55 with
rates 1 and 2 and unit price.
"""
import random

import pytest

from airtaxi.model import (
    Aircraft,
    BatteryParams,
    ChargePlan,
    Network,
    RoutingConfig,
    RoutingSolution,
    StratificationError,
    StructuralError,
    Vertiport,
    ZERO_CHARGE,
)
from airtaxi.routing import (
    CHARGE_EPS,
    INF,
    RoutingContext,
    SearchObjective,
    StartPoint,
    assert_stratified,
    charge_time_bounds,
    connection_cost,
    evaluate,
    per_connection_bound,
    simulate_soc,
    soc_violation,
    solution_trace,
    start_point,
    stratified_config,
    validate_routing,
)

from helpers import request, tiny_instance, two_port_network

NET = two_port_network()
R0 = request(0, 0, 1, 480.0, NET, pax=2)  # value 240
R1 = request(1, 1, 0, 520.0, NET)  # value 120
R2 = request(2, 1, 0, 600.0, NET)  # value 120, needs a deadhead after R1


def _instance(battery=None, config=None):
    return tiny_instance([R0, R1, R2], battery=battery, config=config)


def test_connection_cost_same_vertiport():
    start = StartPoint(0, 420.0)
    # eta * fly + destination fee - value
    assert connection_cost(start, R0, NET, 34.0, 10.0) == 34.0 * 10 + 40.0 - 240.0
    assert connection_cost(R0, R1, NET, 34.0, 10.0) == 340.0 + 30.0 - 120.0


def test_connection_cost_deadhead():
    # R1 lands at 0, R2 departs from 1: reposition and pay both fees
    assert connection_cost(R1, R2, NET, 34.0, 10.0) == 34.0 * 20 + 30.0 + 30.0 - 120.0


def test_connection_cost_infeasible_turnaround():
    start = StartPoint(0, 475.0)
    # 475 + 10 > 480
    assert connection_cost(start, R0, NET, 34.0, 10.0) == INF
    # R0 lands at 1; deadhead back to 0 needs 490 + 10 + 2 * 10 > 515
    tight = request(9, 0, 1, 515.0, NET)
    assert connection_cost(R0, tight, NET, 34.0, 10.0) == INF


def test_connection_cost_missing_repositioning_leg():
    fly = {(0, 1): 10.0, (1, 0): 10.0, (1, 2): 10.0, (2, 1): 10.0}
    net = Network(
        vertiports=(Vertiport(0, 30.0), Vertiport(1, 40.0), Vertiport(2, 30.0)),
        legs=frozenset(fly),
        fly_time=fly,
        energy={k: 20.0 for k in fly},
    )
    from_two = request(3, 2, 1, 700.0, net)
    # no (0, 2) entry: an aircraft at 0 cannot reposition to serve it
    assert connection_cost(StartPoint(0, 420.0), from_two, net, 34.0, 10.0) == INF


def test_charge_time_bounds():
    start = StartPoint(0, 420.0)
    assert charge_time_bounds(start, R0, NET, 10.0) == (60.0, 60.0)
    assert charge_time_bounds(R0, R1, NET, 10.0) == (30.0, 30.0)
    # deadhead window 70: per-segment loses the leg and one turnaround
    assert charge_time_bounds(R1, R2, NET, 10.0) == (50.0, 60.0)


def test_start_point_and_context_anchor():
    inst = _instance()
    ctx = RoutingContext(inst)
    assert start_point(Aircraft(3, 1, 430.0)) == StartPoint(1, 430.0)
    assert RoutingContext.key_of(0) == -1
    assert ctx.anchor(-1) == StartPoint(0, 420.0)
    assert ctx.anchor(1) is ctx.requests[1]


def test_context_memoizes_connections():
    ctx = RoutingContext(_instance())
    assert ctx.conn(-1, 0) is ctx.conn(-1, 0)
    info = ctx.conn(0, 2)
    assert info.deadhead is False  # R0 lands at 1 where R2 departs
    info = ctx.conn(1, 2)
    assert info.deadhead is True and info.g_dead == 20.0


def test_route_metrics_frozen_values():
    ctx = RoutingContext(_instance())
    m = ctx.route_metrics(0, [(0, ZERO_CHARGE), (1, ZERO_CHARGE), (2, ZERO_CHARGE)])
    assert m.monetary == pytest.approx(140.0 + 250.0 + 620.0)
    assert m.n_fast == 0
    # 52 at the repositioning takeoff and 32 at the service takeoff, floor 55
    assert m.violation == pytest.approx(3.0 + 23.0)
    assert m.within_bounds is True


def test_route_metrics_charging_clears_violation():
    ctx = RoutingContext(_instance())
    route = [(0, ZERO_CHARGE), (1, ZERO_CHARGE), (2, ChargePlan(duration_after=23.0))]
    m = ctx.route_metrics(0, route)
    assert m.violation == 0.0
    # 23 bought units at unit price on top of the uncharged monetary total
    assert m.monetary == pytest.approx(1010.0 + 23.0)


def test_route_metrics_none_when_time_infeasible():
    ctx = RoutingContext(_instance())
    assert ctx.route_metrics(0, [(1, ZERO_CHARGE), (0, ZERO_CHARGE)]) is None


def test_route_metrics_caps_bought_energy_at_top_of_charge():
    ctx = RoutingContext(_instance())
    # 60 minutes of slow charge fits the window but only 0 headroom exists
    m = ctx.route_metrics(0, [(0, ChargePlan(duration_before=60.0))], want_trace=True)
    assert m.trace[0].bought_before == 0.0
    assert m.monetary == pytest.approx(140.0)


def test_fast_charge_counted_only_above_threshold():
    ctx = RoutingContext(_instance())
    route = [(0, ZERO_CHARGE), (1, ZERO_CHARGE), (2, ChargePlan(23.0, 0.0, False, True))]
    assert ctx.route_metrics(0, route).n_fast == 1
    tiny = [(0, ZERO_CHARGE), (1, ZERO_CHARGE), (2, ChargePlan(CHARGE_EPS / 4, 0.0, False, True))]
    assert ctx.route_metrics(0, tiny).n_fast == 0


def test_simulate_soc_trace():
    inst = _instance()
    trace = simulate_soc(inst.fleet[0], [(0, ZERO_CHARGE), (1, ZERO_CHARGE)], inst)
    assert [(p.e_depart, p.e_arrive) for p in trace] == [(92.0, 72.0), (72.0, 52.0)]
    with pytest.raises(StructuralError):
        simulate_soc(inst.fleet[0], [(1, ZERO_CHARGE), (0, ZERO_CHARGE)], inst)


def test_soc_trace_conserves_energy_under_fuzzed_plans():
    """e_arrive = e_depart - leg energy exactly, and buys link the stages."""
    inst = _instance()
    ctx = RoutingContext(inst)
    rng = random.Random(7)
    for _ in range(300):
        plans = [
            ChargePlan(
                duration_after=rng.choice([0.0, rng.uniform(0.0, 40.0)]),
                duration_before=rng.choice([0.0, rng.uniform(0.0, 40.0)]),
                slow_after=rng.random() < 0.5,
                slow_before=rng.random() < 0.5,
            )
            for _ in range(3)
        ]
        route = [(0, plans[0]), (1, plans[1]), (2, plans[2])]
        m = ctx.route_metrics(0, route, want_trace=True)
        e = inst.battery.top_of_charge
        total_bought = 0.0
        for (rid, _plan), point in zip(route, m.trace):
            info = ctx.conn(ctx.key_of(0) if rid == 0 else rid - 1, rid)
            assert point.e_arrive == pytest.approx(point.e_depart - 20.0, abs=1e-9)
            expected_dep = e + point.bought_after + point.bought_before - info.g_dead
            assert point.e_depart == pytest.approx(expected_dep, abs=1e-9)
            assert point.e_depart <= inst.battery.top_of_charge + 1e-9
            total_bought += point.bought_after + point.bought_before
            e = point.e_arrive
        assert m.violation == pytest.approx(
            soc_violation(inst.fleet[0], route, m.trace, inst), abs=1e-9
        )
        # money = connection costs plus energy at unit price
        assert m.monetary == pytest.approx(1010.0 + total_bought, abs=1e-9)


def test_evaluate_objective_terms():
    inst = _instance()
    sol = RoutingSolution([[(0, ZERO_CHARGE), (1, ZERO_CHARGE)]], {2})
    obj = evaluate(sol, inst)
    assert obj == SearchObjective(1, 0, 390.0, 0.0, 1e7 + 390.0)
    assert obj.lexicographic() == (1, 0, 390.0)
    with_penalty = evaluate(sol, inst, lam=2.0)
    assert with_penalty.scalar == pytest.approx(obj.scalar)


def test_evaluate_rejects_incoherent_solutions():
    inst = _instance()
    with pytest.raises(StructuralError):
        evaluate(RoutingSolution([], {0, 1, 2}), inst)
    with pytest.raises(StructuralError):
        evaluate(RoutingSolution([[(0, ZERO_CHARGE)]], {0, 1, 2}), inst)
    with pytest.raises(StructuralError):
        evaluate(RoutingSolution([[(0, ZERO_CHARGE), (0, ZERO_CHARGE)]], {1, 2}), inst)
    with pytest.raises(StructuralError):
        evaluate(RoutingSolution([[(7, ZERO_CHARGE)]], {0, 1, 2}), inst)
    with pytest.raises(StructuralError):
        # request 1 neither served nor declared unserved
        evaluate(RoutingSolution([[(0, ZERO_CHARGE)]], {2}), inst)


def test_solution_trace_per_aircraft():
    inst = tiny_instance([R0, R1], n_aircraft=2)
    sol = RoutingSolution([[(0, ZERO_CHARGE)], [(1, ZERO_CHARGE)]], set())
    traces = solution_trace(sol, inst)
    assert len(traces) == 2
    assert traces[0][0].e_arrive == 72.0
    bad = RoutingSolution([[(1, ZERO_CHARGE), (0, ZERO_CHARGE)], []], set())
    with pytest.raises(StructuralError):
        solution_trace(bad, inst)


def test_validate_routing_accepts_clean_plan():
    inst = _instance()
    sol = RoutingSolution(
        [[(0, ZERO_CHARGE), (1, ZERO_CHARGE), (2, ChargePlan(duration_after=23.0))]], set()
    )
    assert validate_routing(sol, inst) == []


def test_validate_routing_tags_timing():
    inst = _instance()
    sol = RoutingSolution([[(1, ZERO_CHARGE), (0, ZERO_CHARGE), (2, ZERO_CHARGE)]], set())
    tags = [v.tag for v in validate_routing(sol, inst)]
    assert tags == ["timing"]


def test_validate_routing_tags_charge_bound():
    inst = _instance()
    sol = RoutingSolution(
        [[(0, ChargePlan(duration_before=61.0)), (1, ZERO_CHARGE)]], {2}
    )
    assert [v.tag for v in validate_routing(sol, inst)] == ["charge-bound"]
    joint = RoutingSolution(
        # segments fit the 50-minute cap but exceed the 60-minute joint cap
        [[(0, ZERO_CHARGE), (1, ZERO_CHARGE), (2, ChargePlan(40.0, 40.0))]], set()
    )
    assert "charge-bound" in [v.tag for v in validate_routing(joint, inst)]


def test_validate_routing_tags_mode_mixing_on_same_vertiport():
    inst = _instance()
    plan = ChargePlan(duration_after=5.0, duration_before=5.0, slow_after=False, slow_before=True)
    sol = RoutingSolution([[(0, plan), (1, ZERO_CHARGE)]], {2})
    assert [v.tag for v in validate_routing(sol, inst)] == ["mode-tie"]
    # a repositioning connection may split modes across its two segments
    dead = ChargePlan(duration_after=3.0, duration_before=10.0, slow_after=False, slow_before=True)
    sol = RoutingSolution([[(0, ZERO_CHARGE), (1, ZERO_CHARGE), (2, dead)]], set())
    assert "mode-tie" not in [v.tag for v in validate_routing(sol, inst)]


def test_validate_routing_tags_takeoff_floors():
    inst = _instance()
    sol = RoutingSolution([[(0, ZERO_CHARGE), (1, ZERO_CHARGE), (2, ZERO_CHARGE)]], set())
    tags = [v.tag for v in validate_routing(sol, inst)]
    assert tags == ["soc-min-deadhead", "soc-min-service"]


def test_validate_routing_tags_bottom_of_charge():
    low = BatteryParams(top_of_charge=30.0, bottom_of_charge=0.0, soc_min=0.0)
    inst = tiny_instance([R0, R1], battery=low)
    sol = RoutingSolution([[(0, ZERO_CHARGE), (1, ZERO_CHARGE)]], set())
    assert "soc-bounds" in [v.tag for v in validate_routing(sol, inst)]


def test_per_connection_bound_and_stratification():
    inst = _instance()
    # eta * 2 * max fly + both fees + best value + a full battery of energy
    assert per_connection_bound(inst) == pytest.approx(680.0 + 80.0 + 240.0 + 92.0)
    with pytest.raises(StratificationError):
        assert_stratified(inst)
    fixed = stratified_config(inst)
    assert fixed.alpha_fast == 1e4
    assert fixed.alpha_unserved == 1e7
    assert_stratified(tiny_instance([R0, R1, R2], config=fixed))
    # already-stratified configs come back untouched
    inst2 = tiny_instance([R0, R1, R2], config=fixed)
    assert stratified_config(inst2) is inst2.config
