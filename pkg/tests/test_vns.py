"""Neighborhoods, penalty schedule and the variable neighborhood search."""
import random

import pytest

from airtaxi.instgen import gen_routing_instance
from airtaxi.model import (
    RoutingSolution,
    StratificationError,
    VnsConfig,
    ZERO_CHARGE,
)
from airtaxi.routing import (
    RoutingContext,
    evaluate,
    stratified_config,
    validate_routing,
)
from airtaxi.vns import (
    PenaltyState,
    golden_section,
    initial_solution,
    neighborhood_recharge,
    neighborhood_rotate,
    neighborhood_shift,
    neighborhood_swap,
    shake,
    uam_vns,
    update_penalty,
    vnd,
)

from helpers import request, tiny_instance, two_port_network

# soft state-of-charge tags may appear mid-search; anything else is a defect
SOFT_TAGS = {"soc-min-service", "soc-min-deadhead", "soc-bounds"}

NET = two_port_network()
R0 = request(0, 0, 1, 480.0, NET, pax=2)
R1 = request(1, 1, 0, 520.0, NET)
R2 = request(2, 1, 0, 600.0, NET)


def _micro_instance():
    inst = tiny_instance([R0, R1, R2])
    return tiny_instance([R0, R1, R2], config=stratified_config(inst))


def _small_generated(seed: int = 1, n_requests: int = 5):
    return gen_routing_instance(2, 2, seed=seed, n_requests=n_requests)


def test_golden_section_minimizes_quadratic():
    x, fx = golden_section(lambda t: (t - 3.0) ** 2 + 1.0, 0.0, 10.0, tol=0.01)
    assert abs(x - 3.0) < 0.01
    assert fx == (x - 3.0) ** 2 + 1.0
    # endpoint minima are probed too
    x, _ = golden_section(lambda t: t, 2.0, 9.0)
    assert x == 2.0


CFG = VnsConfig(beta_incr=100.0, beta_decr=4.0, update_period=20, validity_streak=5)


def test_penalty_rises_by_increment_after_invalid_streak():
    state = PenaltyState()
    for i in range(20):
        assert state.lam == 0.0, f"changed early at visit {i}"
        state = update_penalty(state, valid=False, config=CFG)
    assert state.lam == 100.0
    assert state.iteration == 20


def test_penalty_divides_after_all_valid_streak():
    state = PenaltyState(lam=100.0)
    for _ in range(20):
        state = update_penalty(state, valid=True, config=CFG)
    assert state.lam == 25.0


def test_penalty_looks_only_at_the_last_streak_window():
    # 15 invalid then 5 valid visits: the window holds only valid ones
    state = PenaltyState(lam=100.0)
    for _ in range(15):
        state = update_penalty(state, valid=False, config=CFG)
    for _ in range(5):
        state = update_penalty(state, valid=True, config=CFG)
    assert state.lam == 25.0
    # one invalid visit inside the window blocks the division
    state = PenaltyState(lam=100.0)
    for k in range(20):
        state = update_penalty(state, valid=k != 16, config=CFG)
    assert state.lam == 200.0


def test_penalty_short_history_never_divides():
    # fewer recorded visits than the streak length cannot prove validity
    short = VnsConfig(beta_incr=100.0, beta_decr=4.0, update_period=2, validity_streak=5)
    state = PenaltyState(lam=100.0)
    state = update_penalty(state, valid=True, config=short)
    state = update_penalty(state, valid=True, config=short)
    assert state.lam == 200.0


def test_initial_solution_is_coherent_and_seeded():
    inst = _small_generated()
    a = initial_solution(inst, random.Random(3))
    b = initial_solution(inst, random.Random(3))
    assert a.routes == b.routes and a.unserved == b.unserved
    obj = evaluate(a, inst)
    ids = sorted(a.served_ids()) + sorted(a.unserved)
    assert sorted(ids) == sorted(r.id for r in inst.requests)
    assert obj.scalar < float("inf")


def test_neighborhoods_emit_only_coherent_solutions():
    inst = _small_generated()
    sol = initial_solution(inst, random.Random(0))
    count = 0
    for hood in (neighborhood_shift, neighborhood_swap, neighborhood_rotate):
        for neighbor in hood(sol, inst):
            evaluate(neighbor, inst)  # raises on any structural breakage
            tags = {v.tag for v in validate_routing(neighbor, inst)}
            assert tags <= SOFT_TAGS, tags
            count += 1
    assert count > 0


def test_shift_neighborhood_covers_ejection_and_reinsertion():
    inst = _small_generated()
    sol = initial_solution(inst, random.Random(0))
    served = len(sol.served_ids())
    sizes = {len(n.served_ids()) for n in neighborhood_shift(sol, inst)}
    assert served - 1 in sizes  # eject one stop
    if sol.unserved:
        assert served + 1 in sizes  # place an unserved request


def test_recharge_finds_exact_minimal_purchase():
    """The deficit-filling kink is probed exactly, not approximated."""
    inst = _micro_instance()
    sol = RoutingSolution([[(0, ZERO_CHARGE), (1, ZERO_CHARGE), (2, ZERO_CHARGE)]], set())
    lam = 1000.0
    base = evaluate(sol, inst, lam)
    assert base.violation == pytest.approx(26.0)
    best = min(
        (evaluate(n, inst, lam) for n in neighborhood_recharge(sol, inst, lam)),
        key=lambda o: o.scalar,
    )
    # 23 units bought at unit price on top of the 1010 connection total
    assert best.violation == 0.0
    assert best.monetary == 1033.0


def test_recharge_beats_line_search_on_the_kink():
    inst = _micro_instance()
    ctx = RoutingContext(inst)
    route = [(0, ZERO_CHARGE), (1, ZERO_CHARGE), (2, ZERO_CHARGE)]
    lam = 1000.0

    def probe(t: float) -> float:
        from airtaxi.model import ChargePlan

        trial = route[:2] + [(2, ChargePlan(duration_after=t))]
        m = ctx.route_metrics(0, trial)
        return m.monetary + lam * m.violation

    x, fx = golden_section(probe, 0.0, 50.0)
    sol = RoutingSolution([list(route)], set())
    best = min(
        evaluate(n, inst, lam).scalar for n in neighborhood_recharge(sol, inst, lam)
    )
    assert best <= fx
    # the line search cannot land on the kink at exactly 23 units
    assert best == 1033.0
    assert fx > 1033.0 + 1e-6


def test_recharge_skips_saturated_routes():
    inst = _micro_instance()
    clean = RoutingSolution([[(0, ZERO_CHARGE), (1, ZERO_CHARGE)]], {2})
    assert list(neighborhood_recharge(clean, inst, 1000.0)) == []


def test_recharge_outputs_respect_caps_and_mode_ties():
    inst = _small_generated(seed=4, n_requests=6)
    sol = initial_solution(inst, random.Random(1))
    for neighbor in neighborhood_recharge(sol, inst, 500.0):
        tags = {v.tag for v in validate_routing(neighbor, inst)}
        assert "charge-bound" not in tags
        assert "mode-tie" not in tags


def test_vnd_never_degrades_the_scalar():
    inst = _small_generated()
    lam = 200.0
    start = initial_solution(inst, random.Random(2))
    out = vnd(start, inst, lam)
    assert evaluate(out, inst, lam).scalar <= evaluate(start, inst, lam).scalar + 1e-9
    tags = {v.tag for v in validate_routing(out, inst)}
    assert tags <= SOFT_TAGS


def test_shake_validates_index_and_keeps_coherence():
    inst = _small_generated()
    sol = initial_solution(inst, random.Random(5))
    with pytest.raises(ValueError):
        shake(sol, 0, inst, random.Random(0))
    with pytest.raises(ValueError):
        shake(sol, 3, inst, random.Random(0))
    for index in (1, 2):
        moved = shake(sol, index, inst, random.Random(9))
        evaluate(moved, inst)
        tags = {v.tag for v in validate_routing(moved, inst)}
        assert tags <= SOFT_TAGS


def test_uam_vns_requires_stratified_weights():
    with pytest.raises(StratificationError):
        uam_vns(tiny_instance([R0, R1, R2]), seed=0, max_iterations=5)


def test_uam_vns_is_deterministic_under_iteration_cap():
    inst = _small_generated()
    a = uam_vns(inst, seed=11, max_iterations=40)
    b = uam_vns(inst, seed=11, max_iterations=40)
    assert a.solution.routes == b.solution.routes
    assert a.solution.unserved == b.solution.unserved
    assert a.objective == b.objective
    assert a.iterations <= 40


def test_uam_vns_result_is_valid_and_matches_its_objective():
    inst = _small_generated(seed=7)
    res = uam_vns(inst, seed=7, max_iterations=120)
    assert validate_routing(res.solution, inst) == []
    obj = evaluate(res.solution, inst)
    assert obj.lexicographic() == res.objective.lexicographic()
    assert res.objective.violation == 0.0


def test_uam_vns_stops_early_on_full_service():
    inst = _small_generated(seed=2)
    res = uam_vns(inst, seed=2, time_budget_seconds=30.0, stop_at_full_service=True)
    assert res.objective.n_unserved == 0
    assert res.full_service_seconds is not None
    assert res.elapsed_seconds < 30.0


def test_uam_vns_warm_start_never_loses_to_its_start():
    inst = _small_generated(seed=3)
    first = uam_vns(inst, seed=3, max_iterations=80)
    again = uam_vns(inst, start=first.solution, seed=4, max_iterations=30)
    assert again.objective.lexicographic() <= first.objective.lexicographic()
