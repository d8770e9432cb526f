"""Solution metrics, fairness records and the experiment drivers."""
import math
import statistics

import pytest
from scipy import stats

from airtaxi.analytics import (
    CATEGORIES,
    MeanStd,
    bench_pooling,
    bench_routing,
    fairness_experiment,
    fairness_records,
    in_peak,
    last_arrival_frequency,
    pooling_metrics,
    rank_trend,
    routing_metrics,
    sweep_qos,
)
from airtaxi.instgen import gen_demands, seed_stream
from airtaxi.model import (
    ChargePlan,
    DemandClass,
    PoolingConfig,
    PoolingSolution,
    RoutingSolution,
    ZERO_CHARGE,
)
from airtaxi.pooling import beam_search
from airtaxi.routing import stratified_config

from helpers import demand, request, tiny_instance, two_port_network


def test_mean_std_of_samples():
    ms = MeanStd.of([7.0, 4.0])
    assert ms.mean == 5.5
    assert ms.std == statistics.pstdev([7.0, 4.0])
    empty = MeanStd.of([])
    assert math.isnan(empty.mean) and math.isnan(empty.std)


def test_in_peak_windows_are_closed_open():
    assert in_peak(450.0)
    assert not in_peak(570.0)
    assert in_peak(1079.9)
    assert not in_peak(449.9)


def _hand_pooled():
    ds = [
        demand(0, 500.0, offset=7.0),
        demand(1, 503.0, offset=4.0),
        demand(2, 530.0, offset=5.0, premium=True),
    ]
    sol = PoolingSolution(groups=((0, 1), (2,)), departures=(507.0, 535.0))
    return ds, sol


def test_pooling_metrics_hand_values():
    ds, sol = _hand_pooled()
    m = pooling_metrics(sol, ds)
    assert m.n_requests == 2
    assert m.requests_load == 1.5
    assert m.passengers_load == 1.5
    assert m.wt_regular.mean == 5.5
    assert m.wt_premium == (5.0, 0.0)
    # all three arrival means sit inside the morning or evening peak
    assert m.wt_peak_regular == 5.5
    assert math.isnan(m.wt_offpeak_regular)


def test_fairness_records_and_metrics_agree_on_waits():
    ds = gen_demands(40, rng=seed_stream(0, "analytics-tests"))
    cfg = PoolingConfig()
    sol = beam_search(ds, cfg)
    records = fairness_records(sol, ds)
    metrics = pooling_metrics(sol, ds)
    for cls, expected in ((DemandClass.REGULAR, metrics.wt_regular), (DemandClass.PREMIUM, metrics.wt_premium)):
        waits = [r.wait for r in records if r.service_class is cls]
        assert statistics.fmean(waits) == pytest.approx(expected.mean, abs=1e-9)
        assert statistics.pstdev(waits) == pytest.approx(expected.std, abs=1e-9)
    assert [r.demand_id for r in records] == list(range(40))


def test_fairness_records_flag_every_tied_last_arrival():
    ds, sol = _hand_pooled()
    records = fairness_records(sol, ds)
    # quantiles 507 and 507 tie in the first group
    assert records[0].is_last_arrival and records[1].is_last_arrival
    assert records[2].is_last_arrival  # singletons trivially arrive last
    assert records[0].category == "regular_pure"
    assert records[2].category == "premium_pure"
    assert records[0].group_size == 2


def test_last_arrival_frequency_filters():
    ds, sol = _hand_pooled()
    records = fairness_records(sol, ds)
    # singletons fall under the group-size floor
    assert last_arrival_frequency(records, DemandClass.PREMIUM) is None
    assert last_arrival_frequency(records, DemandClass.REGULAR) == 1.0
    assert last_arrival_frequency(records, DemandClass.REGULAR, mixed=True) is None
    assert last_arrival_frequency(records, DemandClass.REGULAR, min_group_size=1) == 1.0


def test_routing_metrics_hand_values():
    net = two_port_network()
    reqs = [
        request(0, 0, 1, 480.0, net, pax=2),
        request(1, 1, 0, 520.0, net),
        request(2, 1, 0, 600.0, net),
    ]
    inst = tiny_instance(reqs)
    inst = tiny_instance(reqs, config=stratified_config(inst))
    sol = RoutingSolution(
        [[(0, ZERO_CHARGE), (1, ZERO_CHARGE), (2, ChargePlan(duration_after=23.0))]], set()
    )
    m = routing_metrics(sol, inst)
    assert m.pct_service == 100.0
    assert m.n_charge == 1
    assert m.pct_fast == 0.0
    # pure cost: connections (1010) + energy (23) + values added back (480)
    assert m.cps == pytest.approx((1033.0 + 480.0) / 3)

    idle = routing_metrics(RoutingSolution([[]], {0, 1, 2}), inst)
    assert idle.pct_service == 0.0
    assert idle.cps is None
    assert idle.n_charge == 0


def test_routing_metrics_bounds_on_generated_solutions():
    from airtaxi.instgen import gen_routing_instance
    from airtaxi.vns import uam_vns

    inst = gen_routing_instance(2, 2, seed=5, n_requests=6)
    res = uam_vns(inst, seed=5, max_iterations=150)
    m = routing_metrics(res.solution, inst)
    assert 0.0 <= m.pct_service <= 100.0
    assert 0.0 <= m.pct_fast <= 100.0
    assert m.n_charge >= 0


def test_rank_trend_matches_reference():
    xs = [0.0, 0.1, 0.2, 0.3, 0.4]
    ys = [9.0, 7.0, 5.0, 3.0, 1.0]
    rho, p = rank_trend(xs, ys)
    ref = stats.spearmanr(xs, ys)
    assert rho == pytest.approx(float(ref.statistic))
    assert p == pytest.approx(float(ref.pvalue))
    assert rho == pytest.approx(-1.0)


def test_fairness_experiment_cell_layout():
    cells = fairness_experiment(
        alphas=(0.0, 1.0),
        shares=(0.5,),
        n_demands=14,
        repetitions=2,
        seed=1,
        beam_width=50,
    )
    assert [(c.premium_share, c.alpha_regular) for c in cells] == [(0.5, 0.0), (0.5, 1.0)]
    for cell in cells:
        assert set(cell.waits) == set(CATEGORIES)
        assert len(cell.last_arrival_pure) <= 2
        for freq in cell.last_arrival_pure + cell.last_arrival_mixed:
            assert 0.0 <= freq <= 1.0
        for cat in CATEGORIES:
            for wait in cell.waits[cat]:
                assert wait >= -1e-9


def test_sweep_qos_grid_shape():
    out = sweep_qos(
        t_premium_values=(15.0, 25.0),
        alpha_regular_values=(0.0, 1.0),
        n_demands=14,
        repetitions=2,
        seed=2,
        beam_width=50,
    )
    assert out.t_premium_values == (15.0, 25.0)
    assert len(out.regular_mean) == 2
    assert all(len(row) == 2 for row in out.regular_mean)
    assert all(all(v >= 0.0 for v in row) for row in out.premium_mean)


def test_bench_pooling_rows():
    rows = bench_pooling(d_values=(8,), repetitions=3, seed=0, beam_width=100)
    assert len(rows) == 3
    assert [r.rep for r in rows] == [0, 1, 2]
    for row in rows:
        assert row.n_demands == 8
        assert row.seconds > 0.0
        assert row.metrics.n_requests >= 1


def test_bench_routing_rows():
    rows = bench_routing(grid=((2, 2, "low"),), repetitions=1, budget_seconds=3.0, seed=0)
    assert len(rows) == 1
    row = rows[0]
    assert (row.n_aircraft, row.n_vertiports, row.scenario) == (2, 2, "low")
    assert row.iterations > 0
    assert 0.0 <= row.metrics.pct_service <= 100.0
