import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gridprio.bench import restoration_window
from gridprio.grid import (
    HYDRO, SOLAR, STORAGE, SYNC_COND, WIND, GridCase, Generator, detect_islands,
    total_area_demand,
)
from gridprio.ingest import TimeseriesSet
from gridprio.scenario import (
    ADDED_SUFFIX, GoalPortfolio, RestorationStage, ScenarioError, apply_restoration_stage,
    augment_sync_conds, build_period_case, disable_storage, load_stage_config,
    parse_stage_point, rescale_active_loads, rescale_reactive_loads,
    shape_renewable_portfolio, stage_for_period, stages_from_config, sync_cond_limits,
)

from conftest import bus, line, unit


def _ts(loads, units=None):
    """Timeseries over ``len(loads)`` periods for area 1; ``units`` maps id -> series."""
    units = units or {}
    ids = list(units)
    avail = np.array([units[u] for u in ids], dtype=float).T if ids else np.zeros((len(loads), 0))
    return TimeseriesSet(area_load_mw=np.array(loads, dtype=float).reshape(-1, 1), areas=[1],
                         unit_available_mw=avail, unit_ids=ids, period_count=len(loads))


def _renewable(uid, bus_id, gtype, pgmax=500.0):
    q = (0.0, 0.0) if gtype in (SOLAR, WIND) else (-20.0, 20.0)
    return Generator(id=uid, bus_id=bus_id, gtype=gtype, pgmax=pgmax, qgmin=q[0], qgmax=q[1])


# -- loads -----------------------------------------------------------------

def test_active_rescale_example():
    case = GridCase(buses=[bus(1, pd=100.0), bus(2, pd=2800.0)], branches=[], generators=[])
    out = rescale_active_loads(case, _ts([1450.0]), 1)
    assert out.bus(1).pd == pytest.approx(50.0)
    assert case.bus(1).pd == 100.0


def test_active_rescale_identity():
    case = GridCase(buses=[bus(1, pd=100.0), bus(2, pd=200.0)], branches=[], generators=[])
    out = rescale_active_loads(case, _ts([300.0]), 1)
    assert [b.pd for b in out.buses] == [100.0, 200.0]


def test_active_rescale_zero_default_errors():
    case = GridCase(buses=[bus(1)], branches=[], generators=[])
    with pytest.raises(ScenarioError):
        rescale_active_loads(case, _ts([10.0]), 1)


@pytest.mark.parametrize("p", [1, 17, 48])
def test_active_rescale_area_sums_match(mini5, p):
    case, ts = mini5
    out = rescale_active_loads(case, ts, p)
    for a in out.areas:
        assert total_area_demand(out, a)[0] == pytest.approx(ts.area_load(p, a), rel=1e-9)


def test_reactive_rescale_half_of_peak():
    case = GridCase(buses=[bus(1, pd=10.0, qd=80.0)], branches=[], generators=[])
    out = rescale_reactive_loads(case, _ts([100.0, 50.0]), 2)
    assert out.bus(1).qd == pytest.approx(40.0)


def test_reactive_rescale_unchanged_at_peak():
    case = GridCase(buses=[bus(1, pd=10.0, qd=80.0)], branches=[], generators=[])
    out = rescale_reactive_loads(case, _ts([100.0, 50.0]), 1)
    assert out.bus(1).qd == 80.0


def test_reactive_rescale_zero_series_errors():
    case = GridCase(buses=[bus(1, pd=10.0, qd=80.0)], branches=[], generators=[])
    with pytest.raises(ScenarioError):
        rescale_reactive_loads(case, _ts([0.0, 0.0]), 1)


def test_fixture_week_mvar_below_default(rts):
    case, ts = rts
    lo, hi = restoration_window()
    peak_hits = 0
    for p in range(lo, lo + 24 * 7):
        out = rescale_reactive_loads(case, ts, p)
        for a in out.areas:
            q = total_area_demand(out, a)[1]
            if ts.area_load(p, a) == ts.area_max(a):
                peak_hits += 1
                assert q == pytest.approx(580.0)
            else:
                assert q < 580.0
    assert peak_hits == 0


# -- renewable shaping -----------------------------------------------------

def _portfolio_case(hydro=600.0, solar=3.0, wind=0.0, load=1000.0):
    gens = [_renewable("H1", 1, HYDRO), _renewable("H2", 2, HYDRO),
            _renewable("S1", 1, SOLAR), _renewable("W1", 2, WIND)]
    case = GridCase(buses=[bus(1, pd=load / 2), bus(2, pd=load / 2)],
                    branches=[line("L", 1, 2)], generators=gens)
    ts = _ts([load], {"H1": [hydro / 3], "H2": [2 * hydro / 3], "S1": [solar], "W1": [wind]})
    return case, ts


def test_hydro_common_factor():
    case, ts = _portfolio_case()
    out = shape_renewable_portfolio(case, ts, 1)
    factor = 467.5 / 600.0
    assert out.gen("H1").pgmax == pytest.approx(200.0 * factor)
    assert out.gen("H2").pgmax == pytest.approx(400.0 * factor)


def test_solar_under_cap_keeps_forecast():
    case, ts = _portfolio_case()
    out = shape_renewable_portfolio(case, ts, 1)
    assert out.gen("S1").pgmax == pytest.approx(3.0)


def test_zero_forecast_disables_and_csp_disabled():
    case, ts = _portfolio_case(wind=0.0)
    case.add_generator(_renewable("C1", 1, "csp"))
    out = shape_renewable_portfolio(case, ts, 1)
    assert not out.gen("W1").status and not out.gen("C1").status


def test_other_share_split_by_forecast():
    case, ts = _portfolio_case(hydro=0.0, solar=100.0, wind=300.0)
    out = shape_renewable_portfolio(case, ts, 1)
    shares = out.meta["portfolio"]["goal_shares"]
    assert shares[SOLAR] == pytest.approx(0.005 + 0.0225 * 0.25)
    assert shares[WIND] == pytest.approx(0.105 + 0.0225 * 0.75)


def test_floor_top_up_by_headroom():
    # wind alone: capped at 12.75% of load, then raised toward the 20% floor
    case, ts = _portfolio_case(hydro=0.0, solar=0.0, wind=400.0)
    out = shape_renewable_portfolio(case, ts, 1)
    assert out.gen("W1").pgmax == pytest.approx(200.0)
    assert out.meta["portfolio"]["shortfall"] == 0.0


def test_floor_shortfall_recorded():
    case, ts = _portfolio_case(hydro=0.0, solar=0.0, wind=50.0)
    out = shape_renewable_portfolio(case, ts, 1)
    assert out.gen("W1").pgmax == pytest.approx(50.0)
    assert out.meta["portfolio"]["shortfall"] == pytest.approx(150.0)


@settings(max_examples=80, deadline=None)
@given(h=st.floats(0, 900), s=st.floats(0, 300), w=st.floats(0, 600))
def test_shaping_property(h, s, w):
    case, ts = _portfolio_case(hydro=h, solar=s, wind=w)
    out = shape_renewable_portfolio(case, ts, 1)
    meta = out.meta["portfolio"]
    load = meta["total_load"]
    totals = {t: sum(g.pgmax for g in out.generators if g.gtype == t and g.status)
              for t in (SOLAR, WIND, HYDRO)}
    forecast = {"H1": h / 3, "H2": 2 * h / 3, "S1": s, "W1": w}
    raised = meta["renewable_total"] > sum(meta["caps"][t] if meta["forecast_totals"][t] >
                                           meta["caps"][t] else meta["forecast_totals"][t]
                                           for t in totals) + 1e-9
    for t, tot in totals.items():
        if not raised:
            assert tot <= meta["goal_shares"][t] * load + 1e-6
    for g in out.generators:
        if g.status:
            assert g.pgmax <= forecast[g.id] + 1e-9
            assert g.pgmin == 0.0
    if sum(forecast.values()) >= 0.2 * load:
        assert sum(totals.values()) >= 0.2 * load - 1e-6
    # reactive limits are never touched
    for g in out.generators:
        assert (g.qgmin, g.qgmax) == (case.gen(g.id).qgmin, case.gen(g.id).qgmax)


def test_fixture_shaping_within_goal(rts):
    case, ts = rts
    goal = GoalPortfolio()
    for p in (622, 2000, 5000):
        out = build_period_case(case, ts, p, goal)
        meta = out.meta["portfolio"]
        if meta["shortfall"] == 0 and meta["renewable_total"] <= 0.2 * meta["total_load"] + 1e-6:
            continue
        for t in (SOLAR, WIND, HYDRO):
            tot = sum(g.pgmax for g in out.generators if g.gtype == t and g.status)
            assert tot <= max(meta["goal_shares"][t] * meta["total_load"],
                              meta["forecast_totals"][t]) + 1e-6


# -- sync-conds and storage ------------------------------------------------

@pytest.mark.parametrize("mw,limits", [
    (300.0, (-50.0, 100.0)), (250.0001, (-50.0, 100.0)), (250.0, (-25.0, 25.0)),
    (150.0, (-25.0, 25.0)), (100.0001, (-25.0, 25.0)), (100.0, (-5.0, 10.0)),
    (40.0, (-5.0, 10.0)), (0.0, (-5.0, 10.0)),
])
def test_sync_cond_brackets(mw, limits):
    assert sync_cond_limits(mw) == limits


def test_augment_one_per_renewable_bus():
    gens = [_renewable("W1", 1, WIND, 200.0), _renewable("W2", 1, WIND, 100.0),
            _renewable("S1", 2, SOLAR, 40.0), _renewable("S3", 3, SOLAR, 40.0),
            Generator(id="114_SYNC_COND_1", bus_id=3, gtype=SYNC_COND, qgmin=-10, qgmax=20),
            unit("G", 2)]
    gens[3].status = False
    case = GridCase(buses=[bus(1), bus(2), bus(3)], branches=[], generators=gens)
    out = augment_sync_conds(case)
    added = {g.bus_id: (g.qgmin, g.qgmax) for g in out.generators if g.added}
    assert added == {1: (-50.0, 100.0), 2: (-5.0, 10.0)}
    assert (out.gen("114_SYNC_COND_1").qgmin, out.gen("114_SYNC_COND_1").qgmax) == (-50.0, 100.0)
    for g in out.generators:
        if g.added:
            assert g.pgmin == g.pgmax == 0.0 and g.id.endswith(ADDED_SUFFIX)
    again = augment_sync_conds(out)
    assert sum(g.added for g in again.generators) == 2


def test_disable_storage(rts):
    case, _ = rts
    once = disable_storage(case)
    assert not any(g.status for g in once.generators if g.gtype == STORAGE)
    assert sum(g.gtype == STORAGE for g in case.generators) == 1
    twice = disable_storage(once)
    assert [(g.id, g.status) for g in twice.generators] == [(g.id, g.status) for g in once.generators]


def test_disable_storage_noop():
    case = GridCase(buses=[bus(1)], branches=[], generators=[unit("G", 1)])
    assert disable_storage(case).generators == case.generators


# -- restoration stages ----------------------------------------------------

def test_default_stages():
    stages = load_stage_config()
    assert [s.name for s in stages] == ["Normal Operation", "CSZ Earthquake Disaster",
                                        "Partially Restored Operation I.",
                                        "Partially Restored Operation II."]
    assert stages[1].period_range[0] == 622
    assert stage_for_period(stages, 622).energized_areas == {3}
    assert stage_for_period(stages, 621).name == "Normal Operation"


def _live_areas(case):
    return {b.area for b in case.buses if b.in_service}


def test_disaster_stage_area3_only(rts):
    case, _ = rts
    out = apply_restoration_stage(case, stage_for_period(load_stage_config(), 622))
    assert _live_areas(out) == {3}
    assert all(not g.status for g in out.generators if out.gen_area(g) != 3)
    assert out.meta["stage"] == "CSZ Earthquake Disaster"


def test_stage_one_adds_only_230kv_area2(rts):
    case, _ = rts
    stages = load_stage_config()
    s1 = stages[2]
    out = apply_restoration_stage(case, s1)
    for b in out.buses:
        if b.area == 3:
            assert b.in_service
        elif b.area == 2:
            assert b.in_service == (b.base_kv == 230.0)
        else:
            assert not b.in_service
    assert any(b.in_service for b in out.buses if b.area == 2)


def test_identity_stage(rts):
    case, _ = rts
    stage = RestorationStage("all", (1, 8784), frozenset(case.areas))
    out = apply_restoration_stage(case, stage)
    assert all(b.in_service for b in out.buses) and all(br.in_service for br in out.branches)


def test_empty_stage_errors(rts):
    case, _ = rts
    with pytest.raises(ScenarioError):
        apply_restoration_stage(case, RestorationStage("none", (1, 2), frozenset()))


def test_no_branch_touches_dead_bus(rts):
    case, _ = rts
    for stage in load_stage_config():
        out = apply_restoration_stage(case, stage)
        for br in out.branches:
            if br.in_service:
                assert out.bus(br.from_bus).in_service and out.bus(br.to_bus).in_service
        islands = detect_islands(out)
        slacks = [b.id for b in out.buses if b.in_service and b.bus_kind == "slack"]
        assert len(slacks) == len(islands)


def test_stage_point_parsing():
    assert parse_stage_point("01/26 TP-22") == 622
    with pytest.raises(ScenarioError):
        parse_stage_point("Jan 26")
    with pytest.raises(ScenarioError):
        parse_stage_point("02/30 TP-1")


def test_stage_config_rejects_overlap_and_unknown_keys():
    base = {"name": "a", "start": "01/01 TP-1", "end": "01/02 TP-1", "areas": {1: "all"}}
    with pytest.raises(ScenarioError):
        stages_from_config({"stages": [base, dict(base, name="b")]})
    with pytest.raises(ScenarioError):
        stages_from_config({"stages": [dict(base, color="red")]})


def test_build_period_case_pipeline(mini5):
    case, ts = mini5
    out = build_period_case(case, ts, 13)
    assert out.meta["period"] == 13
    assert any(g.added for g in out.generators)
    assert case.meta.get("period") is None
    with pytest.raises(IndexError):
        build_period_case(case, ts, 49)
