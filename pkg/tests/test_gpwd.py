import csv

import pytest
from hypothesis import given, settings, strategies as st

from gridprio import gpwd
from gridprio.grid import GridCase, Schedule
from gridprio.gpwd import (
    BREAKDOWN_FIELDS, GpwdBreakdown, area_participation_factors, compute_breakdowns,
    maximum_power_score, prior_state, rank_units, ratio_term, sort_breakdowns,
    write_breakdown_csv,
)
from gridprio.scenario import build_period_case

from conftest import bus, line, unit


def _sched(on):
    return Schedule(period_index=1, method_tag="USS", unit_status=dict(on))


def test_prior_state():
    prev = _sched({"A": True, "B": False})
    assert prior_state("A", prev) == 1
    assert prior_state("B", prev) == 0
    assert prior_state("A", None) == 0


@pytest.mark.parametrize("rel_p,rel_q,expected", [
    (0.96, 0.85, 0.75), (1.0, 1.0, 1.0), (0.10, 0.10, 0.0),
    (0.95, 0.95, 0.5), (0.9501, 0.80, 0.5), (0.80, 0.8001, 0.25),
])
def test_maximum_power_brackets(rel_p, rel_q, expected):
    g = unit("U", 1, pgmax=100 * rel_p, qgmax=200 * rel_q)
    assert maximum_power_score(g, 100.0, 200.0) == pytest.approx(expected)


def test_ratio_term_examples():
    a = unit("A", 1, pgmin=20, qgmax=10)
    b = unit("B", 1, pgmin=40, qgmax=10)
    assert ratio_term([a, b]) == {"A": 0.5, "B": 1.0}
    assert ratio_term([a]) == {"A": 1.0}
    z = unit("Z", 1, pgmin=5, qgmax=0)
    assert ratio_term([a, b, z])["Z"] == 1.0
    zero = unit("Y", 1, pgmin=0, qgmax=10)
    assert ratio_term([zero]) == {"Y": 0.0}


def _six_unit_case():
    # (id, bus, pgmin, pgmax, qgmax)
    spec = [("A", 1, 60, 400, 200), ("B", 1, 20, 390, 170), ("C", 2, 10, 100, 50),
            ("D", 2, 30, 100, 50), ("E", 3, 0, 330, 10), ("F", 3, 50, 50, 25)]
    gens = [unit(i, b, pgmin=mn, pgmax=mx, qgmin=-mx / 2, qgmax=q) for i, b, mn, mx, q in spec]
    case = GridCase(buses=[bus(1, area=1, pd=300), bus(2, area=1, pd=100), bus(3, area=2, pd=200)],
                    branches=[line("a", 1, 2), line("b", 2, 3)], generators=gens)
    return case


APF = {"A": (0.5, 0.6), "B": (0.3, 0.2), "C": (0.1, 0.1), "D": (0.1, 0.1),
       "E": (1.0, 0.4), "F": (0.0, 0.6)}


def test_hand_ranked_six_units(monkeypatch):
    monkeypatch.setattr(gpwd, "area_participation_factors", lambda case, options=None: APF)
    case = _six_unit_case()
    prev = _sched({"C": True, "D": True})
    rows = {r.unit_id: r for r in compute_breakdowns(case, prev)}
    # raw pgmin/qgmax: A .3, B 2/17, C .2, D .6, E 0, F 2 -> divided by 2
    # MP vs (400, 200): A 1.0; B .5(.975)+.25(.85); C, D, F 0; E .25(.825)+0
    hand = {
        "A": 0 + 0.5 + 0.6 + 1.0 - 0.15,
        "B": 0 + 0.3 + 0.2 + 0.75 - 1 / 17,
        "C": 1 + 0.1 + 0.1 + 0.0 - 0.1,
        "D": 1 + 0.1 + 0.1 + 0.0 - 0.3,
        "E": 0 + 1.0 + 0.4 + 0.25 - 0.0,
        "F": max(0.0, 0 + 0.0 + 0.6 + 0.0 - 1.0),
    }
    for uid, v in hand.items():
        assert rows[uid].gpwd == pytest.approx(v, abs=1e-12), uid
    assert rows["F"].gpwd == 0.0
    order = [r.unit_id for r in sort_breakdowns(list(rows.values()))]
    # A 1.95, E 1.65, B ~1.191, C 1.1, D 0.9, F 0
    assert order == ["A", "E", "B", "C", "D", "F"]


def test_tie_break_identical_units(monkeypatch):
    monkeypatch.setattr(gpwd, "area_participation_factors",
                        lambda case, options=None: {g.id: (0.0, 0.0) for g in case.generators})
    gens = [unit(u, 1, pgmin=10, qgmax=20) for u in ("U3", "U1", "U2")]
    case = GridCase(buses=[bus(1, pd=50)], branches=[], generators=gens)
    assert [r.unit_id for r in rank_units(case)] == ["U1", "U2", "U3"]
    prev = _sched({"U3": True})
    assert [r.unit_id for r in rank_units(case, prev)][0] == "U3"


def test_tie_break_larger_pgmax_first():
    rows = [GpwdBreakdown("A", 0, 0, 0, 0, 0, 0.5, pgmax=10),
            GpwdBreakdown("B", 0, 0, 0, 0, 0, 0.5, pgmax=20)]
    assert [r.unit_id for r in sort_breakdowns(rows)] == ["B", "A"]
    assert [r.rank for r in rows] == [2, 1]


def test_disabled_units_score_zero(monkeypatch):
    monkeypatch.setattr(gpwd, "area_participation_factors", lambda case, options=None: APF)
    case = _six_unit_case()
    case.gen("A").status = False
    rows = {r.unit_id: r for r in compute_breakdowns(case)}
    assert rows["A"].gpwd == 0.0 and not rows["A"].available
    assert len(rows) == 6


def test_apf_single_unit_area():
    case = GridCase(buses=[bus(1, pd=0), bus(2, pd=80, qd=20)], branches=[line("a", 1, 2)],
                    generators=[unit("G", 1, pgmin=30, pgmax=200, qgmin=-100, qgmax=100)])
    apf = area_participation_factors(case)
    assert apf["G"] == pytest.approx((1.0, 1.0))


def test_apf_shares_follow_dispatch():
    # two units on the slack bus: cheap one takes 60 of the 100 MW
    gens = [unit("C", 1, pgmax=60, cost=5, qgmin=-50, qgmax=50),
            unit("S", 1, pgmax=500, cost=50, qgmin=-50, qgmax=50)]
    case = GridCase(buses=[bus(1, pd=100)], branches=[], generators=gens)
    apf = area_participation_factors(case)
    assert apf["C"][0] == pytest.approx(0.6, abs=1e-9)
    assert apf["S"][0] == pytest.approx(0.4, abs=1e-9)


@pytest.mark.parametrize("p", [1, 20, 40])
def test_apf_sums_per_area(mini5, p):
    case, ts = mini5
    pc = build_period_case(case, ts, p)
    apf = area_participation_factors(pc)
    for area in pc.areas:
        members = [g.id for g in gpwd.available_conventional(pc) if pc.gen_area(g) == area]
        sp = sum(apf[u][0] for u in members)
        sq = sum(apf[u][1] for u in members)
        assert sp == pytest.approx(1.0, abs=1e-9) or sp == 0.0
        assert sq == pytest.approx(1.0, abs=1e-9) or sq == 0.0


def test_fixture_ranking_invariants(rts):
    case, ts = rts
    pc = build_period_case(case, ts, 700)
    a = rank_units(pc)
    b = rank_units(pc)
    assert [(r.unit_id, r.gpwd) for r in a] == [(r.unit_id, r.gpwd) for r in b]
    conv = sorted(g.id for g in pc.generators if g.is_conventional)
    assert sorted(r.unit_id for r in a) == conv
    for r in a:
        assert 0.0 <= r.gpwd <= 4.0
        assert r.gpwd == pytest.approx(max(0.0, r.ps + r.apf_p + r.apf_q + r.mp - r.ratio_term))
    assert [r.rank for r in a] == list(range(1, len(a) + 1))


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 1), st.floats(0, 1), st.floats(0, 1),
                          st.sampled_from([0, .25, .5, .75, 1.0]), st.floats(0, 1)),
                min_size=1, max_size=10))
def test_clamp_and_order_property(rows):
    out = []
    for k, (ps, ap, aq, mp, rt) in enumerate(rows):
        out.append(GpwdBreakdown(f"U{k}", ps, ap, aq, mp, rt,
                                 max(0.0, ps + ap + aq + mp - rt), pgmax=float(k % 3)))
    ranked = sort_breakdowns(out)
    vals = [r.gpwd for r in ranked]
    assert all(v >= 0 for v in vals)
    assert vals == sorted(vals, reverse=True)


def test_breakdown_csv(tmp_path, monkeypatch):
    monkeypatch.setattr(gpwd, "area_participation_factors", lambda case, options=None: APF)
    path = tmp_path / "g.csv"
    write_breakdown_csv(rank_units(_six_unit_case()), path)
    with open(path) as fh:
        rows = list(csv.reader(fh))
    assert tuple(rows[0]) == BREAKDOWN_FIELDS
    assert [r[0] for r in rows[1:]][:2] == ["A", "E"]
