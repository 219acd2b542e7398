import pytest
from hypothesis import given, settings, strategies as st

from gridprio.grid import (
    SLACK, GridCase, GridError, assign_slack_buses, detect_islands, total_area_demand,
)
from gridprio.scenario import apply_restoration_stage, load_stage_config

from conftest import bus, line, unit


def _chain(n, loads=None):
    loads = loads or [0.0] * n
    return GridCase(
        buses=[bus(i + 1, pd=loads[i]) for i in range(n)],
        branches=[line(f"L{i}", i + 1, i + 2) for i in range(n - 1)],
        generators=[],
    )


def test_total_area_demand_additive():
    case = _chain(2, [100.0, 200.0])
    assert total_area_demand(case, 1)[0] == 300.0


def test_total_area_demand_empty_area():
    case = GridCase(buses=[bus(1, area=1), bus(2, area=2)], branches=[], generators=[])
    assert total_area_demand(case, 2) == (0.0, 0.0)


def test_total_area_demand_unknown_area():
    with pytest.raises(GridError):
        total_area_demand(_chain(2), 9)


def test_total_area_demand_skips_out_of_service():
    case = _chain(2, [100.0, 200.0])
    case.bus(2).in_service = False
    assert total_area_demand(case, 1)[0] == 100.0


def test_fixture_reactive_area_total(rts):
    case, _ = rts
    for a in case.areas:
        assert total_area_demand(case, a)[1] == pytest.approx(580.0)


def test_islands_connected():
    assert detect_islands(_chain(5)) == [{1, 2, 3, 4, 5}]


def test_islands_all_branches_out():
    case = _chain(4)
    for br in case.branches:
        br.in_service = False
    assert detect_islands(case) == [{1}, {2}, {3}, {4}]


def test_islands_disaster_stage_leaves_area3(rts):
    case, _ = rts
    stage = load_stage_config()[1]
    out = apply_restoration_stage(case, stage)
    islands = detect_islands(out)
    assert len(islands) == 1
    assert {out.bus(b).area for b in islands[0]} == {3}


@settings(max_examples=60, deadline=None)
@given(n=st.integers(1, 12), data=st.data())
def test_islands_partition(n, data):
    pairs = data.draw(st.lists(st.tuples(st.integers(1, n), st.integers(1, n)), max_size=20))
    case = GridCase(
        buses=[bus(i) for i in range(1, n + 1)],
        branches=[line(f"L{k}", f, t) for k, (f, t) in enumerate(pairs) if f != t],
        generators=[],
    )
    islands = detect_islands(case)
    seen = set()
    for isl in islands:
        assert not (isl & seen)
        seen |= isl
    assert seen == set(range(1, n + 1))
    assert [min(i) for i in islands] == sorted(min(i) for i in islands)
    # connected components: every in-service branch lies inside one island
    for br in case.branches:
        assert any(br.from_bus in i and br.to_bus in i for i in islands)


def test_slack_on_largest_unit_lowest_bus_tie():
    case = GridCase(
        buses=[bus(1), bus(2), bus(3)],
        branches=[line("a", 1, 2), line("b", 2, 3)],
        generators=[unit("A", 3, pgmax=200), unit("B", 2, pgmax=200), unit("C", 1, pgmax=50)],
    )
    assign_slack_buses(case)
    assert [b.id for b in case.buses if b.bus_kind == SLACK] == [2]


def test_disabled_units_never_in_balances():
    from gridprio.steady_state import economic_dispatch
    case = _chain(2, [0.0, 50.0])
    case.generators = [unit("A", 1, pgmax=100, cost=5), unit("B", 1, pgmax=100, cost=1)]
    case._reindex()
    case.gen("B").status = False
    d = economic_dispatch(case, loss_adder=0.0)
    assert "B" not in d.gen_setpoints
    assert d.gen_setpoints["A"] == pytest.approx(50.0)


def test_validate_rejects_dangling_references():
    case = _chain(2)
    case.generators = [unit("A", 9)]
    case._reindex()
    with pytest.raises(GridError):
        case.validate()
    case = _chain(2)
    case.branches[0].x = 0.0
    with pytest.raises(GridError):
        case.validate()
