import datetime as dt
import os
from pathlib import Path

import pytest

from gridprio.grid import (
    CONVENTIONAL, PQ, SLACK, Branch, Bus, Generator, GridCase,
)
from gridprio.ingest import load_bundled, load_case, load_timeseries, period_index

FIXTURE_WEEK = (period_index(dt.date(2020, 1, 26), 1), period_index(dt.date(2020, 2, 1), 24))


@pytest.fixture(scope="session")
def mini5():
    return load_bundled("mini5")


@pytest.fixture(scope="session")
def rts():
    return load_bundled("rts_synth")


@pytest.fixture(scope="session")
def rts_real():
    d = os.environ.get("RTS_GMLC_DIR")
    if not d:
        pytest.skip("authentic RTS-GMLC data not available (set RTS_GMLC_DIR)")
    root = Path(d)
    src = root / "RTS_Data" / "SourceData" if (root / "RTS_Data").is_dir() else root
    case = load_case(src)
    ts_root = root / "RTS_Data" if (root / "RTS_Data").is_dir() else root
    return case, load_timeseries(ts_root, case)


def unit(uid, bus, pgmin=0.0, pgmax=100.0, qgmin=-50.0, qgmax=50.0, cost=10.0,
         gtype=CONVENTIONAL, **kw):
    """Conventional unit with a flat cost curve of ``cost`` $/MWh and no fuel term."""
    pts = ((pgmax * 0.5, cost * pgmax * 0.5), (pgmax, cost * pgmax)) if pgmax > 0 else ()
    return Generator(id=uid, bus_id=bus, gtype=gtype, pgmin=pgmin, pgmax=pgmax,
                     qgmin=qgmin, qgmax=qgmax, op_cost_points=pts, heat_rate=0.0, **kw)


def line(bid, f, t, r=0.01, x=0.1, b=0.0):
    return Branch(id=bid, from_bus=f, to_bus=t, r=r, x=x, b=b, voltage_class=230.0)


def bus(bid, area=1, pd=0.0, qd=0.0, kind=PQ, kv=230.0):
    return Bus(id=bid, area=area, base_kv=kv, bus_kind=kind, pd=pd, qd=qd)


def two_bus_case(load_mw=100.0, load_mvar=0.0):
    """Slack at bus 1 (V = 1), lossless line x = 0.1 pu, load at bus 2."""
    return GridCase(
        buses=[bus(1, kind=SLACK), bus(2, pd=load_mw, qd=load_mvar)],
        branches=[line("L", 1, 2, r=0.0, x=0.1)],
        generators=[unit("G1", 1, pgmax=500, qgmin=-500, qgmax=500)],
    )
