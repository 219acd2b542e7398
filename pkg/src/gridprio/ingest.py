"""Readers for RTS-GMLC style CSV data and the normalized JSON case dump.

The static case lives in ``bus.csv``, ``branch.csv`` and ``gen.csv``
(``SourceData`` in the public repository).  Hourly forecasts are read from
``timeseries_data_files/<Kind>/DAY_AHEAD_*.csv``.  Only the DAY_AHEAD tables
are used.
"""
from __future__ import annotations

import csv
import datetime as dt
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np

from .grid import (
    CONVENTIONAL, CSP, HYDRO, PQ, PV, SLACK, SOLAR, STORAGE, SYNC_COND, WIND,
    Branch, Bus, Generator, GridCase, RENEWABLE_TYPES,
)

logger = logging.getLogger(__name__)

YEAR = 2020
PERIODS_PER_YEAR = 8784
DEFAULT_HEAT_RATE = 9.5  # MMBTU/MWh, used when a unit carries no heat-rate curve

DATA_DIR = Path(__file__).parent / "data"

BUS_COLUMNS = {
    "Bus ID": "id", "BaseKV": "base_kv", "Bus Type": "bus_kind",
    "MW Load": "pd", "MVAR Load": "qd", "V Mag": "v_mag",
    "MW Shunt G": "gs", "MVAR Shunt B": "bs", "Area": "area",
}
BRANCH_COLUMNS = {
    "UID": "id", "From Bus": "from_bus", "To Bus": "to_bus",
    "R": "r", "X": "x", "B": "b", "Cont Rating": "rating",
}
GEN_COLUMNS = {
    "GEN UID": "id", "Bus ID": "bus_id", "Unit Type": "unit_type", "Fuel": "fuel",
    "MW Inj": "pg", "MVAR Inj": "qg", "V Setpoint p.u.": "vg",
    "PMax MW": "pgmax", "PMin MW": "pgmin", "QMax MVAR": "qgmax", "QMin MVAR": "qgmin",
    "Ramp Rate MW/Min": "ramp_rate", "Start Heat Cold MBTU": "start_heat",
    "Non Fuel Start Cost $": "start_cost", "Fuel Price $/MMBTU": "fuel_price",
    "Output_pct_0": "pct0", "Output_pct_1": "pct1", "Output_pct_2": "pct2",
    "Output_pct_3": "pct3", "HR_avg_0": "hr0", "HR_incr_1": "hr1",
    "HR_incr_2": "hr2", "HR_incr_3": "hr3", "VOM": "vom",
}
REQUIRED = {
    "bus.csv": ("Bus ID", "BaseKV", "MW Load", "MVAR Load", "Area"),
    "branch.csv": ("UID", "From Bus", "To Bus", "R", "X", "B"),
    "gen.csv": ("GEN UID", "Bus ID", "PMax MW", "PMin MW", "QMax MVAR", "QMin MVAR"),
}
# columns present in the public files that we read nowhere; not worth a warning
_KNOWN_IGNORED = {
    "Bus Name", "V Angle", "Sub Area", "Zone", "lat", "lng", "LTE Rating",
    "STE Rating", "Perm OutRate", "Duration", "Tr Ratio", "Tran OutRate",
    "Length", "Gen ID", "Unit Group", "Category",
}

UNIT_TYPES = {
    "CT": CONVENTIONAL, "CC": CONVENTIONAL, "STEAM": CONVENTIONAL,
    "NUCLEAR": CONVENTIONAL, "PV": SOLAR, "RTPV": SOLAR, "WIND": WIND,
    "HYDRO": HYDRO, "ROR": HYDRO, "CSP": CSP, "SYNC_COND": SYNC_COND,
    "STORAGE": STORAGE,
}
FUEL_TYPES = {
    "OIL": CONVENTIONAL, "COAL": CONVENTIONAL, "NG": CONVENTIONAL,
    "NUCLEAR": CONVENTIONAL, "SOLAR": SOLAR, "WIND": WIND, "HYDRO": HYDRO,
    "SYNC_COND": SYNC_COND, "STORAGE": STORAGE,
}
TS_KINDS = ("PV", "RTPV", "WIND", "Hydro", "CSP")
_DATE_COLUMNS = ("Year", "Month", "Day", "Period")


class IngestError(ValueError):
    """Malformed or missing input data; message names the file and line."""


@dataclass
class TimeseriesSet:
    area_load_mw: np.ndarray            # [period, area-column]
    areas: List[int]
    unit_available_mw: np.ndarray       # [period, unit-column]
    unit_ids: List[str]
    period_count: int
    profileless: List[str] = field(default_factory=list)

    def __post_init__(self):
        self._area_col = {a: i for i, a in enumerate(self.areas)}
        self._unit_col = {u: i for i, u in enumerate(self.unit_ids)}

    def check_period(self, period: int) -> None:
        if not 1 <= period <= self.period_count:
            raise IndexError(f"period {period} outside 1..{self.period_count}")

    def area_load(self, period: int, area: int) -> float:
        self.check_period(period)
        return float(self.area_load_mw[period - 1, self._area_col[area]])

    def area_max(self, area: int) -> float:
        return float(self.area_load_mw[:, self._area_col[area]].max())

    def has_unit(self, unit_id: str) -> bool:
        return unit_id in self._unit_col

    def available(self, period: int, unit_id: str) -> float:
        self.check_period(period)
        return float(self.unit_available_mw[period - 1, self._unit_col[unit_id]])


def period_index(date: dt.date, hour: int) -> int:
    """1-based hour index into the 2020 year; ``hour`` runs 1..24."""
    if date.year != YEAR:
        raise ValueError(f"date {date} outside {YEAR}")
    if not 1 <= hour <= 24:
        raise ValueError(f"hour {hour} outside 1..24")
    return (date - dt.date(YEAR, 1, 1)).days * 24 + hour


def period_date(period: int):
    """Inverse of :func:`period_index`: (date, hour)."""
    if not 1 <= period <= PERIODS_PER_YEAR:
        raise ValueError(f"period {period} outside 1..{PERIODS_PER_YEAR}")
    day, hour = divmod(period - 1, 24)
    return dt.date(YEAR, 1, 1) + dt.timedelta(days=day), hour + 1


def hour_of_day(period: int) -> int:
    return (period - 1) % 24 + 1


def _read_rows(path: Path):
    if not path.is_file():
        raise IngestError(f"{path}: missing file")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise IngestError(f"{path}:1: empty file, header row required") from None
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise IngestError(
                    f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            rows.append((lineno, dict(zip(header, (c.strip() for c in row)))))
    return header, rows


def _check_header(path: Path, header: Sequence[str], mapping: Dict[str, str]):
    missing = [c for c in REQUIRED[path.name] if c not in header]
    if missing:
        raise IngestError(f"{path}:1: missing required column(s) {missing}")
    extra = [c for c in header if c not in mapping and c not in _KNOWN_IGNORED]
    if extra:
        logger.warning("%s: ignoring unknown column(s) %s", path, extra)


def _num(path, lineno, row, col, default=None):
    raw = row.get(col, "")
    if raw == "" or raw is None:
        if default is None:
            raise IngestError(f"{path}:{lineno}: empty value in column {col!r}")
        return default
    try:
        value = float(raw)
    except ValueError:
        raise IngestError(f"{path}:{lineno}: bad number {raw!r} in column {col!r}") from None
    if not math.isfinite(value):
        raise IngestError(f"{path}:{lineno}: non-finite value in column {col!r}")
    return value


def _gen_type(path, lineno, row) -> str:
    utype = row.get("Unit Type", "").upper()
    if utype in UNIT_TYPES:
        return UNIT_TYPES[utype]
    fuel = row.get("Fuel", "").upper()
    if fuel in FUEL_TYPES:
        return FUEL_TYPES[fuel]
    raise IngestError(f"{path}:{lineno}: cannot classify unit type {utype!r} / fuel {fuel!r}")


def _cost_curve(path, lineno, row, pgmax, fuel_price):
    """Four (MW, $/hr) breakpoints from the RTS heat-rate columns, plus full-load heat rate."""
    if not all(row.get(c, "") not in ("", None) for c in ("Output_pct_0", "HR_avg_0")):
        return (), None
    pcts = [_num(path, lineno, row, f"Output_pct_{i}", 0.0) for i in range(4)]
    hr = [_num(path, lineno, row, "HR_avg_0")] + [
        _num(path, lineno, row, f"HR_incr_{i}", 0.0) for i in (1, 2, 3)]
    vom = _num(path, lineno, row, "VOM", 0.0)
    mw = [p * pgmax for p in pcts]
    heat = [hr[0] * mw[0] / 1000.0]  # BTU/kWh * MW / 1000 = MMBTU/hr
    for i in (1, 2, 3):
        heat.append(heat[-1] + hr[i] * (mw[i] - mw[i - 1]) / 1000.0)
    points = tuple((round(m, 6), round(fuel_price * h + vom * m, 6)) for m, h in zip(mw, heat))
    heat_rate = heat[-1] / mw[-1] if mw[-1] > 0 else None
    return points, heat_rate


def load_case(path) -> GridCase:
    """Parse ``bus.csv``, ``branch.csv`` and ``gen.csv`` from ``path``."""
    path = Path(path)
    if not path.is_dir():
        raise IngestError(f"{path}: not a directory")

    bus_file = path / "bus.csv"
    header, rows = _read_rows(bus_file)
    _check_header(bus_file, header, BUS_COLUMNS)
    buses = []
    seen = set()
    for lineno, row in rows:
        bid = int(_num(bus_file, lineno, row, "Bus ID"))
        if bid in seen:
            raise IngestError(f"{bus_file}:{lineno}: duplicate bus id {bid}")
        seen.add(bid)
        kind = {"REF": SLACK, "PV": PV, "PQ": PQ}.get(row.get("Bus Type", "PQ").upper(), PQ)
        buses.append(Bus(
            id=bid,
            area=int(_num(bus_file, lineno, row, "Area")),
            base_kv=_num(bus_file, lineno, row, "BaseKV"),
            bus_kind=kind,
            voltage_setpoint=_num(bus_file, lineno, row, "V Mag", 1.0),
            pd=_num(bus_file, lineno, row, "MW Load"),
            qd=_num(bus_file, lineno, row, "MVAR Load"),
            gs=_num(bus_file, lineno, row, "MW Shunt G", 0.0),
            bs=_num(bus_file, lineno, row, "MVAR Shunt B", 0.0),
        ))
    kv = {b.id: b.base_kv for b in buses}

    br_file = path / "branch.csv"
    header, rows = _read_rows(br_file)
    _check_header(br_file, header, BRANCH_COLUMNS)
    branches = []
    for lineno, row in rows:
        f = int(_num(br_file, lineno, row, "From Bus"))
        t = int(_num(br_file, lineno, row, "To Bus"))
        for end in (f, t):
            if end not in kv:
                raise IngestError(f"{br_file}:{lineno}: branch references unknown bus {end}")
        x = _num(br_file, lineno, row, "X")
        if x == 0:
            raise IngestError(f"{br_file}:{lineno}: zero reactance")
        branches.append(Branch(
            id=row["UID"], from_bus=f, to_bus=t,
            r=_num(br_file, lineno, row, "R"), x=x,
            b=_num(br_file, lineno, row, "B"),
            rating=_num(br_file, lineno, row, "Cont Rating", 0.0),
            voltage_class=min(kv[f], kv[t]),
        ))

    gen_file = path / "gen.csv"
    header, rows = _read_rows(gen_file)
    _check_header(gen_file, header, GEN_COLUMNS)
    gens = []
    gseen = set()
    for lineno, row in rows:
        gid = row["GEN UID"]
        if gid in gseen:
            raise IngestError(f"{gen_file}:{lineno}: duplicate generator id {gid!r}")
        gseen.add(gid)
        bus_id = int(_num(gen_file, lineno, row, "Bus ID"))
        if bus_id not in kv:
            raise IngestError(f"{gen_file}:{lineno}: generator on unknown bus {bus_id}")
        gtype = _gen_type(gen_file, lineno, row)
        pgmax = _num(gen_file, lineno, row, "PMax MW")
        pgmin = _num(gen_file, lineno, row, "PMin MW")
        qgmax = _num(gen_file, lineno, row, "QMax MVAR")
        qgmin = _num(gen_file, lineno, row, "QMin MVAR")
        if gtype in (SOLAR, WIND):
            qgmin = qgmax = 0.0
        fuel_price = _num(gen_file, lineno, row, "Fuel Price $/MMBTU", 0.0)
        points, heat_rate = _cost_curve(gen_file, lineno, row, pgmax, fuel_price)
        start = (_num(gen_file, lineno, row, "Start Heat Cold MBTU", 0.0) * fuel_price
                 + _num(gen_file, lineno, row, "Non Fuel Start Cost $", 0.0))
        gens.append(Generator(
            id=gid, bus_id=bus_id, gtype=gtype, status=True,
            pg=_num(gen_file, lineno, row, "MW Inj", 0.0),
            qg=_num(gen_file, lineno, row, "MVAR Inj", 0.0),
            pgmin=pgmin, pgmax=pgmax, qgmin=qgmin, qgmax=qgmax,
            fuel_cost=fuel_price, op_cost_points=points, startup_cost=start,
            ramp_rate=_num(gen_file, lineno, row, "Ramp Rate MW/Min", 0.0),
            heat_rate=heat_rate,
            vg=_num(gen_file, lineno, row, "V Setpoint p.u.", 1.0),
        ))
    case = GridCase(buses=buses, branches=branches, generators=gens,
                    base_mva=100.0, name=path.name)
    case.validate()
    return case


def _ts_root(path: Path) -> Path:
    sub = path / "timeseries_data_files"
    return sub if sub.is_dir() else path


def _read_table(path: Path):
    header, rows = _read_rows(path)
    for c in _DATE_COLUMNS:
        if c not in header:
            raise IngestError(f"{path}:1: missing column {c!r}")
    value_cols = [c for c in header if c not in _DATE_COLUMNS]
    dates = []
    values = np.empty((len(rows), len(value_cols)))
    for i, (lineno, row) in enumerate(rows):
        dates.append(tuple(int(_num(path, lineno, row, c)) for c in _DATE_COLUMNS))
        for j, c in enumerate(value_cols):
            v = _num(path, lineno, row, c)
            if v < 0:
                raise IngestError(f"{path}:{lineno}: negative value in column {c!r}")
            values[i, j] = v
    _check_calendar(path, dates)
    return value_cols, values


def _check_calendar(path: Path, dates):
    n = len(dates)
    if n == 0 or n % 24:
        raise IngestError(f"{path}: {n} rows is not a whole number of days")
    for i, (y, m, d, p) in enumerate(dates):
        want_date, want_hour = period_date(i + 1) if i < PERIODS_PER_YEAR else (None, None)
        if want_date is None or (y, m, d, p) != (want_date.year, want_date.month,
                                                  want_date.day, want_hour):
            raise IngestError(f"{path}:{i + 2}: row out of sequence, got {y}-{m}-{d} period {p}")


def load_timeseries(path, case: Optional[GridCase] = None,
                    expected_periods: Optional[int] = None,
                    profileless: Iterable[str] = ()) -> TimeseriesSet:
    """Read the DAY_AHEAD regional load and renewable availability tables.

    When ``case`` is given, every renewable unit must have a column unless
    it is a CSP unit or listed in ``profileless``; unknown unit columns are
    rejected.
    """
    root = _ts_root(Path(path))
    load_file = root / "Load" / "DAY_AHEAD_regional_Load.csv"
    cols, load = _read_table(load_file)
    try:
        areas = [int(c) for c in cols]
    except ValueError:
        raise IngestError(f"{load_file}:1: area columns must be integers, got {cols}") from None
    n = load.shape[0]
    if expected_periods is not None and n != expected_periods:
        raise IngestError(f"{load_file}: expected {expected_periods} periods, found {n}")

    unit_ids: List[str] = []
    blocks = []
    for kind in TS_KINDS:
        folder = root / kind
        if not folder.is_dir():
            continue
        for f in sorted(folder.glob("DAY_AHEAD_*.csv")):
            if kind == "CSP":
                continue  # CSP units are disabled; inflow tables carry no MW availability
            ucols, vals = _read_table(f)
            if vals.shape[0] != n:
                raise IngestError(f"{f}: {vals.shape[0]} rows, load table has {n}")
            for c in ucols:
                if c in unit_ids:
                    logger.warning("%s: unit column %r already mapped; keeping first", f, c)
            keep = [j for j, c in enumerate(ucols) if c not in unit_ids]
            unit_ids.extend(ucols[j] for j in keep)
            blocks.append(vals[:, keep])
    avail = np.hstack(blocks) if blocks else np.zeros((n, 0))

    profileless = sorted(set(profileless))
    if case is not None:
        gen_ids = {g.id: g for g in case.generators}
        for u in unit_ids:
            if u not in gen_ids:
                raise IngestError(f"{root}: timeseries column {u!r} matches no generator")
            if not gen_ids[u].is_renewable:
                raise IngestError(f"{root}: timeseries column {u!r} is not a renewable unit")
        covered = set(unit_ids) | set(profileless)
        for g in case.generators:
            if g.gtype == CSP and g.id not in covered:
                profileless.append(g.id)
            elif g.is_renewable and g.id not in covered:
                raise IngestError(f"{root}: renewable unit {g.id!r} has no timeseries column")
        missing_areas = set(case.areas) - set(areas)
        if missing_areas:
            raise IngestError(f"{load_file}: no load column for area(s) {sorted(missing_areas)}")
    return TimeseriesSet(area_load_mw=load, areas=areas, unit_available_mw=avail,
                         unit_ids=unit_ids, period_count=n, profileless=sorted(profileless))


# -- normalized dump -------------------------------------------------------

def case_to_dict(case: GridCase) -> dict:
    return {
        "name": case.name,
        "base_mva": case.base_mva,
        "buses": [asdict(b) for b in case.buses],
        "branches": [asdict(b) for b in case.branches],
        "generators": [asdict(g) for g in case.generators],
    }


def case_from_dict(d: dict) -> GridCase:
    gens = []
    for g in d["generators"]:
        g = dict(g)
        g["op_cost_points"] = tuple(tuple(p) for p in g["op_cost_points"])
        gens.append(Generator(**g))
    return GridCase(
        buses=[Bus(**b) for b in d["buses"]],
        branches=[Branch(**b) for b in d["branches"]],
        generators=gens,
        base_mva=d["base_mva"],
        name=d.get("name", ""),
    )


def dump_case(case: GridCase) -> str:
    """Stable JSON text: identical cases give byte-identical output."""
    return json.dumps(case_to_dict(case), sort_keys=True, indent=1)


def parse_case(text: str) -> GridCase:
    return case_from_dict(json.loads(text))


def structural_counts(case: GridCase, ts: Optional[TimeseriesSet] = None) -> dict:
    from .grid import load_count
    n_conv = sum(g.is_conventional for g in case.generators)
    n_ren = sum(g.gtype in RENEWABLE_TYPES for g in case.generators)
    counts = {
        "buses": len(case.buses),
        "branches": len(case.branches),
        "generators": len(case.generators),
        "conventional": n_conv,
        "renewable": n_ren,
        "sync_cond": sum(g.gtype == SYNC_COND for g in case.generators),
        "storage": sum(g.gtype == STORAGE for g in case.generators),
        "loads": load_count(case),
        "areas": len(case.areas),
    }
    if ts is not None:
        counts["periods"] = ts.period_count
    return counts


RTS_GMLC_COUNTS = {
    "buses": 73, "branches": 120, "generators": 158, "conventional": 72,
    "renewable": 82, "loads": 51, "periods": 8784,
}


def bundled_case_dir(name: str) -> Path:
    """Directory of a fixture shipped with the package (``mini5`` or ``rts_synth``)."""
    d = DATA_DIR / name
    if not d.is_dir():
        raise IngestError(f"no bundled case named {name!r}")
    return d


def load_bundled(name: str):
    d = bundled_case_dir(name)
    case = load_case(d)
    return case, load_timeseries(d, case)
