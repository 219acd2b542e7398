"""Regenerate the bundled fixtures under src/gridprio/data.

``rts_synth`` is a synthetic stand-in for RTS-GMLC: the three-area RTS-96
topology with a GMLC-like fleet and a full leap year of hourly profiles
built from closed-form seasonal/daily shapes (no RNG).  ``mini5`` is a
five-bus, two-area toy with two days of data.

    python scripts/make_fixtures.py
"""
from __future__ import annotations

import csv
import datetime as dt
import math
from pathlib import Path

import numpy as np

OUT = Path(__file__).resolve().parents[1] / "src" / "gridprio" / "data"
YEAR = 2020
PERIODS = 8784

BUS_HEADER = ["Bus ID", "Bus Name", "BaseKV", "Bus Type", "MW Load", "MVAR Load",
              "V Mag", "V Angle", "MW Shunt G", "MVAR Shunt B", "Area"]
BRANCH_HEADER = ["UID", "From Bus", "To Bus", "R", "X", "B", "Cont Rating"]
GEN_HEADER = ["GEN UID", "Bus ID", "Unit Type", "Fuel", "MW Inj", "MVAR Inj",
              "V Setpoint p.u.", "PMax MW", "PMin MW", "QMax MVAR", "QMin MVAR",
              "Ramp Rate MW/Min", "Start Heat Cold MBTU", "Non Fuel Start Cost $",
              "Fuel Price $/MMBTU", "Output_pct_0", "Output_pct_1", "Output_pct_2",
              "Output_pct_3", "HR_avg_0", "HR_incr_1", "HR_incr_2", "HR_incr_3", "VOM"]

# RTS-24 load buses: (local bus, MW, MVAr)
LOADS = [(1, 108, 22), (2, 97, 20), (3, 180, 37), (4, 74, 15), (5, 71, 14),
         (6, 136, 28), (7, 125, 25), (8, 171, 35), (9, 175, 36), (10, 195, 40),
         (13, 265, 54), (14, 194, 39), (15, 317, 64), (16, 100, 20), (18, 333, 68),
         (19, 181, 37), (20, 128, 26)]

# (from, to, r, x, b, rating, circuits)
LINES = [
    (1, 2, .0026, .0139, .4611, 175, 1), (1, 3, .0546, .2112, .0572, 175, 1),
    (1, 5, .0218, .0845, .0229, 175, 1), (2, 4, .0328, .1267, .0343, 175, 1),
    (2, 6, .0497, .1920, .0520, 175, 1), (3, 9, .0308, .1190, .0322, 175, 1),
    (3, 24, .0023, .0839, 0.0, 400, 1), (4, 9, .0268, .1037, .0281, 175, 1),
    (5, 10, .0228, .0883, .0239, 175, 1), (6, 10, .0139, .0605, 2.459, 175, 1),
    (7, 8, .0159, .0614, .0166, 175, 1), (8, 9, .0427, .1651, .0447, 175, 1),
    (8, 10, .0427, .1651, .0447, 175, 1), (9, 11, .0023, .0839, 0.0, 400, 1),
    (9, 12, .0023, .0839, 0.0, 400, 1), (10, 11, .0023, .0839, 0.0, 400, 1),
    (10, 12, .0023, .0839, 0.0, 400, 1), (11, 13, .0061, .0476, .0999, 500, 1),
    (11, 14, .0054, .0418, .0879, 500, 1), (12, 13, .0061, .0476, .0999, 500, 1),
    (12, 23, .0124, .0966, .2030, 500, 1), (13, 23, .0111, .0865, .1818, 500, 1),
    (14, 16, .0050, .0389, .0818, 500, 1), (15, 16, .0022, .0173, .0364, 500, 1),
    (15, 21, .0063, .0490, .1030, 500, 2), (15, 24, .0067, .0519, .1091, 500, 1),
    (16, 17, .0033, .0259, .0545, 500, 1), (16, 19, .0030, .0231, .0485, 500, 1),
    (17, 18, .0018, .0144, .0303, 500, 1), (17, 22, .0135, .1053, .2212, 500, 1),
    (18, 21, .0033, .0259, .0545, 500, 2), (19, 20, .0051, .0396, .0833, 500, 2),
    (20, 23, .0028, .0216, .0455, 500, 2), (21, 22, .0087, .0678, .1424, 500, 1),
]
TIES = [(107, 203, .0420, .1610, .0440, 175), (113, 215, .0120, .0970, .2030, 500),
        (123, 217, .0110, .0860, .1820, 500), (121, 325, .0120, .0970, .2030, 500),
        (223, 318, .0130, .1040, .2180, 500), (325, 323, .0010, .0090, 0.0, 500)]

VSET = {1: 1.035, 2: 1.035, 7: 1.025, 13: 1.02, 14: 0.98, 15: 1.014, 16: 1.017,
        18: 1.05, 21: 1.05, 22: 1.05, 23: 1.05}

# conventional templates: type, fuel, pmax, pmin, qmax, qmin, ramp, start MMBTU,
# fuel $/MMBTU, output pcts, HR avg0, HR incrs, VOM
CT_OIL = ("CT", "Oil", 20, 8, 10, 0, 3, 50, 10.0, (.4, .6, .8, 1), 13000, (11000, 11500, 12500), 5.0)
STEAM_COAL_76 = ("STEAM", "Coal", 76, 30, 30, -25, 2, 1000, 2.0, (.4, .6, .8, 1), 12500, (10500, 11000, 11800), 4.0)
CC_355 = ("CC", "NG", 355, 170, 150, -25, 4, 2500, 3.0, (.48, .65, .82, 1), 7600, (6300, 6800, 7200), 2.0)
CT_NG = ("CT", "NG", 55, 22, 19, -15, 3.7, 100, 3.0, (.4, .6, .8, 1), 11500, (10000, 10700, 11800), 4.5)
STEAM_OIL = ("STEAM", "Oil", 12, 5, 6, 0, 1, 40, 10.0, (.4, .6, .8, 1), 14500, (12500, 13000, 13800), 6.0)
STEAM_COAL_155 = ("STEAM", "Coal", 155, 62, 80, -50, 3, 3000, 2.0, (.4, .6, .8, 1), 10600, (9300, 9700, 10200), 3.0)
STEAM_COAL_350 = ("STEAM", "Coal", 350, 140, 150, -25, 4, 6000, 2.0, (.4, .6, .8, 1), 10000, (8900, 9300, 9800), 2.5)
NUCLEAR = ("NUCLEAR", "Nuclear", 400, 396, 200, -50, 20, 40000, 0.6, (.99, .993, .996, 1), 10500, (10500, 10500, 10500), 1.0)

# local bus -> templates (per area); bus 21 hosts the nuclear unit in area 1
FLEET = [(1, [CT_OIL, CT_OIL, STEAM_COAL_76, STEAM_COAL_76]),
         (2, [CT_OIL, CT_OIL, STEAM_COAL_76, STEAM_COAL_76]),
         (7, [CC_355]),
         (13, [CT_NG, CT_NG, CT_NG]),
         (15, [STEAM_OIL] * 5 + [STEAM_COAL_155]),
         (16, [STEAM_COAL_155]),
         (18, [CC_355]),
         (21, None),
         (23, [STEAM_COAL_350, STEAM_COAL_155, STEAM_COAL_155])]

HYDRO_UNITS = {122: 6, 215: 3, 222: 6, 322: 5}
WIND_UNITS = {122: 713.5, 303: 847.0, 309: 148.3, 317: 799.1}
PV_UNITS = {101: [25.6, 25.9, 26.8, 25.2], 102: [25.6, 25.9], 103: [61.5, 30.2], 104: [63.1],
            113: [93.6], 119: [66.6], 213: [52.4, 41.9], 215: [51.0, 50.3],
            310: [51.6, 51.7], 312: [94.1], 313: [95.1], 314: [92.7, 51.6],
            319: [188.2], 320: [51.6, 51.7], 324: [49.7, 51.2]}
RTPV_BUS_SETS = [(1, 3, 4, 5, 6, 8, 9, 10, 13, 14, 18, 19, 20),
                 (3, 4, 5, 6, 8, 9, 13, 14, 19),
                 (3, 8, 9, 10, 13, 14, 15, 18, 19)]


def _write(path: Path, header, rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _conv_row(uid, bus, tpl, vg):
    utype, fuel, pmax, pmin, qmax, qmin, ramp, start, price, pcts, hr0, incr, vom = tpl
    return [uid, bus, utype, fuel, pmin, 0, vg, pmax, pmin, qmax, qmin, ramp, start,
            0, price, *pcts, hr0, *incr, vom]


def _plain_row(uid, bus, utype, fuel, pmax, qmax=0.0, qmin=0.0, vg=1.0):
    return [uid, bus, utype, fuel, 0, 0, vg, pmax, 0, qmax, qmin, 0, 0, 0, 0,
            "", "", "", "", "", "", "", "", 0]


def calendar(periods=PERIODS):
    start = dt.date(YEAR, 1, 1)
    rows = []
    for t in range(periods):
        d = start + dt.timedelta(days=t // 24)
        rows.append([d.year, d.month, d.day, t % 24 + 1])
    return rows


def _shapes(periods=PERIODS):
    t = np.arange(periods)
    hour = t % 24 + 1
    doy = t // 24 + 1
    weekday = (t // 24 + 2) % 7  # 2020-01-01 was a Wednesday
    return t, hour, doy, weekday


def load_profile(area: int, peak: float, periods=PERIODS):
    t, hour, doy, weekday = _shapes(periods)
    season = (0.70 + 0.12 * np.cos(2 * np.pi * (doy - 200) / 366)
              + 0.07 * np.cos(2 * np.pi * (doy - 15) / 183))
    daily = 0.85 + 0.15 * np.sin(np.pi * np.clip(hour - 6 + area * 0.3, 0, 17) / 17)
    week = np.where(weekday >= 5, 0.93, 1.0)
    shape = season * daily * week
    return peak * shape / shape.max()


def solar_profile(cap: float, k: int, periods=PERIODS):
    t, hour, doy, _ = _shapes(periods)
    day_len = 12 + 3 * np.cos(2 * np.pi * (doy - 172) / 366)
    rise = 12.5 - day_len / 2
    x = (hour - rise) / day_len
    sun = np.where((x > 0) & (x < 1), np.sin(np.pi * np.clip(x, 0, 1)), 0.0)
    cloud = 0.72 + 0.28 * np.cos(doy * 2.3 + k)
    return cap * sun * cloud * (0.75 + 0.15 * np.cos(2 * np.pi * (doy - 172) / 366))


def wind_profile(cap: float, k: int, periods=PERIODS):
    t, hour, doy, _ = _shapes(periods)
    cf = (0.36 + 0.22 * np.sin(2 * np.pi * t / (24 * 3.7) + k)
          + 0.08 * np.cos(2 * np.pi * (hour + 3) / 24)
          + 0.08 * np.cos(2 * np.pi * (doy - 60) / 366))
    return cap * np.clip(cf, 0.02, 0.95)


def hydro_profile(cap: float, k: int, periods=PERIODS):
    t, hour, doy, _ = _shapes(periods)
    cf = (0.55 + 0.30 * np.cos(2 * np.pi * (doy - 140) / 366)
          + 0.05 * np.sin(2 * np.pi * (hour - 8) / 24) + 0.02 * math.cos(k))
    return cap * np.clip(cf, 0.05, 1.0)


def _write_ts(path: Path, cols, data, periods):
    cal = calendar(periods)
    rows = [c + [f"{v:.2f}" for v in data[i]] for i, c in enumerate(cal)]
    _write(path, ["Year", "Month", "Day", "Period"] + list(cols), rows)


def make_rts_synth(root: Path):
    buses, branches, gens = [], [], []
    for area in (1, 2, 3):
        base = area * 100
        loads = {b: (p, q) for b, p, q in LOADS}
        for n in range(1, 25):
            kind = "PV" if n in VSET else "PQ"
            if area == 1 and n == 13:
                kind = "Ref"
            p, q = loads.get(n, (0, 0))
            buses.append([base + n, f"B{base + n}", 138 if n <= 10 else 230, kind, p, q,
                          VSET.get(n, 1.0), 0, 0, -100 if n == 6 else 0, area])
        letter = "ABC"[area - 1]
        k = 0
        for f, t, r, x, b, rate, circuits in LINES:
            for c in range(circuits):
                k += 1
                branches.append([f"{letter}{k}", base + f, base + t, r, x, b, rate])
        for n, tpls in FLEET:
            if tpls is None:
                tpls = [NUCLEAR] if area == 1 else [CT_NG]
            counts = {}
            for tpl in tpls:
                counts[tpl[0]] = counts.get(tpl[0], 0) + 1
                uid = f"{base + n}_{tpl[0]}_{counts[tpl[0]]}"
                gens.append(_conv_row(uid, base + n, tpl, VSET[n]))
        gens.append(_plain_row(f"{base + 14}_SYNC_COND_1", base + 14, "SYNC_COND", "Sync_Cond",
                               0, qmax=200, qmin=-50, vg=VSET[14]))
    buses.append([325, "B325", 230, "PQ", 0, 0, 1.0, 0, 0, 0, 3])
    for i, (f, t, r, x, b, rate) in enumerate(TIES, start=1):
        branches.append([f"T{i}", f, t, r, x, b, rate])

    vset = {row[0]: row[6] for row in buses}
    ts_cols = {"Hydro": [], "WIND": [], "PV": [], "RTPV": []}
    ts_data = {key: [] for key in ts_cols}
    k = 0
    for bus, n in HYDRO_UNITS.items():
        for i in range(1, n + 1):
            uid = f"{bus}_HYDRO_{i}"
            gens.append(_plain_row(uid, bus, "HYDRO", "Hydro", 50, qmax=16, qmin=-10,
                                   vg=vset[bus]))
            ts_cols["Hydro"].append(uid)
            ts_data["Hydro"].append(hydro_profile(50, k))
            k += 1
    for bus, cap in WIND_UNITS.items():
        uid = f"{bus}_WIND_1"
        gens.append(_plain_row(uid, bus, "WIND", "Wind", cap, vg=vset[bus]))
        ts_cols["WIND"].append(uid)
        ts_data["WIND"].append(wind_profile(cap, k))
        k += 1
    for bus, caps in PV_UNITS.items():
        for i, cap in enumerate(caps, start=1):
            uid = f"{bus}_PV_{i}"
            gens.append(_plain_row(uid, bus, "PV", "Solar", cap, vg=vset[bus]))
            ts_cols["PV"].append(uid)
            ts_data["PV"].append(solar_profile(cap, k))
            k += 1
    for area, local in zip((1, 2, 3), RTPV_BUS_SETS):
        for n in local:
            bus = area * 100 + n
            cap = round(9.0 + 3.7 * ((n * 7 + area) % 6), 1)
            uid = f"{bus}_RTPV_1"
            gens.append(_plain_row(uid, bus, "RTPV", "Solar", cap, vg=vset[bus]))
            ts_cols["RTPV"].append(uid)
            ts_data["RTPV"].append(solar_profile(cap, k))
            k += 1
    gens.append(_plain_row("212_CSP_1", 212, "CSP", "Solar", 200, vg=vset[212]))
    gens.append(_plain_row("313_STORAGE_1", 313, "STORAGE", "Storage", 50, qmax=0, qmin=0,
                           vg=vset[313]))

    _write(root / "bus.csv", BUS_HEADER, buses)
    _write(root / "branch.csv", BRANCH_HEADER, branches)
    _write(root / "gen.csv", GEN_HEADER, gens)

    ts = root / "timeseries_data_files"
    peaks = {1: 2450.0, 2: 2300.0, 3: 2350.0}
    load = np.column_stack([load_profile(a, peaks[a]) for a in (1, 2, 3)])
    _write_ts(ts / "Load" / "DAY_AHEAD_regional_Load.csv", ["1", "2", "3"], load, PERIODS)
    names = {"Hydro": "hydro", "WIND": "wind", "PV": "pv", "RTPV": "rtpv"}
    for kind, cols in ts_cols.items():
        _write_ts(ts / kind / f"DAY_AHEAD_{names[kind]}.csv", cols,
                  np.column_stack(ts_data[kind]), PERIODS)


def make_mini5(root: Path):
    periods = 48
    buses = [
        [1, "B1", 230, "Ref", 0, 0, 1.03, 0, 0, 0, 1],
        [2, "B2", 230, "PQ", 120, 30, 1.0, 0, 0, 0, 1],
        [3, "B3", 230, "PV", 60, 15, 1.02, 0, 0, 0, 1],
        [4, "B4", 138, "PV", 90, 25, 1.01, 0, 0, 0, 2],
        [5, "B5", 138, "PQ", 80, 20, 1.0, 0, 0, 0, 2],
    ]
    branches = [
        ["L12", 1, 2, .010, .060, .030, 300], ["L13", 1, 3, .012, .070, .030, 300],
        ["L23", 2, 3, .015, .080, .020, 300], ["L34", 3, 4, .005, .090, 0.0, 300],
        ["L45", 4, 5, .020, .100, .010, 300], ["L25", 2, 5, .025, .110, .010, 300],
    ]
    gens = [
        _conv_row("1_STEAM_1", 1, STEAM_COAL_155, 1.03),
        _conv_row("3_CT_1", 3, CT_NG, 1.02),
        _conv_row("4_STEAM_1", 4, STEAM_COAL_76, 1.01),
        _plain_row("3_PV_1", 3, "PV", "Solar", 40, vg=1.02),
        _plain_row("5_WIND_1", 5, "WIND", "Wind", 60),
        _plain_row("4_HYDRO_1", 4, "HYDRO", "Hydro", 50, qmax=16, qmin=-10, vg=1.01),
    ]
    _write(root / "bus.csv", BUS_HEADER, buses)
    _write(root / "branch.csv", BRANCH_HEADER, branches)
    _write(root / "gen.csv", GEN_HEADER, gens)
    ts = root / "timeseries_data_files"
    load = np.column_stack([load_profile(1, 150.0, periods), load_profile(2, 95.0, periods)])
    _write_ts(ts / "Load" / "DAY_AHEAD_regional_Load.csv", ["1", "2"], load, periods)
    _write_ts(ts / "PV" / "DAY_AHEAD_pv.csv", ["3_PV_1"],
              solar_profile(40, 0, periods)[:, None], periods)
    _write_ts(ts / "WIND" / "DAY_AHEAD_wind.csv", ["5_WIND_1"],
              wind_profile(60, 1, periods)[:, None], periods)
    _write_ts(ts / "Hydro" / "DAY_AHEAD_hydro.csv", ["4_HYDRO_1"],
              hydro_profile(50, 2, periods)[:, None], periods)


if __name__ == "__main__":
    make_rts_synth(OUT / "rts_synth")
    make_mini5(OUT / "mini5")
    print(f"fixtures written under {OUT}")
