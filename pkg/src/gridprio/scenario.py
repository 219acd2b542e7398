"""Per-period scenario construction.

Every transform takes a case and returns a modified copy: load rescaling
against the area timeseries, renewable portfolio shaping, synchronous
condenser limits, storage removal and the staged restoration topology.
"""
from __future__ import annotations

import datetime as dt
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple

import yaml

from .grid import (
    CSP, HYDRO, SOLAR, STORAGE, SYNC_COND, WIND, Generator, GridCase, GridError,
    assign_slack_buses, total_area_demand,
)
from .ingest import DATA_DIR, TimeseriesSet, period_index

logger = logging.getLogger(__name__)

SYNC_COND_DEFAULT_LIMITS = (-50.0, 100.0)
ADDED_SUFFIX = "_SYNC_ADDED"


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class GoalPortfolio:
    solar_pct: float = 0.005
    hydro_pct: float = 0.4675
    wind_pct: float = 0.105
    other_pct: float = 0.0225
    min_renewable_pct: float = 0.20

    def __post_init__(self):
        for name in ("solar_pct", "hydro_pct", "wind_pct", "other_pct", "min_renewable_pct"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ScenarioError(f"{name}={v} outside [0, 1]")


@dataclass(frozen=True)
class RestorationStage:
    name: str
    period_range: Tuple[int, int]
    energized_areas: FrozenSet[int]
    # area -> allowed kV classes; an area missing here is energized at every class
    energized_voltage_classes: Dict[int, FrozenSet[float]] = field(default_factory=dict)

    def contains(self, period: int) -> bool:
        return self.period_range[0] <= period <= self.period_range[1]

    def energizes(self, area: int, kv: float) -> bool:
        if area not in self.energized_areas:
            return False
        classes = self.energized_voltage_classes.get(area)
        return classes is None or kv in classes


# -- loads -----------------------------------------------------------------

def rescale_active_loads(case: GridCase, ts: TimeseriesSet, period: int) -> GridCase:
    """Scale each area's bus MW loads so the area total equals the forecast."""
    out = case.copy()
    for area in case.areas:
        target = ts.area_load(period, area)
        total, _ = total_area_demand(case, area)
        if total == 0:
            if target != 0:
                raise ScenarioError(f"area {area} has no default load to rescale to {target} MW")
            continue
        ratio = target / total
        for b in out.buses:
            if b.area == area and b.in_service:
                b.pd *= ratio
    return out


def rescale_reactive_loads(case: GridCase, ts: TimeseriesSet, period: int) -> GridCase:
    """Scale MVar loads by the area's forecast relative to its yearly maximum."""
    out = case.copy()
    for area in case.areas:
        peak = ts.area_max(area)
        if peak == 0:
            raise ScenarioError(f"area {area} load series is identically zero")
        ratio = ts.area_load(period, area) / peak
        for b in out.buses:
            if b.area == area and b.in_service:
                b.qd *= ratio
    return out


# -- renewables ------------------------------------------------------------

def _energized_load(case: GridCase) -> float:
    return sum(b.pd for b in case.buses if b.in_service)


def shape_renewable_portfolio(case: GridCase, ts: TimeseriesSet, period: int,
                              goal: GoalPortfolio = GoalPortfolio()) -> GridCase:
    """Cap each renewable type at its goal share of load, then top up to the floor.

    A record of the shaping (type totals, caps, shortfall) is left in
    ``case.meta["portfolio"]``.
    """
    out = case.copy()
    total_load = _energized_load(out)
    forecast: Dict[str, float] = {}
    by_type: Dict[str, List[Generator]] = {SOLAR: [], WIND: [], HYDRO: []}
    for g in out.generators:
        if g.gtype == CSP:
            g.status = False
            continue
        if g.gtype not in by_type:
            continue
        live = out.bus(g.bus_id).in_service
        f = ts.available(period, g.id) if ts.has_unit(g.id) else 0.0
        if not live or f <= 0:
            g.status = False
            continue
        g.status = True
        forecast[g.id] = f
        g.pgmax = f
        by_type[g.gtype].append(g)

    totals = {t: sum(forecast[g.id] for g in units) for t, units in by_type.items()}
    shares = {SOLAR: goal.solar_pct, WIND: goal.wind_pct, HYDRO: goal.hydro_pct}
    ws = totals[SOLAR] + totals[WIND]
    if ws > 0:
        shares[SOLAR] += goal.other_pct * totals[SOLAR] / ws
        shares[WIND] += goal.other_pct * totals[WIND] / ws

    caps = {}
    for t, units in by_type.items():
        cap = shares[t] * total_load
        caps[t] = cap
        if totals[t] > cap:
            factor = cap / totals[t]
            for g in units:
                g.pgmax = forecast[g.id] * factor

    shaped = [g for units in by_type.values() for g in units]
    renewable = sum(g.pgmax for g in shaped)
    floor = goal.min_renewable_pct * total_load
    headroom = {g.id: forecast[g.id] - g.pgmax for g in shaped}
    room = sum(headroom.values())
    if renewable < floor and room > 0:
        frac = min(1.0, (floor - renewable) / room)
        for g in shaped:
            g.pgmax += headroom[g.id] * frac
        renewable = sum(g.pgmax for g in shaped)
    for g in shaped:
        # only guards odd data; RTS renewable minimums are zero
        if g.pgmin > g.pgmax:
            g.pgmin = g.pgmax
    out.meta["portfolio"] = {
        "total_load": total_load,
        "forecast_totals": totals,
        "goal_shares": shares,
        "caps": caps,
        "renewable_total": renewable,
        "floor": floor,
        "shortfall": max(0.0, floor - renewable),
    }
    if renewable < floor - 1e-9:
        logger.debug("period %d: renewable %.1f MW below floor %.1f MW", period, renewable, floor)
    return out


def sync_cond_limits(renewable_mw: float) -> Tuple[float, float]:
    """(qgmin, qgmax) for a condenser added beside ``renewable_mw`` of renewables."""
    if renewable_mw > 250:
        return -50.0, 100.0
    if renewable_mw > 100:
        return -25.0, 25.0
    return -5.0, 10.0


def augment_sync_conds(case: GridCase, period: Optional[int] = None) -> GridCase:
    """Widen the existing condensers and add one beside every renewable-hosting bus."""
    out = case.copy()
    out.remove_generators([g.id for g in out.generators if g.added])
    for g in out.generators:
        if g.gtype == SYNC_COND:
            g.qgmin, g.qgmax = SYNC_COND_DEFAULT_LIMITS
    per_bus: Dict[int, float] = {}
    vg: Dict[int, float] = {}
    for g in out.generators:
        if g.is_renewable and g.status and out.bus(g.bus_id).in_service:
            per_bus[g.bus_id] = per_bus.get(g.bus_id, 0.0) + g.pgmax
            vg[g.bus_id] = max(vg.get(g.bus_id, 0.0), g.vg)
    for bus_id in sorted(per_bus):
        qmin, qmax = sync_cond_limits(per_bus[bus_id])
        out.add_generator(Generator(
            id=f"{bus_id}{ADDED_SUFFIX}", bus_id=bus_id, gtype=SYNC_COND, status=True,
            pgmin=0.0, pgmax=0.0, qgmin=qmin, qgmax=qmax, vg=vg[bus_id] or 1.0, added=True,
        ))
    return out


def disable_storage(case: GridCase) -> GridCase:
    out = case.copy()
    for g in out.generators:
        if g.gtype == STORAGE:
            g.status = False
    return out


# -- restoration staging ---------------------------------------------------

def apply_restoration_stage(case: GridCase, stage: RestorationStage) -> GridCase:
    """Take every element outside the stage's (area, kV) set out of service."""
    if not stage.energized_areas:
        raise ScenarioError(f"stage {stage.name!r} energizes nothing")
    out = case.copy()
    for b in out.buses:
        if not stage.energizes(b.area, b.base_kv):
            b.in_service = False
    for br in out.branches:
        if not (out.bus(br.from_bus).in_service and out.bus(br.to_bus).in_service):
            br.in_service = False
    for g in out.generators:
        if not out.bus(g.bus_id).in_service:
            g.status = False
    out.meta["stage"] = stage.name
    assign_slack_buses(out)
    return out


_TP = re.compile(r"^\s*(\d{1,2})/(\d{1,2})\s+TP-(\d{1,2})\s*$")


def parse_stage_point(text: str, year: int = 2020) -> int:
    """'01/26 TP-22' -> period index."""
    m = _TP.match(str(text))
    if not m:
        raise ScenarioError(f"bad stage boundary {text!r}, expected 'MM/DD TP-H'")
    month, day, hour = (int(x) for x in m.groups())
    try:
        return period_index(dt.date(year, month, day), hour)
    except ValueError as exc:
        raise ScenarioError(str(exc)) from None


def stages_from_config(data: dict) -> List[RestorationStage]:
    stages = []
    for i, raw in enumerate(data.get("stages", [])):
        unknown = set(raw) - {"name", "start", "end", "areas"}
        if unknown:
            raise ScenarioError(f"stage {i}: unknown keys {sorted(unknown)}")
        areas = raw.get("areas") or {}
        energized = frozenset(int(a) for a in areas)
        classes = {}
        for a, spec in areas.items():
            if spec in (None, "all"):
                continue
            kvs = spec if isinstance(spec, list) else [spec]
            classes[int(a)] = frozenset(float(k) for k in kvs)
        stages.append(RestorationStage(
            name=str(raw["name"]),
            period_range=(parse_stage_point(raw["start"]), parse_stage_point(raw["end"])),
            energized_areas=energized,
            energized_voltage_classes=classes,
        ))
    validate_stages(stages)
    return stages


def validate_stages(stages: Sequence[RestorationStage]) -> None:
    prev_end = 0
    for s in stages:
        lo, hi = s.period_range
        if lo > hi:
            raise ScenarioError(f"stage {s.name!r} ends before it starts")
        if lo <= prev_end:
            raise ScenarioError(f"stage {s.name!r} overlaps or precedes the previous stage")
        if not s.energized_areas:
            raise ScenarioError(f"stage {s.name!r} energizes nothing")
        prev_end = hi


def load_stage_config(path=None) -> List[RestorationStage]:
    """Read a YAML stage schedule; defaults to the bundled CSZ timeline."""
    path = Path(path) if path is not None else DATA_DIR / "csz_stages.yaml"
    with open(path, encoding="utf-8") as fh:
        return stages_from_config(yaml.safe_load(fh) or {})


def stage_for_period(stages: Sequence[RestorationStage], period: int) -> Optional[RestorationStage]:
    for s in stages:
        if s.contains(period):
            return s
    return None


def build_period_case(base: GridCase, ts: TimeseriesSet, period: int,
                      goal: GoalPortfolio = GoalPortfolio(),
                      stage: Optional[RestorationStage] = None) -> GridCase:
    """Full per-period pipeline on a pristine base case."""
    ts.check_period(period)
    case = rescale_active_loads(base, ts, period)
    case = rescale_reactive_loads(case, ts, period)
    if stage is not None:
        case = apply_restoration_stage(case, stage)
    case = disable_storage(case)
    case = shape_renewable_portfolio(case, ts, period, goal)
    case = augment_sync_conds(case, period)
    assign_slack_buses(case)
    case.meta["period"] = period
    return case
