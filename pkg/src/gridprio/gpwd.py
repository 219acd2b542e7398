"""Generator participation weights and the ranked list of conventional units.

The weight of a unit is

    prior state + active share + reactive share + size score - Pgmin/Qgmax term

clamped at zero.  Shares come from a probe dispatch/power flow with every
available conventional unit on and minimum outputs relaxed to zero.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Tuple

from .grid import Generator, GridCase, Schedule
from .steady_state import PowerFlowOptions, opf_check

logger = logging.getLogger(__name__)

BREAKDOWN_FIELDS = ("unit", "ps", "apf_p", "apf_q", "mp", "ratio_term", "gpwd", "rank")


@dataclass
class GpwdBreakdown:
    unit_id: str
    ps: float
    apf_p: float
    apf_q: float
    mp: float
    ratio_term: float
    gpwd: float
    area: int = 0
    pgmax: float = 0.0
    available: bool = True
    rank: int = 0


def available_conventional(case: GridCase) -> List[Generator]:
    return [g for g in case.generators
            if g.is_conventional and g.status and case.bus(g.bus_id).in_service]


def prior_state(unit_id: str, prev_schedule: Optional[Schedule]) -> int:
    if prev_schedule is None:
        return 0
    return int(prev_schedule.is_enabled(unit_id))


def area_participation_factors(case: GridCase, options: Optional[PowerFlowOptions] = None
                               ) -> Dict[str, Tuple[float, float]]:
    """Per-area shares of conventional P and |Q| in a relaxed probe solve."""
    units = available_conventional(case)
    probe = case.copy()
    for g in units:
        pg = probe.gen(g.id)
        pg.pgmin = 0.0
        pg.status = True
    check = opf_check(probe, options)
    result = {g.id: (0.0, 0.0) for g in units}
    pf = check.power_flow
    if not pf.converged:
        logger.warning("APF probe did not converge; participation factors set to 0")
        return result
    by_area: Dict[int, List[Generator]] = {}
    for g in units:
        by_area.setdefault(case.gen_area(g), []).append(g)
    for area, members in by_area.items():
        p = {g.id: max(pf.gen_outputs.get(g.id, (0.0, 0.0))[0], 0.0) for g in members}
        q = {g.id: abs(pf.gen_outputs.get(g.id, (0.0, 0.0))[1]) for g in members}
        sp, sq = sum(p.values()), sum(q.values())
        for g in members:
            result[g.id] = (p[g.id] / sp if sp > 0 else 0.0,
                            q[g.id] / sq if sq > 0 else 0.0)
    return result


def _bracket(rel: float) -> float:
    if rel > 0.95:
        return 0.5
    if rel > 0.80:
        return 0.25
    return 0.0


def maximum_power_score(unit: Generator, max_pgmax: float, max_qgmax: float) -> float:
    """Size score in {0, .25, .5, .75, 1} against the largest conventional unit."""
    p = _bracket(unit.pgmax / max_pgmax) if max_pgmax > 0 else 0.0
    q = _bracket(unit.qgmax / max_qgmax) if max_qgmax > 0 else 0.0
    return p + q


def ratio_term(units: Iterable[Generator]) -> Dict[str, float]:
    """Pgmin/Qgmax normalized by the largest ratio among ``units``.

    Units with no positive Qgmax take the largest ratio (term 1.0).
    """
    units = list(units)
    raw = {g.id: g.pgmin / g.qgmax for g in units if g.qgmax > 0}
    top = max(raw.values(), default=0.0)
    out = {}
    for g in units:
        if g.qgmax <= 0:
            out[g.id] = 1.0
        elif top > 0:
            out[g.id] = raw[g.id] / top
        else:
            out[g.id] = 0.0
    return out


def compute_breakdowns(case: GridCase, prev_schedule: Optional[Schedule] = None,
                       options: Optional[PowerFlowOptions] = None) -> List[GpwdBreakdown]:
    """Unsorted breakdown for every conventional unit in ``case``."""
    avail = available_conventional(case)
    avail_ids = {g.id for g in avail}
    apf = area_participation_factors(case, options) if avail else {}
    max_p = max((g.pgmax for g in avail), default=0.0)
    max_q = max((g.qgmax for g in avail), default=0.0)
    ratios = ratio_term(avail)
    out = []
    for g in case.generators:
        if not g.is_conventional:
            continue
        ps = prior_state(g.id, prev_schedule)
        if g.id not in avail_ids:
            out.append(GpwdBreakdown(g.id, ps, 0.0, 0.0, 0.0, 0.0, 0.0,
                                     area=case.gen_area(g), pgmax=g.pgmax, available=False))
            continue
        ap, aq = apf.get(g.id, (0.0, 0.0))
        mp = maximum_power_score(g, max_p, max_q)
        rt = ratios[g.id]
        value = max(0.0, ps + ap + aq + mp - rt)
        out.append(GpwdBreakdown(g.id, ps, ap, aq, mp, rt, value,
                                 area=case.gen_area(g), pgmax=g.pgmax))
    return out


def sort_breakdowns(rows: List[GpwdBreakdown]) -> List[GpwdBreakdown]:
    """Descending weight; ties by larger pgmax, then lower unit id."""
    ranked = sorted(rows, key=lambda r: (-r.gpwd, -r.pgmax, r.unit_id))
    for i, r in enumerate(ranked, start=1):
        r.rank = i
    return ranked


def rank_units(case: GridCase, prev_schedule: Optional[Schedule] = None,
               options: Optional[PowerFlowOptions] = None) -> List[GpwdBreakdown]:
    return sort_breakdowns(compute_breakdowns(case, prev_schedule, options))


def write_breakdown_csv(rows: List[GpwdBreakdown], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(BREAKDOWN_FIELDS)
        for r in rows:
            w.writerow([r.unit_id, r.ps, f"{r.apf_p:.10g}", f"{r.apf_q:.10g}", r.mp,
                        f"{r.ratio_term:.10g}", f"{r.gpwd:.10g}", r.rank])
