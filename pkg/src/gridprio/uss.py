"""Universal Selection Scheme: goal-driven walks down the GPWD list.

Preparation leaves one conventional unit on per energized island (the
largest, at the slack bus) and sets per-area MW/MVar goals.  Up to three
walks follow, each re-started from the prepared goals and validated with
:func:`~gridprio.steady_state.opf_check`; the first working one wins, the
third is final regardless.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

from .gpwd import GpwdBreakdown, available_conventional, rank_units
from .grid import (
    Generator, GridCase, Schedule, detect_islands, slack_candidate,
)
from .ingest import hour_of_day
from .steady_state import OpfCheck, PowerFlowOptions, opf_check

logger = logging.getLogger(__name__)

MW_GOAL_FACTOR = 1.15
SYNC_COND_CREDIT = 0.85


@dataclass
class AreaGoals:
    area: int
    mw_goal: float
    mvar_goal: float


@dataclass
class UssContext:
    hour_of_the_day: int
    renew_pct: float
    slack_units: Dict[int, Optional[str]]
    goals: Dict[int, AreaGoals]
    available: List[str]
    step_reached: int = 0
    unservable_islands: List[int] = field(default_factory=list)

    def fresh_goals(self) -> Dict[int, AreaGoals]:
        return {a: AreaGoals(a, g.mw_goal, g.mvar_goal) for a, g in self.goals.items()}


# -- deduction tables ------------------------------------------------------

def step1_deduction(g: Generator):
    """(MW, MVar) removed from the area goals when step 1 enables ``g``."""
    return 0.15 * g.pgmin + 0.85 * g.pgmax, 0.85 * g.qgmax


def step2_weights(renew_pct: float):
    """(pgmin weight, pgmax weight) for the step-2 MW deduction."""
    if renew_pct <= 0.10:
        return 0.50, 0.50
    if renew_pct <= 0.175:
        return 0.55, 0.45
    if renew_pct <= 0.25:
        return 0.60, 0.40
    return 0.65, 0.35


def step2_deduction(g: Generator, renew_pct: float) -> float:
    wmin, wmax = step2_weights(renew_pct)
    return wmin * g.pgmin + wmax * g.pgmax


def step3_factor(hour: int) -> float:
    if not 1 <= hour <= 24:
        raise ValueError(f"hour {hour} outside 1..24")
    if hour <= 6 or hour == 24:
        return 0.25
    if hour <= 10 or hour >= 22:
        return 0.20
    return 0.15


def step3_deduction(g: Generator, hour: int) -> float:
    return step3_factor(hour) * g.qgmax


# -- preparation -----------------------------------------------------------

def prepare(case: GridCase, period: int) -> UssContext:
    """Goals and slack seeds for one period of a scenario-built case."""
    avail = available_conventional(case)
    islands = detect_islands(case)
    slack_units: Dict[int, Optional[str]] = {}
    unservable = []
    for k, island in enumerate(islands):
        g = slack_candidate(case, island, [u.id for u in avail])
        slack_units[k] = None if g is None else g.id
        if g is None and any(case.bus(b).pd > 0 for b in island):
            unservable.append(k)

    total_load = 0.0
    renewable = 0.0
    goals: Dict[int, AreaGoals] = {}
    load_p: Dict[int, float] = {}
    load_q: Dict[int, float] = {}
    for b in case.buses:
        if b.in_service:
            load_p[b.area] = load_p.get(b.area, 0.0) + b.pd
            load_q[b.area] = load_q.get(b.area, 0.0) + b.qd
    ren_p = {a: 0.0 for a in load_p}
    ren_q = {a: 0.0 for a in load_p}
    added_q = {a: 0.0 for a in load_p}
    for g in case.active_generators():
        a = case.gen_area(g)
        if g.is_renewable:
            ren_p[a] += g.pgmax
            ren_q[a] += g.qgmax
        elif g.added:
            added_q[a] += g.qgmax
    for a in sorted(load_p):
        goals[a] = AreaGoals(
            a,
            MW_GOAL_FACTOR * (load_p[a] - ren_p[a]),
            (load_q[a] - ren_q[a]) - SYNC_COND_CREDIT * added_q[a],
        )
        total_load += load_p[a]
        renewable += ren_p[a]
    for uid in slack_units.values():
        if uid is None:
            continue
        g = case.gen(uid)
        a = case.gen_area(g)
        goals[a].mw_goal -= 0.5 * g.pgmin + 0.5 * g.pgmax
        goals[a].mvar_goal -= 0.5 * g.qgmax
    return UssContext(
        hour_of_the_day=hour_of_day(period),
        renew_pct=renewable / total_load if total_load > 0 else 0.0,
        slack_units=slack_units,
        goals=goals,
        available=[g.id for g in avail],
        unservable_islands=unservable,
    )


# -- walks -----------------------------------------------------------------

def walk(ranked: Sequence[GpwdBreakdown], case: GridCase, goals: Dict[int, AreaGoals],
         wants: Callable[[AreaGoals], bool], deduct: Callable[[Generator, AreaGoals], None],
         skip: Sequence[str], available: Sequence[str]) -> List[str]:
    """Enable ranked units whose area still wants generation; stop once none does."""
    skip = set(skip)
    available = set(available)
    enabled = []
    for row in ranked:
        if not any(wants(g) for g in goals.values()):
            break
        if row.unit_id in skip or row.unit_id not in available:
            continue
        g = case.gen(row.unit_id)
        area_goals = goals.get(case.gen_area(g))
        if area_goals is None or not wants(area_goals):
            continue
        enabled.append(g.id)
        deduct(g, area_goals)
    return enabled


def _slack_ids(ctx: UssContext) -> List[str]:
    return [u for u in ctx.slack_units.values() if u is not None]


def commit_case(case: GridCase, on: Sequence[str]) -> GridCase:
    """Copy of ``case`` with exactly the units in ``on`` enabled among conventionals.

    Enabled units are seeded at pgmin / qgmax; the check overwrites both.
    """
    out = case.copy()
    on = set(on)
    for g in out.generators:
        if g.is_conventional:
            g.status = g.id in on
            if g.status:
                g.pg, g.qg = g.pgmin, g.qgmax
    return out


def _step_schedule(case, ctx, enabled, period, step, options):
    committed = commit_case(case, _slack_ids(ctx) + enabled)
    check = opf_check(committed, options)
    return committed, check


def step1(ctx: UssContext, ranked, case: GridCase, options=None):
    goals = ctx.fresh_goals()

    def deduct(g, ag):
        mw, mvar = step1_deduction(g)
        ag.mw_goal -= mw
        ag.mvar_goal -= mvar

    enabled = walk(ranked, case, goals, lambda ag: ag.mw_goal > 0 or ag.mvar_goal > 0,
                   deduct, _slack_ids(ctx), ctx.available)
    return enabled, goals


def step2(ctx: UssContext, ranked, case: GridCase, options=None):
    goals = ctx.fresh_goals()

    def deduct(g, ag):
        ag.mw_goal -= step2_deduction(g, ctx.renew_pct)

    enabled = walk(ranked, case, goals, lambda ag: ag.mw_goal > 0,
                   deduct, _slack_ids(ctx), ctx.available)
    return enabled, goals


def step3(ctx: UssContext, ranked, case: GridCase, options=None):
    goals = ctx.fresh_goals()

    def deduct(g, ag):
        ag.mvar_goal -= step3_deduction(g, ctx.hour_of_the_day)

    enabled = walk(ranked, case, goals, lambda ag: ag.mvar_goal > 0,
                   deduct, _slack_ids(ctx), ctx.available)
    return enabled, goals


STEPS = (step1, step2, step3)


def schedule_from_check(case: GridCase, committed: GridCase, check: OpfCheck, period: int,
                        method: str) -> Schedule:
    status = {g.id: bool(g.status and committed.bus(g.bus_id).in_service)
              for g in committed.generators}
    setpoints = {}
    if check.power_flow.converged:
        for uid, (p, q) in check.power_flow.gen_outputs.items():
            if status.get(uid):
                setpoints[uid] = (p, q)
    sched = Schedule(period_index=period, method_tag=method, unit_status=status,
                     setpoints=setpoints, feasible=check.working,
                     notes=list(check.reasons))
    if check.power_flow.converged:
        from .bench import renewable_share
        sched.renewable_share = renewable_share(committed, check.power_flow)
    return sched


def run_uss(case: GridCase, period: int, prev_schedule: Optional[Schedule] = None,
            options: Optional[PowerFlowOptions] = None,
            ranked: Optional[List[GpwdBreakdown]] = None) -> Schedule:
    """Rank, prepare, then escalate through the steps until a check works."""
    t0 = time.perf_counter()
    if ranked is None:
        ranked = rank_units(case, prev_schedule, options)
    ctx = prepare(case, period)
    committed = check = None
    for number, step in enumerate(STEPS, start=1):
        enabled, _ = step(ctx, ranked, case, options)
        committed, check = _step_schedule(case, ctx, enabled, period, number, options)
        ctx.step_reached = number
        if check.working:
            break
    sched = schedule_from_check(case, committed, check, period, "USS")
    sched.step_reached = ctx.step_reached
    sched.elapsed = time.perf_counter() - t0
    return sched
