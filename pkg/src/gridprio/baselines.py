"""Comparison schedulers: per-area MILP unit commitment and enable-and-try (MNG).

The MILP is a single-period commitment per area solved by a small
branch-and-bound over LP relaxations.  MNG enables GPWD-ranked units one at
a time until the feasibility check passes.
"""
from __future__ import annotations

import heapq
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import linprog

from .gpwd import GpwdBreakdown, available_conventional, rank_units
from .grid import GridCase, Schedule
from .steady_state import PowerFlowOptions, average_op_cost, fuel_cost_per_mwh, opf_check
from .uss import _slack_ids, commit_case, prepare, schedule_from_check

logger = logging.getLogger(__name__)

RESERVE_FACTOR = 1.05
INT_TOL = 1e-9


@dataclass
class MilpUnit:
    id: str
    avg_cost: float          # $/MWh from the averaged piecewise curve
    fuel_cost: float         # $/MWh after heat-rate conversion
    startup_cost: float
    pgmin: float
    pgmax: float
    ramp: float              # MW/hr
    prev_on: bool = False
    prev_output: Optional[float] = None

    @property
    def cost(self) -> float:
        return self.avg_cost + self.fuel_cost

    def output_bounds(self) -> Tuple[float, float]:
        """(lo, hi) for the output if committed; ramp-limited against the last period."""
        lo, hi = self.pgmin, self.pgmax
        if self.prev_output is not None and self.ramp > 0:
            hi = min(hi, self.prev_output + self.ramp)
            if self.prev_on:
                lo = max(lo, self.prev_output - self.ramp)
        return lo, hi


@dataclass
class MilpInstance:
    area: int
    units: List[MilpUnit]
    demand_target: float
    period: int = 0


@dataclass
class MilpSolution:
    commitment: Dict[str, bool]
    dispatch: Dict[str, float]
    objective: float
    optimal: bool
    gap: float
    infeasible: bool = False
    nodes: int = 0


def build_milp_instance(case: GridCase, period: int, area: int,
                        prev_schedule: Optional[Schedule] = None) -> MilpInstance:
    """Conventional units of ``area`` with averaged costs and the 5%-inflated net demand."""
    units = []
    for g in available_conventional(case):
        if case.gen_area(g) != area:
            continue
        prev_on = prev_schedule is not None and prev_schedule.is_enabled(g.id)
        prev_out = None
        if prev_schedule is not None:
            prev_out = prev_schedule.setpoints.get(g.id, (0.0, 0.0))[0] if prev_on else 0.0
        units.append(MilpUnit(
            id=g.id,
            avg_cost=average_op_cost(g),
            fuel_cost=fuel_cost_per_mwh(g),
            startup_cost=0.0 if prev_on else g.startup_cost,
            pgmin=g.pgmin, pgmax=g.pgmax,
            ramp=g.ramp_rate * 60.0,
            prev_on=prev_on, prev_output=prev_out,
        ))
    load = sum(b.pd for b in case.buses if b.in_service and b.area == area)
    renewable = sum(g.pgmax for g in case.active_generators()
                    if g.is_renewable and case.gen_area(g) == area)
    demand = max(0.0, load - renewable) * RESERVE_FACTOR
    return MilpInstance(area=area, units=units, demand_target=demand, period=period)


def dispatch_commitment(units: Sequence[MilpUnit], on: Sequence[bool], demand: float):
    """Cheapest outputs for a fixed commitment; ``None`` if capacity is short."""
    p = np.zeros(len(units))
    bounds = [u.output_bounds() for u in units]
    if any(o and lo > hi + 1e-9 for o, (lo, hi) in zip(on, bounds)):
        return None
    for i, o in enumerate(on):
        if o:
            p[i] = bounds[i][0]
    remaining = demand - p.sum()
    order = sorted((i for i, o in enumerate(on) if o), key=lambda i: (units[i].cost, units[i].id))
    for i in order:
        if remaining <= 0:
            break
        inc = min(bounds[i][1] - p[i], remaining)
        p[i] += inc
        remaining -= inc
    if remaining > 1e-9:
        return None
    obj = sum(u.startup_cost for u, o in zip(units, on) if o) + float(
        sum(u.cost * p[i] for i, u in enumerate(units)))
    return p, obj


class _Relaxation:
    """LP relaxation with u in [0,1]: lo*u <= p <= hi*u, sum p >= demand."""

    def __init__(self, inst: MilpInstance):
        units = inst.units
        n = len(units)
        self.n = n
        self.c = np.r_[[u.startup_cost for u in units], [u.cost for u in units]]
        bounds = [u.output_bounds() for u in units]
        rows = [np.r_[np.zeros(n), -np.ones(n)]]
        rhs = [-inst.demand_target]
        for i, (lo, hi) in enumerate(bounds):
            r = np.zeros(2 * n)
            r[n + i], r[i] = 1.0, -hi
            rows.append(r)
            rhs.append(0.0)
            r = np.zeros(2 * n)
            r[n + i], r[i] = -1.0, lo
            rows.append(r)
            rhs.append(0.0)
        self.A = np.array(rows)
        self.b = np.array(rhs)
        self.dead = [lo > hi + 1e-9 for lo, hi in bounds]

    def solve(self, fixed: Dict[int, int]):
        n = self.n
        ub = [0.0 if self.dead[i] else 1.0 for i in range(n)]
        bnds = []
        for i in range(n):
            if i in fixed:
                v = float(fixed[i])
                if v > ub[i]:
                    return None
                bnds.append((v, v))
            else:
                bnds.append((0.0, ub[i]))
        bnds += [(0.0, None)] * n
        res = linprog(self.c, A_ub=self.A, b_ub=self.b, bounds=bnds, method="highs")
        if res.status != 0:
            return None
        return res.fun, res.x[:n]


def _better(obj, on, best_obj, best_on, ids):
    if best_on is None or obj < best_obj - 1e-9:
        return True
    if obj <= best_obj + 1e-9:
        a = (sum(on), sorted(i for i, o in zip(ids, on) if o))
        b = (sum(best_on), sorted(i for i, o in zip(ids, best_on) if o))
        return a < b
    return False


def solve_milp(inst: MilpInstance, gap_tol: float = 1e-6, time_limit: float = 30.0) -> MilpSolution:
    """Best-first branch-and-bound, branching on the most fractional commitment."""
    units = inst.units
    ids = [u.id for u in units]
    n = len(units)
    if inst.demand_target <= 0:
        return MilpSolution({u: False for u in ids}, {u: 0.0 for u in ids}, 0.0, True, 0.0)
    cap = sum(hi for lo, hi in (u.output_bounds() for u in units) if lo <= hi + 1e-9)
    if cap < inst.demand_target - 1e-9:
        return MilpSolution({}, {}, math.inf, False, math.inf, infeasible=True)

    relax = _Relaxation(inst)
    t0 = time.perf_counter()
    best_obj, best_on, best_p = math.inf, None, None

    def consider(on):
        nonlocal best_obj, best_on, best_p
        res = dispatch_commitment(units, on, inst.demand_target)
        if res is None:
            return
        p, obj = res
        if _better(obj, on, best_obj, best_on, ids):
            best_obj, best_on, best_p = obj, list(on), p

    def repair(u_frac):
        # round up anything fractional, then add cheapest units while short
        on = [bool(v > INT_TOL) for v in u_frac]
        if dispatch_commitment(units, on, inst.demand_target) is None:
            for i in sorted(range(n), key=lambda i: (units[i].cost, ids[i])):
                if not on[i]:
                    on[i] = True
                    if dispatch_commitment(units, on, inst.demand_target) is not None:
                        break
        consider(on)

    root = relax.solve({})
    if root is None:
        return MilpSolution({}, {}, math.inf, False, math.inf, infeasible=True)
    counter = 0
    heap = [(root[0], counter, {}, root[1])]
    nodes = 1
    lower = root[0]
    timed_out = False
    while heap:
        bound, _, fixed, u = heapq.heappop(heap)
        lower = bound
        if best_on is not None and bound >= best_obj - gap_tol * max(1.0, abs(best_obj)):
            lower = best_obj
            heap.clear()
            break
        if time.perf_counter() - t0 > time_limit:
            timed_out = True
            heapq.heappush(heap, (bound, counter, fixed, u))
            break
        frac = [(abs(v - 0.5), i) for i, v in enumerate(u)
                if i not in fixed and INT_TOL < v < 1 - INT_TOL]
        if not frac:
            consider([v > 0.5 for v in u])
            continue
        repair(u)
        _, j = min(frac)
        for val in (1, 0):
            child = dict(fixed)
            child[j] = val
            res = relax.solve(child)
            nodes += 1
            if res is None:
                continue
            if best_on is not None and res[0] >= best_obj - gap_tol * max(1.0, abs(best_obj)):
                continue
            counter += 1
            heapq.heappush(heap, (res[0], counter, child, res[1]))
    if heap:
        lower = min(lower, heap[0][0])
    if best_on is None:
        return MilpSolution({}, {}, math.inf, False, math.inf, infeasible=not timed_out,
                            nodes=nodes)
    best_on = _drop_idle(units, best_on, best_obj, inst.demand_target)
    p, best_obj = dispatch_commitment(units, best_on, inst.demand_target)
    gap = (best_obj - lower) / max(1.0, abs(best_obj)) if heap or timed_out else 0.0
    return MilpSolution(
        commitment={u: bool(o) for u, o in zip(ids, best_on)},
        dispatch={u: float(p[i]) if best_on[i] else 0.0 for i, u in enumerate(ids)},
        objective=best_obj,
        optimal=gap <= gap_tol,
        gap=max(gap, 0.0),
        nodes=nodes,
    )


def _drop_idle(units, on, obj, demand):
    """Decommit units whose removal leaves the cost unchanged (highest id first)."""
    on = list(on)
    for i in sorted(range(len(units)), key=lambda i: units[i].id, reverse=True):
        if not on[i]:
            continue
        trial = list(on)
        trial[i] = False
        res = dispatch_commitment(units, trial, demand)
        if res is not None and res[1] <= obj + 1e-9:
            on = trial
    return on


def milp_to_lp_text(inst: MilpInstance) -> str:
    """CPLEX-LP style dump for cross-checking with an external solver."""
    lines = [f"\\ area {inst.area} period {inst.period}", "Minimize", " obj:"]
    terms = []
    for k, u in enumerate(inst.units):
        terms.append(f"{u.startup_cost:.10g} u{k}")
        terms.append(f"{u.cost:.10g} p{k}")
    lines.append("  " + " + ".join(terms) if terms else "  0")
    lines.append("Subject To")
    if inst.units:
        lines.append(" demand: " + " + ".join(f"p{k}" for k in range(len(inst.units)))
                     + f" >= {inst.demand_target:.10g}")
    for k, u in enumerate(inst.units):
        lo, hi = u.output_bounds()
        lines.append(f" up{k}: p{k} - {hi:.10g} u{k} <= 0")
        lines.append(f" lo{k}: p{k} - {lo:.10g} u{k} >= 0")
    lines.append("Binary")
    lines += [f" u{k}" for k in range(len(inst.units))]
    lines.append("End")
    lines += [f"\\ u{k} = {u.id}" for k, u in enumerate(inst.units)]
    return "\n".join(lines) + "\n"


def run_milp_uc(case: GridCase, period: int, prev_schedule: Optional[Schedule] = None,
                options: Optional[PowerFlowOptions] = None, gap_tol: float = 1e-6,
                time_limit: float = 30.0, lp_dump_dir=None) -> Schedule:
    """Solve one MILP per energized area, union the commitments, then check."""
    t0 = time.perf_counter()
    areas = sorted({b.area for b in case.buses if b.in_service})
    on: List[str] = []
    notes = []
    for area in areas:
        inst = build_milp_instance(case, period, area, prev_schedule)
        if lp_dump_dir is not None:
            from pathlib import Path
            Path(lp_dump_dir).mkdir(parents=True, exist_ok=True)
            (Path(lp_dump_dir) / f"{period}_area{area}.lp").write_text(milp_to_lp_text(inst))
        sol = solve_milp(inst, gap_tol, time_limit)
        if sol.infeasible:
            notes.append(f"area {area}: MILP infeasible")
            continue
        if not sol.optimal:
            notes.append(f"area {area}: stopped at gap {sol.gap:.2e}")
        on.extend(u for u, c in sol.commitment.items() if c)
    committed = commit_case(case, on)
    check = opf_check(committed, options)
    sched = schedule_from_check(case, committed, check, period, "MILP_UC")
    sched.notes = notes + sched.notes
    sched.elapsed = time.perf_counter() - t0
    return sched


def run_mng(case: GridCase, period: int, prev_schedule: Optional[Schedule] = None,
            options: Optional[PowerFlowOptions] = None,
            ranked: Optional[List[GpwdBreakdown]] = None) -> Schedule:
    """Shortest working prefix of the GPWD list (slack seeds always on)."""
    t0 = time.perf_counter()
    if ranked is None:
        ranked = rank_units(case, prev_schedule, options)
    ctx = prepare(case, period)
    seeds = _slack_ids(ctx)
    avail = set(ctx.available)
    order = [r.unit_id for r in ranked if r.unit_id in avail and r.unit_id not in seeds]
    on = list(seeds)
    committed = commit_case(case, on)
    check = opf_check(committed, options)
    prefix = 0
    while not check.working and prefix < len(order):
        on.append(order[prefix])
        prefix += 1
        committed = commit_case(case, on)
        check = opf_check(committed, options)
    sched = schedule_from_check(case, committed, check, period, "MNG")
    sched.notes.append(f"prefix {prefix}")
    sched.elapsed = time.perf_counter() - t0
    return sched
