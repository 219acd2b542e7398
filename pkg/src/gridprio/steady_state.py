"""Newton-Raphson AC power flow, merit-order dispatch, and the combined feasibility check.

:func:`opf_check` stands in for a full AC-OPF: dispatch fixes the active
setpoints, the power flow resolves reactive outputs and the slack, and the
verdict is "working" when the flow converges with every unit inside its
limits.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, TextIO, Tuple

import numpy as np

from .grid import (
    Generator, GridCase, GridError, detect_islands, slack_candidate,
)
from .ingest import DEFAULT_HEAT_RATE

logger = logging.getLogger(__name__)

LOSS_ADDER = 0.02
LOSS_ROUNDS = 2
Q_RANGE_EPS = 1e-9


class NoSlackError(GridError):
    """An island that needs a reference bus has none marked."""


@dataclass
class PowerFlowOptions:
    tol: float = 1e-8
    max_iter: int = 30
    enforce_q_limits: bool = True
    qlim_tol: float = 1e-6
    max_qlim_rounds: int = 100
    # "all": every violator per round; "worst": one bus per round;
    # "auto": all, retried worst-first from the last converged state on divergence
    qlim_mode: str = "auto"
    slack_policy: str = "auto"      # "auto" or "explicit" (use bus_kind == slack)
    enforce_ratings: bool = False
    trace: Optional[TextIO] = None


@dataclass
class PowerFlowSolution:
    converged: bool
    iterations: int = 0
    bus_ids: List[int] = field(default_factory=list)
    vm: np.ndarray = field(default_factory=lambda: np.zeros(0))
    va: np.ndarray = field(default_factory=lambda: np.zeros(0))
    gen_outputs: Dict[str, Tuple[float, float]] = field(default_factory=dict)
    slack_units: List[str] = field(default_factory=list)
    slack_injection: Dict[int, Tuple[float, float]] = field(default_factory=dict)
    mismatch_inf_norm: float = float("inf")
    pv_to_pq: List[int] = field(default_factory=list)
    message: str = ""

    def bus_voltages(self) -> Dict[int, complex]:
        return {b: self.vm[i] * np.exp(1j * self.va[i]) for i, b in enumerate(self.bus_ids)}


@dataclass
class DispatchSolution:
    gen_setpoints: Dict[str, float]
    objective: float
    feasible: bool
    targets: Dict[int, float] = field(default_factory=dict)


@dataclass
class OpfCheck:
    power_flow: PowerFlowSolution
    dispatch: DispatchSolution
    working: bool
    reasons: List[str] = field(default_factory=list)

    def __iter__(self):
        yield self.power_flow
        yield self.dispatch


# -- costs -----------------------------------------------------------------

def average_op_cost(gen: Generator) -> float:
    """Mean of cost/MW over the piecewise breakpoints ($/MWh)."""
    vals = [c / mw for mw, c in gen.op_cost_points if mw > 0]
    return float(np.mean(vals)) if vals else 0.0


def fuel_cost_per_mwh(gen: Generator) -> float:
    hr = gen.heat_rate if gen.heat_rate is not None else DEFAULT_HEAT_RATE
    return gen.fuel_cost * hr


def incremental_cost(gen: Generator) -> float:
    if gen.is_renewable:
        return 0.0
    return average_op_cost(gen) + fuel_cost_per_mwh(gen)


# -- admittance ------------------------------------------------------------

def make_ybus(case: GridCase, bus_ids: List[int]) -> np.ndarray:
    """Dense bus admittance matrix (per-unit) over ``bus_ids``; taps ignored."""
    index = {b: i for i, b in enumerate(bus_ids)}
    n = len(bus_ids)
    Y = np.zeros((n, n), dtype=complex)
    for br in case.branches:
        if not br.in_service:
            continue
        f, t = index.get(br.from_bus), index.get(br.to_bus)
        if f is None or t is None:
            continue
        ys = 1.0 / complex(br.r, br.x)
        ysh = 0.5j * br.b
        Y[f, f] += ys + ysh
        Y[t, t] += ys + ysh
        Y[f, t] -= ys
        Y[t, f] -= ys
    for b in bus_ids:
        bus = case.bus(b)
        Y[index[b], index[b]] += complex(bus.gs, bus.bs) / case.base_mva
    return Y


def _newton(Y, V, Sbus, ref, pv, pq, opts: PowerFlowOptions, it0=0, vq=None):
    """``vq``: buses with free |V| and a Q equation (defaults to ``pq``).

    A reference bus held at a reactive limit keeps its angle but joins ``vq``.
    """
    pvpq = np.r_[pv, pq]
    npvpq = len(pvpq)
    if vq is None:
        vq = pq
    Vm, Va = np.abs(V), np.angle(V)
    it = 0
    normF = np.inf
    while True:
        mis = V * np.conj(Y @ V) - Sbus
        F = np.r_[mis[pvpq].real, mis[vq].imag]
        normF = float(np.max(np.abs(F))) if F.size else 0.0
        if opts.trace is not None:
            opts.trace.write(f"iter {it0 + it} mismatch {normF:.6e}\n")
        if not np.isfinite(normF):
            return V, False, it, normF
        if normF <= opts.tol:
            return V, True, it, normF
        if it >= opts.max_iter:
            return V, False, it, normF
        it += 1
        Ibus = Y @ V
        Vn = V / np.abs(V)
        dS_dVm = V[:, None] * np.conj(Y * Vn[None, :]) + np.diag(np.conj(Ibus) * Vn)
        dS_dVa = 1j * V[:, None] * (np.diag(np.conj(Ibus)) - np.conj(Y * V[None, :]))
        J = np.block([
            [dS_dVa[np.ix_(pvpq, pvpq)].real, dS_dVm[np.ix_(pvpq, vq)].real],
            [dS_dVa[np.ix_(vq, pvpq)].imag, dS_dVm[np.ix_(vq, vq)].imag],
        ])
        try:
            dx = -np.linalg.solve(J, F)
        except np.linalg.LinAlgError:
            return V, False, it, normF
        Va[pvpq] += dx[:npvpq]
        Vm[vq] += dx[npvpq:]
        V = Vm * np.exp(1j * Va)


def _split_q(units: List[Generator], q_total: float) -> Dict[str, float]:
    """Share a bus' regulated Q between its units in proportion to their ranges."""
    qmin = sum(u.qgmin for u in units)
    rng = [u.qgmax - u.qgmin for u in units]
    tot = sum(rng)
    out = {}
    for u, r in zip(units, rng):
        w = r / tot if tot > Q_RANGE_EPS else 1.0 / len(units)
        out[u.id] = u.qgmin + (q_total - qmin) * w
    return out


def _pick_slack(case: GridCase, island, gens, opts: PowerFlowOptions) -> Optional[Generator]:
    if opts.slack_policy == "explicit":
        marked = [b for b in sorted(island) if case.bus(b).bus_kind == "slack"]
        if not marked:
            raise NoSlackError(f"island starting at bus {min(island)} has no slack bus")
        on_bus = [g for g in gens if g.bus_id == marked[0]]
        return max(on_bus, key=lambda g: (g.pgmax, g.id)) if on_bus else None
    g = slack_candidate(case, island, [u.id for u in gens])
    if g is not None:
        return g
    pool = [u for u in gens if u.pgmax > 0] or list(gens)
    return min(pool, key=lambda u: (-u.pgmax, u.bus_id, u.id)) if pool else None


def _q_violations(V, Y, base, qd, q_fixed, pv, ref, q_pinned, regulating, bus_ids, tol):
    """(excess MVar, bus index, limit) for each regulating bus outside its range."""
    S = V * np.conj(Y @ V) * base
    q_need = S.imag + qd - q_fixed
    out = []
    # the reference keeps its angle but is held at a reactive limit like a PV bus
    for i in list(pv) + [r for r in ref if r not in q_pinned]:
        units = regulating[bus_ids[i]]
        if not units:
            continue
        qmax = sum(u.qgmax for u in units)
        qmin = sum(u.qgmin for u in units)
        if q_need[i] > qmax + tol:
            out.append((q_need[i] - qmax, i, qmax))
        elif q_need[i] < qmin - tol:
            out.append((qmin - q_need[i], i, qmin))
    return out


def solve_power_flow(case: GridCase, options: Optional[PowerFlowOptions] = None) -> PowerFlowSolution:
    """Polar Newton-Raphson with PV->PQ switching at reactive limits.

    Generator active outputs are taken from ``pg`` of enabled units; each
    energized island's slack unit absorbs the residual.  Islands without any
    enabled unit but with load make the solve non-converged.
    """
    opts = options or PowerFlowOptions()
    base = case.base_mva
    gens_all = case.active_generators()
    islands = detect_islands(case)

    bus_ids: List[int] = []
    slack_units: List[Generator] = []
    for island in islands:
        gens = [g for g in gens_all if g.bus_id in island]
        load = sum(abs(case.bus(b).pd) + abs(case.bus(b).qd) for b in island)
        if not gens:
            if load > 0:
                return PowerFlowSolution(converged=False,
                                         message=f"unsupplied island at bus {min(island)}")
            continue
        slack = _pick_slack(case, island, gens, opts)
        slack_units.append(slack)
        bus_ids.extend(sorted(island))
    if not bus_ids:
        return PowerFlowSolution(converged=True, iterations=0, mismatch_inf_norm=0.0,
                                 message="nothing energized")

    index = {b: i for i, b in enumerate(bus_ids)}
    n = len(bus_ids)
    Y = make_ybus(case, bus_ids)

    by_bus: Dict[int, List[Generator]] = {}
    for g in gens_all:
        if g.bus_id in index:
            by_bus.setdefault(g.bus_id, []).append(g)
    slack_bus_ids = {g.bus_id for g in slack_units}

    pg = np.zeros(n)
    q_fixed = np.zeros(n)
    regulating: Dict[int, List[Generator]] = {}
    Vm = np.ones(n)
    for b, units in by_bus.items():
        i = index[b]
        pg[i] = sum(u.pg for u in units)
        reg = [u for u in units if u.qgmax - u.qgmin > Q_RANGE_EPS]
        q_fixed[i] = sum(u.qgmin for u in units if u not in reg)
        if reg or b in slack_bus_ids:
            regulating[b] = reg
            vref = (reg or units)[0].vg
            Vm[i] = vref
    pd = np.array([case.bus(b).pd for b in bus_ids])
    qd = np.array([case.bus(b).qd for b in bus_ids])

    ref = np.array(sorted(index[b] for b in slack_bus_ids), dtype=int)
    pv_set = {index[b] for b in regulating if b not in slack_bus_ids}
    q_pinned: Dict[int, float] = {}   # bus index -> regulated Q held at a limit (MVar)
    switched: List[int] = []

    V = Vm * np.exp(1j * np.zeros(n))
    total_it = 0
    converged = False
    normF = np.inf
    worst_only = opts.qlim_mode == "worst"
    last_ok = None      # state at the last converged round, for the "auto" retry
    for _ in range(opts.max_qlim_rounds):
        pv = np.array(sorted(pv_set), dtype=int)
        pq = np.array(sorted(set(range(n)) - pv_set - set(ref)), dtype=int)
        qg = q_fixed.copy()
        for i, q in q_pinned.items():
            qg[i] += q
        Sbus = ((pg - pd) + 1j * (qg - qd)) / base
        vq = np.array(sorted(set(pq) | (set(q_pinned) & set(ref))), dtype=int)
        V, converged, it, normF = _newton(Y, V, Sbus, ref, pv, pq, opts, total_it, vq)
        total_it += it
        if not converged and last_ok is not None:
            V, pv_set, q_pinned, switched, newly = last_ok
            last_ok = None
            worst_only = True
        else:
            if not converged or not opts.enforce_q_limits:
                break
            newly = _q_violations(V, Y, base, qd, q_fixed, pv, ref, q_pinned,
                                  regulating, bus_ids, opts.qlim_tol)
            if not newly:
                break
            if len(newly) > 1 and opts.qlim_mode == "auto" and not worst_only:
                last_ok = (V.copy(), set(pv_set), dict(q_pinned), list(switched), newly)
            else:
                last_ok = None
        if worst_only:
            newly = [max(newly, key=lambda v: (v[0], -v[1]))]
        for _, i, lim in newly:
            q_pinned[i] = lim
        newly = [i for _, i, _ in newly]
        for i in newly:
            pv_set.discard(i)
            if bus_ids[i] not in switched:
                switched.append(bus_ids[i])
        if opts.trace is not None:
            opts.trace.write(f"pv_to_pq {' '.join(str(bus_ids[i]) for i in newly)}\n")

    sol = PowerFlowSolution(converged=converged, iterations=total_it, bus_ids=bus_ids,
                            vm=np.abs(V), va=np.angle(V), mismatch_inf_norm=normF,
                            pv_to_pq=switched, slack_units=[g.id for g in slack_units])
    if not converged:
        sol.message = "newton iteration did not converge"
        return sol

    S = V * np.conj(Y @ V) * base
    p_bus = S.real + pd
    q_need = S.imag + qd - q_fixed
    slack_by_bus = {g.bus_id: g for g in slack_units}
    for b, units in by_bus.items():
        i = index[b]
        reg = regulating.get(b, [])
        if b in slack_by_bus:
            sg = slack_by_bus[b]
            others = sum(u.pg for u in units if u is not sg)
            p_out = {u.id: u.pg for u in units}
            p_out[sg.id] = p_bus[i] - others
            sol.slack_injection[b] = (float(p_bus[i]), float(q_need[i] + q_fixed[i]))
        else:
            p_out = {u.id: u.pg for u in units}
        q_out = {u.id: u.qgmin for u in units if u not in reg}
        if reg:
            q_reg = q_pinned.get(i, q_need[i])
            q_out.update(_split_q(reg, q_reg))
        elif b in slack_by_bus:
            # slack with no reactive range: everything lands on the slack unit
            q_out[slack_by_bus[b].id] = q_need[i] + q_fixed[i] - sum(
                u.qgmin for u in units if u is not slack_by_bus[b])
        for u in units:
            sol.gen_outputs[u.id] = (float(p_out[u.id]), float(q_out[u.id]))
    return sol


# -- dispatch --------------------------------------------------------------

def _island_targets(case: GridCase, area_demands: Optional[Dict[int, float]]):
    islands = detect_islands(case)
    targets = {}
    area_pd: Dict[int, float] = {}
    area_buses: Dict[int, int] = {}
    for b in case.buses:
        if b.in_service:
            area_pd[b.area] = area_pd.get(b.area, 0.0) + b.pd
            area_buses[b.area] = area_buses.get(b.area, 0) + 1
    for k, island in enumerate(islands):
        if area_demands is None:
            targets[k] = sum(case.bus(b).pd for b in island)
            continue
        t = 0.0
        for a, demand in area_demands.items():
            if isinstance(demand, (tuple, list)):
                demand = demand[0]
            members = [case.bus(b) for b in island if case.bus(b).area == a]
            if not members:
                continue
            if area_pd.get(a, 0.0) != 0:
                share = sum(m.pd for m in members) / area_pd[a]
            else:
                share = len(members) / area_buses[a]
            t += demand * share
        targets[k] = t
    return islands, targets


def economic_dispatch(case: GridCase, area_demands: Optional[Dict[int, float]] = None,
                      reserve_pct: float = 0.0, loss_adder: float = LOSS_ADDER,
                      losses: Optional[Dict[int, float]] = None) -> DispatchSolution:
    """Merit-order dispatch of enabled units, one balance per energized island.

    Area demands (default: in-service bus loads) are pooled per island and
    inflated by ``loss_adder``, or by ``losses`` (island index -> MW) where
    given.  Every unit starts at pgmin, then capacity is filled cheapest
    first; renewables cost nothing and so go first.  The island's slack unit
    takes its merit-order place but holds back the loss allowance, which it
    fills only after every other unit, so it keeps headroom for the residual.
    ``reserve_pct`` only enters the feasibility verdict, as required headroom.
    """
    islands, targets = _island_targets(case, area_demands)
    gens = case.active_generators()
    setpoints: Dict[str, float] = {}
    objective = 0.0
    feasible = True
    out_targets = {}
    for k, island in enumerate(islands):
        units = [g for g in gens if g.bus_id in island]
        if losses is not None and k in losses:
            target = targets[k] + losses[k]
        else:
            target = targets[k] * (1.0 + loss_adder)
        out_targets[k] = target
        cost = {g.id: incremental_cost(g) for g in units}
        slack = _pick_slack(case, island, units, PowerFlowOptions()) if units else None
        for g in units:
            setpoints[g.id] = g.pgmin
        remaining = target - sum(g.pgmin for g in units)
        if remaining < -1e-9:
            feasible = False
        held = 0.0
        if slack is not None:
            held = min(max(target - targets[k], 0.0), slack.pgmax - slack.pgmin)
        for g in sorted(units, key=lambda u: (cost[u.id], u.id)):
            if remaining <= 0:
                break
            room = g.pgmax - g.pgmin - (held if g is slack else 0.0)
            inc = min(room, remaining)
            setpoints[g.id] += inc
            remaining -= inc
        if slack is not None and remaining > 0:
            inc = min(held, remaining)
            setpoints[slack.id] += inc
            remaining -= inc
        if remaining > 1e-9:
            feasible = False
        if sum(g.pgmax for g in units) < target * (1.0 + reserve_pct) - 1e-9:
            feasible = False
        objective += sum(cost[g.id] * setpoints[g.id] for g in units)
    return DispatchSolution(gen_setpoints=setpoints, objective=objective,
                            feasible=feasible, targets=out_targets)


def branch_flows(case: GridCase, sol: PowerFlowSolution) -> Dict[str, float]:
    """Apparent power (MVA) at the from-end of each in-service branch."""
    index = {b: i for i, b in enumerate(sol.bus_ids)}
    V = sol.vm * np.exp(1j * sol.va)
    flows = {}
    for br in case.branches:
        if not br.in_service or br.from_bus not in index or br.to_bus not in index:
            continue
        vf, vt = V[index[br.from_bus]], V[index[br.to_bus]]
        ys = 1.0 / complex(br.r, br.x)
        i_f = (vf - vt) * ys + vf * 0.5j * br.b
        flows[br.id] = float(abs(vf * np.conj(i_f)) * case.base_mva)
    return flows


def _slack_out_of_range(case: GridCase, pf: PowerFlowSolution, tol: float) -> bool:
    for uid in pf.slack_units:
        p = pf.gen_outputs[uid][0]
        if p < -tol or p > case.gen(uid).pgmax + tol:
            return True
    return False


def _measured_losses(case: GridCase, pf: PowerFlowSolution) -> Dict[int, float]:
    out = {}
    for k, island in enumerate(detect_islands(case)):
        gen = sum(p for uid, (p, _) in pf.gen_outputs.items() if case.gen(uid).bus_id in island)
        out[k] = max(0.0, gen - sum(case.bus(b).pd for b in island))
    return out


def opf_check(case: GridCase, options: Optional[PowerFlowOptions] = None,
              area_demands=None, loss_adder: float = LOSS_ADDER,
              loss_rounds: int = LOSS_ROUNDS) -> OpfCheck:
    """Dispatch, then power flow; verdict as described in the module docstring.

    When the slack ends up outside its range, the dispatch is redone with
    the losses measured in the last solve (at most ``loss_rounds`` times).
    """
    opts = options or PowerFlowOptions()
    work = case.copy()
    losses = None
    for _ in range(loss_rounds + 1):
        dispatch = economic_dispatch(work, area_demands, loss_adder=loss_adder, losses=losses)
        for uid, p in dispatch.gen_setpoints.items():
            work.gen(uid).pg = p
        pf = solve_power_flow(work, opts)
        if not pf.converged or not _slack_out_of_range(work, pf, opts.qlim_tol):
            break
        losses = _measured_losses(work, pf)
    reasons = []
    if not pf.converged:
        reasons.append(pf.message or "not converged")
        return OpfCheck(pf, dispatch, False, reasons)
    tol = opts.qlim_tol
    for uid in pf.slack_units:
        g = work.gen(uid)
        p = pf.gen_outputs[uid][0]
        if p < -tol or p > g.pgmax + tol:
            reasons.append(f"slack {uid} active output {p:.3f} outside [0, {g.pgmax:.3f}]")
    for uid, (_, q) in pf.gen_outputs.items():
        g = work.gen(uid)
        if q < g.qgmin - tol or q > g.qgmax + tol:
            reasons.append(f"unit {uid} reactive output {q:.3f} outside [{g.qgmin}, {g.qgmax}]")
    if opts.enforce_ratings:
        for br_id, s in branch_flows(work, pf).items():
            br = next(b for b in work.branches if b.id == br_id)
            if br.rating > 0 and s > br.rating + tol:
                reasons.append(f"branch {br_id} loading {s:.1f} MVA above rating {br.rating}")
    return OpfCheck(pf, dispatch, not reasons, reasons)
