"""Window runner and report writers for the three schedulers."""
from __future__ import annotations

import csv
import io
import json
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from .gpwd import rank_units, write_breakdown_csv
from .grid import GridCase, Schedule
from .ingest import TimeseriesSet, period_index
from .scenario import GoalPortfolio, RestorationStage, build_period_case, stage_for_period
from .steady_state import PowerFlowOptions, PowerFlowSolution

logger = logging.getLogger(__name__)

METHODS = ("USS", "MILP_UC", "MNG")
METHOD_ALIASES = {"uss": "USS", "milp": "MILP_UC", "milp_uc": "MILP_UC", "mng": "MNG"}
REPORT_FIELDS = ("method", "window", "periods", "working", "not_working",
                 "total_elapsed", "avg_enabled_conventional", "avg_renewable_share")
SCHEDULE_FIELDS = ("unit", "status", "pg", "qg", "step_reached", "feasible", "elapsed")

NORMAL_MONTHS = (3, 6, 7, 8, 10)


def renewable_share(case: GridCase, solution: PowerFlowSolution) -> float:
    """Renewable active output over energized demand."""
    demand = sum(b.pd for b in case.buses if b.in_service)
    if demand <= 0:
        return 0.0
    ren = 0.0
    for uid, (p, _) in solution.gen_outputs.items():
        if case.gen(uid).is_renewable:
            ren += p
    return ren / demand


@dataclass
class ReportRow:
    method: str
    window: str
    periods: int
    working: int
    not_working: int
    total_elapsed: float
    avg_enabled_conventional: float
    avg_renewable_share: float


@dataclass
class BenchmarkReport:
    rows: List[ReportRow] = field(default_factory=list)
    schedules: Dict[str, List[Schedule]] = field(default_factory=dict)
    rankings: Dict[int, list] = field(default_factory=dict)
    cases: Dict[int, GridCase] = field(default_factory=dict, repr=False)

    def row(self, method: str, window: str) -> ReportRow:
        for r in self.rows:
            if r.method == method and r.window == window:
                return r
        raise KeyError((method, window))

    def ratios(self, window: str, reference: str = "USS") -> Dict[str, float]:
        """Elapsed time of each method relative to ``reference``."""
        ref = self.row(reference, window).total_elapsed
        return {r.method: (r.total_elapsed / ref if ref > 0 else math.nan)
                for r in self.rows if r.window == window}


def _runner(method: str):
    from .baselines import run_milp_uc, run_mng
    from .uss import run_uss
    return {"USS": run_uss, "MILP_UC": run_milp_uc, "MNG": run_mng}[method]


def _failed(period: int, method: str, case: GridCase, exc: Exception) -> Schedule:
    return Schedule(period_index=period, method_tag=method,
                    unit_status={g.id: False for g in case.generators if g.is_conventional},
                    feasible=False, notes=[f"error: {exc!r}"])


def enabled_conventional(case: GridCase, sched: Schedule) -> int:
    return sum(1 for g in case.generators if g.is_conventional and sched.is_enabled(g.id))


def summarize(method: str, window: str, cases: Dict[int, GridCase],
              scheds: Sequence[Schedule]) -> ReportRow:
    n = len(scheds)
    working = sum(s.feasible for s in scheds)
    counts = [enabled_conventional(cases[s.period_index], s) for s in scheds]
    shares = [s.renewable_share for s in scheds if math.isfinite(s.renewable_share)]
    return ReportRow(
        method=method, window=window, periods=n, working=working,
        not_working=n - working,
        total_elapsed=sum(s.elapsed for s in scheds),
        avg_enabled_conventional=sum(counts) / n if n else 0.0,
        avg_renewable_share=sum(shares) / len(shares) if shares else 0.0,
    )


def run_window(case: GridCase, ts: TimeseriesSet, methods: Sequence[str],
               period_range: Tuple[int, int], stages: Optional[Sequence[RestorationStage]] = None,
               goal: GoalPortfolio = GoalPortfolio(), options: Optional[PowerFlowOptions] = None,
               window_name: Optional[str] = None, parallel: bool = False,
               milp_kwargs: Optional[dict] = None) -> BenchmarkReport:
    """Run each method sequentially over the periods of ``period_range`` (inclusive).

    Scenario construction happens up front and is not timed.  With
    ``stages`` the report carries one row per stage plus the window total.
    """
    lo, hi = period_range
    if lo > hi:
        raise ValueError(f"empty window {period_range}")
    ts.check_period(lo)
    ts.check_period(hi)
    methods = [METHOD_ALIASES.get(m.lower(), m) for m in methods]
    for m in methods:
        if m not in METHODS:
            raise ValueError(f"unknown method {m!r}")
    periods = list(range(lo, hi + 1))
    labels: Dict[int, str] = {}
    cases: Dict[int, GridCase] = {}
    for p in periods:
        stage = stage_for_period(stages, p) if stages else None
        labels[p] = stage.name if stage is not None else ""
        cases[p] = build_period_case(case, ts, p, goal, stage)

    report = BenchmarkReport()

    def run_method(method):
        fn = _runner(method)
        kwargs = dict(milp_kwargs or {}) if method == "MILP_UC" else {}
        prev = None
        out = []
        rankings = {}
        for p in periods:
            try:
                if method == "MILP_UC":
                    sched = fn(cases[p], p, prev, options, **kwargs)
                else:
                    t0 = time.perf_counter()
                    ranked = rank_units(cases[p], prev, options)
                    t_rank = time.perf_counter() - t0
                    sched = fn(cases[p], p, prev, options, ranked=ranked)
                    sched.elapsed += t_rank
                    rankings[p] = ranked
            except Exception as exc:  # recorded as not working, the run goes on
                logger.exception("%s failed at period %d", method, p)
                sched = _failed(p, method, cases[p], exc)
            out.append(sched)
            prev = sched
        return method, out, rankings

    if parallel and len(methods) > 1:
        logger.warning("methods run concurrently; elapsed times are not comparable")
        with ThreadPoolExecutor(max_workers=len(methods)) as pool:
            results = list(pool.map(run_method, methods))
    else:
        results = [run_method(m) for m in methods]

    name = window_name or f"{lo}-{hi}"
    for method, scheds, rankings in results:
        report.schedules[method] = scheds
        if rankings and (method == "USS" or not report.rankings):
            report.rankings = rankings
        if stages:
            seen = []
            for p in periods:
                if labels[p] not in seen:
                    seen.append(labels[p])
            for label in seen:
                part = [s for s in scheds if labels[s.period_index] == label]
                report.rows.append(summarize(method, label or "unstaged", cases, part))
        report.rows.append(summarize(method, name, cases, scheds))
    report.cases = cases
    return report


# -- windows ---------------------------------------------------------------

def month_window(month: int, year: int = 2020) -> Tuple[int, int]:
    import calendar
    import datetime as dt
    last = calendar.monthrange(year, month)[1]
    return period_index(dt.date(year, month, 1), 1), period_index(dt.date(year, month, last), 24)


def restoration_window() -> Tuple[int, int]:
    import datetime as dt
    return period_index(dt.date(2020, 1, 26), 1), period_index(dt.date(2020, 2, 8), 24)


# -- output ----------------------------------------------------------------

def _fmt(v):
    if isinstance(v, float):
        return f"{v:.10g}"
    return str(v)


def report_to_csv(report: BenchmarkReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REPORT_FIELDS)
    for r in report.rows:
        w.writerow([_fmt(getattr(r, f)) for f in REPORT_FIELDS])
    return buf.getvalue()


def report_to_json(report: BenchmarkReport) -> str:
    return json.dumps({"fields": list(REPORT_FIELDS),
                       "rows": [asdict(r) for r in report.rows]}, indent=1, sort_keys=True) + "\n"


def report_to_text(report: BenchmarkReport) -> str:
    """Fixed-width table: one block per window, one column per method."""
    labels = {
        "working": "working", "not_working": "not working",
        "total_elapsed": "total time [s]",
        "avg_enabled_conventional": "avg conventional units",
        "avg_renewable_share": "avg renewable share",
    }
    methods = []
    windows = []
    for r in report.rows:
        if r.method not in methods:
            methods.append(r.method)
        if r.window not in windows:
            windows.append(r.window)
    width = max([24] + [len(w) + 2 for w in windows])
    lines = ["window".ljust(width) + "metric".ljust(width)
             + "".join(m.rjust(12) for m in methods)]
    for win in windows:
        for key, label in labels.items():
            cells = []
            for m in methods:
                try:
                    v = getattr(report.row(m, win), key)
                except KeyError:
                    cells.append("-".rjust(12))
                    continue
                cells.append((f"{v:.3f}" if isinstance(v, float) else str(v)).rjust(12))
            lines.append(win.ljust(width) + label.ljust(width) + "".join(cells))
    return "\n".join(lines) + "\n"


def rows_from_csv(text: str) -> List[ReportRow]:
    rows = []
    for rec in csv.DictReader(io.StringIO(text)):
        rows.append(ReportRow(
            method=rec["method"], window=rec["window"], periods=int(rec["periods"]),
            working=int(rec["working"]), not_working=int(rec["not_working"]),
            total_elapsed=float(rec["total_elapsed"]),
            avg_enabled_conventional=float(rec["avg_enabled_conventional"]),
            avg_renewable_share=float(rec["avg_renewable_share"]),
        ))
    return rows


def rows_from_json(text: str) -> List[ReportRow]:
    return [ReportRow(**r) for r in json.loads(text)["rows"]]


def emit_report(report: BenchmarkReport, fmt: str, path) -> Path:
    writers = {"csv": report_to_csv, "json": report_to_json, "text": report_to_text,
               "txt": report_to_text}
    if fmt not in writers:
        raise ValueError(f"unknown report format {fmt!r}")
    path = Path(path)
    path.write_text(writers[fmt](report), encoding="utf-8")
    return path


def write_schedule_csv(sched: Schedule, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SCHEDULE_FIELDS)
        for uid in sorted(sched.unit_status):
            p, q = sched.setpoints.get(uid, (0.0, 0.0))
            w.writerow([uid, int(sched.unit_status[uid]), f"{p:.6f}", f"{q:.6f}",
                        sched.step_reached if sched.step_reached is not None else "",
                        int(sched.feasible), f"{sched.elapsed:.6f}"])


def write_outputs(report: BenchmarkReport, out_dir) -> Path:
    """``report.{csv,json,txt}``, ``schedules/<method>/<period>.csv``, ``gpwd/<period>.csv``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    emit_report(report, "csv", out / "report.csv")
    emit_report(report, "json", out / "report.json")
    emit_report(report, "text", out / "report.txt")
    for method, scheds in report.schedules.items():
        d = out / "schedules" / method
        d.mkdir(parents=True, exist_ok=True)
        for s in scheds:
            write_schedule_csv(s, d / f"{s.period_index}.csv")
    if report.rankings:
        d = out / "gpwd"
        d.mkdir(parents=True, exist_ok=True)
        for p, ranked in report.rankings.items():
            write_breakdown_csv(ranked, d / f"{p}.csv")
    return out
