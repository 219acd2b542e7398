"""Command-line entry point: ``gridprio {validate,schedule,benchmark,restore-sim}``.

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 solver failure.
"""
from __future__ import annotations

import argparse
import datetime as dt
import logging
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import List, Optional, Tuple

import yaml

from .bench import (
    METHOD_ALIASES, NORMAL_MONTHS, BenchmarkReport, month_window,
    restoration_window, run_window, write_outputs, write_schedule_csv,
)
from .ingest import (
    DATA_DIR, IngestError, RTS_GMLC_COUNTS, load_case, load_timeseries, period_date,
    structural_counts,
)
from .scenario import (
    GoalPortfolio, ScenarioError, build_period_case, load_stage_config, parse_stage_point,
    stage_for_period,
)
from .steady_state import PowerFlowOptions

logger = logging.getLogger("gridprio")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_SOLVER = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


@dataclass
class RunConfig:
    data_dir: Optional[str] = None
    output_dir: str = "gridprio_out"
    methods: List[str] = field(default_factory=lambda: ["uss", "milp", "mng"])
    window: Optional[Tuple[str, str]] = None
    stage_config: Optional[str] = None
    goal: dict = field(default_factory=dict)
    tol: float = 1e-8
    max_iter: int = 30
    gap_tol: float = 1e-6
    time_limit: float = 30.0
    enforce_ratings: bool = False
    parallel: bool = False
    report_format: str = "text"

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls(**data)
        cfg.validate()
        return cfg

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                data = yaml.safe_load(fh) or {}
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: top level must be a mapping")
        return cls.from_dict(data)

    def validate(self) -> None:
        if not self.methods:
            raise ConfigError("no methods selected")
        for m in self.methods:
            if m.lower() not in METHOD_ALIASES:
                raise ConfigError(f"unknown method {m!r}; choose from uss, milp, mng")
        if self.window is not None:
            if len(self.window) != 2:
                raise ConfigError("window needs a start and an end")
            lo, hi = self.period_range()
            if lo > hi:
                raise ConfigError(f"empty window {self.window}")
        try:
            self.goal_portfolio()
        except (TypeError, ScenarioError) as exc:
            raise ConfigError(f"goal: {exc}") from None
        if self.tol <= 0 or self.max_iter < 1 or self.gap_tol < 0 or self.time_limit <= 0:
            raise ConfigError("solver tolerances must be positive")
        if self.report_format not in ("csv", "json", "text"):
            raise ConfigError(f"unknown report format {self.report_format!r}")

    def period_range(self) -> Tuple[int, int]:
        try:
            return tuple(parse_period(w) for w in self.window)
        except ScenarioError as exc:
            raise ConfigError(str(exc)) from None

    def goal_portfolio(self) -> GoalPortfolio:
        return GoalPortfolio(**self.goal)

    def options(self, trace=None) -> PowerFlowOptions:
        return PowerFlowOptions(tol=self.tol, max_iter=self.max_iter,
                                enforce_ratings=self.enforce_ratings, trace=trace)

    def method_names(self) -> List[str]:
        return [METHOD_ALIASES[m.lower()] for m in self.methods]


def parse_period(text) -> int:
    """A period index, or a 'MM/DD TP-H' point."""
    if isinstance(text, int):
        return text
    s = str(text).strip()
    if s.isdigit():
        return int(s)
    return parse_stage_point(s)


def resolve_data_dir(path) -> Path:
    """A directory path, or the name of a bundled fixture."""
    if path is None:
        raise ConfigError("no data directory given (--data or data_dir in the config)")
    p = Path(path)
    if p.is_dir():
        return p
    bundled = DATA_DIR / str(path)
    if bundled.is_dir():
        return bundled
    raise IngestError(f"{path}: no such data directory or bundled fixture")


def _load(data_dir):
    d = resolve_data_dir(data_dir)
    case = load_case(d)
    return case, load_timeseries(d, case)


def _config(args) -> RunConfig:
    cfg = RunConfig.from_file(args.config) if args.config else RunConfig()
    # flags win over the file
    for name in ("data_dir", "output_dir", "stage_config", "report_format"):
        v = getattr(args, name, None)
        if v is not None:
            setattr(cfg, name, v)
    if getattr(args, "methods", None):
        cfg.methods = args.methods.split(",") if args.methods != "all" else ["uss", "milp", "mng"]
    if getattr(args, "window", None):
        cfg.window = tuple(args.window)
    if getattr(args, "parallel", False):
        cfg.parallel = True
    cfg.validate()
    return cfg


def _solver_failed(report: BenchmarkReport) -> bool:
    return any(n.startswith("error:") for scheds in report.schedules.values()
               for s in scheds for n in s.notes)


# -- commands --------------------------------------------------------------

def cmd_validate(args) -> int:
    d = resolve_data_dir(args.data_dir)
    case = load_case(d)
    ts = load_timeseries(d, case)
    counts = structural_counts(case, ts)
    print(f"{counts['buses']} buses, {counts['branches']} branches, "
          f"{counts['generators']} generators ({counts['conventional']} conventional + "
          f"{counts['renewable']} renewable), {counts['loads']} loads, "
          f"{counts['periods']} periods")
    mismatch = []
    for key, want in RTS_GMLC_COUNTS.items():
        got = counts[key]
        flag = "ok" if got == want else "differs"
        print(f"  {key:<13}{got:>6}   RTS-GMLC {want:>6}   {flag}")
        if got != want:
            mismatch.append(key)
    if mismatch and args.expect_rts:
        print(f"structure differs from RTS-GMLC in: {', '.join(mismatch)}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


def cmd_schedule(args) -> int:
    cfg = _config(args)
    try:
        period = parse_period(args.period)
    except ScenarioError as exc:
        raise ConfigError(str(exc)) from None
    case, ts = _load(cfg.data_dir)
    try:
        ts.check_period(period)
    except IndexError as exc:
        raise ConfigError(str(exc)) from None
    stages = load_stage_config(cfg.stage_config) if cfg.stage_config else None
    stage = stage_for_period(stages, period) if stages else None
    pcase = build_period_case(case, ts, period, cfg.goal_portfolio(), stage)
    from .bench import _runner, enabled_conventional
    out = Path(cfg.output_dir)
    failed = False
    with _trace(args) as trace:
        opts = cfg.options(trace)
        for method in cfg.method_names():
            fn = _runner(method)
            try:
                if method == "MILP_UC":
                    sched = fn(pcase, period, None, opts, gap_tol=cfg.gap_tol,
                               time_limit=cfg.time_limit, lp_dump_dir=args.lp_dump)
                else:
                    sched = fn(pcase, period, None, opts)
            except (ArithmeticError, RuntimeError, ValueError) as exc:
                print(f"{method}: solver failure: {exc}", file=sys.stderr)
                failed = True
                continue
            d = out / "schedules" / method
            d.mkdir(parents=True, exist_ok=True)
            write_schedule_csv(sched, d / f"{period}.csv")
            date, hour = period_date(period)
            print(f"{method} period {period} ({date:%m/%d} TP-{hour}): "
                  f"{'working' if sched.feasible else 'not working'}, "
                  f"{enabled_conventional(pcase, sched)} conventional units, "
                  f"renewable share {sched.renewable_share:.3f}, {sched.elapsed:.3f} s")
    return EXIT_SOLVER if failed else EXIT_OK


def _windows(cfg: RunConfig, restoration: bool):
    if cfg.window is not None:
        lo, hi = cfg.period_range()
        return [(f"{cfg.window[0]} - {cfg.window[1]}", (lo, hi))]
    if restoration:
        return [("restoration", restoration_window())]
    return [(dt.date(2020, m, 1).strftime("%B"), month_window(m)) for m in NORMAL_MONTHS]


def _benchmark(args, restoration: bool) -> int:
    cfg = _config(args)
    if restoration and cfg.stage_config is None:
        cfg.stage_config = str(DATA_DIR / "csz_stages.yaml")
    case, ts = _load(cfg.data_dir)
    stages = load_stage_config(cfg.stage_config) if cfg.stage_config else None
    merged = BenchmarkReport()
    milp_kwargs = {"gap_tol": cfg.gap_tol, "time_limit": cfg.time_limit,
                   "lp_dump_dir": args.lp_dump}
    with _trace(args) as trace:
        for name, rng in _windows(cfg, restoration):
            for p in rng:
                try:
                    ts.check_period(p)
                except IndexError as exc:
                    raise ConfigError(f"window {name}: {exc}") from None
            logger.info("window %s: periods %d-%d", name, *rng)
            rep = run_window(case, ts, cfg.method_names(), rng, stages=stages,
                             goal=cfg.goal_portfolio(), options=cfg.options(trace),
                             window_name=name, parallel=cfg.parallel, milp_kwargs=milp_kwargs)
            merged.rows.extend(rep.rows)
            for m, s in rep.schedules.items():
                merged.schedules.setdefault(m, []).extend(s)
            merged.rankings.update(rep.rankings)
    out = write_outputs(merged, cfg.output_dir)
    # all three formats are on disk; --format picks what goes to stdout
    ext = "txt" if cfg.report_format == "text" else cfg.report_format
    sys.stdout.write((out / f"report.{ext}").read_text(encoding="utf-8"))
    return EXIT_SOLVER if _solver_failed(merged) else EXIT_OK


def cmd_benchmark(args) -> int:
    return _benchmark(args, restoration=False)


def cmd_restore_sim(args) -> int:
    return _benchmark(args, restoration=True)


class _trace:
    def __init__(self, args):
        self.path = getattr(args, "trace", None)
        self.fh = None

    def __enter__(self):
        if self.path:
            self.fh = open(self.path, "w", encoding="utf-8")
        return self.fh

    def __exit__(self, *exc):
        if self.fh is not None:
            self.fh.close()
        return False


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="gridprio",
                description="GPWD-ranked generator scheduling (USS) with MILP UC and MNG baselines.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    v = sub.add_parser("validate", help="ingest a data directory and print structural counts")
    v.add_argument("data_dir", help="RTS-GMLC style directory or bundled fixture name")
    v.add_argument("--expect-rts", action="store_true",
                   help="exit 2 unless the counts equal the RTS-GMLC figures")
    v.set_defaults(func=cmd_validate)

    def common(sp):
        sp.add_argument("--config", help="YAML run configuration")
        sp.add_argument("--data", dest="data_dir", help="data directory or bundled fixture name")
        sp.add_argument("--out", dest="output_dir", help="output directory (default gridprio_out)")
        sp.add_argument("--methods", help="comma list of uss,milp,mng or 'all'")
        sp.add_argument("--stages", dest="stage_config", help="restoration stage YAML")
        sp.add_argument("--trace", help="write solver iteration dumps to this file")
        sp.add_argument("--lp-dump", help="directory for MILP instances in LP format")

    s = sub.add_parser("schedule", help="schedule a single period")
    common(s)
    s.add_argument("period", help="period index or 'MM/DD TP-H'")
    s.set_defaults(func=cmd_schedule)

    for name, fn, helptext in (
            ("benchmark", cmd_benchmark, "run the methods over windows and write reports"),
            ("restore-sim", cmd_restore_sim, "benchmark with the CSZ restoration stages")):
        b = sub.add_parser(name, help=helptext)
        common(b)
        b.add_argument("--window", nargs=2, metavar=("START", "END"),
                       help="period indices or 'MM/DD TP-H' points, inclusive")
        b.add_argument("--format", dest="report_format", choices=("csv", "json", "text"))
        b.add_argument("--parallel", action="store_true",
                       help="run methods concurrently (timings not comparable)")
        b.set_defaults(func=fn)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (IngestError, ScenarioError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
