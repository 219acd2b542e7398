"""Rapid generation prioritization for power-system restoration.

GPWD ranking and the Universal Selection Scheme, two baseline schedulers
(per-area MILP unit commitment, enable-and-try), the scenario pipeline for
an RTS-GMLC style system, and a benchmark harness.
"""
from .baselines import run_milp_uc, run_mng, solve_milp
from .bench import BenchmarkReport, emit_report, run_window
from .estimators import MILPUCScheduler, MNGScheduler, ScenarioBuilder, USSScheduler
from .gpwd import rank_units
from .grid import Branch, Bus, Generator, GridCase, Schedule
from .ingest import load_bundled, load_case, load_timeseries
from .scenario import GoalPortfolio, RestorationStage, build_period_case, load_stage_config
from .steady_state import PowerFlowOptions, economic_dispatch, opf_check, solve_power_flow
from .uss import run_uss

__version__ = "0.1.0"

__all__ = [
    "Branch", "BenchmarkReport", "Bus", "Generator", "GoalPortfolio", "GridCase",
    "MILPUCScheduler", "MNGScheduler", "PowerFlowOptions", "RestorationStage",
    "ScenarioBuilder", "Schedule", "USSScheduler", "build_period_case",
    "economic_dispatch", "emit_report", "load_bundled", "load_case", "load_stage_config",
    "load_timeseries", "opf_check", "rank_units", "run_milp_uc", "run_mng", "run_uss",
    "run_window", "solve_milp", "solve_power_flow",
]
