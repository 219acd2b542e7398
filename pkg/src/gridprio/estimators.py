"""scikit-learn style wrappers around scenario construction and the schedulers.

``fit`` binds the static case and its timeseries; ``transform``/``predict``
take a 1-D array of period indices.  Hyperparameters live in ``__init__``
so ``get_params``/``set_params``/``clone`` work as usual.
"""
from __future__ import annotations

from typing import List, Optional

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils import check_array
from sklearn.utils.validation import check_is_fitted

from .grid import GridCase, Schedule
from .ingest import TimeseriesSet
from .scenario import GoalPortfolio, build_period_case, load_stage_config, stage_for_period
from .steady_state import PowerFlowOptions


def check_periods(periods, ts: TimeseriesSet) -> np.ndarray:
    """1-D int array of period indices, each inside the timeseries."""
    arr = check_array(np.asarray(periods).reshape(-1, 1), dtype=None, ensure_2d=True,
                      ensure_min_samples=1).ravel()
    if not np.all(np.equal(np.mod(arr, 1), 0)):
        raise ValueError("period indices must be integers")
    arr = arr.astype(int)
    for p in arr:
        ts.check_period(int(p))
    return arr


def _check_inputs(case, ts):
    if not isinstance(case, GridCase):
        raise TypeError(f"expected a GridCase, got {type(case).__name__}")
    if not isinstance(ts, TimeseriesSet):
        raise TypeError(f"expected a TimeseriesSet, got {type(ts).__name__}")


class ScenarioBuilder(TransformerMixin, BaseEstimator):
    """Turns period indices into per-period cases."""

    def __init__(self, goal: Optional[GoalPortfolio] = None, stage_config=None):
        self.goal = goal
        self.stage_config = stage_config

    def fit(self, case, ts=None):
        _check_inputs(case, ts)
        self.case_ = case
        self.ts_ = ts
        self.stages_ = load_stage_config(self.stage_config) if self.stage_config else None
        self.goal_ = self.goal or GoalPortfolio()
        return self

    def transform(self, periods) -> List[GridCase]:
        check_is_fitted(self, "case_")
        out = []
        for p in check_periods(periods, self.ts_):
            stage = stage_for_period(self.stages_, p) if self.stages_ else None
            out.append(build_period_case(self.case_, self.ts_, int(p), self.goal_, stage))
        return out


class _SchedulerBase(BaseEstimator):
    method = ""

    def fit(self, case, ts=None):
        _check_inputs(case, ts)
        self.builder_ = ScenarioBuilder(self.goal, self.stage_config).fit(case, ts)
        self.last_schedule_ = None
        return self

    def _options(self):
        return PowerFlowOptions(tol=self.tol, max_iter=self.max_iter)

    def _run(self, case, period, prev):
        raise NotImplementedError

    def predict(self, periods) -> List[Schedule]:
        """Schedules for ``periods`` in order; each one sees its predecessor."""
        check_is_fitted(self, "builder_")
        cases = self.builder_.transform(periods)
        prev = None
        out = []
        for case in cases:
            sched = self._run(case, case.meta["period"], prev)
            out.append(sched)
            prev = sched
        self.last_schedule_ = prev
        return out

    def score(self, periods, y=None) -> float:
        """Fraction of periods with a working schedule."""
        scheds = self.predict(periods)
        return float(np.mean([s.feasible for s in scheds]))


class USSScheduler(_SchedulerBase):
    method = "USS"

    def __init__(self, goal=None, stage_config=None, tol=1e-8, max_iter=30):
        self.goal = goal
        self.stage_config = stage_config
        self.tol = tol
        self.max_iter = max_iter

    def _run(self, case, period, prev):
        from .uss import run_uss
        return run_uss(case, period, prev, self._options())


class MNGScheduler(_SchedulerBase):
    method = "MNG"

    def __init__(self, goal=None, stage_config=None, tol=1e-8, max_iter=30):
        self.goal = goal
        self.stage_config = stage_config
        self.tol = tol
        self.max_iter = max_iter

    def _run(self, case, period, prev):
        from .baselines import run_mng
        return run_mng(case, period, prev, self._options())


class MILPUCScheduler(_SchedulerBase):
    method = "MILP_UC"

    def __init__(self, goal=None, stage_config=None, tol=1e-8, max_iter=30,
                 gap_tol=1e-6, time_limit=30.0):
        self.goal = goal
        self.stage_config = stage_config
        self.tol = tol
        self.max_iter = max_iter
        self.gap_tol = gap_tol
        self.time_limit = time_limit

    def _run(self, case, period, prev):
        from .baselines import run_milp_uc
        return run_milp_uc(case, period, prev, self._options(),
                           gap_tol=self.gap_tol, time_limit=self.time_limit)
