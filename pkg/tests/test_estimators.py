import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from gridprio.estimators import (
    MILPUCScheduler, MNGScheduler, ScenarioBuilder, USSScheduler, check_periods,
)
from gridprio.scenario import GoalPortfolio, build_period_case
from gridprio.uss import run_uss


def test_check_periods(mini5):
    _, ts = mini5
    assert list(check_periods([1, 2.0, 48], ts)) == [1, 2, 48]
    assert check_periods(np.array([3]), ts).dtype.kind == "i"
    with pytest.raises(ValueError):
        check_periods([1.5], ts)
    with pytest.raises(ValueError):
        check_periods([], ts)
    with pytest.raises(IndexError):
        check_periods([0], ts)
    with pytest.raises(IndexError):
        check_periods([49], ts)


def test_params_and_clone():
    est = MILPUCScheduler(tol=1e-6, gap_tol=1e-4)
    params = est.get_params()
    assert params["tol"] == 1e-6 and params["gap_tol"] == 1e-4 and params["time_limit"] == 30.0
    c = clone(est)
    assert c.get_params() == params and c is not est
    est.set_params(max_iter=12)
    assert est.max_iter == 12


def test_unfitted_raises():
    with pytest.raises(NotFittedError):
        USSScheduler().predict([1])


def test_fit_checks_types(mini5):
    case, ts = mini5
    with pytest.raises(TypeError):
        USSScheduler().fit(ts, case)
    with pytest.raises(TypeError):
        ScenarioBuilder().fit(case, None)


def test_builder_matches_direct_call(mini5):
    case, ts = mini5
    cases = ScenarioBuilder().fit(case, ts).transform([7, 30])
    for p, pc in zip((7, 30), cases):
        direct = build_period_case(case, ts, p, GoalPortfolio())
        assert pc.meta["period"] == p
        assert [b.pd for b in pc.buses] == [b.pd for b in direct.buses]
        assert [g.pgmax for g in pc.generators] == [g.pgmax for g in direct.generators]


def test_uss_predict_chains_previous_schedule(mini5):
    case, ts = mini5
    est = USSScheduler().fit(case, ts)
    out = est.predict([5, 6, 7])
    assert [s.period_index for s in out] == [5, 6, 7]
    assert est.last_schedule_ is out[-1]
    # same as calling the scheduler by hand with the chained prior
    prev = None
    for p, s in zip((5, 6, 7), out):
        ref = run_uss(build_period_case(case, ts, p), p, prev, est._options())
        assert ref.unit_status == s.unit_status
        prev = ref


@pytest.mark.parametrize("cls", [USSScheduler, MNGScheduler, MILPUCScheduler])
def test_score_is_working_fraction(mini5, cls):
    case, ts = mini5
    est = cls().fit(case, ts)
    periods = [1, 12, 24]
    s = est.score(periods)
    assert 0.0 <= s <= 1.0
    assert s == pytest.approx(np.mean([x.feasible for x in est.predict(periods)]))
    assert all(x.method_tag == est.method for x in est.predict(periods))
