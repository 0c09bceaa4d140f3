import math
import warnings

import pytest
from hypothesis import given, settings, strategies as st

from ccsp.methods import RunRecord
from ccsp.report import build_report, deviation, deviations_csv, profile_csv, profile_points, read_records


def rec(instance, method, ub, lb=None):
    return RunRecord(instance, method, ub, lb, 0.1, 0)


def test_hand_computed_pair():
    assert deviation(100, 100) == 0.0
    assert deviation(104, 100) == (104 - 100) / 104 * 100
    assert deviation(104, 100) == pytest.approx(3.846153846, abs=1e-9)
    assert deviation(0, 0) == 0.0
    with pytest.raises(ValueError):
        deviation(100, 104)


def test_single_method_has_zero_deviation():
    report = build_report([rec("a", "brkga", 10.0), rec("b", "brkga", 7.0)])
    assert {r.deviation for r in report.rows} == {0.0}
    assert report.profile["brkga"][-1][1] == 1.0


def test_best_per_instance_and_duplicates():
    recs = [rec("a", "brkga", 104.0), rec("a", "matheuristic", 100.0), rec("a", "brkga", 106.0)]
    report = build_report(recs)
    rows = {r.method: r for r in report.rows}
    assert rows["brkga"].upper_bound == 104.0
    assert rows["matheuristic"].deviation == 0.0
    assert rows["brkga"].deviation == pytest.approx(3.846153846)


def test_missing_upper_bound_is_skipped_with_warning():
    with pytest.warns(UserWarning, match="no valid upper bound"):
        report = build_report([rec("a", "ccsp1", None), rec("a", "brkga", 5.0)])
    assert [r.method for r in report.rows] == ["brkga"]


def test_record_bounds_must_be_ordered():
    with pytest.raises(ValueError):
        rec("a", "ccsp1", 5.0, 6.0)
    with pytest.raises(ValueError):
        rec("a", "unknown", 5.0)


def test_record_json_round_trip():
    r = RunRecord("a", "ccsp1", 12.5, float("-inf"), 3.0, 7, {"x": 1}, "limit", {"gap": 0.1})
    back = RunRecord.from_json(r.to_json())
    assert back.lower_bound is None and back.upper_bound == 12.5 and back.params == {"x": 1}
    assert read_records([r.to_json(), "", r.to_json()])[1].status == "limit"


ub = st.floats(1, 1000, allow_nan=False)


@settings(max_examples=100, deadline=None)
@given(st.dictionaries(st.sampled_from("abcdef"), st.tuples(ub, ub, ub), min_size=1))
def test_profiles_are_cdfs(table):
    methods = ("brkga", "matheuristic", "ccsp1")
    recs = [rec(i, m, u) for i, ubs in table.items() for m, u in zip(methods, ubs)]
    report = build_report(recs)
    assert all(r.deviation >= 0 for r in report.rows)
    for i in table:
        assert min(r.deviation for r in report.rows if r.instance == i) == 0.0
    for pts in report.profile.values():
        ts = [t for t, _ in pts]
        fs = [f for _, f in pts]
        assert ts == sorted(ts)
        assert fs == sorted(fs) and all(0 <= f <= 1 for f in fs)
        assert fs[-1] == 1.0


def test_profile_denominator_counts_all_instances():
    # matheuristic only ran on one of two instances, so it tops out at 1/2
    report = build_report([rec("a", "brkga", 10.0), rec("b", "brkga", 10.0), rec("a", "matheuristic", 9.0)])
    assert report.profile["matheuristic"][-1][1] == 0.5
    assert profile_points([0.0, 2.0], [0.0, 1.0, 2.0], 4) == [(0.0, 0.25), (1.0, 0.25), (2.0, 0.5)]


def test_csv_columns():
    report = build_report([rec("a", "brkga", 104.0), rec("a", "matheuristic", 100.0)])
    dev = deviations_csv(report).splitlines()
    assert dev[0] == "instance,method,upper_bound,best_upper_bound,deviation_pct"
    assert len(dev) == 3
    prof = profile_csv(report).splitlines()
    assert prof[0] == "method,threshold_pct,fraction_solved"
    assert "matheuristic,0.0,1.0" in prof
