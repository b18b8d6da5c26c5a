from fractions import Fraction as F

import pytest
from builders import dag, op
from hypothesis import given, settings, strategies as st

from bulksched.dag import serial_makespan
from bulksched.generate import random_dag
from bulksched.greedy import BulkSchedule, SingleBatchAssignment, schedule
from bulksched.simulate import (
    InvalidScheduleError,
    ScheduledTask,
    TaskSchedule,
    batch_durations,
    makespan,
    realize,
    validate_tasks,
)


def hand(p, *batches):
    return BulkSchedule(
        p,
        tuple(SingleBatchAssignment(tuple(o), tuple(tuple(c) for c in cs), p) for o, cs in batches),
        tuple(() for _ in batches),
    )


def dp(i, units, t=1):
    return op(i, "P", "DP", t, units)


def test_batch_duration_is_busiest_core():
    d = dag([dp(0, 2), dp(1, 3)])
    ts, span = realize(d, hand(2, ([0, 1], [[0], [1]])))
    assert span == 3
    assert ts.end[(0, 2)] == 2


def test_round_robin_split():
    d = dag([dp(0, 4)])
    ts, span = realize(d, hand(2, ([0], [[0, 1]])))
    assert span == 2
    assert [t.core for t in ts.tasks] == [0, 1, 0, 1]
    assert [t.start for t in ts.tasks] == [0, 0, 1, 1]


def test_batches_run_back_to_back():
    d = dag([dp(0, 2), dp(1, 3), dp(2, 4)])
    sched = hand(2, ([0, 1], [[0], [1]]), ([2], [[0, 1]]))
    ts, span = realize(d, sched)
    assert batch_durations(d, sched) == [3, 2]
    assert span == 5
    assert min(t.start for t in ts.tasks if t.op == 2) == 3


def test_pipelined_child_trails_its_parent():
    # child unit j waits for parent unit j inside the same batch
    d = dag([dp(0, 3), dp(1, 3)], [(0, 1)])
    ts, span = realize(d, hand(2, ([0, 1], [[0], [1]])))
    assert [ts.start[(1, j)] for j in (1, 2, 3)] == [1, 2, 3]
    assert span == 4
    assert validate_tasks(d, ts) == []


def test_realize_rejects_invalid_bulk():
    d = dag([op(0), op(1)], [(0, 1)])
    with pytest.raises(InvalidScheduleError) as err:
        realize(d, hand(1, ([1], [[0]]), ([0], [[0]])))
    assert err.value.violations[0].rule == "dependency"


def task(o, u, core, start, end):
    return ScheduledTask(o, u, core, F(start), F(end))


def test_overlap_on_one_core_detected():
    d = dag([op(0), op(1)])
    ts = TaskSchedule(1, (task(0, 1, 0, 0, 1), task(1, 1, 0, 0, 1)))
    assert [v.rule for v in validate_tasks(d, ts)] == ["exclusive-access"]


def test_overlap_hidden_behind_long_task_detected():
    d = dag([op(0, t=10), op(1), op(2)])
    ts = TaskSchedule(1, (task(0, 1, 0, 0, 10), task(1, 1, 0, 1, 2), task(2, 1, 0, 3, 4)))
    assert [v.rule for v in validate_tasks(d, ts)] == ["exclusive-access"] * 2


def test_child_before_parent_detected():
    d = dag([op(0), op(1)], [(0, 1)])
    ts = TaskSchedule(2, (task(0, 1, 0, 0, 1), task(1, 1, 1, F(1, 2), F(3, 2))))
    assert [v.rule for v in validate_tasks(d, ts)] == ["task-dependency"]


def test_duration_core_and_coverage_checks():
    d = dag([op(0, t=2), op(1)])
    ts = TaskSchedule(1, (task(0, 1, 3, 0, 1), task(0, 1, 0, 5, 7), task(0, 2, 0, 1, 2)))
    rules = sorted(v.rule for v in validate_tasks(d, ts))
    assert rules == ["non-preemptive", "single-processor", "single-processor", "single-processor", "unknown-task"]


def test_makespan_examples():
    assert makespan(TaskSchedule(1, (task(0, 1, 0, 0, 3),))) == 3
    assert makespan(TaskSchedule(1, ())) == 0
    assert makespan(TaskSchedule(2, (task(0, 1, 0, 0, 2), task(1, 1, 1, 0, 5)))) == 5


def test_gantt_json_round_trip():
    d = dag([dp(0, 3, F(1, 3))])
    ts, _ = realize(d, hand(2, ([0], [[0, 1]])))
    doc = ts.to_dict()
    assert doc["tasks"][0] == {
        "op": 0,
        "unit": 1,
        "core": 0,
        "start": {"num": 0, "den": 1},
        "end": {"num": 1, "den": 3},
    }
    assert TaskSchedule.from_dict(doc, 2) == ts


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 20), st.sampled_from([0.1, 0.3, 0.6]), st.sampled_from([1, 2, 4, 8]))
def test_realized_greedy_is_feasible_and_beats_serial(seed, n, p_edge, p):
    d = random_dag(seed, n, p_edge)
    ts, span = realize(d, schedule(d, p))
    assert validate_tasks(d, ts) == []
    assert span <= serial_makespan(d)
    assert span == makespan(ts)


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 24), st.integers(1, 8), st.fractions(min_value=F(1, 4), max_value=5, max_denominator=4))
def test_more_cores_never_slow_a_single_dp_batch(units, cores, t):
    d = dag([dp(0, units, t)])
    spans = [realize(d, hand(cores, ([0], [list(range(n))])))[1] for n in range(1, cores + 1)]
    assert all(a >= b for a, b in zip(spans, spans[1:]))
