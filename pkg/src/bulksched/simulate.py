"""Unit-level timing of a bulk schedule and task-level feasibility checks."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .dag import PlanDag, Task, TaskSet, expand_tasks, rational, rational_json
from .greedy import BulkSchedule, Violation, validate_bulk


class InvalidScheduleError(ValueError):
    def __init__(self, violations):
        self.violations = list(violations)
        lines = "; ".join(str(v) for v in self.violations[:5])
        super().__init__(f"{len(self.violations)} violation(s): {lines}")


@dataclass(frozen=True)
class ScheduledTask:
    op: int
    unit: int
    core: int
    start: Fraction
    end: Fraction


@dataclass(frozen=True)
class TaskSchedule:
    p: int
    tasks: tuple[ScheduledTask, ...]

    def by_task(self) -> dict[Task, ScheduledTask]:
        return {(t.op, t.unit): t for t in self.tasks}

    @property
    def start(self) -> dict[Task, Fraction]:
        return {(t.op, t.unit): t.start for t in self.tasks}

    @property
    def end(self) -> dict[Task, Fraction]:
        return {(t.op, t.unit): t.end for t in self.tasks}

    def to_dict(self) -> dict:
        return {
            "tasks": [
                {
                    "op": t.op,
                    "unit": t.unit,
                    "core": t.core,
                    "start": rational_json(t.start),
                    "end": rational_json(t.end),
                }
                for t in self.tasks
            ]
        }

    @classmethod
    def from_dict(cls, doc: dict, p: int) -> TaskSchedule:
        return cls(
            p,
            tuple(
                ScheduledTask(
                    int(t["op"]), int(t["unit"]), int(t["core"]), rational(t["start"]), rational(t["end"])
                )
                for t in doc["tasks"]
            ),
        )


def makespan(ts: TaskSchedule) -> Fraction:
    return max((t.end for t in ts.tasks), default=Fraction(0))


def realize(dag: PlanDag, sched: BulkSchedule) -> tuple[TaskSchedule, Fraction]:
    """Give every task of every batch a core and a start time.

    Batches run back to back. An operator's units are dealt round-robin
    over its cores and run in unit order; a unit also waits for the tasks
    it depends on, which lets an operator pipelined with its parent in the
    same batch trail it unit by unit.
    """
    problems = validate_bulk(dag, sched)
    if problems:
        raise InvalidScheduleError(problems)
    taskset = expand_tasks(dag)
    preds = taskset.predecessors()
    dur = taskset.durations()
    end: dict[Task, Fraction] = {}
    placed: list[ScheduledTask] = []
    clock = Fraction(0)
    for batch in sched.batches:
        free: dict[int, Fraction] = {}
        batch_end = clock
        for op_id, held in zip(batch.ops, batch.cores):
            for j in range(1, dag[op_id].units + 1):
                core = held[(j - 1) % len(held)]
                ready = max((end[t] for t in preds[(op_id, j)]), default=clock)
                start = max(free.get(core, clock), ready, clock)
                finish = start + dur[(op_id, j)]
                end[(op_id, j)] = finish
                free[core] = finish
                placed.append(ScheduledTask(op_id, j, core, start, finish))
                batch_end = max(batch_end, finish)
        clock = batch_end
    ts = TaskSchedule(sched.p, tuple(placed))
    return ts, makespan(ts)


def batch_durations(dag: PlanDag, sched: BulkSchedule) -> list[Fraction]:
    ts, _ = realize(dag, sched)
    ends = ts.end
    out = []
    clock = Fraction(0)
    for batch in sched.batches:
        stop = max(
            (ends[(o, j)] for o in batch.ops for j in range(1, dag[o].units + 1)), default=clock
        )
        out.append(stop - clock)
        clock = stop
    return out


def validate_tasks(dag: PlanDag, ts: TaskSchedule, taskset: TaskSet | None = None) -> list[Violation]:
    """Check dependency, duration, single-processor and no-overlap constraints."""
    taskset = taskset or expand_tasks(dag)
    dur = taskset.durations()
    out: list[Violation] = []
    seen: dict[Task, ScheduledTask] = {}
    for t in ts.tasks:
        key = (t.op, t.unit)
        if key not in dur:
            out.append(Violation("unknown-task", None, t.op, f"unit {t.unit} does not exist"))
            continue
        if key in seen:
            out.append(Violation("single-processor", None, t.op, f"unit {t.unit} placed twice"))
            continue
        seen[key] = t
        if not 0 <= t.core < ts.p:
            out.append(Violation("single-processor", None, t.op, f"unit {t.unit} on core {t.core}"))
        if t.end != t.start + dur[key]:
            out.append(Violation("non-preemptive", None, t.op, f"unit {t.unit}: end != start + duration"))
    for key in dur:
        if key not in seen:
            out.append(Violation("single-processor", None, key[0], f"unit {key[1]} never placed"))
    for before, after in sorted(taskset.dependency):
        if before in seen and after in seen and seen[after].start < seen[before].end:
            out.append(
                Violation(
                    "task-dependency",
                    None,
                    after[0],
                    f"unit {after[1]} starts before ({before[0]}, {before[1]}) ends",
                )
            )
    per_core: dict[int, list[ScheduledTask]] = {}
    for t in seen.values():
        per_core.setdefault(t.core, []).append(t)
    for core, items in per_core.items():
        items.sort(key=lambda t: (t.start, t.end))
        if not items:
            continue
        reach = items[0]  # earlier task reaching furthest right
        for b in items[1:]:
            a = reach
            if b.end > reach.end:
                reach = b
            if (b.start - a.end) * (b.end - a.start) < 0:
                out.append(
                    Violation(
                        "exclusive-access",
                        None,
                        b.op,
                        f"unit {b.unit} overlaps ({a.op}, {a.unit}) on core {core}",
                    )
                )
    return out
