"""Exact minimum-makespan search over the unit-level task formulation.

Only meant for tiny instances (at most ``MAX_TASKS`` tasks). The search
builds semi-active schedules: tasks are appended one at a time, each
starting as soon as its core is free and its predecessors have ended.
Every optimal schedule can be left-shifted into that form, so exploring
all task orders and core choices finds an optimum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .dag import PlanDag, expand_tasks, total_tasks
from .greedy import schedule
from .simulate import ScheduledTask, TaskSchedule, realize, validate_tasks

MAX_TASKS = 10
DEFAULT_BUDGET = 2_000_000


class InstanceTooLarge(ValueError):
    pass


class BudgetExceeded(RuntimeError):
    """The node budget ran out; ``incumbent`` is the best found, not proven optimal."""

    def __init__(self, makespan: Fraction, incumbent: TaskSchedule, expanded: int):
        self.makespan = makespan
        self.incumbent = incumbent
        self.expanded = expanded
        super().__init__(
            f"budget exhausted after {expanded} expansions; best so far {makespan} (not proven optimal)"
        )


@dataclass(frozen=True)
class Audit:
    greedy: Fraction
    optimal: Fraction
    ratio: Fraction


class _Search:
    def __init__(self, dur, preds, succs, p, budget):
        self.n = len(dur)
        self.dur = dur
        self.preds = preds
        self.succs = succs
        self.p = p
        self.budget = budget
        self.expanded = 0
        self.tail = [0] * self.n
        for t in reversed(range(self.n)):  # tasks are in a topological order
            self.tail[t] = dur[t] + max((self.tail[s] for s in succs[t]), default=0)
        self.best = math.inf
        self.best_plan = None
        self.seen: dict = {}

    def list_schedule(self):
        start, end, core = [0] * self.n, [0] * self.n, [0] * self.n
        free = [0] * self.p
        for t in range(self.n):
            ready = max((end[q] for q in self.preds[t]), default=0)
            k = min(range(self.p), key=lambda c: (max(free[c], ready), c))
            start[t] = max(free[k], ready)
            end[t] = start[t] + self.dur[t]
            core[t] = k
            free[k] = end[t]
        self.best = max(end, default=0)
        self.best_plan = (start, core)

    def lower_bound(self, done_mask, end, free, current):
        lb = current
        min_free = min(free)
        est = {}
        remaining_work = 0
        for t in range(self.n):
            if done_mask >> t & 1:
                continue
            remaining_work += self.dur[t]
            s = min_free
            for q in self.preds[t]:
                s = max(s, end[q] if done_mask >> q & 1 else est[q] + self.dur[q])
            est[t] = s
            lb = max(lb, s + self.tail[t])
        # every core finishes no earlier than its free time plus its share of work
        lb = max(lb, -(-(sum(free) + remaining_work) // self.p))
        return lb

    def run(self):
        self.list_schedule()
        start, end, core = [0] * self.n, [0] * self.n, [0] * self.n
        waiting = [len(self.preds[t]) for t in range(self.n)]
        self._dfs(0, 0, start, end, core, [0] * self.p, waiting)

    def _dfs(self, done, current, start, end, core, free, waiting):
        if done == (1 << self.n) - 1:
            if current < self.best:
                self.best = current
                self.best_plan = (list(start), list(core))
            return
        self.expanded += 1
        if self.expanded > self.budget:
            raise _OutOfBudget
        if self.lower_bound(done, end, free, current) >= self.best:
            return
        live = tuple(
            end[t]
            for t in range(self.n)
            if done >> t & 1 and any(not done >> s & 1 for s in self.succs[t])
        )
        key = (done, tuple(sorted(free)), live)
        if self.seen.get(key, math.inf) <= current:
            return
        self.seen[key] = current
        for t in range(self.n):
            if done >> t & 1 or waiting[t]:
                continue
            ready = max((end[q] for q in self.preds[t]), default=0)
            options = {}
            fit = None
            for k in range(self.p):
                f = free[k]
                if f <= ready:
                    if fit is None or f > free[fit]:
                        fit = k
                elif f not in options:
                    options[f] = k
            choices = ([fit] if fit is not None else []) + sorted(options.values(), key=lambda k: free[k])
            for k in choices:
                s = max(free[k], ready)
                old_free = free[k]
                start[t], end[t], core[t] = s, s + self.dur[t], k
                free[k] = end[t]
                for c in self.succs[t]:
                    waiting[c] -= 1
                self._dfs(done | 1 << t, max(current, end[t]), start, end, core, free, waiting)
                for c in self.succs[t]:
                    waiting[c] += 1
                free[k] = old_free


class _OutOfBudget(Exception):
    pass


def optimal_makespan(
    dag: PlanDag, p: int, budget: int = DEFAULT_BUDGET
) -> tuple[Fraction, TaskSchedule]:
    """Provably optimal makespan and a schedule achieving it."""
    if p < 1:
        raise ValueError("core count must be >= 1")
    if budget <= 0:
        raise ValueError("budget must be positive")
    count = total_tasks(dag)
    if count > MAX_TASKS:
        raise InstanceTooLarge(f"{count} tasks exceeds the exact-search limit of {MAX_TASKS}")
    taskset = expand_tasks(dag)
    tasks = sorted(taskset.tasks(), key=lambda t: (t[0], t[1]))
    index = {t: i for i, t in enumerate(tasks)}
    durations = taskset.durations()
    scale = math.lcm(*(durations[t].denominator for t in tasks)) if tasks else 1
    dur = [int(durations[t] * scale) for t in tasks]
    preds = [[] for _ in tasks]
    succs = [[] for _ in tasks]
    for before, after in sorted(taskset.dependency):
        preds[index[after]].append(index[before])
        succs[index[before]].append(index[after])

    search = _Search(dur, preds, succs, p, budget)

    def plan_to_schedule(plan):
        starts, cores = plan
        return TaskSchedule(
            p,
            tuple(
                ScheduledTask(
                    op, j, cores[i], Fraction(starts[i], scale), Fraction(starts[i] + dur[i], scale)
                )
                for i, (op, j) in enumerate(tasks)
            ),
        )

    try:
        search.run()
    except _OutOfBudget:
        raise BudgetExceeded(
            Fraction(search.best, scale), plan_to_schedule(search.best_plan), search.expanded
        ) from None
    return Fraction(search.best, scale), plan_to_schedule(search.best_plan)


def audit_greedy(dag: PlanDag, p: int, budget: int = DEFAULT_BUDGET) -> Audit:
    """Compare the greedy schedule's makespan with the exact optimum."""
    optimal, best = optimal_makespan(dag, p, budget)
    greedy_ts, greedy = realize(dag, schedule(dag, p))
    for name, ts in (("greedy", greedy_ts), ("oracle", best)):
        problems = validate_tasks(dag, ts)
        if problems:
            raise AssertionError(f"{name} schedule infeasible: {problems[0]}")
    ratio = Fraction(1) if optimal == 0 else greedy / optimal
    return Audit(greedy, optimal, ratio)
