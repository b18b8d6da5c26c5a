"""Operator-level greedy scheduling: bulk assignment of cores in batches.

A batch ``X = (L, M)`` maps every core to at most one operator; an
operator may hold several cores. Batches run one after another. Inside a
batch, each remaining core goes either to the dominant operator (largest
amortized unit time) or to the head of a candidate segment, whichever is
estimated to save more time.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Iterable

from .dag import Operator, ParaCapability, PipeCapability, PlanDag
from .partition import Segmentation, segment_dag

log = logging.getLogger(__name__)


class SchedulingError(RuntimeError):
    """Internal-consistency failure of the scheduler (never tolerated)."""


class ConfigurationError(ValueError):
    """Operator metadata needed by a scheduling rule is missing."""


@dataclass(frozen=True)
class SingleBatchAssignment:
    ops: tuple[int, ...]
    cores: tuple[tuple[int, ...], ...]  # core indices held by ops[i]
    p: int

    @property
    def cores_per_op(self) -> tuple[int, ...]:
        return tuple(len(c) for c in self.cores)

    @property
    def matrix(self) -> list[list[int]]:
        """The p x l 0/1 matrix M; M[k][i] = 1 iff core k runs ops[i]."""
        m = [[0] * len(self.ops) for _ in range(self.p)]
        for i, held in enumerate(self.cores):
            for k in held:
                m[k][i] = 1
        return m


@dataclass(frozen=True)
class DominantState:
    unit_times: tuple[Fraction, ...]
    cores: tuple[int, ...]

    @property
    def amt(self) -> tuple[Fraction, ...]:
        return tuple(u / n for u, n in zip(self.unit_times, self.cores))

    @property
    def dom_index(self) -> int:
        amt = self.amt
        return max(range(len(amt)), key=lambda i: (amt[i], -i))

    @property
    def dom_time(self) -> Fraction:
        return max(self.amt)

    def with_extra_core(self, index: int) -> DominantState:
        cores = list(self.cores)
        cores[index] += 1
        return DominantState(self.unit_times, tuple(cores))

    @classmethod
    def of(cls, dag: PlanDag, ops: Iterable[int], cores: Iterable[int]) -> DominantState:
        return cls(tuple(dag[o].unit_time for o in ops), tuple(cores))


@dataclass(frozen=True)
class BulkSchedule:
    p: int
    batches: tuple[SingleBatchAssignment, ...]
    discarded: tuple[tuple[int, ...], ...]

    def to_dict(self) -> dict:
        return {
            "p": self.p,
            "batches": [
                {"ops": list(b.ops), "cores": [list(c) for c in b.cores]} for b in self.batches
            ],
            "discarded": [list(d) for d in self.discarded],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> BulkSchedule:
        p = int(doc["p"])
        batches = tuple(
            SingleBatchAssignment(
                tuple(int(o) for o in b["ops"]),
                tuple(tuple(int(k) for k in c) for c in b["cores"]),
                p,
            )
            for b in doc["batches"]
        )
        discarded = tuple(tuple(d) for d in doc.get("discarded", [[] for _ in batches]))
        return cls(p, batches, discarded)


# --------------------------------------------------------------------------
# scoring rules


def saved_time_unassigned(op: Operator, dom_time: Fraction, p: int) -> Fraction:
    """Time saved by giving ``op`` one core now instead of running it later
    in parallel on all ``p`` cores. Negative when ``op`` would become the
    new, slower dominant."""
    deferred = op.unit_time * op.units / p
    new_dom = max(dom_time, op.unit_time)
    return (op.units * dom_time + deferred) - op.units * new_dom


def saved_time_dominant(state: DominantState, op: Operator) -> Fraction:
    if op.para is not ParaCapability.DP:
        raise ValueError(f"operator {op.id} is serialized; it cannot take an extra core")
    after = state.with_extra_core(state.dom_index).dom_time
    return op.units * (state.dom_time - after)


def early_stop(op: Operator, dom_time: Fraction, p: int, p_remaining: int) -> bool:
    """True when even all ``p_remaining`` cores on ``op`` lose to deferring it."""
    if p_remaining < 1:
        raise ValueError("p_remaining must be >= 1")
    work = op.unit_time * op.units
    return (op.units * dom_time + work / p) - work / p_remaining < 0


class DchVerdict(str, Enum):
    ADMISSIBLE = "Admissible"
    PIPELINE_ADMISSIBLE = "PipelineAdmissible"
    DISCARD = "Discard"


def _dependency_verdict(
    dag: PlanDag, op_id: int, parents: Iterable[int], assigned, batch_l
) -> DchVerdict:
    unfinished = [p for p in parents if p not in assigned]
    if not unfinished:
        return DchVerdict.ADMISSIBLE
    if len(unfinished) == 1 and unfinished[0] in batch_l:
        op = dag[op_id]
        inputs = dag.parents(op_id)
        if op.cap_on is None and len(inputs) > 1:
            raise ConfigurationError(
                f"operator {op_id} has {len(inputs)} inputs but no cap_on; "
                "cannot decide whether it may pipeline"
            )
        streamed = op.cap_on if op.cap_on is not None else inputs[0]
        if streamed == unfinished[0] and op.pipe in (PipeCapability.P, PipeCapability.I):
            return DchVerdict.PIPELINE_ADMISSIBLE
    return DchVerdict.DISCARD


def execute_dch_rule(
    head: int, dcm: dict[int, frozenset[int]], assigned, batch_l, dag: PlanDag
) -> DchVerdict:
    """Execution/discard rule for a detached-chain head."""
    if head not in dcm:
        raise KeyError(f"operator {head} is not a detached-chain head")
    return _dependency_verdict(dag, head, sorted(dcm[head]), assigned, batch_l)


# --------------------------------------------------------------------------
# batch construction


class _Batch:
    def __init__(self, dag, dcm, work, assigned, p):
        self.dag = dag
        self.dcm = dcm
        self.work = work
        self.assigned = assigned
        self.p = p
        self.ops: list[int] = []
        self.cores: list[list[int]] = []
        self.next_core = 0
        self.discarded: list[int] = []

    def head(self, chain: int) -> int | None:
        segs = self.work[chain]
        if segs and segs[0]:
            return segs[0][0]
        return None

    def holders(self, op_id: int, exclude: int) -> list[int]:
        return [
            k
            for k, segs in enumerate(self.work)
            if k != exclude and any(op_id in s for s in segs)
        ]

    def discard(self, chain: int) -> None:
        self.work[chain] = []
        self.discarded.append(chain)

    def admit(self, chain: int) -> bool:
        op_id = self.head(chain)
        verdict = _dependency_verdict(
            self.dag, op_id, self.dag.parents(op_id), self.assigned, self.ops
        )
        if verdict is not DchVerdict.DISCARD:
            return True
        # a head may only be dropped while another chain can still run it;
        # otherwise the chain waits for a later batch
        if op_id in self.dcm and self.holders(op_id, chain):
            log.debug("discarding chain %d at detached head %d", chain, op_id)
            self.discard(chain)
        return False

    def grant(self, chain: int) -> int:
        op_id = self.work[chain][0].pop(0)
        if op_id in self.assigned or op_id in self.ops:
            raise SchedulingError(f"operator {op_id} would be scheduled twice")
        self.ops.append(op_id)
        self.cores.append([self.next_core])
        self.next_core += 1
        # the detached suffix starting here is no longer owed by other chains
        for k in self.holders(op_id, chain):
            self.discard(k)
        return op_id

    def candidates(self) -> list[int]:
        return [i for i in range(len(self.work)) if self.head(i) is not None]

    def result(self) -> SingleBatchAssignment:
        return SingleBatchAssignment(tuple(self.ops), tuple(tuple(c) for c in self.cores), self.p)


def single_batch_assignment(
    dag: PlanDag,
    dcm: dict[int, frozenset[int]],
    unfinished: list[list[list[int]]],
    assigned: set[int],
    p: int,
) -> tuple[SingleBatchAssignment, list[list[list[int]]], list[int]]:
    """Build one batch.

    ``unfinished[i]`` is the list of remaining segments of chain ``i``; its
    first segment is that chain's candidate. Returns the batch, the updated
    segment lists (a drained candidate segment is left empty) and the chain
    indices discarded during the batch.
    """
    work = [[list(s) for s in segs] for segs in unfinished]
    b = _Batch(dag, dcm, work, assigned, p)

    cands = b.candidates()
    if len(cands) > p:
        cands.sort(key=lambda i: (-dag[b.head(i)].duration, i))
    for i in cands:
        if b.next_core == p:
            break
        if b.head(i) is not None and b.admit(i):
            b.grant(i)
    if not b.ops:
        raise SchedulingError("no admissible operator at batch start")

    while b.next_core < p:
        state = DominantState.of(dag, b.ops, (len(c) for c in b.cores))
        dom_time = state.dom_time
        dom_op = dag[b.ops[state.dom_index]]
        scored = sorted(
            ((saved_time_unassigned(dag[b.head(i)], dom_time, p), i) for i in b.candidates()),
            key=lambda s: (-s[0], s[1]),
        )
        dom_saved = None
        if dom_op.para is ParaCapability.DP:
            dom_saved = saved_time_dominant(state, dom_op)

        chosen = None
        for saved, i in scored:
            if b.head(i) is None:
                continue
            if b.admit(i):
                chosen = (saved, i)
                break

        if dom_saved is not None and (chosen is None or dom_saved > chosen[0]):
            b.cores[state.dom_index].append(b.next_core)
            b.next_core += 1
            continue
        if chosen is None:
            break
        op = dag[b.head(chosen[1])]
        if early_stop(op, dom_time, p, p - b.next_core):
            break
        b.grant(chosen[1])

    return b.result(), work, b.discarded


def bulk_assignment(dag: PlanDag, seg: Segmentation, p: int) -> BulkSchedule:
    if p < 1:
        raise ValueError("core count must be >= 1")
    work = [[list(s.ops) for s in segs] for segs in seg.segments]
    assigned: set[int] = set()
    batches: list[SingleBatchAssignment] = []
    discarded: list[tuple[int, ...]] = []
    while any(work):
        batch, work, dropped = single_batch_assignment(dag, seg.dcm, work, assigned, p)
        if len(batches) > len(dag):
            raise SchedulingError("bulk assignment did not converge")
        assigned.update(batch.ops)
        for segs in work:
            if segs and not segs[0]:
                segs.pop(0)
        batches.append(batch)
        discarded.append(tuple(dropped))
    missing = set(dag.ids) - assigned
    if missing:
        raise SchedulingError(f"operators never scheduled: {sorted(missing)}")
    return BulkSchedule(p, tuple(batches), tuple(discarded))


def schedule(dag: PlanDag, p: int) -> BulkSchedule:
    return bulk_assignment(dag, segment_dag(dag), p)


# --------------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class Violation:
    rule: str
    batch: int | None
    op: int | None
    detail: str

    def __str__(self) -> str:
        where = []
        if self.batch is not None:
            where.append(f"batch {self.batch}")
        if self.op is not None:
            where.append(f"op {self.op}")
        return f"{self.rule} ({', '.join(where)}): {self.detail}"


def validate_bulk(dag: PlanDag, sched: BulkSchedule) -> list[Violation]:
    """Check indivisibility, dependency and per-batch core-use rules."""
    out: list[Violation] = []
    where: dict[int, int] = {}
    for k, batch in enumerate(sched.batches):
        if len(batch.ops) != len(batch.cores):
            out.append(Violation("shape", k, None, "ops and core lists differ in length"))
            continue
        used: set[int] = set()
        for op_id, held in zip(batch.ops, batch.cores):
            if op_id not in dag:
                out.append(Violation("unknown-op", k, op_id, "not in the DAG"))
                continue
            if op_id in where:
                out.append(
                    Violation("indivisibility", k, op_id, f"already scheduled in batch {where[op_id]}")
                )
            else:
                where[op_id] = k
            if not held:
                out.append(Violation("cores", k, op_id, "operator holds no core"))
            if len(held) > 1 and dag[op_id].para is ParaCapability.S:
                out.append(Violation("cores", k, op_id, f"serialized operator holds {len(held)} cores"))
            for core in held:
                if not 0 <= core < sched.p:
                    out.append(Violation("cores", k, op_id, f"core {core} outside [0, {sched.p})"))
                elif core in used:
                    out.append(Violation("cores", k, op_id, f"core {core} runs two operators"))
                used.add(core)
    for op_id in dag.ids:
        if op_id not in where:
            out.append(Violation("indivisibility", None, op_id, "never scheduled"))
    for k, batch in enumerate(sched.batches):
        for pos, op_id in enumerate(batch.ops):
            if op_id not in dag or where.get(op_id) != k:
                continue
            earlier = batch.ops[:pos]
            same: list[int] = []
            for parent in dag.parents(op_id):
                pk = where.get(parent)
                if pk is None or pk > k:
                    out.append(Violation("dependency", k, op_id, f"parent {parent} runs later"))
                elif pk == k:
                    same.append(parent)
            if not same:
                continue
            if len(same) > 1 or same[0] not in earlier:
                out.append(
                    Violation("dependency", k, op_id, f"co-scheduled parents {same} cannot pipeline")
                )
                continue
            op = dag[op_id]
            inputs = dag.parents(op_id)
            streamed = op.cap_on if op.cap_on is not None else (inputs[0] if len(inputs) == 1 else None)
            if streamed != same[0] or op.pipe not in (PipeCapability.P, PipeCapability.I):
                out.append(
                    Violation("dependency", k, op_id, f"cannot stream from co-scheduled parent {same[0]}")
                )
    return out
