"""Physical-plan rewrites: partition/merge insertion, buffering cuts, and the
pipeline-versus-data-parallel core split."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from fractions import Fraction

from .dag import (
    BufferKind,
    Operator,
    ParaCapability,
    ParallelTag,
    PipeCapability,
    PlanDag,
    rational,
)


class TransformError(ValueError):
    pass


@dataclass(frozen=True)
class Transformed:
    dag: PlanDag
    id_map: dict[int, int]  # original operator id -> id in the rewritten plan


def _streamed_input(dag: PlanDag, op: Operator, cap_on: int | None) -> int | None:
    inputs = dag.parents(op.id)
    if len(inputs) == 1:
        return inputs[0]
    return cap_on


def insert_partition_merge(dag: PlanDag) -> Transformed:
    """Insert Partition/Merge steps around data-parallel (PR) operators.

    A PR operator always emits partitioned data. A PR operator needs its
    cap_on input partitioned and its other inputs whole; ST and EX
    operators need every input whole. Inserted nodes sit on the edge that
    needs them and take zero time.
    """
    inserted: dict[tuple[int, int], str] = {}
    for op in dag.operators:
        if op.synthetic:  # already a Partition or Merge step
            continue
        tag = op.parallel_tag
        inputs = dag.parents(op.id)
        if tag is ParallelTag.PR and len(inputs) > 1 and op.cap_on is None:
            raise TransformError(f"operator {op.id} is PR with {len(inputs)} inputs but no cap_on")
        for src in inputs:
            partitioned = dag[src].parallel_tag is ParallelTag.PR
            if tag is ParallelTag.PR and src == _streamed_input(dag, op, op.cap_on):
                if not partitioned:
                    inserted[(src, op.id)] = "partition"
            elif partitioned:
                inserted[(src, op.id)] = "merge"

    # renumber so that ids stay topological: a synthetic node goes right
    # before the operator it feeds
    id_map: dict[int, int] = {}
    synth_ids: dict[tuple[int, int], int] = {}
    next_id = 0
    for op in dag.operators:
        for src in dag.parents(op.id):
            if (src, op.id) in inserted:
                synth_ids[(src, op.id)] = next_id
                next_id += 1
        id_map[op.id] = next_id
        next_id += 1

    def new_input(src: int | None, dst: int) -> int | None:
        if src is None:
            return None
        return synth_ids.get((src, dst), id_map[src])

    ops: list[Operator] = []
    edges: list[tuple[int, int]] = []
    for (src, dst), kind in inserted.items():
        ops.append(
            Operator(
                id=synth_ids[(src, dst)],
                pipe=PipeCapability.B,
                para=ParaCapability.S,
                unit_time=Fraction(0),
                synthetic=kind,
                parallel=ParallelTag.PR if kind == "partition" else ParallelTag.ST,
            )
        )
        edges.append((id_map[src], synth_ids[(src, dst)]))
        edges.append((synth_ids[(src, dst)], id_map[dst]))
    for op in dag.operators:
        buf = op.buffer
        if buf is not None and buf.cap_on is not None:
            buf = replace(buf, cap_on=new_input(buf.cap_on, op.id))
        ops.append(replace(op, id=id_map[op.id], cap_on=new_input(op.cap_on, op.id), buffer=buf))
    for src, dst in dag.edges:
        if (src, dst) not in inserted:
            edges.append((id_map[src], id_map[dst]))
    return Transformed(PlanDag(tuple(ops), tuple(edges)), id_map)


@dataclass(frozen=True)
class BufferingPlan:
    cut: frozenset[tuple[int, int]]
    chains: tuple[tuple[int, ...], ...]


_NO_STREAM_OUT = (BufferKind.SI, BufferKind.B)
_NO_STREAM_IN = (BufferKind.SO, BufferKind.B)


def _cut_reason(dag: PlanDag, src: int, dst: int) -> str | None:
    a, b = dag[src].buffer, dag[dst].buffer
    if a is None or b is None:
        missing = src if a is None else dst
        raise TransformError(f"operator {missing} has no buffering capability")
    if a.kind in _NO_STREAM_OUT or b.kind in _NO_STREAM_IN:
        return "no-stream"
    if len(dag.parents(dst)) > 1 and b.cap_on != src:
        return "not-cap-on"
    if len(dag.children(src)) > 1:
        return "fan-out"
    return None


def buffering_cuts(dag: PlanDag) -> BufferingPlan:
    """Cut every edge that cannot carry a stream; what remains are chains."""
    cut = set()
    kept_next: dict[int, int] = {}
    has_prev: set[int] = set()
    for src, dst in dag.edges:
        if _cut_reason(dag, src, dst) is not None:
            cut.add((src, dst))
        else:
            kept_next[src] = dst
            has_prev.add(dst)
    chains = []
    for op_id in dag.ids:
        if op_id in has_prev:
            continue
        chain = [op_id]
        while chain[-1] in kept_next:
            chain.append(kept_next[chain[-1]])
        chains.append(tuple(chain))
    return BufferingPlan(frozenset(cut), tuple(chains))


@dataclass(frozen=True)
class PipelineAnalysis:
    n1: int
    data_parallel_time: Fraction  # T1
    pipeline_time: Fraction  # T2


def data_parallel_time(t1, t2, n: int, m: int, agg) -> Fraction:
    t1, t2, agg = rational(t1), rational(t2), rational(agg)
    return (t1 + t2) * m / n + agg * n


def pipeline_time(t1, t2, n: int, m: int, agg, n1: int) -> Fraction:
    """Two-stage pipeline with ``n1`` cores producing and ``n - n1`` consuming."""
    if not 1 <= n1 <= n - 1:
        raise ValueError("each stage needs at least one core")
    t1, t2, agg = rational(t1), rational(t2), rational(agg)
    return max(t1 * m / n1, t2 * m / (n - n1)) + agg * n1


def pipeline_vs_dp(t1, t2, n: int, m: int, agg=0) -> PipelineAnalysis:
    t1, t2, agg = rational(t1), rational(t2), rational(agg)
    if t1 <= 0 or t2 <= 0:
        raise ValueError("stage times must be positive")
    if n < 2 or m < 1 or agg < 0:
        raise ValueError("need n >= 2, m >= 1 and agg >= 0")
    rate_matched = t1 * n / (t1 + t2)
    n1 = min(max(math.floor(rate_matched + Fraction(1, 2)), 1), n - 1)
    return PipelineAnalysis(
        n1=n1,
        data_parallel_time=data_parallel_time(t1, t2, n, m, agg),
        pipeline_time=pipeline_time(t1, t2, n, m, agg, n1),
    )
