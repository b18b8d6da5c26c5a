"""Chain and segment partitioning of a plan DAG."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .dag import PipeCapability, PlanDag

P, I, O, B = PipeCapability.P, PipeCapability.I, PipeCapability.O, PipeCapability.B


@dataclass(frozen=True)
class Chain:
    index: int
    ops: tuple[int, ...]


class SegmentKind(str, Enum):
    SINGLE = "SingleOperator"
    SCHEDULEABLE = "Scheduleable"


@dataclass(frozen=True)
class Segment:
    kind: SegmentKind
    ops: tuple[int, ...]


@dataclass(frozen=True)
class Segmentation:
    chains: tuple[Chain, ...]
    dcm: dict[int, frozenset[int]]
    segments: tuple[tuple[Segment, ...], ...]

    def to_dict(self) -> dict:
        return {
            "chains": [list(c.ops) for c in self.chains],
            "dcm": {str(head): sorted(parents) for head, parents in sorted(self.dcm.items())},
            "segments": [[list(s.ops) for s in segs] for segs in self.segments],
        }


def partition_chains(dag: PlanDag) -> tuple[list[Chain], dict[int, frozenset[int]]]:
    """Split ``dag`` into chains, following unique children in id order.

    A child with several parents is a detached-chain head: the chain keeps
    going through it, so its suffix is shared by every chain that reaches
    it. The returned map sends each head to its full parent set.
    """
    placed: set[int] = set()
    chains: list[Chain] = []
    dcm: dict[int, set[int]] = {}
    for start in dag.ids:
        if start in placed:
            continue
        op = start
        ops = [op]
        placed.add(op)
        found_head = False
        while len(dag.children(op)) == 1:
            child = dag.children(op)[0]
            if len(dag.parents(child)) > 1:
                entry = dcm.setdefault(child, set())
                if not found_head:
                    found_head = True
                    entry.add(op)
            op = child
            ops.append(op)
            placed.add(op)
        chains.append(Chain(len(chains), tuple(ops)))
    # one traversal records one predecessor; the execution rule needs them all
    full = {head: frozenset(dag.parents(head)) for head in dcm}
    return chains, full


def _segments_of(chain: Chain, dag: PlanDag) -> tuple[Segment, ...]:
    ops = chain.ops
    segments = []
    start = 0
    while start < len(ops):
        end = start + 1
        if dag[ops[start]].pipe not in (B, I):
            while end < len(ops) and dag[ops[end]].pipe is P:
                end += 1
            if end < len(ops) and dag[ops[end]].pipe is I:
                end += 1
        part = tuple(ops[start:end])
        kind = SegmentKind.SCHEDULEABLE if len(part) > 1 else SegmentKind.SINGLE
        segments.append(Segment(kind, part))
        start = end
    return tuple(segments)


def partition_segments(chains: list[Chain], dag: PlanDag, dcm: dict | None = None) -> Segmentation:
    if dcm is None:
        dcm = partition_chains(dag)[1]
    return Segmentation(
        chains=tuple(chains),
        dcm=dict(dcm),
        segments=tuple(_segments_of(c, dag) for c in chains),
    )


def segment_dag(dag: PlanDag) -> Segmentation:
    chains, dcm = partition_chains(dag)
    return partition_segments(chains, dag, dcm)


def matches_pipeline_pattern(pipes: list[PipeCapability]) -> bool:
    """``(P|O) P* (P|I)`` on a capability sequence."""
    if len(pipes) < 2:
        return False
    return pipes[0] in (P, O) and pipes[-1] in (P, I) and all(x is P for x in pipes[1:-1])
