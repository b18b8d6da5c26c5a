"""Seeded random plan DAGs whose capabilities respect the operator invariants."""

from __future__ import annotations

import random
from fractions import Fraction

from .dag import (
    BufferCapability,
    BufferKind,
    Operator,
    ParaCapability,
    PipeCapability,
    PlanDag,
)

_PIPES = [PipeCapability.B, PipeCapability.P, PipeCapability.I, PipeCapability.O]
_PIPE_WEIGHTS = [3, 3, 2, 2]


def _unit_counts(pipe: PipeCapability, units: int) -> tuple[int, int]:
    """(input_units, output_units) consistent with the pipe class."""
    if pipe is PipeCapability.P:
        return units, units
    if pipe is PipeCapability.I:
        return units, 1
    if pipe is PipeCapability.O:
        return 1, units
    return 1, 1


def random_operator(
    rng: random.Random,
    op_id: int,
    parents: list[int],
    max_units: int = 4,
    pipe: PipeCapability | None = None,
) -> Operator:
    pipe = pipe or rng.choices(_PIPES, _PIPE_WEIGHTS)[0]
    if pipe in (PipeCapability.O, PipeCapability.B):
        para = ParaCapability.S
    else:
        para = rng.choice([ParaCapability.DP, ParaCapability.S])
    units = 1 if pipe is PipeCapability.B else rng.randint(1, max_units)
    unit_time = Fraction(rng.randint(1, 6), rng.choice([1, 1, 2, 3]))
    ins, outs = _unit_counts(pipe, units)
    cap_on = rng.choice(parents) if len(parents) > 1 else None
    kind = rng.choice(list(BufferKind))
    buf_cap = rng.choice(parents) if len(parents) > 1 else None
    return Operator(
        id=op_id,
        pipe=pipe,
        para=para,
        unit_time=unit_time,
        units=units,
        input_units=ins,
        output_units=outs,
        cap_on=cap_on,
        buffer=BufferCapability(kind, buf_cap),
    )


def random_dag(seed: int, n_ops: int, p_edge: float, max_units: int = 4) -> PlanDag:
    """Edges are drawn independently with probability ``p_edge`` over
    id-increasing pairs, so ids are topological by construction."""
    if n_ops < 1:
        raise ValueError("n_ops must be >= 1")
    if not 0 <= p_edge <= 1:
        raise ValueError("p_edge must lie in [0, 1]")
    rng = random.Random(seed)
    edges = [(i, j) for j in range(n_ops) for i in range(j) if rng.random() < p_edge]
    parents: dict[int, list[int]] = {j: [] for j in range(n_ops)}
    for i, j in edges:
        parents[j].append(i)
    ops = [random_operator(rng, j, parents[j], max_units) for j in range(n_ops)]
    return PlanDag(tuple(ops), tuple(edges))


def random_chain(seed: int, n_ops: int, max_units: int = 3) -> PlanDag:
    """A single path 0 -> 1 -> ... -> n-1 with random capabilities."""
    rng = random.Random(seed)
    ops = [random_operator(rng, j, [j - 1] if j else [], max_units) for j in range(n_ops)]
    return PlanDag(tuple(ops), tuple((j - 1, j) for j in range(1, n_ops)))


def independent_equal(n_ops: int, unit_time: Fraction = Fraction(1)) -> PlanDag:
    """``n_ops`` unconnected blocking operators of identical duration."""
    ops = [
        Operator(j, PipeCapability.B, ParaCapability.S, unit_time) for j in range(n_ops)
    ]
    return PlanDag(tuple(ops), ())
