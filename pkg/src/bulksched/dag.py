"""Operator DAG model, JSON I/O and the unit-level task expansion.

An operator processes ``units`` execution units, each taking ``unit_time``
seconds. Times are kept as :class:`fractions.Fraction` so that every
comparison made by the schedulers is exact.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from graphlib import CycleError, TopologicalSorter
from typing import Mapping

import jsonschema


class DagValidationError(ValueError):
    """A plan DAG (or one of its operators) breaks a model invariant."""


class PipeCapability(str, Enum):
    I = "I"  # input pipeline-able: streams input, releases result at the end
    O = "O"  # output pipeline-able: whole input, streams output
    B = "B"  # blocking
    P = "P"  # pipeline-able on both sides


class ParaCapability(str, Enum):
    DP = "DP"
    S = "S"


class ParallelTag(str, Enum):
    """Data-parallel tag used by the partition/merge transform."""

    PR = "PR"
    ST = "ST"
    EX = "EX"


class BufferKind(str, Enum):
    SI = "SI"
    SO = "SO"
    B = "B"
    SS = "SS"


@dataclass(frozen=True)
class BufferCapability:
    kind: BufferKind
    cap_on: int | None = None


SYNTHETIC_KINDS = ("partition", "merge")


def rational(value) -> Fraction:
    """Coerce ints, Fractions, ``"3/2"`` strings or ``{"num", "den"}`` dicts."""
    if isinstance(value, Mapping):
        return Fraction(int(value["num"]), int(value["den"]))
    if isinstance(value, float):
        return Fraction(value).limit_denominator(10**9)
    return Fraction(value)


def rational_json(value: Fraction) -> dict:
    value = Fraction(value)
    return {"num": value.numerator, "den": value.denominator}


@dataclass(frozen=True)
class Operator:
    id: int
    pipe: PipeCapability
    para: ParaCapability
    unit_time: Fraction
    units: int = 1
    input_units: int = 1
    output_units: int = 1
    cap_on: int | None = None
    parallel: ParallelTag | None = None
    buffer: BufferCapability | None = None
    synthetic: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "pipe", PipeCapability(self.pipe))
        object.__setattr__(self, "para", ParaCapability(self.para))
        object.__setattr__(self, "unit_time", rational(self.unit_time))
        if self.parallel is not None:
            object.__setattr__(self, "parallel", ParallelTag(self.parallel))
        self._check()

    def _check(self) -> None:
        where = f"operator {self.id}"
        if self.id < 0:
            raise DagValidationError(f"{where}: id must be non-negative")
        if self.synthetic is not None:
            if self.synthetic not in SYNTHETIC_KINDS:
                raise DagValidationError(f"{where}: unknown synthetic kind {self.synthetic!r}")
            if self.unit_time < 0:
                raise DagValidationError(f"{where}: unit_time must be >= 0")
        elif self.unit_time <= 0:
            raise DagValidationError(f"{where}: unit_time must be > 0")
        if min(self.units, self.input_units, self.output_units) < 1:
            raise DagValidationError(f"{where}: unit counts must be >= 1")
        if self.pipe in (PipeCapability.O, PipeCapability.B) and self.input_units != 1:
            raise DagValidationError(f"{where}: pipe {self.pipe.value} requires input_units = 1")
        if self.pipe in (PipeCapability.I, PipeCapability.B) and self.output_units != 1:
            raise DagValidationError(f"{where}: pipe {self.pipe.value} requires output_units = 1")
        if self.pipe in (PipeCapability.O, PipeCapability.B) and self.para is not ParaCapability.S:
            raise DagValidationError(
                f"{where}: pipe {self.pipe.value} implies para S (input cannot be partitioned)"
            )
        if self.pipe is PipeCapability.B and self.units != 1:
            raise DagValidationError(f"{where}: blocking operator must have units = 1")

    @property
    def duration(self) -> Fraction:
        return self.units * self.unit_time

    @property
    def parallel_tag(self) -> ParallelTag:
        if self.parallel is not None:
            return self.parallel
        return ParallelTag.PR if self.para is ParaCapability.DP else ParallelTag.ST


@dataclass(frozen=True)
class PlanDag:
    """Operators plus directed dependency edges.

    Operator ids must already be a topological numbering (every edge goes
    from a smaller id to a larger one); the chain partitioner relies on it.
    """

    operators: tuple[Operator, ...]
    edges: tuple[tuple[int, int], ...] = ()
    _index: dict = field(init=False, repr=False, compare=False)
    _parents: dict = field(init=False, repr=False, compare=False)
    _children: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        ops = tuple(sorted(self.operators, key=lambda op: op.id))
        object.__setattr__(self, "operators", ops)
        index = {}
        for op in ops:
            if op.id in index:
                raise DagValidationError(f"duplicate operator id {op.id}")
            index[op.id] = op
        edge_list = [(int(s), int(d)) for s, d in self.edges]
        seen = set()
        for src, dst in edge_list:
            if src not in index or dst not in index:
                missing = src if src not in index else dst
                raise DagValidationError(f"unknown operator id {missing} in edge ({src}, {dst})")
            if src == dst:
                raise DagValidationError(f"self-loop on operator {src}")
            if (src, dst) in seen:
                raise DagValidationError(f"duplicate edge ({src}, {dst})")
            seen.add((src, dst))
        parents = {op.id: [] for op in ops}
        children = {op.id: [] for op in ops}
        for src, dst in sorted(seen):
            parents[dst].append(src)
            children[src].append(dst)
        try:
            tuple(TopologicalSorter({k: v for k, v in parents.items()}).static_order())
        except CycleError as exc:
            raise DagValidationError(f"cycle detected: {exc.args[1]}") from None
        for src, dst in seen:
            if src > dst:
                raise DagValidationError(
                    f"non-topological ids: edge ({src}, {dst}) goes to a smaller id"
                )
        for op in ops:
            if op.cap_on is not None and op.cap_on not in parents[op.id]:
                raise DagValidationError(f"operator {op.id}: cap_on {op.cap_on} is not an input")
            buf = op.buffer
            if buf is not None and buf.cap_on is not None:
                if len(parents[op.id]) < 2:
                    raise DagValidationError(
                        f"operator {op.id}: buffer cap_on only allowed with multiple inputs"
                    )
                if buf.cap_on not in parents[op.id]:
                    raise DagValidationError(
                        f"operator {op.id}: buffer cap_on {buf.cap_on} is not an input"
                    )
        object.__setattr__(self, "edges", tuple(sorted(seen)))
        object.__setattr__(self, "_index", index)
        object.__setattr__(self, "_parents", {k: tuple(v) for k, v in parents.items()})
        object.__setattr__(self, "_children", {k: tuple(v) for k, v in children.items()})

    def __getitem__(self, op_id: int) -> Operator:
        return self._index[op_id]

    def __contains__(self, op_id) -> bool:
        return op_id in self._index

    def __len__(self) -> int:
        return len(self.operators)

    @property
    def ids(self) -> tuple[int, ...]:
        return tuple(op.id for op in self.operators)

    def parents(self, op_id: int) -> tuple[int, ...]:
        return self._parents[op_id]

    def children(self, op_id: int) -> tuple[int, ...]:
        return self._children[op_id]


# --------------------------------------------------------------------------
# JSON

_RATIONAL_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["num", "den"],
    "properties": {"num": {"type": "integer"}, "den": {"type": "integer", "minimum": 1}},
}

DAG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["operators", "edges"],
    "properties": {
        "operators": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["id", "pipe", "para", "unit_time", "units"],
                "properties": {
                    "id": {"type": "integer"},
                    "pipe": {"enum": [c.value for c in PipeCapability]},
                    "para": {"enum": [c.value for c in ParaCapability]},
                    "unit_time": _RATIONAL_SCHEMA,
                    "units": {"type": "integer"},
                    "input_units": {"type": "integer"},
                    "output_units": {"type": "integer"},
                    "cap_on": {"type": ["integer", "null"]},
                    "parallel": {"enum": [c.value for c in ParallelTag]},
                    "buffer": {
                        "type": "object",
                        "additionalProperties": False,
                        "required": ["kind"],
                        "properties": {
                            "kind": {"enum": [c.value for c in BufferKind]},
                            "cap_on": {"type": ["integer", "null"]},
                        },
                    },
                    "synthetic": {"enum": list(SYNTHETIC_KINDS)},
                },
            },
        },
        "edges": {
            "type": "array",
            "items": {
                "type": "array",
                "items": {"type": "integer"},
                "minItems": 2,
                "maxItems": 2,
            },
        },
    },
}


def dag_from_dict(doc: dict) -> PlanDag:
    try:
        jsonschema.validate(doc, DAG_SCHEMA)
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path)
        raise DagValidationError(f"schema violation at '{path}': {exc.message}") from None
    ops = []
    for raw in doc["operators"]:
        buf = raw.get("buffer")
        ops.append(
            Operator(
                id=raw["id"],
                pipe=raw["pipe"],
                para=raw["para"],
                unit_time=rational(raw["unit_time"]),
                units=raw["units"],
                input_units=raw.get("input_units", 1),
                output_units=raw.get("output_units", 1),
                cap_on=raw.get("cap_on"),
                parallel=raw.get("parallel"),
                buffer=None if buf is None else BufferCapability(BufferKind(buf["kind"]), buf.get("cap_on")),
                synthetic=raw.get("synthetic"),
            )
        )
    return PlanDag(tuple(ops), tuple(tuple(e) for e in doc["edges"]))


def load_dag(data: bytes | str) -> PlanDag:
    """Parse and validate a JSON plan DAG.

    Raises ``json.JSONDecodeError`` on malformed input and
    :class:`DagValidationError` naming the broken invariant otherwise.
    """
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    return dag_from_dict(json.loads(data))


def dag_to_dict(dag: PlanDag) -> dict:
    ops = []
    for op in dag.operators:
        raw = {
            "id": op.id,
            "pipe": op.pipe.value,
            "para": op.para.value,
            "unit_time": rational_json(op.unit_time),
            "units": op.units,
            "input_units": op.input_units,
            "output_units": op.output_units,
            "cap_on": op.cap_on,
        }
        if op.parallel is not None:
            raw["parallel"] = op.parallel.value
        if op.buffer is not None:
            raw["buffer"] = {"kind": op.buffer.kind.value, "cap_on": op.buffer.cap_on}
        if op.synthetic is not None:
            raw["synthetic"] = op.synthetic
        ops.append(raw)
    return {"operators": ops, "edges": [list(e) for e in dag.edges]}


def dump_dag(dag: PlanDag) -> str:
    return json.dumps(dag_to_dict(dag), indent=2)


# --------------------------------------------------------------------------
# Task expansion

Task = tuple[int, int]  # (operator id, 1-based unit index)


@dataclass(frozen=True)
class TaskSet:
    """Unit-level view of a plan: one task per (operator, unit).

    ``exec_time`` rows follow ``op_ids``; columns are units ``1..max_units``.
    ``dependency`` holds ``(before, after)`` task pairs.
    """

    op_ids: tuple[int, ...]
    max_units: int
    exec_time: tuple[tuple[Fraction, ...], ...]
    dependency: frozenset[tuple[Task, Task]]
    units: tuple[int, ...]

    @property
    def n_ops(self) -> int:
        return len(self.op_ids)

    def exists(self, op_id: int, unit: int) -> bool:
        try:
            row = self.op_ids.index(op_id)
        except ValueError:
            return False
        return 1 <= unit <= self.units[row]

    def tasks(self) -> list[Task]:
        return [(op, j) for op, us in zip(self.op_ids, self.units) for j in range(1, us + 1)]

    def duration(self, task: Task) -> Fraction:
        return self.exec_time[self.op_ids.index(task[0])][task[1] - 1]

    def durations(self) -> dict[Task, Fraction]:
        return {
            (op, j): self.exec_time[row][j - 1]
            for row, (op, us) in enumerate(zip(self.op_ids, self.units))
            for j in range(1, us + 1)
        }

    def predecessors(self) -> dict[Task, list[Task]]:
        preds: dict[Task, list[Task]] = {t: [] for t in self.tasks()}
        for before, after in sorted(self.dependency):
            preds[after].append(before)
        return preds


def expand_tasks(dag: PlanDag) -> TaskSet:
    ops = dag.operators
    n = max((op.units for op in ops), default=0)
    exec_time = tuple(
        tuple(op.unit_time if j <= op.units else Fraction(0) for j in range(1, n + 1)) for op in ops
    )
    dep: set[tuple[Task, Task]] = set()
    for src, dst in dag.edges:
        shared = min(dag[src].units, dag[dst].units)
        for j in range(1, shared + 1):
            dep.add(((src, j), (dst, j)))
    for op in ops:
        if op.para is ParaCapability.S:
            for j in range(1, op.units + 1):
                for k in range(j + 1, op.units + 1):
                    dep.add(((op.id, j), (op.id, k)))
    return TaskSet(
        op_ids=tuple(op.id for op in ops),
        max_units=n,
        exec_time=exec_time,
        dependency=frozenset(dep),
        units=tuple(op.units for op in ops),
    )


def serial_makespan(dag: PlanDag) -> Fraction:
    """One core, one task at a time: the sum of all operator durations."""
    return sum((op.duration for op in dag.operators), Fraction(0))


def total_tasks(dag: PlanDag) -> int:
    return sum(op.units for op in dag.operators)

