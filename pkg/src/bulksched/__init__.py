"""Multi-core scheduling of operator DAGs: chain/segment partitioning, greedy
bulk core assignment, unit-level simulation, an exact small-instance oracle,
plan transforms and a learned polynomial cost model."""

from .dag import (
    BufferCapability,
    BufferKind,
    DagValidationError,
    Operator,
    ParaCapability,
    ParallelTag,
    PipeCapability,
    PlanDag,
    TaskSet,
    dump_dag,
    expand_tasks,
    load_dag,
    serial_makespan,
)
from .greedy import (
    BulkSchedule,
    DchVerdict,
    DominantState,
    SingleBatchAssignment,
    bulk_assignment,
    early_stop,
    execute_dch_rule,
    saved_time_dominant,
    saved_time_unassigned,
    schedule,
    single_batch_assignment,
    validate_bulk,
)
from .oracle import audit_greedy, optimal_makespan
from .partition import Segmentation, partition_chains, partition_segments, segment_dag
from .simulate import TaskSchedule, makespan, realize, validate_tasks

__version__ = "0.1.0"
