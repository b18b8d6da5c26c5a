"""Command-line front end.

Exit codes: 0 success, 1 domain or validation error, 2 I/O error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import costmodel
from .dag import DagValidationError, dag_to_dict, dump_dag, load_dag, rational, rational_json
from .generate import random_dag
from .greedy import BulkSchedule, ConfigurationError, SchedulingError, bulk_assignment
from .oracle import BudgetExceeded, InstanceTooLarge, audit_greedy
from .partition import segment_dag
from .simulate import InvalidScheduleError, realize
from .transforms import TransformError, buffering_cuts, insert_partition_merge, pipeline_vs_dp

log = logging.getLogger("bulksched")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: usage error: {message}\n")


DOMAIN_ERRORS = (
    DagValidationError,
    json.JSONDecodeError,
    SchedulingError,
    ConfigurationError,
    InvalidScheduleError,
    InstanceTooLarge,
    BudgetExceeded,
    TransformError,
    costmodel.CostModelError,
    UsageError,
    KeyError,
    ValueError,
)


def _read(path: str) -> str:
    return Path(path).read_text(encoding="utf-8")


def _emit(doc, out: str | None) -> None:
    text = json.dumps(doc, indent=2) + "\n"
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _cores(args) -> int:
    if args.cores < 1:
        raise UsageError("--cores must be >= 1")
    return args.cores


def cmd_partition(args) -> int:
    _emit(segment_dag(load_dag(_read(args.dag))).to_dict(), args.out)
    return 0


def cmd_schedule(args) -> int:
    p = _cores(args)
    dag = load_dag(_read(args.dag))
    seg = segment_dag(dag)
    bulk = bulk_assignment(dag, seg, p)
    ts, span = realize(dag, bulk)
    _emit(
        {
            "segmentation": seg.to_dict(),
            "bulk": bulk.to_dict(),
            "tasks": ts.to_dict()["tasks"],
            "makespan": rational_json(span),
        },
        args.out,
    )
    if args.figure:
        from .plotting import gantt

        gantt(ts, args.figure, title=f"greedy bulk schedule, p={p}, makespan={float(span):g}s")
    return 0


def cmd_simulate(args) -> int:
    dag = load_dag(_read(args.dag))
    doc = json.loads(_read(args.schedule))
    bulk = BulkSchedule.from_dict(doc.get("bulk", doc))
    ts, span = realize(dag, bulk)
    _emit({"tasks": ts.to_dict()["tasks"], "makespan": rational_json(span)}, args.out)
    if args.figure:
        from .plotting import gantt

        gantt(ts, args.figure, title=f"p={bulk.p}, makespan={float(span):g}s")
    return 0


def cmd_oracle(args) -> int:
    p = _cores(args)
    dag = load_dag(_read(args.dag))
    audit = audit_greedy(dag, p, budget=args.budget)
    _emit(
        {
            "greedy": rational_json(audit.greedy),
            "optimal": rational_json(audit.optimal),
            "ratio": rational_json(audit.ratio),
            "ratio_value": float(audit.ratio),
        },
        args.out,
    )
    return 0


def cmd_gen(args) -> int:
    if args.n_ops < 1:
        raise UsageError("--n-ops must be >= 1")
    if not 0 <= args.p_edge <= 1:
        raise UsageError("--p-edge must lie in [0, 1]")
    dag = random_dag(args.seed, args.n_ops, args.p_edge, max_units=args.max_units)
    text = dump_dag(dag) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def cmd_transform(args) -> int:
    if args.kind == "analysis":
        res = pipeline_vs_dp(rational(args.t1), rational(args.t2), args.cores, args.batches, rational(args.agg))
        _emit(
            {
                "n1": res.n1,
                "T1": rational_json(res.data_parallel_time),
                "T2": rational_json(res.pipeline_time),
            },
            args.out,
        )
        return 0
    if not args.dag:
        raise UsageError(f"transform {args.kind} needs a DAG file")
    dag = load_dag(_read(args.dag))
    if args.kind == "dp":
        res = insert_partition_merge(dag)
        doc = dag_to_dict(res.dag)
        doc_out = {"dag": doc, "id_map": {str(k): v for k, v in sorted(res.id_map.items())}}
        _emit(doc_out, args.out)
    else:
        plan = buffering_cuts(dag)
        _emit({"cut": sorted(list(e) for e in plan.cut), "chains": [list(c) for c in plan.chains]}, args.out)
    return 0


def _load_models(paths) -> dict[str, costmodel.OperatorCostModel]:
    models = {}
    for path in paths:
        m = costmodel.load_model(_read(path))
        models[m.operator_name] = m
    return models


def cmd_cost(args) -> int:
    if args.action == "fit":
        groups = costmodel.read_calibration_csv(_read(args.csv))
        if args.operator:
            if args.operator not in groups:
                raise UsageError(f"operator {args.operator!r} not in {args.csv}")
            samples = groups[args.operator]
        elif len(groups) == 1:
            samples = next(iter(groups.values()))
        else:
            raise UsageError(f"{args.csv} holds several operators {sorted(groups)}; pick one with --operator")
        model = costmodel.fit(samples)
        text = costmodel.dump_model(model) + "\n"
        if args.out:
            Path(args.out).write_text(text, encoding="utf-8")
        else:
            sys.stdout.write(text)
        if args.figure:
            from .plotting import parity

            measured = [s.measured_time for s in samples]
            predicted = [costmodel.predict(model, s.features) for s in samples]
            parity(measured, predicted, args.figure, title=f"{model.operator_name} cost fit")
        return 0
    if args.action == "predict":
        model = costmodel.load_model(_read(args.model))
        value = costmodel.predict(model, args.features)
        _emit({"operator": model.operator_name, "cost": value, "negative": value < 0}, args.out)
        return 0
    models = _load_models(args.model)
    candidates = json.loads(_read(args.candidates))
    costs = [costmodel.subplan_cost(models, c) for c in candidates]
    index = costmodel.select_plan(models, candidates)
    _emit({"index": index, "costs": costs}, args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="bulksched", description="Operator-DAG scheduling toolkit")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def out(p):
        p.add_argument("--out", help="write JSON here instead of stdout")

    p = sub.add_parser("partition", help="chains, detached heads and segments")
    p.add_argument("dag")
    out(p)
    p.set_defaults(func=cmd_partition)

    p = sub.add_parser("schedule", help="greedy bulk assignment plus realized timing")
    p.add_argument("dag")
    p.add_argument("--cores", type=int, required=True)
    p.add_argument("--figure", help="also render a Gantt chart (PNG/PDF/SVG)")
    out(p)
    p.set_defaults(func=cmd_schedule)

    p = sub.add_parser("simulate", help="realize a stored bulk schedule")
    p.add_argument("dag")
    p.add_argument("schedule")
    p.add_argument("--figure")
    out(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("oracle", help="compare greedy with the exact optimum (<= 10 tasks)")
    p.add_argument("dag")
    p.add_argument("--cores", type=int, required=True)
    p.add_argument("--budget", type=int, default=2_000_000)
    out(p)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("gen", help="seeded random DAG")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--n-ops", type=int, required=True)
    p.add_argument("--p-edge", type=float, default=0.2)
    p.add_argument("--max-units", type=int, default=4)
    out(p)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("transform", help="plan rewrites and the pipeline analysis")
    p.add_argument("kind", choices=["dp", "buffer", "analysis"])
    p.add_argument("dag", nargs="?")
    p.add_argument("--t1", default="1")
    p.add_argument("--t2", default="1")
    p.add_argument("--cores", type=int, default=2)
    p.add_argument("--batches", type=int, default=1)
    p.add_argument("--agg", default="0")
    out(p)
    p.set_defaults(func=cmd_transform)

    p = sub.add_parser("cost", help="fit, apply and compare cost models")
    cost = p.add_subparsers(dest="action", required=True, parser_class=_Parser)
    c = cost.add_parser("fit")
    c.add_argument("csv")
    c.add_argument("--operator")
    c.add_argument("--figure", help="also render a predicted-vs-measured plot")
    out(c)
    c = cost.add_parser("predict")
    c.add_argument("model")
    c.add_argument("--features", type=float, nargs="*", default=[])
    out(c)
    c = cost.add_parser("select")
    c.add_argument("--model", action="append", required=True)
    c.add_argument("--candidates", required=True, help='JSON: [[["op", [f1, ...]], ...], ...]')
    out(c)
    p.set_defaults(func=cmd_cost)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except OSError as exc:
        print(f"bulksched: I/O error: {exc}", file=sys.stderr)
        return 2
    except DOMAIN_ERRORS as exc:
        print(f"bulksched: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
