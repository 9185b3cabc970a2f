"""Batch command-line front end.

Subcommands: ``validate`` (parse + DAG check), ``run`` (trajectory
sampling, JSON Lines), ``enumerate`` (exhaustive history law), ``classify``
(individuation timeline), and ``bench-memory`` (store-and-recall fidelity
sweep, CSV). Every command is deterministic given its inputs and seed;
stdout carries only data, diagnostics go to stderr. Exit codes: 0 success,
1 domain failure, 2 I/O or usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import jsonio
from .circuit import CircuitError, parse_circuit, validate_dag
from .engine import (
    EngineError,
    compile_program,
    enumerate_histories,
    load_run_spec,
    run_trajectory,
)
from .individuation import IndividuationError, classify_timeline
from .linalg import MAX_DIM
from .measurement import MeasurementError, mean_recall_fidelity, recall_fidelity_bound

DEFAULT_SEED = 20120712  # fixed so runs are reproducible by default


def _read(path: str) -> str:
    return Path(path).read_text()


def cmd_validate(args) -> int:
    try:
        text = _read(args.path)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        circuit = parse_circuit(text)
    except CircuitError as exc:
        print(f"invalid: {exc}", file=sys.stderr)
        return 1
    report = validate_dag(circuit, tol=args.tolerance)
    print(str(report), file=sys.stderr)
    return 0 if report.ok else 1


def _load_program(path: str):
    try:
        return load_run_spec(path)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        raise SystemExit(2) from exc


def _out_stream(args):
    if args.out:
        return open(args.out, "w")
    return sys.stdout


def cmd_run(args) -> int:
    program = _load_program(args.path)
    inputs = args.inputs.split(",") if args.inputs else None
    try:
        compiled = compile_program(program, max_dim=args.max_dim)
        out = _out_stream(args)
        records = []
        try:
            for i in range(args.trajectories):
                traj = run_trajectory(
                    program,
                    inputs=inputs,
                    seed=args.seed,
                    index=i,
                    compiled=compiled,
                    store_states=args.store_states,
                    max_dim=args.max_dim,
                )
                record = {
                    "seed": args.seed,
                    "index": i,
                    "outcomes": [[k, v] for k, v in traj.outcome_items()],
                    "probability": traj.probability,
                }
                if args.store_states:
                    record["final_state"] = jsonio.encode_vector(traj.final_state)
                if args.format == "json":
                    records.append(record)
                else:
                    out.write(jsonio.dumps(record) + "\n")
            if args.format == "json":
                out.write(jsonio.dumps(records, indent=2) + "\n")
        finally:
            if out is not sys.stdout:
                out.close()
    except (CircuitError, EngineError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


def cmd_enumerate(args) -> int:
    program = _load_program(args.path)
    inputs = args.inputs.split(",") if args.inputs else None
    try:
        histories = enumerate_histories(program, inputs=inputs, max_dim=args.max_dim)
    except (CircuitError, EngineError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    total = sum(p for _, p in histories)
    out = _out_stream(args)
    try:
        if args.format == "csv":
            out.write("outcomes,probability\n")
            for key, p in histories:
                label = ";".join(f"{k}={v}" for k, v in key)
                out.write(f"{label},{p:.17g}\n")
        else:
            doc = {
                "histories": [
                    {"outcomes": [[k, v] for k, v in key], "probability": p}
                    for key, p in histories
                ],
                "total_probability": total,
            }
            out.write(jsonio.dumps(doc, indent=2) + "\n")
    finally:
        if out is not sys.stdout:
            out.close()
    print(f"{len(histories)} histories, total probability {total:.12f}", file=sys.stderr)
    return 0


def cmd_classify(args) -> int:
    program = _load_program(args.path)
    try:
        traj = run_trajectory(program, seed=args.seed, store_states=True, max_dim=args.max_dim)
        partitions = classify_timeline(traj)
    except (CircuitError, EngineError, IndividuationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    out = _out_stream(args)
    try:
        doc = [
            {
                "step": p.timestamp,
                "partition": p.block_lists(),
                "purities": list(p.purities),
            }
            for p in partitions
        ]
        out.write(jsonio.dumps(doc, indent=2) + "\n")
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def cmd_bench_memory(args) -> int:
    strategies = args.strategies.split(",")
    ms = [int(x) for x in args.copies.split(",")]
    ds = [int(x) for x in args.dims.split(",")]
    out = _out_stream(args)
    code = 0
    try:
        out.write("strategy,M,d,trials,mean_fidelity,std_error,bound\n")
        for strategy in strategies:
            for d in ds:
                for m in ms:
                    bound = float(recall_fidelity_bound(m, d))
                    try:
                        mean, err = mean_recall_fidelity(
                            strategy, m, d, args.trials, seed=args.seed
                        )
                    except MeasurementError as exc:
                        print(
                            f"warning: skipping {strategy} M={m} d={d}: {exc}",
                            file=sys.stderr,
                        )
                        out.write(f"{strategy},{m},{d},0,,,{bound:.6f}\n")
                        continue
                    out.write(
                        f"{strategy},{m},{d},{args.trials},"
                        f"{mean:.6f},{err:.6f},{bound:.6f}\n"
                    )
    finally:
        if out is not sys.stdout:
            out.close()
    return code


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="onticsim",
        description="Operational-circuit trajectory simulator and analysis toolkit.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=DEFAULT_SEED)
    common.add_argument("--max-dim", type=int, default=MAX_DIM)
    common.add_argument("--out", type=str, default=None, help="write output to a file")

    p = sub.add_parser("validate", help="parse a circuit file and check the DAG")
    p.add_argument("path")
    p.add_argument("--tolerance", type=float, default=1e-8,
                   help="slack on the trace-nonincreasing normalization check")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("run", parents=[common], help="sample trajectories (JSON Lines)")
    p.add_argument("path")
    p.add_argument("--trajectories", type=int, default=1)
    p.add_argument("--inputs", type=str, default=None,
                   help="comma-separated classical inputs, one per program step")
    p.add_argument("--store-states", action="store_true")
    p.add_argument("--format", choices=("jsonl", "json"), default="jsonl")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("enumerate", parents=[common], help="exact history distribution")
    p.add_argument("path")
    p.add_argument("--inputs", type=str, default=None)
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.set_defaults(func=cmd_enumerate)

    p = sub.add_parser("classify", parents=[common],
                       help="individuation timeline of one stored-state trajectory")
    p.add_argument("path")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("bench-memory", parents=[common],
                       help="store-and-recall fidelity sweep (CSV)")
    p.add_argument("--strategies", type=str,
                   default="optimal_covariant_qubit,sic_estimate,random_vn_repeat")
    p.add_argument("--copies", type=str, default="1,2,3", help="comma-separated M values")
    p.add_argument("--dims", type=str, default="2", help="comma-separated dimensions")
    p.add_argument("--trials", type=int, default=20000)
    p.set_defaults(func=cmd_bench_memory)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SystemExit as exc:
        return int(exc.code or 0)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (CircuitError, EngineError, IndividuationError, MeasurementError,
            json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
