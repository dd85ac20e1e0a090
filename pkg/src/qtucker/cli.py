"""Command-line interface.

    qtucker prepare  INPUT  [engine flags] --out-dir DIR
    qtucker analyze  INPUT  [--metric M] [--constraint FILE] --out-dir DIR
    qtucker verify   PLAN TARGET [--out-dir DIR]
    qtucker bench    INPUT  --factor-sizes 2,3,4,5 --precision 1e-6 --out-dir DIR

Exit codes: 0 success; 1 usage, I/O or parse error; 2 the run completed but
did not meet its target (residual core left by ``prepare``, audit
violations from ``verify``).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import serialize
from .corrgraph import METRICS, pair_weights
from .engine import EngineConfig, choose_partition, run
from .synth import synthesize_plan
from .verify import audit_trace


EXIT_OK, EXIT_ERROR, EXIT_INCOMPLETE = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # exit code 2 is reserved for "ran but missed the target"
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _add_input(p):
    p.add_argument("input", help="amplitude file (csv, json, raw f64le pairs, or PGM image)")
    p.add_argument("--format", choices=serialize.FORMATS, help="input format (default: from extension)")
    p.add_argument("--target-qubits", type=int, help="zero-pad the input to this many qubits")


def _add_engine(p):
    p.add_argument("--epsilon", type=float, default=1e-6, help="stop once 1 - F <= epsilon")
    p.add_argument("--k-init", type=int, default=2, help="initial block size")
    p.add_argument("--k-max", type=int, help="largest block size (default: n)")
    p.add_argument("--max-iters", type=int, help="iteration cap (default: n^2)")
    p.add_argument("--metric", choices=METRICS, default="frobenius")
    p.add_argument("--constraint", help="JSON file with a list of admissible qubit pairs")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--weight-noise", type=float, default=0.0, help="additive noise on weights (stall remedy)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qtucker", description=__doc__.split("\n\n")[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("prepare", help="compile a state into a circuit")
    _add_input(p)
    _add_engine(p)
    p.add_argument("--out-dir", default=".", help="directory for plan.json, circuit.*, trace.csv")

    p = sub.add_parser("analyze", help="write the correlation graph and chosen partition")
    _add_input(p)
    p.add_argument("--metric", choices=METRICS, default="frobenius")
    p.add_argument("--constraint", help="JSON file with a list of admissible qubit pairs")
    p.add_argument("--k", type=int, default=2, help="block size of the partition")
    p.add_argument("--out-dir", default=".")

    p = sub.add_parser("verify", help="audit a plan against its target")
    p.add_argument("plan", help="plan.json written by prepare")
    _add_input(p)
    p.add_argument("--out-dir", help="also write audit.json here")

    p = sub.add_parser("bench", help="iterations to precision for several fixed factor sizes")
    _add_input(p)
    p.add_argument("--factor-sizes", default="2,3,4,5")
    p.add_argument("--precision", type=float, default=1e-6)
    p.add_argument("--max-iters", type=int, default=5000)
    p.add_argument("--metric", choices=METRICS, default="frobenius")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--baseline-depth", type=int, help="depth of the exact initializer (default: 2^(n+1))")
    p.add_argument("--out-dir", default=".")
    return parser


def _load_constraint(path):
    if path is None:
        return None
    try:
        data = json.loads(Path(path).read_text())
        return [(int(a), int(b)) for a, b in data]
    except (OSError, ValueError, TypeError) as exc:
        raise serialize.InputError(f"cannot load constraint {path}: {exc}") from exc


def _engine_config(args) -> EngineConfig:
    return EngineConfig(
        epsilon=args.epsilon,
        k_init=args.k_init,
        k_max=args.k_max,
        max_iters=args.max_iters,
        metric=args.metric,
        constraint=_load_constraint(args.constraint),
        seed=args.seed,
        weight_noise=args.weight_noise,
    )


def cmd_prepare(args) -> int:
    target = serialize.read_state(args.input, args.format, args.target_qubits)
    cfg = _engine_config(args)
    try:
        cfg = cfg.resolved(target.n)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    plan = run(target, cfg)
    circuit = synthesize_plan(plan)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    serialize.write_plan(plan, out / "plan.json")
    (out / "circuit.json").write_text(json.dumps(circuit.to_dict()))
    if not circuit.has_opaque:
        (out / "circuit.qasm").write_text(circuit.to_qasm())
    (out / "trace.csv").write_text(serialize.trace_csv(plan.trace))
    print(
        f"n={plan.n} iterations={len(plan.trace)} fidelity={plan.trace.final_fidelity:.12f} "
        f"depth={circuit.depth} cx={circuit.cx_count} converged={plan.converged}"
    )
    return EXIT_OK if plan.converged else EXIT_INCOMPLETE


def cmd_analyze(args) -> int:
    state = serialize.read_state(args.input, args.format, args.target_qubits)
    constraint = _load_constraint(args.constraint)
    if not 2 <= args.k <= state.n:
        raise UsageError(f"--k must lie in [2, {state.n}]")
    graph = pair_weights(state, args.metric)
    partition = choose_partition(graph, args.k, constraint)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    for row in graph.weights:
        w.writerow([repr(float(x)) for x in row])
    (out / "weights.csv").write_text(buf.getvalue())
    (out / "partition.json").write_text(json.dumps(partition.as_lists()))
    print(json.dumps(partition.as_lists()))
    return EXIT_OK


def cmd_verify(args) -> int:
    plan = serialize.read_plan(args.plan)
    target = serialize.read_state(args.input, args.format, args.target_qubits)
    report = audit_trace(plan, target)
    text = report.to_json()
    if args.out_dir:
        Path(args.out_dir).mkdir(parents=True, exist_ok=True)
        (Path(args.out_dir) / "audit.json").write_text(text)
    for v in report.violations:
        print(f"violation: iteration {v['iteration']} {v['check']} value={v['value']} bound={v['bound']}")
    print(f"violations={len(report.violations)} simulated_fidelity={report.simulated_fidelity:.12f}")
    return EXIT_OK if report.ok else EXIT_INCOMPLETE


BENCH_COLUMNS = ("k", "iters", "depth", "cx_count", "seconds", "final_loss", "converged", "baseline_depth", "no_use")


def bench_one(target, k: int, precision: float, max_iters: int, metric: str, seed: int) -> dict:
    cfg = EngineConfig(epsilon=precision, k_init=k, k_max=k, max_iters=max_iters, metric=metric, seed=seed)
    t0 = time.perf_counter()
    plan = run(target, cfg)
    seconds = time.perf_counter() - t0
    circuit = synthesize_plan(plan)
    return {
        "k": k,
        "iters": len(plan.trace),
        "depth": circuit.estimated_depth,
        "cx_count": circuit.estimated_cx_count,
        "seconds": seconds,
        "final_loss": plan.trace.loss,
        "converged": plan.converged,
    }


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("QTUCKER_THREADS", "1")))
    except ValueError:
        return 1


def cmd_bench(args) -> int:
    target = serialize.read_state(args.input, args.format, args.target_qubits)
    try:
        sizes = [int(s) for s in args.factor_sizes.split(",") if s.strip()]
    except ValueError as exc:
        raise UsageError(f"bad --factor-sizes: {args.factor_sizes}") from exc
    bad = [k for k in sizes if not 2 <= k <= target.n]
    if bad or not sizes:
        raise UsageError(f"factor sizes must lie in [2, {target.n}], got {bad or sizes}")
    baseline = args.baseline_depth if args.baseline_depth is not None else 2 ** (target.n + 1)
    jobs = [(target, k, args.precision, args.max_iters, args.metric, args.seed) for k in sizes]
    workers = min(_threads(), len(jobs))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(bench_one, *zip(*jobs)))
    else:
        rows = [bench_one(*job) for job in jobs]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(BENCH_COLUMNS)
    for r in rows:
        r["baseline_depth"] = baseline
        r["no_use"] = r["depth"] > baseline
        w.writerow([r[c] for c in BENCH_COLUMNS])
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "sweep.csv").write_text(buf.getvalue())
    sys.stdout.write(buf.getvalue())
    return EXIT_OK


COMMANDS = {"prepare": cmd_prepare, "analyze": cmd_analyze, "verify": cmd_verify, "bench": cmd_bench}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(message)s")
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"qtucker: usage error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (serialize.InputError, OSError) as exc:
        print(f"qtucker: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
