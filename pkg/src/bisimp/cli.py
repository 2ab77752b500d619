"""Batch command line: run a problem file or a named benchmark, or serve the
live-preview API.  The CLI is a thin client of the library; all numerics
live in the core modules.

Exit codes: 0 the run converged, 2 the iteration budget ran out, 1 error.
"""
from __future__ import annotations

import argparse
import os
import sys
import time
from pathlib import Path

from .documents import DocumentError, parse_problem, serialize_problem
from .fea import LinearSolveError
from .outputs import summarize, write_convergence, write_snapshot, write_summary
from .problems import ProblemSpec, catalog
from .solvers import DivergenceError, SolverConfig, run

_ALGO_NAMES = {
    "cpfbto": "cpfbto_krylov",
    "fbto": "fbto",
    "pfbto": "pfbto_jacobi",
    "pgd": "pgd_exact",
}


def _add_run_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--algo", choices=sorted(_ALGO_NAMES), default="cpfbto")
    parser.add_argument("--alpha0", type=float, default=None)
    parser.add_argument("--krylov-dim", type=int, default=20)
    parser.add_argument("--max-iters", type=int, default=50_000)
    parser.add_argument("--snapshot-every", type=int, default=0)
    parser.add_argument("--out", type=Path, default=Path("out"))
    parser.add_argument("--threads", type=int, default=None,
                        help="matvec threads (default: TOPOPT_THREADS or 1)")
    parser.add_argument("--scale", type=float, default=None,
                        help="resolution scale factor applied to the problem")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--wall-clock", action="store_true",
                        help="stamp real wall time into convergence.csv "
                             "(off by default so logs are byte-reproducible)")


def _threads(args) -> int:
    if args.threads is not None:
        return max(1, args.threads)
    return max(1, int(os.environ.get("TOPOPT_THREADS", "1")))


def _execute(problem: ProblemSpec, args) -> int:
    if args.scale is not None:
        problem = problem.scale(args.scale)
    config = SolverConfig(
        algorithm=_ALGO_NAMES[args.algo],
        alpha0=args.alpha0,
        krylov_dim=args.krylov_dim,
        max_iters=args.max_iters,
        snapshot_every=args.snapshot_every,
        seed=args.seed,
    )
    out_dir: Path = args.out
    out_dir.mkdir(parents=True, exist_ok=True)

    def sink(state):
        if config.snapshot_every > 0 and state.iter % config.snapshot_every == 0:
            write_snapshot(state.v_phys, problem.nx, problem.ny,
                           out_dir / f"density_{state.iter:06d}.pgm")

    clock = time.perf_counter if args.wall_clock else None
    started = time.perf_counter()
    result = run(problem, config, sink=sink, threads=_threads(args), clock=clock)
    wall = time.perf_counter() - started

    write_snapshot(result.state.v_phys, problem.nx, problem.ny, out_dir / "final_density.pgm")
    write_convergence(result.record, out_dir / "convergence.csv")
    summary = summarize(result, config)
    write_summary(summary, out_dir / "summary.json")
    (out_dir / "problem.json").write_text(serialize_problem(problem))
    print(summary.to_json(), end="")
    print(f"{result.reason} after {result.state.iter} iterations "
          f"({wall:.1f}s wall); outputs in {out_dir}", file=sys.stderr)
    return 0 if result.reason == "converged" else 2


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="bisimp",
                                     description="SIMP topology optimization, batch and preview")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="optimize a problem document")
    p_run.add_argument("--problem", type=Path, required=True)
    _add_run_flags(p_run)

    p_bench = sub.add_parser("bench", help="benchmark catalog")
    bench_sub = p_bench.add_subparsers(dest="bench_command", required=True)
    bench_sub.add_parser("list", help="list the catalog")
    p_bench_run = bench_sub.add_parser("run", help="optimize a named benchmark")
    p_bench_run.add_argument("name")
    _add_run_flags(p_bench_run)

    p_serve = sub.add_parser("serve", help="start the live-preview service")
    p_serve.add_argument("--port", type=int, default=8722)
    p_serve.add_argument("--host", default="127.0.0.1")

    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return _execute(parse_problem(args.problem.read_text()), args)
        if args.command == "bench":
            entries = catalog()
            if args.bench_command == "list":
                for name, spec in entries.items():
                    print(f"{name:<12} {spec.ny}x{spec.nx}  frac={spec.volume_fraction}")
                return 0
            if args.name not in entries:
                print(f"unknown benchmark {args.name!r}; try `bisimp bench list`",
                      file=sys.stderr)
                return 1
            return _execute(entries[args.name], args)
        if args.command == "serve":
            import uvicorn

            from .service.app import create_app

            uvicorn.run(create_app(), host=args.host, port=args.port)
            return 0
    except (DocumentError, DivergenceError, LinearSolveError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    raise AssertionError("unreachable command")


if __name__ == "__main__":
    sys.exit(main())
