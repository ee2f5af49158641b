"""Command line interface.

Exit codes: 0 = solution found / validation passed / run completed,
1 = invalid input, 2 = timeout without a solution, 3 = a solution failed
the independent robustness check (failing exclusion indices are printed).
"""

from __future__ import annotations

import argparse
import csv
import json
import statistics
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .envs import fixture_names, resolve_environment
from .geometry import GeometryError
from .oracle import check_solution
from .planner import PlanConfig, SoundnessError, plan
from .rspeg import InvalidJpc, Jpc
from .sampling import build_visibility_graph, build_web, dfs_walk
from .svg import render_svg

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_TIMEOUT = 2
EXIT_ROBUSTNESS = 3


def _err(msg: str) -> None:
    print(f"error: {msg}", file=sys.stderr)


def _parse_root(text: str) -> Jpc:
    try:
        pts = []
        for chunk in text.split(";"):
            x, y = chunk.split(",")
            pts.append((float(x), float(y)))
        return Jpc(tuple(pts))
    except (ValueError, InvalidJpc) as e:
        raise ValueError(f"bad --root {text!r}: {e}") from e


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--env", required=True,
                   help=f"environment JSON path or fixture name ({', '.join(fixture_names())})")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--coverage-grid", type=int, default=200,
                   help="coverage test grid resolution for web construction")


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="robust-pursuit",
        description="Plan 1-failure-robust multi-pursuer sweep strategies in polygonal environments.",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    solve = sub.add_parser("solve", help="find a robust strategy for one environment")
    _add_common(solve)
    solve.add_argument("--n", type=int, default=3, help="number of pursuers")
    solve.add_argument("--sampler", choices=("rcs", "ws"), default="rcs")
    solve.add_argument("--timeout", type=float, default=600.0, help="seconds")
    solve.add_argument("--no-cache", action="store_true",
                       help="recompute influence relations per propagation instead of caching per edge")
    solve.add_argument("--root", type=str, default=None,
                       help='root configuration "x,y;x,y;..." (default: first sample)')
    solve.add_argument("--out", type=Path, default=Path("solution.json"))
    solve.add_argument("--svg", type=Path, default=None)
    solve.add_argument("--dump-graph", type=Path, default=None)
    solve.add_argument("--check-resolution", type=int, default=150)
    solve.add_argument("--check-steps", type=int, default=100)

    bench = sub.add_parser("bench", help="benchmark sweep over environments/samplers")
    bench.add_argument("--envs", nargs="+", required=True)
    bench.add_argument("--n", type=int, nargs="+", default=[3])
    bench.add_argument("--samplers", nargs="+", choices=("rcs", "ws"), default=["rcs"])
    bench.add_argument("--trials", type=int, default=50)
    bench.add_argument("--seed", type=int, default=0)
    bench.add_argument("--timeout", type=float, default=600.0)
    bench.add_argument("--no-cache", action="store_true")
    bench.add_argument("--coverage-grid", type=int, default=200)
    bench.add_argument("--workers", type=int, default=1)
    bench.add_argument("--out", type=Path, default=Path("bench.csv"))
    bench.add_argument("--log", type=Path, default=None,
                       help="JSON-lines per-trial log")

    val = sub.add_parser("validate", help="re-check a solution file independently")
    val.add_argument("--env", required=True)
    val.add_argument("--solution", type=Path, required=True)
    val.add_argument("--resolution", type=int, default=150)
    val.add_argument("--steps", type=int, default=100)

    web = sub.add_parser("web", help="build and dump a sparse web and its walk")
    _add_common(web)
    web.add_argument("--out", type=Path, default=None)
    web.add_argument("--svg", type=Path, default=None)

    return ap


def _cmd_solve(args) -> int:
    env = resolve_environment(args.env)
    cfg = PlanConfig(
        n=args.n,
        sampler=args.sampler,
        seed=args.seed,
        timeout=args.timeout,
        cache_relations=not args.no_cache,
        coverage_grid=args.coverage_grid,
        root=_parse_root(args.root) if args.root else None,
        check_resolution=args.check_resolution,
        check_steps=args.check_steps,
    )
    try:
        result = plan(env, cfg)
    except SoundnessError as e:
        _err(f"SoundnessError: {e}")
        return EXIT_ROBUSTNESS
    payload = {
        "environment": args.env,
        "n": args.n,
        "sampler": args.sampler,
        "seed": args.seed,
        **result.to_dict(),
    }
    args.out.write_text(json.dumps(payload, indent=1) + "\n")
    if args.dump_graph is not None and result.graph is not None:
        result.graph.dump(args.dump_graph)
    if args.svg is not None:
        args.svg.write_text(render_svg(env, solution=result.solution))
    if result.outcome == "timeout":
        print(f"timeout after {result.stats.elapsed:.1f}s "
              f"({result.stats.samples_consumed} samples, "
              f"{result.stats.vertices} vertices)")
        return EXIT_TIMEOUT
    print(
        f"solution: {len(result.solution.waypoints)} waypoints, "
        f"{result.stats.vertices} vertices, {result.stats.edges} edges, "
        f"{result.stats.elapsed:.2f}s; check passed for all "
        f"{result.check.n} exclusions"
    )
    return EXIT_OK


def run_trial(env_spec: str, n: int, sampler: str, seed: int, timeout: float,
              cache: bool, coverage_grid: int) -> dict:
    """One benchmark trial (module-level so worker processes can import it)."""
    env = resolve_environment(env_spec)
    cfg = PlanConfig(
        n=n, sampler=sampler, seed=seed, timeout=timeout,
        cache_relations=cache, coverage_grid=coverage_grid,
    )
    result = plan(env, cfg)
    return {
        "env": env_spec,
        "sampler": sampler,
        "n": n,
        "seed": seed,
        "outcome": result.outcome,
        "time": result.stats.elapsed if result.succeeded else timeout,
        "elapsed": result.stats.elapsed,
        "vertices": result.stats.vertices,
        "edges": result.stats.edges,
        "samples": result.stats.samples_consumed,
        "relations": result.stats.relations_computed,
    }


def _cmd_bench(args) -> int:
    for spec in args.envs:
        resolve_environment(spec)   # fail fast on bad inputs
    jobs = []
    for spec in args.envs:
        for sampler in args.samplers:
            for n in args.n:
                for trial in range(args.trials):
                    jobs.append((spec, n, sampler, args.seed + trial,
                                 args.timeout, not args.no_cache, args.coverage_grid))
    if args.workers > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            rows = list(pool.map(run_trial, *zip(*jobs)))
    else:
        rows = [run_trial(*j) for j in jobs]

    if args.log is not None:
        with open(args.log, "w") as fh:
            for r in rows:
                fh.write(json.dumps(r) + "\n")

    def agg(values):
        mean = statistics.fmean(values)
        std = statistics.stdev(values) if len(values) > 1 else 0.0
        return mean, std

    with open(args.out, "w", newline="") as fh:
        fh.write("# timed-out trials are counted at the timeout value in time stats\n")
        writer = csv.writer(fh)
        writer.writerow([
            "env", "sampler", "n", "trials", "successes", "success_rate",
            "time_mean", "time_std", "vertices_mean", "vertices_std",
            "edges_mean", "edges_std",
        ])
        for spec in args.envs:
            for sampler in args.samplers:
                for n in args.n:
                    grp = [r for r in rows
                           if r["env"] == spec and r["sampler"] == sampler and r["n"] == n]
                    succ = sum(1 for r in grp if r["outcome"] == "solution")
                    tm, ts = agg([r["time"] for r in grp])
                    vm, vs = agg([r["vertices"] for r in grp])
                    em, es = agg([r["edges"] for r in grp])
                    writer.writerow([
                        spec, sampler, n, len(grp), succ,
                        f"{succ / len(grp):.4f}",
                        f"{tm:.3f}", f"{ts:.3f}",
                        f"{vm:.2f}", f"{vs:.2f}",
                        f"{em:.2f}", f"{es:.2f}",
                    ])
    print(f"wrote {args.out} ({len(rows)} trials)")
    return EXIT_OK


def _cmd_validate(args) -> int:
    env = resolve_environment(args.env)
    try:
        data = json.loads(args.solution.read_text())
    except json.JSONDecodeError as e:
        raise ValueError(f"solution file {args.solution} is not valid JSON: {e}") from e
    sol = data.get("solution", data)
    waypoints = sol.get("waypoints")
    if not waypoints:
        raise ValueError(f"solution file {args.solution} has no waypoints")
    report = check_solution(
        env, waypoints, 1, resolution=args.resolution, steps_per_edge=args.steps
    )
    for i, ok in enumerate(report.verdicts):
        status = "pass" if ok else f"FAIL ({report.contaminated_cells[i]} contaminated cells)"
        print(f"exclusion {i}: {status}")
    if not report.passed:
        _err(
            "RobustnessFailure: solution fails for excluded pursuer(s) "
            f"{', '.join(map(str, report.failing_exclusions()))}"
        )
        return EXIT_ROBUSTNESS
    print("validation passed for all exclusions")
    return EXIT_OK


def _cmd_web(args) -> int:
    env = resolve_environment(args.env)
    rng = np.random.default_rng(args.seed)
    web = build_web(env, rng, coverage_grid=args.coverage_grid)
    graph = build_visibility_graph(env, web)
    root = int(rng.integers(0, len(web.points)))
    walk = dfs_walk(graph, root)
    payload = {
        "environment": args.env,
        "seed": args.seed,
        "initial_points": [[p.x, p.y] for p in web.initial_points],
        "intersection_points": [[p.x, p.y] for p in web.intersection_points],
        "adjacency": [list(row) for row in graph.adjacency],
        "walk_root": root,
        "walk": list(walk.indices),
        "d": walk.d,
    }
    text = json.dumps(payload, indent=1) + "\n"
    if args.out is not None:
        args.out.write_text(text)
    else:
        print(text, end="")
    if args.svg is not None:
        args.svg.write_text(render_svg(env, web=web, walk=walk))
    print(
        f"web: {len(web.initial_points)} coverage points, "
        f"{len(web.intersection_points)} overlap points, walk length {walk.d}",
        file=sys.stderr,
    )
    return EXIT_OK


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "solve":
            return _cmd_solve(args)
        if args.command == "bench":
            return _cmd_bench(args)
        if args.command == "validate":
            return _cmd_validate(args)
        if args.command == "web":
            return _cmd_web(args)
        raise ValueError(f"unknown command {args.command}")
    except (GeometryError, InvalidJpc, FileNotFoundError, KeyError, ValueError, OSError) as e:
        _err(f"{type(e).__name__}: {e}")
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
