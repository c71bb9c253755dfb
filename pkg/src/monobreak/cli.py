"""Command-line entry points: ``witness``, ``decompose`` and ``bench``.

Exit codes: 0 success (for ``decompose``: certified), 1 uncertified,
2 usage error, 3 computation failure (budget, validation, no witness points).
"""

from __future__ import annotations

import argparse
import copy
import statistics
import sys
import time
from contextlib import ExitStack
from typing import IO, Sequence

import numpy as np

from .breakup import BreakupResult, run_classic, run_edgewise
from .embedding import embed
from .polysys import ParseError, PolySystem, parse_system
from .scheduler import Scheduler
from .startsolve import DEFAULT_BUDGET, BudgetExceeded, NoWitnessPoints, witness_points
from .systems import adjacent_minors, cyclic
from .trace import TRACE_TOL
from .witness import WitnessSet, read_witness, validate, write_witness

__all__ = ["main", "build_parser", "cmd_witness", "cmd_decompose", "cmd_bench", "format_report", "parse_report"]

EXIT_OK, EXIT_UNCERTIFIED, EXIT_USAGE, EXIT_FAILURE = 0, 1, 2, 3
REPORT_HEADER = "# monobreak decomposition report"
BENCH_ROWS = ("initial", "master", "min track", "max track", "total")


# --- reports -------------------------------------------------------------------------------


def format_report(res: BreakupResult, *, algorithm: str, seed: int, dim: int, workers: int) -> str:
    """Stable text report: ``key: value`` lines, one ``group`` line per group (1-based members)."""
    st = res.stats
    lines = [
        REPORT_HEADER,
        f"algorithm: {algorithm}",
        f"seed: {seed}",
        f"dimension: {dim}",
        f"degree: {sum(len(g) for g in res.groups)}",
        f"certified: {'yes' if res.certified else 'no'}",
        f"groups: {len(res.groups)}",
        f"degrees: {' '.join(str(d) for d in res.degrees)}",
    ]
    certs = {c.group: c for c in res.certificates}
    for i, g in enumerate(res.groups, 1):
        c = certs.get(frozenset(g))
        tail = f" residual {c.residual!r} passed {'yes' if c.passed else 'no'}" if c else " residual nan passed no"
        lines.append(f"group {i}: degree {len(g)} members {' '.join(str(m + 1) for m in g)}{tail}")
    stat_items = [
        ("paths_tracked", st.paths_tracked), ("grid_paths", st.grid_paths), ("loop_paths", st.loop_paths),
        ("merges", st.merges), ("paths_per_merge", st.paths_per_merge), ("failures", st.failures),
        ("crossings", st.crossings), ("loops", st.loops), ("loops_discarded", st.loops_discarded),
        ("edges", st.edges), ("new_points", st.new_points), ("late_results", st.late_results),
        ("full_trace_residual", st.full_trace_residual),
        ("workers", workers), ("time_initial", st.time_initial), ("time_master", st.master_busy),
        ("time_min_track", st.track_min), ("time_max_track", st.track_max), ("time_total", st.wall_time),
    ]
    if res.scheduler is not None:
        stat_items += [("master_share", res.scheduler.master_share),
                       ("master_idle_fraction", res.scheduler.master_idle_fraction),
                       ("jobs_per_worker", " ".join(str(j) for j in res.scheduler.jobs_per_worker))]
    lines += [f"stat {k}: {v!r}" if isinstance(v, float) else f"stat {k}: {v}" for k, v in stat_items]
    lines += [f"rejections {pair}: {n}" for pair, n in st.rejections.items()]
    return "\n".join(lines) + "\n"


def _value(text: str):
    for conv in (int, float):
        try:
            return conv(text)
        except ValueError:
            pass
    return text


def parse_report(text: str) -> dict:
    """Inverse of ``format_report``: header fields, groups, stats and rejections."""
    lines = text.splitlines()
    if not lines or lines[0] != REPORT_HEADER:
        raise ValueError("not a decomposition report")
    out: dict = {"groups": [], "stats": {}, "rejections": {}}
    for line in lines[1:]:
        key, _, val = line.partition(": ")
        if key.startswith("group "):
            f = val.split()
            members = f[f.index("members") + 1:f.index("residual")]
            out["groups"].append({
                "degree": int(f[1]),
                "members": [int(m) for m in members],
                "residual": float(f[f.index("residual") + 1]),
                "passed": f[-1] == "yes",
            })
        elif key.startswith("stat "):
            out["stats"][key[5:]] = _value(val) if key != "stat jobs_per_worker" else [int(v) for v in val.split()]
        elif key.startswith("rejections "):
            out["rejections"][key[11:]] = int(val)
        elif key == "certified":
            out[key] = val == "yes"
        elif key == "groups":
            out["n_groups"] = int(val)
        elif key == "degrees":
            out[key] = [int(v) for v in val.split()]
        else:
            out[key] = _value(val)
    return out


# --- helpers -------------------------------------------------------------------------------


class UsageError(Exception):
    pass


def _load_system(path: str) -> PolySystem:
    with open(path) as fh:
        return parse_system(fh.read())


def _check_dim(sys_: PolySystem, k: int) -> None:
    if not 1 <= k < sys_.n_vars:
        raise UsageError(f"--dim must be between 1 and {sys_.n_vars - 1}")


def _scheduler(args, stack: ExitStack) -> Scheduler:
    trace = stack.enter_context(open(args.trace_jobs, "w")) if getattr(args, "trace_jobs", None) else None
    return stack.enter_context(Scheduler(args.workers, trace))


def _solve_witness(sys_: PolySystem, k: int, rng, scheduler: Scheduler, budget: int) -> WitnessSet:
    return witness_points(embed(sys_, k, rng), rng, scheduler=scheduler, budget=budget)


def _breakup(w: WitnessSet, args, rng, scheduler: Scheduler) -> BreakupResult:
    if args.algo == "classic":
        return run_classic(w, args.max_loops, rng, scheduler=scheduler, trace_tol=args.trace_tol,
                           max_paths=args.max_paths)
    return run_edgewise(w, args.slices, args.max_paths, rng, scheduler=scheduler, trace_tol=args.trace_tol)


# --- commands ------------------------------------------------------------------------------


def cmd_witness(args, out: IO[str]) -> int:
    sys_ = _load_system(args.system)
    _check_dim(sys_, args.dim)
    rng = np.random.default_rng(args.seed)
    with ExitStack() as stack:
        w = _solve_witness(sys_, args.dim, rng, _scheduler(args, stack), args.budget)
    rep = validate(w)
    out.write(f"n: {w.emb.n}\nk: {w.dim}\nd: {w.degree}\n")
    out.write(f"max residual: {max(rep.residuals)!r}\nmin separation: {rep.min_separation!r}\n")
    out.write(f"valid: {'yes' if rep.passed else 'no'}\n")
    if args.out:
        with open(args.out, "w") as fh:
            write_witness(w, fh)
    return EXIT_OK if rep.passed else EXIT_FAILURE


def cmd_decompose(args, out: IO[str]) -> int:
    sys_ = _load_system(args.system)
    rng = np.random.default_rng(args.seed)
    with ExitStack() as stack:
        sched = _scheduler(args, stack)
        if args.witness:
            with open(args.witness) as fh:
                w = read_witness(fh.read(), sys_, rng)
            if not validate(w).passed:
                raise RuntimeError("witness file does not validate against the system")
        else:
            if args.dim is None:
                raise UsageError("give --dim or --witness")
            _check_dim(sys_, args.dim)
            w = _solve_witness(sys_, args.dim, rng, sched, args.budget)
        res = _breakup(w, args, rng, sched)
    report = format_report(res, algorithm=args.algo, seed=args.seed, dim=w.dim, workers=args.workers)
    out.write(report)
    if args.report:
        with open(args.report, "w") as fh:
            fh.write(report)
    return EXIT_OK if res.certified else EXIT_UNCERTIFIED


def _parse_seeds(text: str) -> list[int]:
    seeds: list[int] = []
    for part in text.split(","):
        if "-" in part.strip("-"):
            lo, hi = part.split("-")
            seeds.extend(range(int(lo), int(hi) + 1))
        else:
            seeds.append(int(part))
    if not seeds:
        raise argparse.ArgumentTypeError("empty seed list")
    return seeds


def _median(values) -> float:
    return float(statistics.median(values))


def cmd_bench(args, out: IO[str]) -> int:
    if args.family == "cyclic":
        sys_, k = cyclic(args.size), 1
    else:
        sys_, k = adjacent_minors(args.size), args.size + 1
    algos = ["classic", "edgewise"] if args.algo == "both" else [args.algo]
    runs: dict[str, list[BreakupResult]] = {a: [] for a in algos}
    header = f"{'algo':<9} {'seed':>5} {'paths':>6} {'merges':>6} {'cert':>4} " + " ".join(
        f"{r:>10}" for r in BENCH_ROWS)
    out.write(f"# {args.family}-{args.size}, k={k}, workers={args.workers}\n{header}\n")
    with ExitStack() as stack:
        sched = _scheduler(args, stack)
        for seed in args.seeds:
            rng = np.random.default_rng(seed)
            t0 = time.perf_counter()
            w = _solve_witness(sys_, k, rng, sched, args.budget)
            t_witness = time.perf_counter() - t0
            for algo in algos:
                a = copy.copy(args)
                a.algo = algo
                res = _breakup(w, a, copy.deepcopy(rng), sched)
                res.stats.time_initial += t_witness
                res.stats.wall_time += t_witness
                runs[algo].append(res)
                st = res.stats
                times = (st.time_initial, st.master_busy, st.track_min, st.track_max, st.wall_time)
                out.write(f"{algo:<9} {seed:>5} {st.paths_tracked:>6} {st.merges:>6} "
                          f"{'yes' if res.certified else 'no':>4} " + " ".join(f"{t:>10.3f}" for t in times) + "\n")
    out.write("\n# medians over seeds (seconds, paths)\n")
    out.write(f"{'row':<12}" + "".join(f"{a:>12}" for a in algos) + "\n")
    fields = {
        "initial": lambda s: s.time_initial, "master": lambda s: s.master_busy,
        "min track": lambda s: s.track_min, "max track": lambda s: s.track_max, "total": lambda s: s.wall_time,
    }
    for row in BENCH_ROWS:
        out.write(f"{row:<12}" + "".join(f"{_median(fields[row](r.stats) for r in runs[a]):>12.3f}" for a in algos)
                  + "\n")
    out.write(f"{'paths':<12}" + "".join(f"{_median(r.stats.paths_tracked for r in runs[a]):>12.1f}" for a in algos)
              + "\n")
    out.write(f"{'certified':<12}" + "".join(f"{sum(r.certified for r in runs[a]):>9}/{len(runs[a]):<2}"
                                                for a in algos) + "\n")
    return EXIT_OK if all(r.certified for rs in runs.values() for r in rs) else EXIT_UNCERTIFIED


# --- argument parsing ----------------------------------------------------------------------


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _nonneg(text: str) -> int:
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="monobreak", description="Numerical irreducible decomposition by monodromy.")
    sub = p.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, required=True, help="random seed (required, no default)")
    common.add_argument("--workers", type=_positive, default=1)
    common.add_argument("--trace-jobs", metavar="FILE", help="record the job/result stream as JSON lines")
    common.add_argument("--budget", type=_positive, default=DEFAULT_BUDGET, help="max start-system paths")

    w = sub.add_parser("witness", parents=[common], help="compute a witness set")
    w.add_argument("system")
    w.add_argument("--dim", type=int, required=True)
    w.add_argument("--out", metavar="WFILE")

    engine = argparse.ArgumentParser(add_help=False)
    engine.add_argument("--slices", type=_positive, default=3, help="new slices for edgewise")
    engine.add_argument("--max-loops", type=_positive, default=20, help="loop bound for classic")
    engine.add_argument("--max-paths", type=_nonneg, default=10_000)
    engine.add_argument("--trace-tol", type=float, default=TRACE_TOL)

    d = sub.add_parser("decompose", parents=[common, engine], help="decompose a witness set")
    d.add_argument("system")
    d.add_argument("--algo", choices=["classic", "edgewise"], default="edgewise")
    d.add_argument("--dim", type=int)
    d.add_argument("--witness", metavar="WFILE")
    d.add_argument("--report", metavar="FILE")

    b = sub.add_parser("bench", parents=[engine], help="compare the engines over seeds")
    b.add_argument("family", choices=["cyclic", "minors"])
    b.add_argument("size", type=_positive)
    b.add_argument("--algo", choices=["classic", "edgewise", "both"], default="both")
    b.add_argument("--seeds", type=_parse_seeds, required=True, help="e.g. 0-19 or 1,5,9")
    b.add_argument("--workers", type=_positive, default=1)
    b.add_argument("--trace-jobs", metavar="FILE")
    b.add_argument("--budget", type=_positive, default=DEFAULT_BUDGET)
    return p


COMMANDS = {"witness": cmd_witness, "decompose": cmd_decompose, "bench": cmd_bench}


def main(argv: Sequence[str] | None = None, out: IO[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    out = out or sys.stdout
    try:
        return COMMANDS[args.command](args, out)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"monobreak: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ParseError) as exc:
        print(f"monobreak: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (BudgetExceeded, NoWitnessPoints, RuntimeError, ValueError) as exc:
        print(f"monobreak: failed: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
