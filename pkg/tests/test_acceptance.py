"""Acceptance suite: one PASS/FAIL line per criterion, printed in the terminal summary."""

import io
import math
import os
import statistics
import time

import numpy as np
import pytest
import sympy as sp

from conftest import line_x, parabola_witness, record_criterion
from monobreak.breakup import run_edgewise, two_edge_loop
from monobreak.cli import main, parse_report
from monobreak.embedding import embed, random_slice, random_unit
from monobreak.polysys import format_system, parse_system
from monobreak.startsolve import witness_points
from monobreak.systems import EXAMPLES, adjacent_minors, cyclic
from monobreak.trace import TraceGrid, trace_test
from monobreak.tracker import MonodromyHomotopy, PathStatus, TotalDegreeHomotopy, track
from monobreak.witness import validate
from oracles import (adjacent_minors_2xn_component_degrees, cyclic4_component_degrees, hypersurface_factor_degrees,
                     sqrt_branch_along_pencil)
from test_polysys import finite_difference_jacobian, random_system

SEEDS = range(20)
TIME_LIMIT = 30.0

x1, x2 = sp.symbols("x1 x2")
DESK_SYSTEMS = {
    # name: (system text, k, oracle degrees)
    "parabola": (EXAMPLES["parabola"], 1, lambda: hypersurface_factor_degrees(x2**2 - x1)),
    "two-hyperbolas": (EXAMPLES["two-hyperbolas"], 1,
                       lambda: hypersurface_factor_degrees((x1 * x2 - 1) * (x1 * x2 + 1))),
    "hyperbolas-and-line": (EXAMPLES["hyperbolas-and-line"], 1,
                            lambda: hypersurface_factor_degrees((x1 * x2 - 1) * (x1 * x2 + 1) * (x1 - x2))),
    "minors-2x4": (format_system(adjacent_minors(4)), 5, lambda: adjacent_minors_2xn_component_degrees(4)),
}


def call(*argv):
    out = io.StringIO()
    code = main([str(a) for a in argv], out)
    return code, out.getvalue()


@pytest.fixture(scope="module")
def system_files(tmp_path_factory):
    d = tmp_path_factory.mktemp("systems")
    paths = {"cyclic-4": d / "cyclic4.txt"}
    paths["cyclic-4"].write_text(format_system(cyclic(4)))
    for name, (text, _, _) in DESK_SYSTEMS.items():
        paths[name] = d / f"{name}.txt"
        paths[name].write_text(text)
    return paths


@pytest.fixture(scope="module")
def cyclic4_runs(system_files):
    """cmd_decompose on cyclic-4 for 20 seeds and both engines: (code, report, seconds)."""
    runs = {}
    for algo in ("classic", "edgewise"):
        for seed in SEEDS:
            t0 = time.perf_counter()
            code, text = call("decompose", system_files["cyclic-4"], "--dim", 1, "--seed", seed, "--algo", algo)
            runs[algo, seed] = (code, parse_report(text), time.perf_counter() - t0)
    return runs


def test_criterion_1_cyclic4_decomposition(cyclic4_runs):
    bad = [(a, s) for (a, s), (code, rep, secs) in cyclic4_runs.items()
           if code != 0 or not rep["certified"] or rep["degrees"] != [2, 2] or secs >= TIME_LIMIT]
    slowest = max(secs for _, _, secs in cyclic4_runs.values())
    ok = not bad and cyclic4_component_degrees() == [2, 2]
    record_criterion(1, ok, f"{len(cyclic4_runs) - len(bad)}/{len(cyclic4_runs)} runs certified {{2,2}}, "
                            f"slowest {slowest:.2f}s (limit {TIME_LIMIT:.0f}s)")
    assert ok, bad


def test_criterion_2_witness_degrees(system_files):
    _, c4 = call("witness", system_files["cyclic-4"], "--dim", 1, "--seed", 0)
    _, par = call("witness", system_files["parabola"], "--dim", 1, "--seed", 0)
    ok = "d: 4" in c4.splitlines() and "d: 2" in par.splitlines()
    record_criterion(2, ok, "cyclic-4 d=4 and y^2-x d=2")
    assert ok


def test_criterion_3_branch_loop():
    w = parabola_witness(1)
    K = line_x(-1)
    perm_swap, back_swap = two_edge_loop(w, K, 1j, 1j)
    perm_id, back_id = two_edge_loop(w, K, 1j, -1j)
    errors = []
    for i, p in enumerate(w.points):
        mid = sqrt_branch_along_pencil(1j, 1, -1, p[1])
        errors.append(abs(back_swap[i][1] - sqrt_branch_along_pencil(1j, -1, 1, mid)))
        errors.append(abs(back_id[i][1] - sqrt_branch_along_pencil(-1j, -1, 1, mid)))
    ok = perm_swap == [1, 0] and perm_id == [0, 1] and max(errors) < 1e-6
    record_criterion(3, ok, f"gamma2=i gives {perm_swap}, gamma2=-i gives {perm_id}, "
                            f"max endpoint error {max(errors):.1e}")
    assert ok


def test_criterion_4_trace_numerics():
    ws = [parabola_witness(c) for c in (1, 2, 3)]
    grid = TraceGrid.from_parts(ws[0], ws[1], ws[2], np.array([0, 1]))
    full = trace_test(grid, {0, 1}).residual
    expected = abs(2 * math.sqrt(2) - 1 - math.sqrt(3))
    singles = [trace_test(grid, {i}).residual for i in range(2)]
    ok = full < 1e-8 and all(abs(s - expected) < 1e-6 for s in singles)
    record_criterion(4, ok, f"full residual {full:.1e}, singleton residuals {singles[0]:.6f} (expected {expected:.6f})")
    assert ok


def test_criterion_5_reversal_identity():
    families = [(cyclic(4), 1)] + [(parse_system(text), k) for text, k, _ in DESK_SYSTEMS.values()]
    witnesses = []
    for i, (sys_, k) in enumerate(families):
        rng = np.random.default_rng(100 + i)
        witnesses.append(witness_points(embed(sys_, k, rng), rng))
    rng = np.random.default_rng(5)
    identities = merges = 0
    for _ in range(50):
        w = witnesses[int(rng.integers(len(witnesses)))]
        K = random_slice(w.emb.n, w.dim, rng)
        g = random_unit(rng)
        perm, _ = two_edge_loop(w, K, g, 1 / g)
        if perm == list(range(w.degree)):
            identities += 1
        elif perm is not None:
            merges += sum(1 for i, j in enumerate(perm) if i != j)
    ok = identities == 50 and merges == 0
    record_criterion(5, ok, f"{identities}/50 retraced loops gave the identity, {merges} merges")
    assert ok


@pytest.fixture(scope="module")
def desk_results(system_files):
    out = {}
    for name, (_, k, oracle) in DESK_SYSTEMS.items():
        expected = oracle()
        for algo in ("classic", "edgewise"):
            code, text = call("decompose", system_files[name], "--dim", k, "--seed", 1, "--algo", algo)
            out[name, algo] = (expected, code, parse_report(text))
    return out


def test_criterion_6_oracle_equivalence(desk_results):
    bad = [(n, a, rep["degrees"], exp) for (n, a), (exp, code, rep) in desk_results.items()
           if code != 0 or not rep["certified"] or rep["degrees"] != exp]
    ok = not bad
    summary = ", ".join(f"{n} {exp}" for (n, a), (exp, _, _) in desk_results.items() if a == "classic")
    record_criterion(6, ok, f"certified degrees equal oracle for both engines: {summary}")
    assert ok, bad


@pytest.mark.skipif(bool(os.environ.get("MONOBREAK_SKIP_STRETCH")), reason="MONOBREAK_SKIP_STRETCH is set")
def test_criterion_6_stretch_minors_2x9():
    rng = np.random.default_rng(0)
    w = witness_points(embed(adjacent_minors(9), 10, rng), rng)
    res = run_edgewise(w, 3, 200_000, rng)
    ok = res.certified and len(res.groups) == 34 and res.degrees == adjacent_minors_2xn_component_degrees(9)
    record_criterion("6 (stretch, not gating)", ok, f"2x9 minors: d={w.degree}, {len(res.groups)} groups, "
                                                    f"certified={res.certified}, {res.stats.paths_tracked} paths")
    assert ok


def test_criterion_7_edge_economy(cyclic4_runs):
    paths = {a: [cyclic4_runs[a, s][1]["stats"]["paths_tracked"] for s in SEEDS] for a in ("classic", "edgewise")}
    med = {a: statistics.median(v) for a, v in paths.items()}
    code, table = call("bench", "cyclic", 4, "--algo", "both", "--seeds", "0")
    labels = {ln.split("  ")[0].strip() for ln in table.splitlines()}
    rows_ok = all(r in labels for r in ("initial", "master", "min track", "max track", "total"))
    ok = med["edgewise"] <= med["classic"] and rows_ok
    record_criterion(7, ok, f"median paths edgewise {med['edgewise']} <= classic {med['classic']}; "
                            f"bench rows present: {rows_ok}")
    assert ok


def _strip_times(text: str) -> str:
    skip = ("stat time_", "stat master_", "stat jobs_per_worker", "stat workers")
    return "\n".join(ln for ln in text.splitlines() if not ln.startswith(skip))


def test_criterion_8_parallel_consistency(system_files):
    cases = [("cyclic-4", 1)] + [(n, k) for n, (_, k, _) in DESK_SYSTEMS.items()]
    mismatches = []
    for name, k in cases:
        for algo in ("classic", "edgewise"):
            partitions = {}
            for workers in (1, 2, 4):
                code, text = call("decompose", system_files[name], "--dim", k, "--seed", 3, "--algo", algo,
                                  "--workers", workers)
                rep = parse_report(text)
                partitions[workers] = (rep["certified"], {frozenset(g["members"]) for g in rep["groups"]})
            if not all(p == partitions[1] and p[0] for p in partitions.values()):
                mismatches.append((name, algo))
    serial = [call("decompose", system_files["cyclic-4"], "--dim", 1, "--seed", 9, "--algo", a)[1]
              for a in ("classic", "classic", "edgewise", "edgewise")]
    reproducible = _strip_times(serial[0]) == _strip_times(serial[1]) and \
        _strip_times(serial[2]) == _strip_times(serial[3])
    ok = not mismatches and reproducible
    record_criterion(8, ok, f"{2 * len(cases) - len(mismatches)}/{2 * len(cases)} system/engine pairs agree "
                            f"for workers 1,2,4; serial reproducible: {reproducible}")
    assert ok, mismatches


def test_criterion_9_numerical_hygiene():
    rng = np.random.default_rng(21)
    jac_worst = 0.0
    for _ in range(100):
        s = random_system(rng)
        x = rng.normal(size=s.n_vars) + 1j * rng.normal(size=s.n_vars)
        jac = s.jacobian(x)
        err = np.abs(jac - finite_difference_jacobian(s, x)).max() / max(1.0, np.abs(jac).max())
        jac_worst = max(jac_worst, err)

    systems = [(cyclic(4), 1)] + [(parse_system(text), k) for text, k, _ in DESK_SYSTEMS.values()]
    successes, residual_worst, valid = 0, 0.0, True
    for i, (sys_, k) in enumerate(systems):
        srng = np.random.default_rng(300 + i)
        emb = embed(sys_, k, srng)
        h = TotalDegreeHomotopy(emb.combined, random_unit(srng))
        results = [track(h, p) for p in h.start_points()]
        w = witness_points(emb, srng)
        valid &= validate(w).passed
        mono = MonodromyHomotopy(w.emb, w.slice, random_slice(emb.n, k, srng), random_unit(srng))
        results += [track(mono, p) for p in w.points]
        for r in results:
            if r.status is PathStatus.SUCCESS:
                successes += 1
                residual_worst = max(residual_worst, r.residual)
    ok = jac_worst < 1e-6 and residual_worst < 1e-10 and valid
    record_criterion(9, ok, f"worst Jacobian rel. error {jac_worst:.1e}, worst Success residual "
                            f"{residual_worst:.1e} over {successes} paths, witness validation: {valid}")
    assert ok
