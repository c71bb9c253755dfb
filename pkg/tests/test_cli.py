import io

import pytest

from monobreak.cli import main, parse_report
from monobreak.polysys import format_system
from monobreak.scheduler import read_trace
from monobreak.systems import adjacent_minors, cyclic
from oracles import adjacent_minors_2xn_component_degrees


@pytest.fixture
def files(tmp_path):
    c4 = tmp_path / "cyclic4.txt"
    c4.write_text(format_system(cyclic(4)))
    par = tmp_path / "parabola.txt"
    par.write_text("2\nx2^2 - x1;\n")
    m4 = tmp_path / "minors4.txt"
    m4.write_text(format_system(adjacent_minors(4)))
    return {"c4": str(c4), "par": str(par), "m4": str(m4), "dir": tmp_path}


def call(*argv):
    out = io.StringIO()
    code = main(list(argv), out)
    return code, out.getvalue()


def test_witness_cyclic4_and_parabola(files):
    code, text = call("witness", files["c4"], "--dim", "1", "--seed", "1")
    assert code == 0 and "d: 4" in text.splitlines()
    code, text = call("witness", files["par"], "--dim", "1", "--seed", "1")
    assert code == 0 and "d: 2" in text.splitlines()


def test_witness_dim_zero_is_usage_error(files):
    assert call("witness", files["c4"], "--dim", "0", "--seed", "1")[0] == 2


def test_seed_is_required(files):
    assert call("witness", files["c4"], "--dim", "1")[0] == 2


def test_witness_file_is_deterministic(files):
    paths = [files["dir"] / f"w{i}.txt" for i in range(2)]
    for p in paths:
        assert call("witness", files["c4"], "--dim", "1", "--seed", "7", "--out", str(p))[0] == 0
    assert paths[0].read_text() == paths[1].read_text()


def test_missing_file_and_parse_error(files):
    assert call("witness", str(files["dir"] / "nope.txt"), "--dim", "1", "--seed", "0")[0] == 2
    bad = files["dir"] / "bad.txt"
    bad.write_text("2\nx1 + x9;\n")
    assert call("witness", str(bad), "--dim", "1", "--seed", "0")[0] == 2


@pytest.mark.parametrize("algo", ["classic", "edgewise"])
def test_decompose_cyclic4(files, algo):
    report = files["dir"] / "report.txt"
    code, text = call("decompose", files["c4"], "--dim", "1", "--seed", "2", "--algo", algo, "--report", str(report))
    assert code == 0
    rep = parse_report(text)
    assert rep["certified"] and rep["degrees"] == [2, 2] and rep["algorithm"] == algo
    assert sorted(m for g in rep["groups"] for m in g["members"]) == [1, 2, 3, 4]
    assert report.read_text() == text


def test_decompose_from_witness_file(files):
    wfile = files["dir"] / "c4.w"
    call("witness", files["c4"], "--dim", "1", "--seed", "3", "--out", str(wfile))
    code, text = call("decompose", files["c4"], "--witness", str(wfile), "--seed", "3")
    assert code == 0 and parse_report(text)["degrees"] == [2, 2]


def test_decompose_needs_dim_or_witness(files):
    assert call("decompose", files["c4"], "--seed", "3")[0] == 2


def test_max_paths_zero_gives_uncertified_singletons(files):
    code, text = call("decompose", files["c4"], "--dim", "1", "--seed", "2", "--max-paths", "0")
    rep = parse_report(text)
    assert code != 0 and not rep["certified"] and rep["degrees"] == [1, 1, 1, 1]


def test_adjacent_minors_2x4(files):
    code, text = call("decompose", files["m4"], "--dim", "5", "--seed", "0")
    assert code == 0
    assert parse_report(text)["degrees"] == adjacent_minors_2xn_component_degrees(4)


def test_report_parses_back_losslessly(files):
    code, text = call("decompose", files["c4"], "--dim", "1", "--seed", "5", "--algo", "edgewise")
    rep = parse_report(text)
    assert rep["seed"] == 5 and rep["dimension"] == 1 and rep["degree"] == 4
    assert rep["stats"]["paths_tracked"] == rep["stats"]["grid_paths"] + rep["stats"]["loop_paths"]
    assert set(rep["rejections"]) == {"0-1", "0-2", "0-3", "1-2", "1-3", "2-3"}
    # every value printed is recovered exactly
    for line in text.splitlines()[1:]:
        key, _, val = line.partition(": ")
        if key.startswith("stat ") and key != "stat jobs_per_worker":
            assert repr(rep["stats"][key[5:]]) == val or str(rep["stats"][key[5:]]) == val
    with pytest.raises(ValueError):
        parse_report("nonsense")


def test_trace_jobs_file(files):
    trace = files["dir"] / "jobs.jsonl"
    code, text = call("decompose", files["c4"], "--dim", "1", "--seed", "2", "--trace-jobs", str(trace))
    jobs, results = read_trace(trace.read_text().splitlines())
    assert len(jobs) == len(results) > 0


def test_bench_single_seed_single_algo():
    code, text = call("bench", "cyclic", "4", "--algo", "edgewise", "--seeds", "3")
    lines = text.splitlines()
    rows = [ln for ln in lines if ln.startswith("edgewise ")]
    assert code == 0 and len(rows) == 1
    labels = [ln.split("  ")[0].strip() for ln in lines]
    for row in ("initial", "master", "min track", "max track", "total"):
        assert row in labels


def test_seed_list_parsing():
    from monobreak.cli import _parse_seeds
    assert _parse_seeds("0-3,7") == [0, 1, 2, 3, 7]
