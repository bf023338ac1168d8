from __future__ import annotations

from sigforge.cli import main
from sigforge.dashboard import RunRecord, load_records, summary_line, svg_matrix, text_grid, write_dashboard
from sigforge.ppa import STAGES, PipelineResult, evaluate
from sigforge.sim import Testbench

from conftest import corpus_source, corpus_tb


def _rec(name, src_name=None, tb=None):
    src_name = src_name or name
    return RunRecord(name, evaluate(corpus_source(src_name), testbench=tb))


def test_three_passing_records():
    recs = [_rec(n, tb=corpus_tb(n)) for n in ("counter", "mux3", "passthrough")]
    assert summary_line(recs) == "compile 3/3, sim 3/3"
    grid = text_grid(recs)
    for r in recs:
        row = next(ln for ln in grid.splitlines() if ln.startswith(r.problem + " "))
        assert row.split()[1:] == ["o"] * len(STAGES)


def test_mixed_glyphs():
    bad_tb = Testbench.from_json('[{"cycle": 0, "inputs": {}, "expect": {"count": 9}}]')
    recs = [_rec("bad_add"), _rec("counter", tb=bad_tb)]
    grid = text_grid(recs).splitlines()
    add_row = next(ln for ln in grid if ln.startswith("bad_add"))
    cnt_row = next(ln for ln in grid if ln.startswith("counter"))
    assert add_row.split()[1:] == ["x", ".", ".", ".", ".", "."]
    assert cnt_row.split()[1:] == ["o", "o", "o", "x", ".", "."]
    assert summary_line(recs) == "compile 1/2, sim 0/2"


def test_svg_has_one_cell_per_stage():
    recs = [_rec("counter"), _rec("bad_add")]
    svg = svg_matrix(recs)
    assert svg.count("<rect") == len(recs) * len(STAGES)
    assert svg.startswith("<svg") and svg.rstrip().endswith("</svg>")
    assert "bad_add compile: fail" in svg


def test_record_round_trip(tmp_path):
    r = RunRecord("counter", evaluate(corpus_source("counter")), "t0", "t1", {"K": 3})
    r.save(tmp_path)
    (back,) = load_records(tmp_path)
    assert back.to_json() == r.to_json()


def test_dashboard_deterministic(tmp_path):
    a = write_dashboard([_rec("counter"), _rec("mux3")], tmp_path / "a" / "dash")
    b = write_dashboard([_rec("counter"), _rec("mux3")], tmp_path / "b" / "dash")
    assert [p.read_bytes() for p in a] == [p.read_bytes() for p in b]


def test_cli_dashboard_empty_dir(tmp_path, capsys):
    assert main(["dashboard", str(tmp_path)]) == 1
    assert "no run records" in capsys.readouterr().err


def test_cli_dashboard_renders(tmp_path, capsys):
    _rec("counter").save(tmp_path)
    assert main(["dashboard", str(tmp_path)]) == 0
    assert "compile 1/1" in capsys.readouterr().out
    assert (tmp_path / "dashboard.svg").exists()


def test_pipeline_result_default_is_all_skipped():
    assert set(PipelineResult().stages.values()) == {"skipped"}
