from __future__ import annotations

import json

import pytest

from sigforge.cli import CORPUS_DIR, main

from conftest import corpus_source

C = str(CORPUS_DIR)


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def _write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_check_exit_codes(capsys):
    assert run(["check", f"{C}/counter.ckt"], capsys)[0] == 0
    code, out, err = run(["check", f"{C}/rejects/bad_add.ckt"], capsys)
    assert code == 1 and "WidthMismatch" in out + err
    assert run(["check", "/nonexistent.ckt"], capsys)[0] == 2


def test_check_json(capsys):
    code, out, _ = run(["check", "--json", f"{C}/rejects/bad_add.ckt"], capsys)
    data = json.loads(out)
    assert code == 1 and data


def test_unknown_subcommand_is_usage(capsys):
    assert run(["frobnicate"], capsys)[0] == 2


def test_sim_counts(tmp_path, capsys):
    code, out, _ = run(["sim", f"{C}/counter.ckt", "--tb", f"{C}/counter.tb.json"], capsys)
    assert code == 0 and "0 mismatches in" in out
    bad = _write(tmp_path, "bad.tb.json",
                 json.dumps([{"cycle": t, "inputs": {}, "expect": {"count": 0}} for t in range(10)]))
    code, out, _ = run(["sim", f"{C}/counter.ckt", "--tb", bad], capsys)
    assert code == 1 and "9 mismatches in 10 samples" in out


def test_emit_to_file_and_wrap(tmp_path, capsys):
    out_path = tmp_path / "c.sv"
    assert run(["emit", f"{C}/counter.ckt", "-o", str(out_path)], capsys)[0] == 0
    assert out_path.read_text().startswith("module counter")
    code, out, _ = run(["emit", f"{C}/counter.ckt", "--wrap", "top_module", "--map", "count=q"], capsys)
    assert code == 0 and "module top_module" in out


def test_emit_conflicting_map(capsys):
    code, _, err = run(["emit", f"{C}/counter.ckt", "--wrap", "t", "--map", "count=a", "--map", "count=b"], capsys)
    assert code == 2 and err


def test_lint(tmp_path, capsys):
    sv = _write(tmp_path, "m.sv", "module m (input logic [3:0] a, output logic [3:0] y);\n"
                                  "  assign y = a;\n  assign y = a;\nendmodule\n")
    assert run(["lint", sv], capsys)[0] == 1
    assert run(["lint", f"{C}/counter.ckt"], capsys)[0] == 0


def test_equiv_exit_codes(tmp_path, capsys):
    code, out, _ = run(["equiv", f"{C}/counter.ckt", f"{C}/counter.ckt"], capsys)
    assert code == 0 and json.loads(out)["verdict"] == "equivalent"
    init1 = _write(tmp_path, "c1.ckt", corpus_source("counter").replace("= 0;", "= 1;"))
    code, out, _ = run(["equiv", f"{C}/counter.ckt", init1], capsys)
    assert code == 1 and json.loads(out)["verdict"] == "counterexample"
    assert run(["equiv", f"{C}/mux3.ckt", f"{C}/mux3.ckt"], capsys)[0] == 3
    assert run(["equiv", f"{C}/mux3.ckt", f"{C}/counter.ckt"], capsys)[0] == 2


def test_optimize_and_chaos(tmp_path, capsys):
    out_src = tmp_path / "best.ckt"
    code, out, _ = run(["optimize", f"{C}/mux9.ckt", "--tb", f"{C}/mux9.tb.json", "-o", str(out_src)], capsys)
    assert code == 0 and "->" in out
    assert out_src.read_text() != corpus_source("mux9")
    code, out, _ = run(["optimize", f"{C}/mux3.ckt", "--tb", f"{C}/mux3.tb.json", "--generator", "chaos",
                        "--json"], capsys)
    assert code == 0 and all(r["rolled_back"] for r in json.loads(out))


def test_optimize_bad_baseline(capsys):
    assert run(["optimize", f"{C}/rejects/bad_add.ckt"], capsys)[0] == 1


def test_optimize_k_zero_is_usage(capsys):
    assert run(["optimize", f"{C}/mux9.ckt", "--K", "0"], capsys)[0] == 2


def test_external_backend_needs_command(capsys):
    assert run(["optimize", f"{C}/mux9.ckt", "--backend", "external"], capsys)[0] == 2


def test_explore_workdir(tmp_path, capsys):
    code, out, _ = run(["explore", f"{C}/mux9.ckt", "--tb", f"{C}/mux9.tb.json", "--workdir", str(tmp_path)],
                       capsys)
    assert code == 0 and "best: v" in out
    assert (tmp_path / "mux9" / "explore.json").exists()


def test_run_subset(tmp_path, capsys):
    code, out, _ = run(["run", f"{C}/counter.ckt", f"{C}/mux3.ckt", "--out", str(tmp_path), "--K", "1"], capsys)
    assert code == 0 and "compile 2/2, sim 2/2" in out
    assert (tmp_path / "run" / "counter" / "trajectory.json").exists()
    assert (tmp_path / "counter.record.json").exists()


def test_run_with_reject_fails(tmp_path, capsys):
    code, out, _ = run(["run", f"{C}/rejects", "--out", str(tmp_path), "--K", "0"], capsys)
    assert code == 1 and "compile 0/3" in out


def test_seed_from_environment(monkeypatch, capsys):
    monkeypatch.setenv("SIGFORGE_SEED", "notanint")
    assert run(["check", f"{C}/counter.ckt"], capsys)[0] == 2
    monkeypatch.setenv("SIGFORGE_SEED", "4")
    a = run(["optimize", f"{C}/mux3.ckt", "--generator", "chaos", "--json"], capsys)[1]
    b = run(["optimize", f"{C}/mux3.ckt", "--generator", "chaos", "--json", "--seed", "4"], capsys)[1]
    assert a == b


@pytest.mark.parametrize("argv", [["--help"], ["check", "--help"]])
def test_help_exits_zero(argv, capsys):
    assert run(argv, capsys)[0] == 0
