from __future__ import annotations

import json
import random

import pytest
from hypothesis import given, settings, strategies as st

from sigforge.frontend import compile_source
from sigforge.sim import (
    AlwaysEquals, InitEquals, SimulationError, StepInvariant, Testbench, Value, check_property,
    compile_design, eval_cycle, initial_state, run, simulate,
)
from sigforge.ir import Register

import reference_models
from conftest import CORPUS_DIR, corpus_design, corpus_names, corpus_tb
from design_gen import random_design
from oracle import Interp, run_sequence


def test_value_invariants():
    with pytest.raises(ValueError):
        Value(16, 4)
    assert int(Value(15, 4)) == 15


def test_counter_first_cycles(counter):
    assert [o["count"] for o in simulate(counter, [{}] * 4)] == [0, 1, 2, 3]


def test_mux3_selects_c(mux3):
    assert simulate(mux3, [{"sel": 0b10, "a": 5, "b": 6, "c": 7}])[0]["y"] == 7


def test_add_wraps():
    d = compile_source("module m (in a: bv8, in b: bv8) -> (out y: bv8) { y = a + b; }")
    assert simulate(d, [{"a": 200, "b": 100}])[0]["y"] == 44


@pytest.mark.parametrize("amount,expected", [(0, 0b1011), (1, 0b0110), (3, 0b1000), (4, 0), (15, 0)])
def test_shift_left_saturates(amount, expected):
    d = compile_source("module m (in a: bv4, in s: bv4) -> (out y: bv4) { y = a << s; }")
    assert simulate(d, [{"a": 0b1011, "s": amount}])[0]["y"] == expected


def test_shift_right_logical():
    d = compile_source("module m (in a: bv4, in s: bv4) -> (out y: bv4) { y = a >> s; }")
    assert [o["y"] for o in simulate(d, [{"a": 0b1000, "s": s} for s in (1, 3, 4)])] == [0b0100, 1, 0]


def test_eval_cycle_pure(counter):
    st0 = initial_state(counter)
    a = eval_cycle(counter, st0, {})
    b = eval_cycle(counter, st0, {})
    assert a == b and st0.cycle == 0 and a[1].cycle == 1


def test_initial_state_holds_inits():
    d = corpus_design("lfsr8")
    st0 = initial_state(d)
    for rid, v in st0.regs.items():
        assert v == d.graph.nodes[rid].init


def test_missing_or_bad_input_is_error(mux3):
    with pytest.raises(SimulationError):
        eval_cycle(mux3, initial_state(mux3), {"sel": 0, "a": 1, "b": 2})
    with pytest.raises(SimulationError):
        eval_cycle(mux3, initial_state(mux3), {"sel": 4, "a": 1, "b": 2, "c": 3})


def test_register_semantics_anchor():
    """value(r, 0) = init(r) and value(r, t+1) = eval(next(r), t), with the
    right-hand side computed by the independent interpreter."""
    d = corpus_design("accumulator")
    rng = random.Random(3)
    seq = [{"clear": rng.getrandbits(1), "d": rng.getrandbits(8)} for _ in range(30)]
    it = Interp(d)
    reg = next(i for i, n in enumerate(d.graph.nodes) if isinstance(n, Register))
    k = it.regs.index(reg)
    st_, ref = initial_state(d), it.initial()
    assert st_.regs[reg] == d.graph.nodes[reg].init == ref[k]
    for inp in seq:
        _, st_ = eval_cycle(d, st_, inp)
        _, ref = it.step(ref, inp)
        assert st_.regs[reg] == ref[k]


def test_rom_contents_invariant():
    d = corpus_design("square_rom")
    outs = simulate(d, [{"x": x % 16} for x in range(64)])
    assert [o["y"] for o in outs] == [(x % 16) ** 2 for x in range(64)]


def test_ram_read_after_write():
    d = corpus_design("ram16")
    seq = [{"we": 1, "waddr": 5, "wdata": 99, "raddr": 0},
           {"we": 0, "waddr": 0, "wdata": 0, "raddr": 5},
           {"we": 0, "waddr": 0, "wdata": 0, "raddr": 0}]
    # sync read: the value read on cycle 1 appears on cycle 2
    assert [o["rdata"] for o in simulate(d, seq)] == [0, 0, 99]


def test_ram_read_before_write_same_cycle():
    d = corpus_design("ram16")
    seq = [{"we": 1, "waddr": 3, "wdata": 7, "raddr": 3}, {"we": 0, "waddr": 0, "wdata": 0, "raddr": 3},
           {"we": 0, "waddr": 0, "wdata": 0, "raddr": 0}]
    assert [o["rdata"] for o in simulate(d, seq)] == [0, 0, 7]


def test_testbench_counts(counter):
    good = Testbench.from_json(json.dumps([{"cycle": t, "inputs": {}, "expect": {"count": t}} for t in range(10)]))
    bad = Testbench.from_json(json.dumps([{"cycle": t, "inputs": {}, "expect": {"count": 0}} for t in range(10)]))
    assert run(counter, good).summary() == "0 mismatches in 10 samples"
    r = run(counter, bad)
    assert r.summary() == "9 mismatches in 10 samples"
    assert (r.first_mismatch.cycle, r.first_mismatch.output) == (1, "count")


def test_empty_testbench(counter):
    assert run(counter, Testbench([])).summary() == "0 mismatches in 0 samples"


def test_truncation_flag(counter):
    tb = Testbench.from_json(json.dumps([{"cycle": t, "inputs": {}, "expect": {"count": t}} for t in range(10)]))
    r = run(counter, tb, max_cycles=5)
    assert r.truncated and r.samples_checked == 5 and r.mismatches == 0


def test_testbench_validation():
    with pytest.raises(ValueError):
        Testbench.from_json('[{"cycle": 1, "inputs": {}, "expect": {}}, {"cycle": 1, "inputs": {}, "expect": {}}]')
    with pytest.raises(ValueError):
        Testbench.from_json('{"cycle": 0}')


def test_inputs_hold_between_records(mux3):
    tb = Testbench.from_json(json.dumps([
        {"cycle": 0, "inputs": {"sel": 1, "a": 1, "b": 2, "c": 3}, "expect": {"y": 2}},
        {"cycle": 3, "inputs": {}, "expect": {"y": 2}},
    ]))
    assert run(mux3, tb).summary() == "0 mismatches in 2 samples"


@pytest.mark.parametrize("name", corpus_names())
def test_corpus_testbench_passes(name):
    r = run(corpus_design(name), corpus_tb(name))
    assert r.mismatches == 0 and r.samples_checked > 0


@pytest.mark.parametrize("name", corpus_names())
def test_committed_testbench_matches_reference_model(name):
    assert (CORPUS_DIR / f"{name}.tb.json").read_text() == reference_models.testbench_text(name)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 100_000), st.integers(0, 6))
def test_simulator_agrees_with_interpreter(seed, regs):
    d = random_design(seed, 8, regs, depth=4)
    rng = random.Random(seed)
    names = [(n, t.width) for n, t in d.graph.input_types()]
    seq = [{n: rng.getrandbits(w) for n, w in names} for _ in range(12)]
    got = [tuple(o[n] for n, _ in d.graph.outputs) for o in simulate(d, seq)]
    assert got == run_sequence(d, seq)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 100_000))
def test_debug_mode_masks(seed):
    d = random_design(seed, 8, 4, depth=4)
    cd = compile_design(d, debug=True)
    st_ = cd.initial_state
    rng = random.Random(seed)
    for _ in range(10):
        inp = tuple(rng.getrandbits(t.width) for t in cd.input_types)
        _, st_ = cd.step(inp, st_)


# --- bounded properties ---


def test_counter_init_property(counter):
    assert check_property(counter, InitEquals("count", 0)).holds


def test_counter_step_property(counter):
    r = check_property(counter, StepInvariant("count", lambda a, b: b == (a + 1) % 256, 1000))
    assert r.holds and r.bound == 1000 and r.exhaustive


def test_counter_init_one_violated(counter):
    r = check_property(counter, InitEquals("count", 1))
    assert not r.holds and r.cycle == 0


def test_step_property_violation_witness():
    d = corpus_design("accumulator")
    r = check_property(d, StepInvariant("acc", lambda a, b: b >= a, 8), n_random=200)
    assert not r.holds and r.witness is not None
    # the witness replays to the violation
    outs = [o["acc"] for o in simulate(d, r.witness)]
    assert outs[r.cycle + 1] < outs[r.cycle]


def test_always_equals(counter):
    sub = compile_source("module counter () -> (out count: bv8) { reg c: bv8 = 0; c <= c - 255:bv8; count = c; }")
    assert check_property(counter, AlwaysEquals(sub, 300)).holds
    other = compile_source("module counter () -> (out count: bv8) { reg c: bv8 = 0; c <= c + 2:bv8; count = c; }")
    r = check_property(counter, AlwaysEquals(other, 10))
    assert not r.holds and r.cycle == 1
