from __future__ import annotations

import dataclasses

import pytest
from hypothesis import given, settings, strategies as st

from sigforge.equiv import (
    Counterexample, EquivConfig, EquivError, Equivalent, Unknown, equiv, equiv_comb, equiv_seq, replay,
)
from sigforge.frontend import compile_source

from conftest import corpus_design
from design_gen import mutate, padded, random_design

MUX3_1BIT = """module mux3 (in sel: bv2, in a: bv1, in b: bv1, in c: bv1) -> (out y: bv1) {
  y = match sel { 0b00 => a, 0b01 => b, 0b10 => c, default => 0:bv1 };
}"""

MUX3_NESTED = """module mux3 (in sel: bv2, in a: bv1, in b: bv1, in c: bv1) -> (out y: bv1) {
  y = mux(sel == 0:bv2, a, mux(sel == 1:bv2, b, mux(sel == 2:bv2, c, 0:bv1)));
}"""

MUX3_SWAPPED = """module mux3 (in sel: bv2, in a: bv1, in b: bv1, in c: bv1) -> (out y: bv1) {
  y = match sel { 0b00 => a, 0b01 => c, 0b10 => b, default => 0:bv1 };
}"""

COUNTER_SUB = """module counter () -> (out count: bv8) {
  reg c: bv8 = 0;
  c <= c - 255:bv8;
  count = c;
}"""

COUNTER_INIT1 = """module counter () -> (out count: bv8) {
  reg c: bv8 = 1;
  c <= c + 1:bv8;
  count = c;
}"""


def test_mux3_vs_nested_mux_brute_comb():
    v = equiv_comb(compile_source(MUX3_1BIT), compile_source(MUX3_NESTED))
    assert v == Equivalent("brute_comb", "32 input vectors")


def test_mux3_arm_swap_first_lexicographic_counterexample():
    a, b = compile_source(MUX3_1BIT), compile_source(MUX3_SWAPPED)
    v = equiv_comb(a, b)
    assert isinstance(v, Counterexample)
    assert v.inputs == ({"sel": 0b01, "a": 0, "b": 0, "c": 1},)
    assert (v.cycle, v.output, v.lhs, v.rhs) == (0, "y", 0, 1)
    assert replay(v, a, b)


def test_reflexivity(mux3, counter):
    assert isinstance(equiv(counter, counter), Equivalent)
    assert isinstance(equiv(compile_source(MUX3_1BIT), compile_source(MUX3_1BIT)), Equivalent)


def test_wide_comb_unknown_without_fallback(mux3):
    v = equiv_comb(mux3, mux3)
    assert isinstance(v, Unknown) and "too large" in v.reason


def test_wide_comb_fallback_is_bounded(mux3):
    v = equiv_comb(mux3, mux3, EquivConfig(random_fallback=True, random_sequences=200))
    assert v == Equivalent("bounded", v.detail)


def test_counter_sub_255_state_explore(counter):
    v = equiv_seq(counter, compile_source(COUNTER_SUB))
    assert v == Equivalent("state_explore", "256 product states")


def test_counter_init_one_counterexample_at_cycle_zero(counter):
    other = compile_source(COUNTER_INIT1)
    v = equiv_seq(counter, other)
    assert isinstance(v, Counterexample) and v.cycle == 0
    assert (v.lhs, v.rhs) == (0, 1)
    assert replay(v, counter, other)


def test_over_cap_never_state_explore():
    src = """module big (in x: bv4) -> (out y: bv12) {
  reg r: bv12 = 0;
  r <= r + concat(0:bv8, x);
  y = r;
}"""
    a = compile_source(src)
    v = equiv_seq(a, a, EquivConfig(random_sequences=20, horizon=16))
    assert v == Equivalent("bounded", v.detail)
    b = compile_source(src.replace("r + concat", "r - concat"))
    v2 = equiv_seq(a, b, EquivConfig(random_sequences=20, horizon=16))
    assert isinstance(v2, Counterexample) and v2.method == "bounded" and replay(v2, a, b)


def test_ram_designs_use_bounded():
    d = corpus_design("ram16")
    v = equiv(d, d, EquivConfig(random_sequences=20, horizon=16))
    assert v == Equivalent("bounded", v.detail)


def test_signature_mismatch_is_error(counter, mux3):
    with pytest.raises(EquivError):
        equiv(counter, mux3)


def test_comb_mode_rejects_stateful(counter):
    with pytest.raises(EquivError):
        equiv_comb(counter, counter)


def test_config_positive():
    with pytest.raises(ValueError):
        EquivConfig(horizon=0)


def test_replay_tampered_cycle(counter):
    other = compile_source(COUNTER_INIT1)
    v = equiv_seq(counter, other)
    tampered = dataclasses.replace(v, cycle=v.cycle + 1)
    assert not replay(tampered, counter, other)
    assert not replay(dataclasses.replace(v, rhs=v.lhs), counter, other)


def test_replay_on_equivalent_pair_is_false(counter):
    cex = equiv_seq(counter, compile_source(COUNTER_INIT1))
    assert not replay(cex, counter, compile_source(COUNTER_SUB))


def test_to_dict_shapes(counter):
    cex = equiv_seq(counter, compile_source(COUNTER_INIT1))
    assert cex.to_dict()["verdict"] == "counterexample"
    assert Unknown("x").to_dict() == {"verdict": "unknown", "reason": "x"}


def _pair(seed: int):
    regs = 0 if seed % 2 == 0 else 1 + seed % 5
    a = random_design(seed, 10 if regs == 0 else 4, regs)
    b = padded(a) if seed % 3 == 0 else mutate(a, seed)
    return a, b


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 1_000_000))
def test_fresh_counterexamples_replay(seed):
    a, b = _pair(seed)
    v = equiv(a, b)
    if isinstance(v, Counterexample):
        assert replay(v, a, b)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 1_000_000))
def test_symmetry(seed):
    a, b = _pair(seed)
    assert isinstance(equiv(a, b), Equivalent) == isinstance(equiv(b, a), Equivalent)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 1_000_000))
def test_determinism(seed):
    a, b = _pair(seed)
    cfg = EquivConfig(seed=seed % 7)
    assert equiv(a, b, cfg) == equiv(a, b, cfg)


def test_rewritten_mux_chain_is_equivalent():
    from sigforge.rewrite import merge_mux_chains
    from sigforge.checker import elaborate

    src = """module chain (in s: bv3, in a: bv1, in b: bv1, in c: bv1, in d: bv1) -> (out y: bv1) {
  y = mux(s == 0:bv3, a, mux(s == 1:bv3, b, mux(s == 2:bv3, c, mux(s == 3:bv3, d,
      mux(s == 4:bv3, a, mux(s == 5:bv3, b, mux(s == 6:bv3, c, mux(s == 7:bv3, d, 0:bv1))))))));
}"""
    a = compile_source(src)
    g = a.graph.copy()
    assert merge_mux_chains(g)
    assert isinstance(equiv_comb(a, elaborate(g)), Equivalent)
