from __future__ import annotations

import pytest

from sigforge.builder import Builder
from sigforge.diagnostics import CompileError
from sigforge.equiv import EquivConfig, Equivalent, equiv
from sigforge.ir import bv
from sigforge.sim import free_run, simulate

from conftest import corpus_design


def test_counter_via_builder_counts():
    b = Builder("counter")
    with b.circuit() as c:
        r = c.reg("r", bv(8), 0)
        c.next(r, r + 1)
    b.output("count", r)
    assert [o["count"] for o in free_run(b.build(), 4)] == [0, 1, 2, 3]


def test_integer_lifting_both_sides():
    b = Builder("m")
    a = b.input("a", bv(4))
    b.output("x", 3 - a)
    b.output("y", a ^ 0b1111)
    outs = simulate(b.build(), [{"a": 5}])[0]
    assert outs == {"x": (3 - 5) % 16, "y": 0b1010}


def test_slicing_is_inclusive_hardware_order():
    b = Builder("m")
    a = b.input("a", bv(8))
    b.output("hi", a[7:4])
    b.output("b0", a[0])
    outs = simulate(b.build(), [{"a": 0xA5}])[0]
    assert outs == {"hi": 0xA, "b0": 1}


def test_match_builds_mux3():
    b = Builder("mux3")
    sel = b.input("sel", bv(2))
    a, bb, c = (b.input(n, bv(8)) for n in "abc")
    b.output("y", b.match(sel, {0: a, 1: bb, 2: c}, 0))
    cfg = EquivConfig(random_fallback=True, random_sequences=300)
    assert isinstance(equiv(b.build(), corpus_design("mux3"), cfg), Equivalent)
    assert simulate(b.build(), [{"sel": 2, "a": 1, "b": 2, "c": 3}])[0]["y"] == 3


def test_signals_have_no_truth_value():
    b = Builder("m")
    a = b.input("a", bv(1))
    with pytest.raises(TypeError):
        bool(a)


def test_register_without_next_is_error():
    b = Builder("m")
    with pytest.raises(CompileError):
        with b.circuit() as c:
            c.reg("r", bv(2), 0)


def test_foreign_signal_rejected():
    b1, b2 = Builder("a"), Builder("b")
    x = b1.input("x", bv(4))
    y = b2.input("y", bv(4))
    with pytest.raises(ValueError):
        y + x


def test_rom_read():
    b = Builder("rom")
    addr = b.input("addr", bv(2))
    m = b.rom("t", 8, [10, 20, 30, 40])
    b.output("d", b.read(m, addr))
    assert [o["d"] for o in simulate(b.build(), [{"addr": i} for i in range(4)])] == [10, 20, 30, 40]


def test_rom_length_must_be_power_of_two():
    with pytest.raises(ValueError):
        Builder("rom").rom("t", 8, [1, 2, 3])
