from __future__ import annotations

import json

import pytest
from hypothesis import given, settings, strategies as st

from sigforge.ir import (
    BIT, BinOp, Binary, Bundle, BundleGet, BundleMake, CircuitBlock, Concat, Const, DomainConfig, GraphError,
    Input, MAX_WIDTH, Match, MemDecl, Mux, Not, Register, SignalGraph, Slice, bv, infer_type,
)
from sigforge.diagnostics import Code

from conftest import corpus_design, corpus_names
from design_gen import random_design


def test_first_insertion_gets_id_zero():
    g = SignalGraph("t")
    assert g.add_node(Const(0, bv(8))) == 0
    assert len(g) == 1


def test_add_node_returns_fresh_ids_and_keeps_existing():
    g = SignalGraph("t")
    a = g.add_input("a", bv(8))
    b = g.add_input("b", bv(8))
    before = list(g.nodes)
    s = g.add_node(Binary(BinOp.ADD, a, b))
    assert s == 2 and g.nodes[:2] == before


def test_dangling_operand_rejected():
    g = SignalGraph("t")
    t = g.add_node(Const(1, bv(4)))
    with pytest.raises(GraphError):
        g.add_node(Mux(7, t, t))


@pytest.mark.parametrize("width", [0, MAX_WIDTH + 1])
def test_bitvec_width_cap(width):
    with pytest.raises((GraphError, ValueError)):
        bv(width)


def test_bundle_needs_two_elements():
    with pytest.raises((GraphError, ValueError)):
        Bundle((bv(3),))
    assert Bundle((bv(3), Bundle((BIT, bv(2))))).width == 6


def test_domain_config_invariants():
    with pytest.raises((GraphError, ValueError)):
        DomainConfig(clock_name="clk", reset_name="clk")
    with pytest.raises((GraphError, ValueError)):
        DomainConfig(clock_name="1clk")


def test_memdecl_contents_length_checked():
    with pytest.raises(GraphError):
        MemDecl("m", 2, 8, (0, 1, 2))


def test_duplicate_port_names_rejected():
    g = SignalGraph("t")
    a = g.add_input("a", bv(1))
    with pytest.raises(GraphError):
        g.add_input("a", bv(1))
    g.add_output("y", a)
    with pytest.raises(GraphError):
        g.add_output("y", a)


def test_infer_type_examples():
    g = SignalGraph("t")
    c = g.add_node(Const(5, bv(8)))
    a = g.add_input("a", bv(8))
    e = g.add_node(Binary(BinOp.EQ, a, c))
    x = g.add_node(Const(1, bv(3)))
    y = g.add_node(Const(1, bv(5)))
    cat = g.add_node(Concat(x, y))
    s = g.add_node(Slice(a, 6, 2))
    bm = g.add_node(BundleMake((a, e)))
    assert infer_type(g, c) == bv(8)
    assert infer_type(g, e) == BIT
    assert infer_type(g, cat) == bv(8)
    assert infer_type(g, s) == bv(5)
    assert infer_type(g, bm) == Bundle((bv(8), BIT))
    assert infer_type(g, g.add_node(BundleGet(bm, 1))) == BIT


def test_infer_type_independent_of_query_order():
    # a sibling still waiting on the work stack must not be mistaken for a cycle
    d = random_design(17, 4, 3)
    fwd = [str(infer_type(d.graph.copy(), i)) for i in range(len(d.graph.nodes))]
    g = d.graph.copy()
    rev = {i: str(infer_type(g, i)) for i in reversed(range(len(g.nodes)))}
    assert fwd == [rev[i] for i in range(len(fwd))]


def test_circuit_block_desugars_counter():
    g = SignalGraph("counter")
    blk = CircuitBlock(g)
    r = blk.reg("count", bv(8), 0)
    one = g.add_node(Const(1, bv(8)))
    blk.assign("count", g.add_node(Binary(BinOp.ADD, r, one)))
    assert blk.close() == []
    node = g.nodes[r]
    assert isinstance(node, Register) and node.init == 0
    nxt = g.nodes[node.next]
    assert isinstance(nxt, Binary) and nxt.op is BinOp.ADD and nxt.a == r


def test_circuit_block_undriven_and_double_assign():
    g = SignalGraph("t")
    blk = CircuitBlock(g)
    blk.reg("r", bv(2), 0)
    assert [d.code for d in blk.close()] == [Code.UNDRIVEN_REGISTER]

    g = SignalGraph("t")
    blk = CircuitBlock(g)
    r = blk.reg("r", bv(2), 0)
    blk.assign("r", r)
    blk.assign("r", r)
    assert Code.MULTIPLE_DRIVERS in [d.code for d in blk.close()]


def test_append_only():
    d = corpus_design("alu4")
    g = d.graph.copy()
    snapshot = list(g.nodes)
    for _ in range(5):
        g.add_node(Not(0))
    assert g.nodes[: len(snapshot)] == snapshot


@pytest.mark.parametrize("name", corpus_names())
def test_json_round_trip_corpus(name):
    g = corpus_design(name).graph
    doc = json.loads(g.to_json())
    assert set(doc) >= {"version", "name", "domain", "nodes", "mems", "inputs", "outputs"}
    back = SignalGraph.from_json(g.to_json())
    assert back.structurally_equal(g)
    assert [infer_type(back, i) for i in range(len(back))] == [infer_type(g, i) for i in range(len(g))]
    assert back.input_types() == g.input_types() and back.output_types() == g.output_types()


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(0, 5))
def test_json_round_trip_random(seed, regs):
    g = random_design(seed, 6, regs).graph
    back = SignalGraph.from_json(g.to_json())
    assert back.structurally_equal(g)
    assert back.to_json() == g.to_json()


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_infer_type_pure(seed):
    g = random_design(seed, 6, 2).graph
    first = [infer_type(g, i) for i in range(len(g))]
    g._types.clear()
    assert [infer_type(g, i) for i in range(len(g))] == first


def test_match_overlapping_selectors_rejected_at_construction():
    g = SignalGraph("t")
    s = g.add_input("s", bv(2))
    a = g.add_input("a", bv(4))
    with pytest.raises(GraphError):
        g.add_node(Match(s, ((1, a), (1, a)), a))


def test_input_node_has_port_name():
    g = SignalGraph("t")
    a = g.add_input("a", bv(3))
    assert g.nodes[a] == Input("a", bv(3))
