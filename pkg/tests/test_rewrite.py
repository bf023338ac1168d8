from __future__ import annotations

import pytest
from hypothesis import given, settings, strategies as st

from sigforge.checker import elaborate
from sigforge.equiv import EquivConfig, Equivalent, equiv, equiv_comb
from sigforge.frontend import compile_source, graph_to_source, lower, parse
from sigforge.ir import Match, Mux, live_nodes
from sigforge.ppa import build_feedback, proxy_ppa, PpaVector
from sigforge.rewrite import (
    ChaosGenerator, RuleGenerator, fold_constants, has_dead_nodes, match_to_mux_tree, merge_mux_chains,
    rewrite_fixpoint, rule_generator, share_subexpressions,
)

from conftest import corpus_design, corpus_names, corpus_source
from design_gen import random_design

CHAIN8 = """module chain (in s: bv3, in a: bv1, in b: bv1, in c: bv1, in d: bv1) -> (out y: bv1) {
  y = mux(s == 0:bv3, a, mux(s == 1:bv3, b, mux(s == 2:bv3, c, mux(s == 3:bv3, d,
      mux(s == 4:bv3, a, mux(s == 5:bv3, b, mux(s == 6:bv3, c, mux(s == 7:bv3, d, 0:bv1))))))));
}"""

WIDE = EquivConfig(random_fallback=True, random_sequences=300)


def _live_of(graph, kind):
    return [i for i in live_nodes(graph) if isinstance(graph.nodes[i], kind)]


def test_eight_mux_chain_becomes_one_match():
    res = rule_generator(CHAIN8)
    assert res.rule == "mux_chain"
    after = compile_source(res.source)
    assert len(_live_of(after.graph, Match)) == 1
    assert _live_of(after.graph, Mux) == []
    assert isinstance(equiv_comb(compile_source(CHAIN8), after), Equivalent)


def test_counter_is_noop():
    src = corpus_source("counter")
    res = rule_generator(src)
    assert res.noop and res.source == src
    assert rewrite_fixpoint(src).noop


def test_constant_folding():
    src = "module m (in a: bv4) -> (out y: bv4) { y = a + (1:bv4 + 2:bv4); }"
    g = lower(parse(src))
    assert fold_constants(g)
    folded = compile_source(graph_to_source(g))
    assert "3:bv4" in graph_to_source(g)
    assert isinstance(equiv(compile_source(src), folded), Equivalent)


def test_fold_resolves_constant_selector():
    src = "module m (in a: bv4, in b: bv4) -> (out y: bv4) { y = mux(1:bv1 == 1:bv1, a, b); }"
    out = rewrite_fixpoint(src).source
    assert "mux" not in out
    assert isinstance(equiv(compile_source(src), compile_source(out)), Equivalent)


def test_cse_shares_identical_subterms():
    src = "module m (in a: bv4, in b: bv4) -> (out y: bv4) { y = (a + b) ^ (a + b); }"
    g = lower(parse(src))
    assert share_subexpressions(g)
    d = compile_source(graph_to_source(g))
    assert proxy_ppa(d).area_um2 < proxy_ppa(compile_source(src)).area_um2


def test_match_to_mux_tree_is_equivalent(mux3):
    g = mux3.graph.copy()
    assert match_to_mux_tree(g)
    d = elaborate(g)
    assert _live_of(d.graph, Match) == []
    assert isinstance(equiv(mux3, d, WIDE), Equivalent)


def test_tree_only_offered_under_timing_pressure():
    src = corpus_source("mux3")
    assert rule_generator(src).noop
    fb = build_feedback([PpaVector(10, 10, -1.0, 5)])
    res = rule_generator(src, fb)
    assert res.rule == "mux_tree"


def test_dead_nodes_disappear_when_printed():
    src = "module m (in a: bv4) -> (out y: bv4) { let unused = a + a; y = a; }"
    g = lower(parse(src))
    assert has_dead_nodes(g)
    res = rule_generator(src)
    assert res.rule == "dce" and "unused" not in res.source


@pytest.mark.parametrize("name", corpus_names())
def test_fixpoint_preserves_corpus_semantics(name):
    d = corpus_design(name)
    out = rewrite_fixpoint(corpus_source(name))
    assert isinstance(equiv(d, compile_source(out.source), WIDE), Equivalent)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 100_000), st.integers(0, 4))
def test_each_rule_preserves_semantics(seed, regs):
    d = random_design(seed, 8, regs, depth=4)
    for rule in (fold_constants, share_subexpressions, merge_mux_chains, match_to_mux_tree):
        g = d.graph.copy()
        rule(g)
        assert isinstance(equiv(d, elaborate(g)), Equivalent), rule.__name__


def test_rule_generator_exploration_variants():
    gen = RuleGenerator()
    src = corpus_source("mux9")

    class Fb:
        def __init__(self, k):
            self.candidate = k

    outs = [gen.generate(src, Fb(k)) for k in (1, 2, 3)]
    assert outs[2] == src
    assert outs[0] != src and outs[1] != outs[0]
    for o in outs:
        assert isinstance(equiv(compile_source(src), compile_source(o)), Equivalent)


def test_chaos_breaks_mux3_deterministically():
    src = corpus_source("mux3")
    a, b = ChaosGenerator(7).generate(src), ChaosGenerator(7).generate(src)
    assert a == b and a != src
    assert not isinstance(equiv(compile_source(src), compile_source(a)), Equivalent)
