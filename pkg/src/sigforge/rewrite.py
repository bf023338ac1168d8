"""Semantics-preserving graph rewrites and the deterministic rule-based
candidate generator built on them (plus a seeded, deliberately breaking
"chaos" mutator used to exercise rollback).

Generators are text-to-text: source is parsed, lowered, rewritten as a graph
and printed back with ``graph_to_source``.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, replace
from typing import Callable

from .checker import topo_order
from .frontend import graph_to_source, lower, parse
from .ir import (
    BinOp, Binary, Bit, BundleGet, BundleMake, Concat, Const, Input, Match, MemReadComb,
    MemReadSync, Mux, Node, NodeId, Not, Register, SignalGraph, Slice, WritePort, infer_type,
    live_nodes, mask,
)

_OPERAND_FIELDS = {
    Not: ("a",), Binary: ("a", "b"), Mux: ("sel", "if_true", "if_false"), Slice: ("a",),
    Concat: ("hi_part", "lo_part"), MemReadComb: ("addr",), MemReadSync: ("addr",), BundleGet: ("a",),
}


def map_operands(node: Node, f: Callable[[NodeId], NodeId]) -> Node:
    """Rebuild ``node`` with every operand id passed through ``f``."""
    if isinstance(node, (Const, Input)):
        return node
    if isinstance(node, Register):
        return node if node.next is None else replace(node, next=f(node.next))
    if isinstance(node, Match):
        return Match(f(node.scrutinee), tuple((s, f(n)) for s, n in node.arms),
                     None if node.default is None else f(node.default))
    if isinstance(node, BundleMake):
        return BundleMake(tuple(f(e) for e in node.elements))
    return replace(node, **{k: f(getattr(node, k)) for k in _OPERAND_FIELDS[type(node)]})


def redirect(graph: SignalGraph, mapping: dict[NodeId, NodeId]) -> None:
    """Point every use of a key in ``mapping`` at its value (in place)."""
    def f(i: NodeId) -> NodeId:
        while i in mapping:
            i = mapping[i]
        return i

    for nid, node in enumerate(graph.nodes):
        new = map_operands(node, f)
        if new != node:
            graph.nodes[nid] = new
    graph.outputs = [(n, f(i)) for n, i in graph.outputs]
    for k, m in enumerate(graph.mems):
        if m.write_port is not None:
            wp = m.write_port
            graph.mems[k] = replace(m, write_port=WritePort(f(wp.addr), f(wp.data), f(wp.enable)))
    graph._types.clear()


# --------------------------------------------------------------------------
# Individual rewrites. Each mutates the graph and returns True if it changed
# anything reachable from an output.


def _const_value(node: Node, vals: dict[NodeId, int], graph: SignalGraph) -> int | None:
    def w(i: NodeId) -> int:
        return infer_type(graph, i).width

    if isinstance(node, Not):
        return (~vals[node.a]) & mask(w(node.a))
    if isinstance(node, Binary):
        a, b, width = vals[node.a], vals[node.b], w(node.a)
        op = node.op
        if op is BinOp.AND:
            return a & b
        if op is BinOp.OR:
            return a | b
        if op is BinOp.XOR:
            return a ^ b
        if op is BinOp.ADD:
            return (a + b) & mask(width)
        if op is BinOp.SUB:
            return (a - b) & mask(width)
        if op is BinOp.SHL:
            return (a << b) & mask(width) if b < width else 0
        if op is BinOp.SHR:
            return a >> b if b < width else 0
        if op is BinOp.EQ:
            return int(a == b)
    if isinstance(node, Slice):
        return (vals[node.a] >> node.lo) & mask(node.hi - node.lo + 1)
    if isinstance(node, Concat):
        return (vals[node.hi_part] << w(node.lo_part)) | vals[node.lo_part]
    return None


def fold_constants(graph: SignalGraph) -> bool:
    """Replace nodes whose operands are all constants by a constant; resolve
    muxes and matches with constant selectors."""
    live = live_nodes(graph)
    changed = False
    vals: dict[NodeId, int] = {}
    alias: dict[NodeId, NodeId] = {}
    for nid in topo_order(graph):
        node = graph.nodes[nid]
        if isinstance(node, Const):
            vals[nid] = node.value
            continue
        if isinstance(node, Mux) and node.sel in vals:
            alias[nid] = node.if_true if vals[node.sel] else node.if_false
        elif isinstance(node, Match) and node.scrutinee in vals:
            v = vals[node.scrutinee]
            hit = [n for s, n in node.arms if s == v]
            target = hit[0] if hit else node.default
            if target is not None:
                alias[nid] = target
        if nid in alias:
            if alias[nid] in vals:
                vals[nid] = vals[alias[nid]]
            changed |= nid in live
            continue
        ops = node.operands()
        if isinstance(node, (Register, MemReadComb, MemReadSync, BundleMake, BundleGet, Input)) or not ops:
            continue
        if all(o in vals for o in ops):
            v = _const_value(node, vals, graph)
            if v is not None:
                vals[nid] = v
                graph.replace(nid, Const(v, infer_type(graph, nid)))
                changed |= nid in live
    if alias:
        redirect(graph, alias)
    return changed


def _key(node: Node):
    if isinstance(node, Input):
        return None
    if isinstance(node, Const):
        return ("const", node.value, str(node.type))
    return (type(node).__name__, node)


def share_subexpressions(graph: SignalGraph) -> bool:
    """Hash-cons structurally identical nodes (including identical registers,
    found by iterating to a fixpoint)."""
    live = live_nodes(graph)
    merged_any = False
    while True:
        table: dict[object, NodeId] = {}
        mapping: dict[NodeId, NodeId] = {}
        for nid in sorted(live):
            node = graph.nodes[nid]
            k = _key(node)
            if k is None:
                continue
            if k in table:
                mapping[nid] = table[k]
            else:
                table[k] = nid
        if not mapping:
            return merged_any
        redirect(graph, mapping)
        merged_any = True
        live = live_nodes(graph)


def _eq_const(graph: SignalGraph, nid: NodeId) -> tuple[NodeId, int] | None:
    node = graph.nodes[nid]
    if not (isinstance(node, Binary) and node.op is BinOp.EQ):
        return None
    a, b = graph.nodes[node.a], graph.nodes[node.b]
    if isinstance(b, Const) and not isinstance(a, Const):
        return node.a, b.value
    if isinstance(a, Const) and not isinstance(b, Const):
        return node.b, a.value
    return None


def merge_mux_chains(graph: SignalGraph, min_arms: int = 2) -> bool:
    """``mux(s == K0, x0, mux(s == K1, x1, ... rest))`` -> one Match."""
    live = live_nodes(graph)
    changed = False
    absorbed: set[NodeId] = set()
    # outermost chains first: visit in reverse topological order
    for nid in reversed(topo_order(graph)):
        if nid not in live or nid in absorbed:
            continue
        node = graph.nodes[nid]
        if not isinstance(node, Mux):
            continue
        head = _eq_const(graph, node.sel)
        if head is None:
            continue
        scrut = head[0]
        arms: list[tuple[int, NodeId]] = []
        seen: set[int] = set()
        cur = nid
        chain: list[NodeId] = []
        while True:
            n = graph.nodes[cur]
            if not isinstance(n, Mux):
                break
            ec = _eq_const(graph, n.sel)
            if ec is None or ec[0] != scrut:
                break
            chain.append(cur)
            if ec[1] not in seen:  # a repeated key is unreachable in the chain
                seen.add(ec[1])
                arms.append((ec[1], n.if_true))
            cur = n.if_false
        if len(chain) < min_arms:
            continue
        absorbed.update(chain)
        graph.replace(nid, Match(scrut, tuple(arms), cur))
        changed = True
    return changed


MAX_TREE_BITS = 12


def match_to_mux_tree(graph: SignalGraph) -> bool:
    """Lower each live Match to a balanced tree of 2:1 muxes on selector bits."""
    live = live_nodes(graph)
    targets = [i for i in sorted(live) if isinstance(graph.nodes[i], Match)
               and infer_type(graph, graph.nodes[i].scrutinee).width <= MAX_TREE_BITS]
    for nid in targets:
        node = graph.nodes[nid]
        st = infer_type(graph, node.scrutinee)
        width = st.width
        table = dict(node.arms)
        fallback = node.default if node.default is not None else node.arms[-1][1]
        bits: dict[int, NodeId] = {}

        def bit(b: int) -> NodeId:
            if b not in bits:
                bits[b] = node.scrutinee if isinstance(st, Bit) else graph.add_node(Slice(node.scrutinee, b, b))
            return bits[b]

        def build(base: int, b: int) -> NodeId:
            # values base .. base + 2^(b+1) - 1 share the bits above b
            span = range(base, base + (1 << (b + 1)))
            outs = {table.get(v, fallback) for v in span}
            if len(outs) == 1:
                return outs.pop()
            lo = build(base, b - 1)
            hi = build(base + (1 << b), b - 1)
            return graph.add_node(Mux(bit(b), hi, lo))

        root = build(0, width - 1)
        redirect(graph, {nid: root})
        if nid in live and root != nid:
            # keep the root's name hint for readability
            if nid in graph.names and root not in graph.names:
                graph.names[root] = graph.names[nid]
    return bool(targets)


def has_dead_nodes(graph: SignalGraph) -> bool:
    live = live_nodes(graph)
    return any(i not in live and not isinstance(n, Input) for i, n in enumerate(graph.nodes))


# --------------------------------------------------------------------------
# Generators


AREA_RULES = ("fold", "cse", "mux_chain", "dce")


@dataclass(frozen=True)
class RewriteResult:
    source: str
    rule: str | None  # None: nothing applied (no-op)

    @property
    def noop(self) -> bool:
        return self.rule is None


def _apply(graph: SignalGraph, rule: str) -> bool:
    if rule == "fold":
        return fold_constants(graph)
    if rule == "cse":
        return share_subexpressions(graph)
    if rule == "mux_chain":
        return merge_mux_chains(graph)
    if rule == "mux_tree":
        return match_to_mux_tree(graph)
    if rule == "dce":
        return has_dead_nodes(graph)  # printing keeps live nodes only
    raise ValueError(f"unknown rule {rule!r}")


def _menu(timing: bool) -> tuple[str, ...]:
    return ("fold", "cse", "mux_chain", "mux_tree", "dce") if timing else AREA_RULES


def rule_generator(source: str, feedback=None) -> RewriteResult:
    """Apply the first applicable rewrite from the fixed menu. The Match ->
    mux tree rewrite is only on the menu when the feedback reports a timing
    bottleneck."""
    timing = bool(feedback is not None and getattr(feedback, "bottleneck", "area") == "timing")
    graph = lower(parse(source))
    for rule in _menu(timing):
        if _apply(graph, rule):
            return RewriteResult(graph_to_source(graph), rule)
    return RewriteResult(source, None)


def rewrite_fixpoint(source: str, rules: tuple[str, ...] = AREA_RULES, max_rounds: int = 32) -> RewriteResult:
    graph = lower(parse(source))
    applied: list[str] = []
    # dead nodes only disappear when the graph is printed, so "dce" is
    # checked once after the structural rules settle
    structural = tuple(r for r in rules if r != "dce")
    for _ in range(max_rounds):
        step = [r for r in structural if _apply(graph, r)]
        if not step:
            break
        applied += step
    if "dce" in rules and has_dead_nodes(graph):
        applied.append("dce")
    if not applied:
        return RewriteResult(source, None)
    return RewriteResult(graph_to_source(graph), "+".join(dict.fromkeys(applied)))


class RuleGenerator:
    """Deterministic stand-in for a model-driven generator.

    In the optimization loop it applies one rewrite per call; for
    architecture exploration candidate ``k`` (1-based) it returns
    1: the area fixpoint, 2: the area fixpoint lowered to mux trees,
    3: the unchanged source (then the cycle repeats)."""

    name = "rules"

    def __init__(self) -> None:
        self.last_note = ""

    def generate(self, source: str, feedback) -> str:
        k = getattr(feedback, "candidate", None)
        if k is not None:
            variant = (k - 1) % 3
            if variant == 0:
                res = rewrite_fixpoint(source)
                self.last_note = f"area rewrites ({res.rule or 'none applicable'})"
            elif variant == 1:
                res = rewrite_fixpoint(rewrite_fixpoint(source).source, ("mux_tree",), max_rounds=1)
                self.last_note = "balanced mux tree"
            else:
                res = RewriteResult(source, None)
                self.last_note = "identity"
            return res.source
        res = rule_generator(source, feedback)
        self.last_note = res.rule or "noop"
        return res.source


class ChaosGenerator:
    """Seeded, semantics-breaking mutations: swap two match arms, else swap
    mux branches, else flip the low bit of a constant."""

    name = "chaos"

    def __init__(self, seed: int = 0) -> None:
        self.rng = random.Random(seed)
        self.last_note = ""

    def generate(self, source: str, feedback=None) -> str:
        graph = lower(parse(source))
        live = sorted(live_nodes(graph))
        matches = [i for i in live if isinstance(graph.nodes[i], Match)
                   and len({n for _, n in graph.nodes[i].arms}) >= 2]
        muxes = [i for i in live if isinstance(graph.nodes[i], Mux)
                 and graph.nodes[i].if_true != graph.nodes[i].if_false]
        consts = [i for i in live if isinstance(graph.nodes[i], Const)]
        if matches:
            nid = self.rng.choice(matches)
            node = graph.nodes[nid]
            arms = list(node.arms)
            pairs = [(x, y) for x in range(len(arms)) for y in range(x + 1, len(arms))
                     if arms[x][1] != arms[y][1]]
            x, y = self.rng.choice(pairs)
            arms[x], arms[y] = (arms[x][0], arms[y][1]), (arms[y][0], arms[x][1])
            graph.replace(nid, replace(node, arms=tuple(arms)))
            self.last_note = f"swap match arms {arms[x][0]} and {arms[y][0]}"
        elif muxes:
            nid = self.rng.choice(muxes)
            node = graph.nodes[nid]
            graph.replace(nid, Mux(node.sel, node.if_false, node.if_true))
            self.last_note = "swap mux branches"
        elif consts:
            nid = self.rng.choice(consts)
            node = graph.nodes[nid]
            graph.replace(nid, Const(node.value ^ 1, node.type))
            self.last_note = "flip constant bit"
        else:
            self.last_note = "noop"
            return source
        return graph_to_source(graph)


__all__ = [
    "map_operands", "redirect", "fold_constants", "share_subexpressions", "merge_mux_chains",
    "match_to_mux_tree", "has_dead_nodes", "RewriteResult", "rule_generator", "rewrite_fixpoint",
    "RuleGenerator", "ChaosGenerator", "AREA_RULES",
]
