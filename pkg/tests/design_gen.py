"""Seeded random designs for property and soundness tests."""

from __future__ import annotations

import random

from sigforge.builder import Builder, Sig
from sigforge.checker import ElaboratedDesign, elaborate
from sigforge.ir import BitVec, Const, Mux, Not, Register, SignalGraph, bv

_OPS = {"add": "__add__", "sub": "__sub__", "and": "__and__", "or": "__or__", "xor": "__xor__",
        "shl": "__lshift__", "shr": "__rshift__"}


class _Gen:
    def __init__(self, rng: random.Random, b: Builder) -> None:
        self.rng = rng
        self.b = b
        self.pool: list[Sig] = []

    def leaf(self, w: int) -> Sig:
        same = [s for s in self.pool if isinstance(s.type, BitVec) and s.width == w]
        if same and self.rng.random() < 0.8:
            return self.rng.choice(same)
        return self.b.const(self.rng.getrandbits(w), bv(w))

    def sel(self, depth: int) -> Sig:
        w = self.rng.randint(1, 3)
        if self.rng.random() < 0.5:
            return self.expr(w, depth - 1).eq(self.expr(w, depth - 1))
        src = self.expr(w, depth - 1)
        i = self.rng.randrange(w)
        return src[i:i]

    def expr(self, w: int, depth: int) -> Sig:
        r = self.rng
        if depth <= 0 or r.random() < 0.25:
            return self.leaf(w)
        kind = r.choice(("bin", "bin", "not", "mux", "match", "concat", "slice"))
        if kind == "bin":
            a, c = self.expr(w, depth - 1), self.expr(w, depth - 1)
            return getattr(a, _OPS[r.choice(tuple(_OPS))])(c)
        if kind == "not":
            return ~self.expr(w, depth - 1)
        if kind == "mux":
            return self.b.mux(self.sel(depth), self.expr(w, depth - 1), self.expr(w, depth - 1))
        if kind == "match":
            sw = r.randint(1, 2)
            scr = self.expr(sw, depth - 1)
            keys = sorted(r.sample(range(1 << sw), r.randint(1, 1 << sw)))
            arms = {k: self.expr(w, depth - 1) for k in keys}
            full = len(keys) == 1 << sw
            default = None if full and r.random() < 0.5 else self.expr(w, depth - 1)
            return self.b.match(scr, arms, default)
        if kind == "concat" and w >= 2:
            k = r.randint(1, w - 1)
            return self.b.concat(self.expr(w - k, depth - 1), self.expr(k, depth - 1))
        if kind == "slice":
            extra = r.randint(0, 2)
            src = self.expr(w + extra, depth - 1)
            lo = r.randint(0, extra)
            return src[lo + w - 1:lo]
        return self.leaf(w)


def random_design(seed: int, max_input_bits: int = 6, reg_bits: int = 0, depth: int = 3,
                  name: str = "rnd") -> ElaboratedDesign:
    """A random elaborable design with at most ``max_input_bits`` input bits
    and exactly ``reg_bits`` register bits (split over one or two registers)."""
    rng = random.Random(seed)
    b = Builder(name)
    g = _Gen(rng, b)
    budget = max_input_bits
    for i in range(rng.randint(1, 3)):
        if budget <= 0:
            break
        w = rng.randint(1, min(4, budget))
        budget -= w
        g.pool.append(b.input(f"i{i}", bv(w)))
    widths = []
    left = reg_bits
    while left > 0:
        w = min(left, rng.randint(1, 3))
        widths.append(w)
        left -= w
    if widths:
        with b.circuit() as c:
            regs = [c.reg(f"r{k}", bv(w), rng.getrandbits(w)) for k, w in enumerate(widths)]
            g.pool.extend(regs)
            for r, w in zip(regs, widths):
                c.next(r, g.expr(w, depth))
    for k in range(rng.randint(1, 2)):
        b.output(f"o{k}", g.expr(rng.randint(1, 4), depth))
    return b.build()


def mutate(design: ElaboratedDesign, seed: int) -> ElaboratedDesign:
    """A copy with one small, usually behaviour-changing, edit: a constant
    bit flip, a register init change or swapped mux branches. May return a
    copy that happens to be equivalent."""
    rng = random.Random(seed)
    g: SignalGraph = design.graph.copy()
    sites = [i for i, n in enumerate(g.nodes) if isinstance(n, (Const, Register, Mux))]
    if not sites:
        return elaborate(g)
    i = rng.choice(sites)
    n = g.nodes[i]
    if isinstance(n, Const):
        bit = rng.randrange(n.type.width)
        g.replace(i, Const(n.value ^ (1 << bit), n.type))
    elif isinstance(n, Register):
        bit = rng.randrange(n.type.width)
        g.replace(i, Register(n.init ^ (1 << bit), n.next, n.type))
    else:
        g.replace(i, Mux(n.sel, n.if_false, n.if_true))
    return elaborate(g)


def padded(design: ElaboratedDesign) -> ElaboratedDesign:
    """An equivalent copy: every output is routed through a double inversion."""
    g = design.graph.copy()
    new_outs = []
    for name, nid in g.outputs:
        a = g.add_node(Not(nid))
        new_outs.append((name, g.add_node(Not(a))))
    g.outputs = new_outs
    return elaborate(g)


__all__ = ["random_design", "mutate", "padded"]
