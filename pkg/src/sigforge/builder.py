"""Python builder API: operator-overloaded signals over a SignalGraph.

    b = Builder("counter")
    with b.circuit() as c:
        count = c.reg("count", bv(8), 0)
        c.next(count, count + 1)
    b.output("count", count)
    design = b.build()

Integer operands are lifted to constants of the other operand's type; there
is no implicit width extension.
"""

from __future__ import annotations

from contextlib import contextmanager
from dataclasses import dataclass
from typing import Iterator, Mapping, Sequence, Union

from .checker import ElaboratedDesign, elaborate
from .diagnostics import CompileError
from .ir import (
    BinOp, Binary, BundleGet, BundleMake, CircuitBlock, Concat, Const, DomainConfig, Match,
    MemDecl, MemReadComb, MemReadSync, Mux, NodeId, Not, SignalGraph, SignalType, Slice, WritePort,
    infer_type, is_scalar,
)


@dataclass(frozen=True, eq=False)
class Sig:
    builder: "Builder"
    id: NodeId

    @property
    def type(self) -> SignalType:
        return infer_type(self.builder.graph, self.id)

    @property
    def width(self) -> int:
        return self.type.width

    def _lift(self, other: "SigLike") -> "Sig":
        return self.builder.lift(other, self.type)

    def _bin(self, op: BinOp, other: "SigLike", reverse: bool = False) -> "Sig":
        o = self._lift(other)
        a, b = (o, self) if reverse else (self, o)
        return self.builder.node(Binary(op, a.id, b.id))

    def __invert__(self) -> "Sig":
        return self.builder.node(Not(self.id))

    def __and__(self, o): return self._bin(BinOp.AND, o)
    def __rand__(self, o): return self._bin(BinOp.AND, o, True)
    def __or__(self, o): return self._bin(BinOp.OR, o)
    def __ror__(self, o): return self._bin(BinOp.OR, o, True)
    def __xor__(self, o): return self._bin(BinOp.XOR, o)
    def __rxor__(self, o): return self._bin(BinOp.XOR, o, True)
    def __add__(self, o): return self._bin(BinOp.ADD, o)
    def __radd__(self, o): return self._bin(BinOp.ADD, o, True)
    def __sub__(self, o): return self._bin(BinOp.SUB, o)
    def __rsub__(self, o): return self._bin(BinOp.SUB, o, True)
    def __lshift__(self, o): return self._bin(BinOp.SHL, o)
    def __rshift__(self, o): return self._bin(BinOp.SHR, o)

    def eq(self, other: "SigLike") -> "Sig":
        """Equality comparison; yields a Bit."""
        return self._bin(BinOp.EQ, other)

    def __getitem__(self, key: Union[slice, int]) -> "Sig":
        """``s[hi:lo]`` (inclusive, hardware order) or ``s[i]`` for one bit."""
        if isinstance(key, slice):
            if key.step is not None:
                raise ValueError("slices take no step")
            return self.builder.node(Slice(self.id, key.start, key.stop))
        return self.builder.node(Slice(self.id, key, key))

    def field(self, index: int) -> "Sig":
        """Element ``index`` of a bundle."""
        return self.builder.node(BundleGet(self.id, index))

    def __bool__(self) -> bool:
        raise TypeError("signals have no truth value; use mux()")


SigLike = Union[Sig, int, bool]


class Builder:
    def __init__(self, name: str = "top", domain: DomainConfig | None = None) -> None:
        self.graph = SignalGraph(name=name, domain=domain or DomainConfig())

    def node(self, node, name: str | None = None) -> Sig:
        return Sig(self, self.graph.add_node(node, name=name))

    def lift(self, v: SigLike, type: SignalType) -> Sig:
        if isinstance(v, Sig):
            if v.builder is not self:
                raise ValueError("signal belongs to another builder")
            return v
        if isinstance(v, bool):
            v = int(v)
        if isinstance(v, int):
            if not is_scalar(type):
                raise TypeError("cannot lift an integer to a bundle")
            return self.const(v, type)
        raise TypeError(f"cannot use {v!r} as a signal")

    def const(self, value: int, type: SignalType) -> Sig:
        return self.node(Const(value, type))

    def input(self, name: str, type: SignalType) -> Sig:
        return Sig(self, self.graph.add_input(name, type))

    def output(self, name: str, sig: Sig) -> None:
        self.graph.add_output(name, sig.id)

    def mux(self, sel: Sig, if_true: SigLike, if_false: SigLike) -> Sig:
        """``sel ? if_true : if_false`` (true branch first)."""
        ref = if_true if isinstance(if_true, Sig) else if_false
        if not isinstance(ref, Sig):
            raise TypeError("mux needs at least one signal branch to fix its type")
        t, f = self.lift(if_true, ref.type), self.lift(if_false, ref.type)
        return self.node(Mux(sel.id, t.id, f.id))

    cond = mux

    def match(self, scrutinee: Sig, arms: Mapping[int, SigLike], default: SigLike | None = None) -> Sig:
        sigs = [v for v in list(arms.values()) + [default] if isinstance(v, Sig)]
        if not sigs:
            raise TypeError("match needs at least one signal arm to fix its type")
        t = sigs[0].type
        lifted = tuple((k, self.lift(v, t).id) for k, v in arms.items())
        d = None if default is None else self.lift(default, t).id
        return self.node(Match(scrutinee.id, lifted, d))

    def concat(self, hi: Sig, lo: Sig, *rest: Sig) -> Sig:
        acc = self.node(Concat(hi.id, lo.id))
        for r in rest:
            acc = self.node(Concat(acc.id, r.id))
        return acc

    def bundle(self, *elements: Sig) -> Sig:
        return self.node(BundleMake(tuple(e.id for e in elements)))

    # --- memories ---

    def rom(self, name: str, data_width: int, contents: Sequence[int]) -> int:
        aw = max(1, (len(contents) - 1).bit_length())
        if len(contents) != 1 << aw:
            raise ValueError("ROM contents must have a power-of-two length")
        return self.graph.add_mem(MemDecl(name, aw, data_width, tuple(contents), writable=False))

    def ram(self, name: str, addr_width: int, data_width: int, init: Sequence[int] | None = None) -> int:
        contents = tuple(init) if init is not None else (0,) * (1 << addr_width)
        return self.graph.add_mem(MemDecl(name, addr_width, data_width, contents, writable=True))

    def read(self, mem: int, addr: Sig, sync: bool = False) -> Sig:
        return self.node((MemReadSync if sync else MemReadComb)(mem, addr.id))

    def write(self, mem: int, addr: Sig, data: Sig, enable: Sig) -> None:
        self.graph.bind_write_port(mem, WritePort(addr.id, data.id, enable.id))

    # --- registers ---

    @contextmanager
    def circuit(self) -> Iterator["Circuit"]:
        """Register block: every ``reg`` must get exactly one ``next``."""
        block = CircuitBlock(self.graph)
        yield Circuit(self, block)
        diags = block.close()
        if diags:
            raise CompileError(diags)

    def build(self) -> ElaboratedDesign:
        return elaborate(self.graph)


class Circuit:
    def __init__(self, builder: Builder, block: CircuitBlock) -> None:
        self.builder = builder
        self.block = block

    def reg(self, name: str, type: SignalType, init: int = 0) -> Sig:
        return Sig(self.builder, self.block.reg(name, type, init))

    def next(self, reg: Sig, value: SigLike) -> None:
        name = self.builder.graph.names[reg.id]
        self.block.assign(name, self.builder.lift(value, reg.type).id)


__all__ = ["Builder", "Circuit", "Sig", "SigLike"]
