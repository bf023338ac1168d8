"""Cycle-accurate simulation of elaborated designs.

A design denotes a function from cycle index to output values. Each
elaborated design is compiled once into a straight-line Python step function
(operands evaluated in combinational topological order) that maps
``(inputs, state) -> (outputs, next_state)``. The packed state is a flat,
hashable tuple: register values, then synchronous-read outputs, then RAM
contents (one tuple per writable memory), which is what the equivalence
checker explores.
"""

from __future__ import annotations

import itertools
import json
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence, Union

from .checker import ElaboratedDesign
from .ir import (
    BinOp, Binary, Bit, Bundle, BundleGet, BundleMake, Concat, Const, Input, Match, MemReadComb,
    MemReadSync, Mux, NodeId, Not, Register, SignalType, Slice, infer_type, mask,
)


class SimulationError(Exception):
    pass


@dataclass(frozen=True)
class Value:
    """A bit-accurate runtime value. Compares equal to a plain int with the
    same bits so tests and testbenches can use either."""

    bits: int
    width: int
    is_bit: bool = False

    def __post_init__(self) -> None:
        if not 0 <= self.bits < (1 << self.width):
            raise ValueError(f"value {self.bits} does not fit in {self.width} bits")

    @classmethod
    def of(cls, bits: int, t: SignalType) -> "Value":
        return cls(bits, t.width, isinstance(t, Bit))

    def __int__(self) -> int:
        return self.bits

    def __index__(self) -> int:
        return self.bits

    def __eq__(self, other) -> bool:
        if isinstance(other, Value):
            return self.bits == other.bits and self.width == other.width
        if isinstance(other, bool):
            return self.bits == int(other)
        if isinstance(other, int):
            return self.bits == other
        return NotImplemented

    def __hash__(self) -> int:
        return hash(self.bits)

    def __repr__(self) -> str:
        if self.is_bit:
            return f"Bit({bool(self.bits)})"
        return f"{self.width}'d{self.bits}"


OutValue = Union[Value, tuple]


# --------------------------------------------------------------------------
# Compilation


@dataclass
class CompiledDesign:
    design: ElaboratedDesign
    step: Callable[[tuple, tuple], tuple[tuple, tuple]]
    input_names: tuple[str, ...]
    input_types: tuple[SignalType, ...]
    output_names: tuple[str, ...]
    output_types: tuple[SignalType, ...]
    reg_ids: tuple[NodeId, ...]
    sync_ids: tuple[NodeId, ...]
    ram_ids: tuple[int, ...]
    initial_state: tuple
    source: str = field(repr=False)

    @property
    def input_bits(self) -> int:
        return sum(t.width for t in self.input_types)

    @property
    def state_bits(self) -> int:
        g = self.design.graph
        return sum(g.nodes[r].type.width for r in self.reg_ids) + sum(
            infer_type(g, s).width for s in self.sync_ids)

    @property
    def has_ram(self) -> bool:
        return bool(self.ram_ids)

    @property
    def is_combinational(self) -> bool:
        return not (self.reg_ids or self.sync_ids or self.ram_ids)


_CACHE: dict[tuple[int, bool], CompiledDesign] = {}


def compile_design(design: ElaboratedDesign, debug: bool = False) -> CompiledDesign:
    key = (id(design), debug)
    hit = _CACHE.get(key)
    if hit is not None and hit.design is design:
        return hit
    cd = _build(design, debug)
    _CACHE[key] = cd
    if len(_CACHE) > 512:
        _CACHE.pop(next(iter(_CACHE)))
    return cd


def _build(design: ElaboratedDesign, debug: bool) -> CompiledDesign:
    g = design.graph
    reg_ids = tuple(i for i, n in enumerate(g.nodes) if isinstance(n, Register))
    sync_ids = tuple(i for i, n in enumerate(g.nodes) if isinstance(n, MemReadSync))
    ram_ids = tuple(i for i, m in enumerate(g.mems) if m.writable)
    env: dict[str, object] = {}
    for i, m in enumerate(g.mems):
        env[f"M{i}"] = tuple(m.init_contents)

    lines = ["def step(inp, st):"]
    if g.inputs:
        lines.append("    " + ", ".join(f"v{i}" for _, i in g.inputs) + ", = inp")
    state_vars = [f"v{r}" for r in reg_ids] + [f"v{s}" for s in sync_ids] + [f"M{m}" for m in ram_ids]
    if state_vars:
        lines.append("    " + ", ".join(state_vars) + ", = st")

    def w(nid: NodeId) -> int:
        return infer_type(g, nid).width

    for nid in design.topo_order:
        node = g.nodes[nid]
        v = f"v{nid}"
        if isinstance(node, (Input, Register, MemReadSync)):
            continue
        if isinstance(node, Const):
            expr = repr(node.value)
        elif isinstance(node, Not):
            expr = f"~v{node.a} & {mask(w(nid))}"
        elif isinstance(node, Binary):
            a, b, m, wd = f"v{node.a}", f"v{node.b}", mask(w(node.a)), w(node.a)
            expr = {
                BinOp.AND: f"{a} & {b}",
                BinOp.OR: f"{a} | {b}",
                BinOp.XOR: f"{a} ^ {b}",
                BinOp.ADD: f"({a} + {b}) & {m}",
                BinOp.SUB: f"({a} - {b}) & {m}",
                BinOp.SHL: f"(({a} << {b}) & {m}) if {b} < {wd} else 0",
                BinOp.SHR: f"({a} >> {b}) if {b} < {wd} else 0",
                BinOp.EQ: f"1 if {a} == {b} else 0",
            }[node.op]
        elif isinstance(node, Mux):
            expr = f"v{node.if_true} if v{node.sel} else v{node.if_false}"
        elif isinstance(node, Match):
            s = f"v{node.scrutinee}"
            tail = f"v{node.default}" if node.default is not None else f"v{node.arms[-1][1]}"
            arms = node.arms if node.default is not None else node.arms[:-1]
            expr = " ".join(f"v{t} if {s} == {sel} else" for sel, t in arms) + f" {tail}"
        elif isinstance(node, Slice):
            expr = f"(v{node.a} >> {node.lo}) & {mask(node.hi - node.lo + 1)}"
        elif isinstance(node, Concat):
            expr = f"(v{node.hi_part} << {w(node.lo_part)}) | v{node.lo_part}"
        elif isinstance(node, MemReadComb):
            expr = f"M{node.mem}[v{node.addr}]"
        elif isinstance(node, BundleMake):
            expr = "(" + ", ".join(f"v{e}" for e in node.elements) + ",)"
        elif isinstance(node, BundleGet):
            expr = f"v{node.a}[{node.index}]"
        else:  # pragma: no cover
            raise TypeError(node)
        lines.append(f"    {v} = {expr}")
        if debug and not isinstance(infer_type(g, nid), Bundle):
            lines.append(f"    assert 0 <= {v} <= {mask(w(nid))}, 'mask violation at n{nid}'")

    outs = ", ".join(f"v{i}" for _, i in g.outputs)
    nxt = [f"v{g.nodes[r].next}" for r in reg_ids]
    nxt += [f"M{g.nodes[s].mem}[v{g.nodes[s].addr}]" for s in sync_ids]
    for m in ram_ids:
        wp = g.mems[m].write_port
        a = f"v{wp.addr}"
        nxt.append(f"(M{m}[:{a}] + (v{wp.data},) + M{m}[{a} + 1:]) if v{wp.enable} else M{m}")
    lines.append(f"    return ({outs}{',' if outs else ''}), ({', '.join(nxt)}{',' if nxt else ''})")
    source = "\n".join(lines) + "\n"
    exec(compile(source, f"<sim:{g.name}>", "exec"), env)

    init = tuple(g.nodes[r].init for r in reg_ids) + tuple(0 for _ in sync_ids) + tuple(
        tuple(g.mems[m].init_contents) for m in ram_ids)
    return CompiledDesign(
        design=design,
        step=env["step"],
        input_names=tuple(n for n, _ in g.inputs),
        input_types=tuple(g.nodes[i].type for _, i in g.inputs),
        output_names=tuple(n for n, _ in g.outputs),
        output_types=tuple(infer_type(g, i) for _, i in g.outputs),
        reg_ids=reg_ids,
        sync_ids=sync_ids,
        ram_ids=ram_ids,
        initial_state=init,
        source=source,
    )


# --------------------------------------------------------------------------
# State and single-cycle evaluation


@dataclass(frozen=True)
class SimState:
    regs: dict[NodeId, int]
    mems: dict[str, tuple[int, ...]]
    sync_read_outs: dict[NodeId, int]
    cycle: int = 0


def initial_state(design: ElaboratedDesign) -> SimState:
    cd = compile_design(design)
    return unpack_state(cd, cd.initial_state, 0)


def pack_state(cd: CompiledDesign, state: SimState) -> tuple:
    g = cd.design.graph
    return (tuple(state.regs[r] for r in cd.reg_ids)
            + tuple(state.sync_read_outs[s] for s in cd.sync_ids)
            + tuple(tuple(state.mems[g.mems[m].name]) for m in cd.ram_ids))


def unpack_state(cd: CompiledDesign, packed: tuple, cycle: int) -> SimState:
    g = cd.design.graph
    nr, ns = len(cd.reg_ids), len(cd.sync_ids)
    mems = {m.name: tuple(m.init_contents) for m in g.mems}
    for k, m in enumerate(cd.ram_ids):
        mems[g.mems[m].name] = packed[nr + ns + k]
    return SimState(
        regs=dict(zip(cd.reg_ids, packed[:nr])),
        mems=mems,
        sync_read_outs=dict(zip(cd.sync_ids, packed[nr:nr + ns])),
        cycle=cycle,
    )


def pack_inputs(cd: CompiledDesign, inputs: Mapping[str, object]) -> tuple:
    vals = []
    for name, t in zip(cd.input_names, cd.input_types):
        if name not in inputs:
            raise SimulationError(f"missing value for input '{name}'")
        v = inputs[name]
        if isinstance(v, Value):
            if v.width != t.width:
                raise SimulationError(f"input '{name}' expects {t}, got {v.width}-bit value")
            v = v.bits
        elif isinstance(v, bool):
            v = int(v)
        if not isinstance(v, int) or not 0 <= v < (1 << t.width):
            raise SimulationError(f"input '{name}' value {v!r} does not fit in {t}")
        vals.append(v)
    extra = set(inputs) - set(cd.input_names)
    if extra:
        raise SimulationError(f"unknown input(s): {sorted(extra)}")
    return tuple(vals)


def wrap_value(raw, t: SignalType) -> OutValue:
    if isinstance(t, Bundle):
        return tuple(wrap_value(r, e) for r, e in zip(raw, t.elements))
    return Value.of(raw, t)


def eval_cycle(design: ElaboratedDesign, state: SimState, inputs: Mapping[str, object]
               ) -> tuple[dict[str, OutValue], SimState]:
    """Evaluate one clock cycle: outputs for this cycle and the state at the
    next cycle. Pure: the given state is not modified."""
    cd = compile_design(design)
    outs, nxt = cd.step(pack_inputs(cd, inputs), pack_state(cd, state))
    named = {n: wrap_value(v, t) for n, v, t in zip(cd.output_names, outs, cd.output_types)}
    return named, unpack_state(cd, nxt, state.cycle + 1)


def simulate(design: ElaboratedDesign, input_seq: Iterable[Mapping[str, object]]) -> list[dict[str, int]]:
    """Outputs (as raw ints) for each cycle of an input sequence from reset."""
    cd = compile_design(design)
    st = cd.initial_state
    trace = []
    for inp in input_seq:
        outs, st = cd.step(pack_inputs(cd, inp), st)
        trace.append(dict(zip(cd.output_names, outs)))
    return trace


# --------------------------------------------------------------------------
# Testbenches


@dataclass(frozen=True)
class TbRecord:
    cycle: int
    inputs: dict[str, int]
    expect: dict[str, int]


@dataclass
class Testbench:
    __test__ = False  # not a pytest test class

    records: list[TbRecord]

    def __post_init__(self) -> None:
        prev = -1
        for r in self.records:
            if r.cycle <= prev:
                raise ValueError(f"testbench cycles must be strictly increasing (cycle {r.cycle})")
            prev = r.cycle
        if self.records and self.records[0].cycle != 0:
            raise ValueError("testbench must start at cycle 0")

    @classmethod
    def from_json(cls, text: str) -> "Testbench":
        doc = json.loads(text)
        if not isinstance(doc, list):
            raise ValueError("testbench must be a JSON array")
        recs = []
        for entry in doc:
            if not isinstance(entry, dict) or "cycle" not in entry:
                raise ValueError(f"malformed testbench entry {entry!r}")
            recs.append(TbRecord(int(entry["cycle"]), dict(entry.get("inputs", {})), dict(entry.get("expect", {}))))
        return cls(recs)

    @classmethod
    def load(cls, path: str | Path) -> "Testbench":
        return cls.from_json(Path(path).read_text())

    def to_json(self) -> str:
        return json.dumps([{"cycle": r.cycle, "inputs": r.inputs, "expect": r.expect} for r in self.records])

    def validate_for(self, design: ElaboratedDesign) -> None:
        names = {n for n, _ in design.graph.inputs}
        outs = {n for n, _ in design.graph.outputs}
        if self.records:
            missing = names - set(self.records[0].inputs)
            if missing:
                raise ValueError(f"inputs {sorted(missing)} not assigned at cycle 0")
        for r in self.records:
            unknown = set(r.expect) - outs
            if unknown:
                raise ValueError(f"cycle {r.cycle}: unknown output(s) {sorted(unknown)}")


@dataclass
class Mismatch:
    cycle: int
    output: str
    expected: object
    actual: object


@dataclass
class TraceResult:
    samples_checked: int
    mismatches: int
    first_mismatch: Mismatch | None = None
    trace: list[dict[str, int]] | None = None
    truncated: bool = False

    def summary(self) -> str:
        return f"{self.mismatches} mismatches in {self.samples_checked} samples"


def run(design: ElaboratedDesign, tb: Testbench, max_cycles: int = 100_000, keep_trace: bool = False) -> TraceResult:
    """Drive ``tb`` from the reset state. Inputs hold their last assigned
    value; one sample is one checked output on one cycle."""
    tb.validate_for(design)
    cd = compile_design(design)
    if not tb.records:
        return TraceResult(0, 0, trace=[] if keep_trace else None)
    by_cycle = {r.cycle: r for r in tb.records}
    last = tb.records[-1].cycle
    truncated = last >= max_cycles
    horizon = min(last, max_cycles - 1)
    cur_inputs: dict[str, int] = {}
    st = cd.initial_state
    samples = mism = 0
    first = None
    trace = [] if keep_trace else None
    for t in range(horizon + 1):
        rec = by_cycle.get(t)
        if rec is not None:
            cur_inputs.update(rec.inputs)
        outs, st = cd.step(pack_inputs(cd, cur_inputs), st)
        named = dict(zip(cd.output_names, outs))
        if trace is not None:
            trace.append(named)
        if rec is not None:
            for name, exp in rec.expect.items():
                samples += 1
                actual = named[name]
                exp_cmp = tuple(exp) if isinstance(exp, list) else exp
                if actual != exp_cmp:
                    mism += 1
                    if first is None:
                        first = Mismatch(t, name, exp, actual)
    return TraceResult(samples, mism, first, trace, truncated)


def free_run(design: ElaboratedDesign, cycles: int, inputs: Mapping[str, int] | None = None) -> list[dict[str, int]]:
    cd = compile_design(design)
    base = {n: 0 for n in cd.input_names}
    base.update(inputs or {})
    return simulate(design, [base] * cycles)


def format_trace(design: ElaboratedDesign, trace: Sequence[Mapping[str, int]],
                 inputs: Mapping[str, int] | None = None) -> str:
    g = design.graph
    in_names = [n for n, _ in g.inputs]
    out_names = [n for n, _ in g.outputs]
    cols = ["cycle"] + in_names + out_names
    rows = []
    for t, outs in enumerate(trace):
        row = [str(t)] + [str((inputs or {}).get(n, 0)) for n in in_names] + [str(outs[n]) for n in out_names]
        rows.append(row)
    widths = [max(len(c), *(len(r[k]) for r in rows)) if rows else len(c) for k, c in enumerate(cols)]
    fmt = lambda r: "  ".join(x.rjust(wd) for x, wd in zip(r, widths))  # noqa: E731
    return "\n".join([fmt(cols)] + [fmt(r) for r in rows])


# --------------------------------------------------------------------------
# Bounded properties


@dataclass(frozen=True)
class InitEquals:
    output: str
    value: int


@dataclass(frozen=True)
class StepInvariant:
    """``relation(value_t, value_t+1)`` must hold for every ``t < bound``."""

    output: str
    relation: Callable[[int, int], bool]
    bound: int = 1000
    description: str = ""


@dataclass(frozen=True)
class AlwaysEquals:
    """Outputs of this design and ``other`` agree pointwise for ``bound`` cycles."""

    other: ElaboratedDesign
    bound: int = 64
    strategy: str = "auto"  # auto | random


@dataclass
class PropertyResult:
    holds: bool
    bound: int
    exhaustive: bool
    cycle: int | None = None
    witness: list[dict[str, int]] | None = None
    detail: str = ""

    def __bool__(self) -> bool:
        return self.holds


ENUM_CAP_BITS = 22
RANDOM_SEQUENCES = 10_000


def _input_sequences(cd: CompiledDesign, length: int, seed: int, n_random: int):
    """All input sequences of ``length`` cycles when the total freedom fits
    the enumeration cap, otherwise seeded random ones. Yields (exhaustive, seq)."""
    bits = cd.input_bits
    names, widths = cd.input_names, [t.width for t in cd.input_types]
    if bits * length <= ENUM_CAP_BITS:
        per_cycle = [dict(zip(names, vals)) for vals in itertools.product(*[range(1 << w) for w in widths])]
        for seq in itertools.product(per_cycle, repeat=length):
            yield True, list(seq)
        return
    rng = random.Random(seed)
    for _ in range(n_random):
        yield False, [{n: rng.getrandbits(w) for n, w in zip(names, widths)} for _ in range(length)]


def check_property(design: ElaboratedDesign, prop, seed: int = 0, n_random: int = RANDOM_SEQUENCES) -> PropertyResult:
    cd = compile_design(design)
    if isinstance(prop, InitEquals):
        idx = cd.output_names.index(prop.output)
        exhaustive = True
        for exhaustive, seq in _input_sequences(cd, 1, seed, n_random):
            outs, _ = cd.step(pack_inputs(cd, seq[0]), cd.initial_state)
            if outs[idx] != prop.value:
                return PropertyResult(False, 0, exhaustive, 0, seq,
                                      f"{prop.output} = {outs[idx]} at cycle 0, expected {prop.value}")
        return PropertyResult(True, 0, exhaustive)
    if isinstance(prop, StepInvariant):
        idx = cd.output_names.index(prop.output)
        exhaustive = True
        for exhaustive, seq in _input_sequences(cd, prop.bound + 1, seed, n_random):
            st = cd.initial_state
            prev = None
            for t, inp in enumerate(seq):
                outs, st = cd.step(pack_inputs(cd, inp), st)
                cur = outs[idx]
                if prev is not None and not prop.relation(prev, cur):
                    return PropertyResult(False, prop.bound, exhaustive, t - 1, seq[:t + 1],
                                          f"{prop.output}: {prev} -> {cur} at cycle {t - 1}")
                prev = cur
        return PropertyResult(True, prop.bound, exhaustive)
    if isinstance(prop, AlwaysEquals):
        other = compile_design(prop.other)
        if (cd.input_names, cd.input_types, cd.output_names) != (other.input_names, other.input_types, other.output_names):
            raise SimulationError("AlwaysEquals needs identical port signatures")
        exhaustive = True
        for exhaustive, seq in _input_sequences(cd, prop.bound, seed, n_random):
            sa, sb = cd.initial_state, other.initial_state
            for t, inp in enumerate(seq):
                packed = pack_inputs(cd, inp)
                oa, sa = cd.step(packed, sa)
                ob, sb = other.step(packed, sb)
                if oa != ob:
                    return PropertyResult(False, prop.bound, exhaustive, t, seq[:t + 1], "outputs differ")
        return PropertyResult(True, prop.bound, exhaustive)
    raise TypeError(f"unknown property {prop!r}")
