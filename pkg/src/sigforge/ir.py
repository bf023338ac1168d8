"""Signal-combinator IR.

A :class:`SignalGraph` is a table of nodes addressed by dense integer ids.
Combinational nodes reference their operands by id; the only feedback paths
allowed go through :class:`Register` (and the registered output of a
:class:`MemReadSync`). Graph construction is append-only: ``add_node`` never
invalidates a previously returned id.

Values are unsigned integers masked to the width of their type. ``Bit`` is a
distinct one-bit type; ``BitVec(1)`` is accepted anywhere a one-bit selector
is needed.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Iterable, Union

from .diagnostics import Code, CompileError, Diagnostic, SourceSpan

MAX_WIDTH = 128
IR_VERSION = 1

NodeId = int

_IDENT_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")


def is_identifier(name: str) -> bool:
    return bool(_IDENT_RE.match(name))


class GraphError(ValueError):
    """Construction-time misuse of the IR (dangling ids, bad parameters)."""


# --------------------------------------------------------------------------
# Types


@dataclass(frozen=True)
class Bit:
    @property
    def width(self) -> int:
        return 1

    def __str__(self) -> str:
        return "bit"


@dataclass(frozen=True)
class BitVec:
    width: int

    def __post_init__(self) -> None:
        if not isinstance(self.width, int) or not 1 <= self.width <= MAX_WIDTH:
            raise GraphError(f"BitVec width must be in 1..{MAX_WIDTH}, got {self.width!r}")

    def __str__(self) -> str:
        return f"bv{self.width}"


@dataclass(frozen=True)
class Bundle:
    elements: tuple["SignalType", ...]

    def __post_init__(self) -> None:
        if len(self.elements) < 2:
            raise GraphError("Bundle needs at least two elements")

    @property
    def width(self) -> int:
        return sum(e.width for e in self.elements)

    def __str__(self) -> str:
        return "(" + ", ".join(str(e) for e in self.elements) + ")"


SignalType = Union[Bit, BitVec, Bundle]

BIT = Bit()


def bv(width: int) -> BitVec:
    return BitVec(width)


def is_scalar(t: SignalType) -> bool:
    return isinstance(t, (Bit, BitVec))


def is_one_bit(t: SignalType) -> bool:
    return isinstance(t, Bit) or (isinstance(t, BitVec) and t.width == 1)


def mask(width: int) -> int:
    return (1 << width) - 1


def type_to_json(t: SignalType):
    if isinstance(t, Bundle):
        return [type_to_json(e) for e in t.elements]
    return str(t)


def type_from_json(obj) -> SignalType:
    if isinstance(obj, list):
        return Bundle(tuple(type_from_json(e) for e in obj))
    if obj == "bit":
        return BIT
    if isinstance(obj, str) and obj.startswith("bv") and obj[2:].isdigit():
        return BitVec(int(obj[2:]))
    raise GraphError(f"unknown type {obj!r}")


# --------------------------------------------------------------------------
# Domain


@dataclass(frozen=True)
class DomainConfig:
    clock_name: str = "clk"
    reset_name: str = "rst"
    reset_active_high: bool = True

    def __post_init__(self) -> None:
        for n in (self.clock_name, self.reset_name):
            if not is_identifier(n):
                raise GraphError(f"invalid HDL identifier {n!r}")
        if self.clock_name == self.reset_name:
            raise GraphError("clock and reset must have different names")


# --------------------------------------------------------------------------
# Nodes


class BinOp(str, Enum):
    AND = "and"
    OR = "or"
    XOR = "xor"
    ADD = "add"
    SUB = "sub"
    SHL = "shl"
    SHR = "shr"
    EQ = "eq"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class Const:
    value: int
    type: SignalType

    def operands(self) -> tuple[NodeId, ...]:
        return ()


@dataclass(frozen=True)
class Input:
    name: str
    type: SignalType

    def operands(self) -> tuple[NodeId, ...]:
        return ()


@dataclass(frozen=True)
class Not:
    a: NodeId

    def operands(self) -> tuple[NodeId, ...]:
        return (self.a,)


@dataclass(frozen=True)
class Binary:
    op: BinOp
    a: NodeId
    b: NodeId

    def operands(self) -> tuple[NodeId, ...]:
        return (self.a, self.b)


@dataclass(frozen=True)
class Mux:
    """``sel ? if_true : if_false``; the true branch comes first."""

    sel: NodeId
    if_true: NodeId
    if_false: NodeId

    def operands(self) -> tuple[NodeId, ...]:
        return (self.sel, self.if_true, self.if_false)


@dataclass(frozen=True)
class Match:
    scrutinee: NodeId
    arms: tuple[tuple[int, NodeId], ...]
    default: NodeId | None = None

    def operands(self) -> tuple[NodeId, ...]:
        ops = (self.scrutinee,) + tuple(n for _, n in self.arms)
        return ops + ((self.default,) if self.default is not None else ())


@dataclass(frozen=True)
class Slice:
    a: NodeId
    hi: int
    lo: int

    def operands(self) -> tuple[NodeId, ...]:
        return (self.a,)


@dataclass(frozen=True)
class Concat:
    hi_part: NodeId
    lo_part: NodeId

    def operands(self) -> tuple[NodeId, ...]:
        return (self.hi_part, self.lo_part)


@dataclass(frozen=True)
class Register:
    """State element. ``next`` is ``None`` until the feedback is bound."""

    init: int
    next: NodeId | None
    type: SignalType

    def operands(self) -> tuple[NodeId, ...]:
        return () if self.next is None else (self.next,)


@dataclass(frozen=True)
class MemReadComb:
    mem: int
    addr: NodeId

    def operands(self) -> tuple[NodeId, ...]:
        return (self.addr,)


@dataclass(frozen=True)
class MemReadSync:
    mem: int
    addr: NodeId

    def operands(self) -> tuple[NodeId, ...]:
        return (self.addr,)


@dataclass(frozen=True)
class BundleMake:
    elements: tuple[NodeId, ...]

    def operands(self) -> tuple[NodeId, ...]:
        return self.elements


@dataclass(frozen=True)
class BundleGet:
    a: NodeId
    index: int

    def operands(self) -> tuple[NodeId, ...]:
        return (self.a,)


Node = Union[
    Const, Input, Not, Binary, Mux, Match, Slice, Concat, Register,
    MemReadComb, MemReadSync, BundleMake, BundleGet,
]

STATE_NODES = (Register, MemReadSync)


def comb_operands(node: Node) -> tuple[NodeId, ...]:
    """Operands that form same-cycle dependencies (register edges are cut)."""
    if isinstance(node, STATE_NODES):
        return ()
    return node.operands()


@dataclass(frozen=True)
class WritePort:
    addr: NodeId
    data: NodeId
    enable: NodeId


@dataclass(frozen=True)
class MemDecl:
    name: str
    addr_width: int
    data_width: int
    init_contents: tuple[int, ...]
    writable: bool = False
    write_port: WritePort | None = None

    def __post_init__(self) -> None:
        if not 1 <= self.addr_width <= 16:
            raise GraphError(f"memory {self.name}: addr_width must be in 1..16")
        if not 1 <= self.data_width <= MAX_WIDTH:
            raise GraphError(f"memory {self.name}: data_width must be in 1..{MAX_WIDTH}")
        if len(self.init_contents) != self.depth:
            raise GraphError(
                f"memory {self.name}: expected {self.depth} init entries, got {len(self.init_contents)}"
            )

    @property
    def depth(self) -> int:
        return 1 << self.addr_width


# --------------------------------------------------------------------------
# Graph


@dataclass
class SignalGraph:
    name: str = "top"
    domain: DomainConfig = field(default_factory=DomainConfig)
    nodes: list[Node] = field(default_factory=list)
    mems: list[MemDecl] = field(default_factory=list)
    inputs: list[tuple[str, NodeId]] = field(default_factory=list)
    outputs: list[tuple[str, NodeId]] = field(default_factory=list)
    # metadata; not part of structural identity
    names: dict[NodeId, str] = field(default_factory=dict)
    spans: dict[NodeId, SourceSpan] = field(default_factory=dict, repr=False)
    _types: dict[NodeId, SignalType] = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self) -> None:
        if not is_identifier(self.name):
            raise GraphError(f"invalid module name {self.name!r}")

    def __len__(self) -> int:
        return len(self.nodes)

    def _check_ids(self, ids: Iterable[NodeId], limit: int | None = None) -> None:
        limit = len(self.nodes) if limit is None else limit
        for i in ids:
            if not isinstance(i, int) or not 0 <= i < limit:
                raise GraphError(f"dangling node id {i!r}")

    def add_node(self, node: Node, *, name: str | None = None, span: SourceSpan | None = None) -> NodeId:
        self._check_ids(node.operands())
        if isinstance(node, (MemReadComb, MemReadSync)) and not 0 <= node.mem < len(self.mems):
            raise GraphError(f"unknown memory id {node.mem}")
        if isinstance(node, Match):
            sels = [s for s, _ in node.arms]
            if len(set(sels)) != len(sels):
                raise GraphError("match selectors must be distinct")
        if isinstance(node, (Const, Register)) and isinstance(node.type, Bundle):
            raise GraphError("constants and registers must have scalar types")
        nid = len(self.nodes)
        self.nodes.append(node)
        if name is not None:
            self.names[nid] = name
        if span is not None:
            self.spans[nid] = span
        return nid

    def replace(self, nid: NodeId, node: Node) -> None:
        """Overwrite a node in place; back references are allowed (this is how
        register feedback, and deliberately malformed test graphs, are built)."""
        self._check_ids([nid])
        self._check_ids(node.operands())
        self.nodes[nid] = node
        self._types.clear()

    def bind_register(self, reg: NodeId, next_id: NodeId) -> None:
        node = self.nodes[reg]
        if not isinstance(node, Register):
            raise GraphError(f"node {reg} is not a register")
        self.replace(reg, replace(node, next=next_id))

    def add_input(self, name: str, type: SignalType, span: SourceSpan | None = None) -> NodeId:
        if not is_scalar(type):
            raise GraphError("input ports must be Bit or BitVec")
        if name in self.port_names():
            raise GraphError(f"duplicate port name {name!r}")
        nid = self.add_node(Input(name, type), name=name, span=span)
        self.inputs.append((name, nid))
        return nid

    def add_output(self, name: str, nid: NodeId) -> None:
        self._check_ids([nid])
        if not is_identifier(name):
            raise GraphError(f"invalid port name {name!r}")
        if name in self.port_names():
            raise GraphError(f"duplicate port name {name!r}")
        self.outputs.append((name, nid))

    def add_mem(self, mem: MemDecl) -> int:
        if any(m.name == mem.name for m in self.mems):
            raise GraphError(f"duplicate memory {mem.name!r}")
        if mem.writable != (mem.write_port is not None):
            # allowed transiently: a RAM may be declared before its port is bound
            if mem.write_port is not None:
                raise GraphError("write_port present on a read-only memory")
        if mem.write_port is not None:
            self._check_ids([mem.write_port.addr, mem.write_port.data, mem.write_port.enable])
        self.mems.append(mem)
        return len(self.mems) - 1

    def bind_write_port(self, mem_id: int, port: WritePort) -> None:
        mem = self.mems[mem_id]
        if not mem.writable:
            raise GraphError(f"memory {mem.name} is read-only")
        self._check_ids([port.addr, port.data, port.enable])
        self.mems[mem_id] = replace(mem, write_port=port)

    def port_names(self) -> set[str]:
        return {n for n, _ in self.inputs} | {n for n, _ in self.outputs}

    def input_types(self) -> list[tuple[str, SignalType]]:
        return [(n, self.nodes[i].type) for n, i in self.inputs]

    def output_types(self) -> list[tuple[str, SignalType]]:
        return [(n, infer_type(self, i)) for n, i in self.outputs]

    def signature(self) -> tuple:
        return (tuple(self.input_types()), tuple(self.output_types()))

    def copy(self) -> "SignalGraph":
        return SignalGraph(
            name=self.name,
            domain=self.domain,
            nodes=list(self.nodes),
            mems=list(self.mems),
            inputs=list(self.inputs),
            outputs=list(self.outputs),
            names=dict(self.names),
            spans=dict(self.spans),
        )

    def structurally_equal(self, other: "SignalGraph") -> bool:
        return (
            self.name == other.name
            and self.domain == other.domain
            and self.nodes == other.nodes
            and self.mems == other.mems
            and self.inputs == other.inputs
            and self.outputs == other.outputs
        )

    # --- serialization ---

    def to_dict(self) -> dict:
        return {
            "version": IR_VERSION,
            "name": self.name,
            "domain": {
                "clock": self.domain.clock_name,
                "reset": self.domain.reset_name,
                "reset_active_high": self.domain.reset_active_high,
            },
            "nodes": [node_to_dict(n) for n in self.nodes],
            "mems": [mem_to_dict(m) for m in self.mems],
            "inputs": [[n, i] for n, i in self.inputs],
            "outputs": [[n, i] for n, i in self.outputs],
            "names": {str(k): v for k, v in sorted(self.names.items())},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def from_dict(cls, doc: dict) -> "SignalGraph":
        if doc.get("version") != IR_VERSION:
            raise GraphError(f"unsupported IR version {doc.get('version')!r}")
        dom = doc.get("domain", {})
        g = cls(
            name=doc["name"],
            domain=DomainConfig(dom.get("clock", "clk"), dom.get("reset", "rst"), dom.get("reset_active_high", True)),
        )
        g.nodes = [node_from_dict(d) for d in doc["nodes"]]
        g.mems = [mem_from_dict(d) for d in doc.get("mems", [])]
        g.inputs = [(n, i) for n, i in doc["inputs"]]
        g.outputs = [(n, i) for n, i in doc["outputs"]]
        g.names = {int(k): v for k, v in doc.get("names", {}).items()}
        # raw tables may contain back references, but never dangling ones
        for node in g.nodes:
            g._check_ids(node.operands())
            if isinstance(node, (MemReadComb, MemReadSync)) and not 0 <= node.mem < len(g.mems):
                raise GraphError(f"unknown memory id {node.mem}")
        g._check_ids([i for _, i in g.inputs] + [i for _, i in g.outputs])
        for m in g.mems:
            if m.write_port:
                g._check_ids([m.write_port.addr, m.write_port.data, m.write_port.enable])
        return g

    @classmethod
    def from_json(cls, text: str) -> "SignalGraph":
        return cls.from_dict(json.loads(text))


def node_to_dict(node: Node) -> dict:
    if isinstance(node, Const):
        return {"op": "const", "value": node.value, "type": type_to_json(node.type)}
    if isinstance(node, Input):
        return {"op": "input", "name": node.name, "type": type_to_json(node.type)}
    if isinstance(node, Not):
        return {"op": "not", "a": node.a}
    if isinstance(node, Binary):
        return {"op": node.op.value, "a": node.a, "b": node.b}
    if isinstance(node, Mux):
        return {"op": "mux", "sel": node.sel, "t": node.if_true, "f": node.if_false}
    if isinstance(node, Match):
        return {"op": "match", "scrutinee": node.scrutinee,
                "arms": [[s, n] for s, n in node.arms], "default": node.default}
    if isinstance(node, Slice):
        return {"op": "slice", "a": node.a, "hi": node.hi, "lo": node.lo}
    if isinstance(node, Concat):
        return {"op": "concat", "hi": node.hi_part, "lo": node.lo_part}
    if isinstance(node, Register):
        return {"op": "reg", "init": node.init, "next": node.next, "type": type_to_json(node.type)}
    if isinstance(node, MemReadComb):
        return {"op": "memr", "mem": node.mem, "addr": node.addr}
    if isinstance(node, MemReadSync):
        return {"op": "memrs", "mem": node.mem, "addr": node.addr}
    if isinstance(node, BundleMake):
        return {"op": "bundle", "elements": list(node.elements)}
    if isinstance(node, BundleGet):
        return {"op": "get", "a": node.a, "index": node.index}
    raise TypeError(f"not a node: {node!r}")


def node_from_dict(d: dict) -> Node:
    op = d["op"]
    if op == "const":
        return Const(d["value"], type_from_json(d["type"]))
    if op == "input":
        return Input(d["name"], type_from_json(d["type"]))
    if op == "not":
        return Not(d["a"])
    if op in BinOp._value2member_map_:
        return Binary(BinOp(op), d["a"], d["b"])
    if op == "mux":
        return Mux(d["sel"], d["t"], d["f"])
    if op == "match":
        return Match(d["scrutinee"], tuple((s, n) for s, n in d["arms"]), d.get("default"))
    if op == "slice":
        return Slice(d["a"], d["hi"], d["lo"])
    if op == "concat":
        return Concat(d["hi"], d["lo"])
    if op == "reg":
        return Register(d["init"], d["next"], type_from_json(d["type"]))
    if op == "memr":
        return MemReadComb(d["mem"], d["addr"])
    if op == "memrs":
        return MemReadSync(d["mem"], d["addr"])
    if op == "bundle":
        return BundleMake(tuple(d["elements"]))
    if op == "get":
        return BundleGet(d["a"], d["index"])
    raise GraphError(f"unknown node op {op!r}")


def mem_to_dict(m: MemDecl) -> dict:
    wp = m.write_port
    return {
        "name": m.name,
        "addr_width": m.addr_width,
        "data_width": m.data_width,
        "init": list(m.init_contents),
        "writable": m.writable,
        "write_port": None if wp is None else [wp.addr, wp.data, wp.enable],
    }


def mem_from_dict(d: dict) -> MemDecl:
    wp = d.get("write_port")
    return MemDecl(
        d["name"], d["addr_width"], d["data_width"], tuple(d["init"]), d.get("writable", False),
        None if wp is None else WritePort(*wp),
    )


# --------------------------------------------------------------------------
# Typing


def infer_type(graph: SignalGraph, nid: NodeId) -> SignalType:
    """The type a node claims. Never fails on a valid id; the checker is the
    one that decides whether the claim is consistent with the operands."""
    cached = graph._types.get(nid)
    if cached is not None:
        return cached
    # iterative DFS to stay safe on deep chains; ``on_path`` holds the real
    # ancestors, so only a genuine type-dependency cycle falls back to Bit
    stack: list[tuple[NodeId, bool]] = [(nid, False)]
    on_path: set[NodeId] = set()
    while stack:
        cur, expanded = stack.pop()
        if cur in graph._types:
            continue
        node = graph.nodes[cur]
        if expanded:
            on_path.discard(cur)
            graph._types[cur] = _local_type(graph, node, cur)
            continue
        if cur in on_path:
            continue
        on_path.add(cur)
        stack.append((cur, True))
        for d in _type_deps(node):
            if d not in graph._types and d not in on_path:
                stack.append((d, False))
    return graph._types[nid]


def _type_deps(node: Node) -> tuple[NodeId, ...]:
    if isinstance(node, (Not, Binary)):
        return (node.a,) if not (isinstance(node, Binary) and node.op is BinOp.EQ) else ()
    if isinstance(node, Mux):
        return (node.if_true,)
    if isinstance(node, Match):
        first = node.arms[0][1] if node.arms else node.default
        return () if first is None else (first,)
    if isinstance(node, Concat):
        return (node.hi_part, node.lo_part)
    if isinstance(node, BundleMake):
        return node.elements
    if isinstance(node, BundleGet):
        return (node.a,)
    return ()


def _lookup(graph: SignalGraph, nid: NodeId, self_id: NodeId) -> SignalType:
    # a node that (illegally) refers to itself claims Bit for that operand
    return graph._types.get(nid, BIT) if nid != self_id else BIT


def _local_type(graph: SignalGraph, node: Node, self_id: NodeId) -> SignalType:
    if isinstance(node, (Const, Input, Register)):
        return node.type
    if isinstance(node, Not):
        return _lookup(graph, node.a, self_id)
    if isinstance(node, Binary):
        return BIT if node.op is BinOp.EQ else _lookup(graph, node.a, self_id)
    if isinstance(node, Mux):
        return _lookup(graph, node.if_true, self_id)
    if isinstance(node, Match):
        first = node.arms[0][1] if node.arms else node.default
        return BIT if first is None else _lookup(graph, first, self_id)
    if isinstance(node, Slice):
        return BitVec(max(1, min(MAX_WIDTH, node.hi - node.lo + 1)))
    if isinstance(node, Concat):
        w = _lookup(graph, node.hi_part, self_id).width + _lookup(graph, node.lo_part, self_id).width
        return BitVec(max(1, min(MAX_WIDTH, w)))
    if isinstance(node, (MemReadComb, MemReadSync)):
        return BitVec(graph.mems[node.mem].data_width)
    if isinstance(node, BundleMake):
        elems = tuple(_lookup(graph, e, self_id) for e in node.elements)
        return Bundle(elems) if len(elems) >= 2 else (elems[0] if elems else BIT)
    if isinstance(node, BundleGet):
        t = _lookup(graph, node.a, self_id)
        if isinstance(t, Bundle) and 0 <= node.index < len(t.elements):
            return t.elements[node.index]
        return t
    raise TypeError(f"not a node: {node!r}")


# --------------------------------------------------------------------------
# Register-block desugaring


@dataclass(frozen=True)
class RegDecl:
    name: str
    type: SignalType
    init: int
    span: SourceSpan | None = None


@dataclass(frozen=True)
class RegAssign:
    """``name <= expr``. ``expr`` is either an existing node id or a callable
    receiving the name -> register-id environment and returning a node id."""

    name: str
    expr: Union[NodeId, Callable[[dict[str, NodeId]], NodeId]]
    span: SourceSpan | None = None


class CircuitBlock:
    """Imperative register block: declare registers, read them anywhere,
    assign each one exactly once. ``close`` checks the single-assignment rule."""

    def __init__(self, graph: SignalGraph) -> None:
        self.graph = graph
        self.regs: dict[str, NodeId] = {}
        self._decl_spans: dict[str, SourceSpan | None] = {}
        self._assigned: dict[str, SourceSpan | None] = {}
        self.diagnostics: list[Diagnostic] = []

    def reg(self, name: str, type: SignalType, init: int, span: SourceSpan | None = None) -> NodeId:
        if name in self.regs:
            self.diagnostics.append(Diagnostic(
                Code.MULTIPLE_DRIVERS, f"register '{name}' declared twice", span=span,
                related_nodes=(self.regs[name],)))
            return self.regs[name]
        rid = self.graph.add_node(Register(init, None, type), name=name, span=span)
        self.regs[name] = rid
        self._decl_spans[name] = span
        return rid

    def assign(self, name: str, next_id: NodeId, span: SourceSpan | None = None) -> None:
        rid = self.regs.get(name)
        if rid is None:
            self.diagnostics.append(Diagnostic(
                Code.UNKNOWN_IDENTIFIER, f"unknown register '{name}'", span=span))
            return
        if name in self._assigned:
            self.diagnostics.append(Diagnostic(
                Code.MULTIPLE_DRIVERS, f"register '{name}' is assigned more than once",
                span=span, related_nodes=(rid,)))
            return
        self._assigned[name] = span
        self.graph.bind_register(rid, next_id)

    def mark_assigned(self, name: str) -> None:
        """Record an assignment whose expression failed to elaborate."""
        self._assigned.setdefault(name, None)

    def close(self) -> list[Diagnostic]:
        for name, rid in self.regs.items():
            if name not in self._assigned:
                self.diagnostics.append(Diagnostic(
                    Code.UNDRIVEN_REGISTER, f"register '{name}' has no next-state assignment",
                    span=self._decl_spans[name], related_nodes=(rid,)))
        return self.diagnostics


def desugar_circuit(graph: SignalGraph, stmts: Iterable[Union[RegDecl, RegAssign]]) -> dict[str, NodeId]:
    """Turn ``reg r = init; r <= expr`` pairs into Register nodes whose next
    state is the elaborated expression. Raises CompileError on
    MultipleDrivers / UndrivenRegister."""
    stmts = list(stmts)
    block = CircuitBlock(graph)
    for s in stmts:
        if isinstance(s, RegDecl):
            block.reg(s.name, s.type, s.init, s.span)
    for s in stmts:
        if isinstance(s, RegAssign):
            nid = s.expr(dict(block.regs)) if callable(s.expr) else s.expr
            block.assign(s.name, nid, s.span)
    diags = block.close()
    if diags:
        raise CompileError(diags)
    return dict(block.regs)


# --------------------------------------------------------------------------
# Graph utilities shared by passes


def live_nodes(graph: SignalGraph) -> set[NodeId]:
    """Nodes that can influence an output (through any edge, including
    register next-state and memory write ports)."""
    mem_ports: dict[int, tuple[NodeId, ...]] = {}
    for idx, m in enumerate(graph.mems):
        if m.write_port:
            mem_ports[idx] = (m.write_port.addr, m.write_port.data, m.write_port.enable)
    seen: set[NodeId] = set()
    stack = [i for _, i in graph.outputs]
    seen_mems: set[int] = set()
    while stack:
        nid = stack.pop()
        if nid in seen:
            continue
        seen.add(nid)
        node = graph.nodes[nid]
        stack.extend(node.operands())
        if isinstance(node, (MemReadComb, MemReadSync)) and node.mem not in seen_mems:
            seen_mems.add(node.mem)
            stack.extend(mem_ports.get(node.mem, ()))
    return seen


def users(graph: SignalGraph) -> dict[NodeId, list[NodeId]]:
    out: dict[NodeId, list[NodeId]] = {i: [] for i in range(len(graph.nodes))}
    for i, node in enumerate(graph.nodes):
        for o in node.operands():
            out[o].append(i)
    return out
