"""SystemVerilog (IEEE 1800-2012) extraction, RTL lint and top-level wrappers.

Every combinational node becomes a ``logic`` wire ``n<id>`` driven by one
continuous assign, every register one ``always_ff`` block with synchronous
reset to its init value, and every match an ``always_comb`` ``case`` with a
``default`` label. Output is byte-deterministic.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .checker import ElaboratedDesign
from .ir import (
    BinOp, Binary, Bit, BundleGet, BundleMake, Concat, Const, Input, Match, MemReadComb,
    MemReadSync, Mux, NodeId, Not, Register, SignalGraph, SignalType, Slice, infer_type, is_identifier,
)

SV_KEYWORDS = frozenset("""
    always always_comb always_ff always_latch and assign assert automatic begin bit break buf byte
    case casex casez cmos const continue default defparam disable do edge else end endcase endfunction
    endgenerate endmodule endpackage endtask enum event final for force forever fork function generate
    genvar if import initial inout input int integer interface localparam logic longint macromodule
    module nand negedge nmos nor not or output package parameter posedge primitive priority pulldown
    pullup reg release repeat return shortint signed specify static string struct supply0 supply1 task
    time tran tri typedef union unique unsigned var void wait while wire wor xor
""".split())


class EmitError(ValueError):
    pass


@dataclass(frozen=True)
class EmitConfig:
    module_name: str | None = None
    clock_name: str | None = None
    reset_name: str | None = None
    reset_active_high: bool | None = None

    def resolve(self, graph: SignalGraph) -> tuple[str, str, str, bool]:
        d = graph.domain
        name = self.module_name or graph.name
        clk = self.clock_name or d.clock_name
        rst = self.reset_name or d.reset_name
        high = d.reset_active_high if self.reset_active_high is None else self.reset_active_high
        for n in (name, clk, rst):
            _check_ident(n)
        if clk == rst:
            raise EmitError("clock and reset must have different names")
        return name, clk, rst, high


_MACHINE_NAME = re.compile(r"^n[0-9]+$")


def _check_ident(name: str) -> None:
    if not is_identifier(name) or name in SV_KEYWORDS:
        raise EmitError(f"{name!r} is not a usable Verilog identifier")


def _decl_range(t: SignalType) -> str:
    if isinstance(t, Bit):
        return ""
    return f"[{t.width - 1}:0] "


def _lit(value: int, t: SignalType) -> str:
    if isinstance(t, Bit):
        return f"1'b{value}"
    return f"{t.width}'d{value}"


def _flat_outputs(graph: SignalGraph, resolve) -> list[tuple[str, NodeId]]:
    """Bundle-typed outputs flatten to ``name_0, name_1, ...``."""
    flat: list[tuple[str, NodeId]] = []

    def walk(name: str, nid: NodeId) -> None:
        leaf = resolve(nid)
        if isinstance(leaf, tuple):
            for k, sub in enumerate(leaf):
                walk_leaf(f"{name}_{k}", sub)
        else:
            flat.append((name, leaf))

    def walk_leaf(name: str, leaf) -> None:
        if isinstance(leaf, tuple):
            for k, sub in enumerate(leaf):
                walk_leaf(f"{name}_{k}", sub)
        else:
            flat.append((name, leaf))

    for name, nid in graph.outputs:
        walk(name, nid)
    return flat


def _bundle_resolver(graph: SignalGraph):
    memo: dict[NodeId, object] = {}

    def resolve(nid: NodeId):
        if nid in memo:
            return memo[nid]
        node = graph.nodes[nid]
        if isinstance(node, BundleMake):
            r = tuple(resolve(e) for e in node.elements)
        elif isinstance(node, BundleGet):
            r = resolve(node.a)[node.index]
        else:
            r = nid
        memo[nid] = r
        return r

    return resolve


def port_list(design: ElaboratedDesign) -> list[tuple[str, str, SignalType]]:
    """Data ports as (direction, name, type), bundle outputs flattened."""
    g = design.graph
    resolve = _bundle_resolver(g)
    ports = [("input", n, g.nodes[i].type) for n, i in g.inputs]
    ports += [("output", n, infer_type(g, leaf)) for n, leaf in _flat_outputs(g, resolve)]
    return ports


def emit(design: ElaboratedDesign, cfg: EmitConfig | None = None) -> str:
    g = design.graph
    cfg = cfg or EmitConfig()
    mod, clk, rst, high = cfg.resolve(g)
    resolve = _bundle_resolver(g)
    outputs = _flat_outputs(g, resolve)

    reserved = {clk, rst}
    seen: set[str] = set()
    for name in [n for n, _ in g.inputs] + [n for n, _ in outputs] + [m.name for m in g.mems]:
        _check_ident(name)
        if name in reserved or name in seen or _MACHINE_NAME.match(name):
            raise EmitError(f"name {name!r} collides with a clock/reset, another port or a machine wire name")
        seen.add(name)

    reset_on = rst if high else f"!{rst}"
    reset_off = f"!{rst}" if high else rst

    def w(nid: NodeId) -> str:
        # input ports are referenced directly; every other node gets n<id>
        r = resolve(nid)
        node = g.nodes[r]
        return node.name if isinstance(node, Input) else f"n{r}"

    def ty(nid: NodeId) -> SignalType:
        return infer_type(g, nid)

    ports = [f"  input  logic {clk}", f"  input  logic {rst}"]
    ports += [f"  input  logic {_decl_range(g.nodes[i].type)}{n}" for n, i in g.inputs]
    ports += [f"  output logic {_decl_range(ty(i))}{n}" for n, i in outputs]
    lines = [f"module {mod} ("]
    lines.append(",\n".join(ports))
    lines.append(");")

    emitted = [nid for nid in sorted(design.topo_order)
               if not isinstance(g.nodes[nid], (BundleMake, BundleGet, Input))]
    for nid in emitted:
        t = ty(nid)
        comment = f"  /* source: {g.names[nid]} */" if nid in g.names else ""
        lines.append(f"  logic {_decl_range(t)}n{nid};{comment}")
    for mem in g.mems:
        lines.append(f"  logic [{mem.data_width - 1}:0] {mem.name} [0:{mem.depth - 1}];")

    for mem in g.mems:
        lines.append("  initial begin")
        for addr, v in enumerate(mem.init_contents):
            lines.append(f"    {mem.name}[{addr}] = {mem.data_width}'d{v};")
        lines.append("  end")

    comb_blocks: list[str] = []
    ff_blocks: list[str] = []
    for nid in design.topo_order:
        node = g.nodes[nid]
        n = f"n{nid}"
        if isinstance(node, Const):
            lines.append(f"  assign {n} = {_lit(node.value, node.type)};")
        elif isinstance(node, Not):
            lines.append(f"  assign {n} = ~{w(node.a)};")
        elif isinstance(node, Binary):
            sym = {BinOp.AND: "&", BinOp.OR: "|", BinOp.XOR: "^", BinOp.ADD: "+", BinOp.SUB: "-",
                   BinOp.SHL: "<<", BinOp.SHR: ">>", BinOp.EQ: "=="}[node.op]
            expr = f"{w(node.a)} {sym} {w(node.b)}"
            lines.append(f"  assign {n} = {'(' + expr + ')' if node.op is BinOp.EQ else expr};")
        elif isinstance(node, Mux):
            lines.append(f"  assign {n} = {w(node.sel)} ? {w(node.if_true)} : {w(node.if_false)};")
        elif isinstance(node, Match):
            st = ty(node.scrutinee)
            body = ["  always_comb begin", f"    case ({w(node.scrutinee)})"]
            for sel, target in node.arms:
                body.append(f"      {_lit(sel, st)}: {n} = {w(target)};")
            fallback = node.default if node.default is not None else node.arms[-1][1]
            body.append(f"      default: {n} = {w(fallback)};")
            body += ["    endcase", "  end"]
            comb_blocks.append("\n".join(body))
        elif isinstance(node, Slice):
            if isinstance(ty(node.a), Bit):
                lines.append(f"  assign {n} = {w(node.a)};")
            else:
                lines.append(f"  assign {n} = {w(node.a)}[{node.hi}:{node.lo}];")
        elif isinstance(node, Concat):
            lines.append(f"  assign {n} = {{{w(node.hi_part)}, {w(node.lo_part)}}};")
        elif isinstance(node, MemReadComb):
            lines.append(f"  assign {n} = {g.mems[node.mem].name}[{w(node.addr)}];")
        elif isinstance(node, Register):
            ff_blocks.append("\n".join([
                f"  always_ff @(posedge {clk}) begin",
                f"    if ({reset_on}) {n} <= {_lit(node.init, node.type)};",
                f"    else {n} <= {w(node.next)};",
                "  end",
            ]))
        elif isinstance(node, MemReadSync):
            t = ty(nid)
            ff_blocks.append("\n".join([
                f"  always_ff @(posedge {clk}) begin",
                f"    if ({reset_on}) {n} <= {_lit(0, t)};",
                f"    else {n} <= {g.mems[node.mem].name}[{w(node.addr)}];",
                "  end",
            ]))
    for mem in g.mems:
        if mem.write_port is not None:
            wp = mem.write_port
            ff_blocks.append("\n".join([
                f"  always_ff @(posedge {clk}) begin",
                f"    if ({reset_off} && {w(wp.enable)}) {mem.name}[{w(wp.addr)}] <= {w(wp.data)};",
                "  end",
            ]))
    lines += comb_blocks
    lines += ff_blocks
    for name, leaf in outputs:
        lines.append(f"  assign {name} = {w(leaf)};")
    lines.append("endmodule")
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# Lint


@dataclass(frozen=True)
class LintHit:
    rule: str
    message: str
    line: int
    severity: str = "error"


@dataclass
class LintReport:
    hits: list[LintHit] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not any(h.severity == "error" for h in self.hits)

    def rules(self) -> list[str]:
        return [h.rule for h in self.hits]

    def __str__(self) -> str:
        if not self.hits:
            return "lint: pass"
        return "\n".join(f"line {h.line}: {h.rule}: {h.message}" for h in self.hits)


_BLOCK_COMMENT = re.compile(r"/\*.*?\*/", re.DOTALL)
_ASSIGN_STMT = re.compile(r"^([A-Za-z_][A-Za-z0-9_]*)\s*(\[[^\]]*\])?\s*(<=|=)(?!=)\s*(.+?);?\s*$")
_CASE_LABEL = re.compile(r"^((?:[0-9]+'[bdhoBDHO][0-9a-fA-F_]+|[0-9]+|[A-Za-z_][A-Za-z0-9_]*)"
                         r"(?:\s*,\s*(?:[0-9]+'[bdhoBDHO][0-9a-fA-F_]+|[0-9]+))*)\s*:(?!:)\s*(.*)$")
_SIZED = re.compile(r"\b[0-9]+'[sS]?[bdhoBDHO][0-9a-fA-FxzXZ_]+")
_IDENT = re.compile(r"\b[A-Za-z_][A-Za-z0-9_$]*\b")
_BRACKETS = re.compile(r"\[[^\]]*\]")


def _strip_comments(text: str) -> list[str]:
    def keep_newlines(m: re.Match) -> str:
        return "\n" * m.group().count("\n")

    text = _BLOCK_COMMENT.sub(keep_newlines, text)
    return [ln.split("//", 1)[0] for ln in text.split("\n")]


def _strip_control(stmt: str) -> tuple[str, bool, bool]:
    """Remove leading ``if (...)`` / ``else`` / ``begin``; report whether an
    if / else was seen."""
    saw_if = saw_else = False
    s = stmt.strip()
    while True:
        if s.startswith("else"):
            saw_else = True
            s = s[4:].strip()
            continue
        if s.startswith("if") and s[2:].lstrip().startswith("("):
            saw_if = True
            depth = 0
            start = s.index("(")
            for k in range(start, len(s)):
                if s[k] == "(":
                    depth += 1
                elif s[k] == ")":
                    depth -= 1
                    if depth == 0:
                        s = s[k + 1:].strip()
                        break
            else:
                return "", saw_if, saw_else
            continue
        if s.startswith("begin"):
            s = s[5:].strip()
            continue
        return s, saw_if, saw_else


def _unsized_literals(expr: str) -> list[str]:
    s = _SIZED.sub(" ", expr)
    s = _BRACKETS.sub(" ", s)
    s = _IDENT.sub(" ", s)
    return re.findall(r"\b[0-9]+\b", s)


def lint(source: str | ElaboratedDesign) -> LintReport:
    """Static RTL rules on emitted SystemVerilog:

    R1 every case has a default; R2 no blocking assignment in always_ff;
    R3 no nonblocking assignment in always_comb; R4 literals are sized;
    R5 no latch patterns in always_comb; R6 one driver per net.
    """
    text = emit(source) if isinstance(source, ElaboratedDesign) else source
    lines = _strip_comments(text)
    hits: list[LintHit] = []

    drivers: dict[str, list[int]] = {}
    block: str | None = None  # ff | comb | initial
    block_line = 0
    depth = 0
    single_stmt = False
    block_targets: set[str] = set()
    case_stack: list[dict] = []
    comb_if_without_else: list[int] = []
    pending_if_line: int | None = None

    def add_driver(net: str, ln: int) -> None:
        drivers.setdefault(net, []).append(ln)

    def close_block() -> None:
        nonlocal block, block_targets, comb_if_without_else
        if block in ("ff", "comb"):
            for t in sorted(block_targets):
                add_driver(t, block_line)
        if block == "comb" and comb_if_without_else:
            for ln in comb_if_without_else:
                hits.append(LintHit("R5", "if without else in always_comb infers a latch", ln))
        block = None
        block_targets = set()
        comb_if_without_else = []

    for ln, raw in enumerate(lines, start=1):
        s = raw.strip()
        if not s:
            continue
        words = re.findall(r"[A-Za-z_][A-Za-z0-9_]*", s)
        if s.startswith("module") or s.startswith("endmodule"):
            if block:
                close_block()
            if s.startswith("endmodule"):
                for net, where in sorted(drivers.items()):
                    if len(where) > 1:
                        hits.append(LintHit("R6", f"net '{net}' has {len(where)} drivers (lines {where})",
                                            where[1]))
                drivers = {}
            continue

        if block is None:
            head = None
            if s.startswith("always_ff"):
                head = "ff"
            elif s.startswith("always_comb"):
                head = "comb"
            elif s.startswith("initial"):
                head = "initial"
            elif re.match(r"^always\b", s) or s.startswith("always_latch"):
                hits.append(LintHit("R5", "plain always/always_latch block; use always_ff or always_comb", ln))
                head = "comb"
            if head is not None:
                block, block_line, block_targets = head, ln, set()
                depth = words.count("begin") - words.count("end")
                single_stmt = depth == 0
                rest = s
                if head == "ff":
                    rest = re.sub(r"^always_ff\s*@\s*\([^)]*\)", "", s).strip()
                else:
                    rest = re.sub(r"^(always_comb|initial|always\s*@\s*\([^)]*\)|always_latch)", "", s).strip()
                rest = re.sub(r"^begin\b", "", rest).strip()
                if rest:
                    _scan_stmt(rest, ln, block, block_targets, hits, case_stack)
                    if single_stmt:
                        close_block()
                continue
            m = re.match(r"^assign\s+(.*)$", s)
            if m:
                am = _ASSIGN_STMT.match(m.group(1))
                if am:
                    add_driver(am.group(1), ln)
                    for lit in _unsized_literals(am.group(4)):
                        hits.append(LintHit("R4", f"unsized literal '{lit}'", ln))
            continue

        # inside a procedural block
        if words and words[0] == "case" or s.startswith("case"):
            case_stack.append({"line": ln, "default": False, "branches": [], "block": block})
            continue
        if s.startswith("endcase"):
            c = case_stack.pop() if case_stack else None
            if c is not None:
                if not c["default"]:
                    hits.append(LintHit("R1", "case statement without default", c["line"]))
                    if c["block"] == "comb":
                        hits.append(LintHit("R5", "incomplete case in always_comb infers a latch", c["line"]))
                elif c["block"] == "comb":
                    sets = [frozenset(b) for b in c["branches"]]
                    if sets and any(x != sets[0] for x in sets):
                        hits.append(LintHit("R5", "case branches assign different targets (latch)", c["line"]))
            depth += words.count("begin") - words.count("end")
            if depth <= 0 and not single_stmt:
                close_block()
            continue

        opens, closes = words.count("begin"), words.count("end")
        if case_stack:
            cm = _CASE_LABEL.match(s)
            if cm and not s.startswith("if") and not _ASSIGN_STMT.match(s):
                label = cm.group(1)
                if label == "default":
                    case_stack[-1]["default"] = True
                else:
                    for lit in _unsized_literals(label):
                        hits.append(LintHit("R4", f"unsized case label '{lit}'", ln))
                targets: set[str] = set()
                if cm.group(2).strip() and cm.group(2).strip() not in ("begin",):
                    _scan_stmt(cm.group(2), ln, block, targets, hits, case_stack)
                case_stack[-1]["branches"].append(targets)
                block_targets |= targets
                depth += opens - closes
                continue
        if s.strip() not in ("begin", "end") and not s.startswith("end"):
            stmt, saw_if, saw_else = _strip_control(s)
            if block == "comb":
                if saw_if and not saw_else:
                    pending_if_line = ln
                    comb_if_without_else.append(ln)
                elif saw_else and pending_if_line is not None and comb_if_without_else:
                    comb_if_without_else.remove(pending_if_line)
                    pending_if_line = None
            if stmt:
                targets = set()
                _scan_stmt(stmt, ln, block, targets, hits, case_stack)
                block_targets |= targets
                if case_stack and case_stack[-1]["branches"]:
                    case_stack[-1]["branches"][-1] |= targets
        depth += opens - closes
        if (depth <= 0 and (closes or single_stmt)) or (single_stmt and not opens):
            close_block()

    if block:
        close_block()
    hits.sort(key=lambda h: (h.line, h.rule))
    return LintReport(hits)


def _scan_stmt(stmt: str, ln: int, block: str | None, targets: set[str], hits: list[LintHit],
               case_stack: list) -> None:
    stmt, _, _ = _strip_control(stmt)
    m = _ASSIGN_STMT.match(stmt.strip())
    if not m:
        return
    target, _, op, rhs = m.groups()
    if block == "ff" and op == "=":
        hits.append(LintHit("R2", f"blocking assignment to '{target}' in always_ff", ln))
    if block == "comb" and op == "<=":
        hits.append(LintHit("R3", f"nonblocking assignment to '{target}' in always_comb", ln))
    if block in ("ff", "comb"):
        for lit in _unsized_literals(rhs):
            hits.append(LintHit("R4", f"unsized literal '{lit}'", ln))
        targets.add(target)


# --------------------------------------------------------------------------
# Wrapper


class WrapperError(ValueError):
    pass


@dataclass(frozen=True)
class WrapperSpec:
    """``mapping`` maps inner port -> wrapper port; ``paddings`` gives a wider
    wrapper-side width for an inner port (zero-extended outputs, truncated
    inputs)."""

    name: str = "TopModule"
    mapping: dict[str, str] = field(default_factory=dict)
    paddings: dict[str, int] = field(default_factory=dict)

    @classmethod
    def from_pairs(cls, name: str, pairs: list[str], paddings: dict[str, int] | None = None) -> "WrapperSpec":
        mapping: dict[str, str] = {}
        for p in pairs:
            if "=" not in p:
                raise WrapperError(f"map entry {p!r} must look like inner=outer")
            inner, outer = (x.strip() for x in p.split("=", 1))
            if inner in mapping and mapping[inner] != outer:
                raise WrapperError(f"conflicting mappings for '{inner}': '{mapping[inner]}' and '{outer}'")
            mapping[inner] = outer
        return cls(name, mapping, dict(paddings or {}))

    @classmethod
    def identity(cls, design: ElaboratedDesign, name: str = "TopModule") -> "WrapperSpec":
        return cls(name, {n: n for _, n, _ in port_list(design)})


def emit_wrapper(design: ElaboratedDesign, spec: WrapperSpec, cfg: EmitConfig | None = None) -> str:
    g = design.graph
    inner_name, clk, rst, _ = (cfg or EmitConfig()).resolve(g)
    _check_ident(spec.name)
    if spec.name == inner_name:
        raise WrapperError("wrapper and inner module must have different names")
    ports = [("input", clk, Bit()), ("input", rst, Bit())] + port_list(design)
    inner_names = [n for _, n, _ in ports]
    unknown = sorted(set(spec.mapping) - set(inner_names))
    if unknown:
        raise WrapperError(f"mapping names unknown inner port(s): {', '.join(unknown)}")
    mapping = dict(spec.mapping)
    mapping.setdefault(clk, clk)
    mapping.setdefault(rst, rst)
    missing = [n for n in inner_names if n not in mapping]
    if missing:
        raise WrapperError(f"unmapped inner port(s): {', '.join(missing)}")
    outers = [mapping[n] for n in inner_names]
    dup = sorted({o for o in outers if outers.count(o) > 1})
    if dup:
        raise WrapperError(f"wrapper port(s) mapped more than once: {', '.join(dup)}")
    for o in outers:
        _check_ident(o)

    decls, conns, extra = [], [], []
    for direction, inner, t in ports:
        outer = mapping[inner]
        ow = spec.paddings.get(inner, t.width)
        if ow < t.width:
            raise WrapperError(f"padding for '{inner}' narrower than the port ({ow} < {t.width})")
        rng = _decl_range(t) if ow == t.width else f"[{ow - 1}:0] "
        decls.append(f"  {direction:<6} logic {rng}{outer}")
        if ow == t.width:
            conns.append(f"    .{inner}({outer})")
        elif direction == "input":
            conns.append(f"    .{inner}({outer}[{t.width - 1}:0])")
        else:
            wire = f"{inner}_inner"
            extra.append(f"  logic {_decl_range(t)}{wire};")
            extra.append(f"  assign {outer} = {{{ow - t.width}'d0, {wire}}};")
            conns.append(f"    .{inner}({wire})")
    lines = [f"module {spec.name} (", ",\n".join(decls), ");"]
    lines += extra
    lines.append(f"  {inner_name} u_{inner_name} (")
    lines.append(",\n".join(conns))
    lines.append("  );")
    lines.append("endmodule")
    return "\n".join(lines) + "\n"
