"""Textual circuit language (``.ckt``) -> AST -> SignalGraph.

Grammar::

    module    := 'module' IDENT '(' ports? ')' '->' '(' ports? ')' '{' stmt* '}'
    ports     := port (',' port)*
    port      := ('in' | 'out') IDENT ':' type
    type      := 'bit' | 'bv' INT
    stmt      := 'let' IDENT '=' expr ';'
               | 'reg' IDENT ':' type '=' INT ';'
               | IDENT '<=' expr ';'
               | 'mem' IDENT ':' type '[' '2' '^' INT ']' '=' meminit ('rom' | 'ram') ';'
               | 'memw' '(' IDENT ',' expr ',' expr ',' expr ')' ';'
               | IDENT '=' expr ';'
    meminit   := '[' INT (',' INT)* ']' | '[' INT ';' INT ']'
    expr      := sum ('==' sum)*
    sum       := bitwise (('+' | '-') bitwise)*
    bitwise   := shift (('&' | '|' | '^') shift)*
    shift     := unary (('<<' | '>>') unary)*
    unary     := '~' unary | postfix
    postfix   := primary ('[' INT ':' INT ']')*
    primary   := INT ':' type | 'true' | 'false' | IDENT | '(' expr ')'
               | ('mux' | 'cond') '(' expr ',' expr ',' expr ')'
               | 'concat' '(' expr ',' expr ')'
               | ('memr' | 'memrs') '(' IDENT ',' expr ')'
               | 'match' expr '{' arm (',' arm)* ','? '}'
    arm       := (INT (':' type)? | 'default' | '_') '=>' expr

Comments run from ``//`` to end of line.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

from .checker import ElaboratedDesign, elaborate, topo_order
from .diagnostics import Code, CompileError, Diagnostic, SourceSpan
from .ir import (
    BIT, BinOp, Binary, Bit, BitVec, CircuitBlock, Concat, Const, GraphError, Input, Match, MemDecl,
    MemReadComb, MemReadSync, Mux, NodeId, Not, Register, SignalGraph, SignalType, Slice, WritePort,
    infer_type, is_identifier, live_nodes, MAX_WIDTH,
)

KEYWORDS = {
    "module", "in", "out", "let", "reg", "mem", "rom", "ram", "memw", "mux", "cond", "match",
    "default", "concat", "memr", "memrs", "true", "false", "bit",
}

# --------------------------------------------------------------------------
# Lexer


@dataclass(frozen=True)
class Token:
    kind: str  # IDENT, INT, OP, EOF
    text: str
    line: int
    col: int
    value: int | None = None


_TOKEN_RE = re.compile(r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>//[^\n]*)
  | (?P<int>0[bB][01_]+|0[xX][0-9a-fA-F_]+|[0-9][0-9_]*)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op><=|=>|==|->|<<|>>|[(){}\[\],;:=+\-&|^~])
""", re.VERBOSE)


def tokenize(text: str, filename: str = "<input>") -> list[Token]:
    toks: list[Token] = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        col = pos - line_start + 1
        if not m:
            raise CompileError([Diagnostic(
                Code.SYNTAX_ERROR, f"unexpected character {text[pos]!r}",
                span=SourceSpan(filename, line, col, 1))])
        kind = m.lastgroup
        s = m.group()
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind == "int":
            digits = s.replace("_", "")
            base = 2 if digits[:2].lower() == "0b" else 16 if digits[:2].lower() == "0x" else 10
            toks.append(Token("INT", s, line, col, int(digits[2:] if base != 10 else digits, base)))
        elif kind == "ident":
            toks.append(Token("IDENT", s, line, col))
        elif kind == "op":
            toks.append(Token("OP", s, line, col))
        pos = m.end()
    toks.append(Token("EOF", "", line, pos - line_start + 1))
    return toks


# --------------------------------------------------------------------------
# AST

_span = dict(compare=False, repr=False, default=None)


@dataclass(frozen=True)
class TypeRef:
    width: int | None  # None means Bit
    span: SourceSpan | None = field(**_span)

    def to_type(self) -> SignalType:
        return BIT if self.width is None else BitVec(self.width)

    def __str__(self) -> str:
        return "bit" if self.width is None else f"bv{self.width}"


@dataclass(frozen=True)
class Lit:
    value: int
    type: TypeRef
    span: SourceSpan | None = field(**_span)


@dataclass(frozen=True)
class Ident:
    name: str
    span: SourceSpan | None = field(**_span)


@dataclass(frozen=True)
class Unary:
    op: str
    operand: "Expr"
    span: SourceSpan | None = field(**_span)


@dataclass(frozen=True)
class BinExpr:
    op: str
    left: "Expr"
    right: "Expr"
    span: SourceSpan | None = field(**_span)


@dataclass(frozen=True)
class MuxExpr:
    sel: "Expr"
    if_true: "Expr"
    if_false: "Expr"
    span: SourceSpan | None = field(**_span)


@dataclass(frozen=True)
class MatchArm:
    pattern: int | None  # None = default
    pattern_type: TypeRef | None
    body: "Expr"
    span: SourceSpan | None = field(**_span)


@dataclass(frozen=True)
class MatchExpr:
    scrutinee: "Expr"
    arms: tuple[MatchArm, ...]
    span: SourceSpan | None = field(**_span)


@dataclass(frozen=True)
class SliceExpr:
    operand: "Expr"
    hi: int
    lo: int
    span: SourceSpan | None = field(**_span)


@dataclass(frozen=True)
class ConcatExpr:
    hi_part: "Expr"
    lo_part: "Expr"
    span: SourceSpan | None = field(**_span)


@dataclass(frozen=True)
class MemReadExpr:
    mem: str
    addr: "Expr"
    sync: bool
    span: SourceSpan | None = field(**_span)


Expr = Union[Lit, Ident, Unary, BinExpr, MuxExpr, MatchExpr, SliceExpr, ConcatExpr, MemReadExpr]


@dataclass(frozen=True)
class Port:
    direction: str
    name: str
    type: TypeRef
    span: SourceSpan | None = field(**_span)


@dataclass(frozen=True)
class LetStmt:
    name: str
    expr: Expr
    span: SourceSpan | None = field(**_span)


@dataclass(frozen=True)
class RegStmt:
    name: str
    type: TypeRef
    init: int
    span: SourceSpan | None = field(**_span)


@dataclass(frozen=True)
class NextStmt:
    name: str
    expr: Expr
    span: SourceSpan | None = field(**_span)


@dataclass(frozen=True)
class MemStmt:
    name: str
    type: TypeRef
    addr_width: int
    init: tuple[int, ...]
    kind: str  # rom | ram
    span: SourceSpan | None = field(**_span)


@dataclass(frozen=True)
class MemWriteStmt:
    mem: str
    addr: Expr
    data: Expr
    enable: Expr
    span: SourceSpan | None = field(**_span)


@dataclass(frozen=True)
class OutStmt:
    name: str
    expr: Expr
    span: SourceSpan | None = field(**_span)


Stmt = Union[LetStmt, RegStmt, NextStmt, MemStmt, MemWriteStmt, OutStmt]


@dataclass(frozen=True)
class ModuleAst:
    name: str
    inputs: tuple[Port, ...]
    outputs: tuple[Port, ...]
    body: tuple[Stmt, ...]
    span: SourceSpan | None = field(**_span)

    @property
    def regs(self) -> list[RegStmt]:
        return [s for s in self.body if isinstance(s, RegStmt)]

    @property
    def next_assigns(self) -> list[NextStmt]:
        return [s for s in self.body if isinstance(s, NextStmt)]


# --------------------------------------------------------------------------
# Parser

_BINARY_LEVELS = [("==",), ("+", "-"), ("&", "|", "^"), ("<<", ">>")]


class _Parser:
    def __init__(self, toks: list[Token], filename: str) -> None:
        self.toks = toks
        self.pos = 0
        self.filename = filename

    @property
    def tok(self) -> Token:
        return self.toks[self.pos]

    def span(self, tok: Token | None = None) -> SourceSpan:
        tok = tok or self.tok
        return SourceSpan(self.filename, tok.line, tok.col, max(1, len(tok.text)))

    def error(self, expected: str) -> CompileError:
        found = "end of input" if self.tok.kind == "EOF" else repr(self.tok.text)
        return CompileError([Diagnostic(Code.SYNTAX_ERROR, f"expected {expected}, found {found}",
                                        span=self.span())])

    def at(self, text: str) -> bool:
        return self.tok.kind in ("OP", "IDENT") and self.tok.text == text

    def advance(self) -> Token:
        t = self.tok
        self.pos += 1
        return t

    def expect(self, text: str) -> Token:
        if not self.at(text):
            raise self.error(f"'{text}'")
        return self.advance()

    def ident(self, what: str = "identifier") -> Token:
        if self.tok.kind != "IDENT" or self.tok.text in KEYWORDS:
            raise self.error(what)
        return self.advance()

    def integer(self, what: str = "integer") -> Token:
        if self.tok.kind != "INT":
            raise self.error(what)
        return self.advance()

    # --- declarations ---

    def module(self) -> ModuleAst:
        start = self.expect("module")
        name = self.ident("module name").text
        self.expect("(")
        inputs = self.ports("in")
        self.expect(")")
        self.expect("->")
        self.expect("(")
        outputs = self.ports("out")
        self.expect(")")
        self.expect("{")
        body = []
        while not self.at("}"):
            if self.tok.kind == "EOF":
                raise self.error("'}'")
            body.append(self.statement())
        self.expect("}")
        if self.tok.kind != "EOF":
            raise self.error("end of input")
        return ModuleAst(name, tuple(inputs), tuple(outputs), tuple(body), self.span(start))

    def ports(self, direction: str) -> list[Port]:
        ports: list[Port] = []
        if self.at(")"):
            return ports
        while True:
            self.expect(direction)
            name = self.ident("port name")
            self.expect(":")
            ports.append(Port(direction, name.text, self.type_ref(), self.span(name)))
            if not self.at(","):
                return ports
            self.advance()

    def type_ref(self) -> TypeRef:
        tok = self.tok
        if tok.kind == "IDENT" and tok.text == "bit":
            self.advance()
            return TypeRef(None, self.span(tok))
        if tok.kind == "IDENT" and re.fullmatch(r"bv[0-9]+", tok.text):
            self.advance()
            width = int(tok.text[2:])
            if not 1 <= width <= MAX_WIDTH:
                raise CompileError([Diagnostic(Code.SYNTAX_ERROR,
                                               f"bit width must be in 1..{MAX_WIDTH}, got {width}",
                                               span=self.span(tok))])
            return TypeRef(width, self.span(tok))
        raise self.error("type ('bit' or 'bvN')")

    def statement(self) -> Stmt:
        tok = self.tok
        sp = self.span(tok)
        if self.at("let"):
            self.advance()
            name = self.ident("wire name").text
            self.expect("=")
            e = self.expr()
            self.expect(";")
            return LetStmt(name, e, sp)
        if self.at("reg"):
            self.advance()
            name = self.ident("register name").text
            self.expect(":")
            t = self.type_ref()
            self.expect("=")
            init = self.integer("register init value").value
            self.expect(";")
            return RegStmt(name, t, init, sp)
        if self.at("mem"):
            self.advance()
            name = self.ident("memory name").text
            self.expect(":")
            t = self.type_ref()
            self.expect("[")
            two = self.integer("'2'")
            if two.value != 2:
                raise CompileError([Diagnostic(Code.SYNTAX_ERROR, "memory depth must be written 2^A",
                                               span=self.span(two))])
            self.expect("^")
            aw = self.integer("address width").value
            self.expect("]")
            self.expect("=")
            init = self.mem_init(aw)
            if not (self.at("rom") or self.at("ram")):
                raise self.error("'rom' or 'ram'")
            kind = self.advance().text
            self.expect(";")
            return MemStmt(name, t, aw, init, kind, sp)
        if self.at("memw"):
            self.advance()
            self.expect("(")
            mem = self.ident("memory name").text
            self.expect(",")
            a = self.expr()
            self.expect(",")
            d = self.expr()
            self.expect(",")
            en = self.expr()
            self.expect(")")
            self.expect(";")
            return MemWriteStmt(mem, a, d, en, sp)
        if tok.kind == "IDENT" and tok.text not in KEYWORDS:
            self.advance()
            if self.at("<="):
                self.advance()
                e = self.expr()
                self.expect(";")
                return NextStmt(tok.text, e, sp)
            if self.at("="):
                self.advance()
                e = self.expr()
                self.expect(";")
                return OutStmt(tok.text, e, sp)
            raise self.error("'<=' or '='")
        raise self.error("statement")

    def mem_init(self, addr_width: int) -> tuple[int, ...]:
        self.expect("[")
        first = self.integer("init value").value
        if self.at(";"):
            self.advance()
            count = self.integer("repeat count")
            self.expect("]")
            if count.value != 1 << addr_width:
                raise CompileError([Diagnostic(Code.SYNTAX_ERROR,
                                               f"repeat count must equal depth {1 << addr_width}",
                                               span=self.span(count))])
            return (first,) * count.value
        vals = [first]
        while self.at(","):
            self.advance()
            if self.at("]"):
                break
            vals.append(self.integer("init value").value)
        end = self.expect("]")
        if len(vals) != 1 << addr_width:
            raise CompileError([Diagnostic(Code.SYNTAX_ERROR,
                                           f"memory needs {1 << addr_width} init values, got {len(vals)}",
                                           span=self.span(end))])
        return tuple(vals)

    # --- expressions ---

    def expr(self, level: int = 0) -> Expr:
        if level == len(_BINARY_LEVELS):
            return self.unary()
        left = self.expr(level + 1)
        while self.tok.kind == "OP" and self.tok.text in _BINARY_LEVELS[level]:
            op = self.advance()
            right = self.expr(level + 1)
            left = BinExpr(op.text, left, right, self.span(op))
        return left

    def unary(self) -> Expr:
        if self.at("~"):
            op = self.advance()
            return Unary("~", self.unary(), self.span(op))
        return self.postfix()

    def postfix(self) -> Expr:
        e = self.primary()
        while self.at("["):
            br = self.advance()
            hi = self.integer("slice high index").value
            self.expect(":")
            lo = self.integer("slice low index").value
            self.expect("]")
            e = SliceExpr(e, hi, lo, self.span(br))
        return e

    def primary(self) -> Expr:
        tok = self.tok
        sp = self.span(tok)
        if tok.kind == "INT":
            self.advance()
            if not self.at(":"):
                raise self.error("':' and a width after literal (e.g. 5:bv8)")
            self.advance()
            return Lit(tok.value, self.type_ref(), sp)
        if self.at("true") or self.at("false"):
            self.advance()
            return Lit(1 if tok.text == "true" else 0, TypeRef(None), sp)
        if self.at("("):
            self.advance()
            e = self.expr()
            self.expect(")")
            return e
        if self.at("mux") or self.at("cond"):
            self.advance()
            self.expect("(")
            s = self.expr()
            self.expect(",")
            t = self.expr()
            self.expect(",")
            f = self.expr()
            self.expect(")")
            return MuxExpr(s, t, f, sp)
        if self.at("concat"):
            self.advance()
            self.expect("(")
            h = self.expr()
            self.expect(",")
            lo = self.expr()
            self.expect(")")
            return ConcatExpr(h, lo, sp)
        if self.at("memr") or self.at("memrs"):
            self.advance()
            self.expect("(")
            mem = self.ident("memory name").text
            self.expect(",")
            a = self.expr()
            self.expect(")")
            return MemReadExpr(mem, a, tok.text == "memrs", sp)
        if self.at("match"):
            self.advance()
            scrut = self.expr()
            self.expect("{")
            arms = []
            while not self.at("}"):
                arms.append(self.arm())
                if self.at(","):
                    self.advance()
                elif not self.at("}"):
                    raise self.error("',' or '}'")
            self.expect("}")
            if not arms:
                raise CompileError([Diagnostic(Code.SYNTAX_ERROR, "match needs at least one arm", span=sp)])
            return MatchExpr(scrut, tuple(arms), sp)
        if tok.kind == "IDENT" and tok.text not in KEYWORDS:
            self.advance()
            return Ident(tok.text, sp)
        raise self.error("expression")

    def arm(self) -> MatchArm:
        tok = self.tok
        sp = self.span(tok)
        if self.at("default") or self.at("_"):
            self.advance()
            pat, pt = None, None
        else:
            pat = self.integer("match pattern").value
            pt = None
            if self.at(":"):
                self.advance()
                pt = self.type_ref()
        self.expect("=>")
        return MatchArm(pat, pt, self.expr(), sp)


def parse(text: str, filename: str = "<input>") -> ModuleAst:
    """Parse a ``.ckt`` module. Raises CompileError carrying SyntaxError
    diagnostics on failure."""
    toks = tokenize(text, filename)
    if toks[0].kind == "EOF":
        raise CompileError([Diagnostic(Code.SYNTAX_ERROR, "empty input, expected 'module'",
                                       span=SourceSpan(filename, 1, 1, 1))])
    return _Parser(toks, filename).module()


# --------------------------------------------------------------------------
# Pretty printer

_PREC = {op: lvl for lvl, ops in enumerate(_BINARY_LEVELS) for op in ops}


def format_expr(e: Expr, parent_level: int = -1, right: bool = False) -> str:
    if isinstance(e, Lit):
        if e.type.width is None:
            return "true" if e.value else "false"
        return f"{e.value}:{e.type}"
    if isinstance(e, Ident):
        return e.name
    if isinstance(e, Unary):
        return f"~{format_expr(e.operand, len(_BINARY_LEVELS))}"
    if isinstance(e, BinExpr):
        lvl = _PREC[e.op]
        s = f"{format_expr(e.left, lvl)} {e.op} {format_expr(e.right, lvl, right=True)}"
        if lvl < parent_level or (lvl == parent_level and right):
            s = f"({s})"
        return s
    if isinstance(e, MuxExpr):
        return f"mux({format_expr(e.sel)}, {format_expr(e.if_true)}, {format_expr(e.if_false)})"
    if isinstance(e, MatchExpr):
        arms = []
        for a in e.arms:
            if a.pattern is None:
                pat = "default"
            else:
                pat = str(a.pattern) + (f":{a.pattern_type}" if a.pattern_type else "")
            arms.append(f"{pat} => {format_expr(a.body)}")
        return f"match {format_expr(e.scrutinee)} {{ " + ", ".join(arms) + " }"
    if isinstance(e, SliceExpr):
        inner = format_expr(e.operand, len(_BINARY_LEVELS) + 1)
        if isinstance(e.operand, (BinExpr, Unary, MatchExpr)):
            inner = f"({format_expr(e.operand)})"
        return f"{inner}[{e.hi}:{e.lo}]"
    if isinstance(e, ConcatExpr):
        return f"concat({format_expr(e.hi_part)}, {format_expr(e.lo_part)})"
    if isinstance(e, MemReadExpr):
        return f"{'memrs' if e.sync else 'memr'}({e.mem}, {format_expr(e.addr)})"
    raise TypeError(e)


def format_stmt(s: Stmt) -> str:
    if isinstance(s, LetStmt):
        return f"let {s.name} = {format_expr(s.expr)};"
    if isinstance(s, RegStmt):
        return f"reg {s.name}: {s.type} = {s.init};"
    if isinstance(s, NextStmt):
        return f"{s.name} <= {format_expr(s.expr)};"
    if isinstance(s, MemStmt):
        vals = ", ".join(str(v) for v in s.init)
        return f"mem {s.name}: {s.type}[2^{s.addr_width}] = [{vals}] {s.kind};"
    if isinstance(s, MemWriteStmt):
        return f"memw({s.mem}, {format_expr(s.addr)}, {format_expr(s.data)}, {format_expr(s.enable)});"
    if isinstance(s, OutStmt):
        return f"{s.name} = {format_expr(s.expr)};"
    raise TypeError(s)


def format_module(m: ModuleAst) -> str:
    ins = ", ".join(f"in {p.name}: {p.type}" for p in m.inputs)
    outs = ", ".join(f"out {p.name}: {p.type}" for p in m.outputs)
    lines = [f"module {m.name} ({ins}) -> ({outs}) {{"]
    lines += [f"  {format_stmt(s)}" for s in m.body]
    lines.append("}")
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# Lowering

_BINOPS = {
    "&": BinOp.AND, "|": BinOp.OR, "^": BinOp.XOR, "+": BinOp.ADD, "-": BinOp.SUB,
    "<<": BinOp.SHL, ">>": BinOp.SHR, "==": BinOp.EQ,
}


class _Lowerer:
    def __init__(self, ast: ModuleAst) -> None:
        self.ast = ast
        self.graph = SignalGraph(name=ast.name)
        self.diags: list[Diagnostic] = []
        self.env: dict[str, NodeId] = {}
        self.mems: dict[str, int] = {}
        self.block = CircuitBlock(self.graph)

    def err(self, code: Code, msg: str, span: SourceSpan | None) -> None:
        self.diags.append(Diagnostic(code, msg, span=span))

    def run(self) -> SignalGraph:
        ast = self.ast
        out_ports = {p.name: p for p in ast.outputs}
        for p in ast.inputs + ast.outputs:
            if p.name in KEYWORDS or not is_identifier(p.name):
                self.err(Code.SYNTAX_ERROR, f"invalid port name '{p.name}'", p.span)
        seen: set[str] = set()
        for p in ast.inputs + ast.outputs:
            if p.name in seen:
                self.err(Code.MULTIPLE_DRIVERS, f"port '{p.name}' declared twice", p.span)
            seen.add(p.name)
        for p in ast.inputs:
            if p.name not in self.env:
                self.env[p.name] = self.graph.add_input(p.name, p.type.to_type(), span=p.span)

        # registers and memories are visible everywhere in the body
        for s in ast.body:
            if isinstance(s, RegStmt):
                if s.name in self.env or s.name in out_ports:
                    self.err(Code.MULTIPLE_DRIVERS, f"'{s.name}' is already defined", s.span)
                    continue
                self.env[s.name] = self.block.reg(s.name, s.type.to_type(), s.init, s.span)
            elif isinstance(s, MemStmt):
                if s.name in self.mems:
                    self.err(Code.MULTIPLE_DRIVERS, f"memory '{s.name}' declared twice", s.span)
                    continue
                try:
                    self.mems[s.name] = self.graph.add_mem(MemDecl(
                        s.name, s.addr_width, s.type.width or 1, s.init, writable=(s.kind == "ram")))
                except GraphError as exc:
                    self.err(Code.SYNTAX_ERROR, str(exc), s.span)

        bound: dict[str, NodeId] = {}
        written: set[str] = set()
        for s in ast.body:
            if isinstance(s, LetStmt):
                nid = self.expr(s.expr)
                if s.name in self.env or s.name in out_ports or s.name in self.mems:
                    self.err(Code.MULTIPLE_DRIVERS, f"'{s.name}' is already defined", s.span)
                    continue
                # a failed definition poisons the name so later uses stay quiet
                self.env[s.name] = nid
                if nid is not None:
                    self.graph.names.setdefault(nid, s.name)
            elif isinstance(s, NextStmt):
                nid = self.expr(s.expr)
                if s.name not in self.block.regs:
                    self.err(Code.UNKNOWN_IDENTIFIER, f"'{s.name}' is not a register", s.span)
                elif nid is not None:
                    self.block.assign(s.name, nid, s.span)
                else:
                    self.block.mark_assigned(s.name)
            elif isinstance(s, OutStmt):
                nid = self.expr(s.expr)
                port = out_ports.get(s.name)
                if port is None:
                    self.err(Code.UNKNOWN_IDENTIFIER, f"'{s.name}' is not an output port", s.span)
                elif s.name in bound:
                    self.err(Code.MULTIPLE_DRIVERS, f"output '{s.name}' is driven more than once", s.span)
                elif nid is None:
                    bound[s.name] = None
                else:
                    bound[s.name] = nid
                    t = infer_type(self.graph, nid)
                    if t != port.type.to_type():
                        self.err(Code.WIDTH_MISMATCH,
                                 f"output '{s.name}' declared {port.type} but driven with {t}", s.span)
            elif isinstance(s, MemWriteStmt):
                a, d, en = self.expr(s.addr), self.expr(s.data), self.expr(s.enable)
                mid = self.mems.get(s.mem)
                if mid is None:
                    self.err(Code.UNKNOWN_IDENTIFIER, f"unknown memory '{s.mem}'", s.span)
                elif not self.graph.mems[mid].writable:
                    self.err(Code.MULTIPLE_DRIVERS, f"memory '{s.mem}' is a ROM and cannot be written", s.span)
                elif s.mem in written:
                    self.err(Code.MULTIPLE_DRIVERS, f"memory '{s.mem}' has more than one write port", s.span)
                elif None not in (a, d, en):
                    written.add(s.mem)
                    self.graph.bind_write_port(mid, WritePort(a, d, en))

        self.diags.extend(d for d in self.block.close()
                          if d.code is not Code.UNKNOWN_IDENTIFIER)
        for name, mid in self.mems.items():
            if self.graph.mems[mid].writable and name not in written:
                decl = next(s for s in ast.body if isinstance(s, MemStmt) and s.name == name)
                self.err(Code.UNDRIVEN_REGISTER, f"RAM '{name}' has no memw write port", decl.span)
        for p in ast.outputs:
            if p.name not in bound:
                self.err(Code.UNDRIVEN_OUTPUT, f"output '{p.name}' is never assigned", p.span)
            elif bound[p.name] is not None:
                self.graph.add_output(p.name, bound[p.name])
        if self.diags:
            self.diags.sort(key=lambda d: (d.span.line, d.span.column) if d.span else (0, 0))
            raise CompileError(self.diags)
        return self.graph

    def add(self, node, span) -> NodeId:
        return self.graph.add_node(node, span=span)

    def expr(self, e: Expr) -> NodeId | None:
        if isinstance(e, Lit):
            return self.add(Const(e.value, e.type.to_type()), e.span)
        if isinstance(e, Ident):
            if e.name not in self.env:
                self.err(Code.UNKNOWN_IDENTIFIER, f"unknown identifier '{e.name}'", e.span)
                return None
            return self.env[e.name]
        if isinstance(e, Unary):
            a = self.expr(e.operand)
            return None if a is None else self.add(Not(a), e.span)
        if isinstance(e, BinExpr):
            a, b = self.expr(e.left), self.expr(e.right)
            return None if None in (a, b) else self.add(Binary(_BINOPS[e.op], a, b), e.span)
        if isinstance(e, MuxExpr):
            s, t, f = self.expr(e.sel), self.expr(e.if_true), self.expr(e.if_false)
            return None if None in (s, t, f) else self.add(Mux(s, t, f), e.span)
        if isinstance(e, SliceExpr):
            a = self.expr(e.operand)
            return None if a is None else self.add(Slice(a, e.hi, e.lo), e.span)
        if isinstance(e, ConcatExpr):
            h, lo = self.expr(e.hi_part), self.expr(e.lo_part)
            return None if None in (h, lo) else self.add(Concat(h, lo), e.span)
        if isinstance(e, MemReadExpr):
            a = self.expr(e.addr)
            mid = self.mems.get(e.mem)
            if mid is None:
                self.err(Code.UNKNOWN_IDENTIFIER, f"unknown memory '{e.mem}'", e.span)
                return None
            if a is None:
                return None
            return self.add((MemReadSync if e.sync else MemReadComb)(mid, a), e.span)
        if isinstance(e, MatchExpr):
            scrut = self.expr(e.scrutinee)
            arms: list[tuple[int, NodeId]] = []
            default = None
            ok = scrut is not None
            seen: set[int] = set()
            for arm in e.arms:
                body = self.expr(arm.body)
                ok = ok and body is not None
                if arm.pattern is None:
                    if default is not None:
                        self.err(Code.OVERLAPPING_MATCH_ARM, "match has more than one default arm", arm.span)
                        ok = False
                    default = body
                    continue
                if arm.pattern in seen:
                    self.err(Code.OVERLAPPING_MATCH_ARM, f"match pattern {arm.pattern} appears twice", arm.span)
                    ok = False
                    continue
                seen.add(arm.pattern)
                if scrut is not None and arm.pattern_type is not None and \
                        arm.pattern_type.to_type() != infer_type(self.graph, scrut):
                    self.err(Code.WIDTH_MISMATCH,
                             f"pattern type {arm.pattern_type} differs from scrutinee "
                             f"{infer_type(self.graph, scrut)}", arm.span)
                arms.append((arm.pattern, body))
            if not ok:
                return None
            return self.add(Match(scrut, tuple(arms), default), e.span)
        raise TypeError(e)


def lower(ast: ModuleAst) -> SignalGraph:
    """Name-resolve and desugar an AST into a SignalGraph. Raises
    CompileError (UnknownIdentifier, MultipleDrivers, UndrivenRegister, ...)."""
    return _Lowerer(ast).run()


def compile_source(text: str, filename: str = "<input>") -> ElaboratedDesign:
    """parse -> lower -> elaborate."""
    g = lower(parse(text, filename))
    try:
        return elaborate(g)
    except CompileError as exc:
        # make sure every diagnostic has a file attached
        raise CompileError([d if d.span else Diagnostic(d.code, d.message, d.severity,
                                                        SourceSpan(filename, 1, 1), d.related_nodes)
                            for d in exc.diagnostics]) from None


def load_design(path: str | Path) -> ElaboratedDesign:
    p = Path(path)
    return compile_source(p.read_text(encoding="utf-8"), str(p))


# --------------------------------------------------------------------------
# Graph -> source


def graph_to_source(graph: SignalGraph, live_only: bool = True) -> str:
    """Print a graph as a ``.ckt`` module. Wires are emitted in combinational
    topological order; registers are declared first so feedback resolves."""
    keep = live_nodes(graph) if live_only else set(range(len(graph.nodes)))
    for i, n in enumerate(graph.nodes):
        if isinstance(n, Input):
            keep.add(i)
    used_mems = sorted({graph.nodes[i].mem for i in keep
                        if isinstance(graph.nodes[i], (MemReadComb, MemReadSync))})
    for m in used_mems:
        wp = graph.mems[m].write_port
        if wp:
            keep |= {wp.addr, wp.data, wp.enable}

    taken = set(KEYWORDS) | {n for n, _ in graph.inputs} | {n for n, _ in graph.outputs}
    taken |= {m.name for m in graph.mems}
    names: dict[NodeId, str] = {}
    for n, i in graph.inputs:
        names[i] = n

    def fresh(base: str) -> str:
        cand, k = base, 1
        while cand in taken or not is_identifier(cand):
            cand = f"{base}_{k}"
            k += 1
        taken.add(cand)
        return cand

    for i in sorted(keep):
        if i in names:
            continue
        hint = graph.names.get(i)
        names[i] = fresh(hint if hint and is_identifier(hint) else f"w{i}")

    def ref(i: NodeId) -> str:
        return names[i]

    def t(i: NodeId) -> str:
        return str(infer_type(graph, i))

    lines = []
    for m in used_mems:
        mem = graph.mems[m]
        vals = ", ".join(str(v) for v in mem.init_contents)
        lines.append(f"mem {mem.name}: bv{mem.data_width}[2^{mem.addr_width}] = [{vals}] {'ram' if mem.writable else 'rom'};")
    for i in sorted(keep):
        node = graph.nodes[i]
        if isinstance(node, Register):
            lines.append(f"reg {names[i]}: {node.type} = {node.init};")
    order = [i for i in topo_order(graph) if i in keep]
    for i in order:
        node = graph.nodes[i]
        if isinstance(node, (Input, Register)):
            continue
        if isinstance(node, Const):
            e = ("true" if node.value else "false") if isinstance(node.type, Bit) else f"{node.value}:{node.type}"
        elif isinstance(node, Not):
            e = f"~{ref(node.a)}"
        elif isinstance(node, Binary):
            sym = {v: k for k, v in _BINOPS.items()}[node.op]
            e = f"{ref(node.a)} {sym} {ref(node.b)}"
        elif isinstance(node, Mux):
            e = f"mux({ref(node.sel)}, {ref(node.if_true)}, {ref(node.if_false)})"
        elif isinstance(node, Match):
            arms = [f"{s} => {ref(n)}" for s, n in node.arms]
            if node.default is not None:
                arms.append(f"default => {ref(node.default)}")
            e = f"match {ref(node.scrutinee)} {{ " + ", ".join(arms) + " }"
        elif isinstance(node, Slice):
            e = f"{ref(node.a)}[{node.hi}:{node.lo}]"
        elif isinstance(node, Concat):
            e = f"concat({ref(node.hi_part)}, {ref(node.lo_part)})"
        elif isinstance(node, MemReadComb):
            e = f"memr({graph.mems[node.mem].name}, {ref(node.addr)})"
        elif isinstance(node, MemReadSync):
            e = f"memrs({graph.mems[node.mem].name}, {ref(node.addr)})"
        else:
            raise ValueError(f"node kind {type(node).__name__} has no surface syntax")
        lines.append(f"let {names[i]} = {e};")
    for i in sorted(keep):
        node = graph.nodes[i]
        if isinstance(node, Register):
            lines.append(f"{names[i]} <= {ref(node.next)};")
    for m in used_mems:
        wp = graph.mems[m].write_port
        if wp:
            lines.append(f"memw({graph.mems[m].name}, {ref(wp.addr)}, {ref(wp.data)}, {ref(wp.enable)});")
    for n, i in graph.outputs:
        lines.append(f"{n} = {ref(i)};")
    ins = ", ".join(f"in {n}: {t(i)}" for n, i in graph.inputs)
    outs = ", ".join(f"out {n}: {t(i)}" for n, i in graph.outputs)
    body = "".join(f"  {ln}\n" for ln in lines)
    return f"module {graph.name} ({ins}) -> ({outs}) {{\n{body}}}\n"
