"""Elaboration-time structural checks: widths, combinational acyclicity and
exhaustive case coverage. All checks always run so a caller gets the full
error set in one pass."""

from __future__ import annotations

import heapq
from dataclasses import dataclass

from .diagnostics import Code, CompileError, Diagnostic
from .ir import (
    Binary, Bundle, BundleGet, BundleMake, Concat, Const, Input, Match,
    MemReadComb, MemReadSync, Mux, NodeId, Not, Register, SignalGraph, Slice, comb_operands,
    infer_type, is_one_bit, is_scalar,
)


@dataclass(frozen=True)
class ElaboratedDesign:
    graph: SignalGraph
    topo_order: tuple[NodeId, ...]
    depth: int

    @property
    def name(self) -> str:
        return self.graph.name


def _diag(graph: SignalGraph, code: Code, msg: str, *nodes: NodeId) -> Diagnostic:
    span = graph.spans.get(nodes[0]) if nodes else None
    return Diagnostic(code, msg, span=span, related_nodes=tuple(nodes))


def _fits(value: int, width: int) -> bool:
    return 0 <= value < (1 << width)


def check_types(graph: SignalGraph) -> list[Diagnostic]:
    out: list[Diagnostic] = []
    ty = lambda i: infer_type(graph, i)  # noqa: E731

    for nid, node in enumerate(graph.nodes):
        if isinstance(node, Const):
            if not is_scalar(node.type):
                out.append(_diag(graph, Code.WIDTH_MISMATCH, "constant must be Bit or BitVec", nid))
            elif not _fits(node.value, node.type.width):
                out.append(_diag(graph, Code.INIT_OUT_OF_RANGE,
                                 f"literal {node.value} does not fit in {node.type}", nid))
        elif isinstance(node, Not):
            if not is_scalar(ty(node.a)):
                out.append(_diag(graph, Code.WIDTH_MISMATCH, f"'~' applied to {ty(node.a)}", nid))
        elif isinstance(node, Binary):
            ta, tb = ty(node.a), ty(node.b)
            if not (is_scalar(ta) and is_scalar(tb)) or ta != tb:
                out.append(_diag(graph, Code.WIDTH_MISMATCH,
                                 f"type mismatch in '{node.op.value}' ({ta} vs {tb})", nid))
        elif isinstance(node, Mux):
            ts, tt, tf = ty(node.sel), ty(node.if_true), ty(node.if_false)
            if not is_one_bit(ts):
                out.append(_diag(graph, Code.WIDTH_MISMATCH, f"mux selector must be one bit, got {ts}", nid))
            if tt != tf or not is_scalar(tt):
                out.append(_diag(graph, Code.WIDTH_MISMATCH, f"mux branches differ ({tt} vs {tf})", nid))
        elif isinstance(node, Match):
            ts = ty(node.scrutinee)
            if not is_scalar(ts):
                out.append(_diag(graph, Code.WIDTH_MISMATCH, f"match over non-scalar {ts}", nid))
                continue
            results = [ty(n) for _, n in node.arms]
            if node.default is not None:
                results.append(ty(node.default))
            if not results:
                out.append(_diag(graph, Code.NON_EXHAUSTIVE_MATCH, "match has no arms", nid))
            elif any(r != results[0] for r in results) or not is_scalar(results[0]):
                shown = ", ".join(sorted({str(r) for r in results}))
                out.append(_diag(graph, Code.WIDTH_MISMATCH, f"match arms have different types ({shown})", nid))
            bad = [s for s, _ in node.arms if not _fits(s, ts.width)]
            if bad:
                out.append(_diag(graph, Code.WIDTH_MISMATCH,
                                 f"match selector(s) {bad} do not fit in {ts}", nid))
        elif isinstance(node, Slice):
            ta = ty(node.a)
            if not is_scalar(ta):
                out.append(_diag(graph, Code.WIDTH_MISMATCH, f"slice of non-scalar {ta}", nid))
            elif not (0 <= node.lo <= node.hi < ta.width):
                out.append(_diag(graph, Code.SLICE_OUT_OF_RANGE,
                                 f"slice [{node.hi}:{node.lo}] out of range for {ta}", nid))
        elif isinstance(node, Concat):
            th, tl = ty(node.hi_part), ty(node.lo_part)
            if not (is_scalar(th) and is_scalar(tl)):
                out.append(_diag(graph, Code.WIDTH_MISMATCH, "concat of non-scalar operand", nid))
            elif th.width + tl.width > 128:
                out.append(_diag(graph, Code.WIDTH_MISMATCH, "concat result wider than 128 bits", nid))
        elif isinstance(node, Register):
            if not is_scalar(node.type):
                out.append(_diag(graph, Code.WIDTH_MISMATCH, "register must be Bit or BitVec", nid))
                continue
            if not _fits(node.init, node.type.width):
                out.append(_diag(graph, Code.INIT_OUT_OF_RANGE,
                                 f"register init {node.init} does not fit in {node.type}", nid))
            if node.next is None:
                out.append(_diag(graph, Code.UNDRIVEN_REGISTER, "register has no next-state value", nid))
            elif ty(node.next) != node.type:
                out.append(_diag(graph, Code.WIDTH_MISMATCH,
                                 f"register of type {node.type} assigned {ty(node.next)}", nid))
        elif isinstance(node, (MemReadComb, MemReadSync)):
            mem = graph.mems[node.mem]
            ta = ty(node.addr)
            if not is_scalar(ta) or ta.width != mem.addr_width:
                out.append(_diag(graph, Code.WIDTH_MISMATCH,
                                 f"memory '{mem.name}' address is {ta}, expected bv{mem.addr_width}", nid))
        elif isinstance(node, BundleMake):
            if len(node.elements) < 2:
                out.append(_diag(graph, Code.WIDTH_MISMATCH, "bundle needs at least two elements", nid))
        elif isinstance(node, BundleGet):
            ta = ty(node.a)
            if not isinstance(ta, Bundle) or not 0 <= node.index < len(ta.elements):
                out.append(_diag(graph, Code.WIDTH_MISMATCH, f"bundle index {node.index} invalid for {ta}", nid))
        elif isinstance(node, Input):
            if not is_scalar(node.type):
                out.append(_diag(graph, Code.WIDTH_MISMATCH, "input must be Bit or BitVec", nid))

    for mem in graph.mems:
        bad = [v for v in mem.init_contents if not _fits(v, mem.data_width)]
        if bad:
            out.append(Diagnostic(Code.INIT_OUT_OF_RANGE,
                                  f"memory '{mem.name}' init value {bad[0]} does not fit in bv{mem.data_width}"))
        if mem.writable and mem.write_port is None:
            out.append(Diagnostic(Code.UNDRIVEN_REGISTER, f"RAM '{mem.name}' has no write port"))
        if mem.write_port is not None:
            wp = mem.write_port
            ta, td, te = ty(wp.addr), ty(wp.data), ty(wp.enable)
            if ta.width != mem.addr_width or not is_scalar(ta):
                out.append(_diag(graph, Code.WIDTH_MISMATCH,
                                 f"memory '{mem.name}' write address is {ta}, expected bv{mem.addr_width}", wp.addr))
            if td.width != mem.data_width or not is_scalar(td):
                out.append(_diag(graph, Code.WIDTH_MISMATCH,
                                 f"memory '{mem.name}' write data is {td}, expected bv{mem.data_width}", wp.data))
            if not is_one_bit(te):
                out.append(_diag(graph, Code.WIDTH_MISMATCH,
                                 f"memory '{mem.name}' write enable must be one bit, got {te}", wp.enable))
    return out


def strongly_connected_components(n: int, succ: list[tuple[int, ...]]) -> list[list[int]]:
    """Iterative Tarjan. Components are returned with sorted members, ordered
    by their smallest member."""
    index = [-1] * n
    low = [0] * n
    on_stack = [False] * n
    stack: list[int] = []
    comps: list[list[int]] = []
    counter = 0
    for root in range(n):
        if index[root] != -1:
            continue
        work = [(root, 0)]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack[root] = True
        while work:
            v, i = work[-1]
            if i < len(succ[v]):
                work[-1] = (v, i + 1)
                w = succ[v][i]
                if index[w] == -1:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack[w] = True
                    work.append((w, 0))
                elif on_stack[w]:
                    low[v] = min(low[v], index[w])
            else:
                work.pop()
                if work:
                    parent = work[-1][0]
                    low[parent] = min(low[parent], low[v])
                if low[v] == index[v]:
                    comp = []
                    while True:
                        w = stack.pop()
                        on_stack[w] = False
                        comp.append(w)
                        if w == v:
                            break
                    comps.append(sorted(comp))
    comps.sort(key=lambda c: c[0])
    return comps


def check_acyclic(graph: SignalGraph) -> list[Diagnostic]:
    succ = [comb_operands(node) for node in graph.nodes]
    out = []
    for comp in strongly_connected_components(len(graph.nodes), succ):
        if len(comp) > 1 or comp[0] in succ[comp[0]]:
            ids = ", ".join(f"n{i}" for i in comp)
            out.append(_diag(graph, Code.COMBINATIONAL_LOOP,
                             f"combinational loop through {ids} (feedback needs a register)", *comp))
    return out


def check_exhaustive(graph: SignalGraph) -> list[Diagnostic]:
    out = []
    for nid, node in enumerate(graph.nodes):
        if not isinstance(node, Match):
            continue
        sels = [s for s, _ in node.arms]
        dups = sorted({s for s in sels if sels.count(s) > 1})
        if dups:
            out.append(_diag(graph, Code.OVERLAPPING_MATCH_ARM,
                             f"match selector(s) {dups} appear more than once", nid))
        if node.default is not None:
            continue
        ts = infer_type(graph, node.scrutinee)
        if not is_scalar(ts):
            continue
        covered = {s for s in sels if 0 <= s < (1 << ts.width)}
        total = 1 << ts.width
        if len(covered) < total:
            missing = [v for v in range(min(total, 64)) if v not in covered][:4]
            out.append(_diag(graph, Code.NON_EXHAUSTIVE_MATCH,
                             f"match over {ts} covers {len(covered)} of {total} values "
                             f"(missing e.g. {missing}); add a default arm", nid))
    return out


def topo_order(graph: SignalGraph) -> list[NodeId]:
    """Kahn's algorithm over combinational edges, smallest id first. Only
    meaningful on acyclic graphs."""
    n = len(graph.nodes)
    indeg = [0] * n
    users: list[list[int]] = [[] for _ in range(n)]
    for i, node in enumerate(graph.nodes):
        for o in set(comb_operands(node)):
            indeg[i] += 1
            users[o].append(i)
    heap = [i for i in range(n) if indeg[i] == 0]
    heapq.heapify(heap)
    order = []
    while heap:
        v = heapq.heappop(heap)
        order.append(v)
        for u in users[v]:
            indeg[u] -= 1
            if indeg[u] == 0:
                heapq.heappush(heap, u)
    return order


def comb_depth(graph: SignalGraph, order: list[NodeId]) -> int:
    """Longest combinational path, counted in nodes."""
    depth = [0] * len(graph.nodes)
    for v in order:
        ops = comb_operands(graph.nodes[v])
        depth[v] = 1 + max((depth[o] for o in ops), default=0)
    return max(depth, default=0)


def elaborate(graph: SignalGraph) -> ElaboratedDesign:
    """Run every check; raise CompileError with all error diagnostics (sorted
    by node id) or return the validated design."""
    diags = check_types(graph) + check_acyclic(graph) + check_exhaustive(graph)
    diags.sort(key=Diagnostic.sort_key)
    errors = [d for d in diags if d.is_error]
    if errors:
        raise CompileError(diags)
    order = topo_order(graph)
    return ElaboratedDesign(graph, tuple(order), comb_depth(graph, order))


__all__ = [
    "ElaboratedDesign", "check_types", "check_acyclic", "check_exhaustive", "elaborate",
    "topo_order", "comb_depth", "strongly_connected_components",
]
