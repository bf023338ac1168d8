"""Functional equivalence between two designs with identical port signatures.

Three methods, reported in the verdict so results can be audited:

* ``brute_comb``: exhaustive enumeration of a combinational input space;
* ``state_explore``: breadth-first reachability over the product machine
  from the joint reset state (exact, unbounded in time, within a bit cap);
* ``bounded``: seeded random co-simulation for a fixed horizon.
"""

from __future__ import annotations

import itertools
import random
from collections import deque
from dataclasses import dataclass
from typing import Union

from .checker import ElaboratedDesign
from .ir import type_to_json
from .sim import CompiledDesign, compile_design


class EquivError(ValueError):
    """Raised for unusable inputs (e.g. port signature mismatch), never as a verdict."""


@dataclass(frozen=True)
class EquivConfig:
    max_enum_bits: int = 20
    horizon: int = 64
    random_sequences: int = 10_000
    seed: int = 0
    random_fallback: bool = False
    # cap on product-machine transitions explored before giving up on exactness
    max_transitions: int = 1 << 22

    def __post_init__(self) -> None:
        for name in ("max_enum_bits", "horizon", "random_sequences", "max_transitions"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class Equivalent:
    method: str  # brute_comb | state_explore | bounded
    detail: str = ""

    kind = "equivalent"

    def to_dict(self) -> dict:
        return {"verdict": self.kind, "method": self.method, "detail": self.detail}


@dataclass(frozen=True)
class Counterexample:
    inputs: tuple[dict[str, int], ...]
    cycle: int
    output: str
    lhs: object
    rhs: object
    method: str = ""

    kind = "counterexample"

    def to_dict(self) -> dict:
        return {"verdict": self.kind, "method": self.method, "cycle": self.cycle, "output": self.output,
                "lhs": _plain(self.lhs), "rhs": _plain(self.rhs), "inputs": [dict(i) for i in self.inputs]}


@dataclass(frozen=True)
class Unknown:
    reason: str

    kind = "unknown"

    def to_dict(self) -> dict:
        return {"verdict": self.kind, "reason": self.reason}


EquivVerdict = Union[Equivalent, Counterexample, Unknown]


def _plain(v):
    if isinstance(v, tuple):
        return [_plain(x) for x in v]
    return int(v)


def _signature(cd: CompiledDesign) -> tuple:
    return (cd.input_names, tuple(type_to_json(t) for t in cd.input_types),
            cd.output_names, tuple(type_to_json(t) for t in cd.output_types))


def _pair(a: ElaboratedDesign, b: ElaboratedDesign) -> tuple[CompiledDesign, CompiledDesign]:
    ca, cb = compile_design(a), compile_design(b)
    if _signature(ca) != _signature(cb):
        raise EquivError(f"port signatures differ: {_describe(ca)} vs {_describe(cb)}")
    return ca, cb


def _describe(cd: CompiledDesign) -> str:
    ins = ", ".join(f"{n}: {t}" for n, t in zip(cd.input_names, cd.input_types))
    outs = ", ".join(f"{n}: {t}" for n, t in zip(cd.output_names, cd.output_types))
    return f"({ins}) -> ({outs})"


def _all_inputs(cd: CompiledDesign) -> list[tuple]:
    """Every per-cycle input vector, lexicographic with the first port most significant."""
    return list(itertools.product(*[range(1 << t.width) for t in cd.input_types]))


def _first_diff(cd: CompiledDesign, oa: tuple, ob: tuple) -> int | None:
    for k, (x, y) in enumerate(zip(oa, ob)):
        if x != y:
            return k
    return None


def _cex(cd: CompiledDesign, seq: list[tuple], oa: tuple, ob: tuple, k: int, method: str) -> Counterexample:
    named = tuple(dict(zip(cd.input_names, v)) for v in seq)
    return Counterexample(named, len(seq) - 1, cd.output_names[k], oa[k], ob[k], method)


def equiv_comb(a: ElaboratedDesign, b: ElaboratedDesign, cfg: EquivConfig | None = None) -> EquivVerdict:
    cfg = cfg or EquivConfig()
    ca, cb = _pair(a, b)
    if not (ca.is_combinational and cb.is_combinational):
        raise EquivError("equiv_comb needs designs without registers or memory state")
    if ca.input_bits > cfg.max_enum_bits:
        if not cfg.random_fallback:
            return Unknown(f"input space too large ({ca.input_bits} bits > {cfg.max_enum_bits})")
        return _bounded(ca, cb, cfg, horizon=1)
    sa, sb = ca.initial_state, cb.initial_state
    for vec in _all_inputs(ca):
        oa, _ = ca.step(vec, sa)
        ob, _ = cb.step(vec, sb)
        k = _first_diff(ca, oa, ob)
        if k is not None:
            return _cex(ca, [vec], oa, ob, k, "brute_comb")
    return Equivalent("brute_comb", f"{1 << ca.input_bits} input vectors")


def equiv_seq(a: ElaboratedDesign, b: ElaboratedDesign, cfg: EquivConfig | None = None) -> EquivVerdict:
    cfg = cfg or EquivConfig()
    ca, cb = _pair(a, b)
    if ca.has_ram or cb.has_ram:
        return _bounded(ca, cb, cfg)
    if ca.state_bits + cb.state_bits > cfg.max_enum_bits or ca.input_bits > cfg.max_enum_bits:
        return _bounded(ca, cb, cfg)
    verdict = _explore(ca, cb, cfg)
    return verdict if verdict is not None else _bounded(ca, cb, cfg)


def _explore(ca: CompiledDesign, cb: CompiledDesign, cfg: EquivConfig) -> EquivVerdict | None:
    """BFS over product states; returns None when the transition budget runs out."""
    vectors = _all_inputs(ca)
    start = (ca.initial_state, cb.initial_state)
    parent: dict[tuple, tuple | None] = {start: None}
    frontier = deque([start])
    transitions = 0
    while frontier:
        state = frontier.popleft()
        sa, sb = state
        for vec in vectors:
            transitions += 1
            if transitions > cfg.max_transitions:
                return None
            oa, na = ca.step(vec, sa)
            ob, nb = cb.step(vec, sb)
            k = _first_diff(ca, oa, ob)
            if k is not None:
                return _cex(ca, _path(parent, state) + [vec], oa, ob, k, "state_explore")
            nxt = (na, nb)
            if nxt not in parent:
                parent[nxt] = (state, vec)
                frontier.append(nxt)
    return Equivalent("state_explore", f"{len(parent)} product states")


def _path(parent: dict, state) -> list[tuple]:
    seq = []
    while parent[state] is not None:
        state, vec = parent[state]
        seq.append(vec)
    seq.reverse()
    return seq


def _bounded(ca: CompiledDesign, cb: CompiledDesign, cfg: EquivConfig, horizon: int | None = None) -> EquivVerdict:
    horizon = horizon or cfg.horizon
    rng = random.Random(cfg.seed)
    widths = [t.width for t in ca.input_types]
    for _ in range(cfg.random_sequences):
        sa, sb = ca.initial_state, cb.initial_state
        seq: list[tuple] = []
        for _t in range(horizon):
            vec = tuple(rng.getrandbits(w) for w in widths)
            seq.append(vec)
            oa, sa = ca.step(vec, sa)
            ob, sb = cb.step(vec, sb)
            k = _first_diff(ca, oa, ob)
            if k is not None:
                return _cex(ca, seq, oa, ob, k, "bounded")
    return Equivalent("bounded", f"{cfg.random_sequences} random sequences x {horizon} cycles")


def equiv(a: ElaboratedDesign, b: ElaboratedDesign, cfg: EquivConfig | None = None,
          mode: str | None = None) -> EquivVerdict:
    """Dispatch on ``mode`` (comb | seq), or pick comb when both designs are stateless."""
    if mode is None:
        ca, cb = _pair(a, b)
        mode = "comb" if ca.is_combinational and cb.is_combinational else "seq"
    if mode == "comb":
        return equiv_comb(a, b, cfg)
    if mode == "seq":
        return equiv_seq(a, b, cfg)
    raise EquivError(f"unknown mode {mode!r}")


def replay(cex: Counterexample, a: ElaboratedDesign, b: ElaboratedDesign) -> bool:
    """Re-simulate both designs and confirm the recorded mismatch."""
    try:
        ca, cb = _pair(a, b)
    except EquivError:
        return False
    if not 0 <= cex.cycle < len(cex.inputs) or cex.output not in ca.output_names:
        return False
    k = ca.output_names.index(cex.output)
    sa, sb = ca.initial_state, cb.initial_state
    for t, inp in enumerate(cex.inputs[: cex.cycle + 1]):
        try:
            vec = tuple(inp[n] for n in ca.input_names)
        except KeyError:
            return False
        oa, sa = ca.step(vec, sa)
        ob, sb = cb.step(vec, sb)
        if t == cex.cycle:
            return oa[k] != ob[k] and oa[k] == cex.lhs and ob[k] == cex.rhs
    return False


__all__ = [
    "EquivConfig", "EquivError", "Equivalent", "Counterexample", "Unknown", "EquivVerdict",
    "equiv", "equiv_comb", "equiv_seq", "replay",
]
