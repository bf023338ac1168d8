"""PPA vectors, the gated evaluation pipeline, backends, acceptance and
feedback messages."""

from __future__ import annotations

import json
import math
import shlex
import subprocess
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol, Union

from .checker import ElaboratedDesign
from .diagnostics import CompileError
from .frontend import compile_source
from .ir import (
    Binary, BinOp, Concat, Const, Input, Match, MemReadComb, MemReadSync, Mux, Not, Register, Slice,
    infer_type,
)
from .sim import SimulationError, Testbench, run
from .verilog import EmitError, emit, lint

STAGES = ("compile", "sv_extracted", "lint", "sim", "synth", "pnr")
LOG_TAIL_CHARS = 4000
SLACK_KAPPA = 0.001
METRICS = ("area_um2", "power_uw", "slack_cost", "cell_count")


def tail(text: str, limit: int = LOG_TAIL_CHARS) -> str:
    return text[-limit:] if len(text) > limit else text


@dataclass(frozen=True)
class PpaVector:
    area_um2: float
    power_uw: float
    wns_ns: float
    cell_count: int

    def is_finite(self) -> bool:
        return all(math.isfinite(float(v)) for v in (self.area_um2, self.power_uw, self.wns_ns, self.cell_count))

    @property
    def slack_cost(self) -> float:
        """WNS mapped to lower-is-better."""
        return max(0.0, -self.wns_ns) + SLACK_KAPPA

    def metric(self, name: str) -> float:
        return float(getattr(self, name))

    def to_dict(self) -> dict:
        return {"area_um2": self.area_um2, "power_uw": self.power_uw, "wns_ns": self.wns_ns,
                "cell_count": self.cell_count}

    @classmethod
    def from_dict(cls, d: dict) -> "PpaVector":
        try:
            cells = d["cell_count"]
            vec = cls(float(d["area_um2"]), float(d["power_uw"]), float(d["wns_ns"]),
                      int(cells) if isinstance(cells, int) or float(cells).is_integer() else cells)
        except (KeyError, TypeError, ValueError, OverflowError) as exc:
            raise ValueError(f"malformed PPA report: {exc}") from None
        return vec


@dataclass(frozen=True)
class LoopConfig:
    K: int = 3
    tau: float = 0.05
    epsilon: float = 0.20
    C: int = 3
    seed: int = 0
    clock_period_ns: float = 10.0
    mode: str = "ppa"  # ppa | repair

    def __post_init__(self) -> None:
        if not 0 < self.tau < self.epsilon:
            raise ValueError("need 0 < tau < epsilon")
        if self.K < 1 or self.C < 1:
            raise ValueError("K and C must be at least 1")
        if self.clock_period_ns <= 0:
            raise ValueError("clock period must be positive")
        if self.mode not in ("ppa", "repair"):
            raise ValueError(f"unknown loop mode {self.mode!r}")

    def to_dict(self) -> dict:
        return {"K": self.K, "tau": self.tau, "epsilon": self.epsilon, "C": self.C, "seed": self.seed,
                "clock_period_ns": self.clock_period_ns, "mode": self.mode}


# --------------------------------------------------------------------------
# Proxy model


def state_bits(design: ElaboratedDesign) -> int:
    g = design.graph
    return sum(infer_type(g, i).width for i, n in enumerate(g.nodes) if isinstance(n, (Register, MemReadSync)))


def _weights(design: ElaboratedDesign) -> tuple[float, int]:
    """(area, cells): each node contributes coefficient x width to area and
    width (times arm count for matches) to cells."""
    g = design.graph
    area = 0.0
    cells = 0
    for nid, node in enumerate(g.nodes):
        if isinstance(node, (Const, Input, Slice, Concat, MemReadComb)):
            continue
        w = infer_type(g, nid).width if not isinstance(node, Binary) else infer_type(g, node.a).width
        if isinstance(node, Not):
            k, units = 1, w
        elif isinstance(node, Binary):
            k = {BinOp.AND: 1, BinOp.OR: 1, BinOp.XOR: 1, BinOp.ADD: 3, BinOp.SUB: 3,
                 BinOp.EQ: 2, BinOp.SHL: 2, BinOp.SHR: 2}[node.op]
            units = w
        elif isinstance(node, Mux):
            k, units = 2, w
        elif isinstance(node, Match):
            arms = len(node.arms) + (1 if node.default is not None else 0)
            k, units = 2, w * arms
        elif isinstance(node, (Register, MemReadSync)):
            k, units = 6, w
        else:
            continue
        area += k * units
        cells += units
    for mem in g.mems:
        bits = mem.data_width * mem.depth
        area += 4 * bits / 8
        cells += -(-bits // 8)
    return area, cells


def proxy_ppa(design: ElaboratedDesign, cfg: LoopConfig | None = None) -> PpaVector:
    cfg = cfg or LoopConfig()
    area, cells = _weights(design)
    wns = round(cfg.clock_period_ns - 0.2 * design.depth, 9)
    power = 0.5 * area + 2 * state_bits(design)
    return PpaVector(area, power, wns, cells)


# --------------------------------------------------------------------------
# Backends


@dataclass
class BackendResult:
    synth_ok: bool
    pnr_ok: bool
    ppa: PpaVector | None = None
    log: str = ""


class PpaBackend(Protocol):
    name: str

    def evaluate(self, sv: str, design: ElaboratedDesign, cfg: LoopConfig) -> BackendResult: ...


class ProxyBackend:
    name = "proxy"

    def evaluate(self, sv: str, design: ElaboratedDesign, cfg: LoopConfig) -> BackendResult:
        return BackendResult(True, True, proxy_ppa(design, cfg), "proxy model")


class ExternalBackend:
    """Runs a synthesis (and optionally a separate place-and-route) command.

    ``command`` must contain ``{sv}``; ``{top}`` expands to the module name.
    The final command prints a JSON report ``{area_um2, power_uw, wns_ns,
    cell_count}`` on stdout, or writes it to ``report_file``."""

    name = "external"

    def __init__(self, command: str, pnr_command: str | None = None, report_file: str | None = None,
                 synth_timeout: float = 600.0, pnr_timeout: float = 900.0) -> None:
        if "{sv}" not in command:
            raise ValueError("command template needs a {sv} placeholder")
        self.command = command
        self.pnr_command = pnr_command
        self.report_file = report_file
        self.synth_timeout = synth_timeout
        self.pnr_timeout = pnr_timeout

    def _run(self, template: str, sv_path: Path, top: str, timeout: float) -> tuple[bool, str]:
        argv = [a.replace("{sv}", str(sv_path)).replace("{top}", top) for a in shlex.split(template)]
        try:
            proc = subprocess.run(argv, capture_output=True, text=True, timeout=timeout, cwd=sv_path.parent)
        except subprocess.TimeoutExpired as exc:
            out = (exc.stdout or "") if isinstance(exc.stdout, str) else ""
            return False, out + f"\ntimeout after {timeout:g} s"
        except OSError as exc:
            return False, f"cannot run {argv[0]!r}: {exc}"
        log = proc.stdout + proc.stderr
        if proc.returncode != 0:
            return False, log + f"\nexit status {proc.returncode}"
        return True, proc.stdout if not self.report_file else log

    def _report(self, stdout: str, workdir: Path) -> PpaVector:
        if self.report_file:
            text = (workdir / self.report_file).read_text()
        else:
            lines = [ln for ln in stdout.strip().splitlines() if ln.strip().startswith("{")]
            if not lines:
                raise ValueError("no JSON report on stdout")
            text = lines[-1]
        vec = PpaVector.from_dict(json.loads(text))
        if not vec.is_finite():
            raise ValueError("report contains non-finite metrics")
        if vec.area_um2 < 0 or vec.power_uw < 0 or vec.cell_count < 0:
            raise ValueError("report contains negative area, power or cell count")
        return vec

    def evaluate(self, sv: str, design: ElaboratedDesign, cfg: LoopConfig) -> BackendResult:
        with tempfile.TemporaryDirectory(prefix="sigforge-") as tmp:
            work = Path(tmp)
            sv_path = work / f"{design.name}.sv"
            sv_path.write_text(sv)
            ok, out = self._run(self.command, sv_path, design.name, self.synth_timeout)
            if not ok:
                return BackendResult(False, False, None, tail(out))
            log = out
            if self.pnr_command:
                ok, out = self._run(self.pnr_command, sv_path, design.name, self.pnr_timeout)
                log += out
                if not ok:
                    return BackendResult(True, False, None, tail(log))
            try:
                vec = self._report(out, work)
            except (ValueError, OSError) as exc:
                return BackendResult(True, False, None, tail(log + f"\n{exc}"))
            return BackendResult(True, True, vec, tail(log))


# --------------------------------------------------------------------------
# Pipeline


@dataclass
class PipelineResult:
    stages: dict[str, str] = field(default_factory=lambda: {s: "skipped" for s in STAGES})
    sim_mismatches: int = 0
    sim_samples: int = 0
    ppa: PpaVector | None = None
    log: str = ""
    artifacts: dict[str, str] = field(default_factory=dict)
    design: ElaboratedDesign | None = field(default=None, repr=False, compare=False)
    sv: str | None = field(default=None, repr=False, compare=False)

    @property
    def passed(self) -> bool:
        return all(self.stages[s] == "pass" for s in STAGES)

    @property
    def sim_passed(self) -> bool:
        return self.stages["sim"] == "pass"

    def first_failure(self) -> str | None:
        for s in STAGES:
            if self.stages[s] in ("fail", "error"):
                return s
        return None

    def progress(self) -> int:
        """Number of leading stages that passed."""
        n = 0
        for s in STAGES:
            if self.stages[s] != "pass":
                break
            n += 1
        return n

    def summary(self) -> str:
        return ", ".join(f"{s}={self.stages[s]}" for s in STAGES)

    def to_dict(self) -> dict:
        return {
            "stages": dict(self.stages),
            "sim": {"mismatches": self.sim_mismatches, "samples": self.sim_samples},
            "ppa": self.ppa.to_dict() if self.ppa else None,
            "log_tail": self.log,
            "artifacts": dict(sorted(self.artifacts.items())),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineResult":
        stages = {s: d["stages"].get(s, "skipped") for s in STAGES}
        sim = d.get("sim", {})
        ppa = PpaVector.from_dict(d["ppa"]) if d.get("ppa") else None
        return cls(stages, sim.get("mismatches", 0), sim.get("samples", 0), ppa,
                   d.get("log_tail", ""), dict(d.get("artifacts", {})))


def evaluate(source: str, backend: PpaBackend | None = None, cfg: LoopConfig | None = None,
             testbench: Testbench | None = None, workdir: str | Path | None = None,
             filename: str = "design.ckt") -> PipelineResult:
    """compile -> emit -> lint -> simulate -> synth -> pnr, stopping at the
    first failure (later stages stay ``skipped``)."""
    cfg = cfg or LoopConfig()
    backend = backend or ProxyBackend()
    res = PipelineResult()
    out = Path(workdir) if workdir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / "design.ckt").write_text(source)
        res.artifacts["design"] = "design.ckt"

    def finish() -> PipelineResult:
        res.log = tail(res.log)
        if out is not None:
            (out / "result.json").write_text(json.dumps(res.to_dict(), indent=2, sort_keys=True) + "\n")
        return res

    try:
        design = compile_source(source, filename)
    except CompileError as exc:
        res.stages["compile"] = "fail"
        res.log = "\n".join(str(d) for d in exc.diagnostics)
        return finish()
    except Exception as exc:  # noqa: BLE001 - any front-end crash is a compile failure
        res.stages["compile"] = "fail"
        res.log = f"{type(exc).__name__}: {exc}"
        return finish()
    res.stages["compile"] = "pass"
    res.design = design

    try:
        sv = emit(design)
    except EmitError as exc:
        res.stages["sv_extracted"] = "fail"
        res.log = str(exc)
        return finish()
    res.stages["sv_extracted"] = "pass"
    res.sv = sv
    if out is not None:
        (out / "out.sv").write_text(sv)
        res.artifacts["sv"] = "out.sv"

    report = lint(sv)
    if not report.passed:
        res.stages["lint"] = "fail"
        res.log = str(report)
        return finish()
    res.stages["lint"] = "pass"

    if testbench is not None:
        try:
            tr = run(design, testbench)
        except (SimulationError, ValueError) as exc:
            res.stages["sim"] = "error"
            res.log = str(exc)
            return finish()
        res.sim_mismatches, res.sim_samples = tr.mismatches, tr.samples_checked
        res.log = tr.summary()
        if tr.mismatches:
            res.stages["sim"] = "fail"
            m = tr.first_mismatch
            res.log += f"\nfirst mismatch: cycle {m.cycle}, {m.output} = {m.actual}, expected {m.expected}"
            return finish()
    res.stages["sim"] = "pass"

    try:
        br = backend.evaluate(sv, design, cfg)
    except Exception as exc:  # noqa: BLE001 - a crashing backend is a synthesis failure
        br = BackendResult(False, False, None, f"{type(exc).__name__}: {exc}")
    res.log = br.log
    res.stages["synth"] = "pass" if br.synth_ok else "fail"
    if not br.synth_ok:
        return finish()
    if not br.pnr_ok or br.ppa is None or not br.ppa.is_finite():
        res.stages["pnr"] = "fail"
        return finish()
    res.stages["pnr"] = "pass"
    res.ppa = br.ppa
    return finish()


# --------------------------------------------------------------------------
# Acceptance


@dataclass(frozen=True)
class Acceptance:
    accepted: bool
    deltas: dict[str, float]
    error: str | None = None


def relative_delta(new: float, old: float) -> float:
    if old == 0:
        return 0.0 if new == 0 else math.inf
    return (new - old) / abs(old)


def acceptance(candidate: PpaVector, best: PpaVector, tau: float = 0.05, eps: float = 0.20) -> Acceptance:
    """Accept iff some metric improves by more than ``tau`` and none degrades
    by ``eps`` or more (all metrics lower-is-better; WNS via slack cost)."""
    for name, vec in (("candidate", candidate), ("best", best)):
        if not vec.is_finite():
            return Acceptance(False, {}, f"{name} vector has a non-finite metric")
    deltas = {m: relative_delta(candidate.metric(m), best.metric(m)) for m in METRICS}
    ok = any(d < -tau for d in deltas.values()) and all(d < eps for d in deltas.values())
    return Acceptance(ok, deltas)


def accept(candidate: PpaVector, best: PpaVector, tau: float = 0.05, eps: float = 0.20) -> bool:
    return acceptance(candidate, best, tau, eps).accepted


# --------------------------------------------------------------------------
# Feedback


def _fmt(v: float) -> str:
    return f"{v:.3f}" if isinstance(v, float) else str(v)


_HISTORY_HEADER = ["| Iter | Area (um^2) | Cells | WNS (ns) | Power (uW) |",
                   "|------|-------------|-------|----------|------------|"]


def _history_rows(history: list[PpaVector], labels: list[str] | None = None) -> list[str]:
    labels = labels or ["baseline"] + [str(i) for i in range(1, len(history))]
    return [f"| {lab} | {_fmt(v.area_um2)} | {v.cell_count} | {_fmt(v.wns_ns)} | {_fmt(v.power_uw)} |"
            for lab, v in zip(labels, history)]


GUIDANCE = {
    "timing": "Timing is not met (WNS < 0): shorten the critical path (the longest combinational chain), "
              "for example by rebalancing selection logic or adding a pipeline register.",
    "area": "Timing is met: shrink the design by removing duplicated or constant logic "
            "and by merging selection chains, which lowers both area and cell count.",
}


@dataclass
class FeedbackMessage:
    current: PpaVector
    history: list[PpaVector]
    deltas: dict[str, float]
    guidance: str
    bottleneck: str
    pipeline: dict[str, str]
    iteration: int = 1
    problem: str = "design"
    labels: list[str] | None = None

    def to_markdown(self) -> str:
        c = self.current
        out = [f"## PPA Optimization Feedback -- Iteration {self.iteration}", "",
               f"Design `{self.problem}` passes simulation and synthesis; improve its PPA.", "",
               "### Current PPA Metrics",
               f"- Area: {_fmt(c.area_um2)} um^2",
               f"- Cell count: {c.cell_count}",
               f"- WNS (worst negative slack): {_fmt(c.wns_ns)} ns",
               f"- Power: {_fmt(c.power_uw)} uW", "",
               "### PPA History", *_HISTORY_HEADER, *_history_rows(self.history, self.labels), ""]
        if self.deltas:
            out.append("### Change vs Previous")
            for m in ("area_um2", "cell_count", "wns_ns", "power_uw"):
                if m in self.deltas:
                    out.append(f"- {m}: {self.deltas[m]:+.2%}")
            out.append("")
        out += ["### Optimization Focus", f"- {self.guidance}", "",
                "### Pipeline", *[f"- {k}: {v}" for k, v in self.pipeline.items()], ""]
        return "\n".join(out)


def build_feedback(history: list[PpaVector], result: PipelineResult | None = None, iteration: int = 1,
                   problem: str = "design", labels: list[str] | None = None) -> FeedbackMessage:
    """``history`` is baseline-first and ends with the current vector; deltas
    compare the current vector to the one before it."""
    if not history:
        raise ValueError("feedback needs a non-empty history")
    current = history[-1]
    deltas: dict[str, float] = {}
    if len(history) > 1:
        prev = history[-2]
        for m in ("area_um2", "power_uw", "wns_ns", "cell_count"):
            deltas[m] = relative_delta(current.metric(m), prev.metric(m))
    bottleneck = "timing" if current.wns_ns < 0 else "area"
    pipeline = dict(result.stages) if result is not None else {}
    return FeedbackMessage(current, list(history), deltas, GUIDANCE[bottleneck], bottleneck, pipeline,
                           iteration, problem, labels)


@dataclass
class RepairFeedback:
    """Status-and-diagnostics message for the synthesis repair mode."""

    result: PipelineResult
    iteration: int = 1
    problem: str = "design"
    bottleneck: str = "repair"

    def to_markdown(self) -> str:
        st = self.result.stages
        sim = {"pass": "sim_pass", "fail": "sim_fail", "error": "sim_error"}.get(st["sim"], "sim_skipped")
        return "\n".join([
            f"## Synthesis Repair Feedback -- Iteration {self.iteration}", "",
            f"Design `{self.problem}` does not yet clear the pipeline. Fix it without changing its "
            "behavior or ports.", "",
            "### Current status",
            f"- compile_pass: {str(st['compile'] == 'pass').lower()}",
            f"- sv_extracted: {str(st['sv_extracted'] == 'pass').lower()}",
            f"- lint_pass: {str(st['lint'] == 'pass').lower()}",
            f"- sim_status: {sim}",
            f"- synth_pass: {str(st['synth'] == 'pass').lower()}", "",
            "### Diagnostics", "```text", tail(self.result.log), "```", "",
        ])


@dataclass
class CandidateRow:
    label: str
    description: str
    sim: str
    verified: str
    ppa: PpaVector | None


@dataclass
class ExplorationFeedback:
    candidate: int
    rows: list[CandidateRow]
    problem: str = "design"
    area_budget: float | None = None
    latency_budget: int | None = None
    bottleneck: str = "area"

    def to_markdown(self) -> str:
        out = [f"## Architecture Exploration -- Candidate {self.candidate}", "",
               f"Propose a structurally different implementation of `{self.problem}`.", "",
               "### Candidates So Far",
               "| # | Description | Sim | Verified | Area (um^2) | Cells | WNS (ns) | Power (uW) |",
               "|---|-------------|-----|----------|-------------|-------|----------|------------|"]
        for r in self.rows:
            if r.ppa is None:
                nums = "- | - | - | -"
            else:
                p = r.ppa
                nums = f"{_fmt(p.area_um2)} | {p.cell_count} | {_fmt(p.wns_ns)} | {_fmt(p.power_uw)}"
            out.append(f"| {r.label} | {r.description} | {r.sim} | {r.verified} | {nums} |")
        out += ["", "### Constraints",
                f"- Area budget: {self.area_budget if self.area_budget is not None else 'none'}",
                f"- Latency budget: {self.latency_budget if self.latency_budget is not None else 'none'}", ""]
        return "\n".join(out)


Feedback = Union[FeedbackMessage, RepairFeedback, ExplorationFeedback]
