"""Closed-loop optimization and architecture exploration.

``optimize_loop`` runs K generator iterations against the gated pipeline.
A candidate that fails any stage is discarded (the working source rolls
back to the pre-iteration version); a passing candidate is adopted only if
it is accepted against the global best. The global best source is returned.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

from .equiv import Counterexample, EquivConfig, EquivError, Equivalent, equiv
from .ppa import (
    CandidateRow, ExplorationFeedback, LoopConfig, PipelineResult, PpaBackend, PpaVector, ProxyBackend,
    RepairFeedback, acceptance, build_feedback, evaluate,
)
from .sim import Testbench

EXACT_METHODS = ("brute_comb", "state_explore")


class CandidateGenerator(Protocol):
    name: str

    def generate(self, source: str, feedback) -> str: ...


class LoopError(RuntimeError):
    pass


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


@dataclass
class IterationRecord:
    iter: int
    ppa: PpaVector | None
    accepted: bool
    rolled_back: bool
    stages: dict[str, str]
    note: str = ""

    def to_dict(self) -> dict:
        return {"iter": self.iter, "ppa": self.ppa.to_dict() if self.ppa else None, "accepted": self.accepted,
                "rolled_back": self.rolled_back, "stages": dict(self.stages), "note": self.note}


@dataclass
class LoopResult:
    source: str
    trajectory: list[IterationRecord]
    baseline: PipelineResult
    best: PipelineResult

    def trajectory_json(self) -> str:
        return _dump([r.to_dict() for r in self.trajectory])

    def best_history(self) -> list[PpaVector]:
        """Global best after the baseline and after each iteration."""
        out = [self.baseline.ppa]
        cur = self.baseline.ppa
        for r in self.trajectory:
            if r.accepted and r.ppa is not None:
                cur = r.ppa
            out.append(cur)
        return out


def _iter_dir(workdir: Path | None, i: int) -> Path | None:
    return None if workdir is None else workdir / f"iter{i}"


def optimize_loop(initial: str, generator: CandidateGenerator, backend: PpaBackend | None = None,
                  testbench: Testbench | None = None, cfg: LoopConfig | None = None,
                  workdir: str | Path | None = None, problem: str = "design") -> LoopResult:
    cfg = cfg or LoopConfig()
    backend = backend or ProxyBackend()
    wd = Path(workdir) if workdir is not None else None
    baseline = evaluate(initial, backend, cfg, testbench, _iter_dir(wd, 0))
    if cfg.mode == "ppa" and not baseline.passed:
        raise LoopError(f"baseline does not clear the pipeline ({baseline.summary()})")

    best_src, best_res = initial, baseline
    work_src, work_res = initial, baseline
    history = [baseline.ppa] if baseline.ppa else []
    trajectory: list[IterationRecord] = []

    for i in range(1, cfg.K + 1):
        if cfg.mode == "repair":
            fb = RepairFeedback(work_res, i, problem)
        else:
            fb = build_feedback(history, work_res, i, problem)
        if wd is not None:
            d = _iter_dir(wd, i)
            d.mkdir(parents=True, exist_ok=True)
            (d / "feedback.md").write_text(fb.to_markdown())
        try:
            cand = generator.generate(work_src, fb)
        except Exception as exc:  # noqa: BLE001 - a generator failure never aborts the loop
            trajectory.append(IterationRecord(i, None, False, True, {}, f"generator failed: {exc}"))
            continue
        note = getattr(generator, "last_note", "")
        res = evaluate(cand, backend, cfg, testbench, _iter_dir(wd, i))

        if cfg.mode == "repair":
            better = res.progress() > best_res.progress()
            if better:
                best_src, best_res = cand, res
                work_src, work_res = cand, res
            trajectory.append(IterationRecord(i, res.ppa, better, not better, dict(res.stages), note))
            if best_res.passed:
                break
            continue

        if not res.passed:
            trajectory.append(IterationRecord(i, res.ppa, False, True, dict(res.stages),
                                              note or f"failed at {res.first_failure()}"))
            continue
        acc = acceptance(res.ppa, best_res.ppa, cfg.tau, cfg.epsilon)
        if acc.accepted:
            best_src, best_res = cand, res
            work_src, work_res = cand, res
            history.append(res.ppa)
        trajectory.append(IterationRecord(i, res.ppa, acc.accepted, False, dict(res.stages),
                                          note if acc.error is None else f"{note}; {acc.error}"))

    result = LoopResult(best_src, trajectory, baseline, best_res)
    if wd is not None:
        (wd / "trajectory.json").write_text(result.trajectory_json())
        (wd / "final.ckt").write_text(best_src)
    return result


# --------------------------------------------------------------------------
# Exploration


@dataclass
class Candidate:
    index: int
    description: str
    source: str
    result: PipelineResult | None = None
    verified: bool = False
    verdict: str = "not checked"
    error: str = ""

    def rank_key(self) -> tuple:
        r = self.result
        ok = r is not None and r.passed and r.ppa is not None
        inf = float("inf")
        return (0 if ok else 1, r.ppa.area_um2 if ok else inf, r.ppa.power_uw if ok else inf, self.index)

    def to_dict(self) -> dict:
        return {"index": self.index, "description": self.description, "verified": self.verified,
                "verdict": self.verdict, "result": self.result.to_dict() if self.result else None,
                "error": self.error}


@dataclass
class ExploreResult:
    best: Candidate
    candidates: list[Candidate]
    baseline: PipelineResult
    flagged: bool = False
    notes: list[str] = field(default_factory=list)

    def to_json(self) -> str:
        return _dump({"best": self.best.index, "flagged": self.flagged,
                      "candidates": [c.to_dict() for c in self.candidates]})


def _verify(initial: PipelineResult, cand: PipelineResult, eq_cfg: EquivConfig) -> tuple[bool, str]:
    if initial.design is None or cand.design is None:
        return False, "not compiled"
    try:
        v = equiv(initial.design, cand.design, eq_cfg)
    except EquivError as exc:
        return False, str(exc)
    if isinstance(v, Equivalent):
        return v.method in EXACT_METHODS, f"equivalent ({v.method})"
    if isinstance(v, Counterexample):
        return False, f"counterexample at cycle {v.cycle} on {v.output}"
    return False, f"unknown: {v.reason}"


def _sim_label(r: PipelineResult | None) -> str:
    return "Pass" if r is not None and r.sim_passed else "FAIL"


def explore(initial: str, generator: CandidateGenerator, backend: PpaBackend | None = None,
            testbench: Testbench | None = None, cfg: LoopConfig | None = None,
            workdir: str | Path | None = None, problem: str = "design", jobs: int = 1,
            equiv_cfg: EquivConfig | None = None) -> ExploreResult:
    """Generate C candidates, evaluate each through the full pipeline, check
    each against the initial design, and rank by (pipeline pass, area, power)."""
    cfg = cfg or LoopConfig()
    backend = backend or ProxyBackend()
    eq_cfg = equiv_cfg or EquivConfig(seed=cfg.seed)
    wd = Path(workdir) if workdir is not None else None
    baseline = evaluate(initial, backend, cfg, testbench, None if wd is None else wd / "cand0")

    rows = [CandidateRow("v0", "initial design", _sim_label(baseline), "Yes", baseline.ppa)]
    cands: list[Candidate] = []
    for k in range(1, cfg.C + 1):
        fb = ExplorationFeedback(k, list(rows), problem)
        if wd is not None:
            (wd / f"cand{k}").mkdir(parents=True, exist_ok=True)
            (wd / f"cand{k}" / "feedback.md").write_text(fb.to_markdown())
        try:
            src = generator.generate(initial, fb)
            c = Candidate(k, getattr(generator, "last_note", "") or f"candidate {k}", src)
        except Exception as exc:  # noqa: BLE001
            c = Candidate(k, "generator failed", initial, error=str(exc))
        cands.append(c)
        rows.append(CandidateRow(f"v{k}", c.description, "pending", "pending", None))

    def run_one(c: Candidate) -> None:
        if c.error:
            return
        c.result = evaluate(c.source, backend, cfg, testbench, None if wd is None else wd / f"cand{c.index}")
        c.verified, c.verdict = _verify(baseline, c.result, eq_cfg)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            list(pool.map(run_one, cands))
    else:
        for c in cands:
            run_one(c)

    ranked = sorted(cands, key=Candidate.rank_key)
    passing = [c for c in ranked if c.rank_key()[0] == 0]
    flagged = not passing
    if flagged:
        best = Candidate(0, "initial design (no candidate cleared the pipeline)", initial, baseline, True,
                         "reflexive")
    else:
        best = passing[0]
    res = ExploreResult(best, cands, baseline, flagged)
    if wd is not None:
        (wd / "explore.json").write_text(res.to_json())
    return res


__all__ = [
    "CandidateGenerator", "LoopError", "IterationRecord", "LoopResult", "optimize_loop",
    "Candidate", "ExploreResult", "explore", "EXACT_METHODS",
]
