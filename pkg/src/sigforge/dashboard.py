"""Run records and the static pass/fail dashboard (text grid + SVG)."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from xml.sax.saxutils import escape

from .ppa import STAGES, PipelineResult

GLYPHS = {"pass": "o", "fail": "x", "error": "x", "skipped": "."}
COLORS = {"pass": "#2e7d32", "fail": "#c62828", "error": "#c62828", "skipped": "#bdbdbd"}
RECORD_SUFFIX = ".record.json"


@dataclass
class RunRecord:
    problem: str
    result: PipelineResult
    started: str = ""
    finished: str = ""
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"problem": self.problem, "result": self.result.to_dict(),
                "timestamps": {"started": self.started, "finished": self.finished}, "config": self.config}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "RunRecord":
        ts = d.get("timestamps", {})
        return cls(d["problem"], PipelineResult.from_dict(d["result"]), ts.get("started", ""),
                   ts.get("finished", ""), dict(d.get("config", {})))

    def save(self, directory: str | Path) -> Path:
        p = Path(directory) / f"{self.problem}{RECORD_SUFFIX}"
        p.write_text(self.to_json())
        return p


def load_records(directory: str | Path) -> list[RunRecord]:
    d = Path(directory)
    recs = [RunRecord.from_dict(json.loads(p.read_text())) for p in sorted(d.glob(f"*{RECORD_SUFFIX}"))]
    return sorted(recs, key=lambda r: r.problem)


def _count(records: list[RunRecord], stage: str) -> int:
    return sum(1 for r in records if r.result.stages[stage] == "pass")


def summary_line(records: list[RunRecord]) -> str:
    n = len(records)
    return f"compile {_count(records, 'compile')}/{n}, sim {_count(records, 'sim')}/{n}"


def text_grid(records: list[RunRecord]) -> str:
    width = max([len("problem")] + [len(r.problem) for r in records])
    head = "problem".ljust(width) + "  " + " ".join(s.ljust(len(s)) for s in STAGES)
    rows = [head]
    for r in records:
        cells = " ".join(GLYPHS[r.result.stages[s]].ljust(len(s)) for s in STAGES)
        rows.append(r.problem.ljust(width) + "  " + cells)
    rows.append("")
    rows.append(f"legend: {GLYPHS['pass']} pass, {GLYPHS['fail']} fail, {GLYPHS['skipped']} skipped")
    rows.append(summary_line(records))
    return "\n".join(line.rstrip() for line in rows) + "\n"


def svg_matrix(records: list[RunRecord], cell: int = 18) -> str:
    label_w = 8 * max([len("problem")] + [len(r.problem) for r in records]) + 10
    col_w = 90
    top = 30
    w = label_w + col_w * len(STAGES) + 10
    h = top + cell * len(records) + 40
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" '
           f'font-family="monospace" font-size="12">']
    for j, s in enumerate(STAGES):
        out.append(f'<text x="{label_w + j * col_w}" y="{top - 10}">{s}</text>')
    for i, r in enumerate(records):
        y = top + i * cell
        out.append(f'<text x="4" y="{y + cell - 5}">{escape(r.problem)}</text>')
        for j, s in enumerate(STAGES):
            status = r.result.stages[s]
            out.append(f'<rect x="{label_w + j * col_w}" y="{y + 2}" width="{col_w - 6}" height="{cell - 4}" '
                       f'fill="{COLORS[status]}"><title>{escape(r.problem)} {s}: {status}</title></rect>')
    out.append(f'<text x="4" y="{top + cell * len(records) + 24}">{escape(summary_line(records))}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_dashboard(records: list[RunRecord], out_prefix: str | Path) -> tuple[Path, Path]:
    if not records:
        raise ValueError("no run records")
    base = Path(out_prefix)
    base.parent.mkdir(parents=True, exist_ok=True)
    txt, svg = base.with_suffix(".txt"), base.with_suffix(".svg")
    txt.write_text(text_grid(records))
    svg.write_text(svg_matrix(records))
    return txt, svg
