"""Structured compile diagnostics shared by the frontend and the checker."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum


class Code(str, Enum):
    WIDTH_MISMATCH = "WidthMismatch"
    COMBINATIONAL_LOOP = "CombinationalLoop"
    NON_EXHAUSTIVE_MATCH = "NonExhaustiveMatch"
    OVERLAPPING_MATCH_ARM = "OverlappingMatchArm"
    UNKNOWN_IDENTIFIER = "UnknownIdentifier"
    MULTIPLE_DRIVERS = "MultipleDrivers"
    UNDRIVEN_REGISTER = "UndrivenRegister"
    UNDRIVEN_OUTPUT = "UndrivenOutput"
    INIT_OUT_OF_RANGE = "InitOutOfRange"
    SLICE_OUT_OF_RANGE = "SliceOutOfRange"
    SYNTAX_ERROR = "SyntaxError"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class SourceSpan:
    file: str
    line: int
    column: int
    length: int = 1

    def __post_init__(self) -> None:
        if self.line < 1 or self.column < 1:
            raise ValueError(f"span line/column must be >= 1, got {self.line}:{self.column}")

    def __str__(self) -> str:
        return f"{self.file}:{self.line}:{self.column}"


@dataclass(frozen=True)
class Diagnostic:
    code: Code
    message: str
    severity: str = "error"
    span: SourceSpan | None = None
    related_nodes: tuple[int, ...] = field(default_factory=tuple)

    @property
    def is_error(self) -> bool:
        return self.severity == "error"

    def sort_key(self) -> tuple:
        first = self.related_nodes[0] if self.related_nodes else -1
        line = self.span.line if self.span else 0
        col = self.span.column if self.span else 0
        return (first, line, col, self.code.value, self.message)

    def to_dict(self) -> dict:
        return {
            "code": self.code.value,
            "severity": self.severity,
            "message": self.message,
            "file": self.span.file if self.span else None,
            "line": self.span.line if self.span else None,
            "col": self.span.column if self.span else None,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=False)

    def __str__(self) -> str:
        where = f"{self.span}: " if self.span else ""
        return f"{where}{self.severity}[{self.code.value}]: {self.message}"


class CompileError(Exception):
    """Raised when parsing, lowering or elaboration rejects a design.

    The full diagnostic list is kept on ``.diagnostics`` so the repair loop
    can see every problem found in one pass.
    """

    def __init__(self, diagnostics: list[Diagnostic]) -> None:
        self.diagnostics = list(diagnostics)
        summary = "; ".join(str(d) for d in self.diagnostics[:3])
        if len(self.diagnostics) > 3:
            summary += f" (+{len(self.diagnostics) - 3} more)"
        super().__init__(summary or "compilation failed")

    @property
    def codes(self) -> list[Code]:
        return [d.code for d in self.diagnostics]
