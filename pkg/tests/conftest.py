from __future__ import annotations

from pathlib import Path

import pytest

from sigforge.cli import CORPUS_DIR
from sigforge.frontend import compile_source
from sigforge.sim import Testbench

GOLDEN = Path(__file__).parent / "golden"


def corpus_source(name: str) -> str:
    p = CORPUS_DIR / f"{name}.ckt"
    if not p.exists():
        p = CORPUS_DIR / "rejects" / f"{name}.ckt"
    return p.read_text()


def corpus_design(name: str):
    return compile_source(corpus_source(name), f"{name}.ckt")


def corpus_tb(name: str) -> Testbench:
    return Testbench.load(CORPUS_DIR / f"{name}.tb.json")


def corpus_names() -> list[str]:
    return sorted(p.stem for p in CORPUS_DIR.glob("*.ckt"))


@pytest.fixture
def counter():
    return corpus_design("counter")


@pytest.fixture
def mux3():
    return corpus_design("mux3")
