"""Plain-Python behavioral models of the corpus designs.

These are written from each design's description, not from the simulator,
and produce the committed ``<name>.tb.json`` testbenches. Run this file to
regenerate them; ``test_corpus.py`` checks the committed files are current.
"""

from __future__ import annotations

import json
import random
from pathlib import Path

CORPUS = Path(__file__).resolve().parents[1] / "src" / "sigforge" / "corpus"


def _records(inputs: list[dict], outputs: list[dict]) -> list[dict]:
    return [{"cycle": t, "inputs": i, "expect": o} for t, (i, o) in enumerate(zip(inputs, outputs))]


def _rand_inputs(rng: random.Random, widths: dict[str, int], n: int) -> list[dict]:
    return [{k: rng.getrandbits(w) for k, w in widths.items()} for _ in range(n)]


def counter(rng):
    return _records([{}] * 10, [{"count": t % 256} for t in range(10)])


def mux3(rng):
    ins = _rand_inputs(rng, {"sel": 2, "a": 8, "b": 8, "c": 8}, 40)
    return _records(ins, [{"y": [i["a"], i["b"], i["c"], 0][i["sel"]]} for i in ins])


def mux9(rng):
    ins = []
    for s in range(16):
        for hot in (1, 0):
            row = {"sel": s}
            row.update({f"i{k}": hot if k == s else 1 - hot for k in range(9)})
            ins.append(row)
    ins += _rand_inputs(rng, {"sel": 4, **{f"i{k}": 1 for k in range(9)}}, 32)
    return _records(ins, [{"y": i[f"i{i['sel']}"] if i["sel"] < 9 else 0} for i in ins])


def adder8(rng):
    ins = _rand_inputs(rng, {"a": 8, "b": 8}, 40)
    return _records(ins, [{"sum": (i["a"] + i["b"]) % 256, "cout": (i["a"] + i["b"]) // 256} for i in ins])


def alu4(rng):
    ins = _rand_inputs(rng, {"op": 2, "a": 4, "b": 4}, 48)
    ops = [lambda a, b: (a + b) % 16, lambda a, b: (a - b) % 16, lambda a, b: a & b, lambda a, b: a ^ b]
    return _records(ins, [{"y": ops[i["op"]](i["a"], i["b"])} for i in ins])


def shift_reg(rng):
    ins = _rand_inputs(rng, {"d": 8}, 30)
    hist = [0, 0, 0, 0] + [i["d"] for i in ins]
    return _records(ins, [{"q": hist[t]} for t in range(len(ins))])


def pipe_add3(rng):
    ins = _rand_inputs(rng, {"a": 8, "b": 8, "c": 8}, 30)
    outs = []
    for t in range(len(ins)):
        outs.append({"y": 0 if t < 2 else (ins[t - 2]["a"] + ins[t - 2]["b"] + ins[t - 2]["c"]) % 256})
    return _records(ins, outs)


def edge_detect(rng):
    ins = _rand_inputs(rng, {"x": 1}, 40)
    outs, prev = [], 0
    for i in ins:
        outs.append({"rise": int(i["x"] == 1 and prev == 0), "fall": int(i["x"] == 0 and prev == 1)})
        prev = i["x"]
    return _records(ins, outs)


def accumulator(rng):
    ins = [{"clear": int(rng.random() < 0.15), "d": rng.getrandbits(8)} for _ in range(40)]
    outs, acc = [], 0
    for i in ins:
        outs.append({"acc": acc})
        acc = 0 if i["clear"] else (acc + i["d"]) % 256
    return _records(ins, outs)


def lfsr8(rng):
    outs, r = [], 1
    for _ in range(40):
        outs.append({"state": r})
        fb = ((r >> 7) ^ (r >> 5) ^ (r >> 4) ^ (r >> 3)) & 1
        r = ((r << 1) | fb) & 0xFF
    return _records([{}] * 40, outs)


def seq101(rng):
    ins = _rand_inputs(rng, {"x": 1}, 60)
    outs, window = [], []
    for i in ins:
        window = (window + [i["x"]])[-3:]
        outs.append({"hit": int(window == [1, 0, 1])})
    return _records(ins, outs)


def traffic(rng):
    durations = [4, 1, 3]
    outs, phase, left = [], 0, durations[0]
    for _ in range(30):
        outs.append({"light": phase})
        left -= 1
        if left == 0:
            phase = (phase + 1) % 3
            left = durations[phase]
    return _records([{}] * 30, outs)


def logic_ops(rng):
    ins = _rand_inputs(rng, {"a": 4, "b": 4}, 24)
    return _records(ins, [{"y_and": i["a"] & i["b"], "y_or": i["a"] | i["b"], "y_xor": i["a"] ^ i["b"],
                           "eq": int(i["a"] == i["b"])} for i in ins])


def square_rom(rng):
    ins = [{"x": v} for v in range(16)]
    return _records(ins, [{"y": i["x"] ** 2} for i in ins])


def ram16(rng):
    ins = [{"we": int(rng.random() < 0.5), "waddr": rng.getrandbits(4), "wdata": rng.getrandbits(8),
            "raddr": rng.getrandbits(4)} for _ in range(60)]
    mem, rdata, outs = [0] * 16, 0, []
    for i in ins:
        outs.append({"rdata": rdata})
        rdata = mem[i["raddr"]]
        if i["we"]:
            mem[i["waddr"]] = i["wdata"]
    return _records(ins, outs)


def popcount4(rng):
    ins = [{"a": v} for v in range(16)]
    return _records(ins, [{"n": bin(i["a"]).count("1")} for i in ins])


def gray8(rng):
    ins = _rand_inputs(rng, {"a": 8}, 32)
    return _records(ins, [{"g": i["a"] ^ (i["a"] >> 1)} for i in ins])


def passthrough(rng):
    ins = _rand_inputs(rng, {"a": 8}, 8)
    return _records(ins, [{"y": i["a"]} for i in ins])


def parity8(rng):
    ins = _rand_inputs(rng, {"a": 8}, 32)
    return _records(ins, [{"p": bin(i["a"]).count("1") % 2} for i in ins])


MODELS = {f.__name__: f for f in (
    counter, mux3, mux9, adder8, alu4, shift_reg, pipe_add3, edge_detect, accumulator, lfsr8, seq101,
    traffic, logic_ops, square_rom, ram16, popcount4, gray8, passthrough, parity8,
)}


def testbench_text(name: str) -> str:
    rng = random.Random(f"tb-{name}")
    return json.dumps(MODELS[name](rng), indent=1) + "\n"


if __name__ == "__main__":
    for name in MODELS:
        (CORPUS / f"{name}.tb.json").write_text(testbench_text(name))
        print("wrote", name)
