"""``sigforge`` command-line entry point.

Exit codes: 0 success / equivalent, 1 failure / counterexample, 2 usage or
input error, 3 inconclusive.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime, timezone
from pathlib import Path

from .diagnostics import CompileError
from .frontend import compile_source
from .sim import SimulationError, Testbench, format_trace, free_run, run

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_UNKNOWN = 0, 1, 2, 3
CORPUS_DIR = Path(__file__).resolve().parent / "corpus"


class UsageError(Exception):
    pass


def default_seed() -> int:
    raw = os.environ.get("SIGFORGE_SEED")
    if raw is None or raw == "":
        return 0
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"SIGFORGE_SEED must be an integer, got {raw!r}") from None


def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise UsageError(f"cannot read {path}: {exc}") from None


def _load(path: str):
    """Compile a file; CompileError propagates (exit 1), read errors are usage errors."""
    return compile_source(_read(path), path)


def _load_tb(path: str | None) -> Testbench | None:
    if path is None:
        return None
    try:
        return Testbench.from_json(_read(path))
    except (ValueError, TypeError) as exc:
        raise UsageError(f"malformed testbench {path}: {exc}") from None


def _print_json(obj) -> None:
    print(json.dumps(obj, sort_keys=True))


def _report_compile_error(exc: CompileError, as_json: bool) -> int:
    for d in exc.diagnostics:
        if as_json:
            print(d.to_json())
        else:
            print(str(d), file=sys.stderr)
    return EXIT_FAIL


def corpus_files() -> list[Path]:
    return sorted(CORPUS_DIR.glob("*.ckt"))


def testbench_for(design_path: Path) -> Path | None:
    tb = design_path.with_name(design_path.stem + ".tb.json")
    return tb if tb.exists() else None


# --------------------------------------------------------------------------
# Subcommands


def cmd_check(args) -> int:
    try:
        d = _load(args.file)
    except CompileError as exc:
        return _report_compile_error(exc, args.json)
    if args.json:
        _print_json({"ok": True, "module": d.name, "nodes": len(d.graph.nodes), "depth": d.depth})
    else:
        print(f"{args.file}: ok ({len(d.graph.nodes)} nodes, combinational depth {d.depth})")
    return EXIT_OK


def cmd_sim(args) -> int:
    try:
        d = _load(args.file)
    except CompileError as exc:
        return _report_compile_error(exc, args.json)
    tb = _load_tb(args.tb)
    if tb is None:
        trace = free_run(d, args.cycles)
        if args.json:
            _print_json({"trace": trace})
        else:
            print(format_trace(d, trace), end="")
        return EXIT_OK
    try:
        res = run(d, tb, max_cycles=args.max_cycles)
    except (SimulationError, ValueError) as exc:
        raise UsageError(f"testbench does not fit the design: {exc}") from None
    if args.json:
        m = res.first_mismatch
        _print_json({"mismatches": res.mismatches, "samples": res.samples_checked, "truncated": res.truncated,
                     "first_mismatch": None if m is None else {"cycle": m.cycle, "output": m.output,
                                                               "expected": m.expected, "actual": _plain(m.actual)}})
    else:
        print(res.summary())
        if res.first_mismatch is not None:
            m = res.first_mismatch
            print(f"first mismatch: cycle {m.cycle}, {m.output} = {_plain(m.actual)}, expected {m.expected}",
                  file=sys.stderr)
    return EXIT_OK if res.mismatches == 0 else EXIT_FAIL


def _plain(v):
    if isinstance(v, tuple):
        return [_plain(x) for x in v]
    return int(v)


def _parse_pads(entries: list[str]) -> dict[str, int]:
    pads: dict[str, int] = {}
    for e in entries:
        name, _, width = e.partition("=")
        try:
            pads[name.strip()] = int(width)
        except ValueError:
            raise UsageError(f"--pad expects inner=WIDTH, got {e!r}") from None
    return pads


def cmd_emit(args) -> int:
    from .verilog import EmitError, WrapperError, WrapperSpec, emit, emit_wrapper

    try:
        d = _load(args.file)
    except CompileError as exc:
        return _report_compile_error(exc, args.json)
    try:
        text = emit(d)
        if args.wrap:
            spec = WrapperSpec.from_pairs(args.wrap, args.map or [], _parse_pads(args.pad or []))
            if not args.map:
                spec = WrapperSpec(args.wrap, WrapperSpec.identity(d).mapping, spec.paddings)
            text = text + "\n" + emit_wrapper(d, spec)
    except (EmitError, WrapperError) as exc:
        raise UsageError(str(exc)) from None
    if args.output:
        Path(args.output).write_text(text)
        if args.json:
            _print_json({"ok": True, "output": args.output})
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_lint(args) -> int:
    from .verilog import lint

    src = _read(args.file)
    if args.file.endswith(".ckt"):
        try:
            report = lint(compile_source(src, args.file))
        except CompileError as exc:
            return _report_compile_error(exc, args.json)
    else:
        report = lint(src)
    if args.json:
        _print_json({"passed": report.passed,
                     "hits": [{"rule": h.rule, "line": h.line, "message": h.message} for h in report.hits]})
    else:
        print(report)
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_equiv(args) -> int:
    from .equiv import Counterexample, EquivConfig, EquivError, Equivalent, equiv

    try:
        a, b = _load(args.a), _load(args.b)
    except CompileError as exc:
        return _report_compile_error(exc, args.json)
    try:
        cfg = EquivConfig(max_enum_bits=args.max_bits, horizon=args.horizon, random_sequences=args.seqs,
                          seed=args.seed, random_fallback=args.random_fallback)
        verdict = equiv(a, b, cfg, args.mode)
    except (EquivError, ValueError) as exc:
        raise UsageError(str(exc)) from None
    _print_json(verdict.to_dict())
    if isinstance(verdict, Equivalent):
        return EXIT_OK
    if isinstance(verdict, Counterexample):
        return EXIT_FAIL
    return EXIT_UNKNOWN


def _backend(args):
    from .ppa import ExternalBackend, ProxyBackend

    if args.backend == "proxy":
        return ProxyBackend()
    if not args.backend_cmd:
        raise UsageError("--backend external needs --backend-cmd")
    try:
        return ExternalBackend(args.backend_cmd, args.pnr_cmd, args.report_file)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _generator(args):
    from .rewrite import ChaosGenerator, RuleGenerator

    return ChaosGenerator(args.seed) if args.generator == "chaos" else RuleGenerator()


def _loop_cfg(args, **extra):
    from .ppa import LoopConfig

    try:
        return LoopConfig(K=max(1, getattr(args, "K", 3)), tau=args.tau, epsilon=args.eps, C=getattr(args, "C", 3),
                          seed=args.seed, clock_period_ns=args.clock, **extra)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def cmd_optimize(args) -> int:
    from .loop import LoopError, optimize_loop

    src = _read(args.file)
    tb = _load_tb(args.tb)
    cfg = _loop_cfg(args, mode=args.mode)
    name = args.name or Path(args.file).stem
    workdir = Path(args.workdir) / name if args.workdir else None
    try:
        res = optimize_loop(src, _generator(args), _backend(args), tb, cfg, workdir, name)
    except LoopError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    if args.output:
        Path(args.output).write_text(res.source)
    if args.json:
        print(res.trajectory_json(), end="")
    else:
        base = res.baseline.ppa
        for r in res.trajectory:
            status = "accepted" if r.accepted else ("rolled back" if r.rolled_back else "rejected")
            area = f"{r.ppa.area_um2:.3f}" if r.ppa else "-"
            print(f"iter {r.iter}: {status:<11} area {area}  {r.note}")
        if base is not None and res.best.ppa is not None:
            print(f"area {base.area_um2:.3f} -> {res.best.ppa.area_um2:.3f}")
    if cfg.mode == "repair" and not res.best.passed:
        return EXIT_FAIL
    return EXIT_OK


def cmd_explore(args) -> int:
    from .equiv import EquivConfig
    from .loop import explore

    src = _read(args.file)
    tb = _load_tb(args.tb)
    cfg = _loop_cfg(args)
    name = args.name or Path(args.file).stem
    workdir = Path(args.workdir) / name if args.workdir else None
    res = explore(src, _generator(args), _backend(args), tb, cfg, workdir, name, jobs=args.jobs,
                  equiv_cfg=EquivConfig(seed=args.seed))
    if args.output:
        Path(args.output).write_text(res.best.source)
    if args.json:
        print(res.to_json(), end="")
    else:
        for c in res.candidates:
            r = c.result
            ppa = f"area {r.ppa.area_um2:.3f} power {r.ppa.power_uw:.3f}" if r and r.ppa else "no PPA"
            sim = "Pass" if r and r.sim_passed else "FAIL"
            print(f"v{c.index}: {c.description}; sim {sim}; verified {'Yes' if c.verified else 'No'}; {ppa}")
        print(f"best: v{res.best.index}" + (" (flagged: initial design kept)" if res.flagged else ""))
    return EXIT_FAIL if res.flagged else EXIT_OK


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def cmd_run(args) -> int:
    """Evaluate (and optionally optimize) every design, write run records and
    a dashboard."""
    from .dashboard import RunRecord, write_dashboard
    from .loop import LoopError, optimize_loop
    from .ppa import evaluate

    files: list[Path] = []
    for f in args.files or []:
        p = Path(f)
        files.extend(sorted(p.glob("*.ckt")) if p.is_dir() else [p])
    if not args.files:
        files = corpus_files()
    if not files:
        raise UsageError("no designs to run")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    backend = _backend(args)
    cfg = _loop_cfg(args)

    def one(path: Path) -> RunRecord:
        started = _now()
        src = _read(str(path))
        tbp = testbench_for(path)
        tb = _load_tb(str(tbp)) if tbp else None
        name = path.stem
        res = evaluate(src, backend, cfg, tb, out / "run" / name / "eval", filename=str(path.name))
        if args.K and res.passed:
            try:
                optimize_loop(src, _generator(args), backend, tb, cfg, out / "run" / name, name)
            except LoopError:
                pass
        return RunRecord(name, res, started, _now(), cfg.to_dict())

    with ThreadPoolExecutor(max_workers=max(1, args.jobs)) as pool:
        records = list(pool.map(one, files))
    for r in records:
        r.save(out)
    txt, _ = write_dashboard(sorted(records, key=lambda r: r.problem), out / "dashboard")
    print(txt.read_text(), end="")
    return EXIT_OK if all(r.result.passed for r in records) else EXIT_FAIL


def cmd_dashboard(args) -> int:
    from .dashboard import load_records, write_dashboard

    d = Path(args.results_dir)
    if not d.is_dir():
        raise UsageError(f"{d} is not a directory")
    try:
        records = load_records(d)
    except (ValueError, KeyError, TypeError) as exc:
        raise UsageError(f"malformed run record: {exc}") from None
    if not records:
        print(f"error: no run records in {d}", file=sys.stderr)
        return EXIT_FAIL
    txt, svg = write_dashboard(records, args.output or d / "dashboard")
    if args.json:
        _print_json({"text": str(txt), "svg": str(svg)})
    else:
        print(txt.read_text(), end="")
    return EXIT_OK


# --------------------------------------------------------------------------
# Parser


def _add_loop_flags(p: argparse.ArgumentParser, single: bool = True) -> None:
    if single:
        p.add_argument("--tb", help="testbench JSON")
    p.add_argument("--tau", type=float, default=0.05, help="improvement threshold")
    p.add_argument("--eps", type=float, default=0.20, help="degradation threshold")
    p.add_argument("--clock", type=float, default=10.0, help="clock period in ns")
    p.add_argument("--generator", choices=["rules", "chaos"], default="rules")
    p.add_argument("--backend", choices=["proxy", "external"], default="proxy")
    p.add_argument("--backend-cmd", help="synthesis command template containing {sv}")
    p.add_argument("--pnr-cmd", help="optional place-and-route command template")
    p.add_argument("--report-file", help="report file written by the backend (default: stdout)")
    if single:
        p.add_argument("--workdir", help="workspace root; files go to <workdir>/<name>/")
        p.add_argument("--name", help="problem name (default: file stem)")
        p.add_argument("-o", "--output", help="write the resulting source here")


def build_parser() -> argparse.ArgumentParser:
    seed_help = "random seed (default: $SIGFORGE_SEED or 0)"
    top = argparse.ArgumentParser(prog="sigforge", description="Typed hardware DSL toolchain.")
    top.add_argument("--json", action="store_true", help="machine-readable output")
    sub = top.add_subparsers(dest="command", required=True)

    def add(name: str, fn, help: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help)
        p.add_argument("--json", action="store_true", default=argparse.SUPPRESS, help="machine-readable output")
        p.add_argument("--seed", type=int, default=None, help=seed_help)
        p.set_defaults(fn=fn)
        return p

    p = add("check", cmd_check, "parse and elaborate a design")
    p.add_argument("file")

    p = add("sim", cmd_sim, "simulate against a testbench, or free-run")
    p.add_argument("file")
    p.add_argument("--tb", help="testbench JSON")
    p.add_argument("--max-cycles", type=int, default=100_000)
    p.add_argument("--cycles", type=int, default=10, help="free-run length without --tb")

    p = add("emit", cmd_emit, "emit SystemVerilog")
    p.add_argument("file")
    p.add_argument("-o", "--output")
    p.add_argument("--wrap", metavar="NAME", help="also emit a wrapper module")
    p.add_argument("--map", action="append", metavar="INNER=OUTER", help="wrapper port mapping")
    p.add_argument("--pad", action="append", metavar="INNER=WIDTH", help="wrapper-side port width")

    p = add("lint", cmd_lint, "lint a .sv file (or the emission of a .ckt)")
    p.add_argument("file")

    p = add("equiv", cmd_equiv, "check two designs for equivalence")
    p.add_argument("a")
    p.add_argument("b")
    p.add_argument("--mode", choices=["comb", "seq"])
    p.add_argument("--max-bits", type=int, default=20)
    p.add_argument("--horizon", type=int, default=64)
    p.add_argument("--seqs", type=int, default=10_000)
    p.add_argument("--random-fallback", action="store_true",
                   help="sample instead of answering unknown when a combinational space is too large")

    p = add("optimize", cmd_optimize, "closed-loop PPA optimization")
    p.add_argument("file")
    p.add_argument("--K", type=int, default=3, help="iterations")
    p.add_argument("--mode", choices=["ppa", "repair"], default="ppa")
    _add_loop_flags(p)

    p = add("explore", cmd_explore, "architecture exploration")
    p.add_argument("file")
    p.add_argument("--C", type=int, default=3, help="candidates")
    p.add_argument("--jobs", type=int, default=1)
    _add_loop_flags(p)

    p = add("run", cmd_run, "evaluate and optimize many designs, write records and a dashboard")
    p.add_argument("files", nargs="*", help="designs or directories of designs (default: bundled corpus)")
    p.add_argument("--out", default="results")
    p.add_argument("--K", type=int, default=3, help="optimization iterations per design (0: evaluate only)")
    p.add_argument("--jobs", type=int, default=1)
    _add_loop_flags(p, single=False)

    p = add("dashboard", cmd_dashboard, "render run records as a text grid and SVG")
    p.add_argument("results_dir")
    p.add_argument("-o", "--output", help="output path prefix (default: <results_dir>/dashboard)")
    return top


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        if args.seed is None:
            args.seed = default_seed()
        if getattr(args, "K", 1) < (0 if args.command == "run" else 1):
            raise UsageError("--K must be at least 1")
        return args.fn(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
