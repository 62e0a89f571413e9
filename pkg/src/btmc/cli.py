"""Command-line front end: ``btmc parse | simulate | verify | export-smv | gen``.

Exit codes: 0 success or Holds, 1 usage or parse error, 2 Violated, 3 resource limit.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import ltl
from .composition import (
    CompositionError, ScenarioError, compose, run, simulate_runtime, state_observation,
)
from .dsl import (
    ParseError, SourceFile, ValidationError, emit_dot, parse_formula, parse_items, parse_monitor,
    parse_scenario, parse_specs, parse_tree_full,
)
from .expr import to_text
from .ir import OptLevel, encode
from .model import Diagnostic
from .semantics import (
    BranchingLimitExceeded, SemanticsError, all_traces, dump_jsonl, node_order,
)
from .specs import Spec

EXIT_OK, EXIT_USAGE, EXIT_VIOLATED, EXIT_LIMIT = 0, 1, 2, 3
LEVEL_NAMES = {"no": OptLevel.NO_OPT, "first": OptLevel.FIRST_OPT, "last": OptLevel.LAST_OPT,
               "full": OptLevel.FULL_OPT}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _level(s: str) -> OptLevel:
    key = s[:-4] if s.endswith("_opt") else s
    if key not in LEVEL_NAMES:
        raise argparse.ArgumentTypeError(f"unknown opt level {s!r} (choose from no, first, last, full)")
    return LEVEL_NAMES[key]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("text", "json"), default="text", help="output format")
    common.add_argument("--jobs", type=int, default=1, help="worker threads for state-space exploration")

    p = _Parser(prog="btmc", description="Behavior tree and monitor verification toolchain.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sp = sub.add_parser("parse", parents=[common], help="parse and validate a model file")
    sp.add_argument("file")
    sp.add_argument("--dot", metavar="OUT", help="write a DOT rendering of the tree")

    sp = sub.add_parser("simulate", parents=[common], help="run a tree (optionally monitored)")
    sp.add_argument("tree")
    sp.add_argument("--monitor")
    sp.add_argument("--scenario")
    sp.add_argument("--steps", type=int, default=10)
    sp.add_argument("--resolver", choices=("first", "enumerate"), default="first")

    sp = sub.add_parser("verify", parents=[common], help="model-check specifications")
    sp.add_argument("tree")
    sp.add_argument("--monitor")
    sp.add_argument("--spec", action="append", required=True,
                    help="formula text, a spec item, or a path to a spec file (repeatable)")
    sp.add_argument("--opt-level", type=_level, default=OptLevel.FULL_OPT)
    sp.add_argument("--engine", choices=("internal", "smv-export"), default="internal")
    sp.add_argument("--compare-levels", action="store_true", help="check at all four levels")

    sp = sub.add_parser("export-smv", parents=[common], help="write the SMV encoding")
    sp.add_argument("tree")
    sp.add_argument("--monitor")
    sp.add_argument("--spec", action="append", default=[])
    sp.add_argument("--opt-level", type=_level, default=OptLevel.FULL_OPT)
    sp.add_argument("-o", "--output", help="output file (default: stdout)")

    sp = sub.add_parser("gen", parents=[common], help="generate construction fixtures")
    sp.add_argument("kind", choices=("nfa", "tm"))
    sp.add_argument("spec_file")
    sp.add_argument("-o", "--output", required=True, help="output directory")
    return p


# ---------------------------------------------------------------------------
# loading


def _read(path: str, kind: str | None = None) -> SourceFile:
    try:
        return SourceFile.read(path, kind)
    except OSError as exc:
        raise UsageError(f"{path}: {exc.strerror or exc}") from None


def _load_tree(path: str):
    return parse_tree_full(_read(path, "tree").text)


def _load_monitor(path: str | None):
    return None if path is None else parse_monitor(_read(path, "monitor").text)


def _load_specs(values) -> list[Spec]:
    out = []
    for v in values:
        if os.path.exists(v):
            out.extend(parse_specs(_read(v, "spec").text))
        elif v.lstrip().startswith(("ltl", "invar")) and "{" in v:
            out.extend(parse_specs(v))
        else:
            out.append(Spec("ltl", None, formula=parse_formula(v)))
    return out


def _diag_line(path: str, d: Diagnostic) -> str:
    loc = f"{d.line}:{d.column}:" if d.line is not None else ""
    return f"{path}:{loc} {d.severity}: {d.rule}: {d.message}"


def _emit(args, text_lines, payload):
    if args.format == "json":
        print(json.dumps(payload, sort_keys=True))
    else:
        for line in text_lines:
            print(line)


# ---------------------------------------------------------------------------
# commands


def cmd_parse(args) -> int:
    src = _read(args.file)
    warnings: list[Diagnostic] = []
    summary: dict = {"file": args.file, "kind": src.kind}
    if src.kind == "tree":
        parsed = parse_tree_full(src.text)
        warnings = list(parsed.warnings)
        sbt = parsed.sbt
        summary.update(name=sbt.name, variables=[d.name for d in sbt.variables], nodes=len(node_order(sbt)))
        if args.dot:
            Path(args.dot).write_text(emit_dot(sbt), encoding="utf-8", newline="\n")
    elif src.kind == "monitor":
        mon = parse_monitor(src.text)
        summary.update(name=mon.name, monitor=mon.kind)
    elif src.kind == "spec":
        summary.update(specs=len(parse_specs(src.text)))
    elif src.kind == "scenario":
        parse_scenario(src.text)
    else:
        summary.update(items=len(parse_items(src.text)))
    lines = [_diag_line(args.file, w) for w in warnings] + [f"{args.file}: ok ({src.kind})"]
    summary["warnings"] = [str(w) for w in warnings]
    summary["ok"] = True
    _emit(args, lines, summary)
    return EXIT_OK


def cmd_simulate(args) -> int:
    sbt = _load_tree(args.tree).sbt
    if args.resolver == "enumerate":
        if args.monitor or args.scenario:
            raise UsageError("--resolver enumerate runs the bare tree; drop --monitor/--scenario")
        traces = sorted(all_traces(sbt, args.steps), key=lambda t: dump_jsonl(t))
        if args.format == "json":
            for i, t in enumerate(traces):
                print(json.dumps({"trace": i, "observations": [o.to_json() for o in t]}, sort_keys=True))
        else:
            for i, t in enumerate(traces):
                print(f"# trace {i}")
                sys.stdout.write(dump_jsonl(t))
            print(f"# traces: {len(traces)}")
        return EXIT_OK
    mon = _load_monitor(args.monitor)
    scenario = parse_scenario(_read(args.scenario, "scenario").text) if args.scenario else None
    btm = compose(sbt, mon)
    if mon is None:
        for _, res, state in run(btm, args.steps, scenario):
            print(json.dumps(state_observation(res, state).to_json(), sort_keys=True))
        return EXIT_OK
    report = simulate_runtime(btm, scenario, args.steps)
    for obs, mode in report.trajectory:
        row = obs.to_json()
        row["mode"] = "contingency" if mode else "nominal"
        print(json.dumps(row, sort_keys=True))
    if args.format == "json":
        print(json.dumps({"report": report.to_json()}, sort_keys=True))
    else:
        r = report
        if r.missed:
            print(f"# report: fault at step {r.injected_at}, missed within {args.steps} steps")
        else:
            print(f"# report: fault at step {r.injected_at}, detected at step {r.detected_at}, "
                  f"latency {r.latency}")
        if r.deadlock_at is not None:
            print(f"# report: monitor deadlock at step {r.deadlock_at}")
    return EXIT_OK


def _state_json(btm, s) -> dict:
    order = node_order(btm.sbt)
    d = {k: _jsonable(v) for k, v in s.valuation.items()}
    d.update({f"status:{n}": st.value for n, st in zip(order, s.memory.statuses)})
    d["mode"] = "contingency" if s.mode else "nominal"
    if s.error:
        d["error"] = s.error
    return dict(sorted(d.items()))


def _jsonable(v):
    return v if isinstance(v, (bool, int)) else getattr(v, "value", str(v))


def _spec_label(spec: Spec) -> str:
    if spec.name:
        return spec.name
    return ltl.to_text(spec.formula) if spec.kind == "ltl" else to_text(spec.predicate)


def cmd_verify(args) -> int:
    from .verifier import (
        HOLDS, LEVELS, verify_invariant, verify_ltl, verify_ltl_smv,
    )
    sbt = _load_tree(args.tree).sbt
    btm = compose(sbt, _load_monitor(args.monitor))
    specs = _load_specs(args.spec)
    levels = LEVELS if args.compare_levels else (args.opt_level,)
    results, lines, exit_code = [], [], EXIT_OK
    for spec in specs:
        label = _spec_label(spec)
        for lvl in levels:
            if spec.kind == "invar":
                r = verify_invariant(btm, spec.predicate, lvl, jobs=args.jobs)
            elif args.engine == "smv-export":
                r = verify_ltl_smv(btm, spec.formula, lvl, jobs=args.jobs)
            else:
                r = verify_ltl(btm, spec.formula, lvl, jobs=args.jobs)
            entry = {"spec": label, "level": r.level.value, "verdict": r.kind, "states": r.states,
                     "transitions": r.transitions}
            lines.append(f"{label} [{r.level.value}]: {r.kind.upper()} ({r.states} states, {r.transitions} transitions)")
            if r.kind != HOLDS:
                exit_code = EXIT_VIOLATED
                entry["replay_ok"] = r.replay.ok
                if r.path:
                    entry["path"] = [_state_json(btm, s) for s in r.path]
                    lines.append(f"  path to violation ({len(r.path)} states):")
                    lines += [f"    {i}: {_brief(btm, s)}" for i, s in enumerate(r.path)]
                else:
                    entry["prefix"] = [_state_json(btm, s) for s in r.prefix]
                    entry["cycle"] = [_state_json(btm, s) for s in r.cycle]
                    lines.append(f"  lasso: prefix {len(r.prefix)} states, cycle {len(r.cycle)} states")
                    lines += [f"    {i}: {_brief(btm, s)}" for i, s in enumerate(r.prefix)]
                    lines += [f"    {len(r.prefix) + i}*: {_brief(btm, s)}" for i, s in enumerate(r.cycle)]
                lines.append(f"  replay on interpreter: {'ok' if r.replay.ok else 'FAILED: ' + r.replay.message}")
            results.append(entry)
        if args.compare_levels:
            verdicts = {e["verdict"] for e in results if e["spec"] == label}
            lines.append(f"  levels agree: {'yes' if len(verdicts) == 1 else 'NO'}")
    _emit(args, lines, {"results": results})
    return exit_code


def _brief(btm, s) -> str:
    parts = [f"{k}={_jsonable(v)}" for k, v in s.valuation.items()]
    parts.append("mode=contingency" if s.mode else "mode=nominal")
    if s.error:
        parts.append(f"error={s.error}")
    return " ".join(parts)


def cmd_export_smv(args) -> int:
    from .smv import export_smv
    from .verifier import resolve_formula, resolve_predicate
    sbt = _load_tree(args.tree).sbt
    btm = compose(sbt, _load_monitor(args.monitor))
    specs = _load_specs(args.spec)
    ltls = [Spec("ltl", s.name, formula=resolve_formula(btm, s.formula)) for s in specs if s.kind == "ltl"]
    invs = [Spec("invar", s.name, predicate=resolve_predicate(btm, s.predicate)) for s in specs if s.kind == "invar"]
    exp = export_smv(encode(btm, args.opt_level), ltls, invs)
    for w in exp.warnings:
        print(f"warning: {w}", file=sys.stderr)
    if args.output:
        Path(args.output).write_bytes(exp.text.encode("utf-8"))
        _emit(args, [f"wrote {args.output} ({len(exp.ir.variables)} variables, {len(exp.ir.commands)} commands)"],
              {"output": args.output, "variables": len(exp.ir.variables), "commands": len(exp.ir.commands),
               "warnings": exp.warnings})
    else:
        sys.stdout.write(exp.text)
    return EXIT_OK


def cmd_gen(args) -> int:
    from .expressiveness import NFA, NTMSpec, nfa_fixture, tm_fixture
    items = parse_items(_read(args.spec_file, "items").text)
    want = NFA if args.kind == "nfa" else NTMSpec
    picked = [x for x in items if isinstance(x, want)]
    if not picked:
        raise UsageError(f"{args.spec_file}: no {args.kind} definitions found")
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for item in picked:
        files = nfa_fixture(item) if args.kind == "nfa" else tm_fixture(item)
        for name, text in sorted(files.items()):
            (out / name).write_bytes(text.encode("utf-8"))
            written.append(str(out / name))
    _emit(args, [f"wrote {w}" for w in written], {"files": written})
    return EXIT_OK


COMMANDS = {"parse": cmd_parse, "simulate": cmd_simulate, "verify": cmd_verify, "export-smv": cmd_export_smv,
            "gen": cmd_gen}


def main(argv=None) -> int:
    from .verifier import TruncatedSystemError
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ParseError as exc:
        path = getattr(args, "file", None) or getattr(args, "tree", None) or getattr(args, "spec_file", "")
        print(f"{path}:{exc.line}:{exc.column}: error: {exc.message}", file=sys.stderr)
        return EXIT_USAGE
    except ValidationError as exc:
        path = getattr(args, "file", None) or getattr(args, "tree", "")
        for d in exc.diagnostics:
            print(_diag_line(path, d), file=sys.stderr)
        return EXIT_USAGE
    except (CompositionError, ScenarioError) as exc:
        for d in getattr(exc, "diagnostics", [exc]):
            print(f"error: {d}", file=sys.stderr)
        return EXIT_USAGE
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (TruncatedSystemError, BranchingLimitExceeded) as exc:
        print(f"resource limit: {exc}", file=sys.stderr)
        return EXIT_LIMIT
    except SemanticsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
