"""Canonical concrete syntax for every parsed object; ``parse(print(x)) == x`` for trees."""
from __future__ import annotations

from .. import ltl
from ..expr import Status, format_value, to_text
from ..model import (
    NAMED_DECORATORS, SBT, BoolDomain, Choice, Clause, EnumDomain, IntRange, Kind, TreeNode,
    decorator_map_for, iter_nodes,
)
from ..monitors import ESM, LTLMonitor, NFAMonitor, Verdict
from ..specs import Scenario, Spec

_KW = {Kind.SELECTOR: "sel", Kind.SEQUENCE: "seq", Kind.PARALLEL_ALL: "par_all", Kind.PARALLEL_ONE: "par_one"}
IND = "  "


def print_domain(dom) -> str:
    if isinstance(dom, IntRange):
        return f"{dom.lo}..{dom.hi}"
    if isinstance(dom, BoolDomain):
        return "bool"
    if isinstance(dom, EnumDomain):
        return "{" + ", ".join(str(s) for s in dom.symbols) + "}"
    raise TypeError(dom)


def print_decl(d) -> str:
    if len(d.initial) == 1:
        init = f"= {format_value(d.initial[0])}"
    else:
        init = "in {" + ", ".join(format_value(v) for v in d.initial) + "}"
    return f"{d.name} : {print_domain(d.domain)} {init};"


def print_assign(a) -> str:
    if isinstance(a.value, Choice):
        return f"{a.target} := choice{{{', '.join(to_text(o) for o in a.value.options)}}}"
    return f"{a.target} := {to_text(a.value)}"


def print_clause(c: Clause) -> str:
    s = f"case {to_text(c.guard)}"
    if c.writes:
        s += " : " + ", ".join(print_assign(w) for w in c.writes)
    if c.status is not None:
        s += f" => {c.status.value}"
    return s + ";"


def print_node(n: TreeNode) -> str:
    if n.kind.is_leaf:
        return n.name
    kids = ", ".join(print_node(c) for c in n.children)
    if n.kind is Kind.DECORATOR:
        label = n.decorator
        if label in NAMED_DECORATORS and decorator_map_for(label) == n.decorator_map:
            head = label
        else:
            pairs = ", ".join(f"{a.value}->{b.value}" for a, b in n.decorator_map)
            head = f"map{{{pairs}}}"
        return f"{head} {n.name}({kids})"
    kw = _KW[n.kind] + ("_mem" if n.memory else "")
    return f"{kw} {n.name}({kids})"


def pretty_print(sbt: SBT) -> str:
    """Canonical text for a tree.  Every node is printed with its explicit name."""
    out = [f"tree {sbt.name} {{"]
    for title, decls in (("blackboard", sbt.blackboard), ("environment", sbt.environment)):
        if decls:
            out.append(f"{IND}{title} {{")
            out.extend(f"{IND * 2}{print_decl(d)}" for d in decls)
            out.append(f"{IND}}}")
    for root in sbt.roots():
        for n in iter_nodes(root):
            if n.kind.is_leaf:
                kw = "action" if n.kind is Kind.ACTION else "check"
                out.append(f"{IND}{kw} {n.name} {{")
                out.extend(f"{IND * 2}{print_clause(c)}" for c in n.clauses)
                out.append(f"{IND}}}")
    out.append(f"{IND}root = {print_node(sbt.root)};")
    if sbt.contingency is not None:
        out.append(f"{IND}contingency = {print_node(sbt.contingency)};")
    if sbt.env_update:
        out.append(f"{IND}update {{")
        out.extend(f"{IND * 2}{print_clause(c)}" for c in sbt.env_update)
        out.append(f"{IND}}}")
    out.append("}")
    return "\n".join(out) + "\n"


def print_monitor(mon) -> str:
    if isinstance(mon, LTLMonitor):
        return f"monitor ltl {mon.name} {{ {ltl.to_text(mon.formula)} }}\n"
    if isinstance(mon, NFAMonitor):
        out = [f"monitor nfa {mon.name} {{", f"{IND}states {', '.join(mon.states)};", f"{IND}init {mon.initial};"]
        if mon.accepting:
            acc = [s for s in mon.states if s in mon.accepting]
            out.append(f"{IND}accept {', '.join(acc)};")
        for t in mon.transitions:
            out.append(f"{IND}trans {t.src} -> {t.dst} when {to_text(t.pred)};")
        out.append("}")
        return "\n".join(out) + "\n"
    if isinstance(mon, ESM):
        out = [f"monitor esm {mon.name} {{"]
        if mon.variables:
            out.append(f"{IND}vars {{")
            out.extend(f"{IND * 2}{print_decl(d)}" for d in mon.variables)
            out.append(f"{IND}}}")
        for s in mon.states:
            v = mon.verdict_of(s)
            out.append(f"{IND}state {s}" + (" : contingency;" if v is Verdict.CONTINGENCY else ";"))
        out.append(f"{IND}init {', '.join(mon.initial_states)};")
        for t in mon.transitions:
            line = f"{IND}trans {t.src} -> {t.dst} when {to_text(t.guard)}"
            if t.updates:
                line += " do " + ", ".join(print_assign(a) for a in t.updates)
            out.append(line + ";")
        if mon.rule != "universal":
            out.append(f"{IND}rule {mon.rule};")
        out.append("}")
        return "\n".join(out) + "\n"
    raise TypeError(mon)


def print_spec(spec: Spec) -> str:
    name = f" {spec.name}" if spec.name else ""
    if spec.kind == "ltl":
        return f"ltl{name} {{ {ltl.to_text(spec.formula)} }}\n"
    return f"invar{name} {{ {to_text(spec.predicate)} }}\n"


def print_scenario(sc: Scenario) -> str:
    def writes(ws):
        return ", ".join(f"{k} := {format_value(v)}" for k, v in ws)

    out = ["scenario" + (f" {sc.name}" if sc.name else "") + " {"]
    if sc.init:
        out.append(f"{IND}init : {writes(sc.init)};")
    for k, ws in sc.overrides:
        out.append(f"{IND}at {k} : {writes(ws)};")
    for k, vec in sc.choices:
        out.append(f"{IND}choices {k} : {', '.join(str(i) for i in vec)};")
    out.append("}")
    return "\n".join(out) + "\n"


def status_letter(s: Status) -> str:
    return s.value
