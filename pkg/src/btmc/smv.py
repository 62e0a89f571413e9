"""SMV text export of the guarded-command IR, and a parser for the emitted subset.

The output is a single ``MODULE main`` with relational ``INIT`` and ``TRANS``
sections: one ``TRANS`` disjunct per IR command, each listing every variable's
next value explicitly (unchanged variables get ``next(v) = v``).  Expressions
are fully parenthesized, so the text never depends on operator precedence.
"""
from __future__ import annotations

import itertools
import random
import re
from dataclasses import dataclass, field

from . import ltl
from .expr import (
    TRUE, Binary, Call, Const, Expr, Ite, Next, Status, StatusOf, Unary, Var, compile_expr,
    next_refs, status_key, substitute,
)
from .ir import IR, formula_for
from .model import BoolDomain, EnumDomain, IntRange

RESERVED = frozenset("""
MODULE VAR IVAR FROZENVAR DEFINE INIT TRANS INVAR SPEC CTLSPEC LTLSPEC PSLSPEC INVARSPEC COMPUTE
FAIRNESS JUSTICE COMPASSION ASSIGN CONSTANTS ISA PRED MIRROR NAME TRUE FALSE next init case esac mod
boolean integer real word array of self union in xor xnor min max abs EX AX EF AF EG AG E A U V S T
X F G Y Z H O BU EBF ABF EBG ABG count toint bool signed unsigned extend resize sizeof uwconst swconst
word1 typeof process running floor unsigned_word signed_word MAX MIN LTL
""".split())

STATUS_NAMES = {
    Status.INVALID: "Invalid", Status.FAILURE: "Failure", Status.RUNNING: "Running", Status.SUCCESS: "Success",
}


class SMVError(Exception):
    pass


def mangle(raw: str) -> str:
    s = re.sub(r"[^A-Za-z0-9_]", "_", raw)
    if not s or not (s[0].isalpha() or s[0] == "_"):
        s = "v_" + s
    if s in RESERVED:
        s = s + "_"
    return s


class Namer:
    """Injective, deterministic mapping from model names and symbols to SMV identifiers."""

    def __init__(self):
        self.names: dict = {}
        self.used: set = set()
        self.warnings: list[str] = []

    def get(self, key, raw: str, fixed: str | None = None) -> str:
        got = self.names.get(key)
        if got is not None:
            return got
        base = fixed or mangle(raw)
        cand, n = base, 1
        while cand in self.used:
            n += 1
            cand = f"{base}_{n}"
        if cand != base:
            self.warnings.append(f"name {raw!r} renamed to {cand!r} to avoid a collision")
        self.used.add(cand)
        self.names[key] = cand
        return cand

    def var(self, name: str) -> str:
        return self.get(("var", name), name)

    def sym(self, value) -> str:
        if isinstance(value, Status):
            return self.get(("sym", value), STATUS_NAMES[value], STATUS_NAMES[value])
        return self.get(("sym", value), str(value))

    def value(self, v) -> str:
        if isinstance(v, bool):
            return "TRUE" if v else "FALSE"
        if isinstance(v, int):
            return str(v)
        return self.sym(v)


@dataclass
class SMVExport:
    text: str
    namer: Namer
    ir: IR

    @property
    def warnings(self) -> list[str]:
        return self.namer.warnings

    def state_to_smv(self, state) -> dict:
        return to_smv_state(self, state)


def _expr(e: Expr, nm: Namer) -> str:
    if isinstance(e, Const):
        v = e.value
        if isinstance(v, bool):
            return "TRUE" if v else "FALSE"
        if isinstance(v, int):
            return str(v) if v >= 0 else f"({v})"
        return nm.sym(v)
    if isinstance(e, Var):
        return nm.var(e.name)
    if isinstance(e, StatusOf):
        return nm.var(status_key(e.node))
    if isinstance(e, Next):
        return f"next({nm.var(e.name)})"
    if isinstance(e, Unary):
        return f"(!{_expr(e.arg, nm)})" if e.op == "!" else f"(-{_expr(e.arg, nm)})"
    if isinstance(e, Binary):
        op = {"==": "=", "%": "mod"}.get(e.op, e.op)
        return f"({_expr(e.left, nm)} {op} {_expr(e.right, nm)})"
    if isinstance(e, Call):
        return f"{e.fn}({', '.join(_expr(a, nm) for a in e.args)})"
    if isinstance(e, Ite):
        return f"case {_expr(e.cond, nm)} : {_expr(e.then, nm)}; TRUE : {_expr(e.other, nm)}; esac"
    raise TypeError(e)


def _ltl(f: ltl.Formula, nm: Namer) -> str:
    if isinstance(f, ltl.Atom):
        return _expr(f.expr, nm)
    if isinstance(f, ltl.Not):
        return f"(!{_ltl(f.arg, nm)})"
    if isinstance(f, (ltl.Next, ltl.Globally, ltl.Finally)):
        op = {ltl.Next: "X", ltl.Globally: "G", ltl.Finally: "F"}[type(f)]
        return f"({op} {_ltl(f.arg, nm)})"
    if isinstance(f, ltl.StrongRelease):
        return _ltl(ltl.Until(f.right, ltl.And(f.left, f.right)), nm)
    op = {ltl.And: "&", ltl.Or: "|", ltl.Implies: "->", ltl.Until: "U", ltl.Release: "V"}[type(f)]
    return f"({_ltl(f.left, nm)} {op} {_ltl(f.right, nm)})"


def relational_updates(updates) -> list:
    """Ordered updates rewritten so each variable is assigned once and ``Next`` means the new value."""
    last = {v: i for i, (v, _) in enumerate(updates)}
    resolved: dict = {}
    out = []
    for i, (v, e) in enumerate(updates):
        nxt = {}
        for w in next_refs(e):
            if w not in resolved:
                nxt[w] = Var(w)
            elif last[w] != resolved[w][0]:
                nxt[w] = resolved[w][1]
        e2 = substitute(e, {}, nxt) if nxt else e
        resolved[v] = (i, e2)
        if last[v] == i:
            out.append((v, e2))
    return out


def _domain(dom, nm: Namer) -> str:
    if isinstance(dom, IntRange):
        return f"{dom.lo}..{dom.hi}"
    if isinstance(dom, BoolDomain):
        return "boolean"
    return "{" + ", ".join(nm.value(v) for v in dom.symbols) + "}"


def export_smv(ir: IR, ltl_specs=(), invar_specs=()) -> SMVExport:
    """SMV text for ``ir``.  Specs are given in model terms and sampled at tick boundaries."""
    from .dsl.printer import print_spec
    from .specs import Spec
    nm = Namer()
    for s in Status:
        nm.sym(s)
    for n, _ in ir.variables:
        nm.var(n)
    for alias in sorted(ir.aliases):
        nm.var(alias)
    for _, dom in ir.variables:
        if isinstance(dom, EnumDomain):
            for v in dom.symbols:
                nm.value(v)
    out = [f"-- model {ir.name}, encoding {ir.level.value}", "MODULE main", "VAR"]
    decls = sorted((nm.var(n), _domain(d, nm)) for n, d in ir.variables)
    out += [f"  {n} : {d};" for n, d in decls]
    shadowed = set(ir.names)
    aliases = [(nm.var(a), nm.var(t)) for a, t in sorted(ir.aliases.items()) if a not in shadowed]
    if aliases:
        out.append("DEFINE")
        out += [f"  {a} := {t};" for a, t in aliases]
    out.append("INIT")
    parts = []
    for n, vals in sorted(ir.init, key=lambda kv: nm.var(kv[0])):
        alts = [f"{nm.var(n)} = {nm.value(v)}" for v in vals]
        parts.append(alts[0] if len(alts) == 1 else "(" + " | ".join(alts) + ")")
    out.append("  " + "\n  & ".join(parts) + ";")
    out.append("TRANS")
    order = [n for n, _ in sorted(ir.variables, key=lambda kv: nm.var(kv[0]))]
    disjuncts = []
    for c in ir.commands:
        updates = relational_updates(c.updates)
        assigned = {v for v, _ in updates}
        conj = [_expr(c.guard, nm)]
        conj += [f"next({nm.var(v)}) = {_expr(e, nm)}" for v, e in updates]
        conj += [f"next({nm.var(v)}) = {nm.var(v)}" for v in order if v not in assigned]
        disjuncts.append("  (" + " & ".join(conj) + ")")
    out.append(" |\n".join(disjuncts) + ";" if disjuncts else "  FALSE;")
    for s in ltl_specs:
        spec = s if isinstance(s, Spec) else Spec("ltl", None, formula=s)
        out.append(f"-- spec: {print_spec(spec).strip()}")
        out.append(f"LTLSPEC {_ltl(formula_for(ir, spec.formula), nm)};")
    for s in invar_specs:
        spec = s if isinstance(s, Spec) else Spec("invar", None, predicate=s)
        out.append(f"-- spec: {print_spec(spec).strip()}")
        pred = spec.predicate if not ir.has_pc else Binary("->", ir.boundary, spec.predicate)
        out.append(f"INVARSPEC {_expr(pred, nm)};")
    return SMVExport("\n".join(out) + "\n", nm, ir)


def to_smv(ir: IR, specs=(), invariants=()) -> str:
    return export_smv(ir, specs, invariants).text


# ---------------------------------------------------------------------------
# re-import (emitted subset only)


_TOKEN = re.compile(r"\s*(?:(--[^\n]*)|(\d+)|([A-Za-z_][A-Za-z0-9_]*)|(\.\.|->|<->|:=|!=|<=|>=|[()\[\]{};:,=<>+\-*/!&|?]))")


def _tokens(text: str) -> list[str]:
    toks, pos = [], 0
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise SMVError(f"unexpected character at offset {pos}: {text[pos]!r}")
        pos = m.end()
        if m.group(1):
            continue
        toks.append(m.group(2) or m.group(3) or m.group(4))
    return toks


class _P:
    def __init__(self, toks):
        self.t = toks
        self.i = 0

    def peek(self, k=0):
        j = self.i + k
        return self.t[j] if j < len(self.t) else None

    def take(self, want=None):
        tok = self.peek()
        if tok is None or (want is not None and tok != want):
            raise SMVError(f"expected {want!r}, found {tok!r}")
        self.i += 1
        return tok

    def number(self):
        sign = -1 if self.accept("-") else 1
        tok = self.take()
        if not tok.isdigit():
            raise SMVError(f"expected a number, found {tok!r}")
        return sign * int(tok)

    def accept(self, want):
        if self.peek() == want:
            self.i += 1
            return True
        return False

    # expressions (temporal operators included; they are rejected by callers that forbid them)
    def expr(self):
        left = self.or_()
        if self.accept("->"):
            return ("->", left, self.expr())
        return left

    def or_(self):
        e = self.and_()
        while self.peek() == "|":
            self.take()
            e = ("|", e, self.and_())
        return e

    def and_(self):
        e = self.until()
        while self.peek() == "&":
            self.take()
            e = ("&", e, self.until())
        return e

    def until(self):
        e = self.cmp()
        if self.peek() in ("U", "V"):
            op = self.take()
            return (op, e, self.until())
        return e

    def cmp(self):
        e = self.add()
        if self.peek() in ("=", "!=", "<", "<=", ">", ">="):
            op = self.take()
            return (op, e, self.add())
        return e

    def add(self):
        e = self.mul()
        while self.peek() in ("+", "-"):
            op = self.take()
            e = (op, e, self.mul())
        return e

    def mul(self):
        e = self.unary()
        while self.peek() in ("*", "/", "mod"):
            op = self.take()
            e = (op, e, self.unary())
        return e

    def unary(self):
        tok = self.peek()
        if tok == "!":
            self.take()
            return ("!", self.unary())
        if tok == "-":
            self.take()
            if self.peek() is not None and self.peek().isdigit():
                return ("int", -int(self.take()))
            return ("neg", self.unary())
        if tok in ("X", "G", "F"):
            self.take()
            return (tok, self.unary())
        return self.atom()

    def atom(self):
        tok = self.take()
        if tok == "(":
            e = self.expr()
            self.take(")")
            return e
        if tok.isdigit():
            return ("int", int(tok))
        if tok == "TRUE":
            return ("bool", True)
        if tok == "FALSE":
            return ("bool", False)
        if tok == "next":
            self.take("(")
            name = self.take()
            self.take(")")
            return ("next", name)
        if tok in ("min", "max", "abs"):
            self.take("(")
            args = [self.expr()]
            while self.accept(","):
                args.append(self.expr())
            self.take(")")
            return ("call", tok, args)
        if tok == "case":
            arms = []
            while not self.accept("esac"):
                c = self.expr()
                self.take(":")
                v = self.expr()
                self.take(";")
                arms.append((c, v))
            return ("case", arms)
        if re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", tok):
            return ("id", tok)
        raise SMVError(f"unexpected token {tok!r}")


@dataclass
class SMVModel:
    variables: list
    defines: dict
    init: dict
    trans: list
    ltlspecs: list = field(default_factory=list)
    invarspecs: list = field(default_factory=list)
    spec_comments: list = field(default_factory=list)

    @property
    def names(self) -> list:
        return [n for n, _ in self.variables]

    def domain(self, name):
        return dict(self.variables)[name]


def _to_expr(t, symbols: set, variables: set, temporal=False):
    kind = t[0]
    if kind == "int":
        return Const(t[1])
    if kind == "bool":
        return Const(t[1])
    if kind == "id":
        if t[1] in variables:
            return Var(t[1])
        if t[1] in symbols:
            return Const(t[1])
        raise SMVError(f"unknown identifier {t[1]!r}")
    if kind == "next":
        return Next(t[1])
    if kind == "!":
        return Unary("!", _to_expr(t[1], symbols, variables))
    if kind == "neg":
        return Unary("-", _to_expr(t[1], symbols, variables))
    if kind == "call":
        return Call(t[1], tuple(_to_expr(a, symbols, variables) for a in t[2]))
    if kind == "case":
        arms = t[1]
        if len(arms) != 2 or arms[1][0] != ("bool", True):
            raise SMVError("only two-armed case expressions are supported")
        return Ite(*(_to_expr(x, symbols, variables) for x in (arms[0][0], arms[0][1], arms[1][1])))
    if kind in ("X", "G", "F", "U", "V"):
        raise SMVError(f"temporal operator {kind} outside a specification")
    op = {"=": "==", "mod": "%"}.get(kind, kind)
    return Binary(op, _to_expr(t[1], symbols, variables), _to_expr(t[2], symbols, variables))


def _to_formula(t, symbols, variables) -> ltl.Formula:
    kind = t[0]
    if kind in ("X", "G", "F"):
        cls = {"X": ltl.Next, "G": ltl.Globally, "F": ltl.Finally}[kind]
        return cls(_to_formula(t[1], symbols, variables))
    if kind in ("U", "V"):
        cls = ltl.Until if kind == "U" else ltl.Release
        return cls(_to_formula(t[1], symbols, variables), _to_formula(t[2], symbols, variables))
    if kind == "!":
        return ltl.Not(_to_formula(t[1], symbols, variables))
    if kind in ("&", "|", "->"):
        cls = {"&": ltl.And, "|": ltl.Or, "->": ltl.Implies}[kind]
        return cls(_to_formula(t[1], symbols, variables), _to_formula(t[2], symbols, variables))
    return ltl.Atom(_to_expr(t, symbols, variables))


def _split(t, op):
    if t[0] == op:
        return _split(t[1], op) + _split(t[2], op)
    return [t]


def parse_smv(text: str) -> SMVModel:
    """Parse text produced by :func:`export_smv`; anything outside that subset is rejected."""
    comments = [ln[len("-- spec: "):] for ln in text.splitlines() if ln.startswith("-- spec: ")]
    p = _P(_tokens(text))
    p.take("MODULE")
    p.take("main")
    variables, defines = [], {}
    raw_init = raw_trans = None
    ltls, invars = [], []
    while p.peek() is not None:
        sec = p.take()
        if sec == "VAR":
            while p.peek() not in ("DEFINE", "INIT", "TRANS", "LTLSPEC", "INVARSPEC", None):
                name = p.take()
                p.take(":")
                if p.accept("boolean"):
                    dom = BoolDomain()
                elif p.accept("{"):
                    syms = [p.take()]
                    while p.accept(","):
                        syms.append(p.take())
                    p.take("}")
                    dom = EnumDomain(tuple(syms))
                else:
                    lo = p.number()
                    p.take("..")
                    hi = p.number()
                    dom = IntRange(lo, hi)
                p.take(";")
                variables.append((name, dom))
        elif sec == "DEFINE":
            while p.peek() not in ("INIT", "TRANS", "LTLSPEC", "INVARSPEC", None):
                name = p.take()
                p.take(":=")
                defines[name] = p.take()
                p.take(";")
        elif sec == "INIT":
            raw_init = p.expr()
            p.take(";")
        elif sec == "TRANS":
            raw_trans = p.expr()
            p.take(";")
        elif sec == "LTLSPEC":
            ltls.append(p.expr())
            p.take(";")
        elif sec == "INVARSPEC":
            invars.append(p.expr())
            p.take(";")
        else:
            raise SMVError(f"unsupported section {sec!r}")
    names = {n for n, _ in variables}
    symbols = {s for _, d in variables if isinstance(d, EnumDomain) for s in d.symbols}
    env_names = names | set(defines)
    if raw_init is None or raw_trans is None:
        raise SMVError("INIT and TRANS sections are required")
    init: dict = {n: [] for n in names}
    for part in _split(raw_init, "&"):
        for alt in _split(part, "|"):
            if alt[0] != "=" or alt[1][0] != "id" or alt[1][1] not in names:
                raise SMVError("INIT must be a conjunction of per-variable value alternatives")
            init[alt[1][1]].append(_to_expr(alt[2], symbols, names).value)
    trans = []
    for disj in _split(raw_trans, "|"):
        guard = None
        updates = []
        for part in _split(disj, "&"):
            if part[0] == "=" and part[1][0] == "next":
                updates.append((part[1][1], _to_expr(part[2], symbols, names)))
            elif guard is None:
                guard = _to_expr(part, symbols, names)
            else:
                guard = Binary("&", guard, _to_expr(part, symbols, names))
        if guard is None:
            guard = TRUE
        trans.append((guard, updates))
    ltl_f = [_to_formula(t, symbols, env_names) for t in ltls]
    inv_e = [_to_expr(t, symbols, env_names) for t in invars]
    return SMVModel(variables, defines, init, trans, ltl_f, inv_e, comments)


def smv_successors(model: SMVModel, state: dict) -> list[dict]:
    """Successors of ``state`` (SMV names and values) under the relational TRANS."""
    out = []
    for guard, ups in model.trans:
        if not compile_expr(guard)(state):
            continue
        new = dict(state)
        pending = list(ups)
        done: set = set()
        # evaluate in dependency order: an update may read next() of other variables
        while pending:
            progressed = False
            for item in list(pending):
                v, e = item
                deps = next_refs(e)
                if deps <= done | {v}:
                    new[v] = compile_expr(e)(state, new)
                    done.add(v)
                    pending.remove(item)
                    progressed = True
            if not progressed:
                raise SMVError("cyclic next() dependencies")
        if all(new[v] in model.domain(v) for v in model.names):
            if new not in out:
                out.append(new)
    return out


def smv_initial_states(model: SMVModel) -> list[dict]:
    names = model.names
    return [dict(zip(names, combo)) for combo in itertools.product(*(model.init[n] for n in names))]


def smv_transition_system(model: SMVModel, limit: int | None = None, jobs: int = 1):
    """Explicit reachable state graph of a re-imported model; states are value tuples in VAR order."""
    from .composition import TransitionSystem, explore, state_limit
    names = model.names
    limit = state_limit() if limit is None else limit

    def expand(t):
        succ = smv_successors(model, dict(zip(names, t)))
        return [(i, tuple(d[n] for n in names)) for i, d in enumerate(succ)]

    init = [tuple(d[n] for n in names) for d in smv_initial_states(model)]
    states, initial, succ, labels, trunc = explore(init, expand, limit, jobs)

    def env(i):
        d = dict(zip(names, states[i]))
        for alias, target in model.defines.items():
            d[alias] = d[target]
        return d

    return TransitionSystem(initial, succ, env, states, labels, trunc)


def from_smv_state(exp: SMVExport, values: dict) -> tuple:
    """IR state tuple for a re-imported SMV state (inverse of :func:`to_smv_state`)."""
    inverse = {v: k[1] for k, v in exp.namer.names.items() if k[0] == "sym"}
    out = []
    for n in exp.ir.names:
        v = values[exp.namer.var(n)]
        out.append(v if isinstance(v, (bool, int)) else inverse[v])
    return tuple(out)


def smv_subset_simulate(text: str, steps: int, policy: str = "first", seed: int = 0) -> list[dict]:
    """A run of ``steps`` steps from the first initial state of the emitted model."""
    model = parse_smv(text)
    rng = random.Random(seed)
    state = smv_initial_states(model)[0]
    run = [state]
    for _ in range(steps):
        succ = smv_successors(model, state)
        if not succ:
            break
        state = succ[0] if policy == "first" else rng.choice(succ)
        run.append(state)
    return run


def normalize_formula(f: ltl.Formula) -> ltl.Formula:
    """Push boolean structure of atoms into formula connectives (for comparisons)."""
    if isinstance(f, ltl.Atom):
        g = ltl.from_expr(f.expr)
        return g if isinstance(g, ltl.Atom) else normalize_formula(g)
    if isinstance(f, ltl.StrongRelease):
        return normalize_formula(ltl.Until(f.right, ltl.And(f.left, f.right)))
    if isinstance(f, ltl.Globally):
        return ltl.Globally(normalize_formula(f.arg))
    if isinstance(f, (ltl.Not, ltl.Next, ltl.Finally)):
        return type(f)(normalize_formula(f.arg))
    return type(f)(normalize_formula(f.left), normalize_formula(f.right))


def rename_formula(f: ltl.Formula, namer: Namer) -> ltl.Formula:
    """Rename a model-level formula into SMV identifiers (for comparisons with re-imported specs)."""
    return ltl.map_atoms(f, lambda e: _rename_expr(e, namer))


def _rename_expr(e: Expr, nm: Namer) -> Expr:
    if isinstance(e, Const):
        v = e.value
        if isinstance(v, (bool, int)):
            return e
        return Const(nm.sym(v))
    if isinstance(e, Var):
        return Var(nm.var(e.name))
    if isinstance(e, StatusOf):
        return Var(nm.var(status_key(e.node)))
    if isinstance(e, Next):
        return Next(nm.var(e.name))
    if isinstance(e, Unary):
        return Unary(e.op, _rename_expr(e.arg, nm))
    if isinstance(e, Binary):
        return Binary(e.op, _rename_expr(e.left, nm), _rename_expr(e.right, nm))
    if isinstance(e, Call):
        return Call(e.fn, tuple(_rename_expr(a, nm) for a in e.args))
    if isinstance(e, Ite):
        return Ite(_rename_expr(e.cond, nm), _rename_expr(e.then, nm), _rename_expr(e.other, nm))
    raise TypeError(e)


def to_smv_state(exp: SMVExport, state) -> dict:
    nm = exp.namer
    out = {}
    for n, v in zip(exp.ir.names, state):
        out[nm.var(n)] = v if isinstance(v, (bool, int)) else nm.sym(v)
    return out


__all__ = [
    "export_smv", "to_smv", "parse_smv", "smv_successors", "smv_initial_states", "smv_subset_simulate", "SMVExport",
    "SMVModel", "SMVError", "Namer", "mangle", "normalize_formula", "rename_formula", "to_smv_state",
    "from_smv_state", "smv_transition_system",
    "RESERVED", "relational_updates",
]
