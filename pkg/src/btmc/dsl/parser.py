"""Recursive-descent parser for trees, monitors, specifications and scenarios.

The grammar is documented in GRAMMAR.md at the repository root.  Keywords are
contextual, so a variable may be called ``state`` or ``update``; inside LTL
formulas the operator letters G, F, X, U and M are reserved.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .. import ltl
from ..expr import (
    FUNCTIONS, TRUE, Binary, Call, Const, Expr, Ite, Status, StatusOf, Unary, Var,
)
from ..model import (
    BOOL, NAMED_DECORATORS, SBT, Assign, BoolDomain, Choice, Clause, Diagnostic, EnumDomain,
    IntRange, Kind, Owner, TreeNode, VarDecl, decorator_map_for, iter_nodes, validate,
)
from ..monitors import ESM, ESMTransition, LTLMonitor, NFAMonitor, NFATransition, Verdict
from ..specs import Scenario, Spec
from .lexer import EOF, IDENT, INT, OP, ParseError, Token, decode, tokenize

MAX_DEPTH = 200

COMPOSITES = {
    "sel": (Kind.SELECTOR, False), "seq": (Kind.SEQUENCE, False),
    "par_all": (Kind.PARALLEL_ALL, False), "par_one": (Kind.PARALLEL_ONE, False),
    "sel_mem": (Kind.SELECTOR, True), "seq_mem": (Kind.SEQUENCE, True),
    "par_all_mem": (Kind.PARALLEL_ALL, True), "par_one_mem": (Kind.PARALLEL_ONE, True),
}
LTL_KEYWORDS = {"G", "F", "X", "U", "M", "R"}
STATUS_WORDS = {"S": Status.SUCCESS, "F": Status.FAILURE, "R": Status.RUNNING, "I": Status.INVALID}


@dataclass(frozen=True)
class SourceFile:
    path: str
    text: str
    kind: str = "tree"

    @classmethod
    def read(cls, path, kind: str | None = None) -> "SourceFile":
        with open(path, "rb") as fh:
            data = fh.read()
        if kind is None:
            kind = {"bt": "tree", "mon": "monitor", "ltl": "spec", "scn": "scenario"}.get(str(path).rsplit(".", 1)[-1], "tree")
        return cls(str(path), decode(data), kind)


class ValidationError(Exception):
    def __init__(self, diagnostics: list[Diagnostic]):
        self.diagnostics = diagnostics
        super().__init__("; ".join(str(d) for d in diagnostics if d.severity == "error"))


@dataclass
class _PNode:
    kind: Kind
    name: str | None
    tok: Token
    children: list = field(default_factory=list)
    memory: bool = False
    decorator: str | None = None
    decorator_map: tuple = ()
    leaf_ref: str | None = None


@dataclass
class ParsedTree:
    sbt: SBT
    locations: dict
    warnings: list


class Parser:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.pos = 0
        self.depth = 0
        self.ltl_mode = False
        self.warnings: list[Diagnostic] = []

    # -- token helpers ------------------------------------------------------

    @property
    def tok(self) -> Token:
        return self.toks[self.pos]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.pos + k, len(self.toks) - 1)]

    def advance(self) -> Token:
        t = self.toks[self.pos]
        if t.kind != EOF:
            self.pos += 1
        return t

    def error(self, *expected: str, tok: Token | None = None, message: str | None = None) -> ParseError:
        t = tok or self.tok
        return ParseError(t.line, t.column, expected, t.describe(), message)

    def at(self, value: str) -> bool:
        t = self.tok
        return t.kind in (OP, IDENT) and t.value == value

    def accept(self, value: str) -> Token | None:
        if self.at(value):
            return self.advance()
        return None

    def expect(self, value: str) -> Token:
        if not self.at(value):
            raise self.error(repr(value))
        return self.advance()

    def ident(self, what: str = "identifier") -> Token:
        if self.tok.kind != IDENT:
            raise self.error(what)
        return self.advance()

    def integer(self) -> int:
        neg = bool(self.accept("-"))
        if self.tok.kind != INT:
            raise self.error("integer")
        v = int(self.advance().value)
        return -v if neg else v

    def nest(self):
        self.depth += 1
        if self.depth > MAX_DEPTH:
            raise self.error(message="nesting too deep")

    def unnest(self):
        self.depth -= 1

    # -- expressions --------------------------------------------------------

    def expr(self) -> Expr:
        self.nest()
        try:
            left = self._or()
            if self.at("->"):
                self.advance()
                return Binary("->", left, self.expr())
            return left
        finally:
            self.unnest()

    def _or(self):
        e = self._and()
        while self.at("|"):
            self.advance()
            e = Binary("|", e, self._and())
        return e

    def _and(self):
        e = self._not()
        while self.at("&"):
            self.advance()
            e = Binary("&", e, self._not())
        return e

    def _not(self):
        if self.at("!"):
            self.advance()
            self.nest()
            try:
                return Unary("!", self._not())
            finally:
                self.unnest()
        return self.cmp()

    def cmp(self) -> Expr:
        t = self.tok
        if (t.kind == IDENT and t.value in STATUS_WORDS and self.peek().kind == OP
                and self.peek().value in ("==", "!=") and self.peek(2).value == "status"):
            self.advance()
            op = self.advance().value
            return Binary(op, Const(STATUS_WORDS[t.value]), self._add())
        left = self._add()
        if self.tok.kind == OP and self.tok.value in ("==", "!=", "<", "<=", ">", ">="):
            op = self.advance().value
            if isinstance(left, StatusOf) and op in ("==", "!=") and self.tok.kind == IDENT and self.tok.value in STATUS_WORDS:
                return Binary(op, left, Const(STATUS_WORDS[self.advance().value]))
            return Binary(op, left, self._add())
        return left

    def _add(self):
        e = self._mul()
        while self.tok.kind == OP and self.tok.value in ("+", "-"):
            op = self.advance().value
            e = Binary(op, e, self._mul())
        return e

    def _mul(self):
        e = self._unary_minus()
        while self.tok.kind == OP and self.tok.value in ("*", "/", "%"):
            op = self.advance().value
            e = Binary(op, e, self._unary_minus())
        return e

    def _unary_minus(self):
        if self.at("-"):
            self.advance()
            if self.tok.kind == INT:
                return Const(-int(self.advance().value))
            self.nest()
            try:
                return Unary("-", self._unary_minus())
            finally:
                self.unnest()
        return self.primary()

    def primary(self) -> Expr:
        t = self.tok
        if t.kind == INT:
            self.advance()
            return Const(int(t.value))
        if t.kind == OP and t.value == "(":
            self.advance()
            e = self.expr()
            self.expect(")")
            return e
        if t.kind == IDENT:
            if self.ltl_mode and t.value in LTL_KEYWORDS:
                raise self.error("expression")
            self.advance()
            if t.value in ("true", "TRUE"):
                return Const(True)
            if t.value in ("false", "FALSE"):
                return Const(False)
            if t.value == "status" and self.at("("):
                self.advance()
                name = self.ident("node name").value
                self.expect(")")
                return StatusOf(name)
            if t.value in FUNCTIONS and self.at("("):
                self.advance()
                args = [self.expr()]
                while self.accept(","):
                    args.append(self.expr())
                self.expect(")")
                if len(args) != FUNCTIONS[t.value]:
                    raise self.error(message=f"{t.value} takes {FUNCTIONS[t.value]} argument(s)", tok=t)
                return Call(t.value, tuple(args))
            if t.value == "ite" and self.at("("):
                self.advance()
                c = self.expr()
                self.expect(",")
                a = self.expr()
                self.expect(",")
                b = self.expr()
                self.expect(")")
                return Ite(c, a, b)
            return Var(t.value)
        raise self.error("expression")

    # -- LTL ---------------------------------------------------------------

    def formula(self) -> ltl.Formula:
        saved = self.ltl_mode
        self.ltl_mode = True
        try:
            return self._implies()
        finally:
            self.ltl_mode = saved

    def _implies(self):
        self.nest()
        try:
            left = self._lor()
            if self.accept("->"):
                return ltl.Implies(left, self._implies())
            return left
        finally:
            self.unnest()

    def _lor(self):
        f = self._land()
        while self.accept("|"):
            f = ltl.Or(f, self._land())
        return f

    def _land(self):
        f = self._until()
        while self.accept("&"):
            f = ltl.And(f, self._until())
        return f

    def _until(self):
        left = self._lunary()
        if self.at("U") or self.at("M") or self.at("R"):
            op = self.advance().value
            self.nest()
            try:
                right = self._until()
            finally:
                self.unnest()
            return {"U": ltl.Until, "M": ltl.StrongRelease, "R": ltl.Release}[op](left, right)
        return left

    _FOLLOW = {")", "&", "|", "->", "U", "M", "R", ";", "}"}

    def _lunary(self):
        t = self.tok
        if t.kind == OP and t.value == "!":
            self.advance()
            self.nest()
            try:
                return ltl.Not(self._lunary())
            finally:
                self.unnest()
        if t.kind == IDENT and t.value in ("G", "F", "X"):
            self.advance()
            self.nest()
            try:
                arg = self._lunary()
            finally:
                self.unnest()
            return {"G": ltl.Globally, "F": ltl.Finally, "X": ltl.Next}[t.value](arg)
        if t.kind == OP and t.value == "(":
            start = self.pos
            try:
                e = self.cmp()
                nxt = self.tok
                if nxt.kind == EOF or nxt.value in self._FOLLOW:
                    return ltl.from_expr(e)
            except ParseError:
                pass
            self.pos = start
            self.advance()
            f = self._implies()
            self.expect(")")
            return f
        return ltl.Atom(self.cmp())

    # -- declarations -------------------------------------------------------

    def value(self):
        t = self.tok
        if t.kind == INT or (t.kind == OP and t.value == "-"):
            return self.integer()
        if t.kind == IDENT:
            self.advance()
            if t.value in ("true", "TRUE"):
                return True
            if t.value in ("false", "FALSE"):
                return False
            return t.value
        raise self.error("value")

    def domain(self):
        if self.at("{"):
            self.advance()
            syms = [self.ident("symbol").value]
            while self.accept(","):
                syms.append(self.ident("symbol").value)
            self.expect("}")
            return EnumDomain(tuple(syms))
        if self.at("bool"):
            self.advance()
            return BOOL
        lo = self.integer()
        self.expect("..")
        hi = self.integer()
        return IntRange(lo, hi)

    def decl(self, owner: Owner, locs: dict) -> VarDecl:
        name = self.ident("variable name")
        self.expect(":")
        dom = self.domain()
        if self.accept("="):
            init = (self.value(),)
        elif self.accept("in"):
            self.expect("{")
            vals = [self.value()]
            while self.accept(","):
                vals.append(self.value())
            self.expect("}")
            init = tuple(vals)
        else:
            raise self.error("'='", "'in'")
        self.expect(";")
        locs.setdefault(("var", name.value), (name.line, name.column))
        return VarDecl(name.value, dom, init, owner)

    def assigns(self) -> tuple:
        out = [self.assign()]
        while self.accept(","):
            out.append(self.assign())
        return tuple(out)

    def assign(self) -> Assign:
        target = self.ident("variable name").value
        self.expect(":=")
        if self.at("choice") and self.peek().kind == OP and self.peek().value == "{":
            self.advance()
            self.advance()
            opts = [self.expr()]
            while self.accept(","):
                opts.append(self.expr())
            self.expect("}")
            return Assign(target, Choice(tuple(opts)))
        return Assign(target, self.expr())

    def status_word(self) -> Status:
        t = self.tok
        if t.kind == IDENT and t.value in ("S", "F", "R"):
            self.advance()
            return STATUS_WORDS[t.value]
        raise self.error("status S, F or R")

    def clause(self, with_status: bool) -> Clause:
        self.expect("case")
        guard = self.expr()
        writes = ()
        if self.accept(":"):
            writes = self.assigns()
        status = None
        if with_status:
            self.expect("=>")
            status = self.status_word()
        self.expect(";")
        return Clause(guard, writes, status)

    # -- trees --------------------------------------------------------------

    def node(self) -> _PNode:
        self.nest()
        try:
            t = self.tok
            if t.kind != IDENT:
                raise self.error("node")
            nxt = self.peek()
            opens = nxt.kind == OP and nxt.value in ("(", "{")
            named = nxt.kind == IDENT and self.peek(2).kind == OP and self.peek(2).value == "("
            if t.value in COMPOSITES and (opens or named):
                self.advance()
                kind, mem = COMPOSITES[t.value]
                name = self.ident().value if self.tok.kind == IDENT else None
                self.expect("(")
                kids = [self.node()]
                while self.accept(","):
                    kids.append(self.node())
                self.expect(")")
                return _PNode(kind, name, t, kids, memory=mem)
            if t.value in NAMED_DECORATORS and (opens or named):
                self.advance()
                name = self.ident().value if self.tok.kind == IDENT else None
                self.expect("(")
                child = self.node()
                self.expect(")")
                return _PNode(Kind.DECORATOR, name, t, [child], decorator=t.value,
                              decorator_map=decorator_map_for(t.value))
            if t.value == "map" and nxt.kind == OP and nxt.value == "{":
                self.advance()
                self.advance()
                pairs = {}
                while True:
                    src = self.status_word()
                    self.expect("->")
                    pairs[src] = self.status_word()
                    if not self.accept(","):
                        break
                self.expect("}")
                name = self.ident().value if self.tok.kind == IDENT else None
                self.expect("(")
                child = self.node()
                self.expect(")")
                dmap = tuple(sorted(pairs.items(), key=lambda kv: kv[0].value))
                return _PNode(Kind.DECORATOR, name, t, [child], decorator="map", decorator_map=dmap)
            self.advance()
            return _PNode(Kind.ACTION, t.value, t, leaf_ref=t.value)
        finally:
            self.unnest()

    def tree(self) -> ParsedTree:
        head = self.expect("tree")
        name = self.ident().value if self.tok.kind == IDENT else "tree"
        self.expect("{")
        bl, env, upd = [], [], []
        leaves: dict[str, tuple] = {}
        root = cont = None
        locs: dict = {}
        while not self.at("}"):
            t = self.tok
            if self.accept("blackboard"):
                self.expect("{")
                while not self.at("}"):
                    bl.append(self.decl(Owner.BLACKBOARD, locs))
                self.expect("}")
            elif self.accept("environment"):
                self.expect("{")
                while not self.at("}"):
                    env.append(self.decl(Owner.ENVIRONMENT, locs))
                self.expect("}")
            elif self.at("action") or self.at("check"):
                kind = Kind.ACTION if self.advance().value == "action" else Kind.CHECK
                lname = self.ident("leaf name")
                self.expect("{")
                clauses = []
                while not self.at("}"):
                    clauses.append(self.clause(True))
                self.expect("}")
                if lname.value in leaves:
                    raise ParseError(lname.line, lname.column, (), repr(lname.value),
                                     f"leaf {lname.value!r} defined twice")
                leaves[lname.value] = (kind, tuple(clauses), lname)
            elif self.accept("root"):
                if root is not None:
                    raise self.error(message="root defined twice", tok=t)
                self.expect("=")
                root = self.node()
                self.accept(";")
            elif self.accept("contingency"):
                if cont is not None:
                    raise self.error(message="contingency defined twice", tok=t)
                self.expect("=")
                cont = self.node()
                self.accept(";")
            elif self.accept("update"):
                self.expect("{")
                while not self.at("}"):
                    upd.append(self.clause(False))
                self.expect("}")
            else:
                raise self.error("'blackboard'", "'environment'", "'action'", "'check'", "'root'",
                                 "'contingency'", "'update'", "'}'")
        self.expect("}")
        if root is None:
            raise self.error(message="tree has no root", tok=head)
        return self._build_tree(name, bl, env, upd, leaves, root, cont, locs)

    def _build_tree(self, name, bl, env, upd, leaves, root, cont, locs) -> ParsedTree:
        diags: list[Diagnostic] = []
        pnodes = [root] + ([cont] if cont is not None else [])
        taken = set()
        used_leaves = []

        def collect(p):
            stack = [p]
            while stack:
                cur = stack.pop()
                if cur.name is not None and cur.leaf_ref is None:
                    taken.add(cur.name)
                if cur.leaf_ref is not None:
                    taken.add(cur.leaf_ref)
                stack.extend(cur.children)

        for p in pnodes:
            collect(p)
        counters: dict[str, int] = {}

        def fresh(base):
            n = counters.get(base, 0)
            while True:
                n += 1
                cand = base if n == 1 else f"{base}_{n}"
                if cand not in taken:
                    counters[base] = n
                    taken.add(cand)
                    return cand

        def build(p: _PNode) -> TreeNode:
            if p.leaf_ref is not None:
                used_leaves.append(p.leaf_ref)
                locs.setdefault(("node", p.leaf_ref), (p.tok.line, p.tok.column))
                spec = leaves.get(p.leaf_ref)
                if spec is None:
                    diags.append(Diagnostic("undeclared leaf", p.leaf_ref, f"leaf {p.leaf_ref!r} is not defined",
                                            line=p.tok.line, column=p.tok.column))
                    return TreeNode(p.leaf_ref, Kind.ACTION, clauses=(Clause(TRUE, (), Status.SUCCESS),))
                kind, clauses, ltok = spec
                locs[("node", p.leaf_ref)] = (ltok.line, ltok.column)
                return TreeNode(p.leaf_ref, kind, clauses=clauses)
            nm = p.name if p.name is not None else fresh(p.tok.value if p.decorator is None else p.decorator)
            locs.setdefault(("node", nm), (p.tok.line, p.tok.column))
            kids = tuple(build(c) for c in p.children)
            return TreeNode(nm, p.kind, kids, memory=p.memory, decorator=p.decorator, decorator_map=p.decorator_map)

        root_node = build(root)
        cont_node = build(cont) if cont is not None else None
        for lname, (_, _, ltok) in leaves.items():
            if lname not in used_leaves:
                self.warnings.append(Diagnostic("unused leaf", lname, f"leaf {lname!r} is never referenced",
                                                severity="warning", line=ltok.line, column=ltok.column))
        sbt = SBT(root_node, tuple(bl), tuple(env), tuple(upd), cont_node, name)
        sbt = resolve_symbols(sbt)
        for d in validate(sbt):
            loc = locs.get(("node", d.subject)) or locs.get(("var", d.subject))
            if d.rule == "undeclared variable":
                loc = loc or locs.get(("node", d.subject))
            if loc is None:
                loc = (1, 1)
            diags.append(Diagnostic(d.rule, d.subject, d.message, d.severity, loc[0], loc[1]))
        if diags:
            raise ValidationError(diags + self.warnings)
        return ParsedTree(sbt, locs, list(self.warnings))

    # -- monitors -------------------------------------------------------------

    def monitor(self):
        self.expect("monitor")
        kind = self.ident("'esm', 'nfa' or 'ltl'")
        name = self.ident("monitor name").value
        if kind.value == "esm":
            return self._esm(name)
        if kind.value == "nfa":
            return self._nfa_monitor(name)
        if kind.value == "ltl":
            self.expect("{")
            f = self.formula()
            self.expect("}")
            return LTLMonitor(name, f)
        raise self.error("'esm'", "'nfa'", "'ltl'", tok=kind)

    def _esm(self, name):
        self.expect("{")
        variables, states, verdicts, init, trans = [], [], [], [], []
        rule = "universal"
        locs: dict = {}
        while not self.at("}"):
            if self.accept("vars"):
                self.expect("{")
                while not self.at("}"):
                    variables.append(self.decl(Owner.BLACKBOARD, locs))
                self.expect("}")
            elif self.accept("state"):
                s = self.ident("state name").value
                v = Verdict.NOMINAL
                if self.accept(":"):
                    w = self.ident("'nominal' or 'contingency'")
                    if w.value not in ("nominal", "contingency"):
                        raise self.error("'nominal'", "'contingency'", tok=w)
                    v = Verdict(w.value)
                self.expect(";")
                states.append(s)
                verdicts.append((s, v))
            elif self.accept("init"):
                init.append(self.ident("state name").value)
                while self.accept(","):
                    init.append(self.ident("state name").value)
                self.expect(";")
            elif self.accept("trans"):
                src = self.ident("state name").value
                self.expect("->")
                dst = self.ident("state name").value
                guard = self.expr() if self.accept("when") else TRUE
                ups = self.assigns() if self.accept("do") else ()
                self.expect(";")
                trans.append(ESMTransition(src, dst, guard, ups))
            elif self.accept("rule"):
                w = self.ident("'universal' or 'existential'")
                if w.value not in ("universal", "existential"):
                    raise self.error("'universal'", "'existential'", tok=w)
                rule = w.value
                self.expect(";")
            else:
                raise self.error("'vars'", "'state'", "'init'", "'trans'", "'rule'", "'}'")
        self.expect("}")
        return ESM(name, tuple(states), tuple(verdicts), tuple(init), tuple(trans), tuple(variables), rule)

    def _idents(self) -> list[str]:
        out = []
        if self.tok.kind == IDENT:
            out.append(self.advance().value)
            while self.accept(","):
                out.append(self.ident().value)
        return out

    def _nfa_monitor(self, name):
        self.expect("{")
        states, accept, trans = [], [], []
        init = None
        while not self.at("}"):
            if self.accept("states"):
                states.extend(self._idents())
                self.expect(";")
            elif self.accept("init"):
                init = self.ident("state name").value
                self.expect(";")
            elif self.accept("accept"):
                accept.extend(self._idents())
                self.expect(";")
            elif self.accept("trans"):
                src = self.ident("state name").value
                self.expect("->")
                dst = self.ident("state name").value
                self.expect("when")
                pred = self.expr()
                self.expect(";")
                trans.append(NFATransition(src, pred, dst))
            else:
                raise self.error("'states'", "'init'", "'accept'", "'trans'", "'}'")
        self.expect("}")
        if init is None:
            raise self.error(message="NFA monitor needs an init state")
        return NFAMonitor(name, tuple(states), init, frozenset(accept), tuple(trans))

    # -- specs and scenarios ---------------------------------------------------

    def spec(self) -> Spec:
        kw = self.advance().value
        name = self.ident().value if self.tok.kind == IDENT else None
        self.expect("{")
        if kw == "ltl":
            f = self.formula()
            self.expect("}")
            return Spec("ltl", name, formula=f)
        e = self.expr()
        self.expect("}")
        return Spec("invar", name, predicate=e)

    def scenario(self) -> Scenario:
        self.expect("scenario")
        name = self.ident().value if self.tok.kind == IDENT else None
        self.expect("{")
        init, overrides, choices = [], [], []
        while not self.at("}"):
            if self.accept("init"):
                self.expect(":")
                init.extend(self._const_assigns())
                self.expect(";")
            elif self.accept("at"):
                k = self.integer()
                self.expect(":")
                overrides.append((k, tuple(self._const_assigns())))
                self.expect(";")
            elif self.accept("choices"):
                k = self.integer()
                self.expect(":")
                vec = []
                if self.tok.kind == INT:
                    vec.append(self.integer())
                    while self.accept(","):
                        vec.append(self.integer())
                self.expect(";")
                choices.append((k, tuple(vec)))
            else:
                raise self.error("'init'", "'at'", "'choices'", "'}'")
        self.expect("}")
        return Scenario(name, tuple(init), tuple(overrides), tuple(choices))

    def _const_assigns(self):
        out = []
        while True:
            target = self.ident("variable name").value
            self.expect(":=")
            out.append((target, self.value()))
            if not self.accept(","):
                return out

    # -- construction inputs ---------------------------------------------------

    def _symbol(self) -> str:
        t = self.tok
        if t.kind in (IDENT, INT):
            self.advance()
            return t.value
        raise self.error("symbol")

    def _symbols(self) -> list[str]:
        out = []
        while self.tok.kind in (IDENT, INT):
            out.append(self.advance().value)
            if not self.accept(","):
                break
        return out

    def nfa_def(self):
        from ..expressiveness import NFA
        self.expect("nfa")
        name = self.ident().value
        self.expect("{")
        alphabet, states, accept, trans, words = [], [], [], [], []
        init = None
        while not self.at("}"):
            if self.accept("alphabet"):
                alphabet.extend(self._symbols())
            elif self.accept("states"):
                states.extend(self._idents())
            elif self.accept("init"):
                init = self.ident("state name").value
            elif self.accept("accept"):
                accept.extend(self._idents())
            elif self.accept("trans"):
                src = self.ident("state name").value
                sym = self._symbol()
                self.expect("->")
                trans.append((src, sym, self.ident("state name").value))
            elif self.accept("word"):
                w = []
                while self.tok.kind in (IDENT, INT):
                    w.append(self.advance().value)
                words.append(tuple(w))
            else:
                raise self.error("'alphabet'", "'states'", "'init'", "'accept'", "'trans'", "'word'", "'}'")
            self.expect(";")
        self.expect("}")
        if init is None:
            raise self.error(message="NFA needs an init state")
        return NFA(name, tuple(alphabet), tuple(states), init, frozenset(accept), tuple(trans), tuple(words))

    def ntm_def(self):
        from ..expressiveness import NTMSpec
        self.expect("ntm")
        name = self.ident().value
        self.expect("{")
        alphabet, states, accept, trans, tape = [], [], [], [], []
        init = blank = None
        bound = 8
        while not self.at("}"):
            if self.accept("alphabet"):
                alphabet.extend(self._symbols())
            elif self.accept("blank"):
                blank = self._symbol()
            elif self.accept("states"):
                states.extend(self._idents())
            elif self.accept("init"):
                init = self.ident("state name").value
            elif self.accept("accept"):
                accept.extend(self._idents())
            elif self.accept("trans"):
                q = self.ident("state name").value
                a = self._symbol()
                self.expect("->")
                q2 = self.ident("state name").value
                b = self._symbol()
                mv = self.ident("'L' or 'R'")
                if mv.value not in ("L", "R"):
                    raise self.error("'L'", "'R'", tok=mv)
                trans.append((q, a, q2, b, mv.value))
            elif self.accept("input"):
                while self.tok.kind in (IDENT, INT):
                    tape.append(self.advance().value)
            elif self.accept("bound"):
                bound = self.integer()
            else:
                raise self.error("'alphabet'", "'blank'", "'states'", "'init'", "'accept'", "'trans'",
                                 "'input'", "'bound'", "'}'")
            self.expect(";")
        self.expect("}")
        if init is None or blank is None:
            raise self.error(message="NTM needs init and blank")
        return NTMSpec(name, tuple(states), frozenset(accept), tuple(alphabet), blank, tuple(trans), init,
                       tuple(tape), bound)

    # -- files -----------------------------------------------------------------

    def items(self) -> list:
        out = []
        while self.tok.kind != EOF:
            t = self.tok
            if t.kind != IDENT:
                raise self.error("'tree'", "'monitor'", "'ltl'", "'invar'", "'scenario'", "'nfa'", "'ntm'")
            if t.value == "tree":
                out.append(self.tree())
            elif t.value == "monitor":
                out.append(self.monitor())
            elif t.value in ("ltl", "invar"):
                out.append(self.spec())
            elif t.value == "scenario":
                out.append(self.scenario())
            elif t.value == "nfa":
                out.append(self.nfa_def())
            elif t.value == "ntm":
                out.append(self.ntm_def())
            else:
                raise self.error("'tree'", "'monitor'", "'ltl'", "'invar'", "'scenario'", "'nfa'", "'ntm'")
        return out

    def finish(self):
        if self.tok.kind != EOF:
            raise self.error("end of input")


# ---------------------------------------------------------------------------
# symbol resolution


def _resolve_expr(e: Expr, symbols: set, variables: set) -> Expr:
    if isinstance(e, Var):
        if e.name not in variables and e.name in symbols:
            return Const(e.name)
        return e
    if isinstance(e, Unary):
        return Unary(e.op, _resolve_expr(e.arg, symbols, variables))
    if isinstance(e, Binary):
        return Binary(e.op, _resolve_expr(e.left, symbols, variables), _resolve_expr(e.right, symbols, variables))
    if isinstance(e, Call):
        return Call(e.fn, tuple(_resolve_expr(a, symbols, variables) for a in e.args))
    if isinstance(e, Ite):
        return Ite(*(_resolve_expr(x, symbols, variables) for x in (e.cond, e.then, e.other)))
    return e


def _resolve_writes(writes, symbols, variables):
    out = []
    for w in writes:
        if isinstance(w.value, Choice):
            out.append(Assign(w.target, Choice(tuple(_resolve_expr(o, symbols, variables) for o in w.value.options))))
        else:
            out.append(Assign(w.target, _resolve_expr(w.value, symbols, variables)))
    return tuple(out)


def _resolve_clause(c, symbols, variables):
    return Clause(_resolve_expr(c.guard, symbols, variables), _resolve_writes(c.writes, symbols, variables), c.status)


def resolve_symbols(sbt: SBT) -> SBT:
    """Turn identifiers naming enumeration symbols (not variables) into constants."""
    symbols = {s for d in sbt.variables if isinstance(d.domain, EnumDomain) for s in d.domain.symbols}
    variables = {d.name for d in sbt.variables}
    if not symbols:
        return sbt

    def fix(n: TreeNode) -> TreeNode:
        if n.kind.is_leaf:
            return TreeNode(n.name, n.kind, (), n.memory, n.decorator, n.decorator_map,
                            tuple(_resolve_clause(c, symbols, variables) for c in n.clauses))
        return TreeNode(n.name, n.kind, tuple(fix(c) for c in n.children), n.memory, n.decorator, n.decorator_map)

    return SBT(fix(sbt.root), sbt.blackboard, sbt.environment,
               tuple(_resolve_clause(c, symbols, variables) for c in sbt.env_update),
               fix(sbt.contingency) if sbt.contingency is not None else None, sbt.name)


def resolve_expr(e: Expr, sbt: SBT, extra_vars=()) -> Expr:
    symbols = {s for d in sbt.variables if isinstance(d.domain, EnumDomain) for s in d.domain.symbols}
    variables = {d.name for d in sbt.variables} | set(extra_vars)
    return _resolve_expr(e, symbols, variables)


# ---------------------------------------------------------------------------
# public entry points


def _text(src) -> str:
    if isinstance(src, SourceFile):
        return src.text
    return decode(src)


def parse_items(src) -> list:
    p = Parser(_text(src))
    try:
        return p.items()
    except RecursionError:
        t = p.tok
        raise ParseError(t.line, t.column, (), t.describe(), "nesting too deep") from None


def parse_tree_full(src) -> ParsedTree:
    p = Parser(_text(src))
    try:
        if not p.at("tree"):
            raise p.error("'tree'")
        parsed = p.tree()
        p.finish()
    except RecursionError:
        t = p.tok
        raise ParseError(t.line, t.column, (), t.describe(), "nesting too deep") from None
    return parsed


def parse_tree(src) -> SBT:
    """Parse a ``tree { ... }`` file.  Raises ParseError or ValidationError."""
    return parse_tree_full(src).sbt


def parse_monitor(src):
    """Parse a monitor file: ``monitor esm|nfa|ltl ...`` or a bare ``ltl { ... }`` block."""
    items = parse_items(src)
    for it in items:
        if isinstance(it, (ESM, NFAMonitor, LTLMonitor)):
            return it
        if isinstance(it, Spec) and it.kind == "ltl":
            return LTLMonitor(it.name or "ltl", it.formula)
    raise ParseError(1, 1, ("'monitor'", "'ltl'"), "no monitor definition")


def parse_specs(src) -> list[Spec]:
    items = parse_items(src)
    specs = [it for it in items if isinstance(it, Spec)]
    if not specs:
        raise ParseError(1, 1, ("'ltl'", "'invar'"), "no specification")
    return specs


def parse_scenario(src) -> Scenario:
    for it in parse_items(src):
        if isinstance(it, Scenario):
            return it
    raise ParseError(1, 1, ("'scenario'",), "no scenario definition")


def parse_formula(text: str) -> ltl.Formula:
    p = Parser(_text(text))
    try:
        f = p.formula()
        p.finish()
    except RecursionError:
        raise ParseError(1, 1, (), "input", "nesting too deep") from None
    return f


def parse_expr(text: str) -> Expr:
    p = Parser(_text(text))
    try:
        e = p.expr()
        p.finish()
    except RecursionError:
        raise ParseError(1, 1, (), "input", "nesting too deep") from None
    return e


def monitor_warnings(mon) -> list[Diagnostic]:
    from ..monitors import check_monitor
    return [d for d in check_monitor(mon) if d.severity == "warning"]


def all_node_names(sbt: SBT) -> list[str]:
    return [n.name for r in sbt.roots() for n in iter_nodes(r)]


__all__ = [
    "ParseError", "ValidationError", "SourceFile", "Parser", "parse_tree", "parse_tree_full",
    "parse_monitor", "parse_specs", "parse_scenario", "parse_formula", "parse_expr", "parse_items",
    "resolve_symbols", "resolve_expr", "BoolDomain",
]
