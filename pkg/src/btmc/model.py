"""Domain types for synchronous behavior trees and their well-formedness checks."""
from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field, replace
from typing import Any, Iterator, Sequence

from .expr import (
    ARITH_OPS, BOOL_OPS, CMP_OPS, FUNCTIONS, Binary, Call, Const, Expr, Ite, Next,
    Status, StatusOf, Unary, Var,
)


class Owner(enum.Enum):
    BLACKBOARD = "blackboard"
    ENVIRONMENT = "environment"


class Kind(enum.Enum):
    SELECTOR = "sel"
    SEQUENCE = "seq"
    PARALLEL_ALL = "par_all"
    PARALLEL_ONE = "par_one"
    DECORATOR = "decorator"
    ACTION = "action"
    CHECK = "check"

    @property
    def is_composite(self) -> bool:
        return self in _COMPOSITES

    @property
    def is_leaf(self) -> bool:
        return self in (Kind.ACTION, Kind.CHECK)


_COMPOSITES = {Kind.SELECTOR, Kind.SEQUENCE, Kind.PARALLEL_ALL, Kind.PARALLEL_ONE}


# ---------------------------------------------------------------------------
# domains


@dataclass(frozen=True)
class IntRange:
    lo: int
    hi: int

    @property
    def values(self) -> tuple:
        return tuple(range(self.lo, self.hi + 1))

    def __contains__(self, v) -> bool:
        return isinstance(v, int) and not isinstance(v, bool) and self.lo <= v <= self.hi

    def __len__(self) -> int:
        return max(0, self.hi - self.lo + 1)


@dataclass(frozen=True)
class BoolDomain:
    @property
    def values(self) -> tuple:
        return (False, True)

    def __contains__(self, v) -> bool:
        return isinstance(v, bool)

    def __len__(self) -> int:
        return 2


@dataclass(frozen=True)
class EnumDomain:
    symbols: tuple

    @property
    def values(self) -> tuple:
        return self.symbols

    def __contains__(self, v) -> bool:
        return not isinstance(v, (bool, int)) and v in self.symbols

    def __len__(self) -> int:
        return len(self.symbols)


Domain = IntRange | BoolDomain | EnumDomain
BOOL = BoolDomain()
STATUS_DOMAIN = EnumDomain((Status.INVALID, Status.FAILURE, Status.RUNNING, Status.SUCCESS))


@dataclass(frozen=True)
class VarDecl:
    name: str
    domain: Domain
    initial: tuple
    owner: Owner = Owner.BLACKBOARD


# ---------------------------------------------------------------------------
# leaves and update relations


@dataclass(frozen=True)
class Choice:
    """Nondeterministic right-hand side; one ChoiceVector entry picks an option."""

    options: tuple


@dataclass(frozen=True)
class Assign:
    target: str
    value: Expr | Choice


@dataclass(frozen=True)
class Clause:
    guard: Expr
    writes: tuple = ()
    status: Status | None = None


@dataclass(frozen=True)
class TreeNode:
    name: str
    kind: Kind
    children: tuple = ()
    memory: bool = False
    decorator: str | None = None
    decorator_map: tuple = ()
    clauses: tuple = ()

    def remap(self, status: Status) -> Status:
        return dict(self.decorator_map)[status]


def decorator_map_for(label: str) -> tuple:
    """Status remap for a named decorator (``inv`` or ``X_is_Y``)."""
    if label == "inv":
        m = {Status.FAILURE: Status.SUCCESS, Status.RUNNING: Status.RUNNING, Status.SUCCESS: Status.FAILURE}
    else:
        words = {"success": Status.SUCCESS, "failure": Status.FAILURE, "running": Status.RUNNING}
        try:
            x, y = label.split("_is_")
            src, dst = words[x], words[y]
        except (ValueError, KeyError):
            raise ValueError(f"unknown decorator {label!r}") from None
        m = {s: s for s in words.values()}
        m[src] = dst
    return tuple(sorted(m.items(), key=lambda kv: kv[0].value))


NAMED_DECORATORS = ("inv",) + tuple(
    f"{x}_is_{y}" for x, y in itertools.permutations(("success", "failure", "running"), 2)
)


@dataclass(frozen=True)
class SBT:
    root: TreeNode
    blackboard: tuple = ()
    environment: tuple = ()
    env_update: tuple = ()
    contingency: TreeNode | None = None
    name: str = "tree"

    @property
    def variables(self) -> tuple:
        return self.blackboard + self.environment

    def decl(self, name: str) -> VarDecl:
        for d in self.variables:
            if d.name == name:
                return d
        raise KeyError(name)

    def roots(self) -> tuple:
        return (self.root,) if self.contingency is None else (self.root, self.contingency)

    def with_root(self, root: TreeNode) -> "SBT":
        return replace(self, root=root, contingency=None)


def iter_nodes(node: TreeNode) -> Iterator[TreeNode]:
    """Left-to-right preorder."""
    stack = [node]
    while stack:
        cur = stack.pop()
        yield cur
        stack.extend(reversed(cur.children))


# ---------------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class Diagnostic:
    rule: str
    subject: str
    message: str
    severity: str = "error"
    line: int | None = None
    column: int | None = None

    def __str__(self) -> str:
        loc = f"{self.line}:{self.column}: " if self.line is not None else ""
        return f"{loc}{self.severity}: {self.rule}: {self.message}"


class Scope:
    """Type environment for expressions: variables, node statuses, extra names."""

    def __init__(self, decls: Sequence[VarDecl] = (), nodes: Sequence[str] = (), extra: dict | None = None):
        self.domains: dict[str, Domain] = {d.name: d.domain for d in decls}
        if extra:
            self.domains.update(extra)
        self.nodes = set(nodes)

    def type_of(self, name: str):
        dom = self.domains.get(name)
        if dom is None:
            return None
        return domain_type(dom)


def domain_type(dom: Domain):
    if isinstance(dom, IntRange):
        return "int"
    if isinstance(dom, BoolDomain):
        return "bool"
    return ("enum", frozenset(dom.symbols))


def _value_type(v):
    if isinstance(v, bool):
        return "bool"
    if isinstance(v, int):
        return "int"
    if isinstance(v, Status):
        return "status"
    return ("sym", v)


def _compatible(a, b) -> bool:
    if a == b:
        return True
    for x, y in ((a, b), (b, a)):
        if isinstance(x, tuple) and isinstance(y, tuple):
            if x[0] == "sym" and y[0] == "enum" and x[1] in y[1]:
                return True
            if x[0] == "sym" and y[0] == "sym":
                return True
            if x[0] == "enum" and y[0] == "enum" and x[1] & y[1]:
                return True
    return False


class ExprTypeError(Exception):
    pass


def expr_type(e: Expr, scope: Scope, allow_next: bool = False):
    """Type of ``e`` under ``scope``; raises ExprTypeError with a readable message."""
    if isinstance(e, Const):
        return _value_type(e.value)
    if isinstance(e, (Var, Next)):
        if isinstance(e, Next) and not allow_next:
            raise ExprTypeError(f"next({e.name}) not allowed here")
        t = scope.type_of(e.name)
        if t is None:
            raise ExprTypeError(f"undeclared variable {e.name!r}")
        return t
    if isinstance(e, StatusOf):
        if e.node not in scope.nodes:
            raise ExprTypeError(f"unknown node {e.node!r} in status query")
        return "status"
    if isinstance(e, Unary):
        t = expr_type(e.arg, scope, allow_next)
        want = "bool" if e.op == "!" else "int"
        if t != want:
            raise ExprTypeError(f"operator {e.op!r} expects {want}")
        return want
    if isinstance(e, Binary):
        a = expr_type(e.left, scope, allow_next)
        b = expr_type(e.right, scope, allow_next)
        if e.op in ARITH_OPS:
            if a != "int" or b != "int":
                raise ExprTypeError(f"operator {e.op!r} expects integers")
            return "int"
        if e.op in BOOL_OPS:
            if a != "bool" or b != "bool":
                raise ExprTypeError(f"operator {e.op!r} expects booleans")
            return "bool"
        if e.op in CMP_OPS:
            if e.op in ("==", "!="):
                if not _compatible(a, b):
                    raise ExprTypeError(f"cannot compare {_tname(a)} with {_tname(b)}")
            elif a != "int" or b != "int":
                raise ExprTypeError(f"operator {e.op!r} expects integers")
            return "bool"
        raise ExprTypeError(f"unknown operator {e.op!r}")
    if isinstance(e, Call):
        if FUNCTIONS.get(e.fn) != len(e.args):
            raise ExprTypeError(f"bad call {e.fn}/{len(e.args)}")
        for a in e.args:
            if expr_type(a, scope, allow_next) != "int":
                raise ExprTypeError(f"{e.fn} expects integers")
        return "int"
    if isinstance(e, Ite):
        if expr_type(e.cond, scope, allow_next) != "bool":
            raise ExprTypeError("ite condition must be boolean")
        a = expr_type(e.then, scope, allow_next)
        b = expr_type(e.other, scope, allow_next)
        if not _compatible(a, b):
            raise ExprTypeError("ite branches disagree in type")
        return a
    raise ExprTypeError(f"not an expression: {e!r}")


def _tname(t) -> str:
    if isinstance(t, tuple):
        return "symbol" if t[0] == "sym" else "enumeration"
    return t


def check_value_fits(value_type, dom: Domain) -> bool:
    return _compatible(value_type, domain_type(dom))


def _check_expr(diags, e, scope, subject, rule, want=None):
    try:
        t = expr_type(e, scope)
    except ExprTypeError as exc:
        rule_name = "undeclared variable" if "undeclared" in str(exc) else rule
        diags.append(Diagnostic(rule_name, subject, str(exc)))
        return None
    if want is not None and t != want:
        diags.append(Diagnostic(rule, subject, f"expected {want} expression, got {_tname(t)}"))
    return t


def _check_writes(diags, writes, scope, decls_by_name, subject, allowed_owner):
    seen = set()
    for w in writes:
        d = decls_by_name.get(w.target)
        if d is None:
            diags.append(Diagnostic("undeclared variable", subject, f"write to undeclared variable {w.target!r}"))
            continue
        if d.owner is not allowed_owner:
            what = "blackboard" if allowed_owner is Owner.BLACKBOARD else "environment"
            diags.append(Diagnostic(f"writes {what} only", subject,
                                    f"{subject} may not write {d.owner.value} variable {w.target!r}"))
        if w.target in seen:
            diags.append(Diagnostic("duplicate write", subject, f"{w.target!r} written twice in one clause"))
        seen.add(w.target)
        options = w.value.options if isinstance(w.value, Choice) else (w.value,)
        if isinstance(w.value, Choice) and not options:
            diags.append(Diagnostic("empty choice", subject, "choice needs at least one option"))
        for opt in options:
            t = _check_expr(diags, opt, scope, subject, "type")
            if t is not None and not check_value_fits(t, d.domain):
                diags.append(Diagnostic("type", subject, f"value for {w.target!r} has wrong type"))


def validate(sbt: SBT) -> list[Diagnostic]:
    """All well-formedness violations; empty iff the tree is valid."""
    diags: list[Diagnostic] = []
    decls = sbt.variables
    by_name: dict[str, VarDecl] = {}
    for d in decls:
        if d.name in by_name:
            diags.append(Diagnostic("duplicate variable", d.name, f"variable {d.name!r} declared twice"))
        by_name[d.name] = d
        if len(d.domain) == 0:
            diags.append(Diagnostic("empty domain", d.name, f"domain of {d.name!r} is empty"))
        if not d.initial:
            diags.append(Diagnostic("initial value", d.name, f"{d.name!r} has no initial value"))
        for v in d.initial:
            if v not in d.domain:
                diags.append(Diagnostic("initial value", d.name, f"initial value {v!r} outside domain of {d.name!r}"))
    for d in sbt.blackboard:
        if d.owner is not Owner.BLACKBOARD:
            diags.append(Diagnostic("owner", d.name, f"{d.name!r} listed as blackboard but owned by environment"))
    for d in sbt.environment:
        if d.owner is not Owner.ENVIRONMENT:
            diags.append(Diagnostic("owner", d.name, f"{d.name!r} listed as environment but owned by blackboard"))
    symbols = {s for d in decls if isinstance(d.domain, EnumDomain) for s in d.domain.symbols}
    for s in sorted(symbols & set(by_name), key=str):
        diags.append(Diagnostic("symbol clash", s, f"enumeration symbol {s!r} is also a variable name"))

    names: set[str] = set()
    nodes = [n for r in sbt.roots() for n in iter_nodes(r)]
    for n in nodes:
        if n.name in names:
            diags.append(Diagnostic("duplicate node", n.name, f"node name {n.name!r} used twice"))
        names.add(n.name)
    scope = Scope(decls, names)

    for n in nodes:
        k = n.kind
        if k.is_composite and not n.children:
            diags.append(Diagnostic("composite arity", n.name, f"composite {n.name!r} needs at least one child"))
        if k is Kind.DECORATOR:
            if len(n.children) != 1:
                diags.append(Diagnostic("decorator arity", n.name,
                                        f"decorator {n.name!r} has {len(n.children)} children, needs exactly 1"))
            keys = {s for s, _ in n.decorator_map}
            outs = [t for _, t in n.decorator_map]
            if keys != {Status.FAILURE, Status.RUNNING, Status.SUCCESS}:
                diags.append(Diagnostic("decorator map", n.name, "decorator map must be total on F, R, S"))
            if Status.INVALID in outs:
                diags.append(Diagnostic("decorator map", n.name, "decorator map may not output Invalid"))
        if k.is_leaf:
            if n.children:
                diags.append(Diagnostic("leaf arity", n.name, f"leaf {n.name!r} cannot have children"))
            if not n.clauses:
                diags.append(Diagnostic("leaf clauses", n.name, f"leaf {n.name!r} has no clauses"))
            for c in n.clauses:
                _check_expr(diags, c.guard, scope, n.name, "guard type", "bool")
                if c.status is None or c.status is Status.INVALID:
                    diags.append(Diagnostic("leaf status", n.name, f"leaf {n.name!r} clause must return F, R or S"))
                if k is Kind.CHECK and c.writes:
                    diags.append(Diagnostic("check must be read-only", n.name,
                                            f"check {n.name!r} writes {', '.join(w.target for w in c.writes)}"))
                elif c.writes:
                    _check_writes(diags, c.writes, scope, by_name, n.name, Owner.BLACKBOARD)
        elif n.clauses:
            diags.append(Diagnostic("clauses on composite", n.name, f"only leaves carry clauses ({n.name!r})"))
        if n.memory and not k.is_composite:
            diags.append(Diagnostic("memory flag", n.name, f"memory flag not valid on {k.value} {n.name!r}"))

    for i, c in enumerate(sbt.env_update):
        subject = f"update clause {i + 1}"
        _check_expr(diags, c.guard, Scope(decls), subject, "guard type", "bool")
        if c.status is not None:
            diags.append(Diagnostic("update status", subject, "environment update clauses return no status"))
        _check_writes(diags, c.writes, Scope(decls), by_name, subject, Owner.ENVIRONMENT)
    return diags


# ---------------------------------------------------------------------------
# node index


@dataclass(frozen=True)
class NodeIndex:
    by_name: dict
    parent: dict
    depth: dict
    preorder: tuple
    position: dict = field(default_factory=dict)


def node_index(sbt: SBT) -> NodeIndex:
    """Name lookup, parent table, depths and preorder over every root of ``sbt``."""
    by_name, parent, depth, order = {}, {}, {}, []
    for root in sbt.roots():
        stack = [(root, None, 0)]
        while stack:
            node, par, d = stack.pop()
            if node.name in by_name:
                raise ValueError(f"duplicate node name {node.name!r}")
            by_name[node.name] = node
            parent[node.name] = par
            depth[node.name] = d
            order.append(node.name)
            for ch in reversed(node.children):
                stack.append((ch, node.name, d + 1))
    return NodeIndex(by_name, parent, depth, tuple(order), {n: i for i, n in enumerate(order)})


def initial_valuations(decls: Sequence[VarDecl]) -> list[dict]:
    """Every admissible initial valuation, in declaration-major lexicographic order."""
    names = [d.name for d in decls]
    return [dict(zip(names, combo)) for combo in itertools.product(*(d.initial for d in decls))]


def coerce(value: Any, dom: Domain) -> Any:
    """Saturate integers into range; other values must already be members."""
    if isinstance(dom, IntRange):
        if value < dom.lo:
            return dom.lo
        if value > dom.hi:
            return dom.hi
        return value
    return value
