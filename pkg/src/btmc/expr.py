"""Finite-domain expression language shared by leaves, monitors, specs and the IR.

Expressions are immutable and hashable so structural equality doubles as
round-trip equality.  Evaluation goes through :func:`compile_expr`, which turns
an expression into a Python closure over an environment mapping.

Environment keys are plain variable names; a node status query ``status(n)``
reads key ``"status.n"``, and ``Next(v)`` reads ``v`` from a second mapping of
already-assigned next-state values.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Any, Callable, Iterable, Mapping


class Status(enum.Enum):
    """Tick result of a node.  Order is for display only."""

    INVALID = "I"
    FAILURE = "F"
    RUNNING = "R"
    SUCCESS = "S"

    def __repr__(self) -> str:
        return f"Status.{self.name}"

    def __str__(self) -> str:
        return self.value

    @classmethod
    def parse(cls, text: str) -> "Status":
        return _STATUS_BY_LETTER[text]


_STATUS_BY_LETTER = {s.value: s for s in Status}

I, F, R, S = Status.INVALID, Status.FAILURE, Status.RUNNING, Status.SUCCESS


class EvalError(Exception):
    """Raised when an expression cannot be evaluated (bad operand, missing key)."""


class Expr:
    __slots__ = ()

    def __and__(self, other: "Expr") -> "Expr":
        return Binary("&", self, other)

    def __or__(self, other: "Expr") -> "Expr":
        return Binary("|", self, other)

    def __invert__(self) -> "Expr":
        return Unary("!", self)


@dataclass(frozen=True)
class Const(Expr):
    value: Any

    def __post_init__(self):
        # bool is an int subclass; keep True and 1 structurally distinct
        object.__setattr__(self, "_key", (type(self.value).__name__, self.value))

    def __eq__(self, other):
        return isinstance(other, Const) and self._key == other._key

    def __hash__(self):
        return hash(("Const", self._key))


@dataclass(frozen=True)
class Var(Expr):
    name: str


@dataclass(frozen=True)
class Next(Expr):
    """Value of ``name`` in the successor state (IR transition predicates only)."""

    name: str


@dataclass(frozen=True)
class StatusOf(Expr):
    node: str


@dataclass(frozen=True)
class Unary(Expr):
    op: str
    arg: Expr


@dataclass(frozen=True)
class Binary(Expr):
    op: str
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Call(Expr):
    fn: str
    args: tuple


@dataclass(frozen=True)
class Ite(Expr):
    cond: Expr
    then: Expr
    other: Expr


def _cache_hash(cls):
    plain = cls.__hash__

    def __hash__(self):
        h = self.__dict__.get("_h")
        if h is None:
            h = plain(self)
            object.__setattr__(self, "_h", h)
        return h

    cls.__hash__ = __hash__
    return cls


for _cls in (Unary, Binary, Call, Ite):
    _cache_hash(_cls)

TRUE = Const(True)
FALSE = Const(False)

ARITH_OPS = ("+", "-", "*", "/", "%")
CMP_OPS = ("==", "!=", "<", "<=", ">", ">=")
BOOL_OPS = ("&", "|", "->")
FUNCTIONS = {"abs": 1, "min": 2, "max": 2}


def status_key(node: str) -> str:
    return f"status.{node}"


# ---------------------------------------------------------------------------
# construction helpers


def conj(parts: Iterable[Expr]) -> Expr:
    out = [p for p in parts if p != TRUE]
    if any(p == FALSE for p in out):
        return FALSE
    if not out:
        return TRUE
    acc = out[0]
    for p in out[1:]:
        acc = Binary("&", acc, p)
    return acc


def disj(parts: Iterable[Expr]) -> Expr:
    out = [p for p in parts if p != FALSE]
    if any(p == TRUE for p in out):
        return TRUE
    if not out:
        return FALSE
    acc = out[0]
    for p in out[1:]:
        acc = Binary("|", acc, p)
    return acc


def neg(e: Expr) -> Expr:
    if e == TRUE:
        return FALSE
    if e == FALSE:
        return TRUE
    if isinstance(e, Unary) and e.op == "!":
        return e.arg
    return Unary("!", e)


def eq(a: Expr, b: Expr) -> Expr:
    return Binary("==", a, b)


def clamp(e: Expr, lo: int, hi: int) -> Expr:
    """Saturate ``e`` into ``lo..hi`` without duplicating it."""
    return Call("max", (Const(lo), Call("min", (Const(hi), e))))


# ---------------------------------------------------------------------------
# traversal


def children(e: Expr) -> tuple:
    if isinstance(e, Unary):
        return (e.arg,)
    if isinstance(e, Binary):
        return (e.left, e.right)
    if isinstance(e, Call):
        return e.args
    if isinstance(e, Ite):
        return (e.cond, e.then, e.other)
    return ()


def walk(e: Expr):
    stack = [e]
    while stack:
        cur = stack.pop()
        yield cur
        stack.extend(reversed(children(cur)))


def free_vars(e: Expr) -> set[str]:
    return {n.name for n in walk(e) if isinstance(n, Var)}


def status_refs(e: Expr) -> set[str]:
    return {n.node for n in walk(e) if isinstance(n, StatusOf)}


def next_refs(e: Expr) -> set[str]:
    return {n.name for n in walk(e) if isinstance(n, Next)}


def substitute(e: Expr, mapping: Mapping[str, Expr], nxt: Mapping[str, Expr] | None = None) -> Expr:
    """Replace ``Var``/``StatusOf`` (and optionally ``Next``) leaves, folding constants."""
    if isinstance(e, Var):
        return mapping.get(e.name, e)
    if isinstance(e, StatusOf):
        return mapping.get(status_key(e.node), e)
    if isinstance(e, Next):
        if nxt is not None and e.name in nxt:
            return nxt[e.name]
        return e
    if isinstance(e, Const):
        return e
    if isinstance(e, Unary):
        return fold(Unary(e.op, substitute(e.arg, mapping, nxt)))
    if isinstance(e, Binary):
        return fold(Binary(e.op, substitute(e.left, mapping, nxt), substitute(e.right, mapping, nxt)))
    if isinstance(e, Call):
        return fold(Call(e.fn, tuple(substitute(a, mapping, nxt) for a in e.args)))
    if isinstance(e, Ite):
        c = substitute(e.cond, mapping, nxt)
        if c == TRUE:
            return substitute(e.then, mapping, nxt)
        if c == FALSE:
            return substitute(e.other, mapping, nxt)
        return fold(Ite(c, substitute(e.then, mapping, nxt), substitute(e.other, mapping, nxt)))
    raise TypeError(f"not an expression: {e!r}")


def fold(e: Expr) -> Expr:
    """One level of constant folding and boolean simplification."""
    if isinstance(e, Unary):
        a = e.arg
        if isinstance(a, Const):
            return Const(_apply_unary(e.op, a.value))
        if e.op == "!" and isinstance(a, Unary) and a.op == "!":
            return a.arg
        return e
    if isinstance(e, Binary):
        lt, rt = e.left, e.right
        if isinstance(lt, Const) and isinstance(rt, Const):
            try:
                return Const(_apply_binary(e.op, lt.value, rt.value))
            except EvalError:
                return e
        op = e.op
        if op == "&":
            if lt == FALSE or rt == FALSE:
                return FALSE
            if lt == TRUE:
                return rt
            if rt == TRUE:
                return lt
        elif op == "|":
            if lt == TRUE or rt == TRUE:
                return TRUE
            if lt == FALSE:
                return rt
            if rt == FALSE:
                return lt
        elif op == "->":
            if lt == FALSE or rt == TRUE:
                return TRUE
            if lt == TRUE:
                return rt
        elif op in ("==", "<=", ">=") and lt == rt:
            return TRUE
        elif op in ("!=", "<", ">") and lt == rt:
            return FALSE
        return e
    if isinstance(e, Call):
        if all(isinstance(a, Const) for a in e.args):
            return Const(_apply_call(e.fn, [a.value for a in e.args]))
        return e
    if isinstance(e, Ite):
        if e.cond == TRUE:
            return e.then
        if e.cond == FALSE:
            return e.other
        if e.then == e.other:
            return e.then
        return e
    return e


# ---------------------------------------------------------------------------
# evaluation


def _div(a, b):
    if b == 0:
        raise EvalError("division by zero")
    q = abs(a) // abs(b)
    return q if (a >= 0) == (b >= 0) else -q


def _mod(a, b):
    if b == 0:
        raise EvalError("division by zero")
    return a - b * _div(a, b)


def _apply_unary(op, v):
    if op == "!":
        return not v
    if op == "-":
        return -v
    raise EvalError(f"unknown unary operator {op!r}")


def _apply_binary(op, a, b):
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if op == "/":
        return _div(a, b)
    if op == "%":
        return _mod(a, b)
    if op == "==":
        return a == b
    if op == "!=":
        return a != b
    if op == "<":
        return a < b
    if op == "<=":
        return a <= b
    if op == ">":
        return a > b
    if op == ">=":
        return a >= b
    if op == "&":
        return bool(a) and bool(b)
    if op == "|":
        return bool(a) or bool(b)
    if op == "->":
        return (not a) or bool(b)
    raise EvalError(f"unknown binary operator {op!r}")


def _apply_call(fn, args):
    if fn == "abs":
        return abs(args[0])
    if fn == "min":
        return min(args)
    if fn == "max":
        return max(args)
    raise EvalError(f"unknown function {fn!r}")


_PY_OPS = {
    "+": "+", "-": "-", "*": "*", "==": "==", "!=": "!=",
    "<": "<", "<=": "<=", ">": ">", ">=": ">=",
}


def _to_py(e: Expr, consts: dict) -> str:
    if isinstance(e, Const):
        v = e.value
        if isinstance(v, (bool, int)):
            return repr(v)
        name = f"_c{len(consts)}"
        consts[name] = v
        return name
    if isinstance(e, Var):
        return f"env[{e.name!r}]"
    if isinstance(e, StatusOf):
        return f"env[{status_key(e.node)!r}]"
    if isinstance(e, Next):
        return f"nxt[{e.name!r}]"
    if isinstance(e, Unary):
        inner = _to_py(e.arg, consts)
        return f"(not {inner})" if e.op == "!" else f"(-{inner})"
    if isinstance(e, Binary):
        a, b = _to_py(e.left, consts), _to_py(e.right, consts)
        op = e.op
        if op == "&":
            return f"({a} and {b})"
        if op == "|":
            return f"({a} or {b})"
        if op == "->":
            return f"((not {a}) or {b})"
        if op == "/":
            return f"_div({a}, {b})"
        if op == "%":
            return f"_mod({a}, {b})"
        return f"({a} {_PY_OPS[op]} {b})"
    if isinstance(e, Call):
        return f"{e.fn}({', '.join(_to_py(a, consts) for a in e.args)})"
    if isinstance(e, Ite):
        return f"({_to_py(e.then, consts)} if {_to_py(e.cond, consts)} else {_to_py(e.other, consts)})"
    raise TypeError(f"not an expression: {e!r}")


_COMPILED: dict[Expr, Callable] = {}


def compile_expr(e: Expr) -> Callable[..., Any]:
    """Compile to ``f(env, nxt=None)``.  Results are cached per expression."""
    fn = _COMPILED.get(e)
    if fn is not None:
        return fn
    consts: dict = {}
    body = _to_py(e, consts)
    ns = {"_div": _div, "_mod": _mod, "abs": abs, "min": min, "max": max, **consts}
    raw = eval(compile(f"lambda env, nxt=None: {body}", "<expr>", "eval"), ns)

    def fn(env, nxt=None, _raw=raw):
        try:
            return _raw(env, nxt)
        except KeyError as exc:
            raise EvalError(f"unbound name {exc.args[0]!r}") from None
        except (TypeError, ZeroDivisionError) as exc:
            raise EvalError(str(exc)) from None

    if len(_COMPILED) > 200_000:
        _COMPILED.clear()
    _COMPILED[e] = fn
    return fn


def evaluate(e: Expr, env: Mapping[str, Any], nxt: Mapping[str, Any] | None = None) -> Any:
    return compile_expr(e)(env, nxt)


# ---------------------------------------------------------------------------
# static integer ranges


def int_range(e: Expr, ranges: Mapping[str, tuple[int, int]]) -> tuple[int, int] | None:
    """Conservative interval of an integer expression, or None if unknown."""
    if isinstance(e, Const):
        v = e.value
        if isinstance(v, int) and not isinstance(v, bool):
            return (v, v)
        return None
    if isinstance(e, (Var, Next)):
        return ranges.get(e.name)
    if isinstance(e, Unary) and e.op == "-":
        r = int_range(e.arg, ranges)
        return None if r is None else (-r[1], -r[0])
    if isinstance(e, Binary) and e.op in ("+", "-", "*"):
        a, b = int_range(e.left, ranges), int_range(e.right, ranges)
        if a is None or b is None:
            return None
        if e.op == "+":
            return (a[0] + b[0], a[1] + b[1])
        if e.op == "-":
            return (a[0] - b[1], a[1] - b[0])
        prods = [x * y for x in a for y in b]
        return (min(prods), max(prods))
    if isinstance(e, Binary) and e.op in ("/", "%"):
        a, b = int_range(e.left, ranges), int_range(e.right, ranges)
        if a is None or b is None or b[0] <= 0 or a[0] < 0:
            return None
        if e.op == "/":
            return (a[0] // b[1], a[1] // b[0])
        return (0, min(a[1], b[1] - 1))
    if isinstance(e, Call):
        rs = [int_range(a, ranges) for a in e.args]
        if any(r is None for r in rs):
            return None
        if e.fn == "abs":
            lo, hi = rs[0]
            if lo >= 0:
                return (lo, hi)
            if hi <= 0:
                return (-hi, -lo)
            return (0, max(-lo, hi))
        if e.fn == "min":
            return (min(r[0] for r in rs), min(r[1] for r in rs))
        if e.fn == "max":
            return (max(r[0] for r in rs), max(r[1] for r in rs))
    if isinstance(e, Ite):
        a, b = int_range(e.then, ranges), int_range(e.other, ranges)
        if a is None or b is None:
            return None
        return (min(a[0], b[0]), max(a[1], b[1]))
    return None


# ---------------------------------------------------------------------------
# printing (DSL concrete syntax)

_PREC = {"->": 1, "|": 2, "&": 3, "==": 5, "!=": 5, "<": 5, "<=": 5, ">": 5, ">=": 5,
         "+": 6, "-": 6, "*": 7, "/": 7, "%": 7}


def format_value(v: Any) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, Status):
        return v.value
    return str(v)


def to_text(e: Expr, prec: int = 0) -> str:
    if isinstance(e, Const):
        s = format_value(e.value)
        if isinstance(e.value, int) and not isinstance(e.value, bool) and e.value < 0 and prec > 0:
            return f"({s})"
        return s
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Next):
        return f"next({e.name})"
    if isinstance(e, StatusOf):
        return f"status({e.node})"
    if isinstance(e, Unary):
        if e.op == "!":
            s = "!" + to_text(e.arg, 4)
            return f"({s})" if prec > 4 else s
        s = "-" + to_text(e.arg, 8)
        return f"({s})" if prec > 0 else s
    if isinstance(e, Binary):
        p = _PREC[e.op]
        if e.op == "->":
            s = f"{to_text(e.left, p + 1)} -> {to_text(e.right, p)}"
        elif p == 5:
            s = f"{to_text(e.left, p + 1)} {e.op} {to_text(e.right, p + 1)}"
        else:
            s = f"{to_text(e.left, p)} {e.op} {to_text(e.right, p + 1)}"
        return f"({s})" if prec > p else s
    if isinstance(e, Call):
        return f"{e.fn}({', '.join(to_text(a) for a in e.args)})"
    if isinstance(e, Ite):
        return f"ite({to_text(e.cond)}, {to_text(e.then)}, {to_text(e.other)})"
    raise TypeError(f"not an expression: {e!r}")
