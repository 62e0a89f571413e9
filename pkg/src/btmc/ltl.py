"""Linear temporal logic: syntax, lasso semantics, and tableau translation to Büchi automata.

Atoms are expressions from :mod:`btmc.expr`.  For abstract tests a plain string
``"p"`` stands for ``Var("p")``; a *letter* is the frozenset of atoms that hold.
"""
from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Sequence

from . import expr as ex
from .expr import Expr


class Formula:
    __slots__ = ()


@dataclass(frozen=True)
class Atom(Formula):
    expr: Expr


@dataclass(frozen=True)
class Not(Formula):
    arg: Formula


@dataclass(frozen=True)
class And(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Or(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Implies(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Next(Formula):
    arg: Formula


@dataclass(frozen=True)
class Until(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Release(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class StrongRelease(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Globally(Formula):
    arg: Formula


@dataclass(frozen=True)
class Finally(Formula):
    arg: Formula


TRUE = Atom(ex.TRUE)
FALSE = Atom(ex.FALSE)

_UNARY = (Not, Next, Globally, Finally)
_BINARY = (And, Or, Implies, Until, Release, StrongRelease)


def atom(name: str) -> Atom:
    return Atom(ex.Var(name))


def letter(*names: str) -> frozenset:
    return frozenset(ex.Var(n) for n in names)


def subformulas(f: Formula) -> list[Formula]:
    out, stack = [], [f]
    while stack:
        cur = stack.pop()
        out.append(cur)
        if isinstance(cur, _UNARY):
            stack.append(cur.arg)
        elif isinstance(cur, _BINARY):
            stack.extend((cur.right, cur.left))
    return out


def atoms(f: Formula) -> set[Expr]:
    return {g.expr for g in subformulas(f) if isinstance(g, Atom) and not isinstance(g.expr, ex.Const)}


def depth(f: Formula) -> int:
    if isinstance(f, Atom):
        return 0
    if isinstance(f, _UNARY):
        return 1 + depth(f.arg)
    return 1 + max(depth(f.left), depth(f.right))


def from_expr(e: Expr) -> Formula:
    """Lift the boolean skeleton of an expression into formula connectives."""
    if isinstance(e, ex.Binary) and e.op in ("&", "|", "->"):
        cls = {"&": And, "|": Or, "->": Implies}[e.op]
        return cls(from_expr(e.left), from_expr(e.right))
    if isinstance(e, ex.Unary) and e.op == "!":
        return Not(from_expr(e.arg))
    return Atom(e)


def map_atoms(f: Formula, fn) -> Formula:
    """Rebuild ``f`` with every atom expression replaced by ``fn(expr)``."""
    if isinstance(f, Atom):
        return Atom(fn(f.expr))
    if isinstance(f, _UNARY):
        return type(f)(map_atoms(f.arg, fn))
    return type(f)(map_atoms(f.left, fn), map_atoms(f.right, fn))


def to_expr(f: Formula) -> Expr | None:
    """Inverse of :func:`from_expr` for temporal-free formulas; None otherwise."""
    if isinstance(f, Atom):
        return f.expr
    if isinstance(f, Not):
        a = to_expr(f.arg)
        return None if a is None else ex.Unary("!", a)
    if isinstance(f, (And, Or, Implies)):
        a, b = to_expr(f.left), to_expr(f.right)
        if a is None or b is None:
            return None
        return ex.Binary({And: "&", Or: "|", Implies: "->"}[type(f)], a, b)
    return None


# ---------------------------------------------------------------------------
# printing

_PREC = {Implies: 1, Or: 2, And: 3, Until: 4, StrongRelease: 4, Release: 4}
_SYM = {Implies: "->", Or: "|", And: "&", Until: "U", StrongRelease: "M", Release: "R"}
_USYM = {Not: "!", Next: "X", Globally: "G", Finally: "F"}


def to_text(f: Formula, prec: int = 0) -> str:
    """Concrete syntax accepted by the DSL parser."""
    if isinstance(f, Atom):
        return ex.to_text(f.expr, 5)
    if isinstance(f, _UNARY):
        sep = "" if isinstance(f, Not) else " "
        s = f"{_USYM[type(f)]}{sep}{to_text(f.arg, 5)}"
        return f"({s})" if prec > 5 else s
    p = _PREC[type(f)]
    if isinstance(f, (Implies, Until, StrongRelease, Release)):
        s = f"{to_text(f.left, p + 1)} {_SYM[type(f)]} {to_text(f.right, p)}"
    else:
        s = f"{to_text(f.left, p)} {_SYM[type(f)]} {to_text(f.right, p + 1)}"
    return f"({s})" if prec > p else s


# ---------------------------------------------------------------------------
# normal forms


def nnf(f: Formula) -> Formula:
    """Negation normal form over atoms, And, Or, Next, Until and Release."""
    return _nnf(f, False)


def _nnf(f: Formula, negated: bool) -> Formula:
    if isinstance(f, Atom):
        if f.expr == ex.TRUE:
            return FALSE if negated else TRUE
        if f.expr == ex.FALSE:
            return TRUE if negated else FALSE
        return Not(f) if negated else f
    if isinstance(f, Not):
        return _nnf(f.arg, not negated)
    if isinstance(f, And):
        cls = Or if negated else And
        return cls(_nnf(f.left, negated), _nnf(f.right, negated))
    if isinstance(f, Or):
        cls = And if negated else Or
        return cls(_nnf(f.left, negated), _nnf(f.right, negated))
    if isinstance(f, Implies):
        return _nnf(Or(Not(f.left), f.right), negated)
    if isinstance(f, Next):
        return Next(_nnf(f.arg, negated))
    if isinstance(f, Until):
        cls = Release if negated else Until
        return cls(_nnf(f.left, negated), _nnf(f.right, negated))
    if isinstance(f, Release):
        cls = Until if negated else Release
        return cls(_nnf(f.left, negated), _nnf(f.right, negated))
    if isinstance(f, StrongRelease):
        # a M b == b U (a & b)
        return _nnf(Until(f.right, And(f.left, f.right)), negated)
    if isinstance(f, Globally):
        return _nnf(Release(FALSE, f.arg), negated)
    if isinstance(f, Finally):
        return _nnf(Until(TRUE, f.arg), negated)
    raise TypeError(f"not a formula: {f!r}")


def without_strong_release(f: Formula) -> Formula:
    """Rewrite every ``a M b`` as ``b U (a & b)``, leaving other operators alone."""
    if isinstance(f, Atom):
        return f
    if isinstance(f, StrongRelease):
        a, b = without_strong_release(f.left), without_strong_release(f.right)
        return Until(b, And(a, b))
    if isinstance(f, _UNARY):
        return type(f)(without_strong_release(f.arg))
    return type(f)(without_strong_release(f.left), without_strong_release(f.right))


# ---------------------------------------------------------------------------
# lasso semantics (reference evaluator)


def _norm_letter(l) -> frozenset:
    return frozenset(ex.Var(a) if isinstance(a, str) else a for a in l)


def _holds_atom(e: Expr, l: frozenset) -> bool:
    if isinstance(e, ex.Const):
        return bool(e.value)
    return e in l


def ltl_eval_lasso(f: Formula, prefix: Sequence, cycle: Sequence) -> bool:
    """Truth of ``f`` at position 0 of the word prefix . cycle^omega."""
    if not cycle:
        raise ValueError("cycle must be non-empty")
    word = [_norm_letter(l) for l in list(prefix) + list(cycle)]
    n = len(word)
    loop = len(prefix)
    succ = [i + 1 if i + 1 < n else loop for i in range(n)]
    memo: dict[Formula, list[bool]] = {}

    def lfp(step):
        vals = [False] * n
        changed = True
        while changed:
            changed = False
            for i in reversed(range(n)):
                v = step(i, vals)
                if v != vals[i]:
                    vals[i] = v
                    changed = True
        return vals

    def gfp(step):
        vals = [True] * n
        changed = True
        while changed:
            changed = False
            for i in reversed(range(n)):
                v = step(i, vals)
                if v != vals[i]:
                    vals[i] = v
                    changed = True
        return vals

    def ev(g: Formula) -> list[bool]:
        got = memo.get(g)
        if got is not None:
            return got
        if isinstance(g, Atom):
            r = [_holds_atom(g.expr, word[i]) for i in range(n)]
        elif isinstance(g, Not):
            r = [not v for v in ev(g.arg)]
        elif isinstance(g, And):
            a, b = ev(g.left), ev(g.right)
            r = [x and y for x, y in zip(a, b)]
        elif isinstance(g, Or):
            a, b = ev(g.left), ev(g.right)
            r = [x or y for x, y in zip(a, b)]
        elif isinstance(g, Implies):
            a, b = ev(g.left), ev(g.right)
            r = [(not x) or y for x, y in zip(a, b)]
        elif isinstance(g, Next):
            a = ev(g.arg)
            r = [a[succ[i]] for i in range(n)]
        elif isinstance(g, Until):
            a, b = ev(g.left), ev(g.right)
            r = lfp(lambda i, v: b[i] or (a[i] and v[succ[i]]))
        elif isinstance(g, Release):
            a, b = ev(g.left), ev(g.right)
            r = gfp(lambda i, v: b[i] and (a[i] or v[succ[i]]))
        elif isinstance(g, StrongRelease):
            a, b = ev(g.left), ev(g.right)
            r = lfp(lambda i, v: b[i] and (a[i] or v[succ[i]]))
        elif isinstance(g, Globally):
            a = ev(g.arg)
            r = gfp(lambda i, v: a[i] and v[succ[i]])
        elif isinstance(g, Finally):
            a = ev(g.arg)
            r = lfp(lambda i, v: a[i] or v[succ[i]])
        else:
            raise TypeError(f"not a formula: {g!r}")
        memo[g] = r
        return r

    return ev(f)[0]


# ---------------------------------------------------------------------------
# Büchi automata


@dataclass(frozen=True)
class Transition:
    src: int
    pos: frozenset
    neg: frozenset
    dst: int

    def enabled(self, l: frozenset) -> bool:
        return self.pos <= l and not (self.neg & l)


@dataclass(frozen=True)
class BuchiAutomaton:
    """State-based Büchi automaton; letters are sets of true atoms."""

    states: tuple
    initial: int
    transitions: tuple
    accepting: frozenset
    atoms: frozenset

    def __post_init__(self):
        out: dict[int, list] = {q: [] for q in self.states}
        for t in self.transitions:
            out[t.src].append(t)
        object.__setattr__(self, "_out", out)

    def outgoing(self, q: int) -> list:
        return self._out[q]

    def successors(self, q: int, l: frozenset) -> list[int]:
        seen, res = set(), []
        for t in self._out[q]:
            if t.dst not in seen and t.enabled(l):
                seen.add(t.dst)
                res.append(t.dst)
        return res

    def live_states(self) -> frozenset:
        """States from which some accepting cycle is reachable (letters unconstrained)."""
        adj = {q: {t.dst for t in self._out[q]} for q in self.states}
        on_cycle = set()
        for f in self.accepting:
            if _reaches(adj, adj[f], f):
                on_cycle.add(f)
        radj: dict[int, set] = {q: set() for q in self.states}
        for q, ds in adj.items():
            for d in ds:
                radj[d].add(q)
        live = set(on_cycle)
        queue = deque(on_cycle)
        while queue:
            q = queue.popleft()
            for p in radj[q]:
                if p not in live:
                    live.add(p)
                    queue.append(p)
        return frozenset(live)


def _reaches(adj, starts, target) -> bool:
    seen = set(starts)
    queue = deque(starts)
    while queue:
        q = queue.popleft()
        if q == target:
            return True
        for d in adj[q]:
            if d not in seen:
                seen.add(d)
                queue.append(d)
    return False


@dataclass
class _Node:
    ident: int
    incoming: set
    new: set
    old: set
    nxt: set


def _is_literal(f: Formula) -> bool:
    return isinstance(f, Atom) or (isinstance(f, Not) and isinstance(f.arg, Atom))


def _contradicts(lit: Formula, old: set) -> bool:
    if lit == FALSE:
        return True
    if isinstance(lit, Not):
        return lit.arg in old
    return Not(lit) in old


def _tableau(f: Formula):
    """Gerth-Peled-Vardi-Wolper expansion; returns the list of completed nodes."""
    counter = itertools.count(1)
    done: list[_Node] = []
    stack = [_Node(next(counter), {0}, {f}, set(), set())]
    while stack:
        node = stack.pop()
        if not node.new:
            for nd in done:
                if nd.old == node.old and nd.nxt == node.nxt:
                    nd.incoming |= node.incoming
                    break
            else:
                done.append(node)
                stack.append(_Node(next(counter), {node.ident}, set(node.nxt), set(), set()))
            continue
        g = node.new.pop()
        if g in node.old:
            stack.append(node)
            continue
        if _is_literal(g):
            if _contradicts(g, node.old):
                continue
            if g != TRUE:
                node.old.add(g)
            stack.append(node)
        elif isinstance(g, And):
            node.old.add(g)
            node.new |= {g.left, g.right} - node.old
            stack.append(node)
        elif isinstance(g, Next):
            node.old.add(g)
            node.nxt.add(g.arg)
            stack.append(node)
        elif isinstance(g, (Or, Until, Release)):
            if isinstance(g, Or):
                n1_new, n1_next, n2_new = {g.left}, set(), {g.right}
            elif isinstance(g, Until):
                n1_new, n1_next, n2_new = {g.left}, {g}, {g.right}
            else:
                n1_new, n1_next, n2_new = {g.right}, {g}, {g.left, g.right}
            old = node.old | {g}
            n1 = _Node(next(counter), set(node.incoming), node.new | (n1_new - old), set(old), node.nxt | n1_next)
            n2 = _Node(next(counter), set(node.incoming), node.new | (n2_new - old), set(old), set(node.nxt))
            stack.append(n2)
            stack.append(n1)
        else:
            raise TypeError(f"formula not in negation normal form: {g!r}")
    return done


def ltl_to_buchi(f: Formula) -> BuchiAutomaton:
    """Büchi automaton accepting exactly the words satisfying ``f``."""
    g = nnf(f)
    nodes = _tableau(g)
    untils = [h for h in set(subformulas(g)) if isinstance(h, Until)]
    untils.sort(key=to_text)
    accept_sets = [{nd.ident for nd in nodes if u not in nd.old or u.right in nd.old} for u in untils]
    k = max(1, len(accept_sets))
    if not accept_sets:
        accept_sets = [{nd.ident for nd in nodes}]

    labels = {}
    for nd in nodes:
        pos = frozenset(h.expr for h in nd.old if isinstance(h, Atom) and h != TRUE)
        neg = frozenset(h.arg.expr for h in nd.old if isinstance(h, Not) and isinstance(h.arg, Atom))
        labels[nd.ident] = (pos, neg)

    # degeneralize: state (node, counter); counter advances when leaving a member of F_counter
    numbering: dict = {("init", 0): 0}
    trans = []
    queue = deque([("init", 0)])
    preds = {nd.ident: nd for nd in nodes}
    while queue:
        src_node, i = queue.popleft()
        src_id = numbering[(src_node, i)]
        if src_node == "init":
            j = 0
            src_key = 0
        else:
            j = (i + 1) % k if src_node in accept_sets[i] else i
            src_key = src_node
        for nd in nodes:
            if src_key in nd.incoming:
                key = (nd.ident, j)
                if key not in numbering:
                    numbering[key] = len(numbering)
                    queue.append(key)
                pos, neg = labels[nd.ident]
                trans.append(Transition(src_id, pos, neg, numbering[key]))
    del preds
    accepting = frozenset(num for (nd, i), num in numbering.items() if nd != "init" and i == 0 and nd in accept_sets[0])
    all_atoms = frozenset(a for t in trans for a in t.pos | t.neg)
    return BuchiAutomaton(tuple(range(len(numbering))), 0, tuple(trans), accepting, all_atoms)


def buchi_accepts_lasso(ba: BuchiAutomaton, prefix: Sequence, cycle: Sequence) -> bool:
    """Whether some run on prefix . cycle^omega visits an accepting state infinitely often."""
    if not cycle:
        raise ValueError("cycle must be non-empty")
    word = [_norm_letter(l) for l in list(prefix) + list(cycle)]
    n = len(word)
    loop = len(prefix)

    def succ(node):
        q, i = node
        j = i + 1 if i + 1 < n else loop
        return [(d, j) for d in ba.successors(q, word[i])]

    start = (ba.initial, 0)
    seen = {start}
    queue = deque([start])
    while queue:
        cur = queue.popleft()
        for d in succ(cur):
            if d not in seen:
                seen.add(d)
                queue.append(d)
    for node in seen:
        if node[0] in ba.accepting and node[1] >= loop:
            frontier = deque(succ(node))
            reach = set(frontier)
            while frontier:
                cur = frontier.popleft()
                if cur == node:
                    return True
                for d in succ(cur):
                    if d not in reach:
                        reach.add(d)
                        frontier.append(d)
    return False


def all_letters(names: Iterable[str]) -> list[frozenset]:
    names = list(names)
    return [frozenset(ex.Var(n) for n, keep in zip(names, bits) if keep)
            for bits in itertools.product((False, True), repeat=len(names))]
