"""Seeded random generators for trees, monitors, formulas and transition systems.

Every generated tree passes :func:`~btmc.model.validate`: leaves and the
environment update end in a catch-all clause, division only uses non-zero
constant divisors, and names avoid the language's reserved words.
"""
from __future__ import annotations

import random
from dataclasses import dataclass

from . import ltl
from .composition import TransitionSystem
from .expr import TRUE, Binary, Call, Const, Expr, Ite, Status, StatusOf, Unary, Var
from .model import (
    BOOL, SBT, Assign, Choice, Clause, EnumDomain, IntRange, Kind, Owner, TreeNode, VarDecl,
    decorator_map_for, NAMED_DECORATORS, validate,
)
from .monitors import ESM, ESMTransition, LTLMonitor, NFAMonitor, NFATransition, Verdict

LEAF_STATUSES = (Status.SUCCESS, Status.FAILURE, Status.RUNNING)
CHECK_STATUSES = (Status.SUCCESS, Status.FAILURE)


@dataclass
class TreeShape:
    """Size knobs for :func:`random_tree`."""

    max_blackboard: int = 3
    max_environment: int = 2
    max_leaves: int = 5
    max_depth: int = 3
    max_clauses: int = 3
    max_int: int = 3
    expr_depth: int = 2
    contingency: float = 0.4
    status_refs: bool = True


class _ExprGen:
    def __init__(self, rng: random.Random, decls, nodes=(), depth: int = 2):
        self.rng = rng
        self.decls = list(decls)
        self.nodes = list(nodes)
        self.depth = depth

    def ints(self):
        return [d for d in self.decls if isinstance(d.domain, IntRange)]

    def of_domain(self, dom, depth=None) -> Expr:
        if isinstance(dom, IntRange):
            return self.int(depth)
        if isinstance(dom, EnumDomain):
            same = [d for d in self.decls if d.domain == dom]
            if same and self.rng.random() < 0.4:
                return Var(self.rng.choice(same).name)
            return Const(self.rng.choice(dom.symbols))
        return self.bool(depth)

    def int(self, depth=None) -> Expr:
        r = self.rng
        depth = self.depth if depth is None else depth
        ints = self.ints()
        if depth <= 0 or r.random() < 0.35:
            if ints and r.random() < 0.6:
                return Var(r.choice(ints).name)
            return Const(r.randint(-1, 3))
        k = r.randrange(6)
        if k <= 2:
            return Binary(r.choice("+-*"), self.int(depth - 1), self.int(depth - 1))
        if k == 3:
            return Binary(r.choice(("/", "%")), self.int(depth - 1), Const(r.choice((1, 2, 3, -2))))
        if k == 4:
            fn = r.choice(("abs", "min", "max"))
            args = (self.int(depth - 1),) if fn == "abs" else (self.int(depth - 1), self.int(depth - 1))
            return Call(fn, args)
        return Ite(self.bool(depth - 1), self.int(depth - 1), self.int(depth - 1))

    def atom(self) -> Expr:
        r = self.rng
        choices = ["cmp"]
        if any(d.domain == BOOL for d in self.decls):
            choices.append("bool")
        if any(isinstance(d.domain, EnumDomain) for d in self.decls):
            choices.append("enum")
        if self.nodes:
            choices.append("status")
        k = r.choice(choices)
        if k == "bool":
            return Var(r.choice([d for d in self.decls if d.domain == BOOL]).name)
        if k == "enum":
            d = r.choice([d for d in self.decls if isinstance(d.domain, EnumDomain)])
            return Binary(r.choice(("==", "!=")), Var(d.name), Const(r.choice(d.domain.symbols)))
        if k == "status":
            return Binary(r.choice(("==", "!=")), StatusOf(r.choice(self.nodes)), Const(r.choice(list(Status))))
        return Binary(r.choice(("==", "!=", "<", "<=", ">", ">=")), self.int(1), self.int(0))

    def bool(self, depth=None) -> Expr:
        r = self.rng
        depth = self.depth if depth is None else depth
        if depth <= 0 or r.random() < 0.4:
            return self.atom() if r.random() < 0.9 else Const(r.random() < 0.5)
        k = r.randrange(4)
        if k == 0:
            return Unary("!", self.bool(depth - 1))
        return Binary(("&", "|", "->")[k - 1], self.bool(depth - 1), self.bool(depth - 1))


def _domain(rng: random.Random, shape: TreeShape, i: int):
    k = rng.randrange(3)
    if k == 0:
        lo = rng.choice((0, 0, -1))
        return IntRange(lo, lo + rng.randint(1, shape.max_int))
    if k == 1:
        return BOOL
    return EnumDomain(tuple(f"k{j}" for j in range(rng.randint(2, 3))))


def _clauses(rng, gen: _ExprGen, shape: TreeShape, writable, statuses, allow_choice=True):
    out = []
    for _ in range(rng.randint(0, shape.max_clauses - 1)):
        out.append(Clause(gen.bool(), _writes(rng, gen, writable, allow_choice), rng.choice(statuses)))
    out.append(Clause(TRUE, _writes(rng, gen, writable, allow_choice), rng.choice(statuses)))
    return tuple(out)


def _writes(rng, gen: _ExprGen, writable, allow_choice=True):
    if not writable:
        return ()
    targets = rng.sample(writable, rng.randint(0, min(2, len(writable))))
    out = []
    for d in targets:
        if allow_choice and rng.random() < 0.25:
            opts = tuple(dict.fromkeys(gen.of_domain(d.domain, 1) for _ in range(2)))
            out.append(Assign(d.name, Choice(opts)))
        else:
            out.append(Assign(d.name, gen.of_domain(d.domain)))
    return tuple(out)


def random_tree(rng: random.Random | int, shape: TreeShape | None = None, name: str = "rand") -> SBT:
    """A random valid tree; ``rng`` may be a seed."""
    rng = random.Random(rng) if isinstance(rng, int) else rng
    shape = shape or TreeShape()
    for _ in range(100):
        sbt = _random_tree(rng, shape, name)
        if not [d for d in validate(sbt) if d.severity == "error"]:
            return sbt
    raise RuntimeError("could not generate a valid tree")


def _random_tree(rng: random.Random, shape: TreeShape, name: str) -> SBT:
    bb = []
    for i in range(rng.randint(1, shape.max_blackboard)):
        dom = _domain(rng, shape, i)
        bb.append(VarDecl(f"x{i}", dom, (rng.choice(dom.values),), Owner.BLACKBOARD))
    env = []
    for i in range(rng.randint(0, shape.max_environment)):
        dom = _domain(rng, shape, i)
        init = tuple(rng.sample(dom.values, rng.randint(1, min(2, len(dom.values)))))
        env.append(VarDecl(f"e{i}", dom, init, Owner.ENVIRONMENT))
    decls = bb + env
    counter = iter(range(10**6))
    n_leaves = rng.randint(1, shape.max_leaves)
    visited: list[str] = []

    def leaf() -> TreeNode:
        i = next(counter)
        gen = _ExprGen(rng, decls, visited if shape.status_refs else (), shape.expr_depth)
        if rng.random() < 0.4:
            node = TreeNode(f"c{i}", Kind.CHECK, clauses=_clauses(rng, gen, shape, [], CHECK_STATUSES))
        else:
            node = TreeNode(f"a{i}", Kind.ACTION, clauses=_clauses(rng, gen, shape, bb, LEAF_STATUSES))
        visited.append(node.name)
        return node

    def build(budget: int, depth: int) -> TreeNode:
        if budget <= 1 or depth >= shape.max_depth or rng.random() < 0.2:
            node = leaf()
            if budget <= 1 and depth < shape.max_depth and rng.random() < 0.15:
                return decorate(node)
            return node
        k = rng.randint(2, min(3, budget))
        sizes = [1] * k
        for _ in range(budget - k):
            sizes[rng.randrange(k)] += 1
        kind = rng.choice((Kind.SELECTOR, Kind.SEQUENCE, Kind.PARALLEL_ALL, Kind.PARALLEL_ONE))
        i = next(counter)
        kids = tuple(build(s, depth + 1) for s in sizes)
        node = TreeNode(f"n{i}", kind, kids, memory=rng.random() < 0.4)
        return decorate(node) if rng.random() < 0.15 else node

    def decorate(child: TreeNode) -> TreeNode:
        i = next(counter)
        if rng.random() < 0.5:
            label = rng.choice(NAMED_DECORATORS)
            return TreeNode(f"d{i}", Kind.DECORATOR, (child,), decorator=label, decorator_map=decorator_map_for(label))
        m = tuple((s, rng.choice(LEAF_STATUSES)) for s in (Status.FAILURE, Status.RUNNING, Status.SUCCESS))
        return TreeNode(f"d{i}", Kind.DECORATOR, (child,), decorator="map", decorator_map=m)

    root = build(n_leaves, 0)
    contingency = None
    if rng.random() < shape.contingency:
        contingency = build(rng.randint(1, 2), shape.max_depth - 1)
    update = ()
    if env:
        gen = _ExprGen(rng, decls, (), shape.expr_depth)
        update = _clauses(rng, gen, shape, env, (None,))
    return SBT(root, tuple(bb), tuple(env), update, contingency, name)


# ---------------------------------------------------------------------------
# monitors


def _observables(sbt: SBT):
    from .model import iter_nodes
    nodes = [n.name for r in sbt.roots() for n in iter_nodes(r)]
    return list(sbt.variables), nodes


def random_esm(rng: random.Random | int, sbt: SBT, rule: str | None = None, name: str = "m") -> ESM:
    rng = random.Random(rng) if isinstance(rng, int) else rng
    decls, nodes = _observables(sbt)
    n = rng.randint(2, 3)
    states = tuple(f"s{i}" for i in range(n))
    verdicts = tuple((s, Verdict.CONTINGENCY if i == n - 1 else Verdict.NOMINAL) for i, s in enumerate(states))
    local = VarDecl("cnt", IntRange(0, 2), (0,), Owner.BLACKBOARD)
    use_local = rng.random() < 0.5
    scope = decls + ([local] if use_local else [])
    gen = _ExprGen(rng, scope, nodes, 1)
    trans = []
    for s in states:
        for _ in range(rng.randint(1, 2)):
            ups = ()
            if use_local and rng.random() < 0.5:
                ups = (Assign("cnt", Binary("+", Var("cnt"), Const(1))),)
            trans.append(ESMTransition(s, rng.choice(states), gen.bool(), ups))
        if rng.random() < 0.8:
            trans.append(ESMTransition(s, s, TRUE))
    rule = rule or rng.choice(("universal", "existential"))
    return ESM(name, states, verdicts, (states[0],), tuple(trans), (local,) if use_local else (), rule)


def random_nfa_monitor(rng: random.Random | int, sbt: SBT, name: str = "m") -> NFAMonitor:
    rng = random.Random(rng) if isinstance(rng, int) else rng
    decls, nodes = _observables(sbt)
    gen = _ExprGen(rng, decls, nodes, 1)
    n = rng.randint(2, 3)
    states = tuple(f"q{i}" for i in range(n))
    trans = [NFATransition(states[0], TRUE, states[0])]
    for _ in range(rng.randint(1, 4)):
        trans.append(NFATransition(rng.choice(states), gen.bool(), rng.choice(states)))
    return NFAMonitor(name, states, states[0], frozenset({states[-1]}), tuple(trans))


def random_ltl_monitor(rng: random.Random | int, sbt: SBT, name: str = "m") -> LTLMonitor:
    rng = random.Random(rng) if isinstance(rng, int) else rng
    decls, nodes = _observables(sbt)
    gen = _ExprGen(rng, decls, nodes, 1)
    atoms = [gen.bool(0) for _ in range(2)]
    return LTLMonitor(name, random_formula(rng, atoms, 2))


def random_monitor(rng: random.Random | int, sbt: SBT, name: str = "m"):
    rng = random.Random(rng) if isinstance(rng, int) else rng
    k = rng.randrange(3)
    if k == 0:
        return random_esm(rng, sbt, name=name)
    if k == 1:
        return random_nfa_monitor(rng, sbt, name)
    return random_ltl_monitor(rng, sbt, name)


# ---------------------------------------------------------------------------
# formulas and transition systems


def random_formula(rng: random.Random | int, atoms, depth: int = 3) -> ltl.Formula:
    """Random formula of nesting depth at most ``depth`` over the given atom expressions."""
    rng = random.Random(rng) if isinstance(rng, int) else rng
    atoms = [a if isinstance(a, Expr) else Var(a) for a in atoms]
    if depth <= 0 or rng.random() < 0.2:
        r = rng.random()
        if r < 0.05:
            return ltl.TRUE
        if r < 0.1:
            return ltl.FALSE
        return ltl.Atom(rng.choice(atoms))
    k = rng.randrange(10)
    sub = lambda: random_formula(rng, atoms, depth - 1)  # noqa: E731
    unary = {0: ltl.Not, 1: ltl.Next, 2: ltl.Globally, 3: ltl.Finally}
    if k in unary:
        return unary[k](sub())
    binary = {4: ltl.And, 5: ltl.Or, 6: ltl.Implies, 7: ltl.Until, 8: ltl.Release, 9: ltl.StrongRelease}
    return binary[k](sub(), sub())


def random_tree_formula(rng: random.Random | int, sbt: SBT, depth: int = 2) -> ltl.Formula:
    """Random formula over atoms of ``sbt`` plus the contingency mode."""
    rng = random.Random(rng) if isinstance(rng, int) else rng
    decls, nodes = _observables(sbt)
    gen = _ExprGen(rng, decls, nodes, 1)
    atoms = [gen.bool(0) for _ in range(2)] + [Var("contingency")]
    return random_formula(rng, atoms, depth)


def random_lasso(rng: random.Random | int, atoms, max_prefix: int = 3, max_cycle: int = 3):
    """Random (prefix, cycle) of letters; letters are frozensets of atom names."""
    rng = random.Random(rng) if isinstance(rng, int) else rng

    def letter():
        return frozenset(a for a in atoms if rng.random() < 0.5)

    prefix = [letter() for _ in range(rng.randint(0, max_prefix))]
    cycle = [letter() for _ in range(rng.randint(1, max_cycle))]
    return prefix, cycle


def random_ts(rng: random.Random | int, max_states: int = 200, atoms=("p", "q"), max_out: int = 3) -> TransitionSystem:
    """Random Kripke structure in which every state has a successor; labels are boolean atoms."""
    rng = random.Random(rng) if isinstance(rng, int) else rng
    n = rng.randint(1, max_states)
    succ = []
    for i in range(n):
        k = rng.randint(1, max_out)
        succ.append(sorted({rng.randrange(n) for _ in range(k)}))
    labels = [{a: rng.random() < 0.5 for a in atoms} for _ in range(n)]
    initial = sorted({rng.randrange(n) for _ in range(rng.randint(1, 2))})
    return TransitionSystem(initial, succ, lambda i: labels[i], list(range(n)))


__all__ = [
    "TreeShape", "random_tree", "random_esm", "random_nfa_monitor", "random_ltl_monitor", "random_monitor",
    "random_formula", "random_tree_formula", "random_lasso", "random_ts",
]
