"""Compiling NFAs and nondeterministic Turing machines into behavior trees.

Both constructions are plain :class:`~btmc.model.SBT` values, so they can be
printed, parsed back, simulated and model checked like any hand-written tree.
Direct simulators for NFAs and bounded NTMs serve as oracles.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Sequence

from .expr import FALSE, TRUE, Binary, Const, Status, Var, conj, disj, eq
from .model import (
    BOOL, SBT, Assign, Choice, Clause, EnumDomain, IntRange, Kind, Owner, TreeNode, VarDecl, validate,
)
from .semantics import Valuation, first_resolver, initial_states, step, step_successors
from .specs import Scenario

STATUS_MAP = {"accept": Status.SUCCESS, "reject": Status.FAILURE, "undecided": Status.RUNNING}
INPUT_VAR = "inp"


class ConstructionError(ValueError):
    pass


# ---------------------------------------------------------------------------
# NFA


@dataclass(frozen=True)
class NFA:
    name: str
    alphabet: tuple
    states: tuple
    initial: str
    accepting: frozenset
    transitions: tuple
    words: tuple = ()

    def check(self) -> None:
        if not self.alphabet:
            raise ConstructionError("NFA alphabet is empty")
        if self.initial not in self.states:
            raise ConstructionError(f"initial state {self.initial!r} is not declared")
        bad = [q for q in self.accepting if q not in self.states]
        if bad:
            raise ConstructionError(f"accepting states not declared: {sorted(bad)}")
        for p, a, q in self.transitions:
            if p not in self.states or q not in self.states or a not in self.alphabet:
                raise ConstructionError(f"ill-typed transition {p} {a} -> {q}")
        for w in self.words:
            if any(a not in self.alphabet for a in w):
                raise ConstructionError(f"word {' '.join(w)} uses symbols outside the alphabet")

    def delta(self, states, symbol) -> frozenset:
        return frozenset(q for p, a, q in self.transitions if a == symbol and p in states)


def nfa_prefix_acceptance(nfa: NFA, word: Sequence) -> list[bool]:
    """Subset simulation: acceptance of every non-empty prefix of ``word``."""
    current = frozenset({nfa.initial})
    out = []
    for a in word:
        current = nfa.delta(current, a)
        out.append(bool(current & nfa.accepting))
    return out


def symbol_name(sym: str) -> str:
    return f"in_{sym}"


def state_var(q: str) -> str:
    return f"q_{q}"


def nfa_to_bt(nfa: NFA) -> SBT:
    """Tree whose tick consumes the current input symbol and reports prefix acceptance.

    Blackboard: one boolean per NFA state (the current subset).  Environment:
    ``inp`` holds the next symbol and is chosen freely by the update.  The root
    is ``seq(Ar, AAccept)``: ``Ar`` advances the subset, ``AAccept`` succeeds
    iff it meets the accepting states.
    """
    nfa.check()
    syms = tuple(symbol_name(a) for a in nfa.alphabet)
    inp = Var(INPUT_VAR)
    writes = []
    for q in nfa.states:
        sources = [conj([Var(state_var(p)), eq(inp, Const(symbol_name(a)))])
                   for p, a, q2 in nfa.transitions if q2 == q]
        writes.append(Assign(state_var(q), disj(sources) if sources else FALSE))
    step_leaf = TreeNode("Ar", Kind.ACTION, clauses=(Clause(TRUE, tuple(writes), Status.SUCCESS),))
    acc = disj([Var(state_var(q)) for q in nfa.states if q in nfa.accepting])
    accept_leaf = TreeNode("AAccept", Kind.CHECK, clauses=(
        Clause(acc, (), STATUS_MAP["accept"]), Clause(TRUE, (), STATUS_MAP["reject"])))
    root = TreeNode("run", Kind.SEQUENCE, (step_leaf, accept_leaf))
    bb = tuple(VarDecl(state_var(q), BOOL, (q == nfa.initial,), Owner.BLACKBOARD) for q in nfa.states)
    env = (VarDecl(INPUT_VAR, EnumDomain(syms), syms, Owner.ENVIRONMENT),)
    update = (Clause(TRUE, (Assign(INPUT_VAR, Choice(tuple(Const(s) for s in syms))),)),)
    sbt = SBT(root, bb, env, update, None, nfa.name)
    _must_validate(sbt)
    return sbt


def _must_validate(sbt: SBT) -> None:
    diags = [d for d in validate(sbt) if d.severity == "error"]
    if diags:
        raise ConstructionError("; ".join(str(d) for d in diags))


def word_scenario(word: Sequence, name: str | None = None) -> Scenario:
    """Scenario feeding ``word`` one symbol per step (``inp`` shows the symbol the next tick reads)."""
    if not word:
        return Scenario(name)
    init = ((INPUT_VAR, symbol_name(word[0])),)
    overrides = tuple((k, ((INPUT_VAR, symbol_name(word[k + 1])),)) for k in range(len(word) - 1))
    return Scenario(name, init, overrides)


def bt_prefix_acceptance(sbt: SBT, word: Sequence) -> list[bool]:
    """Run the NFA tree on ``word`` and map root statuses back through the status map."""
    inverse = {v: k for k, v in STATUS_MAP.items()}
    if not word:
        return []
    val = {d.name: d.initial[0] for d in sbt.variables}
    val[INPUT_VAR] = symbol_name(word[0])
    mem = None
    out = []
    for i in range(len(word)):
        res = step(sbt, val, mem, first_resolver, step_index=i)
        verdict = inverse[res.root_status]
        if verdict == "undecided":
            raise ConstructionError("NFA tree returned an undecided status")
        out.append(verdict == "accept")
        val, mem = dict(res.valuation), res.memory
        if i + 1 < len(word):
            val[INPUT_VAR] = symbol_name(word[i + 1])
    return out


def words_upto(alphabet: Sequence, n: int) -> list[tuple]:
    return [w for k in range(n + 1) for w in itertools.product(alphabet, repeat=k)]


# ---------------------------------------------------------------------------
# Turing machines


@dataclass(frozen=True)
class NTMSpec:
    name: str
    states: tuple
    accepting: frozenset
    alphabet: tuple
    blank: str
    transitions: tuple
    initial: str
    input: tuple = ()
    bound: int = 8

    def check(self) -> None:
        if self.blank not in self.alphabet:
            raise ConstructionError(f"blank {self.blank!r} is not in the alphabet")
        if self.initial not in self.states:
            raise ConstructionError(f"initial state {self.initial!r} is not declared")
        if any(q not in self.states for q in self.accepting):
            raise ConstructionError("accepting states must be declared")
        for q, a, q2, b, d in self.transitions:
            if q not in self.states or q2 not in self.states or a not in self.alphabet \
                    or b not in self.alphabet or d not in ("L", "R"):
                raise ConstructionError(f"ill-typed transition {q} {a} -> {q2} {b} {d}")
        if any(a not in self.alphabet for a in self.input):
            raise ConstructionError("input uses symbols outside the alphabet")
        if self.bound < 1:
            raise ConstructionError("tape bound must be positive")

    @property
    def base(self) -> int:
        return len(self.alphabet)

    def digit(self, sym: str) -> int:
        """Blank is digit 0, so an all-blank tape side encodes as 0."""
        order = (self.blank,) + tuple(a for a in self.alphabet if a != self.blank)
        return order.index(sym)

    def symbol(self, d: int) -> str:
        order = (self.blank,) + tuple(a for a in self.alphabet if a != self.blank)
        return order[d]

    def options(self, q: str, a: str) -> list[tuple]:
        return [(q2, b, d) for q1, a1, q2, b, d in self.transitions if (q1, a1) == (q, a)]


@dataclass(frozen=True)
class Tape:
    """Cells left of the head (nearest first), the head symbol, cells right of the head (nearest first)."""

    left: tuple
    head: str
    right: tuple

    def canonical(self, blank: str) -> "Tape":
        return Tape(_trim(self.left, blank), self.head, _trim(self.right, blank))

    def cells(self, blank: str) -> tuple[tuple, int]:
        """Flat cell tuple plus head index, blanks trimmed at both far ends."""
        t = self.canonical(blank)
        cells = tuple(reversed(t.left)) + (t.head,) + t.right
        return cells, len(t.left)

    def content(self, blank: str) -> tuple:
        """Non-blank span of the tape, as it would be written down."""
        cells, _ = self.cells(blank)
        lo, hi = 0, len(cells)
        while lo < hi and cells[lo] == blank:
            lo += 1
        while hi > lo and cells[hi - 1] == blank:
            hi -= 1
        return cells[lo:hi]

    @classmethod
    def from_cells(cls, cells: Sequence, pos: int, blank: str) -> "Tape":
        cells = tuple(cells)
        head = cells[pos] if 0 <= pos < len(cells) else blank
        left = tuple(reversed(cells[:max(pos, 0)]))
        right = cells[pos + 1:] if pos + 1 <= len(cells) else ()
        return cls(left, head, right).canonical(blank)


def _trim(side: tuple, blank: str) -> tuple:
    side = list(side)
    while side and side[-1] == blank:
        side.pop()
    return tuple(side)


@dataclass(frozen=True)
class DigitTape:
    left: int
    head: int
    right: int


def tape_to_digits(tm: NTMSpec, tape: Tape) -> DigitTape:
    """T_D: each tape side as a base-|alphabet| number, nearest cell least significant."""
    def num(side):
        return sum(tm.digit(s) * tm.base ** i for i, s in enumerate(side))
    return DigitTape(num(tape.left), tm.digit(tape.head), num(tape.right))


def digits_to_tape(tm: NTMSpec, dt: DigitTape) -> Tape:
    """D_T: inverse of :func:`tape_to_digits` on canonical tapes."""
    def side(n):
        out = []
        while n:
            n, d = divmod(n, tm.base)
            out.append(tm.symbol(d))
        return tuple(out)
    return Tape(side(dt.left), tm.symbol(dt.head), side(dt.right))


def input_tape(tm: NTMSpec) -> Tape:
    return Tape.from_cells(tm.input, 0, tm.blank)


def side_limit(tm: NTMSpec) -> int:
    """Largest encodable side value: ``bound`` digits."""
    return tm.base ** tm.bound - 1


@dataclass(frozen=True)
class TMConfig:
    state: str
    tape: Tape
    overflow: bool = False


def tm_initial(tm: NTMSpec) -> TMConfig:
    tape = input_tape(tm)
    over = len(tape.left) > tm.bound or len(tape.right) > tm.bound
    return TMConfig(tm.initial, tape, over)


def tm_successors(tm: NTMSpec, cfg: TMConfig) -> list[TMConfig]:
    """One machine step on cells.  Halted (accepting, stuck or overflowed) configurations repeat."""
    if cfg.overflow or cfg.state in tm.accepting:
        return [cfg]
    opts = tm.options(cfg.state, cfg.tape.head)
    if not opts:
        return [cfg]
    out = []
    for q2, b, d in opts:
        cells, pos = cfg.tape.cells(tm.blank)
        cells = list(cells)
        cells[pos] = b
        pos += 1 if d == "R" else -1
        if pos < 0:
            cells.insert(0, tm.blank)
            pos = 0
        elif pos >= len(cells):
            cells.append(tm.blank)
        tape = Tape.from_cells(cells, pos, tm.blank)
        if len(tape.left) > tm.bound or len(tape.right) > tm.bound:
            out.append(TMConfig(cfg.state, cfg.tape, True))
        else:
            out.append(TMConfig(q2, tape))
    return list(dict.fromkeys(out))


def tm_layers(tm: NTMSpec, steps: int) -> list[frozenset]:
    """Configurations reachable in exactly ``i`` steps, for ``i`` in ``0..steps``."""
    layer = frozenset({tm_initial(tm)})
    out = [layer]
    for _ in range(steps):
        layer = frozenset(c for cfg in layer for c in tm_successors(tm, cfg))
        out.append(layer)
    return out


def tm_runs(tm: NTMSpec, steps: int) -> set[tuple]:
    """Every configuration sequence of length ``steps`` after the initial configuration."""
    out: set = set()

    def go(cfg, acc):
        if len(acc) == steps:
            out.add(tuple(acc))
            return
        for nxt in tm_successors(tm, cfg):
            acc.append(nxt)
            go(nxt, acc)
            acc.pop()

    go(tm_initial(tm), [])
    return out


# tree construction

ST, HD, LT, RT, OOB, TR = "st", "hd", "lt", "rt", "oob", "tr"


def tm_state_symbol(q: str) -> str:
    return f"st_{q}"


def tm_to_bt(tm: NTMSpec, tape_bound: int | None = None) -> SBT:
    """Tree executing one machine step per tick on a digit-encoded tape.

    Root ``sel(CAc, StSel)``.  ``CAc`` succeeds in accepting states.  ``StSel``
    selects the ``StSeq_q`` branch of the current state (guarded by ``CSt_q``);
    inside, ``SySel_q`` picks the ``SySeq_q_a`` branch of the head symbol
    (guarded by ``CSy_q_a``).  A branch with several transitions first picks one
    (``Ch_q_a``) and ``Nxt_q_a`` applies it and returns Running.  A step that
    would leave the bounded tape sets ``oob`` and the tree fails from then on.
    """
    if tape_bound is not None:
        tm = NTMSpec(tm.name, tm.states, tm.accepting, tm.alphabet, tm.blank, tm.transitions, tm.initial,
                     tm.input, tape_bound)
    tm.check()
    init = tm_initial(tm)
    if init.overflow:
        raise ConstructionError("input does not fit in the tape bound")
    dt = tape_to_digits(tm, init.tape)
    top = side_limit(tm)
    base = tm.base
    fanout = max((len(tm.options(q, a)) for q in tm.states for a in tm.alphabet), default=0)

    st, hd, lt, rt, oob = Var(ST), Var(HD), Var(LT), Var(RT), Var(OOB)
    not_oob = eq(oob, FALSE)
    cac = TreeNode("CAc", Kind.CHECK, clauses=(
        Clause(conj([not_oob, disj([eq(st, Const(tm_state_symbol(q))) for q in tm.states if q in tm.accepting])]),
               (), STATUS_MAP["accept"]),
        Clause(TRUE, (), STATUS_MAP["reject"])))
    branches = []
    for q in tm.states:
        if q in tm.accepting:
            continue
        sy = []
        for a in tm.alphabet:
            opts = tm.options(q, a)
            if not opts:
                continue
            tag = f"{q}_{tm.digit(a)}"
            csy = TreeNode(f"CSy_{tag}", Kind.CHECK, clauses=(
                Clause(eq(hd, Const(tm.digit(a))), (), Status.SUCCESS), Clause(TRUE, (), Status.FAILURE)))
            clauses = []
            for i, (q2, b, d) in enumerate(opts):
                w = tm.digit(b)
                pick = eq(Var(TR), Const(i)) if len(opts) > 1 else TRUE
                if d == "R":
                    new_left = Binary("+", Binary("*", lt, Const(base)), Const(w))
                    fits = Binary("<=", new_left, Const(top))
                    writes = (Assign(ST, Const(tm_state_symbol(q2))), Assign(LT, new_left),
                              Assign(HD, Binary("%", rt, Const(base))), Assign(RT, Binary("/", rt, Const(base))))
                else:
                    new_right = Binary("+", Binary("*", rt, Const(base)), Const(w))
                    fits = Binary("<=", new_right, Const(top))
                    writes = (Assign(ST, Const(tm_state_symbol(q2))), Assign(RT, new_right),
                              Assign(HD, Binary("%", lt, Const(base))), Assign(LT, Binary("/", lt, Const(base))))
                clauses.append(Clause(conj([pick, fits]), writes, STATUS_MAP["undecided"]))
                clauses.append(Clause(pick, (Assign(OOB, TRUE),), STATUS_MAP["reject"]))
            if len(opts) > 1:
                clauses.append(Clause(TRUE, (), STATUS_MAP["reject"]))
            nxt = TreeNode(f"Nxt_{tag}", Kind.ACTION, clauses=tuple(clauses))
            kids = (csy,)
            if len(opts) > 1:
                kids += (TreeNode(f"Ch_{tag}", Kind.ACTION, clauses=(
                    Clause(TRUE, (Assign(TR, Choice(tuple(Const(i) for i in range(len(opts))))),), Status.SUCCESS),)),)
            sy.append(TreeNode(f"SySeq_{tag}", Kind.SEQUENCE, kids + (nxt,)))
        if not sy:
            continue
        cst = TreeNode(f"CSt_{q}", Kind.CHECK, clauses=(
            Clause(conj([not_oob, eq(st, Const(tm_state_symbol(q)))]), (), Status.SUCCESS),
            Clause(TRUE, (), Status.FAILURE)))
        sysel = sy[0] if len(sy) == 1 else TreeNode(f"SySel_{q}", Kind.SELECTOR, tuple(sy))
        branches.append(TreeNode(f"StSeq_{q}", Kind.SEQUENCE, (cst, sysel)))
    kids = (cac,)
    if branches:
        kids += (branches[0],) if len(branches) == 1 else (TreeNode("StSel", Kind.SELECTOR, tuple(branches)),)
    root = TreeNode("TM", Kind.SELECTOR, kids)
    side = IntRange(0, top)
    bb = [
        VarDecl(ST, EnumDomain(tuple(tm_state_symbol(q) for q in tm.states)), (tm_state_symbol(tm.initial),)),
        VarDecl(HD, IntRange(0, base - 1), (dt.head,)),
        VarDecl(LT, side, (dt.left,)),
        VarDecl(RT, side, (dt.right,)),
        VarDecl(OOB, BOOL, (False,)),
    ]
    if fanout > 1:
        bb.append(VarDecl(TR, IntRange(0, fanout - 1), (0,)))
    sbt = SBT(root, tuple(bb), (), (), None, tm.name)
    _must_validate(sbt)
    return sbt


def bt_config(tm: NTMSpec, valuation) -> TMConfig:
    """Read the machine configuration off a tree valuation (StateMap inverse plus D_T)."""
    q = str(valuation[ST])[len("st_"):]
    tape = digits_to_tape(tm, DigitTape(valuation[LT], valuation[HD], valuation[RT]))
    return TMConfig(q, tape, bool(valuation[OOB]))


def bt_layers(tm: NTMSpec, sbt: SBT, steps: int) -> list[frozenset]:
    """Configurations after exactly ``i`` ticks, for ``i`` in ``0..steps``."""
    frontier = {(v, m) for v, m in initial_states(sbt)}
    out = [frozenset(bt_config(tm, v) for v, _ in frontier)]
    for _ in range(steps):
        nxt = set()
        for v, m in frontier:
            for _, res in step_successors(sbt, v, m):
                nxt.add((_strip_tr(res.valuation), res.memory))
        frontier = nxt
        out.append(frozenset(bt_config(tm, v) for v, _ in frontier))
    return out


def _strip_tr(v):
    """The transition pick is always rewritten before it is read, so it carries no state."""
    d = dict(v)
    if TR in d:
        d[TR] = 0
    return Valuation(d)


def tm_projection(tm: NTMSpec) -> Callable:
    """Projection of both tree observations and oracle configurations to (state, overflow, tape digits)."""
    def proj(x):
        cfg = x if isinstance(x, TMConfig) else bt_config(tm, x.valuation)
        dt = tape_to_digits(tm, cfg.tape)
        return (cfg.state, cfg.overflow, dt.left, dt.head, dt.right)
    return proj


def trace_equiv(seq_a: Sequence, seq_b: Sequence, projection) -> bool:
    """Element-wise equality after projection; ``projection`` is one callable or a pair."""
    pa, pb = projection if isinstance(projection, tuple) else (projection, projection)
    if len(seq_a) != len(seq_b):
        return False
    return all(pa(x) == pb(y) for x, y in zip(seq_a, seq_b))


def trace_set_equiv(traces_a, traces_b, projection) -> bool:
    """Equality of two trace sets modulo :func:`trace_equiv`."""
    pa, pb = projection if isinstance(projection, tuple) else (projection, projection)
    return {tuple(map(pa, t)) for t in traces_a} == {tuple(map(pb, t)) for t in traces_b}


def increment_tm(ones: int = 2, bound: int = 8) -> NTMSpec:
    """Unary increment: scan right over the ones and append one more."""
    return NTMSpec("increment", ("scan", "done"), frozenset({"done"}), ("_", "1"), "_",
                   (("scan", "1", "scan", "1", "R"), ("scan", "_", "done", "1", "R")), "scan",
                   ("1",) * ones, bound)


# ---------------------------------------------------------------------------
# fixtures


def nfa_fixture(nfa: NFA) -> dict[str, str]:
    """``.bt`` plus one ``.scn`` per listed word, as file name -> text."""
    from .dsl.printer import pretty_print, print_scenario
    files = {f"{nfa.name}.bt": pretty_print(nfa_to_bt(nfa))}
    for i, w in enumerate(nfa.words):
        sc = word_scenario(w, f"word_{i}")
        files[f"{nfa.name}.word_{i}.scn"] = print_scenario(sc)
    return files


def tm_fixture(tm: NTMSpec) -> dict[str, str]:
    from .dsl.printer import pretty_print
    return {f"{tm.name}.bt": pretty_print(tm_to_bt(tm))}


__all__ = [
    "STATUS_MAP", "NFA", "NTMSpec", "Tape", "DigitTape", "TMConfig", "ConstructionError", "nfa_to_bt",
    "tm_to_bt", "nfa_prefix_acceptance", "bt_prefix_acceptance", "word_scenario", "words_upto",
    "tape_to_digits", "digits_to_tape", "tm_initial", "tm_successors", "tm_layers", "tm_runs", "bt_config",
    "bt_layers", "tm_projection", "trace_equiv", "trace_set_equiv", "increment_tm", "nfa_fixture", "tm_fixture",
]
