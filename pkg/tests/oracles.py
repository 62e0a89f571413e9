"""Reference implementations used to cross-check the library.

Each oracle is written directly from the textbook definition and shares no
search code with the module it checks.
"""
from __future__ import annotations

import itertools

from btmc import ltl


def emptiness_by_closure(ts, formula) -> bool:
    """True iff some path of ``ts`` violates ``formula``.

    Builds the full product with the automaton for the negation and looks for
    an accepting product node that is reachable and lies on a cycle, by plain
    reachability sets instead of a depth-first search.
    """
    ba = ltl.ltl_to_buchi(ltl.Not(formula))
    atoms = sorted(ltl.atoms(formula), key=repr)
    letters = [ts.letter(atoms, i) for i in range(len(ts))]
    init = {(s, q) for s in ts.initial for q in ba.successors(ba.initial, letters[s])}

    def succ(node):
        s, q = node
        return {(t, r) for t in ts.succ[s] for r in ba.successors(q, letters[t])}

    def closure(start):
        seen, todo = set(start), list(start)
        while todo:
            for m in succ(todo.pop()):
                if m not in seen:
                    seen.add(m)
                    todo.append(m)
        return seen

    reach = closure(init)
    for node in reach:
        if node[1] in ba.accepting and node in closure(succ(node)):
            return True
    return False


def lassos(ts, max_len: int):
    """Every (prefix, cycle) of state ids with total length at most ``max_len``."""
    def paths(path):
        yield path
        if len(path) < max_len:
            for t in ts.succ[path[-1]]:
                yield from paths(path + [t])

    for s in ts.initial:
        for p in paths([s]):
            last = p[-1]
            for k, first in enumerate(p):
                if first in ts.succ[last]:
                    yield p[:k], p[k:]


def violating_lasso(ts, formula, max_len: int):
    atoms = sorted(ltl.atoms(formula), key=repr)
    for prefix, cycle in lassos(ts, max_len):
        pw = [ts.letter(atoms, s) for s in prefix]
        cw = [ts.letter(atoms, s) for s in cycle]
        if not ltl.ltl_eval_lasso(formula, pw, cw):
            return prefix, cycle
    return None


def all_lasso_words(names, max_prefix: int, max_cycle: int):
    letters = [frozenset(c) for k in range(len(names) + 1) for c in itertools.combinations(names, k)]
    for p in range(max_prefix + 1):
        for c in range(1, max_cycle + 1):
            for prefix in itertools.product(letters, repeat=p):
                for cycle in itertools.product(letters, repeat=c):
                    yield list(prefix), list(cycle)


def nfa_subset_run(transitions, initial, accepting, word):
    """Prefix acceptance of a word via the subset construction."""
    cur = {initial}
    out = []
    for a in word:
        cur = {d for (s, x, d) in transitions if s in cur and x == a}
        out.append(bool(cur & set(accepting)))
    return out


def chase(loc, target):
    """One greedy step on a grid: close the x gap first, then the y gap."""
    (x, y), (tx, ty) = loc, target
    if x != tx:
        return (x + (1 if tx > x else -1), y)
    if y != ty:
        return (x, y + (1 if ty > y else -1))
    return loc


def random_nfa(rng, name="n"):
    """NFA with at most three states over {a, b}, as keyword arguments for ``NFA``."""
    states = tuple(f"s{i}" for i in range(rng.randint(1, 3)))
    trans = tuple((p, a, q) for p in states for a in "ab" for q in states if rng.random() < 0.4)
    accepting = frozenset(q for q in states if rng.random() < 0.5)
    return dict(name=name, alphabet=("a", "b"), states=states, initial=states[0], accepting=accepting,
                transitions=trans)


def random_ntm(rng, name="m"):
    """Machine with at most three states over {_, 1}, as keyword arguments for ``NTMSpec``."""
    states = tuple(f"q{i}" for i in range(rng.randint(2, 3)))
    accepting = frozenset({states[-1]}) if rng.random() < 0.7 else frozenset()
    trans = []
    for q in states:
        if q in accepting:
            continue
        for a in "_1":
            for _ in range(rng.choice([0, 1, 1, 2])):
                trans.append((q, a, rng.choice(states), rng.choice("_1"), rng.choice("LR")))
    return dict(name=name, states=states, accepting=accepting, alphabet=("_", "1"), blank="_",
                transitions=tuple(dict.fromkeys(trans)), initial=states[0])


class CellMachine:
    """Direct Turing machine simulator on a dictionary of cells.

    A configuration is ``(state, overflow, cells, pos)`` with ``cells`` a sorted
    tuple of non-blank ``(index, symbol)`` pairs.  Indices are re-based so the
    head is always at 0, since tapes are only meaningful up to translation.  A move that leaves more than
    ``bound`` non-blank-bounded cells on either side of the head marks overflow
    and keeps the previous configuration.  Halted configurations repeat.
    """

    def __init__(self, transitions, accepting, blank, bound):
        self.transitions, self.accepting, self.blank, self.bound = transitions, accepting, blank, bound

    def start(self, state, word):
        cfg = (state, False, tuple((i, s) for i, s in enumerate(word) if s != self.blank), 0)
        return cfg[:1] + (not self.fits(cfg[2], 0),) + cfg[2:]

    def fits(self, cells, pos):
        idx = [i for i, _ in cells]
        left = pos - min(idx) if idx and min(idx) < pos else 0
        right = max(idx) - pos if idx and max(idx) > pos else 0
        return left <= self.bound and right <= self.bound

    def successors(self, cfg):
        state, over, cells, pos = cfg
        if over or state in self.accepting:
            return {cfg}
        tape = dict(cells)
        head = tape.get(pos, self.blank)
        out = set()
        for q, a, q2, b, d in self.transitions:
            if (q, a) != (state, head):
                continue
            new = dict(tape)
            new[pos] = b
            new = tuple(sorted((i, s) for i, s in new.items() if s != self.blank))
            shift = 1 if d == "R" else -1
            new = tuple((i - shift, s) for i, s in new)
            out.add((q2, False, new, 0) if self.fits(new, 0) else (state, True, cells, pos))
        return out or {cfg}

    def key(self, cfg, digit, base):
        """(state, overflow, left number, head digit, right number), nearest cell least significant."""
        state, over, cells, pos = cfg
        tape = dict(cells)
        left = sum(digit[tape[i]] * base ** (pos - 1 - i) for i in tape if i < pos)
        right = sum(digit[tape[i]] * base ** (i - pos - 1) for i in tape if i > pos)
        return (state, over, left, digit[tape.get(pos, self.blank)], right)


def smv_step_equivalent(ir, exp) -> bool:
    """Re-imported SMV text has the IR's initial states and successor sets on every reachable state."""
    from btmc.ir import ir_eval, ir_reachable
    from btmc.smv import parse_smv, smv_initial_states, smv_successors, to_smv_state

    def key(d):
        return tuple(sorted(d.items()))

    model = parse_smv(exp.text)
    init = sorted(key(to_smv_state(exp, s)) for s in ir.initial_states())
    if init != sorted(key(d) for d in smv_initial_states(model)):
        return False
    for s in ir_reachable(ir).states:
        want = sorted(key(to_smv_state(exp, t)) for t in ir_eval(ir, s))
        got = sorted(key(d) for d in smv_successors(model, to_smv_state(exp, s)))
        if want != got:
            return False
    return True


def config_graph(tm, sbt):
    """Reachable configurations and edges of the tree, read back through the tape decoding."""
    from btmc.expressiveness import bt_config, tm_projection
    from btmc.semantics import initial_states, step_successors

    proj = tm_projection(tm)
    start = initial_states(sbt)
    seen, todo, edges = set(start), list(start), set()
    while todo:
        v, m = todo.pop()
        src = proj(bt_config(tm, v))
        for _, res in step_successors(sbt, v, m):
            nv = dict(res.valuation)
            nv.pop("tr", None)
            edges.add((src, proj(bt_config(tm, res.valuation))))
            nxt = (res.valuation, res.memory)
            key = (tuple(sorted(nv.items())), res.memory)
            if key not in seen:
                seen.add(key)
                todo.append(nxt)
    return {proj(bt_config(tm, v)) for v, _ in start} | {b for _, b in edges}, edges


def oracle_graph(tm):
    sim = CellMachine(tm.transitions, tm.accepting, tm.blank, tm.bound)
    digit = {s: tm.digit(s) for s in tm.alphabet}
    start = sim.start(tm.initial, tm.input)
    seen, todo, edges = {start}, [start], set()
    while todo:
        c = todo.pop()
        for d in sim.successors(c):
            edges.add((sim.key(c, digit, tm.base), sim.key(d, digit, tm.base)))
            if d not in seen:
                seen.add(d)
                todo.append(d)
    return {sim.key(c, digit, tm.base) for c in seen}, edges
