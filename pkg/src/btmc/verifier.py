"""Design-time verification on explicit transition systems.

``check_ltl`` builds a Büchi automaton for the negated formula and searches
the synchronous product for an accepting lasso (nested depth-first search by
default, Tarjan SCCs as an alternative engine).  The automaton reads the label
of each state as it is entered, starting from a pseudo-initial state.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from . import ltl
from .composition import (
    BTM, ProductState, RuntimeReport, TransitionSystem, initial_product_states, product_step, reachable,
    simulate_runtime,
)
from .expr import Binary, Expr, compile_expr
from .ir import (
    IR, LEVELS, OptLevel, encode, formula_for, ir_reachable, is_boundary, to_product_state,
)
from .semantics import node_order
from .specs import Scenario


class TruncatedSystemError(Exception):
    """Verification refuses to run on a partial state space."""

    def __init__(self):
        super().__init__("transition system was truncated by the state limit; raise BTMC_STATE_LIMIT")


@dataclass
class Verdict:
    kind: str  # "holds" | "violated" | "invariant_violated"
    prefix: list = field(default_factory=list)
    cycle: list = field(default_factory=list)
    path: list = field(default_factory=list)
    stats: dict = field(default_factory=dict)

    @property
    def holds(self) -> bool:
        return self.kind == "holds"

    def to_json(self) -> dict:
        return {"verdict": self.kind, "prefix": self.prefix, "cycle": self.cycle, "path": self.path,
                "stats": self.stats}


HOLDS = "holds"
VIOLATED = "violated"
INVARIANT_VIOLATED = "invariant_violated"


def _require_complete(ts: TransitionSystem):
    if ts.truncated:
        raise TruncatedSystemError()


# ---------------------------------------------------------------------------
# invariants


def check_invariant(ts: TransitionSystem, predicate: Expr) -> Verdict:
    """Holds iff ``predicate`` is true in every reachable state; else a shortest witness path."""
    _require_complete(ts)
    fn = compile_expr(predicate)
    parent = {}
    queue = deque()
    for i in ts.initial:
        if i not in parent:
            parent[i] = None
            queue.append(i)
    while queue:
        s = queue.popleft()
        if not fn(ts.env(s)):
            path = []
            cur = s
            while cur is not None:
                path.append(cur)
                cur = parent[cur]
            return Verdict(INVARIANT_VIOLATED, path=path[::-1], stats={"states": len(ts)})
        for t in ts.succ[s]:
            if t not in parent:
                parent[t] = s
                queue.append(t)
    return Verdict(HOLDS, stats={"states": len(ts)})


# ---------------------------------------------------------------------------
# LTL


class _Product:
    """Lazy synchronous product of a transition system with a Büchi automaton."""

    def __init__(self, ts: TransitionSystem, ba: ltl.BuchiAutomaton):
        self.ts = ts
        self.ba = ba
        self.atoms = sorted(ba.atoms, key=repr)
        self._letters: dict[int, frozenset] = {}

    def letter(self, s: int) -> frozenset:
        l = self._letters.get(s)
        if l is None:
            l = self.ts.letter(self.atoms, s)
            self._letters[s] = l
        return l

    def initial(self) -> list[tuple]:
        out = []
        for s in self.ts.initial:
            for q in self.ba.successors(self.ba.initial, self.letter(s)):
                out.append((s, q))
        return out

    def succ(self, node: tuple) -> list[tuple]:
        s, q = node
        out = []
        for t in self.ts.succ[s]:
            for q2 in self.ba.successors(q, self.letter(t)):
                out.append((t, q2))
        return out

    def accepting(self, node: tuple) -> bool:
        return node[1] in self.ba.accepting


def _ndfs(prod: _Product):
    """Iterative nested DFS; returns (stem, cycle) of product nodes or None."""
    blue: set = set()
    red: set = set()
    for init in prod.initial():
        if init in blue:
            continue
        blue.add(init)
        stack = [(init, iter(prod.succ(init)))]
        while stack:
            node, it = stack[-1]
            nxt = next(it, None)
            if nxt is not None:
                if nxt not in blue:
                    blue.add(nxt)
                    stack.append((nxt, iter(prod.succ(nxt))))
                continue
            stack.pop()
            if prod.accepting(node):
                cyc = _red_search(prod, node, red)
                if cyc is not None:
                    stem = [n for n, _ in stack]
                    return stem, cyc
    return None


def _red_search(prod: _Product, seed, red: set):
    if seed in red:
        return None
    red.add(seed)
    stack = [(seed, iter(prod.succ(seed)))]
    while stack:
        node, it = stack[-1]
        nxt = next(it, None)
        if nxt is None:
            stack.pop()
            continue
        if nxt == seed:
            return [n for n, _ in stack]
        if nxt not in red:
            red.add(nxt)
            stack.append((nxt, iter(prod.succ(nxt))))
    return None


def _scc_search(prod: _Product):
    """Tarjan over the reachable product; accepting non-trivial SCC gives a lasso."""
    index: dict = {}
    low: dict = {}
    on: set = set()
    st: list = []
    parent: dict = {}
    counter = 0
    for init in prod.initial():
        if init in index:
            continue
        parent.setdefault(init, None)
        work = [(init, iter(prod.succ(init)))]
        index[init] = low[init] = counter
        counter += 1
        st.append(init)
        on.add(init)
        while work:
            node, it = work[-1]
            advanced = False
            for nxt in it:
                if nxt not in index:
                    parent[nxt] = node
                    index[nxt] = low[nxt] = counter
                    counter += 1
                    st.append(nxt)
                    on.add(nxt)
                    work.append((nxt, iter(prod.succ(nxt))))
                    advanced = True
                    break
                if nxt in on:
                    low[node] = min(low[node], index[nxt])
            if advanced:
                continue
            work.pop()
            if work:
                low[work[-1][0]] = min(low[work[-1][0]], low[node])
            if low[node] == index[node]:
                comp = []
                while True:
                    x = st.pop()
                    on.discard(x)
                    comp.append(x)
                    if x == node:
                        break
                members = set(comp)
                for a in comp:
                    if prod.accepting(a) and any(y in members for y in prod.succ(a)):
                        return _lasso_through(prod, a, members, parent)
    return None


def _lasso_through(prod: _Product, acc, members: set, parent: dict):
    stem = []
    cur = parent[acc]
    while cur is not None:
        stem.append(cur)
        cur = parent[cur]
    stem.reverse()
    # shortest cycle acc -> ... -> acc inside the component
    prev = {}
    queue = deque()
    for y in prod.succ(acc):
        if y in members and y not in prev:
            prev[y] = acc
            queue.append(y)
    while queue:
        x = queue.popleft()
        if x == acc:
            break
        for y in prod.succ(x):
            if y in members and y not in prev:
                prev[y] = x
                queue.append(y)
    cyc = []
    cur = prev[acc]
    while cur != acc:
        cyc.append(cur)
        cur = prev[cur]
    cyc.append(acc)
    cyc.reverse()
    return stem, cyc


def check_ltl(ts: TransitionSystem, formula: ltl.Formula, engine: str = "ndfs") -> Verdict:
    """Holds iff every infinite path from an initial state satisfies ``formula``."""
    _require_complete(ts)
    ba = ltl.ltl_to_buchi(ltl.Not(formula))
    prod = _Product(ts, ba)
    if engine == "ndfs":
        found = _ndfs(prod)
    elif engine == "scc":
        found = _scc_search(prod)
    else:
        raise ValueError(f"unknown engine {engine!r}")
    stats = {"states": len(ts), "automaton_states": len(ba.states)}
    if found is None:
        return Verdict(HOLDS, stats=stats)
    stem, cyc = found
    return Verdict(VIOLATED, prefix=[s for s, _ in stem], cycle=[s for s, _ in cyc], stats=stats)


def lasso_word(ts: TransitionSystem, atoms, prefix, cycle):
    return [ts.letter(atoms, s) for s in prefix], [ts.letter(atoms, s) for s in cycle]


def lasso_is_path(ts: TransitionSystem, prefix, cycle) -> bool:
    seq = list(prefix) + list(cycle)
    if not cycle or not seq or seq[0] not in ts.initial:
        return False
    if any(b not in ts.succ[a] for a, b in zip(seq, seq[1:])):
        return False
    return cycle[0] in ts.succ[cycle[-1]]


# ---------------------------------------------------------------------------
# replay on the interpreter


@dataclass
class Replay:
    ok: bool
    steps: int
    failed_at: int | None = None
    message: str = ""


def replay_lasso(btm: BTM, prefix: list[ProductState], cycle: list[ProductState]) -> Replay:
    seq = list(prefix) + list(cycle)
    if not cycle:
        return Replay(False, 0, 0, "empty cycle")
    if seq[0] not in initial_product_states(btm):
        return Replay(False, 0, 0, "first state is not initial")
    pairs = list(zip(seq, seq[1:])) + [(cycle[-1], cycle[0])]
    for i, (a, b) in enumerate(pairs):
        succ = [s for _, s in product_step(btm, a)]
        if b not in succ:
            return Replay(False, i, i, f"step {i}: recorded state is not a successor")
    return Replay(True, len(pairs))


def replay_path(btm: BTM, path: list[ProductState]) -> Replay:
    if not path or path[0] not in initial_product_states(btm):
        return Replay(False, 0, 0, "first state is not initial")
    for i, (a, b) in enumerate(zip(path, path[1:])):
        if b not in [s for _, s in product_step(btm, a)]:
            return Replay(False, i, i, f"step {i}: recorded state is not a successor")
    return Replay(True, len(path) - 1)


# ---------------------------------------------------------------------------
# end-to-end


@dataclass
class Result:
    verdict: Verdict
    level: OptLevel
    states: int
    transitions: int
    prefix: list = field(default_factory=list)
    cycle: list = field(default_factory=list)
    path: list = field(default_factory=list)
    replay: Replay | None = None

    @property
    def kind(self) -> str:
        return self.verdict.kind


def _boundary_projection(ir: IR, btm: BTM, ts: TransitionSystem, ids: list) -> list[ProductState]:
    return [to_product_state(ir, btm, ts.states[i]) for i in ids if is_boundary(ir, ts.states[i])]


def _project_lasso(ir, btm, ts, prefix, cycle):
    """Boundary states of an IR lasso, rotated so the cycle starts at a boundary state."""
    if not ir.has_pc:
        return _boundary_projection(ir, btm, ts, prefix), _boundary_projection(ir, btm, ts, cycle)
    k = next(i for i, s in enumerate(cycle) if is_boundary(ir, ts.states[s]))
    pre = list(prefix) + list(cycle[:k])
    cyc = list(cycle[k:]) + list(cycle[:k])
    return _boundary_projection(ir, btm, ts, pre), _boundary_projection(ir, btm, ts, cyc)


def verify_ltl(btm: BTM, formula: ltl.Formula, level: OptLevel | str = OptLevel.FULL_OPT,
               engine: str = "ndfs", limit: int | None = None, jobs: int = 1) -> Result:
    """Encode at ``level``, explore, model-check and replay any counterexample on the interpreter."""
    formula = resolve_formula(btm, formula)
    ir = encode(btm, level)
    ts = ir_reachable(ir, limit, jobs)
    _require_complete(ts)
    v = check_ltl(ts, formula_for(ir, formula), engine)
    res = Result(v, ir.level, len(ts), ts.edge_count)
    if v.kind == VIOLATED:
        res.prefix, res.cycle = _project_lasso(ir, btm, ts, v.prefix, v.cycle)
        res.replay = replay_lasso(btm, res.prefix, res.cycle)
    return res


def verify_ltl_smv(btm: BTM, formula: ltl.Formula, level: OptLevel | str = OptLevel.FULL_OPT,
                   limit: int | None = None, jobs: int = 1) -> Result:
    """Export to SMV text, re-import it, and model-check the re-imported LTLSPEC."""
    from .smv import export_smv, from_smv_state, parse_smv, smv_transition_system
    formula = resolve_formula(btm, formula)
    ir = encode(btm, level)
    exp = export_smv(ir, [formula])
    model = parse_smv(exp.text)
    raw = smv_transition_system(model, limit, jobs)
    _require_complete(raw)
    names = model.names
    states = [from_smv_state(exp, dict(zip(names, t))) for t in raw.states]
    ts = TransitionSystem(raw.initial, raw.succ, raw.env_fn, states, raw.edge_choices, raw.truncated)
    v = check_ltl(ts, model.ltlspecs[0])
    res = Result(v, ir.level, len(ts), ts.edge_count)
    if v.kind == VIOLATED:
        res.prefix, res.cycle = _project_lasso(ir, btm, ts, v.prefix, v.cycle)
        res.replay = replay_lasso(btm, res.prefix, res.cycle)
    return res


def verify_invariant(btm: BTM, predicate: Expr, level: OptLevel | str = OptLevel.FULL_OPT,
                     limit: int | None = None, jobs: int = 1) -> Result:
    predicate = resolve_predicate(btm, predicate)
    ir = encode(btm, level)
    ts = ir_reachable(ir, limit, jobs)
    _require_complete(ts)
    pred = predicate if not ir.has_pc else Binary("->", ir.boundary, predicate)
    v = check_invariant(ts, pred)
    res = Result(v, ir.level, len(ts), ts.edge_count)
    if v.kind == INVARIANT_VIOLATED:
        res.path = _boundary_projection(ir, btm, ts, v.path)
        res.replay = replay_path(btm, res.path)
    return res


def _symbol_fixer(btm: BTM):
    from .composition import _resolver_for
    return _resolver_for(btm.sbt)


def resolve_formula(btm: BTM, f: ltl.Formula) -> ltl.Formula:
    return ltl.map_atoms(f, _symbol_fixer(btm))


def resolve_predicate(btm: BTM, e: Expr) -> Expr:
    return _symbol_fixer(btm)(e)


def compare_levels(btm: BTM, formula: ltl.Formula, engine: str = "ndfs", limit: int | None = None) -> dict:
    """Verdict and state count per level."""
    out = {}
    for lvl in LEVELS:
        r = verify_ltl(btm, formula, lvl, engine, limit)
        out[lvl.value] = {"verdict": r.kind, "states": r.states, "transitions": r.transitions,
                          "replay_ok": None if r.replay is None else r.replay.ok}
    return out


def product_check_ltl(btm: BTM, formula: ltl.Formula, engine: str = "ndfs", limit: int | None = None) -> Result:
    """Model-check directly on the explicit product (no IR)."""
    formula = resolve_formula(btm, formula)
    ts = reachable(btm, limit)
    _require_complete(ts)
    v = check_ltl(ts, formula, engine)
    res = Result(v, OptLevel.FULL_OPT, len(ts), ts.edge_count)
    if v.kind == VIOLATED:
        res.prefix = [ts.states[i] for i in v.prefix]
        res.cycle = [ts.states[i] for i in v.cycle]
        res.replay = replay_lasso(btm, res.prefix, res.cycle)
    return res


# ---------------------------------------------------------------------------
# runtime monitoring vs design-time verification


@dataclass
class MonitorComparison:
    """One fault seen twice: by the runtime monitor on a scripted run and by the model checker."""

    predicate: Expr
    runtime: RuntimeReport
    design: Result
    runtime_flip: int | None
    lasso_flip: int | None
    lasso_mode_at_flip: bool | None

    @property
    def agrees(self) -> bool:
        return (self.runtime.latency is not None and self.runtime.detected_at == self.runtime_flip
                and self.design.kind == VIOLATED and self.design.replay is not None and self.design.replay.ok
                and self.lasso_flip is not None and bool(self.lasso_mode_at_flip))

    def to_json(self) -> dict:
        return {
            "runtime": self.runtime.to_json(),
            "runtime_flip": self.runtime_flip,
            "verdict": self.design.kind,
            "lasso_flip": self.lasso_flip,
            "lasso_mode_at_flip": self.lasso_mode_at_flip,
            "replay_ok": None if self.design.replay is None else self.design.replay.ok,
            "agrees": self.agrees,
        }


def compare_monitoring(btm: BTM, scenario: Scenario, predicate: Expr, max_steps: int = 30,
                       level: OptLevel | str = OptLevel.FULL_OPT) -> MonitorComparison:
    """Runtime detection of a scripted fault next to verification of ``G predicate``."""
    predicate = resolve_predicate(btm, predicate)
    holds = compile_expr(predicate)
    report = simulate_runtime(btm, scenario, max_steps)
    runtime_flip = next((k for k, (obs, _) in enumerate(report.trajectory) if not holds(obs.env())), None)
    design = verify_ltl(btm, ltl.Globally(ltl.Atom(predicate)), level)
    lasso_flip = mode = None
    if design.kind == VIOLATED:
        order = node_order(btm.sbt)
        seq = design.prefix + design.cycle
        lasso_flip = next((i for i, s in enumerate(seq) if not holds(s.env(order))), None)
        if lasso_flip is not None:
            mode = seq[lasso_flip].mode
    return MonitorComparison(predicate, report, design, runtime_flip, lasso_flip, mode)


__all__ = [
    "Verdict", "Result", "Replay", "TruncatedSystemError", "check_invariant", "check_ltl", "verify_ltl",
    "verify_invariant", "replay_lasso", "replay_path", "compare_levels", "product_check_ltl", "encode",
    "OptLevel", "LEVELS", "lasso_is_path", "lasso_word", "HOLDS", "VIOLATED", "INVARIANT_VIOLATED",
    "MonitorComparison", "compare_monitoring", "verify_ltl_smv",
    "resolve_formula", "resolve_predicate",
]
