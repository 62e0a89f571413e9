"""Symbolic guarded-command encoding of a tree-monitor product at four granularities.

The ``no_opt`` encoding is a micro-step machine: a program counter ``#pc``
walks the tree one node entry or exit at a time.  The other levels are derived
from it by symbolic execution, collapsing runs of micro-steps into single
commands:

* ``first_opt`` keeps the state right after the first micro-step of a tick,
* ``last_opt`` keeps the state right before the last micro-step of a tick,
* ``full_opt`` collapses a whole step (tick, environment update, monitor).

Every command has a guard over current values and an ordered list of updates.
An update may read ``Next(v)`` for a variable assigned earlier in the same
command; any other ``Next(v)`` reads the current value (frame rule).
"""
from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from . import ltl
from .composition import BTM, DEADLOCK_ATOM, MODE_ATOM, ProductState, TransitionSystem, explore, state_limit
from .expr import (
    FALSE, TRUE, Binary, Call, Const, Expr, Ite, Next, Status, StatusOf, Var, compile_expr, conj, disj,
    eq, fold, free_vars, int_range, neg, next_refs, status_key, substitute, walk,
)
from .model import BOOL, STATUS_DOMAIN, BoolDomain, Choice, EnumDomain, IntRange, Kind, TreeNode, iter_nodes
from .monitors import ESM, LTLMonitor, NFAMonitor, Verdict
from .semantics import TreeMemory, Valuation, initial_valuations, prepare

PC, MODE, ERR = "#pc", "#mode", "#err"
BOUNDARY = "boundary"
SAT_CHECK_LIMIT = 4096


class OptLevel(enum.Enum):
    NO_OPT = "no_opt"
    FIRST_OPT = "first_opt"
    LAST_OPT = "last_opt"
    FULL_OPT = "full_opt"

    @classmethod
    def parse(cls, s) -> "OptLevel":
        return s if isinstance(s, cls) else cls(s)


LEVELS = tuple(OptLevel)


@dataclass(frozen=True)
class Command:
    guard: Expr
    updates: tuple
    label: str = ""
    source: str | None = None
    target: str | None = None
    cond: Expr = TRUE


@dataclass
class IR:
    """Finite-domain variables, initial values, guarded commands and atom definitions."""

    name: str
    level: OptLevel
    variables: tuple
    init: tuple
    commands: tuple
    atoms: dict = field(default_factory=dict)
    aliases: dict = field(default_factory=dict)
    layout: dict = field(default_factory=dict)
    _buckets: dict | None = field(default=None, repr=False, compare=False)
    _compiled: list | None = field(default=None, repr=False, compare=False)

    @property
    def names(self) -> tuple:
        return tuple(n for n, _ in self.variables)

    @property
    def domains(self) -> dict:
        return dict(self.variables)

    @property
    def has_pc(self) -> bool:
        return PC in self.domains

    @property
    def boundary(self) -> Expr:
        return eq(Var(PC), Const(BOUNDARY)) if self.has_pc else TRUE

    def initial_states(self) -> list[tuple]:
        return [tuple(c) for c in itertools.product(*(vals for _, vals in self.init))]

    def env(self, state: Sequence) -> dict:
        d = dict(zip(self.names, state))
        for alias, target in self.aliases.items():
            d.setdefault(alias, d[target])
        return d


# ---------------------------------------------------------------------------
# helpers


def _at(pc: str) -> Expr:
    return eq(Var(PC), Const(pc))


def _st(s: Status) -> Expr:
    return Const(s)


def _svar(n: str) -> Var:
    return Var(status_key(n))


def _mem(n: str, i: int | None = None) -> str:
    return f"mem.{n}" if i is None else f"mem.{n}.{i}"


def _normalize(e: Expr) -> Expr:
    """Status queries become plain ``status.<node>`` variables."""
    return substitute(e, _StatusVars(), None)


class _StatusVars(dict):
    def get(self, key, default=None):
        if key.startswith("status."):
            return Var(key)
        return default


def _coerced(e: Expr, dom, ranges: Mapping) -> Expr:
    if isinstance(dom, IntRange):
        r = int_range(e, ranges)
        if r is None or r[0] < dom.lo or r[1] > dom.hi:
            return fold(Call("max", (Const(dom.lo), fold(Call("min", (Const(dom.hi), e))))))
    return e


def _write_variants(writes, domains, ranges):
    """Expand choice writes into deterministic update lists (one per option combination)."""
    per = []
    for w in writes:
        dom = domains[w.target]
        opts = w.value.options if isinstance(w.value, Choice) else (w.value,)
        per.append([(w.target, _coerced(_normalize(o), dom, ranges)) for o in opts])
    for combo in itertools.product(*per):
        yield list(combo), combo


# ---------------------------------------------------------------------------
# monitor encoding


def _monitor_layout(mon) -> list:
    if isinstance(mon, ESM):
        return list(mon.universe())
    if isinstance(mon, NFAMonitor):
        return list(mon.states)
    if isinstance(mon, LTLMonitor):
        return sorted(mon.live)
    raise TypeError(mon)


def _observed(e: Expr, tree_vars: set, local_consts: Mapping | None = None) -> Expr:
    """Rewrite a monitor predicate to read the post-step observation."""
    mapping = {v: Next(v) for v in tree_vars}
    if local_consts:
        mapping.update({k: Const(v) for k, v in local_consts.items()})
    return substitute(_normalize(e), mapping)


def _monitor_updates(btm: BTM, tree_vars: set):
    """Updates for monitor bits, the error flag and the latched mode (read after U_E)."""
    mon = btm.monitor
    universe = _monitor_layout(mon)
    index = {u: i for i, u in enumerate(universe)}
    bit = [f"mon.{i}" for i in range(len(universe))]
    incoming: list[list[Expr]] = [[] for _ in universe]
    if isinstance(mon, ESM):
        names = [d.name for d in mon.variables]
        doms = {d.name: d.domain for d in mon.variables}
        ranges = {d.name: (d.domain.lo, d.domain.hi) for d in mon.variables if isinstance(d.domain, IntRange)}
        for (s, loc), src in ((u, index[u]) for u in universe):
            consts = dict(zip(names, loc))
            for t in mon.transitions:
                if t.src != s:
                    continue
                g = _observed(t.guard, tree_vars, consts)
                if g == FALSE:
                    continue
                new_loc = list(Const(v) for v in loc)
                for a in t.updates:
                    i = names.index(a.target)
                    new_loc[i] = fold(_coerced(_observed(a.value, tree_vars, consts), doms[a.target], ranges))
                for loc2 in itertools.product(*(d.domain.values for d in mon.variables)):
                    cond = conj([g] + [fold(eq(x, Const(v))) for x, v in zip(new_loc, loc2)])
                    cond = fold(cond) if not isinstance(cond, Const) else cond
                    if cond != FALSE:
                        incoming[index[(t.dst, loc2)]].append(fold(Binary("&", Var(bit[src]), cond)))
    elif isinstance(mon, NFAMonitor):
        for t in mon.transitions:
            g = _observed(t.pred, tree_vars)
            if g != FALSE:
                incoming[index[t.dst]].append(fold(Binary("&", Var(bit[index[t.src]]), g)))
    else:
        ba = mon.automaton
        live = mon.live
        for q in universe:
            for t in ba.outgoing(q):
                if t.dst not in live:
                    continue
                lits = [_observed(a, tree_vars) for a in sorted(t.pos, key=repr)]
                lits += [neg(_observed(a, tree_vars)) for a in sorted(t.neg, key=repr)]
                incoming[index[t.dst]].append(fold(conj([Var(bit[index[q]])] + lits)))
    ups = [(bit[i], disj(incoming[i])) for i in range(len(universe))]
    nbits = [Next(b) for b in bit]
    any_on = disj(nbits)
    if isinstance(mon, ESM):
        if mon.rule == "existential":
            verdict = disj([Next(bit[index[u]]) for u in universe if mon.verdict_of(u[0]) is Verdict.CONTINGENCY])
        else:
            verdict = conj([any_on] + [neg(Next(bit[index[u]])) for u in universe
                                      if mon.verdict_of(u[0]) is Verdict.NOMINAL])
        ups.append((ERR, neg(any_on)))
    elif isinstance(mon, NFAMonitor):
        verdict = disj([Next(bit[index[q]]) for q in universe if q in mon.accepting])
    else:
        verdict = neg(any_on)
    ups.append((MODE, fold(Binary("|", Var(MODE), verdict))))
    return ups, universe


def monitor_config_bits(btm: BTM, config: frozenset) -> tuple:
    universe = _monitor_layout(btm.monitor)
    return tuple(u in config for u in universe)


# ---------------------------------------------------------------------------
# micro-step compiler


class _Micro:
    def __init__(self, btm: BTM):
        self.btm = btm
        sbt = btm.sbt
        self.sbt = sbt
        self.prep = prepare(sbt)
        self.order = self.prep.order
        self.domains = {d.name: d.domain for d in sbt.variables}
        self.ranges = {n: (d.lo, d.hi) for n, d in self.domains.items() if isinstance(d, IntRange)}
        self.cmds: list[Command] = []
        self.pcs = [BOUNDARY]

    def add(self, source, target, cond, updates, label):
        ups = list(updates)
        if target is not None:
            ups.append((PC, Const(target)))
        cond = fold(cond)
        if cond == FALSE:
            return
        self.cmds.append(Command(fold(Binary("&", _at(source), cond)), tuple(ups), label, source, target, cond))

    def build(self):
        nominal, cont = self.btm.nominal_root, self.btm.contingency_root
        reset = [(status_key(n), _st(Status.INVALID)) for n in self.order]
        for r in self.sbt.roots():
            for n in iter_nodes(r):
                self.pcs += [f"enter:{n.name}", f"exit:{n.name}"]
        ok = neg(Var(ERR))
        if cont is nominal:
            self.add(BOUNDARY, f"enter:{nominal.name}", ok, reset, "tick")
        else:
            self.add(BOUNDARY, f"enter:{nominal.name}", conj([ok, neg(Var(MODE))]), reset, "tick")
            self.add(BOUNDARY, f"enter:{cont.name}", conj([ok, Var(MODE)]), reset, "tick:contingency")
        self.add(BOUNDARY, None, Var(ERR), (), "deadlock")
        roots = [nominal] if cont is nominal else [nominal, cont]
        for r in roots:
            self.node(r)
            self.finish(r)
        return self.cmds

    def node(self, n: TreeNode):
        k = n.kind
        enter, done = f"enter:{n.name}", f"exit:{n.name}"
        if k.is_leaf:
            earlier = []
            for i, c in enumerate(n.clauses):
                g = _normalize(c.guard)
                cond = conj([g] + [neg(e) for e in earlier])
                earlier.append(g)
                for ups, combo in _write_variants(c.writes, self.domains, self.ranges):
                    self.add(enter, done, cond, ups + [(status_key(n.name), _st(c.status))],
                             f"{n.name}#{i}" + ("" if len(combo) == 0 else f"/{_combo_label(combo)}"))
            return
        for ch in n.children:
            self.node(ch)
        if k is Kind.DECORATOR:
            c = n.children[0]
            self.add(enter, f"enter:{c.name}", TRUE, (), f"{n.name}:enter")
            for s in (Status.FAILURE, Status.RUNNING, Status.SUCCESS):
                self.add(f"exit:{c.name}", done, eq(_svar(c.name), _st(s)),
                         [(status_key(n.name), _st(n.remap(s)))], f"{n.name}:{s.value}")
            return
        kids = n.children
        if k in (Kind.SELECTOR, Kind.SEQUENCE):
            keep = Status.FAILURE if k is Kind.SELECTOR else Status.SUCCESS
            other = Status.SUCCESS if k is Kind.SELECTOR else Status.FAILURE
            slot = _mem(n.name) if n.memory else None
            if slot:
                self.add(enter, f"enter:{kids[0].name}", eq(Var(slot), Const(-1)), (), f"{n.name}:start")
                for j, ch in enumerate(kids):
                    self.add(enter, f"enter:{ch.name}", eq(Var(slot), Const(j)), (), f"{n.name}:resume{j}")
            else:
                self.add(enter, f"enter:{kids[0].name}", TRUE, (), f"{n.name}:start")
            for i, ch in enumerate(kids):
                st = _svar(ch.name)
                src = f"exit:{ch.name}"
                if i + 1 < len(kids):
                    self.add(src, f"enter:{kids[i + 1].name}", eq(st, _st(keep)), (), f"{n.name}:next{i}")
                else:
                    self.add(src, done, eq(st, _st(keep)),
                             [(status_key(n.name), _st(keep))] + ([(slot, Const(-1))] if slot else []),
                             f"{n.name}:all")
                self.add(src, done, eq(st, _st(Status.RUNNING)),
                         [(status_key(n.name), _st(Status.RUNNING))] + ([(slot, Const(i))] if slot else []),
                         f"{n.name}:running{i}")
                self.add(src, done, eq(st, _st(other)),
                         [(status_key(n.name), _st(other))] + ([(slot, Const(-1))] if slot else []),
                         f"{n.name}:{other.value}{i}")
            return
        # parallel
        everyone = k is Kind.PARALLEL_ALL
        skip = Status.SUCCESS if everyone else Status.FAILURE
        flags = [_mem(n.name, i) for i in range(len(kids))] if n.memory else None

        def dispatch(src, i, tag):
            if flags is None:
                if i < len(kids):
                    self.add(src, f"enter:{kids[i].name}", TRUE, (), f"{n.name}:{tag}")
                else:
                    self.add(src, done, TRUE, finalize(), f"{n.name}:{tag}")
                return
            for j in range(i, len(kids)):
                cond = conj([Var(flags[m]) for m in range(i, j)] + [neg(Var(flags[j]))])
                self.add(src, f"enter:{kids[j].name}", cond, (), f"{n.name}:{tag}>{j}")
            self.add(src, done, conj([Var(flags[m]) for m in range(i, len(kids))]), finalize(), f"{n.name}:{tag}>end")

        def finalize():
            rs = []
            for i, ch in enumerate(kids):
                r = _svar(ch.name)
                if flags is not None:
                    r = Ite(Var(flags[i]), _st(skip), r)
                rs.append(r)
            is_s = [eq(r, _st(Status.SUCCESS)) for r in rs]
            is_f = [eq(r, _st(Status.FAILURE)) for r in rs]
            if everyone:
                res = Ite(conj(is_s), _st(Status.SUCCESS), Ite(disj(is_f), _st(Status.FAILURE), _st(Status.RUNNING)))
            else:
                res = Ite(disj(is_s), _st(Status.SUCCESS), Ite(conj(is_f), _st(Status.FAILURE), _st(Status.RUNNING)))
            ups = [(status_key(n.name), res)]
            if flags is not None:
                running = eq(Next(status_key(n.name)), _st(Status.RUNNING))
                for i, r in enumerate(rs):
                    ups.append((flags[i], Ite(running, eq(r, _st(skip)), FALSE)))
            return ups

        dispatch(enter, 0, "start")
        for i, ch in enumerate(kids):
            dispatch(f"exit:{ch.name}", i + 1, f"after{i}")

    def finish(self, root: TreeNode):
        src = f"exit:{root.name}"
        tree_vars = set(self.domains)
        mon_ups, _ = _monitor_updates(self.btm, tree_vars)
        clauses = self.sbt.env_update
        if not clauses:
            self.add(src, BOUNDARY, TRUE, mon_ups, "step")
            return
        earlier = []
        for i, c in enumerate(clauses):
            g = _normalize(c.guard)
            cond = conj([g] + [neg(e) for e in earlier])
            earlier.append(g)
            for ups, combo in _write_variants(c.writes, self.domains, self.ranges):
                self.add(src, BOUNDARY, cond, ups + mon_ups,
                         f"update#{i}" + ("" if not combo else f"/{_combo_label(combo)}"))


def _combo_label(combo) -> str:
    return ",".join(str(i) for i in range(len(combo)))


# ---------------------------------------------------------------------------
# symbolic collapsing


def _satisfiable(e: Expr, domains: Mapping) -> bool:
    """Exact check by enumeration when small; otherwise optimistic."""
    if e == FALSE:
        return False
    if e == TRUE:
        return True
    names = sorted(free_vars(e) | {status_key(n.node) for n in walk(e) if isinstance(n, StatusOf)})
    total = 1
    for n in names:
        dom = domains.get(n)
        if dom is None:
            return True
        total *= len(dom)
        if total > SAT_CHECK_LIMIT:
            return True
    fn = compile_expr(e)
    for combo in itertools.product(*(domains[n].values for n in names)):
        if fn(dict(zip(names, combo))):
            return True
    return False


def _collapse(micro: list[Command], domains: Mapping, starts: Sequence[str], stops: set, keep_pc: bool,
              max_paths: int = 200_000) -> list[Command]:
    by_src: dict[str, list[Command]] = {}
    for c in micro:
        by_src.setdefault(c.source, []).append(c)
    out: list[Command] = []
    for start in starts:
        stack = [(start, {PC: Const(start)}, TRUE, [])]
        while stack:
            pc, mapping, cond, labels = stack.pop()
            for c in reversed(by_src.get(pc, [])):
                g = substitute(c.cond, mapping)
                new_cond = fold(Binary("&", cond, g)) if g != TRUE else cond
                if new_cond == FALSE:
                    continue
                if g != TRUE and not _satisfiable(new_cond, domains):
                    continue
                new_map = dict(mapping)
                assigned: dict[str, Expr] = {}
                for v, e in c.updates:
                    nxt = {w: assigned.get(w, mapping.get(w, Var(w))) for w in next_refs(e)}
                    val = substitute(e, mapping, nxt)
                    new_map[v] = val
                    assigned[v] = val
                target = c.target if c.target is not None else pc
                lab = labels + [c.label]
                if target in stops:
                    ups = []
                    for v, e in new_map.items():
                        if v == PC:
                            continue
                        if e != Var(v):
                            ups.append((v, e))
                    ups.sort(key=lambda kv: kv[0])
                    if keep_pc:
                        ups.append((PC, Const(target)))
                    guard = fold(Binary("&", _at(start), new_cond)) if keep_pc else new_cond
                    out.append(Command(guard, tuple(ups), "|".join(lab), start if keep_pc else None,
                                       target if keep_pc else None, new_cond))
                    if len(out) > max_paths:
                        raise RuntimeError("symbolic collapse exceeded path limit")
                else:
                    stack.append((target, new_map, new_cond, lab))
    return out


# ---------------------------------------------------------------------------
# encoding


def _layout(btm: BTM):
    sbt = btm.sbt
    prep = prepare(sbt)
    variables = [(d.name, d.domain) for d in sbt.variables]
    variables += [(status_key(n), STATUS_DOMAIN) for n in prep.order]
    mem_vars = []
    for n in prep.mem_nodes:
        node = prep.index.by_name[n]
        if node.kind in (Kind.PARALLEL_ALL, Kind.PARALLEL_ONE):
            for i in range(len(node.children)):
                mem_vars.append((_mem(n, i), BOOL))
        else:
            mem_vars.append((_mem(n), IntRange(-1, len(node.children) - 1)))
    variables += mem_vars
    universe = _monitor_layout(btm.monitor)
    variables += [(f"mon.{i}", BOOL) for i in range(len(universe))]
    variables += [(MODE, BOOL), (ERR, BOOL)]
    return variables, universe


def encode(btm: BTM, level: OptLevel | str = OptLevel.FULL_OPT) -> IR:
    """Guarded-command IR of ``btm`` at the requested granularity."""
    level = OptLevel.parse(level)
    variables, universe = _layout(btm)
    mc = _Micro(btm)
    micro = mc.build()
    domains = dict(variables)
    nominal, cont = btm.nominal_root, btm.contingency_root
    enter_pcs = [f"enter:{nominal.name}"] + ([] if cont is nominal else [f"enter:{cont.name}"])
    exit_pcs = [f"exit:{nominal.name}"] + ([] if cont is nominal else [f"exit:{cont.name}"])
    if level is OptLevel.NO_OPT:
        pcs = tuple(mc.pcs)
        cmds = micro
    elif level is OptLevel.FIRST_OPT:
        pcs = (BOUNDARY, *enter_pcs)
        dom = dict(domains)
        dom[PC] = EnumDomain(pcs)
        cmds = [c for c in micro if c.source == BOUNDARY]
        cmds += _collapse(micro, dom, enter_pcs, {BOUNDARY}, True)
    elif level is OptLevel.LAST_OPT:
        pcs = (BOUNDARY, *exit_pcs)
        dom = dict(domains)
        dom[PC] = EnumDomain(pcs)
        cmds = _collapse(micro, dom, [BOUNDARY], set(exit_pcs) | {BOUNDARY}, True)
        cmds += [c for c in micro if c.source in exit_pcs]
    else:
        pcs = None
        cmds = _collapse(micro, domains, [BOUNDARY], {BOUNDARY}, False)
    if pcs is not None:
        variables = variables + [(PC, EnumDomain(pcs))]
    init_vals = initial_valuations(btm.sbt.variables)
    m0 = btm.monitor.initial_config()
    mode0 = (not m0 and isinstance(btm.monitor, LTLMonitor)) or (
        bool(m0) and btm.monitor.verdict(m0) is Verdict.CONTINGENCY)
    init = []
    for name, dom in variables:
        if any(name == d.name for d in btm.sbt.variables):
            init.append((name, tuple(dict.fromkeys(v[name] for v in init_vals))))
        elif name.startswith("status."):
            init.append((name, (Status.INVALID,)))
        elif name.startswith("mem."):
            init.append((name, (False,) if isinstance(dom, BoolDomain) else (-1,)))
        elif name.startswith("mon."):
            init.append((name, (universe[int(name[4:])] in m0,)))
        elif name == MODE:
            init.append((name, (mode0,)))
        elif name == ERR:
            init.append((name, (False,)))
        elif name == PC:
            init.append((name, (BOUNDARY,)))
    aliases = {MODE_ATOM: MODE, DEADLOCK_ATOM: ERR}
    layout = {"universe": universe, "order": mc.order, "mem_nodes": mc.prep.mem_nodes}
    return IR(btm.sbt.name, level, tuple(variables), tuple(init), tuple(cmds), {}, aliases, layout)


# ---------------------------------------------------------------------------
# evaluation


def _prepare(ir: IR):
    if ir._compiled is None:
        compiled = []
        buckets: dict = {}
        for i, c in enumerate(ir.commands):
            compiled.append((compile_expr(c.guard), [(v, compile_expr(e)) for v, e in c.updates]))
            buckets.setdefault(c.source if ir.has_pc else None, []).append(i)
        ir._compiled = compiled
        ir._buckets = buckets
    return ir._compiled, ir._buckets


class IREvalError(Exception):
    pass


def ir_successors(ir: IR, state: Sequence) -> list[tuple[int, tuple]]:
    """(command index, successor) for every enabled command, in command order."""
    compiled, buckets = _prepare(ir)
    names = ir.names
    env = dict(zip(names, state))
    idx = buckets.get(env[PC] if ir.has_pc else None, [])
    out = []
    for i in idx:
        guard, ups = compiled[i]
        if guard(env):
            new = dict(env)
            for v, fn in ups:
                new[v] = fn(env, new)
            out.append((i, tuple(new[n] for n in names)))
    return out


def ir_eval(ir: IR, state: Sequence, choices: int | None = None) -> set[tuple]:
    """Successor set of ``state``; with ``choices`` only that enabled command is taken."""
    if len(state) != len(ir.variables):
        raise IREvalError(f"state has {len(state)} values, IR has {len(ir.variables)} variables")
    for (name, values), v in zip(ir.variables, state):
        if v not in values:
            raise IREvalError(f"value {v!r} of {name!r} is outside its domain")
    succ = ir_successors(ir, state)
    if choices is not None:
        if not 0 <= choices < len(succ):
            raise IREvalError(f"choice {choices} out of range ({len(succ)} enabled commands)")
        return {succ[choices][1]}
    return {s for _, s in succ}


def ir_reachable(ir: IR, limit: int | None = None, jobs: int = 1) -> TransitionSystem:
    limit = state_limit() if limit is None else limit

    def expand(s):
        seen, out = set(), []
        for i, t in ir_successors(ir, s):
            if t not in seen:
                seen.add(t)
                out.append((i, t))
        return out

    states, init, succ, labels, trunc = explore(ir.initial_states(), expand, limit, jobs)
    return TransitionSystem(init, succ, lambda i: ir.env(states[i]), states, labels, trunc)


def is_boundary(ir: IR, state: Sequence) -> bool:
    return not ir.has_pc or dict(zip(ir.names, state))[PC] == BOUNDARY


# ---------------------------------------------------------------------------
# correspondence with product states


def to_product_state(ir: IR, btm: BTM, state: Sequence) -> ProductState:
    env = dict(zip(ir.names, state))
    prep = prepare(btm.sbt)
    resume = []
    for n in prep.mem_nodes:
        node = prep.index.by_name[n]
        if node.kind in (Kind.PARALLEL_ALL, Kind.PARALLEL_ONE):
            resume.append(tuple(env[_mem(n, i)] for i in range(len(node.children))))
        else:
            resume.append(env[_mem(n)])
    statuses = tuple(env[status_key(n)] for n in prep.order)
    val = Valuation({d.name: env[d.name] for d in btm.sbt.variables})
    universe = ir.layout["universe"]
    cfg = frozenset(u for i, u in enumerate(universe) if env[f"mon.{i}"])
    return ProductState(TreeMemory(tuple(resume), statuses), val, cfg, env[MODE],
                        "deadlock" if env[ERR] else None)


def from_product_state(ir: IR, btm: BTM, ps: ProductState) -> tuple:
    prep = prepare(btm.sbt)
    env = dict(ps.valuation)
    for n, st in zip(prep.order, ps.memory.statuses):
        env[status_key(n)] = st
    for n, slot in zip(prep.mem_nodes, ps.memory.resume):
        if isinstance(slot, tuple):
            for i, f in enumerate(slot):
                env[_mem(n, i)] = f
        else:
            env[_mem(n)] = slot
    for i, u in enumerate(ir.layout["universe"]):
        env[f"mon.{i}"] = u in ps.monitor
    env[MODE] = ps.mode
    env[ERR] = ps.error is not None
    if ir.has_pc:
        env[PC] = BOUNDARY
    return tuple(env[n] for n in ir.names)


# ---------------------------------------------------------------------------
# tick-boundary sampling of formulas


def sample_formula(f: ltl.Formula, b: Expr) -> ltl.Formula:
    """Translate ``f`` so that, read on a micro-step path, it speaks only about boundary positions.

    Positions where ``b`` is false are skipped; the translation is evaluated at a
    boundary position and assumes boundaries recur infinitely often.
    """
    B = ltl.Atom(b)
    nb = ltl.Not(B)

    def tr(g):
        if isinstance(g, ltl.Atom):
            return g
        if isinstance(g, ltl.Not):
            return ltl.Not(tr(g.arg))
        if isinstance(g, (ltl.And, ltl.Or, ltl.Implies)):
            return type(g)(tr(g.left), tr(g.right))
        if isinstance(g, ltl.Next):
            return ltl.Next(ltl.Until(nb, ltl.And(B, tr(g.arg))))
        if isinstance(g, ltl.Until):
            return ltl.Until(ltl.Implies(B, tr(g.left)), ltl.And(B, tr(g.right)))
        if isinstance(g, ltl.Release):
            return ltl.Release(ltl.And(B, tr(g.left)), ltl.Implies(B, tr(g.right)))
        if isinstance(g, ltl.StrongRelease):
            return tr(ltl.Until(g.right, ltl.And(g.left, g.right)))
        if isinstance(g, ltl.Globally):
            return ltl.Globally(ltl.Implies(B, tr(g.arg)))
        if isinstance(g, ltl.Finally):
            return ltl.Finally(ltl.And(B, tr(g.arg)))
        raise TypeError(g)

    return tr(f)


def formula_for(ir: IR, f: ltl.Formula) -> ltl.Formula:
    return f if not ir.has_pc else sample_formula(f, ir.boundary)


__all__ = [
    "OptLevel", "LEVELS", "IR", "Command", "encode", "ir_eval", "ir_successors", "ir_reachable",
    "to_product_state", "from_product_state", "sample_formula", "formula_for", "is_boundary",
    "monitor_config_bits", "PC", "MODE", "ERR", "BOUNDARY",
]
