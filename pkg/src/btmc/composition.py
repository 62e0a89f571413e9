"""Tree-monitor product: stepping, explicit reachability and runtime fault runs.

A product state holds the tree memory, the valuation, the monitor configuration
set and the latched mode.  One product step ticks the active root (nominal, or
the contingency root once the mode has latched), applies the environment
update, feeds the resulting observation to the monitor and recomputes the mode.
"""
from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping

from . import ltl
from .expr import Expr, Status, compile_expr, status_key
from .model import (
    BOOL, SBT, Diagnostic, EnumDomain, Scope, TreeNode, VarDecl, iter_nodes, validate,
)
from .monitors import (
    ESM, ESMTransition, LTLMonitor, MonitorDeadlock, NFAMonitor, NFATransition, Verdict,
    check_monitor, trivial_monitor,
)
from .semantics import (
    DEFAULT_BRANCHING_LIMIT, BranchingLimitExceeded, InsufficientChoices, Observation, TreeMemory, Valuation,
    empty_memory, first_resolver, initial_valuations, node_order, step,
)
from .specs import Scenario

MODE_ATOM = "contingency"
DEADLOCK_ATOM = "monitor_deadlock"
DEFAULT_STATE_LIMIT = 10**6


class CompositionError(Exception):
    def __init__(self, diagnostics: list[Diagnostic]):
        self.diagnostics = diagnostics
        super().__init__("; ".join(str(d) for d in diagnostics))


@dataclass(frozen=True)
class BTM:
    """A tree, its monitor and (inside ``sbt.contingency``) the optional fallback root."""

    sbt: SBT
    monitor: object

    @property
    def nominal_root(self) -> TreeNode:
        return self.sbt.root

    @property
    def contingency_root(self) -> TreeNode:
        return self.sbt.contingency if self.sbt.contingency is not None else self.sbt.root


@dataclass(frozen=True)
class ProductState:
    memory: TreeMemory
    valuation: Valuation
    monitor: frozenset
    mode: bool = False
    error: str | None = None

    def env(self, order: tuple) -> dict:
        d = dict(self.valuation)
        for name, st in zip(order, self.memory.statuses):
            d[status_key(name)] = st
        d.setdefault(MODE_ATOM, self.mode)
        d.setdefault(DEADLOCK_ATOM, self.error is not None)
        return d


# ---------------------------------------------------------------------------
# composition


def _resolver_for(sbt: SBT, extra=()):
    symbols = {s for d in sbt.variables if isinstance(d.domain, EnumDomain) for s in d.domain.symbols}
    variables = {d.name for d in sbt.variables} | set(extra)
    from .dsl.parser import _resolve_expr
    return lambda e: _resolve_expr(e, symbols, variables)


def resolve_monitor(mon, sbt: SBT):
    """Turn enumeration-symbol identifiers in monitor atoms into constants."""
    if isinstance(mon, ESM):
        fix = _resolver_for(sbt, mon.local_names())
        trans = tuple(
            ESMTransition(t.src, t.dst, fix(t.guard),
                          tuple(replace(a, value=fix(a.value)) for a in t.updates))
            for t in mon.transitions)
        return replace(mon, transitions=trans)
    if isinstance(mon, NFAMonitor):
        fix = _resolver_for(sbt)
        return replace(mon, transitions=tuple(NFATransition(t.src, fix(t.pred), t.dst) for t in mon.transitions))
    if isinstance(mon, LTLMonitor):
        return LTLMonitor(mon.name, ltl.map_atoms(mon.formula, _resolver_for(sbt)))
    raise TypeError(f"not a monitor: {mon!r}")


def tree_scope(sbt: SBT, observers: bool = False) -> Scope:
    names = [n.name for r in sbt.roots() for n in iter_nodes(r)]
    extra = {MODE_ATOM: BOOL, DEADLOCK_ATOM: BOOL} if observers else None
    scope = Scope(sbt.variables, names, extra)
    if observers:
        for d in sbt.variables:
            scope.domains[d.name] = d.domain
    return scope


def compose(sbt: SBT, monitor=None, contingency: TreeNode | SBT | None = None) -> BTM:
    """Attach ``monitor`` (default: trivial) and an optional contingency tree to ``sbt``."""
    if contingency is not None:
        root = contingency.root if isinstance(contingency, SBT) else contingency
        sbt = replace(sbt, contingency=root)
    diags = [d for d in validate(sbt) if d.severity == "error"]
    if diags:
        raise CompositionError(diags)
    mon = trivial_monitor() if monitor is None else resolve_monitor(monitor, sbt)
    diags = [d for d in check_monitor(mon, tree_scope(sbt)) if d.severity == "error"]
    if diags:
        raise CompositionError(diags)
    return BTM(sbt, mon)


# ---------------------------------------------------------------------------
# stepping


def initial_product_states(btm: BTM) -> list[ProductState]:
    mem = empty_memory(btm.sbt)
    m0 = btm.monitor.initial_config()
    mode0 = bool(m0) and btm.monitor.verdict(m0) is Verdict.CONTINGENCY
    if not m0 and isinstance(btm.monitor, LTLMonitor):
        mode0 = True
    return [ProductState(mem, Valuation(v), m0, mode0) for v in initial_valuations(btm.sbt.variables)]


def observe(btm: BTM, state: ProductState, res, override: Mapping | None = None) -> ProductState:
    """Monitor update after a tree step (``res`` is a semantics.StepResult)."""
    val = res.valuation
    if override:
        val = val.updated(override)
    obs_env = dict(val)
    for name, st in zip(res.node_names, res.memory.statuses):
        obs_env[status_key(name)] = st
    try:
        cfg = btm.monitor.step(state.monitor, obs_env)
    except MonitorDeadlock:
        return ProductState(res.memory, val, frozenset(), state.mode, "deadlock")
    hit = btm.monitor.verdict(cfg) is Verdict.CONTINGENCY
    return ProductState(res.memory, val, cfg, state.mode or hit)


def active_root(btm: BTM, state: ProductState) -> TreeNode:
    return btm.contingency_root if state.mode else btm.nominal_root


def product_step(btm: BTM, state: ProductState, choices=None,
                 limit: int = DEFAULT_BRANCHING_LIMIT) -> list[tuple[tuple, ProductState]]:
    """Successors of ``state`` as (choice vector, state) pairs in lexicographic choice order.

    With ``choices`` given only that vector is followed.  Error states loop on
    themselves.  Semantics errors (guard exhaustion) propagate.
    """
    if state.error is not None:
        return [((), state)]
    root = active_root(btm, state)
    if choices is not None:
        res = step(btm.sbt, state.valuation, state.memory, tuple(choices), root)
        return [(tuple(choices), observe(btm, state, res))]
    out = []
    pending = [()]
    while pending:
        prefix = pending.pop()
        try:
            res = step(btm.sbt, state.valuation, state.memory, prefix, root)
        except InsufficientChoices as exc:
            pending.extend(prefix + (i,) for i in reversed(range(exc.arity)))
            continue
        out.append((prefix, observe(btm, state, res)))
        if len(out) > limit:
            raise BranchingLimitExceeded(limit)
    return out


def successor_set(btm: BTM, state: ProductState) -> set[ProductState]:
    return {s for _, s in product_step(btm, state)}


# ---------------------------------------------------------------------------
# explicit transition systems


@dataclass
class TransitionSystem:
    """Finite Kripke structure with numbered states; atoms are evaluated on ``env(i)``."""

    initial: list
    succ: list
    env_fn: Callable[[int], Mapping]
    states: list | None = None
    edge_choices: list | None = None
    truncated: bool = False
    _envs: dict = field(default_factory=dict, repr=False)
    _compiled: dict = field(default_factory=dict, repr=False)

    def __len__(self) -> int:
        return len(self.succ)

    @property
    def edge_count(self) -> int:
        return sum(len(s) for s in self.succ)

    def env(self, i: int) -> Mapping:
        e = self._envs.get(i)
        if e is None:
            e = self.env_fn(i)
            self._envs[i] = e
        return e

    def holds(self, atom: Expr, i: int) -> bool:
        fn = self._compiled.get(atom)
        if fn is None:
            fn = compile_expr(atom)
            self._compiled[atom] = fn
        return bool(fn(self.env(i)))

    def letter(self, atoms, i: int) -> frozenset:
        return frozenset(a for a in atoms if self.holds(a, i))

    def to_json(self, atoms=()) -> str:
        atoms = list(atoms)
        states = []
        for i in range(len(self)):
            entry = {"id": i, "initial": i in self.initial}
            if atoms:
                from .expr import to_text
                entry["labels"] = sorted(to_text(a) for a in atoms if self.holds(a, i))
            states.append(entry)
        edges = [[i, j] for i, js in enumerate(self.succ) for j in js]
        return json.dumps({"states": states, "edges": edges, "truncated": self.truncated}, sort_keys=True)


def state_limit(default: int = DEFAULT_STATE_LIMIT) -> int:
    raw = os.environ.get("BTMC_STATE_LIMIT")
    return int(raw) if raw else default


def explore(initial: list, expand: Callable, limit: int, jobs: int = 1):
    """Generic BFS with canonical numbering.

    ``expand(state)`` returns ordered (label, successor) pairs.  Returns
    ``(states, initial_ids, succ, edge_labels, truncated)``.
    """
    ids: dict = {}
    states: list = []
    succ: list = []
    labels: list = []
    init_ids = []
    for s in initial:
        if s not in ids:
            if len(states) >= limit:
                return states, init_ids, succ + [[] for _ in range(len(states) - len(succ))], labels, True
            ids[s] = len(states)
            states.append(s)
        init_ids.append(ids[s])
    init_ids = list(dict.fromkeys(init_ids))
    truncated = False
    head = 0
    pool = ThreadPoolExecutor(jobs) if jobs > 1 else None
    try:
        while head < len(states):
            batch = states[head:] if pool else [states[head]]
            expanded = list(pool.map(expand, batch)) if pool else [expand(states[head])]
            for out in expanded:
                row, lab = [], []
                for label, t in out:
                    j = ids.get(t)
                    if j is None:
                        if len(states) >= limit:
                            truncated = True
                            continue
                        j = len(states)
                        ids[t] = j
                        states.append(t)
                    if j not in row:
                        row.append(j)
                        lab.append(label)
                succ.append(row)
                labels.append(lab)
                head += 1
                if truncated:
                    break
            if truncated:
                break
    finally:
        if pool:
            pool.shutdown()
    while len(succ) < len(states):
        succ.append([])
        labels.append([])
    return states, init_ids, succ, labels, truncated


def reachable(btm: BTM, limit: int | None = None, jobs: int = 1) -> TransitionSystem:
    """Explicit product reachable from every initial state, BFS-numbered."""
    limit = state_limit() if limit is None else limit
    order = node_order(btm.sbt)
    states, init, succ, labels, trunc = explore(
        initial_product_states(btm), lambda s: product_step(btm, s), limit, jobs)
    return TransitionSystem(init, succ, lambda i: states[i].env(order), states, labels, trunc)


# ---------------------------------------------------------------------------
# runtime fault runs


class ScenarioError(Exception):
    def __init__(self, diagnostics: list[Diagnostic]):
        self.diagnostics = diagnostics
        super().__init__("; ".join(str(d) for d in diagnostics))


def check_scenario(sbt: SBT, sc: Scenario) -> list[Diagnostic]:
    decls = {d.name: d for d in sbt.variables}
    diags = []
    for name, value in list(sc.init) + [w for _, ws in sc.overrides for w in ws]:
        d = decls.get(name)
        if d is None:
            diags.append(Diagnostic("unknown variable", name, f"scenario refers to unknown variable {name!r}"))
        elif value not in d.domain:
            diags.append(Diagnostic("value out of domain", name, f"scenario value {value!r} outside domain of {name!r}"))
    for name, _ in sc.init:
        d = decls.get(name)
        if d is not None and len(d.initial) and name in decls and _init_value_allowed(d, sc) is False:
            diags.append(Diagnostic("initial value", name, f"scenario initial value for {name!r} is not admissible"))
    for k, _ in sc.overrides:
        if k < 0:
            diags.append(Diagnostic("step index", str(k), "scenario step indices must be non-negative"))
    return diags


def _init_value_allowed(d: VarDecl, sc: Scenario) -> bool:
    return dict(sc.init)[d.name] in d.domain


@dataclass
class RuntimeReport:
    injected_at: int | None
    detected_at: int | None
    contingency_at: int | None
    trajectory: list
    deadlock_at: int | None = None

    @property
    def missed(self) -> bool:
        return self.detected_at is None

    @property
    def latency(self) -> int | None:
        if self.detected_at is None or self.injected_at is None:
            return None
        return self.detected_at - self.injected_at

    def to_json(self) -> dict:
        return {
            "injected_at": self.injected_at,
            "detected_at": self.detected_at,
            "contingency_at": self.contingency_at,
            "latency": self.latency,
            "missed": self.missed,
            "deadlock_at": self.deadlock_at,
            "steps": len(self.trajectory),
        }


def scenario_start(btm: BTM, sc: Scenario | None, resolver=first_resolver) -> ProductState:
    from .semantics import initial_state
    val, mem = initial_state(btm.sbt, resolver)
    if sc is not None and sc.init:
        val = val.updated(dict(sc.init))
    m0 = btm.monitor.initial_config()
    mode0 = (not m0 and isinstance(btm.monitor, LTLMonitor)) or (
        bool(m0) and btm.monitor.verdict(m0) is Verdict.CONTINGENCY)
    return ProductState(mem, val, m0, mode0)


def run(btm: BTM, steps: int, scenario: Scenario | None = None, resolver=first_resolver,
        start: ProductState | None = None):
    """Drive the product for ``steps`` steps; yields (step index, StepResult, ProductState)."""
    state = scenario_start(btm, scenario, resolver) if start is None else start
    for k in range(steps):
        if state.error is not None:
            return
        vec = scenario.choices_at(k) if scenario is not None else None
        res = step(btm.sbt, state.valuation, state.memory, vec if vec is not None else resolver,
                   active_root(btm, state), step_index=k)
        override = scenario.override_at(k) if scenario is not None else None
        state = observe(btm, state, res, override)
        yield k, res, state


def state_observation(res, state: ProductState) -> Observation:
    """Observation of a step as the monitor saw it, scenario overrides included."""
    return Observation(state.valuation, res.observation.statuses, res.root_status)


def simulate_runtime(btm: BTM, scenario: Scenario | None, max_steps: int,
                     resolver=first_resolver) -> RuntimeReport:
    """Run a scripted fault scenario and report when the monitor engages contingency mode."""
    if scenario is not None:
        diags = check_scenario(btm.sbt, scenario)
        if diags:
            raise ScenarioError(diags)
    traj = []
    detected = deadlock = None
    start = scenario_start(btm, scenario, resolver)
    if start.mode:
        detected = 0
    for k, res, state in run(btm, max_steps, scenario, resolver, start):
        traj.append((state_observation(res, state), state.mode))
        if state.mode and detected is None:
            detected = k
        if state.error is not None and deadlock is None:
            deadlock = k
    injected = scenario.first_fault if scenario is not None else None
    return RuntimeReport(injected, detected, detected, traj, deadlock)


__all__ = [
    "BTM", "ProductState", "TransitionSystem", "RuntimeReport", "CompositionError", "ScenarioError",
    "compose", "product_step", "successor_set", "reachable", "explore", "simulate_runtime",
    "initial_product_states", "observe", "check_scenario", "run", "state_observation", "MODE_ATOM", "DEADLOCK_ATOM",
    "Status",
]
