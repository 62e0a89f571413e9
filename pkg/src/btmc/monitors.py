"""Contingency monitors over tick-boundary observations.

All three monitor kinds share one interface used by the product construction:
``initial_config()`` gives the starting configuration, ``step(config, env)`` consumes
one observation environment, and ``verdict(config)`` reports Nominal or
Contingency.  Configurations are frozensets so they hash into product states.
"""
from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field
from typing import Mapping

from . import ltl
from .expr import Expr, compile_expr
from .model import Diagnostic, ExprTypeError, Scope, coerce, expr_type


class Verdict(enum.Enum):
    NOMINAL = "nominal"
    CONTINGENCY = "contingency"


class MonitorDeadlock(Exception):
    """No enabled transition for any current configuration (not a Contingency)."""


# ---------------------------------------------------------------------------
# extended state machines


@dataclass(frozen=True)
class ESMTransition:
    src: str
    dst: str
    guard: Expr
    updates: tuple = ()


@dataclass(frozen=True)
class ESM:
    name: str
    states: tuple
    verdicts: tuple
    initial_states: tuple
    transitions: tuple
    variables: tuple = ()
    rule: str = "universal"

    kind = "esm"

    def verdict_of(self, state: str) -> Verdict:
        return dict(self.verdicts)[state]

    def initial_config(self) -> frozenset:
        locals_ = list(itertools.product(*(d.initial for d in self.variables)))
        return frozenset(itertools.product(self.initial_states, locals_))

    def step(self, config: frozenset, env: Mapping) -> frozenset:
        return esm_step(self, config, env)

    def verdict(self, config: frozenset) -> Verdict:
        return esm_verdict(self, config)

    def exprs(self) -> list[Expr]:
        out = []
        for t in self.transitions:
            out.append(t.guard)
            out.extend(a.value for a in t.updates)
        return out

    def local_names(self) -> set[str]:
        return {d.name for d in self.variables}

    def universe(self) -> list[tuple]:
        """Every (state, locals) configuration, in a fixed order."""
        locals_ = list(itertools.product(*(d.domain.values for d in self.variables)))
        return [(s, loc) for s in self.states for loc in locals_]


_COMPILED_T: dict = {}


def _compiled_transitions(esm: ESM):
    got = _COMPILED_T.get(id(esm))
    if got is not None and got[0] is esm:
        return got[1]
    by_src: dict[str, list] = {s: [] for s in esm.states}
    doms = {d.name: d.domain for d in esm.variables}
    names = [d.name for d in esm.variables]
    for t in esm.transitions:
        ups = [(names.index(a.target), compile_expr(a.value), doms[a.target]) for a in t.updates]
        by_src[t.src].append((compile_expr(t.guard), ups, t.dst))
    _COMPILED_T[id(esm)] = (esm, (by_src, names))
    return by_src, names


def esm_step(esm: ESM, configs, obs: Mapping) -> frozenset:
    """Union of successor configurations over every enabled transition."""
    by_src, names = _compiled_transitions(esm)
    base = obs.env() if hasattr(obs, "env") else obs
    out = set()
    for state, loc in configs:
        env = dict(base)
        env.update(zip(names, loc))
        for guard, ups, dst in by_src[state]:
            if guard(env):
                new = list(loc)
                for i, fn, dom in ups:
                    new[i] = coerce(fn(env), dom)
                out.add((dst, tuple(new)))
    if not out:
        raise MonitorDeadlock(f"monitor {esm.name!r} deadlocked: no transition enabled")
    return frozenset(out)


def esm_verdict(esm: ESM, configs) -> Verdict:
    """Contingency iff every configuration is in a Contingency state (``rule='universal'``).

    With ``rule='existential'`` a single Contingency configuration suffices.
    """
    if not configs:
        raise ValueError("esm_verdict needs a non-empty configuration set")
    flags = [esm.verdict_of(s) is Verdict.CONTINGENCY for s, _ in configs]
    hit = any(flags) if esm.rule == "existential" else all(flags)
    return Verdict.CONTINGENCY if hit else Verdict.NOMINAL


# ---------------------------------------------------------------------------
# NFA over observation predicates


@dataclass(frozen=True)
class NFATransition:
    src: str
    pred: Expr
    dst: str


@dataclass(frozen=True)
class NFAMonitor:
    """Recognizes bad prefixes: Contingency once an accepting state is current."""

    name: str
    states: tuple
    initial: str
    accepting: frozenset
    transitions: tuple

    kind = "nfa"

    @property
    def alphabet(self) -> tuple:
        seen = []
        for t in self.transitions:
            if t.pred not in seen:
                seen.append(t.pred)
        return tuple(seen)

    def initial_config(self) -> frozenset:
        return frozenset({self.initial})

    def step(self, config: frozenset, env: Mapping) -> frozenset:
        return nfa_step(self, config, env)

    def verdict(self, config: frozenset) -> Verdict:
        return Verdict.CONTINGENCY if config & self.accepting else Verdict.NOMINAL

    def exprs(self) -> list[Expr]:
        return [t.pred for t in self.transitions]

    def local_names(self) -> set[str]:
        return set()

    def universe(self) -> list:
        return list(self.states)


def nfa_step(nfa: NFAMonitor, states, obs: Mapping) -> frozenset:
    """Subset image of ``states`` under the observation; may be empty."""
    env = obs.env() if hasattr(obs, "env") else obs
    out = set()
    for t in nfa.transitions:
        if t.src in states and t.dst not in out and compile_expr(t.pred)(env):
            out.add(t.dst)
    return frozenset(out)


# ---------------------------------------------------------------------------
# LTL-derived safety monitor


@dataclass(frozen=True)
class LTLMonitor:
    """Tracks live Büchi states of the formula; Contingency once none remain (bad prefix)."""

    name: str
    formula: ltl.Formula
    _cache: dict = field(default_factory=dict, compare=False, hash=False, repr=False)

    kind = "ltl"

    @property
    def automaton(self) -> ltl.BuchiAutomaton:
        ba = self._cache.get("ba")
        if ba is None:
            ba = ltl.ltl_to_buchi(self.formula)
            self._cache["ba"] = ba
            self._cache["live"] = ba.live_states()
            self._cache["atoms"] = sorted(ba.atoms, key=repr)
        return ba

    @property
    def live(self) -> frozenset:
        self.automaton
        return self._cache["live"]

    def initial_config(self) -> frozenset:
        return frozenset({self.automaton.initial}) & self.live

    def letter(self, env: Mapping) -> frozenset:
        self.automaton
        return frozenset(a for a in self._cache["atoms"] if compile_expr(a)(env))

    def step(self, config: frozenset, env: Mapping) -> frozenset:
        env = env.env() if hasattr(env, "env") else env
        l = self.letter(env)
        ba = self.automaton
        out = set()
        for q in config:
            out.update(ba.successors(q, l))
        return frozenset(out) & self.live

    def verdict(self, config: frozenset) -> Verdict:
        return Verdict.NOMINAL if config else Verdict.CONTINGENCY

    def exprs(self) -> list[Expr]:
        return sorted(ltl.atoms(self.formula), key=repr)

    def local_names(self) -> set[str]:
        return set()

    def universe(self) -> list:
        return sorted(self.live)


Monitor = ESM | NFAMonitor | LTLMonitor


# ---------------------------------------------------------------------------
# structural checks


def check_monitor(mon, scope: Scope | None = None) -> list[Diagnostic]:
    """Structural diagnostics; with ``scope``, also resolve every atom against it."""
    diags: list[Diagnostic] = []
    if isinstance(mon, ESM):
        states = set(mon.states)
        if len(states) != len(mon.states):
            diags.append(Diagnostic("duplicate state", mon.name, "ESM state declared twice"))
        if not mon.initial_states:
            diags.append(Diagnostic("initial state", mon.name, "ESM needs at least one initial state"))
        for s in mon.initial_states:
            if s not in states:
                diags.append(Diagnostic("unknown state", s, f"initial state {s!r} not declared"))
        if {s for s, _ in mon.verdicts} != states:
            diags.append(Diagnostic("verdict map", mon.name, "verdict map must cover every state"))
        for d in mon.variables:
            for v in d.initial:
                if v not in d.domain:
                    diags.append(Diagnostic("initial value", d.name, f"initial value {v!r} outside domain"))
        local_names = {d.name for d in mon.variables}
        for t in mon.transitions:
            for s in (t.src, t.dst):
                if s not in states:
                    diags.append(Diagnostic("unknown state", s, f"transition uses undeclared state {s!r}"))
            for a in t.updates:
                if a.target not in local_names:
                    diags.append(Diagnostic("monitor write", a.target, f"monitor may only update its own variables ({a.target!r})"))
        if scope is not None:
            clash = local_names & set(scope.domains)
            for n in sorted(clash):
                diags.append(Diagnostic("name clash", n, f"monitor variable {n!r} shadows a tree variable"))
            sc = Scope(mon.variables, scope.nodes, dict(scope.domains))
            for d in mon.variables:
                sc.domains[d.name] = d.domain
            for t in mon.transitions:
                _resolve(diags, t.guard, sc, f"{t.src}->{t.dst}", "bool")
                for a in t.updates:
                    _resolve(diags, a.value, sc, f"{t.src}->{t.dst}", None)
    elif isinstance(mon, NFAMonitor):
        states = set(mon.states)
        if mon.initial not in states:
            diags.append(Diagnostic("unknown state", mon.initial, "initial state not declared"))
        for s in mon.accepting - states:
            diags.append(Diagnostic("unknown state", s, f"accepting state {s!r} not declared"))
        for t in mon.transitions:
            for s in (t.src, t.dst):
                if s not in states:
                    diags.append(Diagnostic("unknown state", s, f"transition uses undeclared state {s!r}"))
        reach = {mon.initial}
        frontier = [mon.initial]
        while frontier:
            s = frontier.pop()
            for t in mon.transitions:
                if t.src == s and t.dst not in reach:
                    reach.add(t.dst)
                    frontier.append(t.dst)
        for s in sorted(mon.accepting - reach):
            diags.append(Diagnostic("unreachable accepting state", s,
                                    f"accepting state {s!r} is unreachable", severity="warning"))
        if scope is not None:
            for t in mon.transitions:
                _resolve(diags, t.pred, scope, f"{t.src}->{t.dst}", "bool")
    elif isinstance(mon, LTLMonitor):
        if scope is not None:
            for a in ltl.atoms(mon.formula):
                _resolve(diags, a, scope, mon.name, "bool")
    return diags


def _resolve(diags, e, scope, subject, want):
    try:
        t = expr_type(e, scope)
    except ExprTypeError as exc:
        diags.append(Diagnostic("unresolvable atom", subject, str(exc)))
        return
    if want is not None and t != want:
        diags.append(Diagnostic("unresolvable atom", subject, f"expected a {want} predicate"))


def trivial_monitor() -> ESM:
    """One Nominal state with a ``true`` self-loop."""
    from .expr import TRUE
    return ESM("trivial", ("ok",), (("ok", Verdict.NOMINAL),), ("ok",), (ESMTransition("ok", "ok", TRUE),))
