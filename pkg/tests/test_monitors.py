from __future__ import annotations

import pytest
from hypothesis import given, settings, strategies as st

from btmc.dsl import parse_expr, parse_formula, parse_monitor
from btmc.monitors import (
    LTLMonitor, MonitorDeadlock, Verdict, check_monitor, esm_step, esm_verdict, nfa_step,
    trivial_monitor,
)
from btmc.model import Scope, IntRange, VarDecl

N, C = Verdict.NOMINAL, Verdict.CONTINGENCY

BUDGET = """
monitor esm budget {
  vars { n : 0..3 = 0; }
  state ok : nominal;
  state late : contingency;
  init ok;
  trans ok -> ok when time < 10 do n := n + 1;
  trans ok -> late when time >= 10;
  trans late -> late;
}
"""

FORK = """
monitor esm fork {
  state a;
  state b : contingency;
  init a;
  trans a -> a when x > 0;
  trans a -> b when x > 0;
  trans b -> b;
  rule universal;
}
"""

ENDS_A = """
monitor nfa ends_a {
  states p, q;
  init p;
  accept q;
  trans p -> p when true;
  trans p -> q when x == 1;
}
"""


class TestESM:
    def test_true_self_loop_is_identity(self):
        m = trivial_monitor()
        cfg = m.initial_config()
        assert esm_step(m, cfg, {}) == cfg

    def test_guard_not_taken(self):
        m = parse_monitor(BUDGET)
        cfg = esm_step(m, m.initial_config(), {"time": 9})
        assert cfg == frozenset({("ok", (1,))})

    def test_guard_taken(self):
        m = parse_monitor(BUDGET)
        cfg = esm_step(m, m.initial_config(), {"time": 10})
        assert cfg == frozenset({("late", (0,))}) and esm_verdict(m, cfg) is C

    def test_local_updates_saturate(self):
        m = parse_monitor(BUDGET)
        cfg = m.initial_config()
        for _ in range(6):
            cfg = esm_step(m, cfg, {"time": 0})
        assert cfg == frozenset({("ok", (3,))})

    def test_two_enabled_transitions(self):
        m = parse_monitor(FORK)
        cfg = esm_step(m, m.initial_config(), {"x": 1})
        assert len(cfg) == 2

    def test_verdict_rules(self):
        m = parse_monitor(FORK)
        mixed = frozenset({("a", ()), ("b", ())})
        assert esm_verdict(m, frozenset({("a", ())})) is N
        assert esm_verdict(m, mixed) is N
        assert esm_verdict(m, frozenset({("b", ())})) is C
        ex = parse_monitor(FORK.replace("universal", "existential"))
        assert esm_verdict(ex, mixed) is C

    def test_deadlock(self):
        m = parse_monitor(FORK)
        with pytest.raises(MonitorDeadlock):
            esm_step(m, m.initial_config(), {"x": 0})

    @settings(max_examples=50, deadline=None)
    @given(st.integers(-5, 5))
    def test_true_self_loops_keep_states(self, x):
        m = parse_monitor("monitor esm m { vars { k : 0..3 = 0; } state a; init a; trans a -> a do k := k + 1; }")
        cfg = esm_step(m, m.initial_config(), {"x": x})
        assert {s for s, _ in cfg} == {s for s, _ in m.initial_config()}


class TestNFAMonitor:
    def test_identity_self_loops(self):
        m = parse_monitor("monitor nfa m { states p, q; init p; accept q; trans p -> p when true; trans q -> q when true; }")
        assert nfa_step(m, frozenset({"p", "q"}), {}) == frozenset({"p", "q"})

    def test_ends_in_a(self):
        m = parse_monitor(ENDS_A)
        after_a = nfa_step(m, m.initial_config(), {"x": 1})
        assert "q" in after_a and m.verdict(after_a) is C
        after_b = nfa_step(m, after_a, {"x": 0})
        assert "q" not in after_b and m.verdict(after_b) is N

    def test_empty_set_allowed(self):
        m = parse_monitor("monitor nfa m { states p; init p; accept p; trans p -> p when x == 1; }")
        assert nfa_step(m, m.initial_config(), {"x": 0}) == frozenset()

    @settings(max_examples=100, deadline=None)
    @given(st.sets(st.sampled_from(["p", "q"])), st.sets(st.sampled_from(["p", "q"])), st.integers(0, 1))
    def test_distributes_over_union(self, a, b, x):
        m = parse_monitor(ENDS_A)
        a, b = frozenset(a), frozenset(b)
        env = {"x": x}
        assert nfa_step(m, a | b, env) == nfa_step(m, a, env) | nfa_step(m, b, env)


class TestLTLMonitor:
    def test_safety_violation_detected(self):
        m = LTLMonitor("safe", parse_formula("G x < 3"))
        cfg = m.initial_config()
        for x in (0, 1, 2):
            cfg = m.step(cfg, {"x": x})
            assert m.verdict(cfg) is N
        assert m.verdict(m.step(cfg, {"x": 3})) is C

    def test_liveness_never_trips(self):
        m = LTLMonitor("live", parse_formula("F x == 3"))
        cfg = m.initial_config()
        for _ in range(5):
            cfg = m.step(cfg, {"x": 0})
        assert m.verdict(cfg) is N


class TestCheckMonitor:
    def test_unresolvable_atom(self):
        m = parse_monitor(BUDGET)
        scope = Scope([VarDecl("clock", IntRange(0, 9), (0,))])
        diags = check_monitor(m, scope)
        assert any(d.rule == "unresolvable atom" and "time" in d.message for d in diags)

    def test_resolvable(self):
        m = parse_monitor(BUDGET)
        scope = Scope([VarDecl("time", IntRange(0, 12), (0,))])
        assert [d for d in check_monitor(m, scope) if d.severity == "error"] == []

    def test_predicate_typing(self):
        m = parse_monitor("monitor esm m { state a; init a; trans a -> a when time; }")
        scope = Scope([VarDecl("time", IntRange(0, 12), (0,))])
        assert any(d.severity == "error" for d in check_monitor(m, scope))

    def test_parse_expr_helper(self):
        assert parse_expr("time >= 10")
