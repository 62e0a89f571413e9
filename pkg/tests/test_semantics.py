from __future__ import annotations

import itertools
import json
import random

import pytest
from hypothesis import given, settings, strategies as st

from btmc.expr import Status
from btmc.expressiveness import NFA, nfa_to_bt, state_var, symbol_name
from btmc.generators import random_tree
from btmc.model import node_index
from btmc.semantics import (
    BranchingLimitExceeded, InsufficientChoices, LeafGuardExhaustion, UpdateGuardExhaustion,
    all_traces, dump_jsonl, first_resolver, initial_state, prepare,
    random_resolver, step, step_successors, tick, trace,
)
from conftest import make_tree

I, F, R, S = Status.INVALID, Status.FAILURE, Status.RUNNING, Status.SUCCESS

SEL = """
  check c { case true => F; }
  action a { case true => S; }
  root = sel(c, a);
"""


def statuses(sbt, result):
    return dict(zip(prepare(sbt).order, result.memory.statuses))


class TestTick:
    def test_selector(self):
        sbt = make_tree(SEL)
        res = tick(sbt, initial_state(sbt)[0])
        assert res.status is S
        assert res.statuses == {"sel": S, "c": F, "a": S}

    def test_sequence_stops_at_first_non_success(self):
        sbt = make_tree("""
  action a { case true => S; }
  action b { case true => R; }
  action c { case true => S; }
  root = seq(a, b, c);
""")
        res = tick(sbt, {})
        assert res.status is R and res.statuses["c"] is I

    def test_sequence_with_memory_resumes_at_running_child(self):
        sbt = make_tree("""
  action a { case true : n := n + 1 => S; }
  action b { case k == 0 : k := 1 => R; case true => S; }
  root = seq_mem(a, b);
""", blackboard="n : 0..5 = 0; k : 0..1 = 0;")
        val, mem = initial_state(sbt)
        first = tick(sbt, val, mem)
        assert first.status is R and first.valuation["n"] == 1
        second = tick(sbt, first.valuation, first.memory)
        assert second.statuses["a"] is I and second.statuses["b"] is S
        assert second.status is S and second.valuation["n"] == 1
        assert second.memory.resume == (-1,)

    def test_memoryless_sequence_restarts(self):
        sbt = make_tree("""
  action a { case true : n := n + 1 => S; }
  action b { case k == 0 : k := 1 => R; case true => S; }
  root = seq(a, b);
""", blackboard="n : 0..5 = 0; k : 0..1 = 0;")
        val, mem = initial_state(sbt)
        first = tick(sbt, val, mem)
        second = tick(sbt, first.valuation, first.memory)
        assert second.statuses["a"] is S and second.valuation["n"] == 2

    def test_selector_with_memory(self):
        sbt = make_tree("""
  check c { case true => F; }
  action a { case k == 0 : k := 1 => R; case true => S; }
  root = sel_mem(c, a);
""", blackboard="k : 0..1 = 0;")
        first = tick(sbt, *initial_state(sbt))
        second = tick(sbt, first.valuation, first.memory)
        assert second.statuses["c"] is I and second.status is S

    def test_inverter(self):
        sbt = make_tree("check c { case true => S; }\n root = inv(c);")
        assert tick(sbt, {}).status is F

    def test_success_is_running(self):
        sbt = make_tree("action a { case true => S; }\n root = success_is_running(a);")
        assert tick(sbt, {}).status is R

    def test_custom_map(self):
        sbt = make_tree("action a { case true => R; }\n root = map{R -> F, F -> S, S -> S}(a);")
        assert tick(sbt, {}).status is F

    @pytest.mark.parametrize("kids,par_all,par_one", [
        ("S, S", S, S), ("S, F", F, S), ("F, F", F, F), ("R, F", F, R), ("R, S", R, S), ("R, R", R, R),
    ])
    def test_parallel(self, kids, par_all, par_one):
        a, b = [k.strip() for k in kids.split(",")]
        body = f"action a {{ case true => {a}; }}\n action b {{ case true => {b}; }}\n"
        assert tick(make_tree(body + "root = par_all(a, b);"), {}).status is par_all
        assert tick(make_tree(body + "root = par_one(a, b);"), {}).status is par_one

    def test_parallel_effects_apply_left_to_right(self):
        sbt = make_tree("""
  action a { case true : x := x + 1 => S; }
  action b { case true : x := x * 3 => S; }
  root = par_all(a, b);
""", blackboard="x : 0..20 = 1;")
        assert tick(sbt, *initial_state(sbt)).valuation["x"] == 6

    def test_parallel_all_with_memory_skips_finished_children(self):
        sbt = make_tree("""
  action a { case true : n := n + 1 => S; }
  action b { case k == 0 : k := 1 => R; case true => S; }
  root = par_all_mem(a, b);
""", blackboard="n : 0..5 = 0; k : 0..1 = 0;")
        first = tick(sbt, *initial_state(sbt))
        assert first.status is R and first.memory.resume == ((True, False),)
        second = tick(sbt, first.valuation, first.memory)
        assert second.statuses["a"] is I and second.status is S and second.valuation["n"] == 1
        assert second.memory.resume == ((False, False),)

    def test_simultaneous_writes_read_old_values(self):
        sbt = make_tree("action a { case true : x := y, y := x => S; }\n root = a;",
                        blackboard="x : 0..3 = 1; y : 0..3 = 2;")
        v = tick(sbt, *initial_state(sbt)).valuation
        assert (v["x"], v["y"]) == (2, 1)

    def test_first_matching_clause_wins(self):
        sbt = make_tree("action a { case x > 0 : x := 0 => S; case true : x := 3 => F; }\n root = a;",
                        blackboard="x : 0..3 = 1;")
        res = tick(sbt, *initial_state(sbt))
        assert res.status is S and res.valuation["x"] == 0

    def test_writes_saturate(self):
        sbt = make_tree("action a { case true : x := x + 5 => S; }\n root = a;", blackboard="x : 0..3 = 2;")
        assert tick(sbt, *initial_state(sbt)).valuation["x"] == 3

    def test_leaf_guard_exhaustion(self):
        sbt = make_tree("action a { case x > 5 => S; }\n root = a;", blackboard="x : 0..9 = 0;")
        with pytest.raises(LeafGuardExhaustion) as exc:
            tick(sbt, *initial_state(sbt))
        assert exc.value.leaf == "a"

    def test_insufficient_choices(self):
        sbt = make_tree("action a { case true : x := choice{1, 2} => S; }\n root = a;", blackboard="x : 0..3 = 0;")
        with pytest.raises(InsufficientChoices) as exc:
            tick(sbt, *initial_state(sbt), choices=())
        assert exc.value.point.location and exc.value.arity == 2
        assert tick(sbt, *initial_state(sbt), choices=(1,)).valuation["x"] == 2


class TestStep:
    def test_identity_update(self):
        sbt = make_tree("action a { case true => S; }\n root = a;", environment="e : 0..3 = 2;")
        assert step(sbt, *initial_state(sbt)).valuation["e"] == 2

    def test_time_increments_and_saturates(self):
        sbt = make_tree("action a { case true => S; }\n root = a;", environment="time : 0..2 = 0;",
                        update="case true : time := time + 1;")
        obs = trace(sbt, 4)
        assert [o.valuation["time"] for o in obs] == [1, 2, 2, 2]

    def test_update_guard_exhaustion(self):
        sbt = make_tree("action a { case true => S; }\n root = a;", environment="e : 0..3 = 0;",
                        update="case e > 1 : e := 0;")
        with pytest.raises(UpdateGuardExhaustion):
            step(sbt, *initial_state(sbt))

    def test_update_sees_tick_results(self):
        sbt = make_tree("action a { case true : x := 1 => S; }\n root = a;", blackboard="x : 0..1 = 0;",
                        environment="e : 0..1 = 0;", update="case true : e := x;")
        assert step(sbt, *initial_state(sbt)).valuation["e"] == 1

    def test_grid_moves_both_agents(self, grid):
        val, mem = initial_state(grid)
        for choice in (0, 1, 2):
            res = step(grid, val, mem, (choice,))
            v = res.valuation
            d_loc = abs(v["loc_x"] - val["loc_x"]) + abs(v["loc_y"] - val["loc_y"])
            d_tar = abs(v["tar_x"] - val["tar_x"]) + abs(v["tar_y"] - val["tar_y"])
            assert d_loc == 1
            assert d_tar == (0 if choice == 0 else 1)

    def test_choice_order_leaves_then_update(self):
        sbt = make_tree("action a { case true : x := choice{0, 1} => S; }\n root = a;",
                        blackboard="x : 0..1 = 0;", environment="e : 0..1 = 0;",
                        update="case true : e := choice{0, 1};")
        res = step(sbt, *initial_state(sbt), choices=(1, 0))
        assert (res.valuation["x"], res.valuation["e"]) == (1, 0)
        assert [vec for vec, _ in step_successors(sbt, *initial_state(sbt))] == [(0, 0), (0, 1), (1, 0), (1, 1)]


class TestTrace:
    def test_empty(self, grid):
        assert trace(grid, 0) == []

    def test_matches_manual_steps(self):
        sbt = make_tree("action a { case true : x := x + 1 => R; }\n root = a;", blackboard="x : 0..9 = 0;")
        val, mem = initial_state(sbt)
        manual = []
        for _ in range(3):
            res = step(sbt, val, mem)
            manual.append(res.observation)
            val, mem = res.valuation, res.memory
        assert trace(sbt, 3) == manual

    def test_grid_reaches_stationary_target(self, grid):
        obs = trace(grid, 20, first_resolver)
        assert all(o.valuation["tar_x"] == 3 and o.valuation["tar_y"] == 3 for o in obs)
        hits = [i for i, o in enumerate(obs) if (o.valuation["loc_x"], o.valuation["loc_y"]) == (3, 3)]
        assert hits and hits[0] < 20

    def test_jsonl_dump(self, grid):
        lines = dump_jsonl(trace(grid, 2)).splitlines()
        first = json.loads(lines[0])
        assert list(first) == sorted(first)
        assert first["status:found"] == "F" and "loc_x" in first


class TestAllTraces:
    def test_deterministic_is_singleton(self):
        sbt = make_tree("action a { case true : x := x + 1 => R; }\n root = a;", blackboard="x : 0..9 = 0;")
        assert all(len(all_traces(sbt, k)) == 1 for k in range(5))

    def test_binary_choice_counts(self):
        sbt = make_tree("action a { case true => S; }\n root = a;", environment="e : 0..1 = 0;",
                        update="case true : e := choice{0, 1};")
        assert len(all_traces(sbt, 3)) == 8

    def test_branching_limit(self):
        sbt = make_tree("action a { case true => S; }\n root = a;", environment="e : 0..9 = 0;",
                        update="case true : e := choice{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};")
        with pytest.raises(BranchingLimitExceeded) as exc:
            all_traces(sbt, 2, limit=4)
        assert exc.value.limit == 4

    def test_nfa_tree_matches_brute_force(self):
        trans = (("p", "a", "p"), ("p", "b", "p"), ("p", "a", "q"))
        nfa = NFA("ends_a", ("a", "b"), ("p", "q"), "p", frozenset({"q"}), trans)
        sbt = nfa_to_bt(nfa)
        expected = set()
        for word in itertools.product("ab", repeat=5):
            cur, obs = {"p"}, []
            for i in range(4):
                cur = {d for (q, x, d) in trans if q in cur and x == word[i]}
                obs.append((word[i + 1], frozenset(cur), bool(cur & {"q"})))
            expected.add(tuple(obs))
        got = {
            tuple((o.valuation["inp"], frozenset(q for q in nfa.states if o.valuation[state_var(q)]),
                   o.root_status is S) for o in tr)
            for tr in all_traces(sbt, 4)
        }
        assert len(got) == len(expected) == 32
        assert got == {tuple((symbol_name(i), q, a) for i, q, a in tr) for tr in expected}


class TestProperties:
    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 100_000), st.integers(0, 1000))
    def test_invariants_on_random_trees(self, seed, rseed):
        sbt = random_tree(seed)
        idx = node_index(sbt)
        prep = prepare(sbt)
        env_names = [d.name for d in sbt.environment]
        bl_names = [d.name for d in sbt.blackboard]
        rng = random.Random(rseed)
        val, mem = initial_state(sbt, random_resolver(rseed))
        for k in range(8):
            options = step_successors(sbt, val, mem)
            vec, res = options[rng.randrange(len(options))]
            # determinism
            assert step(sbt, val, mem, vec) == res == step(sbt, val, mem, vec)
            # frame: the tick leaves the environment alone, the update leaves the blackboard alone
            t = tick(sbt, val, mem, vec)
            assert all(t.valuation[n] == val[n] for n in env_names)
            assert all(res.valuation[n] == t.valuation[n] for n in bl_names)
            # status soundness: a visited node has a visited parent
            sts = statuses(sbt, res)
            assert res.root_status is not I and sts[sbt.root.name] is res.root_status
            for name, st_ in sts.items():
                parent = idx.parent[name]
                if st_ is not I and parent is not None:
                    assert sts[parent] is not I
            # memory reset
            for slot, name in zip(res.memory.resume, prep.mem_nodes):
                if sts[name] in (S, F):
                    assert slot == -1 or slot == (False,) * len(slot)
            # domain closure
            for d in sbt.variables:
                assert res.valuation[d.name] in d.domain
            val, mem = res.valuation, res.memory

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 100_000))
    def test_deterministic_trees_have_one_trace(self, seed):
        sbt = random_tree(seed)
        if all(len(d.initial) == 1 for d in sbt.variables) and _choice_free(sbt):
            assert len(all_traces(sbt, 3)) == 1


def _choice_free(sbt):
    from btmc.model import Choice, iter_nodes
    clauses = [c for r in sbt.roots() for n in iter_nodes(r) for c in n.clauses] + list(sbt.env_update)
    return not any(isinstance(w.value, Choice) for c in clauses for w in c.writes)
