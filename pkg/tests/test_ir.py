from __future__ import annotations

import pytest
from hypothesis import given, settings, strategies as st

from btmc import ltl
from btmc.composition import compose, initial_product_states, reachable, successor_set
from btmc.dsl import parse_formula
from btmc.generators import random_monitor, random_tree
from btmc.ir import (
    LEVELS, IREvalError, OptLevel, encode, formula_for, from_product_state, ir_eval, ir_reachable,
    is_boundary, to_product_state,
)
from conftest import make_tree

COUNTER = make_tree("action a { case true : x := x + 1 => R; }\n root = a;", blackboard="x : 0..1 = 0;")
COIN = make_tree("action a { case true => S; }\n root = a;", environment="e : 0..1 = 0;",
                 update="case true : e := choice{0, 1};")


def full_opt_matches_interpreter(btm, limit=5000):
    ir = encode(btm, OptLevel.FULL_OPT)
    ts = reachable(btm, limit)
    for ps in ts.states:
        mine = {to_product_state(ir, btm, s) for s in ir_eval(ir, from_product_state(ir, btm, ps))}
        assert mine == successor_set(btm, ps)
    assert {to_product_state(ir, btm, s) for s in ir.initial_states()} == set(initial_product_states(btm))


def boundary_layers(ir, btm, steps):
    """Product states after k tick boundaries, k = 0..steps, following micro-steps."""
    layer = set(ir.initial_states())
    out = [{to_product_state(ir, btm, s) for s in layer}]
    for _ in range(steps):
        nxt, todo, seen = set(), list(layer), set()
        while todo:
            cur = todo.pop()
            for t in ir_eval(ir, cur):
                if is_boundary(ir, t):
                    nxt.add(t)
                elif t not in seen:
                    seen.add(t)
                    todo.append(t)
        layer = nxt
        out.append({to_product_state(ir, btm, s) for s in layer})
    return out


def product_layers(btm, steps):
    layer = set(initial_product_states(btm))
    out = [layer]
    for _ in range(steps):
        layer = {t for s in layer for t in successor_set(btm, s)}
        out.append(layer)
    return out


class TestFullOpt:
    def test_reproduces_step_on_grid(self, grid, monitors):
        full_opt_matches_interpreter(compose(grid, monitors["distance"]))

    def test_identity_fixed_point(self):
        btm = compose(COUNTER)
        ir = encode(btm, "full_opt")
        (s0,) = ir.initial_states()
        (s1,) = ir_eval(ir, s0)
        assert ir_eval(ir, s1) == {s1}

    def test_binary_choice(self):
        ir = encode(compose(COIN), "full_opt")
        (s0,) = ir.initial_states()
        assert len(ir_eval(ir, s0)) == 2
        assert len(ir_eval(ir, s0, 1)) == 1

    def test_domain_violation(self):
        ir = encode(compose(COUNTER), "full_opt")
        (s0,) = ir.initial_states()
        bad = (7,) + s0[1:]
        with pytest.raises(IREvalError):
            ir_eval(ir, bad)
        with pytest.raises(IREvalError):
            ir_eval(ir, s0, 5)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 100_000))
    def test_random_models(self, seed):
        sbt = random_tree(seed)
        btm = compose(sbt, random_monitor(seed, sbt))
        if not reachable(btm, 3000).truncated:
            full_opt_matches_interpreter(btm)


class TestLevels:
    def test_parse(self):
        assert [OptLevel.parse(x.value) for x in LEVELS] == list(LEVELS)
        assert len(LEVELS) == 4

    @pytest.mark.parametrize("level", ["no_opt", "first_opt", "last_opt"])
    def test_boundary_projection_matches_full_opt(self, grid, monitors, level):
        btm = compose(grid, monitors["distance"])
        assert boundary_layers(encode(btm, level), btm, 10) == product_layers(btm, 10)

    def test_state_count_ordering(self, grid, monitors):
        for mon in monitors.values():
            btm = compose(grid, mon)
            n = {lvl.value: len(ir_reachable(encode(btm, lvl))) for lvl in LEVELS}
            assert n["no_opt"] >= n["first_opt"] and n["last_opt"] >= n["full_opt"]
            assert n["full_opt"] == len(reachable(btm))

    def test_grid_counts(self, grid):
        n = [len(ir_reachable(encode(compose(grid), lvl))) for lvl in LEVELS]
        assert n == [7030, 1330, 1007, 665]

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 100_000))
    def test_random_boundary_projection(self, seed):
        sbt = random_tree(seed)
        btm = compose(sbt, random_monitor(seed, sbt))
        want = product_layers(btm, 4)
        for lvl in ("no_opt", "first_opt", "last_opt"):
            assert boundary_layers(encode(btm, lvl), btm, 4) == want

    def test_formula_sampling(self, grid):
        btm = compose(grid)
        f = parse_formula("G x > 1")
        assert formula_for(encode(btm, "full_opt"), f) == f
        sampled = formula_for(encode(btm, "no_opt"), f)
        assert sampled != f and isinstance(sampled, ltl.Globally)
