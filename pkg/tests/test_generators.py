from __future__ import annotations

from hypothesis import given, settings, strategies as st

from btmc import ltl
from btmc.composition import compose
from btmc.generators import (
    TreeShape, random_esm, random_formula, random_lasso, random_ltl_monitor, random_nfa_monitor, random_tree,
    random_tree_formula, random_ts,
)
from btmc.model import validate

seeds = st.integers(0, 10**6)


class TestGenerators:
    @settings(max_examples=50, deadline=None)
    @given(seeds)
    def test_trees_are_valid_and_seeded(self, seed):
        sbt = random_tree(seed)
        assert not [d for d in validate(sbt) if d.severity == "error"]
        assert random_tree(seed) == sbt

    @settings(max_examples=30, deadline=None)
    @given(seeds)
    def test_monitors_compose(self, seed):
        sbt = random_tree(seed)
        for gen in (random_esm, random_nfa_monitor, random_ltl_monitor):
            assert compose(sbt, gen(seed, sbt)).sbt == sbt

    def test_shape_bounds(self):
        shape = TreeShape(max_blackboard=1, max_environment=0, max_leaves=2)
        for seed in range(30):
            sbt = random_tree(seed, shape)
            assert len(sbt.blackboard) == 1 and not sbt.environment

    @settings(max_examples=50)
    @given(seeds, st.integers(1, 50))
    def test_transition_systems_are_total(self, seed, n):
        ts = random_ts(seed, n)
        assert 1 <= len(ts) <= n and ts.initial
        assert all(ts.succ[i] and all(0 <= j < len(ts) for j in ts.succ[i]) for i in range(len(ts)))

    @settings(max_examples=50)
    @given(seeds)
    def test_lassos_and_formulas(self, seed):
        prefix, cycle = random_lasso(seed, ("p", "q"))
        assert len(prefix) <= 3 and 1 <= len(cycle) <= 3
        assert {a.name for a in ltl.atoms(random_formula(seed, ("p", "q"), 3))} <= {"p", "q"}

    @settings(max_examples=30, deadline=None)
    @given(seeds)
    def test_tree_formulas_resolve(self, seed):
        from btmc.verifier import resolve_formula
        sbt = random_tree(seed)
        resolve_formula(compose(sbt), random_tree_formula(seed, sbt))
