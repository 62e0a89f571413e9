from __future__ import annotations

import pydot
import pytest
from hypothesis import HealthCheck, given, settings, strategies as st

from btmc import ltl
from btmc.dsl import (
    ParseError, SourceFile, ValidationError, emit_dot, parse_expr, parse_formula, parse_items,
    parse_monitor, parse_scenario, parse_specs, parse_tree, pretty_print, print_monitor,
    print_scenario, print_spec,
)
from btmc.composition import resolve_monitor
from btmc.expr import Status, StatusOf, Var, walk
from btmc.generators import random_formula, random_monitor, random_tree
from btmc.model import Kind, node_index
from btmc.specs import Scenario, Spec
from conftest import make_tree


def dot_counts(text: str) -> tuple[int, int]:
    graphs = pydot.graph_from_dot_data(text)
    assert graphs, "DOT text did not parse"

    def walk(g):
        nodes = [n for n in g.get_nodes() if n.get_name().strip('"') not in ("node", "edge", "graph")]
        edges = list(g.get_edges())
        for sub in g.get_subgraphs():
            n2, e2 = walk(sub)
            nodes += n2
            edges += e2
        return nodes, edges

    nodes, edges = walk(graphs[0])
    return len(nodes), len(edges)


SEQ_AB = """
  action a { case true => S; }
  action b { case true => S; }
  root = seq(a, b);
"""


class TestParseTree:
    def test_bundled_example(self, grid):
        idx = node_index(grid)
        assert grid.name == "grid_isr"
        assert idx.by_name["found"].kind is Kind.CHECK
        assert grid.contingency.name == "go_home"
        assert {d.name for d in grid.environment} == {"tar_x", "tar_y", "tree_x", "tree_y", "time"}

    def test_composites_and_decorators(self):
        sbt = make_tree("""
  check c { case true => F; }
  action a { case true => S; }
  root = sel_mem top(inv(c), success_is_running(a), map{S -> F, F -> S, R -> R}(c2));
  check c2 { case true => R; }
""")
        top = sbt.root
        assert top.name == "top" and top.memory and top.kind is Kind.SELECTOR
        assert [ch.decorator for ch in top.children] == ["inv", "success_is_running", "map"]

    def test_enum_and_choice(self):
        sbt = make_tree("""
  action a { case mode == idle : mode := busy => S; case true => R; }
  root = a;
""", blackboard="mode : {idle, busy} = idle;", environment="e : 0..2 in {0, 1};",
                        update="case true : e := choice{0, 2};")
        d = sbt.decl("e")
        assert d.initial == (0, 1)
        assert sbt.env_update[0].writes[0].value.options

    def test_comments(self):
        assert parse_tree("# header\n" + "tree t { action a { case true => S; } # tail\n root = a; }").root.name == "a"

    def test_malformed_has_location(self):
        with pytest.raises(ParseError) as exc:
            parse_tree("tree t {\n  action a { case true => Q; }\n  root = a;\n}")
        err = exc.value
        assert (err.line, err.column) == (2, 27)
        assert err.found == "'Q'" and err.expected

    def test_unknown_leaf(self):
        with pytest.raises((ParseError, ValidationError)):
            parse_tree("tree t { root = ghost; }")

    def test_validation_errors_carry_locations(self):
        src = "tree t {\n  action a { case y > 1 => S; }\n  root = a;\n}"
        with pytest.raises(ValidationError) as exc:
            parse_tree(src)
        (d,) = exc.value.diagnostics
        assert d.rule == "undeclared variable" and (d.line, d.column) == (2, 10)

    def test_invalid_utf8(self):
        with pytest.raises(ParseError) as exc:
            parse_tree(b"tree \xff")
        assert (exc.value.line, exc.value.column) == (1, 6)

    def test_source_file_kinds(self, tmp_path):
        for ext, kind in [("bt", "tree"), ("mon", "monitor"), ("ltl", "spec"), ("scn", "scenario")]:
            p = tmp_path / f"f.{ext}"
            p.write_text("x")
            assert SourceFile.read(p).kind == kind


class TestFormulas:
    def test_operators(self):
        f = parse_formula("G (p -> F q) & (a U b) | X c & (d M e)")
        kinds = {type(g).__name__ for g in ltl.subformulas(f)}
        assert {"Globally", "Implies", "Finally", "Until", "Next", "StrongRelease"} <= kinds

    def test_atoms_are_predicates(self):
        f = parse_formula("G (x > 2 & status(n) == S)")
        assert ltl.atoms(f) == {parse_expr("x > 2"), parse_expr("status(n) == S")}
        assert StatusOf("n") in set(walk(parse_expr("status(n) == S")))

    def test_spec_round_trip(self, grid_specs):
        for s in grid_specs:
            assert parse_specs(print_spec(s)) == [s]

    @settings(max_examples=200, deadline=None)
    @given(st.integers(0, 100_000))
    def test_formula_round_trip(self, seed):
        f = random_formula(seed, [parse_expr("x > 1"), Var("p"), parse_expr("status(n) == R")], 3)
        assert parse_specs(print_spec(Spec("ltl", "f", formula=f)))[0].formula == f


class TestMonitorsAndScenarios:
    def test_bundled_monitors_round_trip(self, monitors):
        for m in monitors.values():
            assert parse_monitor(print_monitor(m)) == m

    def test_esm_fields(self, monitors):
        m = monitors["budget"]
        assert m.rule == "universal" and m.initial_states

    def test_nfa_monitor(self):
        m = parse_monitor("monitor nfa n { states p, q; init p; accept q; trans p -> q when x > 0; trans q -> q when true; }")
        assert m.accepting == frozenset({"q"}) and len(m.transitions) == 2

    def test_bare_ltl_block_is_a_monitor(self):
        m = parse_monitor("ltl safe { G x > 0 }")
        assert m.name == "safe"

    def test_scenario(self, scenarios):
        sc = scenarios["teleport"]
        assert sc.override_at(4) == {"tar_x": 0, "tar_y": 4}
        assert parse_scenario(print_scenario(sc)) == sc
        ov = scenarios["overshoot"]
        assert ov.choices_at(4) == (2,) and ov.first_fault == 4

    def test_scenario_first_fault_covers_choices_and_overrides(self):
        sc = Scenario("s", (), ((6, (("x", 1),)),), ((2, (0,)),))
        assert sc.first_fault == 2

    def test_construction_items(self):
        items = parse_items("nfa n { alphabet a, b; states p, q; init p; accept q; trans p a -> q; word a b; }")
        (nfa,) = items
        assert nfa.alphabet == ("a", "b") and nfa.words == (("a", "b"),)


class TestRoundTrip:
    def test_bundled_tree(self, grid, grid_faulty):
        for t in (grid, grid_faulty):
            assert parse_tree(pretty_print(t)) == t

    def test_printing_is_stable(self, grid):
        text = pretty_print(grid)
        assert pretty_print(parse_tree(text)) == text

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 100_000))
    def test_random_trees(self, seed):
        t = random_tree(seed)
        assert parse_tree(pretty_print(t)) == t

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 100_000))
    def test_random_monitors(self, seed):
        t = random_tree(seed)
        m = random_monitor(seed, t)
        # enum symbols parse as names until resolved against the tree
        assert resolve_monitor(parse_monitor(print_monitor(m)), t) == resolve_monitor(m, t)


class TestFuzz:
    @settings(max_examples=500, deadline=None, suppress_health_check=[HealthCheck.too_slow])
    @given(st.binary(max_size=200))
    def test_bytes_never_crash(self, data):
        for fn in (parse_tree, parse_items):
            try:
                fn(data)
            except (ParseError, ValidationError) as exc:
                _check_location(exc, data)

    @settings(max_examples=300, deadline=None)
    @given(st.text(alphabet="tree{}();:=,.|&!<>-+*/%#\n SFRab01xy", max_size=120))
    def test_token_soup_never_crashes(self, text):
        try:
            parse_tree("tree t {" + text)
        except (ParseError, ValidationError) as exc:
            _check_location(exc, text.encode())

    def test_deep_nesting_is_reported(self):
        with pytest.raises(ParseError):
            parse_expr("(" * 5000 + "x" + ")" * 5000)


def _check_location(exc, data: bytes):
    lines = data.count(b"\n") + 1
    if isinstance(exc, ParseError):
        assert 1 <= exc.line <= lines + 1 and exc.column >= 1
    else:
        for d in exc.diagnostics:
            assert d.line is None or 1 <= d.line <= lines + 1


class TestDot:
    def test_root_only(self):
        text = emit_dot(make_tree("action a { case true => S; }\n root = a;"))
        assert dot_counts(text) == (1, 0)

    def test_sequence(self):
        assert dot_counts(emit_dot(make_tree(SEQ_AB))) == (3, 2)

    def test_bundled_example(self, grid):
        n, e = dot_counts(emit_dot(grid))
        assert n == len(node_index(grid).preorder)
        assert e == n - 2  # two roots: nominal tree and contingency leaf

    def test_shapes(self, grid):
        text = emit_dot(grid)
        assert "shape=octagon" in text and "shape=box" in text and "shape=ellipse" in text

    def test_parallel_shape(self):
        text = emit_dot(make_tree("action a { case true => S; }\n root = par_all(a);"))
        assert "shape=trapezium" in text
        assert dot_counts(text) == (2, 1)

    def test_quoting(self):
        text = emit_dot(make_tree("action a { case true => S; }\n root = seq \"x\"(a);".replace('"x"', "x")))
        assert dot_counts(text) == (2, 1)


def test_status_words():
    assert [Status.parse(c) for c in "IFRS"] == list(Status)
