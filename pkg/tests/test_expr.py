from __future__ import annotations

import pytest
from hypothesis import given, strategies as st

from btmc.dsl import parse_expr
from btmc.expr import (
    Binary, Const, EvalError, Status, StatusOf, Var, clamp, evaluate, fold, free_vars, int_range,
    status_key, substitute, to_text,
)


class TestEvaluate:
    def test_arithmetic_and_comparison(self):
        assert evaluate(parse_expr("x + 2 * y > 5"), {"x": 1, "y": 3}) is True

    def test_division_truncates_toward_zero(self):
        assert evaluate(parse_expr("a / b"), {"a": -7, "b": 2}) == -3
        assert evaluate(parse_expr("a % b"), {"a": -7, "b": 2}) == -1

    def test_division_by_zero(self):
        with pytest.raises(EvalError):
            evaluate(parse_expr("a / b"), {"a": 1, "b": 0})

    def test_unbound_name(self):
        with pytest.raises(EvalError):
            evaluate(Var("ghost"), {})

    def test_status_query(self):
        e = parse_expr("status(n) == S")
        assert evaluate(e, {status_key("n"): Status.SUCCESS}) is True

    def test_functions_and_ite(self):
        e = parse_expr("abs(x - 4) + min(x, 2) + max(x, 9) + ite(x > 0, 1, 0)")
        assert evaluate(e, {"x": 1}) == 3 + 1 + 9 + 1

    @given(st.integers(-50, 50), st.integers(-50, 50).filter(lambda b: b != 0))
    def test_div_mod_identity(self, a, b):
        env = {"a": a, "b": b}
        q, r = evaluate(parse_expr("a / b"), env), evaluate(parse_expr("a % b"), env)
        assert q * b + r == a and abs(r) < abs(b)
        assert q == int(a / b)


class TestTransform:
    def test_free_vars(self):
        assert free_vars(parse_expr("x + y > z & status(n) == R")) == {"x", "y", "z"}

    def test_substitute(self):
        e = substitute(parse_expr("x + 1"), {"x": Const(4)})
        assert evaluate(e, {}) == 5

    def test_fold(self):
        assert fold(parse_expr("2 * 3")) == Const(6)
        assert substitute(parse_expr("2 * 3 + 1"), {}) == Const(7)
        assert fold(parse_expr("true & x")) == Var("x")

    def test_clamp(self):
        e = clamp(Var("x"), 0, 3)
        assert [evaluate(e, {"x": v}) for v in (-2, 1, 8)] == [0, 1, 3]

    def test_int_range(self):
        assert int_range(parse_expr("x + y * 2"), {"x": (0, 4), "y": (-1, 1)}) == (-2, 6)

    def test_text_round_trip(self):
        for src in ["x + 1 > y", "!(a | b) & c", "status(n) == F", "ite(x > 0, x, -x) <= 3"]:
            e = parse_expr(src)
            assert parse_expr(to_text(e)) == e

    @given(st.integers(-20, 20), st.integers(-20, 20))
    def test_substitute_folds_constants(self, a, b):
        e = Binary("-", Binary("*", Const(a), Const(b)), Const(a))
        assert substitute(e, {}) == Const(a * b - a)

    def test_status_of_is_hashable(self):
        assert len({StatusOf("a"), StatusOf("a")}) == 1
