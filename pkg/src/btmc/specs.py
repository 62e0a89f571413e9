"""Specification and scenario records produced by the DSL."""
from __future__ import annotations

from dataclasses import dataclass

from . import ltl
from .expr import Expr


@dataclass(frozen=True)
class Spec:
    """A named LTL property (``kind='ltl'``) or state invariant (``kind='invar'``)."""

    kind: str
    name: str | None
    formula: ltl.Formula | None = None
    predicate: Expr | None = None


@dataclass(frozen=True)
class Scenario:
    """Scripted environment overrides for runs and fault injection.

    ``init`` overrides initial values.  ``overrides`` entries ``(k, writes)``
    replace environment values right after the environment update of step
    ``k`` (0-based), so the observation of step ``k`` already shows them.
    ``choices`` entries ``(k, vector)`` fix the choice vector of step ``k``.
    """

    name: str | None = None
    init: tuple = ()
    overrides: tuple = ()
    choices: tuple = ()

    def override_at(self, k: int) -> dict:
        out = {}
        for step, writes in self.overrides:
            if step == k:
                out.update(writes)
        return out

    def choices_at(self, k: int):
        for step, vec in self.choices:
            if step == k:
                return vec
        return None

    @property
    def first_fault(self) -> int | None:
        steps = [s for s, _ in self.overrides] + [s for s, _ in self.choices]
        return min(steps) if steps else None

    def variables(self) -> set[str]:
        names = {n for n, _ in self.init}
        for _, writes in self.overrides:
            names.update(n for n, _ in writes)
        return names
