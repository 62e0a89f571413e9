from __future__ import annotations

from importlib import resources

import pytest

from btmc.dsl import parse_monitor, parse_scenario, parse_specs, parse_tree


def model_text(name: str) -> str:
    return resources.files("btmc").joinpath("models").joinpath(name).read_text(encoding="utf-8")


def tree_text(body: str, blackboard: str = "", environment: str = "", update: str = "",
              name: str = "t") -> str:
    """Wrap leaf definitions and a root line into a tree file."""
    parts = [f"tree {name} {{"]
    if blackboard:
        parts.append(f"  blackboard {{ {blackboard} }}")
    if environment:
        parts.append(f"  environment {{ {environment} }}")
    parts.append(body)
    if update:
        parts.append(f"  update {{ {update} }}")
    parts.append("}")
    return "\n".join(parts)


def make_tree(body: str, **kw):
    return parse_tree(tree_text(body, **kw))


@pytest.fixture(scope="session")
def grid():
    return parse_tree(model_text("grid_isr.bt"))


@pytest.fixture(scope="session")
def grid_faulty():
    return parse_tree(model_text("grid_isr_faulty.bt"))


@pytest.fixture(scope="session")
def monitors():
    return {m: parse_monitor(model_text(f"{m}.mon")) for m in ("budget", "distance", "collision")}


@pytest.fixture(scope="session")
def grid_specs():
    return parse_specs(model_text("grid_isr.ltl"))


@pytest.fixture(scope="session")
def scenarios():
    return {s: parse_scenario(model_text(f"{s}.scn")) for s in ("teleport", "overshoot")}
