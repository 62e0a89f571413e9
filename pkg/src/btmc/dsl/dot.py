"""Graphviz rendering of a tree (one cluster per root)."""
from __future__ import annotations

from ..model import SBT, Kind, TreeNode

SHAPES = {
    Kind.SELECTOR: "octagon",
    Kind.SEQUENCE: "box",
    Kind.PARALLEL_ALL: "trapezium",
    Kind.PARALLEL_ONE: "trapezium",
    Kind.DECORATOR: "diamond",
    Kind.ACTION: "ellipse",
    Kind.CHECK: "ellipse",
}
SYMBOLS = {
    Kind.SELECTOR: "?", Kind.SEQUENCE: "->", Kind.PARALLEL_ALL: "=A", Kind.PARALLEL_ONE: "=1",
}


def _q(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def _label(n: TreeNode) -> str:
    if n.kind in SYMBOLS:
        mem = "*" if n.memory else ""
        return f"{SYMBOLS[n.kind]}{mem} {n.name}"
    if n.kind is Kind.DECORATOR:
        return f"{n.decorator or 'map'} {n.name}"
    return n.name


def emit_dot(sbt: SBT) -> str:
    lines = [f"digraph {_q(sbt.name)} {{", "  node [fontname=\"Helvetica\"];"]
    for i, root in enumerate(sbt.roots()):
        title = "nominal" if i == 0 else "contingency"
        lines.append(f"  subgraph {_q('cluster_' + title)} {{")
        lines.append(f"    label={_q(title)};")
        stack = [root]
        while stack:
            n = stack.pop()
            attrs = [f"label={_q(_label(n))}", f"shape={SHAPES[n.kind]}"]
            if n.kind is Kind.CHECK:
                attrs.append("style=dashed")
            lines.append(f"    {_q(n.name)} [{', '.join(attrs)}];")
            for c in n.children:
                lines.append(f"    {_q(n.name)} -> {_q(c.name)};")
            stack.extend(reversed(n.children))
        lines.append("  }")
    lines.append("}")
    return "\n".join(lines) + "\n"
