"""Executable tick semantics: tick, step, traces and exhaustive trace enumeration.

Nondeterminism is resolved only through choice points (``choice{...}`` writes in
leaves and in the environment update).  A step consumes choices in a canonical
order: leaf choice points in node-visit order, then environment-update choice
points, each left to right within its clause.
"""
from __future__ import annotations

import json
import random
from collections.abc import Mapping
from dataclasses import dataclass
from typing import Any, Callable, Iterable, NamedTuple

from .expr import Status, compile_expr, format_value, status_key
from .model import SBT, Choice, Kind, TreeNode, coerce, initial_valuations, iter_nodes, node_index

DEFAULT_BRANCHING_LIMIT = 64


class SemanticsError(Exception):
    pass


@dataclass(frozen=True)
class ChoicePoint:
    location: str
    options: tuple
    step: int = 0


class InsufficientChoices(SemanticsError):
    def __init__(self, point: ChoicePoint):
        super().__init__(f"insufficient choices at {point.location} ({len(point.options)} options)")
        self.point = point

    @property
    def arity(self) -> int:
        return len(self.point.options)


class LeafGuardExhaustion(SemanticsError):
    def __init__(self, leaf: str):
        super().__init__(f"leaf guard exhaustion in {leaf!r}: no clause guard holds")
        self.leaf = leaf


class UpdateGuardExhaustion(SemanticsError):
    def __init__(self):
        super().__init__("U_E guard exhaustion: no environment update clause holds")


class BranchingLimitExceeded(SemanticsError):
    def __init__(self, limit: int):
        super().__init__(f"per-step branching exceeds limit {limit}")
        self.limit = limit


class ChoiceOutOfRange(SemanticsError):
    pass


# ---------------------------------------------------------------------------
# values


class Valuation(Mapping):
    """Immutable total map from variable names to values."""

    __slots__ = ("_d", "_hash")

    def __init__(self, data: Mapping[str, Any] | Iterable = ()):
        self._d = dict(data)
        self._hash = None

    def __getitem__(self, key):
        return self._d[key]

    def __iter__(self):
        return iter(self._d)

    def __len__(self):
        return len(self._d)

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(tuple(sorted(self._d.items(), key=lambda kv: kv[0])))
        return self._hash

    def __eq__(self, other):
        if isinstance(other, Valuation):
            return self._d == other._d
        return isinstance(other, Mapping) and self._d == dict(other)

    def __repr__(self):
        inner = ", ".join(f"{k}={format_value(v)}" for k, v in sorted(self._d.items()))
        return f"Valuation({inner})"

    def updated(self, changes: Mapping[str, Any]) -> "Valuation":
        d = dict(self._d)
        d.update(changes)
        return Valuation(d)

    def split(self, sbt: SBT) -> tuple[dict, dict]:
        bl = {d.name: self._d[d.name] for d in sbt.blackboard}
        env = {d.name: self._d[d.name] for d in sbt.environment}
        return bl, env


@dataclass(frozen=True)
class TreeMemory:
    """Resume slots of memory composites plus the per-node statuses of the last tick.

    ``resume`` holds one entry per memory composite in preorder: a child index
    (``-1`` for none) for selectors and sequences, or a tuple of per-child
    finished flags for parallels.  ``statuses`` is aligned with the node preorder.
    """

    resume: tuple
    statuses: tuple


class TickResult(NamedTuple):
    status: Status
    valuation: Valuation
    memory: TreeMemory
    statuses: dict


@dataclass(frozen=True)
class Observation:
    valuation: Valuation
    statuses: tuple
    root_status: Status

    def env(self) -> dict:
        d = dict(self.valuation)
        for name, st in self.statuses:
            d[status_key(name)] = st
        return d

    def to_json(self) -> dict:
        d = {k: _jsonable(v) for k, v in self.valuation.items()}
        for name, st in self.statuses:
            d[f"status:{name}"] = st.value
        return dict(sorted(d.items()))


def _jsonable(v):
    if isinstance(v, Status):
        return v.value
    if isinstance(v, (bool, int)):
        return v
    return str(v)


class StepResult(NamedTuple):
    root_status: Status
    valuation: Valuation
    memory: TreeMemory
    node_names: tuple

    @property
    def observation(self) -> Observation:
        return Observation(self.valuation, tuple(zip(self.node_names, self.memory.statuses)), self.root_status)


def dump_jsonl(observations: Iterable[Observation]) -> str:
    return "".join(json.dumps(o.to_json(), sort_keys=True) + "\n" for o in observations)


# ---------------------------------------------------------------------------
# prepared tree


class _Prepared:
    def __init__(self, sbt: SBT):
        self.sbt = sbt
        idx = node_index(sbt)
        self.index = idx
        self.order = idx.preorder
        self.pos = idx.position
        self.mem_nodes = tuple(n for n in self.order if idx.by_name[n].memory)
        self.mem_slot = {n: i for i, n in enumerate(self.mem_nodes)}
        self.domains = {d.name: d.domain for d in sbt.variables}
        self.guards = {}
        for node in idx.by_name.values():
            if node.kind.is_leaf:
                self.guards[node.name] = [_compile_clause(c) for c in node.clauses]
        self.update = [_compile_clause(c) for c in sbt.env_update]

    def empty_memory(self) -> TreeMemory:
        resume = []
        for n in self.mem_nodes:
            node = self.index.by_name[n]
            if node.kind in (Kind.PARALLEL_ALL, Kind.PARALLEL_ONE):
                resume.append((False,) * len(node.children))
            else:
                resume.append(-1)
        return TreeMemory(tuple(resume), (Status.INVALID,) * len(self.order))


def _compile_clause(c):
    writes = []
    for w in c.writes:
        if isinstance(w.value, Choice):
            writes.append((w.target, True, [compile_expr(o) for o in w.value.options]))
        else:
            writes.append((w.target, False, compile_expr(w.value)))
    return compile_expr(c.guard), writes, c.status


_PREPARED: dict[int, _Prepared] = {}


def prepare(sbt: SBT) -> _Prepared:
    p = _PREPARED.get(id(sbt))
    if p is None or p.sbt is not sbt:
        if len(_PREPARED) > 4096:
            _PREPARED.clear()
        p = _Prepared(sbt)
        _PREPARED[id(sbt)] = p
    return p


def empty_memory(sbt: SBT) -> TreeMemory:
    return prepare(sbt).empty_memory()


# ---------------------------------------------------------------------------
# choices


Resolver = Callable[[ChoicePoint], int]


def first_resolver(point: ChoicePoint) -> int:
    return 0


def random_resolver(seed: int | None = None) -> Resolver:
    rng = random.Random(seed)
    return lambda point: rng.randrange(len(point.options))


class _Choices:
    def __init__(self, source, step: int = 0):
        self.step = step
        self.used: list[int] = []
        if callable(source):
            self.resolver, self.seq = source, None
        else:
            self.resolver, self.seq = None, list(source or ())

    def pick(self, location: str, options: tuple) -> int:
        point = ChoicePoint(location, options, self.step)
        if self.seq is not None:
            if len(self.used) >= len(self.seq):
                raise InsufficientChoices(point)
            i = self.seq[len(self.used)]
        else:
            i = self.resolver(point)
        if not 0 <= i < len(options):
            raise ChoiceOutOfRange(f"choice {i} out of range at {location} ({len(options)} options)")
        self.used.append(i)
        return i


def _apply_writes(prep, writes, env, choices, location):
    new = {}
    for k, (target, is_choice, fn) in enumerate(writes):
        dom = prep.domains[target]
        if is_choice:
            opts = []
            for f in fn:
                v = coerce(f(env), dom)
                if v not in opts:
                    opts.append(v)
            new[target] = opts[choices.pick(f"{location}:{target}", tuple(opts))]
        else:
            new[target] = coerce(fn(env), dom)
    return new


# ---------------------------------------------------------------------------
# tick / step


class _Tick:
    def __init__(self, prep: _Prepared, env: dict, resume: list, choices: _Choices):
        self.prep = prep
        self.env = env
        self.resume = resume
        self.choices = choices
        self.statuses: dict[str, Status] = {}

    def run(self, node: TreeNode) -> Status:
        k = node.kind
        if k.is_leaf:
            s = self._leaf(node)
        elif k is Kind.DECORATOR:
            s = node.remap(self.run(node.children[0]))
        elif k in (Kind.SELECTOR, Kind.SEQUENCE):
            s = self._selseq(node)
        else:
            s = self._parallel(node)
        self.statuses[node.name] = s
        self.env[status_key(node.name)] = s
        return s

    def _leaf(self, node):
        env = self.env
        for guard, writes, status in self.prep.guards[node.name]:
            if guard(env):
                if writes:
                    env.update(_apply_writes(self.prep, writes, env, self.choices, node.name))
                return status
        raise LeafGuardExhaustion(node.name)

    def _selseq(self, node):
        keep_going = Status.FAILURE if node.kind is Kind.SELECTOR else Status.SUCCESS
        slot = self.prep.mem_slot.get(node.name)
        start = 0
        if slot is not None and self.resume[slot] >= 0:
            start = self.resume[slot]
        result = keep_going
        for i in range(start, len(node.children)):
            s = self.run(node.children[i])
            if s is not keep_going:
                result = s
                if slot is not None:
                    self.resume[slot] = i if s is Status.RUNNING else -1
                break
        else:
            if slot is not None:
                self.resume[slot] = -1
        return result

    def _parallel(self, node):
        everyone = node.kind is Kind.PARALLEL_ALL
        skip_as = Status.SUCCESS if everyone else Status.FAILURE
        slot = self.prep.mem_slot.get(node.name)
        done = self.resume[slot] if slot is not None else (False,) * len(node.children)
        results = []
        for ch, finished in zip(node.children, done):
            results.append(skip_as if finished else self.run(ch))
        if everyone:
            if all(r is Status.SUCCESS for r in results):
                out = Status.SUCCESS
            elif any(r is Status.FAILURE for r in results):
                out = Status.FAILURE
            else:
                out = Status.RUNNING
        else:
            if any(r is Status.SUCCESS for r in results):
                out = Status.SUCCESS
            elif all(r is Status.FAILURE for r in results):
                out = Status.FAILURE
            else:
                out = Status.RUNNING
        if slot is not None:
            if out is Status.RUNNING:
                self.resume[slot] = tuple(r is skip_as for r in results)
            else:
                self.resume[slot] = (False,) * len(node.children)
        return out


def _tick(prep, valuation, memory, choices: _Choices, root: TreeNode | None):
    env = dict(valuation)
    for name in prep.order:
        env[status_key(name)] = Status.INVALID
    t = _Tick(prep, env, list(memory.resume), choices)
    root = prep.sbt.root if root is None else root
    status = t.run(root)
    statuses = tuple(t.statuses.get(n, Status.INVALID) for n in prep.order)
    new_val = {name: env[name] for name in valuation}
    return status, new_val, TreeMemory(tuple(t.resume), statuses), env


def tick(sbt: SBT, valuation: Mapping, memory: TreeMemory | None = None, choices=(), root: TreeNode | None = None) -> TickResult:
    """One traversal from ``root`` (default: the nominal root).  Environment untouched."""
    prep = prepare(sbt)
    memory = prep.empty_memory() if memory is None else memory
    status, new_val, mem, _ = _tick(prep, valuation, memory, _Choices(choices), root)
    return TickResult(status, Valuation(new_val), mem, dict(zip(prep.order, mem.statuses)))


def _env_update(prep, val: dict, choices: _Choices) -> dict:
    if not prep.update:
        return val
    for guard, writes, _ in prep.update:
        if guard(val):
            if writes:
                val = dict(val)
                val.update(_apply_writes(prep, writes, val, choices, "U_E"))
            return val
    raise UpdateGuardExhaustion()


def step(sbt: SBT, valuation: Mapping, memory: TreeMemory | None = None, choices=(),
         root: TreeNode | None = None, step_index: int = 0) -> StepResult:
    """Tick, then apply the environment update once."""
    prep = prepare(sbt)
    memory = prep.empty_memory() if memory is None else memory
    ch = _Choices(choices, step_index)
    status, new_val, mem, _ = _tick(prep, valuation, memory, ch, root)
    new_val = _env_update(prep, new_val, ch)
    return StepResult(status, Valuation(new_val), mem, prep.order)


def step_successors(sbt: SBT, valuation: Mapping, memory: TreeMemory | None = None,
                    root: TreeNode | None = None, limit: int = DEFAULT_BRANCHING_LIMIT) -> list[tuple[tuple, StepResult]]:
    """Every (choice vector, result) pair of one step, in lexicographic choice order."""
    out = []
    pending = [()]
    while pending:
        prefix = pending.pop()
        try:
            res = step(sbt, valuation, memory, prefix, root)
        except InsufficientChoices as exc:
            pending.extend(prefix + (i,) for i in reversed(range(exc.arity)))
            continue
        out.append((prefix, res))
        if len(out) > limit:
            raise BranchingLimitExceeded(limit)
    return out


# ---------------------------------------------------------------------------
# traces


def initial_state(sbt: SBT, resolver: Resolver = first_resolver) -> tuple[Valuation, TreeMemory]:
    ch = _Choices(resolver)
    val = {}
    for d in sbt.variables:
        opts = tuple(d.initial)
        val[d.name] = opts[ch.pick(f"init:{d.name}", opts)] if len(opts) > 1 else opts[0]
    return Valuation(val), empty_memory(sbt)


def initial_states(sbt: SBT) -> list[tuple[Valuation, TreeMemory]]:
    mem = empty_memory(sbt)
    return [(Valuation(v), mem) for v in initial_valuations(sbt.variables)]


def trace(sbt: SBT, k: int, resolver: Resolver | str = first_resolver,
          start: tuple[Valuation, TreeMemory] | None = None) -> list[Observation]:
    """Observations of ``k`` consecutive steps from the initial state."""
    if resolver == "first":
        resolver = first_resolver
    val, mem = initial_state(sbt, resolver) if start is None else start
    out = []
    for i in range(k):
        res = step(sbt, val, mem, resolver, step_index=i)
        out.append(res.observation)
        val, mem = res.valuation, res.memory
    return out


def all_traces(sbt: SBT, k: int, limit: int = DEFAULT_BRANCHING_LIMIT) -> set[tuple[Observation, ...]]:
    """Every distinct length-``k`` observation sequence from every initial state."""
    result: set = set()
    memo: dict = {}

    def succ(val, mem):
        key = (val, mem)
        r = memo.get(key)
        if r is None:
            r = [res for _, res in step_successors(sbt, val, mem, limit=limit)]
            memo[key] = r
        return r

    def go(val, mem, depth, acc):
        if depth == k:
            result.add(tuple(acc))
            return
        for res in succ(val, mem):
            acc.append(res.observation)
            go(res.valuation, res.memory, depth + 1, acc)
            acc.pop()

    for val, mem in initial_states(sbt):
        go(val, mem, 0, [])
    return result


def node_order(sbt: SBT) -> tuple:
    return prepare(sbt).order


def visited_nodes(node: TreeNode) -> list[str]:
    return [n.name for n in iter_nodes(node)]
