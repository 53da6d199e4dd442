"""Bounded exhaustive exploration of observable traces.

The search space is (system state, position in the trace trie, rendering
context).  Trace sets are stored as a trie of rendered view events, so a set
is prefix-closed by construction and inclusion of one set in another is a
guided search of the second system along the first trie.
"""

from __future__ import annotations

from collections import deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

from .harness import ADVERSARY, Simulator, SysState, view_strings
from .scenario import Scenario

DEFAULT_BUDGET = 10**6


class TraceTrie:
    def __init__(self):
        self.children: List[Dict[str, int]] = [{}]
        self.paths: List[Tuple[str, ...]] = [()]
        self.witness: List[Tuple[str, ...]] = [()]

    def __len__(self) -> int:
        return len(self.paths)

    def extend(self, node: int, strings: Sequence[str], schedule: Tuple[str, ...]) -> int:
        for s in strings:
            nxt = self.children[node].get(s)
            if nxt is None:
                nxt = len(self.paths)
                self.children[node][s] = nxt
                self.children.append({})
                self.paths.append(self.paths[node] + (s,))
                self.witness.append(schedule)
            node = nxt
        return node

    def follow(self, node: int, strings: Sequence[str]) -> Optional[int]:
        for s in strings:
            node = self.children[node].get(s)
            if node is None:
                return None
        return node

    def merge(self, other: "TraceTrie") -> None:
        """Union with another trie, keeping the smaller witness per trace."""
        for i, path in enumerate(other.paths):
            node = self.extend(0, path, other.witness[i])
            if _witness_key(other.witness[i]) < _witness_key(self.witness[node]):
                self.witness[node] = other.witness[i]


def _witness_key(schedule: Tuple[str, ...]):
    return (len(schedule), schedule)


@dataclass
class ExploreResult:
    trie: TraceTrie
    complete: bool
    states: int

    @property
    def traces(self) -> List[Tuple[str, ...]]:
        return sorted(self.trie.paths, key=lambda p: (len(p), p))

    def witness_of(self, trace: Tuple[str, ...]) -> Tuple[str, ...]:
        node = self.trie.follow(0, trace)
        if node is None:
            raise KeyError(trace)
        return self.trie.witness[node]


def _schedule(parents: List[Tuple[int, str]], idx: int) -> Tuple[str, ...]:
    out = []
    while idx > 0:
        idx, label = parents[idx]
        out.append(label)
    return tuple(reversed(out))


def _bfs(sim: Simulator, mode: str, budget: int, prefix: Sequence[str] = ()):
    trie = TraceTrie()
    s, evs = sim.initial()
    strings, ctx = view_strings(evs, mode, ())
    node = trie.extend(0, strings, ())
    for label in prefix:
        s, evs = sim.step(s, label)
        strings, ctx = view_strings(evs, mode, ctx)
        node = trie.extend(node, strings, tuple(prefix))
    parents: List[Tuple[int, str]] = [(0, "")]
    root = 0
    if prefix:
        # The prefix is stored as a chain so witnesses come out whole.
        for label in prefix:
            parents.append((len(parents) - 1, label))
        root = len(parents) - 1
    seen = {(s, node, ctx)}
    queue = deque([(s, node, ctx, root)])
    complete = True
    while queue:
        s, node, ctx, ref = queue.popleft()
        for label in sim.choices(s):
            s2, evs = sim.step(s, label)
            strings, ctx2 = view_strings(evs, mode, ctx)
            key_ref = len(parents)
            parents.append((ref, label))
            node2 = trie.extend(node, strings, _LazySchedule(parents, key_ref)) if strings else node
            key = (s2, node2, ctx2)
            if key in seen:
                continue
            if len(seen) >= budget:
                complete = False
                queue.clear()
                break
            seen.add(key)
            queue.append((s2, node2, ctx2, key_ref))
    trie.witness = [w.resolve() if isinstance(w, _LazySchedule) else w for w in trie.witness]
    return trie, complete, len(seen)


class _LazySchedule:
    __slots__ = ("parents", "idx")

    def __init__(self, parents, idx):
        self.parents, self.idx = parents, idx

    def resolve(self) -> Tuple[str, ...]:
        return _schedule(self.parents, self.idx)


def _explore_subtree(args):
    sc, mode, budget, prefix = args
    trie, complete, states = _bfs(Simulator(sc), mode, budget, prefix)
    return trie, complete, states


def explore(sc: Scenario, mode: str = ADVERSARY, budget: Optional[int] = None, jobs: int = 1) -> ExploreResult:
    """All observable traces of ``sc`` up to its depth bound."""
    budget = sc.budget if budget is None else budget
    if jobs <= 1:
        trie, complete, states = _bfs(Simulator(sc), mode, budget)
        return ExploreResult(trie, complete, states)
    sim = Simulator(sc)
    s0, evs = sim.initial()
    first = sim.choices(s0)
    root_trie = TraceTrie()
    root_trie.extend(0, view_strings(evs, mode, ())[0], ())
    states = 1
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        parts = list(pool.map(_explore_subtree, [(sc, mode, budget, (label,)) for label in first]))
    complete = True
    for trie, ok, n in parts:
        root_trie.merge(trie)
        complete = complete and ok
        states += n
    return ExploreResult(root_trie, complete, states)


@dataclass
class Inclusion:
    unmatched: List[Tuple[str, ...]]
    complete: bool
    states: int

    @property
    def included(self) -> bool:
        return not self.unmatched


def included_in(a: ExploreResult, sc_b: Scenario, mode: str = ADVERSARY, depth: Optional[int] = None,
                budget: Optional[int] = None) -> Inclusion:
    """Which traces of ``a`` can the scenario ``sc_b`` also produce?  ``sc_b``
    runs with machine depth ``depth`` and is steered along ``a``'s trie."""
    if depth is not None:
        sc_b = replace(sc_b, max_depth=depth)
    budget = sc_b.budget if budget is None else budget
    sim = Simulator(sc_b)
    trie = a.trie
    matched = [False] * len(trie)
    s, evs = sim.initial()
    strings, ctx = view_strings(evs, mode, ())
    complete = True
    node = trie.follow(0, strings)
    seen = set()
    if node is not None:
        _mark(trie, matched, 0, strings)
        seen.add((s, node, ctx))
    queue = deque([(s, node, ctx)] if node is not None else [])
    remaining = len(trie) - sum(matched)
    while queue and remaining:
        s, node, ctx = queue.popleft()
        for label in sim.choices(s):
            s2, evs = sim.step(s, label)
            strings, ctx2 = view_strings(evs, mode, ctx)
            node2 = trie.follow(node, strings)
            if node2 is None:
                continue
            remaining -= _mark(trie, matched, node, strings)
            if not trie.children[node2]:
                continue  # leaf reached, nothing further to match
            key = (s2, node2, ctx2)
            if key in seen:
                continue
            if len(seen) >= budget:
                complete = False
                queue.clear()
                break
            seen.add(key)
            queue.append(key)
    unmatched = sorted((trie.paths[i] for i, ok in enumerate(matched) if not ok), key=lambda p: (len(p), p))
    return Inclusion(unmatched, complete, len(seen))


def _mark(trie: TraceTrie, matched: List[bool], node: int, strings: Sequence[str]) -> int:
    newly = 0
    if not matched[node]:
        matched[node] = True
        newly += 1
    for s in strings:
        node = trie.children[node][s]
        if not matched[node]:
            matched[node] = True
            newly += 1
    return newly


def reachable_states(sc: Scenario, budget: Optional[int] = None) -> Iterator[SysState]:
    """Every system state reachable within the depth bound (breadth first)."""
    budget = sc.budget if budget is None else budget
    sim = Simulator(sc)
    s, _ = sim.initial()
    seen = {s}
    queue = deque([s])
    while queue:
        s = queue.popleft()
        yield s
        for label in sim.choices(s):
            s2, _ = sim.step(s, label)
            if s2 not in seen and len(seen) < budget:
                seen.add(s2)
                queue.append(s2)
