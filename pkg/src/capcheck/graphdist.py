"""Computations as graphs, and their distribution along a cut.

A graph has input nodes (indegree 0), output nodes (outdegree 0) and state
nodes; every non-input node carries a function of its incoming values (taken
in node order), plus its own previous value for state nodes.  A step fires
one node: values at non-state predecessors are consumed, and a state node's
time advances by one.

Node functions are named by *label strings*.  Plain labels refer to the
registry below; transformations wrap them:

``hat-in``          explicated former input: ``t -> <t,t>``
``hat-out``         explicated output projection: ``<_,t> -> t``
``hat:<L>``         explicated node running ``L``
``cap:<L>``         cut source: MACs and encrypts what ``L`` computes
``decode:<v>``      checks and opens capabilities issued by ``v``
``decode-stale:<v>`` same, without the freshness check
``bound:<L>``       runs ``L`` only while the recorded clocks are within the
                    extra last argument
"""

from __future__ import annotations

import zlib
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

import yaml

from . import core
from .core import ACK, ERROR, INF, Enc, KeyId, Mac, Name, Nat, Term, Tup

TRUE, FALSE, NONE = Name("true"), Name("false"), Name("none")


class GraphError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Graphs

@dataclass(frozen=True)
class CompGraph:
    nodes: Tuple[str, ...]                       # in the total order
    edges: FrozenSet[Tuple[str, str]]
    state: FrozenSet[str]
    labels: Tuple[Tuple[str, str], ...]          # (node, label) for non-input nodes
    init: Tuple[Tuple[str, Term], ...] = ()      # initial values of state nodes
    params: Tuple[Tuple[str, object], ...] = ()  # shared by registry functions

    def __post_init__(self):
        validate(self)

    # Derived structure, recomputed on demand (graphs are small).
    def preds(self, v: str) -> Tuple[str, ...]:
        order = {n: i for i, n in enumerate(self.nodes)}
        return tuple(sorted((u for u, w in self.edges if w == v), key=order.__getitem__))

    def succs(self, v: str) -> Tuple[str, ...]:
        return tuple(w for u, w in sorted(self.edges) if u == v)

    @property
    def inputs(self) -> Tuple[str, ...]:
        targets = {w for _, w in self.edges}
        return tuple(v for v in self.nodes if v not in targets)

    @property
    def outputs(self) -> Tuple[str, ...]:
        sources = {u for u, _ in self.edges}
        return tuple(v for v in self.nodes if v not in sources)

    def label(self, v: str) -> str:
        return dict(self.labels)[v]

    def param(self, name: str, default=None):
        return dict(self.params).get(name, default)


def _on_cycle(g: CompGraph, v: str) -> bool:
    seen, todo = set(), [w for u, w in g.edges if u == v]
    while todo:
        x = todo.pop()
        if x == v:
            return True
        if x in seen:
            continue
        seen.add(x)
        todo.extend(w for u, w in g.edges if u == x)
    return False


def validate(g: CompGraph) -> None:
    names = set(g.nodes)
    if len(names) != len(g.nodes):
        raise GraphError("duplicate node names")
    for u, w in g.edges:
        if u not in names or w not in names:
            raise GraphError(f"edge ({u},{w}) mentions an unknown node")
    if not g.state <= names:
        raise GraphError("state nodes must be nodes")
    inputs = set(g.inputs)
    if inputs & g.state:
        raise GraphError(f"input nodes cannot be state nodes: {sorted(inputs & g.state)}")
    for v in g.nodes:
        if v in g.state:
            continue
        if len(g.succs(v)) > 1 or _on_cycle(g, v):
            raise GraphError(f"node {v} is on a cycle or fans out, so it must be a state node")
    labelled = dict(g.labels)
    for v in g.nodes:
        if v not in inputs and v not in labelled:
            raise GraphError(f"node {v} has no function")
        if v in inputs and v in labelled:
            raise GraphError(f"input node {v} cannot have a function")
    if set(dict(g.init)) != set(g.state):
        raise GraphError("every state node needs exactly one initial value")


# ---------------------------------------------------------------------------
# Registry of plain node functions.  A function returns None where it is
# undefined; the node is then not enabled.

Registry = Dict[str, Callable[..., Optional[Term]]]


def policy_term(grants: Iterable[Tuple[int, str]]) -> Tup:
    return Tup(tuple(Tup((Nat(k), Name(op))) for k, op in sorted(set(grants))))


def _grants(t) -> Optional[set]:
    if not isinstance(t, Tup):
        return None
    out = set()
    for p in t.items:
        if not (isinstance(p, Tup) and len(p.items) == 2 and isinstance(p.items[0], Nat)
                and isinstance(p.items[1], Name)):
            return None
        out.add((p.items[0].n, p.items[1].id))
    return out


def store_term(cells: Dict[str, Term]) -> Tup:
    return Tup(tuple(Tup((Name(f), core.as_term(v))) for f, v in sorted(cells.items())))


def _store(t) -> Optional[core.Store]:
    if not isinstance(t, Tup):
        return None
    cells = {}
    for p in t.items:
        if not (isinstance(p, Tup) and len(p.items) == 2 and isinstance(p.items[0], Name)):
            return None
        cells[p.items[0].id] = p.items[1]
    return core.Store.of(cells)


def _pair(t) -> Optional[Tuple[Term, Term]]:
    if isinstance(t, Tup) and len(t.items) == 2:
        return t.items[0], t.items[1]
    return None


def _request(t) -> Optional[Tuple[int, str]]:
    p = _pair(t)
    if p is None or not isinstance(p[0], Nat) or not isinstance(p[1], Name):
        return None
    try:
        core.check_op(p[1].id)
    except ValueError:
        return None
    return p[0].n, p[1].id


def _adm(g: CompGraph, req, F, own):
    r, grants, prev = _request(req), _grants(F), _pair(own)
    if r is None or grants is None or prev is None or not core.is_admin(r[1]):
        return None
    acc = _grants(prev[1])
    if acc is None:
        return None
    if (r[0], r[1]) not in g.param("controls", frozenset()):
        return Tup((ERROR, prev[1]))
    kind, k, op = core.parse_admin(r[1])
    acc = acc | {(k, op)} if kind == "grant" else acc - {(k, op)}
    return Tup((ACK, policy_term(acc)))


def _adm_out(g, own):
    p = _pair(own)
    return None if p is None else p[0]


def _sync(g, acc, _own):
    p = _pair(acc)
    return None if p is None or _grants(p[1]) is None else p[1]


def _decision(grants: set, req) -> Optional[Term]:
    r = _request(req)
    if r is None or core.is_admin(r[1]):
        return None
    return Tup((Name(r[1]), TRUE if r in grants else FALSE))


def _check(g, F, req):
    grants = _grants(F)
    return None if grants is None else _decision(grants, req)


def _check_static(g, req):
    return _decision(set(g.param("grants", frozenset())), req)


def _storage(g, decision, own):
    d, prev = _pair(decision), _pair(own)
    if d is None or prev is None or not isinstance(d[0], Name) or d[1] not in (TRUE, FALSE):
        return None
    rho = _store(prev[1])
    if rho is None:
        return None
    result, rho2 = core.exec_op(d[1] == TRUE, d[0].id, rho)
    return Tup((result, store_term(rho2.as_dict())))


def _store_out(g, own):
    p = _pair(own)
    return None if p is None else p[0]


def _succ(g, x):
    return Nat(x.n + 1) if isinstance(x, Nat) else None


def _add(g, *xs):
    return Nat(sum(x.n for x in xs)) if all(isinstance(x, Nat) for x in xs) else None


REGISTRY: Registry = {
    "nat.succ": _succ,
    "nat.add": _add,
    "fs.adm": _adm,
    "fs.adm_out": _adm_out,
    "fs.sync": _sync,
    "fs.check": _check,
    "fs.check_static": _check_static,
    "fs.store": _storage,
    "fs.store_out": _store_out,
}


# ---------------------------------------------------------------------------
# Configurations and steps

@dataclass(frozen=True)
class Config:
    sigma: Tuple[Tuple[str, Term], ...]   # sorted by node name
    tau: Tuple[Tuple[str, int], ...]

    def get(self, v: str) -> Optional[Term]:
        for n, t in self.sigma:
            if n == v:
                return t
        return None

    def time(self, v: str) -> int:
        return dict(self.tau)[v]

    def with_values(self, updates: Dict[str, Optional[Term]], tau: Optional[Dict[str, int]] = None) -> "Config":
        d = dict(self.sigma)
        for k, t in updates.items():
            if t is None:
                d.pop(k, None)
            else:
                d[k] = t
        return Config(tuple(sorted(d.items())), tuple(sorted((tau or dict(self.tau)).items())))


def initial_config(g: CompGraph) -> Config:
    return Config(tuple(sorted(g.init)), tuple(sorted((v, 0) for v in g.state)))


def timed_sources(g: CompGraph, v: str) -> Tuple[str, ...]:
    """State nodes feeding ``v`` through non-state nodes only; these are the
    clocks an explicated value at ``v`` records."""
    out, seen, todo = [], set(), list(g.preds(v))
    while todo:
        u = todo.pop(0)
        if u in seen:
            continue
        seen.add(u)
        if u in g.state:
            out.append(u)
        else:
            todo.extend(g.preds(u))
    order = {n: i for i, n in enumerate(g.nodes)}
    return tuple(sorted(out, key=order.__getitem__))


def split_record(g: CompGraph, v: str, record: Term):
    """Split the explicit record ``I`` computed at ``v`` into the input
    values and the (state node, clock) pairs it contains, or None."""
    inputs: List[Term] = []
    times: List[Tuple[str, Term]] = []

    def walk(node: str, rec: Term) -> bool:
        lab = g.label(node) if node not in g.inputs else None
        if lab == "hat-in":
            inputs.append(rec)
            return True
        preds = g.preds(node)
        if lab is not None and lab.startswith(("decode:", "decode-stale:")):
            return walk(lab.split(":", 1)[1], rec)
        if not isinstance(rec, Tup) or len(rec.items) != len(preds):
            return False
        for u, part in zip(preds, rec.items):
            if u in g.state:
                times.append((u, part))
            elif not walk(u, part):
                return False
        return True

    return (tuple(inputs), tuple(times)) if walk(v, record) else None


def _keys(v: str) -> Tuple[KeyId, KeyId]:
    return KeyId(f"K[{v}]"), KeyId(f"E[{v}]")


def evaluate(g: CompGraph, v: str, label: str, args: Sequence[Term], own: Optional[Term],
             cfg: Config) -> Optional[Term]:
    """Value of firing ``v`` with label ``label``; None when undefined."""
    if label == "hat-in":
        return Tup((args[0], args[0]))
    if label == "hat-out":
        p = _pair(args[0])
        return None if p is None else p[1]
    if label.startswith("hat:"):
        inner = label[4:]
        pairs = [_pair(a) for a in args]
        if any(p is None for p in pairs):
            return None
        if v in g.state:
            prev = _pair(own)
            if prev is None or not isinstance(prev[0], Nat):
                return None
            t = evaluate(g, v, inner, [p[1] for p in pairs], prev[1], cfg)
            return None if t is None else Tup((Nat(prev[0].n + 1), t))
        t = evaluate(g, v, inner, [p[1] for p in pairs], None, cfg)
        return None if t is None else Tup((Tup(tuple(p[0] for p in pairs)), t))
    if label.startswith("cap:"):
        t = evaluate(g, v, label[4:], args, own, cfg)
        p = _pair(t)
        if p is None:
            return None
        k, e = _keys(v)
        # Coins are derived from the clear header: headers never repeat
        # with different contents within one clock period.
        coin = zlib.crc32(p[0].text().encode())
        return Mac(Tup((p[0], Enc(coin, p[1], e))), k)
    if label.startswith(("decode:", "decode-stale:")):
        kind, src = label.split(":", 1)
        return _decode(g, src, args[0], cfg, check_fresh=(kind == "decode"))
    if label.startswith("bound:"):
        bound = args[-1]
        if not isinstance(bound, (Nat, core.Infinity)):
            return None
        for u in timed_sources(g, v):
            if not core.leq(Nat(cfg.time(u)), bound):
                return None
        return evaluate(g, v, label[6:], args[:-1], own, cfg)
    fn = REGISTRY.get(label)
    if fn is None:
        raise GraphError(f"unknown node function {label!r}")
    return fn(g, *args, *(() if v not in g.state else (own,)))


def _decode(g: CompGraph, src: str, kappa: Term, cfg: Config, check_fresh: bool) -> Optional[Term]:
    k, e = _keys(src)
    if not isinstance(kappa, Mac) or kappa.key != k:
        return None
    p = _pair(kappa.message)
    if p is None or not isinstance(p[1], Enc) or p[1].key != e:
        return None
    header = p[0]
    if check_fresh:
        rec = split_record(g, src, header)
        if rec is None:
            return None
        for u, clk in rec[1]:
            if clk != Nat(cfg.time(u)):
                return None
    return Tup((header, p[1].plaintext))


def enabled(g: CompGraph, cfg: Config, v: str) -> Optional[Config]:
    """The configuration after firing ``v``, or None if ``v`` cannot fire."""
    if v in g.inputs:
        return None
    preds = g.preds(v)
    args = [cfg.get(u) for u in preds]
    if any(a is None for a in args):
        return None
    own = cfg.get(v) if v in g.state else None
    t = evaluate(g, v, g.label(v), args, own, cfg)
    if t is None:
        return None
    updates: Dict[str, Optional[Term]] = {u: None for u in preds if u not in g.state}
    updates[v] = t
    tau = dict(cfg.tau)
    if v in g.state:
        tau[v] += 1
    return cfg.with_values(updates, tau)


def step(g: CompGraph, cfg: Config, v: str) -> Config:
    nxt = enabled(g, cfg, v)
    if nxt is None:
        raise GraphError(f"node {v} is not enabled")
    return nxt


# ---------------------------------------------------------------------------
# Transformations

def _after(order: List[str], anchor: str, new: str) -> None:
    order.insert(order.index(anchor) + 1, new)


def hat(v: str) -> str:
    return f"hat({v})"


def bar(v: str) -> str:
    return f"bar({v})"


def dec(v: str) -> str:
    return f"dec({v})"


def bnd(v: str) -> str:
    return f"bound({v})"


def explicate(g: CompGraph) -> CompGraph:
    order = list(g.nodes)
    edges = set(g.edges)
    labels = dict(g.labels)
    for v in g.inputs:
        order.insert(order.index(v), hat(v))
        edges.add((hat(v), v))
        labels[v] = "hat-in"
    for u in g.outputs:
        _after(order, u, hat(u))
        edges.add((u, hat(u)))
        labels[hat(u)] = "hat-out"
    for v, lab in g.labels:
        labels[v] = "hat:" + lab
    init = tuple((v, Tup((Nat(0), t))) for v, t in g.init)
    return CompGraph(tuple(order), frozenset(edges), g.state, tuple(sorted(labels.items())), init, g.params)


def check_cut(g: CompGraph, cut: Iterable[Tuple[str, str]]) -> Tuple[Tuple[str, str], ...]:
    cut = tuple(sorted(set(cut)))
    inputs = set(g.inputs)
    for v, u in cut:
        if (v, u) not in g.edges:
            raise GraphError(f"cut edge ({v},{u}) is not an edge")
        if v in inputs or v in g.state:
            raise GraphError(f"cut edge ({v},{u}) leaves an input or state node")
    return cut


def distribute(gh: CompGraph, cut, fresh: bool = True) -> CompGraph:
    """Split an explicated graph along ``cut``.  With ``fresh=False`` the
    decoder skips the clock check (a deliberately naive distribution)."""
    cut = check_cut(gh, cut)
    order = list(gh.nodes)
    edges = set(gh.edges) - set(cut)
    labels = dict(gh.labels)
    for v, u in cut:
        _after(order, v, dec(v))
        order.insert(order.index(dec(v)), bar(v))
        edges |= {(bar(v), dec(v)), (dec(v), u)}
        labels[v] = "cap:" + labels[v]
        labels[dec(v)] = ("decode:" if fresh else "decode-stale:") + v
    return CompGraph(tuple(order), frozenset(edges), gh.state, tuple(sorted(labels.items())), gh.init, gh.params)


def revise(g: CompGraph, cut) -> CompGraph:
    cut = check_cut(g, cut)
    order = list(g.nodes)
    edges = set(g.edges)
    labels = dict(g.labels)
    for v, _ in cut:
        order.append(bnd(v))
        edges.add((bnd(v), v))
        labels[v] = "bound:" + labels[v]
    return CompGraph(tuple(order), frozenset(edges), g.state, tuple(sorted(labels.items())), g.init, g.params)


# ---------------------------------------------------------------------------
# The example graphs

DEFAULT_GRANTS = ((1, "read:f"), (2, "read:f"), (1, "write:f:9"))
DEFAULT_CONTROLS = ((1, "revoke:2:read:f"), (1, "grant:2:write:f:9"))


def fs_graph(grants=DEFAULT_GRANTS, controls=DEFAULT_CONTROLS, store=(("f", 7),)) -> CompGraph:
    """Ideal file system with dynamic policy: admin input ``n1``, accumulator
    ``s2``, admin output ``n3``, policy ``s4``, request input ``n5``, access
    check ``n6``, store ``s7``, store output ``n8``."""
    F = policy_term(grants)
    return CompGraph(
        nodes=("n1", "s2", "n3", "s4", "n5", "n6", "s7", "n8"),
        edges=frozenset({("n1", "s2"), ("s2", "n3"), ("s2", "s4"), ("s4", "s2"), ("s4", "n6"),
                         ("n5", "n6"), ("n6", "s7"), ("s7", "n8")}),
        state=frozenset({"s2", "s4", "s7"}),
        labels=(("n3", "fs.adm_out"), ("n6", "fs.check"), ("n8", "fs.store_out"),
                ("s2", "fs.adm"), ("s4", "fs.sync"), ("s7", "fs.store")),
        init=(("s2", Tup((NONE, F))), ("s4", F), ("s7", Tup((NONE, store_term(dict(store)))))),
        params=(("controls", frozenset((int(k), a) for k, a in controls)),),
    )


def static_fs_graph(grants=DEFAULT_GRANTS, store=(("f", 7),)) -> CompGraph:
    """The static part: request input, access check against fixed grants,
    store and store output."""
    return CompGraph(
        nodes=("n5", "n6", "s7", "n8"),
        edges=frozenset({("n5", "n6"), ("n6", "s7"), ("s7", "n8")}),
        state=frozenset({"s7"}),
        labels=(("n6", "fs.check_static"), ("n8", "fs.store_out"), ("s7", "fs.store")),
        init=(("s7", Tup((NONE, store_term(dict(store))))),),
        params=(("grants", frozenset((int(k), o) for k, o in grants)),),
    )


FS_CUT = (("n6", "s7"),)


# ---------------------------------------------------------------------------
# Adversary interface and the trace-equivalence oracle

@dataclass(frozen=True)
class Port:
    """One way the adversary writes into a graph.

    ``value``       write a universe value at ``nodes[0]``
    ``bounded``     write a universe value at ``nodes[0]`` and a clock bound at
                    ``nodes[1]``; bounds range over the clocks seen so far
    ``capability``  write a capability read earlier at ``nodes[0]``
    """

    name: str
    kind: str
    nodes: Tuple[str, ...]
    universe: Tuple[Term, ...] = ()
    budget: int = 1
    visible: bool = True
    with_time: bool = True
    source: str = ""          # capability issuer, for labels


@dataclass(frozen=True)
class Interface:
    graph: CompGraph
    ports: Tuple[Port, ...]
    outputs: Tuple[Tuple[str, str], ...]   # (node, public name)
    clocks: Tuple[str, ...]                # state nodes whose times are readable
    readable: Tuple[str, ...] = ()         # nodes whose values feed the adversary's knowledge
    max_time: int = 3


@dataclass(frozen=True)
class _GState:
    cfg: Config
    used: Tuple[int, ...]
    knowledge: FrozenSet[Term]


def _reads(itf: Interface, cfg: Config) -> Tuple[str, ...]:
    """Observations available in ``cfg``.  Reads do not change the state."""
    out = []
    for node, name in itf.outputs:
        t = cfg.get(node)
        if t is not None:
            out.append(f"out {name} {t.text()}")
    out += [f"time {v} {cfg.time(v)}" for v in itf.clocks]
    return tuple(out)


def _cap_label(itf: Interface, port: Port, kappa: Mac) -> Optional[str]:
    rec = split_record(itf.graph, port.source, kappa.message.items[0])
    if rec is None:
        return None
    inputs, times = rec
    x = inputs[0].text() if len(inputs) == 1 else Tup(inputs).text()
    if not port.with_time:
        return f"{port.name} {x}"
    return f"{port.name} {x} " + ",".join(t.text() for _, t in times)


def driven(g: CompGraph, v: str) -> bool:
    """Fed by at least one consumable (non-state) value."""
    return any(u not in g.state for u in g.preds(v))


def _carries_token(g: CompGraph, u: str) -> bool:
    """Values at ``u`` stem from consumable inputs rather than being
    recomputed from state alone."""
    return u not in g.state and (u in g.inputs or driven(g, u))


def settle(g: CompGraph, cfg: Config) -> Config:
    """Fire nodes until nothing changes, leaving the undriven state nodes
    (clocks) alone.  A node recomputed from state alone fires only when its
    value would change."""
    changed = True
    while changed:
        changed = False
        for v in g.nodes:
            if v in g.state and not driven(g, v):
                continue
            nxt = enabled(g, cfg, v)
            if nxt is None:
                continue
            if v in g.state or any(_carries_token(g, u) for u in g.preds(v)) or nxt.get(v) != cfg.get(v):
                cfg, changed = nxt, True
                break
    return cfg


def _moves(itf: Interface, s: _GState):
    """(move, visible label or None, successor) for clock ticks and writes.
    Every successor is settled."""
    g = itf.graph
    for v in g.nodes:
        if v not in g.state or driven(g, v) or s.cfg.time(v) >= itf.max_time:
            continue
        nxt = enabled(g, s.cfg, v)
        if nxt is not None:
            yield f"tick {v}", None, replace(s, cfg=settle(g, nxt))
    for i, p in enumerate(itf.ports):
        if s.used[i] >= p.budget or any(s.cfg.get(n) is not None for n in p.nodes):
            continue
        used = s.used[:i] + (s.used[i] + 1,) + s.used[i + 1:]
        if p.kind == "value":
            for t in p.universe:
                label = f"{p.name} {t.text()}"
                yield "write " + label, label if p.visible else None, \
                    _GState(settle(g, s.cfg.with_values({p.nodes[0]: t})), used, s.knowledge)
        elif p.kind == "bounded":
            srcs = timed_sources(g, g.succs(p.nodes[1])[0])
            limit = min((s.cfg.time(u) for u in srcs), default=0)
            for t in p.universe:
                for c in range(limit + 1):
                    label = f"{p.name} {t.text()} {c}"
                    yield "write " + label, label, \
                        _GState(settle(g, s.cfg.with_values({p.nodes[0]: t, p.nodes[1]: Nat(c)})), used, s.knowledge)
        else:
            for kappa in sorted(s.knowledge, key=core.encode):
                label = _cap_label(itf, p, kappa)
                if label is not None:
                    yield "write " + kappa.text(), label, \
                        _GState(settle(g, s.cfg.with_values({p.nodes[0]: kappa})), used, s.knowledge)


def _learn(itf: Interface, s: _GState) -> _GState:
    new = [s.cfg.get(v) for v in itf.readable]
    new = [t for t in new if isinstance(t, Mac) and t not in s.knowledge]
    return replace(s, knowledge=s.knowledge | frozenset(new)) if new else s


class BudgetExceeded(Exception):
    pass


class _Lts:
    """Lazily built transition system of one interface.  Macro states are
    sets of concrete states closed under unobservable moves."""

    def __init__(self, itf: Interface, budget: int):
        self.itf, self.budget = itf, budget
        self.ids: Dict[_GState, int] = {}
        self.states: List[_GState] = []
        self.succ: List[Optional[Tuple[list, list]]] = []
        self._closed: Dict[FrozenSet[int], Dict[str, FrozenSet[int]]] = {}
        s0 = _learn(itf, _GState(settle(itf.graph, initial_config(itf.graph)), tuple(0 for _ in itf.ports), frozenset()))
        self.root = self.closure([self.intern(s0)])

    def intern(self, s: _GState) -> int:
        i = self.ids.get(s)
        if i is None:
            if len(self.states) >= self.budget:
                raise BudgetExceeded
            i = self.ids[s] = len(self.states)
            self.states.append(s)
            self.succ.append(None)
        return i

    def expand(self, i: int):
        if self.succ[i] is None:
            hidden, shown = [], []
            for move, label, s2 in _moves(self.itf, self.states[i]):
                j = self.intern(_learn(self.itf, s2))
                (shown if label else hidden).append((move, label, j))
            self.succ[i] = (hidden, shown)
        return self.succ[i]

    def closure(self, start) -> FrozenSet[int]:
        seen, todo = set(start), list(start)
        while todo:
            for _, _, j in self.expand(todo.pop())[0]:
                if j not in seen:
                    seen.add(j)
                    todo.append(j)
        return frozenset(seen)

    def after(self, macro: FrozenSet[int]) -> Dict[str, FrozenSet[int]]:
        got = self._closed.get(macro)
        if got is not None:
            return got
        raw: Dict[str, set] = {}
        for i in macro:
            for label in _reads(self.itf, self.states[i].cfg):
                raw.setdefault(label, set()).add(i)
            for _, label, j in self.expand(i)[1]:
                raw.setdefault(label, set()).add(j)
        got = self._closed[macro] = {k: self.closure(v) for k, v in raw.items()}
        return got

    def run(self, trace: Sequence[str]) -> Tuple[str, ...]:
        """A shortest move sequence (reads included) producing ``trace``."""
        start = 0  # the initial state
        parents = {(start, 0): None}
        queue = deque([(start, 0)])
        while queue:
            i, pos = queue.popleft()
            if pos == len(trace):
                out, key = [], (i, pos)
                while parents[key] is not None:
                    key, move = parents[key]
                    out.append(move)
                return tuple(reversed(out))
            hidden, shown = self.expand(i)
            nxt = [(move, (j, pos)) for move, _, j in hidden]
            nxt += [(move, (j, pos + 1)) for move, label, j in shown if label == trace[pos]]
            if trace[pos] in _reads(self.itf, self.states[i].cfg):
                nxt.append(("read " + trace[pos], (i, pos + 1)))
            for move, key in nxt:
                if key not in parents:
                    parents[key] = ((i, pos), move)
                    queue.append(key)
        return ()


@dataclass
class Equivalence:
    equal: Optional[bool]           # None when inconclusive
    counterexample: Tuple[str, ...] = ()
    only_in: str = ""               # "first" or "second"
    moves: Tuple[str, ...] = ()
    states: Tuple[int, int] = (0, 0)
    pairs: int = 0


def trace_equiv_oracle(a: Interface, b: Interface, depth: int = 12, budget: int = 10**6) -> Equivalence:
    """Compare the observable trace sets of two interfaces up to ``depth``
    observations (writes and reads).  A counterexample is a shortest trace
    of one side that the other cannot produce."""
    try:
        la, lb = _Lts(a, budget), _Lts(b, budget)
        start = (la.root, lb.root)
        parent = {start: None}
        level = [start]
        for n in range(depth):
            found, nxt = [], []
            for pair in level:
                sa, sb = la.after(pair[0]), lb.after(pair[1])
                for label in sorted(set(sa) | set(sb)):
                    if label not in sb or label not in sa:
                        found.append((_trace(parent, pair) + (label,), "first" if label in sa else "second"))
                        continue
                    p2 = (sa[label], sb[label])
                    if p2 not in parent:
                        parent[p2] = (pair, label)
                        nxt.append(p2)
            if found:
                trace, side = min(found)
                lts = la if side == "first" else lb
                return Equivalence(False, trace, side, lts.run(trace), (len(la.states), len(lb.states)),
                                   len(parent))
            level = nxt
        return Equivalence(True, states=(len(la.states), len(lb.states)), pairs=len(parent))
    except BudgetExceeded:
        return Equivalence(None)


def _trace(parent, pair) -> Tuple[str, ...]:
    out = []
    while parent[pair] is not None:
        pair, label = parent[pair]
        out.append(label)
    return tuple(reversed(out))


# ---------------------------------------------------------------------------
# Interfaces for the standard comparisons

def request_universe(users=(1, 2), ops=("read:f", "write:f:9")) -> Tuple[Term, ...]:
    return tuple(Tup((Nat(k), Name(op))) for k in users for op in ops)


def admin_universe(controls=DEFAULT_CONTROLS) -> Tuple[Term, ...]:
    return tuple(Tup((Nat(k), Name(a))) for k, a in controls)


def _clocks(g: CompGraph) -> Tuple[str, ...]:
    return tuple(v for v in g.nodes if v in g.state)


def plain_interface(g: CompGraph, requests: Tuple[Term, ...], admins: Tuple[Term, ...] = (),
                    op_budget: int = 2, adm_budget: int = 1, max_time: int = 3,
                    request_node: str = "n5", admin_node: str = "n1") -> Interface:
    ports = []
    if admins and admin_node in g.nodes:
        ports.append(Port("adm", "value", (admin_node,), admins, adm_budget))
    ports.append(Port("op", "value", (request_node,), requests, op_budget))
    outs = tuple((u, u) for u in g.outputs)
    return Interface(g, tuple(ports), outs, _clocks(g), max_time=max_time)


def explicated_interface(gh: CompGraph, base: CompGraph, requests, admins=(), op_budget=2, adm_budget=1,
                         max_time=3, request_node="n5", admin_node="n1") -> Interface:
    ports = []
    if admins and admin_node in base.nodes:
        ports.append(Port("adm", "value", (hat(admin_node),), admins, adm_budget))
    ports.append(Port("op", "value", (hat(request_node),), requests, op_budget))
    outs = tuple((hat(u), u) for u in base.outputs)
    return Interface(gh, tuple(ports), outs, _clocks(gh), max_time=max_time)


def revised_interface(gs: CompGraph, base: CompGraph, cut, requests, admins=(), op_budget=2, adm_budget=1,
                      max_time=3, request_node="n5", admin_node="n1") -> Interface:
    (v, _), = tuple(cut)
    ports = []
    if admins and admin_node in base.nodes:
        ports.append(Port("adm", "value", (admin_node,), admins, adm_budget))
    ports.append(Port("op", "bounded", (request_node, bnd(v)), requests, op_budget))
    outs = tuple((u, u) for u in base.outputs)
    return Interface(gs, tuple(ports), outs, _clocks(gs), max_time=max_time)


def distributed_interface(gd: CompGraph, base: CompGraph, cut, requests, admins=(), op_budget=2,
                          adm_budget=1, max_time=3, with_time=True, request_node="n5",
                          admin_node="n1") -> Interface:
    """Requests are acquisitions at the explicated request input (not
    observable) followed by submissions of capabilities at the cut."""
    (v, _), = tuple(cut)
    ports = []
    if admins and admin_node in base.nodes:
        ports.append(Port("adm", "value", (hat(admin_node),), admins, adm_budget))
    ports.append(Port("acquire", "value", (hat(request_node),), requests, op_budget, visible=False))
    ports.append(Port("op", "capability", (bar(v),), (), op_budget, with_time=with_time, source=v))
    outs = tuple((hat(u), u) for u in base.outputs)
    return Interface(gd, tuple(ports), outs, _clocks(gd), readable=(v,), max_time=max_time)


# ---------------------------------------------------------------------------
# Graph files

GRAPH_SCHEMA = 1


def graph_to_dict(g: CompGraph, cut=()) -> dict:
    inputs, outputs = set(g.inputs), set(g.outputs)
    nodes = []
    for v in g.nodes:
        marks = [m for m, s in (("input", inputs), ("output", outputs), ("state", g.state)) if v in s]
        entry = {"id": v, "marks": marks}
        if v not in inputs:
            entry["label"] = g.label(v)
        if v in g.state:
            entry["init"] = dict(g.init)[v].text()
        nodes.append(entry)
    params = {}
    for k, val in g.params:
        params[k] = sorted([int(a), str(b)] for a, b in val)
    return {"schema": GRAPH_SCHEMA, "nodes": nodes, "edges": sorted([list(e) for e in g.edges]),
            "params": params, "cut": [list(e) for e in cut]}


def graph_from_dict(d: dict) -> Tuple[CompGraph, Tuple[Tuple[str, str], ...]]:
    if d.get("schema") != GRAPH_SCHEMA:
        raise GraphError(f"unsupported graph schema {d.get('schema')!r}; expected {GRAPH_SCHEMA}")
    nodes = tuple(str(n["id"]) for n in d["nodes"])
    state = frozenset(str(n["id"]) for n in d["nodes"] if "state" in n.get("marks", ()))
    labels = tuple(sorted((str(n["id"]), str(n["label"])) for n in d["nodes"] if "label" in n))
    init = tuple((str(n["id"]), core.decode(str(n["init"]))) for n in d["nodes"] if "init" in n)
    params = tuple(sorted((k, frozenset((int(a), str(b)) for a, b in v)) for k, v in (d.get("params") or {}).items()))
    g = CompGraph(nodes, frozenset((str(u), str(w)) for u, w in d["edges"]), state, labels, init, params)
    for n in d["nodes"]:
        marks = set(n.get("marks", ()))
        v = str(n["id"])
        if ("input" in marks) != (v in g.inputs) or ("output" in marks) != (v in g.outputs):
            raise GraphError(f"markers of node {v} disagree with its degree")
    cut = tuple((str(u), str(w)) for u, w in d.get("cut") or ())
    return g, cut


def save_graph(g: CompGraph, path, cut=()) -> None:
    with open(path, "w") as fh:
        yaml.safe_dump(graph_to_dict(g, cut), fh, sort_keys=False)


def load_graph(path) -> Tuple[CompGraph, Tuple[Tuple[str, str], ...]]:
    with open(path) as fh:
        return graph_from_dict(yaml.safe_load(fh))
