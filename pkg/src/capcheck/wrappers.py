"""Translation contexts between the two interfaces.

``PhiMachine`` shows the networked interface to dishonest principals while
running an ideal file system underneath: it hands out dummy capabilities
under a key of its own and turns their use into time-bounded operation
requests.  ``PsiMachine`` does the converse: it shows the ideal interface
over a networked file system, acquiring a fresh capability for every request.

Honest principals' traffic passes through both wrappers untouched.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import FrozenSet, List

from . import core
from .core import E_DUMMY, INF, K_DUMMY, Enc, Mac, Name, Nat, Tup
from .protocol import ADM, AUTH, CLK, EXEC, OP, Machine, Output, Request, reply, sort_pending

NOOP = "noop"


def _inner_channel(outer: str) -> str:
    return outer + "'"


@dataclass(frozen=True)
class PhiState:
    inner: object
    tasks: tuple = ()
    coin: int = 0


class PhiMachine(Machine):
    """Networked interface over an ideal machine.  ``stamp`` is one of
    ``none`` (static capabilities), ``plain`` or ``encrypted``."""

    iface = "nafs"

    def __init__(self, inner: Machine, dishonest: FrozenSet[int], stamp: str = "plain",
                 user_in_caps: bool = True):
        if inner.iface != "tfs":
            raise ValueError("phi wraps a machine with the ideal interface")
        if stamp not in ("none", "plain", "encrypted"):
            raise ValueError(f"unknown stamp mode {stamp!r}")
        self.inner = inner
        self.dishonest = frozenset(dishonest)
        self.stamp = stamp
        self.user_in_caps = user_in_caps

    def initial(self) -> PhiState:
        return PhiState(self.inner.initial())

    def receive(self, s: PhiState, req: Request) -> PhiState:
        if req.principal not in self.dishonest:
            return replace(s, inner=self.inner.receive(s.inner, req))
        if req.kind == AUTH:
            if len(req.args) != 1 or not isinstance(req.args[0], Name):
                return s
            return replace(s, tasks=sort_pending(s.tasks + (req,)))
        if req.kind == EXEC:
            inner_req = self.translate_exec(req)
            if inner_req is None:
                return s
            return replace(s, inner=self.inner.receive(s.inner, inner_req))
        if req.kind == ADM:
            return replace(s, inner=self.inner.receive(s.inner, req))
        return s

    def translate_exec(self, req: Request):
        """Decode a dummy capability into an op request, None to drop."""
        kappa = req.args[0] if len(req.args) == 1 else None
        if not isinstance(kappa, Mac) or kappa.key != K_DUMMY:
            return None
        m = kappa.message
        size = 2 if self.stamp == "none" else 3
        if not isinstance(m, Tup) or len(m.items) != size or not isinstance(m.items[1], Name):
            return None
        bound = INF
        if size == 3:
            ts = m.items[2]
            if self.stamp == "encrypted":
                if not isinstance(ts, Enc) or ts.key != E_DUMMY:
                    return None
                ts = ts.plaintext
            if not isinstance(ts, Nat):
                return None
            bound = ts
        return Request(OP, req.principal, (m.items[1], bound), req.reply)

    def dummy_capability(self, s: PhiState, j: int, op: Name):
        user = Nat(j) if self.user_in_caps else core.ANON
        clk = self.inner.clock(s.inner)
        if self.stamp == "none":
            return Mac(Tup((user, op)), K_DUMMY), s
        if self.stamp == "plain":
            return Mac(Tup((user, op, Nat(clk))), K_DUMMY), s
        ts = Enc(s.coin, Nat(clk), E_DUMMY)
        return Mac(Tup((user, op, ts)), K_DUMMY), replace(s, coin=s.coin + 1)

    def choices(self, s: PhiState) -> List[str]:
        return self.inner.choices(s.inner) + ["phi " + t.label() for t in s.tasks]

    def step(self, s: PhiState, label: str):
        if label.startswith("phi "):
            for t in s.tasks:
                if "phi " + t.label() == label:
                    s = replace(s, tasks=tuple(x for x in s.tasks if x != t))
                    kappa, s = self.dummy_capability(s, t.principal, t.args[0])
                    return s, [reply(t.reply, kappa, t.principal)]
            raise KeyError(label)
        inner, outs = self.inner.step(s.inner, label)
        return replace(s, inner=inner), outs

    def clock(self, s: PhiState) -> int:
        return self.inner.clock(s.inner)


@dataclass(frozen=True)
class PsiCont:
    channel: str
    kind: str
    outer: str
    bound: object
    principal: int


@dataclass(frozen=True)
class PsiState:
    inner: object
    conts: tuple = ()


class PsiMachine(Machine):
    """Ideal interface over a networked machine.  Capabilities are never
    cached: each outer request acquires a fresh one."""

    iface = "tfs"

    def __init__(self, inner: Machine, dishonest: FrozenSet[int], timed: bool = True):
        if inner.iface != "nafs":
            raise ValueError("psi wraps a machine with the networked interface")
        self.inner = inner
        self.dishonest = frozenset(dishonest)
        self.timed = timed

    def initial(self) -> PsiState:
        return PsiState(self.inner.initial())

    def receive(self, s: PsiState, req: Request) -> PsiState:
        if req.principal not in self.dishonest:
            return replace(s, inner=self.inner.receive(s.inner, req))
        ch = _inner_channel(req.reply)
        if req.kind == CLK:
            if not self.timed or req.args:
                return s
            auth = Request(AUTH, req.principal, (Name(NOOP),), ch)
            cont = PsiCont(ch, CLK, req.reply, None, req.principal)
        elif req.kind == OP:
            if len(req.args) != 2 or not isinstance(req.args[0], Name):
                return s
            auth = Request(AUTH, req.principal, (req.args[0],), ch)
            cont = PsiCont(ch, OP, req.reply, req.args[1], req.principal)
        elif req.kind == ADM:
            return replace(s, inner=self.inner.receive(s.inner, req))
        else:
            return s
        return PsiState(self.inner.receive(s.inner, auth), s.conts + (cont,))

    def choices(self, s: PsiState) -> List[str]:
        return self.inner.choices(s.inner)

    def step(self, s: PsiState, label: str):
        inner, outs = self.inner.step(s.inner, label)
        conts = list(s.conts)
        passed: List[Output] = []
        for o in outs:
            cont = next((c for c in conts if o.kind == "reply" and c.channel == o.channel), None)
            if cont is None:
                passed.append(o)
                continue
            conts.remove(cont)
            ts = core.field_at(core.msg(o.payload), 3)
            if cont.kind == CLK:
                if isinstance(ts, Nat):
                    passed.append(reply(cont.outer, ts, cont.principal))
                continue
            if not isinstance(o.payload, Mac):
                continue
            bound = cont.bound
            if isinstance(bound, core.Infinity) or (isinstance(ts, Nat) and core.leq(ts, bound)):
                inner = self.inner.receive(inner, Request(EXEC, cont.principal, (o.payload,), cont.outer))
        return PsiState(inner, tuple(conts)), passed

    def clock(self, s: PsiState) -> int:
        return self.inner.clock(s.inner)
