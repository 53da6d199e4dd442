"""The ideal file system: local access checks against the current policy.

One machine covers the static and dynamic configurations.  The static one
forbids ticks and serves every request with an unbounded time bound; the
dynamic ones add ticks, admin requests applied at ticks, optional clock
requests and time-bounded operation requests.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import List

from . import core
from .core import ERROR, INF, AccessPolicy, Nat, Store, Term
from .protocol import ADM, CLK, OP, Machine, Output, Request, reply, sort_pending

TFS_VARIANTS = ("static", "dynamic", "dynamic-plus", "dynamic-minus")


@dataclass(frozen=True)
class TfsConfig:
    variant: str = "dynamic-plus"
    clock_requests: bool = True
    # Answer an expired time-bounded request with the error term instead of
    # dropping it silently.
    expired_reply: bool = False
    failure_blocks: bool = False
    debug: bool = False

    @property
    def ticks(self) -> bool:
        return self.variant != "static"


@dataclass(frozen=True)
class TfsState:
    F: AccessPolicy
    xi: core.Schedule
    clk: int
    rho: Store
    pending: tuple = ()


def tfs_config(variant: str, **kw) -> TfsConfig:
    if variant not in TFS_VARIANTS:
        raise ValueError(f"unknown ideal variant {variant!r}; expected one of {TFS_VARIANTS}")
    kw.setdefault("clock_requests", variant == "dynamic-plus")
    return TfsConfig(variant=variant, **kw)


def tfs_receive(cfg: TfsConfig, s: TfsState, req: Request) -> TfsState:
    """Enqueue a request; malformed requests are ignored."""
    if req.kind == OP:
        if len(req.args) != 2 or not isinstance(req.args[0], core.Name):
            return s
        op, bound = req.args
        if not cfg.ticks:
            bound = INF
        if not isinstance(bound, (Nat, core.Infinity)):
            return s
        try:
            core.check_op(op.id)
        except ValueError:
            return s
        if core.is_admin(op.id):
            return s
        req = Request(OP, req.principal, (op, bound), req.reply)
    elif req.kind == ADM:
        if len(req.args) != 1 or not isinstance(req.args[0], core.Name) or not core.is_admin(req.args[0].id):
            return s
    elif req.kind == CLK:
        if not cfg.clock_requests or req.args:
            return s
    else:
        return s
    return replace(s, pending=sort_pending(s.pending + (req,)))


def tfs_tick(s: TfsState) -> TfsState:
    return replace(s, F=core.sync(s.F, s.xi, s.clk), xi=core.remaining(s.xi, s.clk), clk=s.clk + 1)


def tfs_step(cfg: TfsConfig, s: TfsState, req: Request):
    """Serve one pending request.  Returns the new state and its outputs."""
    rest = tuple(r for r in s.pending if r != req)
    if len(rest) == len(s.pending):
        raise KeyError(req.label())
    s = replace(s, pending=rest)
    k = req.principal
    if req.kind == CLK:
        return s, [reply(req.reply, Nat(s.clk), k)]
    if req.kind == ADM:
        adm = req.args[0].id
        result, xi = core.push(core.perm(s.F, k, adm), adm, s.xi, s.clk, k)
        return replace(s, xi=xi), [reply(req.reply, result, k)]
    op, bound = req.args[0].id, req.args[1]
    if not core.leq(Nat(s.clk), bound):
        if cfg.expired_reply:
            return s, [reply(req.reply, ERROR, k)]
        return s, ([Output("drop", req.reply, None, k)] if cfg.debug else [])
    L = core.perm(s.F, k, op)
    result, rho = core.exec_op(L, op, s.rho)
    s = replace(s, rho=rho)
    if not L and cfg.failure_blocks:
        return s, ([Output("drop", req.reply, None, k)] if cfg.debug else [])
    outs = [reply(req.reply, result, k)]
    if L:
        outs.insert(0, Output("exec", f"exec.{k}", req.args[0], k))
    return s, outs


class TfsMachine(Machine):
    iface = "tfs"

    def __init__(self, cfg: TfsConfig, F: AccessPolicy, rho: Store):
        self.cfg = cfg
        self.F0 = F
        self.rho0 = rho

    def initial(self) -> TfsState:
        return TfsState(self.F0, (), 0, self.rho0)

    def receive(self, s: TfsState, req: Request) -> TfsState:
        return tfs_receive(self.cfg, s, req)

    def choices(self, s: TfsState) -> List[str]:
        labels = ["serve " + r.label() for r in s.pending]
        if self.cfg.ticks:
            labels.append("tick")
        return labels

    def step(self, s: TfsState, label: str):
        if label == "tick":
            if not self.cfg.ticks:
                raise KeyError(label)
            applied = core.tick_record(s.xi, s.clk)
            s = tfs_tick(s)
            return s, [Output("tick", "clock", applied)]
        for r in s.pending:
            if "serve " + r.label() == label:
                return tfs_step(self.cfg, s, r)
        raise KeyError(label)

    def clock(self, s: TfsState) -> int:
        return s.clk


def dropped_forever(s: TfsState, req: Request) -> bool:
    """An op request whose bound is already below the clock can never fire."""
    return req.kind == OP and not core.leq(Nat(s.clk), req.args[1])


def bound_of(req: Request) -> Term:
    return req.args[1] if req.kind == OP else INF
