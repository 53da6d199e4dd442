"""The networked file system: an access-control server that issues
capabilities and a storage server that checks them, composed into one
machine sharing a single clock.

Variants:

``static``         capabilities ``mac(<k,op>)``, no ticks.
``dynamic``        same timestampless capabilities, admin requests applied at
                   ticks, no freshness check (unsafe under revocation).
``dynamic-plus``   capabilities carry the issue clock and expire after
                   ``delay`` ticks.
``dynamic-minus``  the issue clock is encrypted; every rejected use is
                   dropped silently.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import List, Optional

from . import core
from .core import E_REAL, ERROR, AccessPolicy, Enc, Mac, Nat, Store, Tup
from .protocol import ADM, AUTH, EXEC, Machine, Output, Request, reply, sort_pending

NAFS_VARIANTS = ("static", "dynamic", "dynamic-plus", "dynamic-minus")

CERT_FORMAT = {
    "static": core.STATIC,
    "dynamic": core.STATIC,
    "dynamic-plus": core.DYNAMIC_PLAIN,
    "dynamic-minus": core.DYNAMIC_ENC,
}


@dataclass(frozen=True)
class Toggles:
    fake_caps: bool = True
    stale_blocks: bool = True
    failure_blocks: bool = False
    delay: int = 1
    user_in_caps: bool = True

    def __post_init__(self):
        if self.delay < 1:
            raise ValueError("delay must be at least 1")


TOGGLE_NAMES = ("fake_caps", "stale_blocks", "failure_blocks", "delay", "user_in_caps")


@dataclass(frozen=True)
class NafsConfig:
    variant: str = "dynamic-plus"
    toggles: Toggles = Toggles()
    debug: bool = False

    def __post_init__(self):
        if self.variant not in NAFS_VARIANTS:
            raise ValueError(f"unknown networked variant {self.variant!r}; expected one of {NAFS_VARIANTS}")

    @property
    def ticks(self) -> bool:
        return self.variant != "static"


@dataclass(frozen=True)
class NafsState:
    F: AccessPolicy
    xi: core.Schedule
    clk: int
    rho: Store
    pending: tuple = ()
    coin: int = 0


def nafs_receive(cfg: NafsConfig, s: NafsState, req: Request) -> NafsState:
    """Enqueue a request; malformed payloads are ignored."""
    if req.kind == AUTH:
        if len(req.args) != 1 or not isinstance(req.args[0], core.Name):
            return s
        try:
            core.check_op(req.args[0].id)
        except ValueError:
            return s
        if core.is_admin(req.args[0].id):
            return s
    elif req.kind == EXEC:
        if len(req.args) != 1:
            return s
    elif req.kind == ADM:
        if len(req.args) != 1 or not isinstance(req.args[0], core.Name) or not core.is_admin(req.args[0].id):
            return s
    else:
        return s
    return replace(s, pending=sort_pending(s.pending + (req,)))


def nafs_auth_step(cfg: NafsConfig, s: NafsState, req: Request):
    k, op = req.principal, req.args[0].id
    if not cfg.toggles.fake_caps and not core.perm(s.F, k, op):
        return s, [reply(req.reply, ERROR, k)]
    kappa = core.cert(s.F, k, op, s.clk, CERT_FORMAT[cfg.variant], coin=s.coin,
                      user_in_cap=cfg.toggles.user_in_caps)
    if cfg.variant == "dynamic-minus":
        s = replace(s, coin=s.coin + 1)
    return s, [reply(req.reply, kappa, k)]


def capability_parts(cfg: NafsConfig, kappa) -> Optional[tuple]:
    """Decode ``(op, issue clock or None)`` from a capability, None if the
    message does not have the variant's shape."""
    m = core.msg(kappa)
    if not isinstance(m, Tup):
        return None
    timed = cfg.variant in ("dynamic-plus", "dynamic-minus")
    if len(m.items) != (3 if timed else 2):
        return None
    op = m.items[1]
    if not isinstance(op, core.Name):
        return None
    try:
        core.check_op(op.id)
    except ValueError:
        return None
    if core.is_admin(op.id):
        return None
    if not timed:
        return op.id, None
    ts = m.items[2]
    if cfg.variant == "dynamic-minus":
        if not isinstance(ts, Enc) or ts.key != E_REAL:
            return None
        ts = ts.plaintext
    if not isinstance(ts, Nat):
        return None
    return op.id, ts.n


def is_fresh(cfg: NafsConfig, issued: Optional[int], clk: int) -> bool:
    if issued is None:
        return True
    return issued <= clk < issued + cfg.toggles.delay


def nafs_exec_step(cfg: NafsConfig, s: NafsState, req: Request):
    k, kappa = req.principal, req.args[0]

    def drop(reason):
        return s, ([Output("drop", req.reply, core.Name(reason), k)] if cfg.debug else [])

    L = core.verif(kappa)
    parts = capability_parts(cfg, kappa) if L is not None else None
    if L is None or parts is None:
        return drop("invalid")
    op, issued = parts
    if not is_fresh(cfg, issued, s.clk):
        if cfg.toggles.stale_blocks or cfg.variant == "dynamic-minus":
            return drop("stale")
        return s, [reply(req.reply, ERROR, k)]
    result, rho = core.exec_op(L, op, s.rho)
    s = replace(s, rho=rho)
    if not L and cfg.toggles.failure_blocks:
        return drop("failure")
    outs = [reply(req.reply, result, k)]
    if L:
        outs.insert(0, Output("exec", f"exec.{k}", core.Name(op), k))
    return s, outs


def nafs_adm_step(cfg: NafsConfig, s: NafsState, req: Request):
    k, adm = req.principal, req.args[0].id
    result, xi = core.push(core.perm(s.F, k, adm), adm, s.xi, s.clk, k)
    return replace(s, xi=xi), [reply(req.reply, result, k)]


def nafs_tick(s: NafsState) -> NafsState:
    return replace(s, F=core.sync(s.F, s.xi, s.clk), xi=core.remaining(s.xi, s.clk), clk=s.clk + 1)


class NafsMachine(Machine):
    iface = "nafs"

    def __init__(self, cfg: NafsConfig, F: AccessPolicy, rho: Store):
        self.cfg = cfg
        self.F0 = F
        self.rho0 = rho

    def initial(self) -> NafsState:
        return NafsState(self.F0, (), 0, self.rho0)

    def receive(self, s: NafsState, req: Request) -> NafsState:
        return nafs_receive(self.cfg, s, req)

    def choices(self, s: NafsState) -> List[str]:
        labels = ["serve " + r.label() for r in s.pending]
        if self.cfg.ticks:
            labels.append("tick")
        return labels

    def step(self, s: NafsState, label: str):
        if label == "tick":
            if not self.cfg.ticks:
                raise KeyError(label)
            applied = core.tick_record(s.xi, s.clk)
            s = nafs_tick(s)
            return s, [Output("tick", "clock", applied)]
        for r in s.pending:
            if "serve " + r.label() == label:
                s = replace(s, pending=tuple(x for x in s.pending if x != r))
                if r.kind == AUTH:
                    return nafs_auth_step(self.cfg, s, r)
                if r.kind == EXEC:
                    return nafs_exec_step(self.cfg, s, r)
                return nafs_adm_step(self.cfg, s, r)
        raise KeyError(label)

    def clock(self, s: NafsState) -> int:
        return s.clk


def issued_capabilities(outputs) -> List[Mac]:
    return [o.payload for o in outputs if o.kind == "reply" and isinstance(o.payload, Mac)]
