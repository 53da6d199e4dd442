"""Requests, outputs and the small machine interface shared by the file
systems and the wrappers.

A machine is a stateless object holding configuration; its states are
immutable values.  Every nondeterministic choice a machine offers is named by
a label string, and ``step`` resolves exactly one label.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Tuple

from .core import Term

# Request kinds on the networked interface.
AUTH, EXEC, ADM = "auth", "exec", "adm"
# Request kinds on the ideal interface.
CLK, OP = "clk", "op"

CHANNEL_OF = {
    AUTH: "alpha", EXEC: "beta", ADM: "delta",
    CLK: "alpha_o", OP: "beta_o",
}
NAFS_KINDS = (AUTH, EXEC, ADM)
TFS_KINDS = (CLK, OP, ADM)


@dataclass(frozen=True)
class Request:
    kind: str
    principal: int
    args: Tuple[Term, ...]
    reply: str

    def channel(self, iface: str) -> str:
        if self.kind == ADM:
            return f"delta.{self.principal}" if iface == "nafs" else f"delta_o.{self.principal}"
        return f"{CHANNEL_OF[self.kind]}.{self.principal}"

    def label(self) -> str:
        args = ",".join(a.text() for a in self.args)
        return f"{self.kind} {self.principal} ({args}) {self.reply}"


@dataclass(frozen=True)
class Output:
    """``reply``: payload sent on a reply channel.  ``exec``: an operation was
    performed for ``principal`` (payload is the operation).  ``tick``: the
    clock advanced (payload is the new value).  ``drop``: a request was
    discarded without effect (debug only)."""

    kind: str
    channel: str
    payload: Optional[Term]
    principal: int = -1


def reply(channel: str, payload: Term, principal: int) -> Output:
    return Output("reply", channel, payload, principal)


def sort_pending(pending) -> tuple:
    return tuple(sorted(pending, key=Request.label))


class Machine:
    iface: str = "nafs"

    def initial(self):
        raise NotImplementedError

    def receive(self, state, req: Request):
        raise NotImplementedError

    def choices(self, state) -> List[str]:
        raise NotImplementedError

    def step(self, state, label: str):
        raise NotImplementedError

    def clock(self, state) -> int:
        raise NotImplementedError


class ScheduleError(RuntimeError):
    """A schedule named a choice that is not currently enabled."""
