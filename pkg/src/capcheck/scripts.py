"""The small action language run by honest principals and scripted
adversaries.

Textual form is one call per action, e.g. ``acquire(read:f, k)`` or
``exec_ideal(read:f, t, r)``.  Capabilities are opaque handles: a variable
bound by ``acquire`` may only be passed to ``use``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

from . import core

# name -> (arity, networked-interface action?, ideal-interface action?)
ACTIONS: Dict[str, Tuple[int, bool, bool]] = {
    "acquire": (2, True, False),
    "use": (2, True, False),
    "chmod": (2, True, True),
    "exec_ideal": (3, False, True),
    "clk": (1, False, True),
    "send": (2, True, True),
    "recv": (2, True, True),
    "assert_success": (1, True, True),
    "assert_stale": (1, True, True),
    "assert_failure": (1, True, True),
    "emit": (1, True, True),
    "block": (0, True, True),
}

# Position of the variable each action binds, if any.
BINDS = {"acquire": 1, "use": 1, "chmod": 1, "exec_ideal": 2, "clk": 0, "recv": 1}


class ScriptError(ValueError):
    """A script failed to parse or violates the capability discipline."""

    def __init__(self, message: str, index: int = -1, action: "Action" = None):
        where = f" at action {index} ({action.text()})" if action is not None else ""
        super().__init__(message + where)
        self.index = index
        self.action = action


@dataclass(frozen=True)
class Action:
    name: str
    args: Tuple[str, ...] = ()

    def __post_init__(self):
        if self.name not in ACTIONS:
            raise ScriptError(f"unknown action {self.name!r}")
        if len(self.args) != ACTIONS[self.name][0]:
            raise ScriptError(f"{self.name} takes {ACTIONS[self.name][0]} arguments, got {len(self.args)}")

    def text(self) -> str:
        return f"{self.name}({', '.join(self.args)})" if self.args else self.name

    @property
    def bound_var(self):
        i = BINDS.get(self.name)
        return None if i is None else self.args[i]


Script = Tuple[Action, ...]


def _split_args(body: str) -> List[str]:
    out, depth, cur = [], 0, []
    for ch in body:
        if ch == "," and depth == 0:
            out.append("".join(cur).strip())
            cur = []
            continue
        depth += (ch == "(") - (ch == ")")
        if depth < 0:
            raise ScriptError(f"unbalanced parentheses in {body!r}")
        cur.append(ch)
    if depth:
        raise ScriptError(f"unbalanced parentheses in {body!r}")
    tail = "".join(cur).strip()
    if tail or out:
        out.append(tail)
    return out


def parse_action(text: str) -> Action:
    text = text.strip()
    if "(" not in text:
        return Action(text)
    if not text.endswith(")"):
        raise ScriptError(f"malformed action {text!r}")
    name, body = text.split("(", 1)
    return Action(name.strip(), tuple(_split_args(body[:-1])))


def parse_script(lines: Sequence) -> Script:
    return tuple(a if isinstance(a, Action) else parse_action(a) for a in lines)


def script_text(script: Script) -> List[str]:
    return [a.text() for a in script]


def validate(script: Script, iface: str = "nafs") -> None:
    """Reject scripts that break single assignment, reference unbound
    variables, or let a capability flow anywhere but ``use``."""
    bound, caps, clocks = set(), set(), set()
    for i, a in enumerate(script):
        _, on_nafs, on_tfs = ACTIONS[a.name]
        if (iface == "nafs" and not on_nafs) or (iface == "tfs" and not on_tfs):
            raise ScriptError(f"{a.name} is not available on the {iface} interface", i, a)
        if a.name == "use":
            if a.args[0] not in caps:
                raise ScriptError(f"use of {a.args[0]!r}, which is not a capability variable", i, a)
        elif a.name == "exec_ideal":
            if a.args[1] != "inf" and a.args[1] not in clocks:
                raise ScriptError(f"time bound {a.args[1]!r} is neither inf nor a clock variable", i, a)
        for pos, arg in enumerate(a.args):
            if arg in caps and not (a.name == "use" and pos == 0):
                raise ScriptError(f"capability {arg!r} may only be passed to use", i, a)
        if a.name in ("assert_success", "assert_stale", "assert_failure") and a.args[0] not in bound:
            raise ScriptError(f"assertion on unbound variable {a.args[0]!r}", i, a)
        if a.name in ("acquire", "exec_ideal"):
            core.check_op(a.args[0])
        if a.name == "chmod" and not core.is_admin(a.args[0]):
            raise ScriptError(f"{a.args[0]!r} is not an admin operation", i, a)
        v = a.bound_var
        if v is not None:
            if v in bound:
                raise ScriptError(f"variable {v!r} assigned twice", i, a)
            if v == "inf":
                raise ScriptError("'inf' is reserved", i, a)
            bound.add(v)
            if a.name == "acquire":
                caps.add(v)
            if a.name == "clk":
                clocks.add(v)


# Abstraction of one networked-interface action into ideal-interface actions.
# ``mapping`` is ``a6`` (time-bounded) or ``plain`` (unbounded requests).
MAPPINGS = ("a6", "plain")


def abstract_script(script: Script, mapping: str, static: bool = False) -> Script:
    if mapping not in MAPPINGS:
        raise ValueError(f"unknown mapping {mapping!r}; expected one of {MAPPINGS}")
    timed = mapping == "a6" and not static
    op_of: Dict[str, str] = {}
    out: List[Action] = []
    for a in script:
        if a.name == "acquire":
            op, var = a.args
            op_of[var] = op
            if timed:
                out.append(Action("clk", (_clock_var(var),)))
        elif a.name == "use":
            var, r = a.args
            bound = _clock_var(var) if timed else "inf"
            out.append(Action("exec_ideal", (op_of[var], bound, r)))
        elif a.name == "assert_stale" and not timed:
            out.append(Action("block"))
        else:
            out.append(a)
    return tuple(out)


def _clock_var(cap_var: str) -> str:
    return f"t_{cap_var}"
