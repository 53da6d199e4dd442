"""Deterministic simulator: one file-system machine (possibly wrapped), the
honest principals' scripts and an adversary, driven by explicit choices.

Every nondeterministic decision is a *choice label*:

``m <machine label>``   the machine serves a request or ticks (one depth step)
``script <k> <pc>``     principal ``k`` performs a visible script action
``adv <...>``           the exhaustive adversary sends a request or message

Hidden script actions (sending a request, waiting for a reply, checking an
assertion, reading a public buffer) run eagerly as soon as they are enabled.
They commute with every other step and carry no observable, so running them
eagerly loses no observable trace.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass, replace
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import yaml

from . import core
from .core import ERROR, INF, UNIT, Mac, Name, Nat, Term
from .nas_fs import NafsConfig, NafsMachine
from .protocol import ADM, AUTH, CLK, EXEC, OP, Machine, Request, ScheduleError
from .scenario import Scenario, from_dict, to_dict
from .scripts import Action
from .spec_fs import TfsMachine, tfs_config
from .wrappers import PhiMachine, PsiMachine

STAMP = {"static": "none", "dynamic": "none", "dynamic-plus": "plain", "dynamic-minus": "encrypted"}


def build_machine(sc: Scenario) -> Machine:
    if sc.level == "nafs":
        m: Machine = NafsMachine(NafsConfig(sc.variant, sc.toggles), sc.policy(), sc.initial_store())
    else:
        kw = dict(expired_reply=sc.expired_reply, failure_blocks=sc.failure_blocks)
        if sc.clock_requests is not None:
            kw["clock_requests"] = sc.clock_requests
        m = TfsMachine(tfs_config(sc.variant, **kw), sc.policy(), sc.initial_store())
    dishonest = frozenset(sc.dishonest)
    for w in reversed(sc.wrappers):
        if w == "phi":
            m = PhiMachine(m, dishonest, STAMP[sc.variant], sc.toggles.user_in_caps)
        else:
            m = PsiMachine(m, dishonest)
    return m


def choice_id(label: str) -> str:
    return hashlib.sha1(label.encode()).hexdigest()[:12]


# ---------------------------------------------------------------------------
# State

@dataclass(frozen=True)
class ScriptState:
    pc: int = 0
    phase: int = 0
    env: Tuple[Tuple[str, Term], ...] = ()
    waiting: Tuple[Tuple[str, str], ...] = ()
    dead: bool = False

    def lookup(self, var: str) -> Optional[Term]:
        for v, t in self.env:
            if v == var:
                return t
        return None


@dataclass(frozen=True)
class AdvState:
    knowledge: Tuple[Term, ...] = ()
    actions: int = 0


@dataclass(frozen=True)
class SysState:
    machine: object
    scripts: Tuple[ScriptState, ...]
    adv: AdvState
    buffers: Tuple[Tuple[str, Tuple[Term, ...]], ...] = ()
    depth: int = 0


@dataclass(frozen=True)
class Event:
    """One step outcome.  ``kind`` is request, reply, emit, send, recv, tick
    or exec; ``direction`` is in, out or tick."""

    channel: str
    direction: str
    visible: bool
    payload: Optional[Term]
    kind: str


def _add_knowledge(adv: AdvState, t: Term) -> AdvState:
    if t in adv.knowledge:
        return adv
    return replace(adv, knowledge=tuple(sorted(adv.knowledge + (t,), key=core.encode)))


class _Work:
    """Mutable scratch copy of a SysState used while applying one step."""

    def __init__(self, s: SysState):
        self.m = s.machine
        self.scripts = list(s.scripts)
        self.adv = s.adv
        self.buffers = dict(s.buffers)
        self.depth = s.depth
        self.events: List[Event] = []

    def freeze(self) -> SysState:
        bufs = tuple(sorted((c, q) for c, q in self.buffers.items() if q))
        return SysState(self.m, tuple(self.scripts), self.adv, bufs, self.depth)


class Simulator:
    def __init__(self, sc: Scenario):
        self.sc = sc
        self.machine = build_machine(sc)
        self.iface = sc.iface
        self.honest = frozenset(sc.honest)
        progs = [(k, sc.script_of(k), False) for k in sorted(sc.honest) if sc.script_of(k)]
        if sc.adversary.kind == "script":
            progs.append((sc.adversary.principals[0], sc.adversary.script, True))
        self.programs: List[Tuple[int, Tuple[Action, ...], bool]] = progs
        self.alphabet = sc.adversary.alphabet if sc.adversary.kind == "exhaustive" else None
        self.adv_principals = tuple(sorted(sc.adversary.principals))

    # -- initial state and choices ------------------------------------------

    def initial(self) -> Tuple[SysState, List[Event]]:
        w = _Work(SysState(self.machine.initial(), tuple(ScriptState() for _ in self.programs), AdvState()))
        self._settle(w)
        return w.freeze(), w.events

    def choices(self, s: SysState) -> List[str]:
        labels: List[str] = []
        if s.depth < self.sc.max_depth:
            labels.extend("m " + x for x in self.machine.choices(s.machine))
        for i, (k, prog, adv) in enumerate(self.programs):
            st = s.scripts[i]
            if st.dead or st.pc >= len(prog):
                continue
            if self._is_choice(prog[st.pc], st, adv):
                labels.append(f"script {k} {st.pc}")
        if self.alphabet is not None and s.adv.actions < self.alphabet.max_actions:
            labels.extend(self._adversary_choices(s))
        return sorted(labels)

    def step(self, s: SysState, label: str) -> Tuple[SysState, List[Event]]:
        w = _Work(s)
        if label.startswith("m "):
            if s.depth >= self.sc.max_depth:
                raise ScheduleError(f"depth bound reached, cannot take {label!r}")
            try:
                w.m, outs = self.machine.step(s.machine, label[2:])
            except KeyError:
                raise ScheduleError(f"choice {label!r} is not enabled") from None
            w.depth += 1
            self._deliver(w, outs)
        elif label.startswith("script "):
            _, k, pc = label.split(" ")
            i = self._program_index(int(k), int(pc), s)
            prog = self.programs[i][1]
            if not self._is_choice(prog[s.scripts[i].pc], s.scripts[i], self.programs[i][2]):
                raise ScheduleError(f"choice {label!r} is not enabled")
            self._run_action(w, i)
        elif label.startswith("adv "):
            if label not in self._adversary_choices(s) or s.adv.actions >= self.alphabet.max_actions:
                raise ScheduleError(f"choice {label!r} is not enabled")
            self._adversary_step(w, label)
        else:
            raise ScheduleError(f"malformed choice {label!r}")
        self._settle(w)
        return w.freeze(), w.events

    def _program_index(self, k: int, pc: int, s: SysState) -> int:
        for i, (p, prog, _) in enumerate(self.programs):
            if p == k and s.scripts[i].pc == pc and not s.scripts[i].dead and pc < len(prog):
                return i
        raise ScheduleError(f"principal {k} is not at action {pc}")

    # -- scripts ----------------------------------------------------------------

    @staticmethod
    def _is_choice(a: Action, st: ScriptState, adversarial: bool) -> bool:
        if a.name in ("emit", "send"):
            return True
        if not adversarial:
            return False
        if a.name in ("use", "exec_ideal"):
            return True
        return a.name in ("acquire", "chmod", "clk") and st.phase == 0

    def _hidden_enabled(self, w: _Work, i: int) -> bool:
        k, prog, adversarial = self.programs[i]
        st = w.scripts[i]
        if st.dead or st.pc >= len(prog):
            return False
        a = prog[st.pc]
        if self._is_choice(a, st, adversarial):
            return False
        if a.name in ("acquire", "chmod", "clk"):
            return st.phase == 0 or st.lookup(a.bound_var) is not None
        if a.name in ("assert_success", "assert_stale", "assert_failure"):
            return st.lookup(a.args[0]) is not None
        if a.name == "recv":
            return bool(w.buffers.get(a.args[0]))
        if a.name == "block":
            return False
        return True

    def _settle(self, w: _Work) -> None:
        progressed = True
        while progressed:
            progressed = False
            for i in range(len(self.programs)):
                while self._hidden_enabled(w, i):
                    self._run_action(w, i)
                    progressed = True

    def _request(self, w: _Work, i: int, kind: str, args: tuple, var: str) -> None:
        k = self.programs[i][0]
        st = w.scripts[i]
        ch = f"{k}.{st.pc}"
        req = Request(kind, k, args, ch)
        w.m = self.machine.receive(w.m, req)
        w.scripts[i] = replace(st, waiting=st.waiting + ((ch, var),))
        w.events.append(Event(req.channel(self.iface), "in", k not in self.honest,
                              core.Tup(tuple(args) + (Name(ch),)), "request"))

    def _run_action(self, w: _Work, i: int) -> None:
        k, prog, _ = self.programs[i]
        st = w.scripts[i]
        a = prog[st.pc]
        nxt = dict(pc=st.pc + 1, phase=0)
        if a.name in ("acquire", "chmod", "clk"):
            if st.phase == 0:
                if a.name == "acquire":
                    self._request(w, i, AUTH, (Name(a.args[0]),), a.args[1])
                elif a.name == "chmod":
                    self._request(w, i, ADM, (Name(a.args[0]),), a.args[1])
                else:
                    self._request(w, i, CLK, (), a.args[0])
                w.scripts[i] = replace(w.scripts[i], phase=1)
                return
            w.scripts[i] = replace(st, **nxt)
        elif a.name == "use":
            kappa = st.lookup(a.args[0])
            self._request(w, i, EXEC, (kappa if kappa is not None else UNIT,), a.args[1])
            w.scripts[i] = replace(w.scripts[i], **nxt)
        elif a.name == "exec_ideal":
            bound = INF if a.args[1] == "inf" else st.lookup(a.args[1])
            self._request(w, i, OP, (Name(a.args[0]), bound if bound is not None else INF), a.args[2])
            w.scripts[i] = replace(w.scripts[i], **nxt)
        elif a.name in ("assert_success", "assert_stale", "assert_failure"):
            is_error = st.lookup(a.args[0]) == ERROR
            ok = (not is_error) if a.name == "assert_success" else is_error
            w.scripts[i] = replace(st, **nxt) if ok else replace(st, dead=True)
        elif a.name == "recv":
            queue = w.buffers[a.args[0]]
            t, w.buffers[a.args[0]] = queue[0], queue[1:]
            w.events.append(Event(a.args[0], "in", False, t, "recv"))
            w.scripts[i] = replace(st, env=tuple(sorted(st.env + ((a.args[1], t),), key=lambda p: p[0])), **nxt)
        elif a.name in ("emit", "send"):
            ch = a.args[0]
            if a.name == "emit":
                t = UNIT
            else:
                t = st.lookup(a.args[1])
                if t is None:
                    t = core.decode(a.args[1])
                w.buffers[ch] = w.buffers.get(ch, ()) + (t,)
                w.adv = _add_knowledge(w.adv, t)
            w.events.append(Event(ch, "out", True, t, a.name))
            w.scripts[i] = replace(st, **nxt)
        else:
            raise AssertionError(f"action {a.name} cannot run")

    # -- machine outputs ---------------------------------------------------------

    def _deliver(self, w: _Work, outs) -> None:
        for o in outs:
            if o.kind == "reply":
                for i, st in enumerate(w.scripts):
                    for ch, var in st.waiting:
                        if ch == o.channel:
                            w.scripts[i] = replace(
                                st, waiting=tuple(p for p in st.waiting if p[0] != ch),
                                env=tuple(sorted(st.env + ((var, o.payload),), key=lambda p: p[0])))
                            break
                visible = o.principal not in self.honest
                if visible:
                    w.adv = _add_knowledge(w.adv, o.payload)
                w.events.append(Event(o.channel, "out", visible, o.payload, "reply"))
            elif o.kind == "exec":
                w.events.append(Event(o.channel, "out", False, o.payload, "exec"))
            elif o.kind == "tick":
                w.events.append(Event("clock", "tick", False, o.payload, "tick"))
            # debug drops are not trace events

    # -- exhaustive adversary ----------------------------------------------------

    def _adversary_choices(self, s: SysState) -> List[str]:
        a = self.alphabet
        if a is None:
            return []
        out = [f"adv adm {j} {adm}" for j, adm in a.adm]
        out += [f"adv send {c} {t}" for c, t in a.sends]
        lead = self.adv_principals[0] if self.adv_principals else 0
        if self.iface == "nafs":
            out += [f"adv auth {j} {op}" for j, op in a.auth]
            if a.exec_known:
                out += [f"adv exec {lead} {t.text()}" for t in s.adv.knowledge if isinstance(t, Mac)]
            if a.forge:
                for op in sorted({op for _, op in a.auth}):
                    forged = Mac(core.tup(lead, op, 0), core.K_ADV)
                    if forged not in s.adv.knowledge:
                        out.append(f"adv exec {lead} {forged.text()}")
        else:
            out += [f"adv clk {j}" for j in a.clk]
            clocks = ["inf"] + [t.text() for t in s.adv.knowledge if isinstance(t, Nat)]
            out += [f"adv op {j} {op} {tau}" for j, op in a.op for tau in clocks]
        return sorted(set(out))

    def _adversary_step(self, w: _Work, label: str) -> None:
        _, kind, rest = label.split(" ", 2)
        n = w.adv.actions
        w.adv = replace(w.adv, actions=n + 1)
        if kind == "send":
            ch, text = rest.split(" ", 1)
            t = core.decode(text)
            w.buffers[ch] = w.buffers.get(ch, ()) + (t,)
            w.events.append(Event(ch, "out", True, t, "send"))
            return
        j_text, arg = (rest.split(" ", 1) + [""])[:2]
        j = int(j_text)
        ch = f"{j}.a{n}"
        if kind == "auth":
            req = Request(AUTH, j, (Name(arg),), ch)
        elif kind == "exec":
            req = Request(EXEC, j, (core.decode(arg),), ch)
        elif kind == "adm":
            req = Request(ADM, j, (Name(arg),), ch)
        elif kind == "clk":
            req = Request(CLK, j, (), ch)
        else:
            op, tau = arg.split(" ")
            req = Request(OP, j, (Name(op), core.decode(tau)), ch)
        w.m = self.machine.receive(w.m, req)
        w.events.append(Event(req.channel(self.iface), "in", True,
                              core.Tup(req.args + (Name(ch),)), "request"))


# ---------------------------------------------------------------------------
# Views

RenderCtx = Tuple[Tuple[str, ...], ...]


def render(t: Optional[Term], ctx: RenderCtx) -> Tuple[str, RenderCtx]:
    """Adversary rendering: secret keys are replaced by their order of first
    appearance among MACs of the same message, ciphertexts by their order of
    first appearance.  Only equality between rendered terms is meaningful."""
    if t is None:
        return "-", ctx
    if isinstance(t, _ATOMS):
        return t.text(), ctx
    if isinstance(t, core.Tup):
        parts = []
        for x in t.items:
            r, ctx = render(x, ctx)
            parts.append(r)
        return "tup(" + ",".join(parts) + ")", ctx
    if isinstance(t, Mac):
        m, ctx = render(t.message, ctx)
        if not t.key.private:
            return f"mac({m},{t.key.name})", ctx
        same = [e for e in ctx if e[0] == "mac" and e[1] == m]
        entry = ("mac", m, t.key.name)
        if entry not in same:
            ctx = ctx + (entry,)
            same.append(entry)
        return f"mac({m},#{same.index(entry)})", ctx
    # Enc
    entry = ("enc", t.text())
    encs = [e for e in ctx if e[0] == "enc"]
    if entry not in encs:
        ctx = ctx + (entry,)
        encs.append(entry)
    return f"enc#{encs.index(entry)}", ctx


_ATOMS = (core.Nat, core.Name, core.Infinity)

ADVERSARY, SAFETY = "adversary", "safety"


def in_view(e, mode: str) -> bool:
    if e.visible:
        return True
    return mode == SAFETY and (e.direction == "tick" or e.channel.startswith("exec."))


def view_strings(events: Iterable[Event], mode: str, ctx: RenderCtx) -> Tuple[Tuple[str, ...], RenderCtx]:
    out = []
    for e in events:
        if not in_view(e, mode):
            continue
        if e.direction == "tick":
            out.append(f"tick {e.payload.text()}")
            continue
        r, ctx = render(e.payload, ctx)
        out.append(f"{e.direction} {e.channel} {r}")
    return tuple(out), ctx


# ---------------------------------------------------------------------------
# Runs and traces

@dataclass(frozen=True)
class TraceEvent:
    seq: int
    clk: int
    channel: str
    direction: str
    visible: bool
    payload: str

    def line(self) -> str:
        return "\t".join([str(self.seq), str(self.clk), self.channel, self.direction,
                          "1" if self.visible else "0", self.payload])

    @staticmethod
    def parse(line: str) -> "TraceEvent":
        seq, clk, channel, direction, visible, payload = line.rstrip("\n").split("\t")
        return TraceEvent(int(seq), int(clk), channel, direction, visible == "1", payload)


@dataclass(frozen=True)
class Trace:
    events: Tuple[TraceEvent, ...]
    schedule: Tuple[str, ...] = ()

    def text(self) -> str:
        return "".join(e.line() + "\n" for e in self.events)


def _to_trace_events(events: List[Event], clk: int, start: int) -> List[TraceEvent]:
    return [TraceEvent(start + n, clk, e.channel, e.direction, e.visible,
                       "-" if e.payload is None else e.payload.text())
            for n, e in enumerate(events)]


def resolve(sim: Simulator, s: SysState, entry: str) -> str:
    """Map a schedule entry (choice id or full label) to an enabled label."""
    enabled = sim.choices(s)
    if entry in enabled:
        return entry
    for label in enabled:
        if choice_id(label) == entry:
            return label
    raise ScheduleError(f"schedule entry {entry!r} does not name an enabled choice")


def run(sc: Scenario, schedule: Sequence[str]) -> Trace:
    sim = Simulator(sc)
    s, evs = sim.initial()
    out = _to_trace_events(evs, sim.machine.clock(s.machine), 0)
    labels = []
    for entry in schedule:
        label = resolve(sim, s, entry)
        labels.append(label)
        s, evs = sim.step(s, label)
        out += _to_trace_events(evs, sim.machine.clock(s.machine), len(out))
    return Trace(tuple(out), tuple(labels))


def random_schedule(sc: Scenario, length: int, seed: Optional[int] = None) -> List[str]:
    rng = random.Random(sc.seed if seed is None else seed)
    sim = Simulator(sc)
    s, _ = sim.initial()
    labels = []
    for _ in range(length):
        options = sim.choices(s)
        if not options:
            break
        label = rng.choice(options)
        labels.append(label)
        s, _ = sim.step(s, label)
    return labels


def decode_event_payload(e: TraceEvent) -> Optional[Term]:
    return None if e.payload == "-" else core.decode(e.payload)


def trace_view(trace: Trace, mode: str = ADVERSARY) -> Tuple[str, ...]:
    evs = [Event(e.channel, e.direction, e.visible, decode_event_payload(e), "") for e in trace.events]
    return view_strings(evs, mode, ())[0]


def adversary_view(trace: Trace) -> Tuple[str, ...]:
    return trace_view(trace, ADVERSARY)


def safety_view(trace: Trace) -> Tuple[str, ...]:
    return trace_view(trace, SAFETY)


def write_trace(trace: Trace, path) -> None:
    with open(path, "w") as fh:
        fh.write(trace.text())


def read_trace(path) -> Trace:
    with open(path) as fh:
        return Trace(tuple(TraceEvent.parse(line) for line in fh if line.strip()))


# ---------------------------------------------------------------------------
# Schedule files: the scenario travels with the choices so a file replays on
# its own.

SCHEDULE_SCHEMA = 1


def schedule_to_dict(sc: Scenario, schedule: Sequence[str]) -> dict:
    return {
        "schema": SCHEDULE_SCHEMA,
        "scenario": to_dict(sc),
        "choices": [{"id": choice_id(label), "label": label} for label in schedule],
    }


def write_schedule(sc: Scenario, schedule: Sequence[str], path) -> None:
    with open(path, "w") as fh:
        yaml.safe_dump(schedule_to_dict(sc, schedule), fh, sort_keys=False)


def read_schedule(path) -> Tuple[Optional[Scenario], List[str]]:
    """Scenario (if embedded) and the choice labels of a schedule file."""
    with open(path) as fh:
        d = yaml.safe_load(fh)
    if not isinstance(d, dict) or d.get("schema") != SCHEDULE_SCHEMA:
        raise ValueError(f"{path}: not a schedule file of schema {SCHEDULE_SCHEMA}")
    sc = from_dict(d["scenario"]) if d.get("scenario") else None
    out = []
    for c in d.get("choices") or ():
        if isinstance(c, dict):
            c = c.get("label", c.get("id"))
        out.append(str(c))  # labels and ids are both accepted by resolve
    return sc, out
