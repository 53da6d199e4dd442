"""Command-line front end.

Exit codes: 0 when every verdict is the expected one, 1 when a violation (or
an unexpected verdict) is found, 2 when a check is inconclusive, 64 and up
for usage, input and I/O errors.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace
from typing import List, Optional, Sequence, Tuple

import yaml

from . import graphdist as gd
from . import harness, scenario
from .checker import INCONCLUSIVE, Verdict, check_distinguisher, check_safety
from .explore import explore
from .library import CASES, run_case
from .nas_fs import NAFS_VARIANTS, TOGGLE_NAMES
from .protocol import ScheduleError
from .scripts import MAPPINGS

EXIT_OK, EXIT_VIOLATION, EXIT_INCONCLUSIVE = 0, 1, 2
EXIT_USAGE, EXIT_DATA, EXIT_NOINPUT, EXIT_IO = 64, 65, 66, 74


class UsageError(Exception):
    code = EXIT_USAGE


class InputError(Exception):
    code = EXIT_DATA


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# ---------------------------------------------------------------------------
# Scenario arguments

def parse_toggle(text: str) -> Tuple[str, object]:
    if "=" not in text:
        raise UsageError(f"--toggle expects key=value, got {text!r}")
    key, raw = text.split("=", 1)
    key = key.strip().replace("-", "_")
    if key not in TOGGLE_NAMES:
        raise UsageError(f"unknown toggle {key!r}; accepted: {', '.join(TOGGLE_NAMES)}")
    if key == "delay":
        try:
            return key, int(raw)
        except ValueError:
            raise UsageError(f"toggle delay expects an integer, got {raw!r}") from None
    low = raw.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return key, True
    if low in ("0", "false", "no", "off"):
        return key, False
    raise UsageError(f"toggle {key} expects a boolean, got {raw!r}")


def load_scenario(ref: str, args=None) -> scenario.Scenario:
    """A scenario file, or ``lib:<case>:<broken|fixed>[:<index>]``."""
    if ref.startswith("lib:"):
        parts = ref.split(":")
        if len(parts) not in (3, 4) or parts[1] not in CASES or parts[2] not in ("broken", "fixed"):
            raise UsageError(f"library reference must be lib:<case>:<broken|fixed>[:<index>]; cases: "
                             f"{', '.join(CASES)}")
        scs = CASES[parts[1]]().config(parts[2]).scenarios
        idx = int(parts[3]) if len(parts) == 4 else 0
        if not 0 <= idx < len(scs):
            raise UsageError(f"{ref}: index out of range (0..{len(scs) - 1})")
        sc = scs[idx]
    else:
        try:
            sc = scenario.load(ref)
        except FileNotFoundError:
            raise _NoInput(f"no such scenario file: {ref}") from None
        except (ValueError, KeyError, TypeError, yaml.YAMLError) as e:
            raise InputError(f"{ref}: {e}") from None
    if args is not None:
        sc = _apply_overrides(sc, args)
    return sc


class _NoInput(Exception):
    code = EXIT_NOINPUT


def _apply_overrides(sc: scenario.Scenario, args) -> scenario.Scenario:
    if getattr(args, "variant", None):
        if args.variant not in NAFS_VARIANTS:
            raise UsageError(f"unknown variant {args.variant!r}; accepted: {', '.join(NAFS_VARIANTS)}")
        sc = replace(sc, variant=args.variant)
    toggles = dict(parse_toggle(t) for t in getattr(args, "toggle", None) or ())
    if toggles:
        sc = sc.with_toggles(**toggles)
    if getattr(args, "depth", None) is not None:
        sc = replace(sc, max_depth=args.depth)
    if getattr(args, "budget", None) is not None:
        sc = replace(sc, budget=args.budget)
    try:
        sc.validate()
    except ValueError as e:
        raise InputError(str(e)) from None
    return sc


def _kv(**fields) -> str:
    return " ".join(f"{k}={v}" for k, v in fields.items())


def _exit_for(verdict: Verdict) -> int:
    if verdict.kind == INCONCLUSIVE:
        return EXIT_INCONCLUSIVE
    return EXIT_VIOLATION if verdict.negative else EXIT_OK


def _emit_witness(verdict: Verdict, path: Optional[str]) -> str:
    if not verdict.negative or not path:
        return "-"
    harness.write_schedule(verdict.witness_scenario, verdict.witness, path)
    return path


# ---------------------------------------------------------------------------
# Commands

def cmd_run(args) -> int:
    sc = load_scenario(args.scenario, args)
    if args.schedule:
        _, schedule = harness.read_schedule(args.schedule)
    else:
        schedule = harness.random_schedule(sc, args.random, args.seed)
    trace = harness.run(sc, schedule)
    _write_text(trace.text(), args.trace_out)
    if args.schedule_out:
        harness.write_schedule(sc, trace.schedule, args.schedule_out)
    print(_kv(check=f"run:{sc.name}", steps=len(trace.schedule), events=len(trace.events),
              trace=args.trace_out or "-"))
    return EXIT_OK


def cmd_replay(args) -> int:
    embedded, schedule = harness.read_schedule(args.schedule)
    if args.scenario:
        sc = load_scenario(args.scenario, args)
    elif embedded is not None:
        sc = _apply_overrides(embedded, args)
    else:
        raise UsageError("schedule file has no embedded scenario; pass one")
    trace = harness.run(sc, schedule)
    _write_text(trace.text(), args.trace_out)
    print(_kv(check=f"replay:{sc.name}", steps=len(trace.schedule), events=len(trace.events),
              trace=args.trace_out or "-"))
    return EXIT_OK


def cmd_explore(args) -> int:
    sc = load_scenario(args.scenario, args)
    res = explore(sc, args.mode, args.budget, args.jobs)
    lines = [" | ".join(t) for t in res.traces]
    if args.out:
        _write_text("\n".join(lines) + "\n", args.out)
    print(_kv(check=f"explore:{sc.name}", mode=args.mode, depth=sc.max_depth, traces=len(lines),
              states=res.states, complete="yes" if res.complete else "no", out=args.out or "-"))
    return EXIT_OK if res.complete else EXIT_INCONCLUSIVE


def cmd_check_safety(args) -> int:
    sc = load_scenario(args.scenario, args)
    v = check_safety(sc, sc.max_depth, args.mapping, budget=args.budget, jobs=args.jobs)
    print(v.summary(_emit_witness(v, args.witness_out)))
    return _exit_for(v)


def cmd_check_security(args) -> int:
    a = load_scenario(args.first, args)
    b = load_scenario(args.second, args)
    v = check_distinguisher(a, b, a.max_depth, args.mapping, budget=args.budget, jobs=args.jobs)
    print(v.summary(_emit_witness(v, args.witness_out)))
    return _exit_for(v)


def cmd_attacks(args) -> int:
    names = list(CASES) if args.all or not args.cases else args.cases
    for n in names:
        if n not in CASES:
            raise UsageError(f"unknown attack case {n!r}; accepted: {', '.join(CASES)}")
    which = ("broken", "fixed") if args.which == "both" else (args.which,)
    if args.witness_dir:
        os.makedirs(args.witness_dir, exist_ok=True)
    rows, summaries, code = [], [], EXIT_OK
    for n in names:
        case = CASES[n]()
        for w in which:
            v = run_case(case, w, args.depth, args.jobs)
            expected = case.expected(w)
            path = os.path.join(args.witness_dir, f"{n}-{w}.sched") if args.witness_dir else None
            wpath = _emit_witness(v, path)
            ok = v.kind == expected
            rows.append((n, w, expected, v.kind, "ok" if ok else "MISMATCH"))
            summaries.append(v.summary(wpath) + f" expected={expected} match={'yes' if ok else 'no'}")
            if v.kind == INCONCLUSIVE:
                code = max(code, EXIT_INCONCLUSIVE) if code != EXIT_VIOLATION else code
            elif not ok:
                code = EXIT_VIOLATION
    widths = [max(len(str(r[i])) for r in rows + [("case", "config", "expected", "verdict", "")]) for i in range(5)]
    header = ("case", "config", "expected", "verdict", "")
    for r in [header] + rows:
        print("  ".join(str(x).ljust(widths[i]) for i, x in enumerate(r)).rstrip())
    for s in summaries:
        print(s)
    return code


# -- graphs ------------------------------------------------------------------

BUILTIN_GRAPHS = {"builtin:fs": gd.fs_graph, "builtin:static": gd.static_fs_graph}


def _load_graph(ref: str):
    if ref in BUILTIN_GRAPHS:
        g = BUILTIN_GRAPHS[ref]()
        return g, gd.FS_CUT if ref == "builtin:fs" else ()
    try:
        return gd.load_graph(ref)
    except FileNotFoundError:
        raise _NoInput(f"no such graph file: {ref}") from None
    except (gd.GraphError, ValueError, KeyError, TypeError, yaml.YAMLError) as e:
        raise InputError(f"{ref}: {e}") from None


def _parse_cut(items: Optional[Sequence[str]], default):
    if not items:
        return tuple(default)
    out = []
    for item in items:
        parts = item.split(",")
        if len(parts) != 2:
            raise UsageError(f"--cut expects src,dst, got {item!r}")
        out.append((parts[0].strip(), parts[1].strip()))
    return tuple(out)


def cmd_graph(args) -> int:
    g, file_cut = _load_graph(args.graph)
    try:
        # Cuts are stated against the original graph, before explication
        # turns its inputs into ordinary nodes.
        cut = gd.check_cut(g, _parse_cut(args.cut, file_cut))
        if args.action == "equiv" and args.compare != "explicate" and len(cut) != 1:
            raise UsageError(f"--compare {args.compare} needs exactly one cut edge, got {len(cut)}")
        if args.action == "explicate":
            out, out_cut = gd.explicate(g), cut
        elif args.action == "distribute":
            out, out_cut = gd.distribute(gd.explicate(g), cut, fresh=not args.no_timestamps), ()
        elif args.action == "revise":
            out, out_cut = gd.revise(g, cut), ()
        else:
            return _graph_equiv(args, g, cut)
    except gd.GraphError as e:
        raise InputError(str(e)) from None
    if args.out:
        gd.save_graph(out, args.out, out_cut)
    else:
        sys.stdout.write(yaml.safe_dump(gd.graph_to_dict(out, out_cut), sort_keys=False))
    print(_kv(check=f"graph-{args.action}", nodes=len(out.nodes), edges=len(out.edges),
              out=args.out or "-"))
    return EXIT_OK


def _universes(args, g):
    users = tuple(int(u) for u in args.users.split(","))
    ops = tuple(o for o in args.ops.split(","))
    requests = gd.request_universe(users, ops)
    admins = tuple(sorted(g.param("controls", frozenset())))
    return requests, gd.admin_universe(admins) if admins else ()


def _graph_equiv(args, g, cut) -> int:
    requests, admins = _universes(args, g)
    common = dict(op_budget=args.requests, adm_budget=args.admin, max_time=args.ticks)
    kind = args.compare
    if kind == "explicate":
        a = gd.plain_interface(g, requests, admins, **common)
        b = gd.explicated_interface(gd.explicate(g), g, requests, admins, **common)
    elif kind == "distribute":
        a = gd.distributed_interface(gd.distribute(gd.explicate(g), cut), g, cut, requests, admins, **common)
        b = gd.revised_interface(gd.revise(g, cut), g, cut, requests, admins, **common)
    else:
        a = gd.distributed_interface(gd.distribute(gd.explicate(g), cut, fresh=False), g, cut, requests,
                                     admins, with_time=False, **common)
        b = gd.plain_interface(g, requests, admins, **common)
    r = gd.trace_equiv_oracle(a, b, args.depth, args.budget)
    verdict = "inconclusive" if r.equal is None else ("equal" if r.equal else "counterexample")
    if r.equal is False:
        print("counterexample (only in %s): %s" % (r.only_in, " ; ".join(r.counterexample)))
        print("moves: %s" % " ; ".join(r.moves))
    print(_kv(check=f"graph-equiv:{kind}", verdict=verdict, depth=args.depth,
              states=f"{r.states[0]}+{r.states[1]}", pairs=r.pairs))
    if r.equal is None:
        return EXIT_INCONCLUSIVE
    return EXIT_OK if r.equal else EXIT_VIOLATION


# ---------------------------------------------------------------------------

def _write_text(text: str, path: Optional[str]) -> None:
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _scenario_opts(p: argparse.ArgumentParser, depth=True) -> None:
    p.add_argument("--variant", help=f"override the variant ({', '.join(NAFS_VARIANTS)})")
    p.add_argument("--toggle", action="append", metavar="K=V",
                   help=f"override a toggle ({', '.join(TOGGLE_NAMES)})")
    if depth:
        p.add_argument("--depth", type=int, help="machine-step bound")
    p.add_argument("--budget", type=int, help="state budget per search")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="capcheck", description="Capability file-system checker.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("run", help="run a scenario under a schedule")
    r.add_argument("scenario")
    r.add_argument("--schedule", help="schedule file to follow")
    r.add_argument("--random", type=int, default=20, metavar="N", help="random schedule length")
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--trace-out")
    r.add_argument("--schedule-out")
    _scenario_opts(r)
    r.set_defaults(func=cmd_run)

    e = sub.add_parser("explore", help="list every observable trace")
    e.add_argument("scenario")
    e.add_argument("--mode", choices=(harness.ADVERSARY, harness.SAFETY), default=harness.ADVERSARY)
    e.add_argument("--out")
    e.add_argument("--jobs", type=int, default=1)
    _scenario_opts(e)
    e.set_defaults(func=cmd_explore)

    s = sub.add_parser("check-safety", help="bounded safety check")
    s.add_argument("scenario")
    s.add_argument("--mapping", choices=MAPPINGS)
    s.add_argument("--witness-out")
    s.add_argument("--jobs", type=int, default=1)
    _scenario_opts(s)
    s.set_defaults(func=cmd_check_safety)

    c = sub.add_parser("check-security", help="distinguisher search on a scenario pair")
    c.add_argument("first")
    c.add_argument("second")
    c.add_argument("--mapping", choices=MAPPINGS)
    c.add_argument("--witness-out")
    c.add_argument("--jobs", type=int, default=1)
    _scenario_opts(c)
    c.set_defaults(func=cmd_check_security)

    a = sub.add_parser("attacks", help="run the attack library")
    a.add_argument("cases", nargs="*")
    a.add_argument("--all", action="store_true")
    a.add_argument("--which", choices=("broken", "fixed", "both"), default="both")
    a.add_argument("--depth", type=int)
    a.add_argument("--jobs", type=int, default=1)
    a.add_argument("--witness-dir")
    a.set_defaults(func=cmd_attacks)

    g = sub.add_parser("graph", help="graph transforms and the equivalence oracle")
    g.add_argument("action", choices=("explicate", "distribute", "revise", "equiv"))
    g.add_argument("graph", nargs="?", default="builtin:fs",
                   help="graph file or builtin:fs / builtin:static")
    g.add_argument("--cut", action="append", metavar="SRC,DST")
    g.add_argument("--out")
    g.add_argument("--no-timestamps", action="store_true", help="distribute without the clock check")
    g.add_argument("--compare", choices=("explicate", "distribute", "naive"), default="distribute",
                   help="for equiv: which pair of graphs to compare")
    g.add_argument("--users", default="1,2")
    g.add_argument("--ops", default="read:f,write:f:9")
    g.add_argument("--requests", type=int, default=2, help="request writes per run")
    g.add_argument("--admin", type=int, default=1, help="admin writes per run")
    g.add_argument("--ticks", type=int, default=3)
    g.add_argument("--depth", type=int, default=12, help="observations per trace")
    g.add_argument("--budget", type=int, default=10**6)
    g.set_defaults(func=cmd_graph)

    p_replay = sub.add_parser("replay", help="re-run a schedule file")
    p_replay.add_argument("schedule")
    p_replay.add_argument("scenario", nargs="?")
    p_replay.add_argument("--trace-out")
    _scenario_opts(p_replay, depth=False)
    p_replay.set_defaults(func=cmd_replay)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except (UsageError, InputError, _NoInput) as e:
        print(f"capcheck: {e}", file=sys.stderr)
        return e.code
    except ScheduleError as e:
        print(f"capcheck: schedule error: {e}", file=sys.stderr)
        return EXIT_DATA
    except OSError as e:
        print(f"capcheck: {e}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
