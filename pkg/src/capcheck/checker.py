"""Abstraction of implementation scenarios, bounded safety checks and the
pairwise distinguisher search.

Safety: every safety-view trace of the implementation must also be a trace
of the abstracted scenario running behind the ``phi`` wrapper.

Security: a pair of implementation scenarios whose abstractions cannot be
told apart must not be distinguishable either.  Trace sets are compared
under may-semantics at the adversary view.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from typing import Optional, Tuple

from .explore import explore, included_in
from .harness import ADVERSARY, SAFETY
from .scenario import Alphabet, Scenario
from .scripts import abstract_script

SAFE, UNSAFE = "safe", "unsafe"
CONSISTENT, VIOLATION = "consistent", "violation"
INCONCLUSIVE = "inconclusive"
DEFAULT_SLACK = 2


@dataclass
class Verdict:
    name: str
    kind: str
    witness: Tuple[str, ...] = ()
    witness_scenario: Optional[Scenario] = None
    observable: Tuple[str, ...] = ()
    stats: dict = field(default_factory=dict)
    elapsed: float = 0.0

    @property
    def negative(self) -> bool:
        return self.kind in (UNSAFE, VIOLATION)

    def summary(self, witness_path: str = "-") -> str:
        parts = [f"check={self.name}", f"verdict={self.kind}", f"witness={witness_path}"]
        parts += [f"{k}={v}" for k, v in sorted(self.stats.items())]
        return " ".join(parts)


def default_mapping(variant: str) -> str:
    return "a6" if variant == "dynamic-plus" else "plain"


def abstract_alphabet(a: Alphabet, timed: bool) -> Alphabet:
    """Ideal-interface image of the exhaustive adversary's actions."""
    principals = tuple(sorted({j for j, _ in a.auth}))
    return Alphabet(
        adm=a.adm, sends=a.sends, max_actions=a.max_actions,
        clk=principals if timed else (),
        op=a.auth,
    )


def abstract_scenario(sc: Scenario, mapping: Optional[str] = None, wrap: bool = True) -> Scenario:
    """Specification image of an implementation scenario.

    With ``wrap`` the image runs behind ``phi`` so it keeps the networked
    interface and the adversary is unchanged; without it the adversary is
    mapped to the ideal interface as well.
    """
    if sc.level != "nafs" or sc.wrappers:
        raise ValueError("only unwrapped networked scenarios can be abstracted")
    sc.validate()
    mapping = mapping or default_mapping(sc.variant)
    static = sc.variant == "static"
    timed = mapping == "a6" and not static
    scripts = tuple((k, abstract_script(s, mapping, static)) for k, s in sc.scripts)
    adv = sc.adversary
    if not wrap:
        if adv.kind == "exhaustive":
            adv = replace(adv, alphabet=abstract_alphabet(adv.alphabet, timed))
        elif adv.kind == "script":
            adv = replace(adv, script=abstract_script(adv.script, mapping, static))
    return replace(
        sc,
        name=sc.name + "@spec",
        level="tfs",
        scripts=scripts,
        adversary=adv,
        wrappers=("phi",) if wrap else (),
        failure_blocks=sc.toggles.failure_blocks,
        # A stale use answered with the error term has to be answerable by
        # the specification as well.
        expired_reply=(sc.variant == "dynamic-plus" and not sc.toggles.stale_blocks),
        clock_requests=True if timed else None,
    )


def check_safety(sc: Scenario, depth: Optional[int] = None, mapping: Optional[str] = None,
                 slack: int = DEFAULT_SLACK, budget: Optional[int] = None, jobs: int = 1,
                 name: Optional[str] = None) -> Verdict:
    started = time.perf_counter()
    depth = sc.max_depth if depth is None else depth
    impl = replace(sc, max_depth=depth)
    spec = abstract_scenario(impl, mapping, wrap=True)
    a = explore(impl, SAFETY, budget, jobs)
    inc = included_in(a, spec, SAFETY, depth + slack, budget)
    stats = {"depth": depth, "impl_traces": len(a.trie), "impl_states": a.states,
             "spec_states": inc.states}
    name = name or f"safety:{sc.name}"
    if inc.unmatched:
        obs = inc.unmatched[0]
        v = Verdict(name, UNSAFE, a.witness_of(obs), impl, obs, stats)
    elif not (a.complete and inc.complete):
        v = Verdict(name, INCONCLUSIVE, stats=stats)
    else:
        v = Verdict(name, SAFE, stats=stats)
    v.elapsed = time.perf_counter() - started
    return v


@dataclass
class _Comparison:
    distinguishable: Optional[bool]
    witness: Tuple[str, ...] = ()
    scenario: Optional[Scenario] = None
    observable: Tuple[str, ...] = ()
    states: int = 0


def compare(a: Scenario, b: Scenario, depth: int, slack: int, budget: Optional[int], jobs: int = 1) -> _Comparison:
    """May-testing comparison of two scenarios at the adversary view."""
    a, b = replace(a, max_depth=depth), replace(b, max_depth=depth)
    ea = explore(a, ADVERSARY, budget, jobs)
    eb = explore(b, ADVERSARY, budget, jobs)
    states = ea.states + eb.states
    complete = ea.complete and eb.complete
    found = []
    for x, ex, y in ((a, ea, b), (b, eb, a)):
        inc = included_in(ex, y, ADVERSARY, depth + slack, budget)
        states += inc.states
        complete = complete and inc.complete
        if inc.unmatched:
            obs = inc.unmatched[0]
            found.append(((len(obs), obs), x, ex.witness_of(obs), obs))
    if found:
        _, sc, witness, obs = min(found, key=lambda f: f[0])
        return _Comparison(True, witness, sc, obs, states)
    return _Comparison(False if complete else None, states=states)


def check_distinguisher(a: Scenario, b: Scenario, depth: Optional[int] = None, mapping: Optional[str] = None,
                        slack: int = DEFAULT_SLACK, budget: Optional[int] = None, jobs: int = 1,
                        name: Optional[str] = None) -> Verdict:
    started = time.perf_counter()
    depth = a.max_depth if depth is None else depth
    impl = compare(a, b, depth, slack, budget, jobs)
    sa = abstract_scenario(a, mapping, wrap=False)
    sb = abstract_scenario(b, mapping, wrap=False)
    spec = compare(sa, sb, depth, slack, budget, jobs)
    stats = {"depth": depth, "impl_distinguishable": _tri(impl.distinguishable),
             "spec_distinguishable": _tri(spec.distinguishable), "states": impl.states + spec.states}
    name = name or f"security:{a.name}|{b.name}"
    if impl.distinguishable and spec.distinguishable is False:
        v = Verdict(name, VIOLATION, impl.witness, impl.scenario, impl.observable, stats)
    elif impl.distinguishable is False or spec.distinguishable:
        v = Verdict(name, CONSISTENT, stats=stats)
    else:
        v = Verdict(name, INCONCLUSIVE, stats=stats)
    v.elapsed = time.perf_counter() - started
    return v


def _tri(x: Optional[bool]) -> str:
    return "unknown" if x is None else ("yes" if x else "no")
