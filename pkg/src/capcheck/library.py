"""Built-in attack cases.  Each case has a broken configuration, where the
check is expected to fail, and a fixed one, where it is expected to pass."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Dict, List, Optional, Tuple

from .checker import CONSISTENT, SAFE, UNSAFE, VIOLATION, Verdict, check_distinguisher, check_safety
from .nas_fs import Toggles
from .scenario import Adversary, Alphabet, Scenario
from .scripts import parse_script

READ_F, READ_G, OPAQUE = "read:f", "read:g", "opaque:f"
STORE = (("f", 7), ("g", 8))


@dataclass(frozen=True)
class Config:
    scenarios: Tuple[Scenario, ...]
    mapping: Optional[str] = None


@dataclass(frozen=True)
class Case:
    name: str
    kind: str  # safety | security
    description: str
    broken: Config
    fixed: Config
    expect_broken: str
    expect_fixed: str

    def config(self, which: str) -> Config:
        return self.broken if which == "broken" else self.fixed

    def expected(self, which: str) -> str:
        return self.expect_broken if which == "broken" else self.expect_fixed


def run_case(case: Case, which: str, depth: Optional[int] = None, jobs: int = 1) -> Verdict:
    cfg = case.config(which)
    name = f"{case.name}:{which}"
    if case.kind == "safety":
        return check_safety(cfg.scenarios[0], depth, cfg.mapping, jobs=jobs, name=name)
    a, b = cfg.scenarios
    return check_distinguisher(a, b, depth, cfg.mapping, jobs=jobs, name=name)


def _honest(name: str, variant: str, script, **kw) -> Scenario:
    lines = parse_script(script)
    return Scenario(name=name, variant=variant, honest=(1,), store=STORE,
                    scripts=((1, lines),) if lines else (), **kw)


def _variant(sc: Scenario, variant: str, **toggles) -> Scenario:
    return replace(sc, variant=variant, toggles=replace(sc.toggles, **toggles))


def _pair(cfg: Config, variant: str, **toggles) -> Config:
    return Config(tuple(_variant(s, variant, **toggles) for s in cfg.scenarios), cfg.mapping)


# -- R3: fake capabilities ----------------------------------------------------

def fake_cap_leak() -> Case:
    adv = Adversary("exhaustive", (2,), Alphabet(auth=((2, OPAQUE),), exec_known=True, max_actions=2))
    q1 = Scenario(name="q1-has-access", variant="static", honest=(1,), grants=((2, OPAQUE),),
                  adversary=adv, max_depth=6)
    q2 = replace(q1, name="q2-no-access", grants=())
    broken = Config(tuple(_variant(q, "static", fake_caps=False) for q in (q1, q2)))
    return Case("fake-cap-leak", "security",
                "denied requests answered with an error leak the policy before any use",
                broken, Config((q1, q2)), VIOLATION, CONSISTENT)


# -- R4: capabilities must name their user --------------------------------------

def cap_compare_leak() -> Case:
    adv = Adversary("exhaustive", (2, 3), Alphabet(auth=((2, OPAQUE), (3, OPAQUE)), max_actions=2))
    q1 = Scenario(name="q1-both", variant="static", honest=(1,), grants=((2, OPAQUE), (3, OPAQUE)),
                  adversary=adv, max_depth=6)
    q2 = replace(q1, name="q2-only-2", grants=((2, OPAQUE),))
    broken = Config(tuple(_variant(q, "static", user_in_caps=False) for q in (q1, q2)))
    return Case("cap-compare-leak", "security",
                "anonymous capabilities can be compared across users",
                broken, Config((q1, q2)), VIOLATION, CONSISTENT)


# -- revocation ---------------------------------------------------------------

REVOKE_SCRIPT = ["acquire(read:f, k)", "chmod(revoke:1:read:f, z)", "use(k, r)", "assert_success(r)", "emit(w)"]
GRANT_SCRIPT = ["acquire(read:f, k)", "chmod(grant:1:read:f, z)", "use(k, r)", "assert_success(r)", "emit(w)"]
SPECTATOR = Adversary("exhaustive", (2,), Alphabet(auth=((2, READ_F),), exec_known=True, max_actions=2))


def revocation_scenario(variant: str = "dynamic") -> Scenario:
    return _honest("revoke", variant, REVOKE_SCRIPT, grants=((1, READ_F),),
                   controls=((1, "revoke:1:read:f"),), adversary=SPECTATOR)


def grant_only_scenario(variant: str = "dynamic") -> Scenario:
    return _honest("grant-only", variant, GRANT_SCRIPT, controls=((1, "grant:1:read:f"),),
                   adversary=SPECTATOR)


def revocation() -> Case:
    return Case("revocation", "safety",
                "a capability acquired before a revocation stays usable after it",
                Config((revocation_scenario("dynamic"),)), Config((revocation_scenario("dynamic-plus"),)),
                UNSAFE, SAFE)


def grant_only() -> Case:
    sc = grant_only_scenario("dynamic")
    return Case("grant-only", "safety", "without revocation the naive dynamic scheme stays safe",
                Config((sc,)), Config((sc,)), SAFE, SAFE)


# -- ordering of acquire and chmod ----------------------------------------------

def t1_t2() -> Case:
    common = dict(controls=((1, "grant:1:read:f"),))
    t1 = _honest("t1", "dynamic", ["acquire(read:f, k)", "chmod(grant:1:read:f, z)", "use(k, r)",
                                   "assert_success(r)", "emit(w)"], **common)
    t2 = _honest("t2", "dynamic", ["chmod(grant:1:read:f, z)", "acquire(read:f, k)", "use(k, r)",
                                   "assert_success(r)", "emit(w)"], **common)
    broken = Config((t1, t2), "plain")
    return Case("t1-t2", "security", "acquiring before or after a grant is observable",
                broken, _pair(Config((t1, t2), "a6"), "dynamic-plus"), VIOLATION, CONSISTENT)


# -- stale uses -----------------------------------------------------------------

def t3() -> Case:
    stale = _honest("t3", "dynamic-plus", ["acquire(read:f, k)", "use(k, r)", "assert_stale(r)", "emit(w)"],
                    grants=((1, READ_F),))
    never = _honest("false", "dynamic-plus", [], grants=((1, READ_F),))
    broken = Config((_variant(stale, "dynamic-plus", stale_blocks=False),
                     _variant(never, "dynamic-plus", stale_blocks=False)), "plain")
    return Case("t3-stale", "security", "an answered stale use has no specification image",
                broken, Config((stale, never), "plain"), VIOLATION, CONSISTENT)


def t4_t5() -> Case:
    common = dict(grants=((1, READ_G),), controls=((1, "grant:1:read:f"),))
    t4 = _honest("t4", "dynamic-plus", [
        "acquire(read:g, k2)", "chmod(grant:1:read:f, z)", "acquire(read:f, k1)", "use(k1, r1)",
        "assert_success(r1)", "use(k2, r2)", "assert_success(r2)", "emit(w)"], **common)
    t5 = _honest("t5", "dynamic-plus", [
        "chmod(grant:1:read:f, z)", "acquire(read:f, k1)", "use(k1, r1)", "assert_success(r1)",
        "acquire(read:g, k2)", "use(k2, r2)", "assert_success(r2)", "emit(w)"], **common)
    return Case("t4-t5", "security", "a forced tick expires an early capability",
                Config((t4, t5), "plain"), Config((t4, t5), "a6"), VIOLATION, CONSISTENT)


def t6_t7() -> Case:
    adv = Adversary("exhaustive", (2,), Alphabet(auth=((2, READ_G),), exec_known=True, max_actions=2))
    common = dict(grants=((1, READ_F), (1, READ_G), (2, READ_G)), controls=((1, "revoke:1:read:f"),),
                  adversary=adv)
    t6 = _honest("t6", "dynamic-minus", [
        "acquire(read:g, k2)", "chmod(revoke:1:read:f, z)", "acquire(read:f, k1)", "use(k1, r1)",
        "assert_failure(r1)", "use(k2, r2)", "assert_success(r2)", "emit(w)"], **common)
    t7 = _honest("t7", "dynamic-minus", [
        "chmod(revoke:1:read:f, z)", "acquire(read:f, k1)", "use(k1, r1)", "assert_failure(r1)",
        "acquire(read:g, k2)", "use(k2, r2)", "assert_success(r2)", "emit(w)"], **common)
    fixed = _pair(Config((t6, t7), "plain"), "dynamic-minus", failure_blocks=True)
    return Case("t6-t7", "security", "an observable failure reveals that a revocation took effect",
                Config((t6, t7), "plain"), fixed, VIOLATION, CONSISTENT)


T8_CONTEXT = [
    "send(c, tup())", "acquire(read:g, k0)", "use(k0, r0)", "assert_failure(r0)",
    "chmod(grant:2:read:g, p)", "acquire(read:g, k1)", "use(k1, r1)", "assert_success(r1)", "send(c, tup())",
]


def t8_t9() -> Case:
    adv = Adversary("script", (2,), script=parse_script(T8_CONTEXT))
    common = dict(controls=((1, "grant:1:read:f"), (2, "grant:2:read:g")), adversary=adv)
    t8 = _honest("t8", "dynamic-plus", [
        "acquire(read:f, k)", "use(k, r)", "recv(c, x1)", "chmod(grant:1:read:f, z)", "recv(c, x2)",
        "assert_success(r)", "emit(w)"], **common)
    t9 = _honest("t9", "dynamic-plus", ["recv(c, x1)", "recv(c, x2)", "emit(w)"], **common)
    return Case("t8-t9", "security", "a context forces time to pass while a use is in flight",
                Config((t8, t9), "plain"), Config((t8, t9), "a6"), VIOLATION, CONSISTENT)


CASES: Dict[str, Callable[[], Case]] = {
    "fake-cap-leak": fake_cap_leak,
    "cap-compare-leak": cap_compare_leak,
    "revocation": revocation,
    "grant-only": grant_only,
    "t1-t2": t1_t2,
    "t3-stale": t3,
    "t4-t5": t4_t5,
    "t6-t7": t6_t7,
    "t8-t9": t8_t9,
}


def attack_library() -> List[Case]:
    return [make() for make in CASES.values()]


def fixed_scenarios_as(variant: str = "dynamic-plus", **toggles) -> List[Scenario]:
    """Every fixed-configuration scenario of the library, moved to ``variant``."""
    out = []
    for case in attack_library():
        for sc in case.fixed.scenarios:
            out.append(replace(_variant(sc, variant, **toggles), name=f"{case.name}/{sc.name}"))
    return out
