"""Scenario description and its YAML file format."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Dict, Optional, Tuple

import yaml

from . import core
from .nas_fs import NAFS_VARIANTS, TOGGLE_NAMES, Toggles
from .scripts import Script, parse_script, script_text, validate
from .spec_fs import TFS_VARIANTS

SCHEMA_VERSION = 1
LEVELS = ("nafs", "tfs")
WRAPPERS = ("phi", "psi")


@dataclass(frozen=True)
class Alphabet:
    """Actions offered to the exhaustive adversary.  ``auth`` and ``op`` hold
    ``(principal, op)`` pairs, ``adm`` holds ``(principal, admin op)`` pairs,
    ``clk`` the principals allowed to ask for the time."""

    auth: Tuple[Tuple[int, str], ...] = ()
    exec_known: bool = False
    forge: bool = False
    adm: Tuple[Tuple[int, str], ...] = ()
    clk: Tuple[int, ...] = ()
    op: Tuple[Tuple[int, str], ...] = ()
    sends: Tuple[Tuple[str, str], ...] = ()
    max_actions: int = 2


@dataclass(frozen=True)
class Adversary:
    kind: str = "none"          # none | exhaustive | script
    principals: Tuple[int, ...] = ()
    alphabet: Alphabet = Alphabet()
    script: Script = ()

    def __post_init__(self):
        if self.kind not in ("none", "exhaustive", "script"):
            raise ValueError(f"unknown adversary kind {self.kind!r}")
        if self.kind == "script" and len(self.principals) != 1:
            raise ValueError("a scripted adversary acts as exactly one principal")


@dataclass(frozen=True)
class Scenario:
    name: str = "scenario"
    level: str = "nafs"
    variant: str = "dynamic-plus"
    toggles: Toggles = Toggles()
    # Ideal-machine options.
    expired_reply: bool = False
    failure_blocks: bool = False
    clock_requests: Optional[bool] = None
    wrappers: Tuple[str, ...] = ()  # outermost first
    honest: Tuple[int, ...] = (1,)
    grants: Tuple[Tuple[int, str], ...] = ()
    controls: Tuple[Tuple[int, str], ...] = ()
    store: Tuple[Tuple[str, object], ...] = ()
    scripts: Tuple[Tuple[int, Script], ...] = ()
    adversary: Adversary = Adversary()
    max_depth: int = 8
    seed: int = 0
    budget: int = 10**6

    def __post_init__(self):
        # Store values are kept as terms so the YAML form round-trips exactly.
        object.__setattr__(self, "store", core.Store.of(dict(self.store)).cells)
        if self.level not in LEVELS:
            raise ValueError(f"unknown level {self.level!r}; expected one of {LEVELS}")
        allowed = NAFS_VARIANTS if self.level == "nafs" else TFS_VARIANTS
        if self.variant not in allowed:
            raise ValueError(f"unknown variant {self.variant!r}; expected one of {allowed}")
        for w in self.wrappers:
            if w not in WRAPPERS:
                raise ValueError(f"unknown wrapper {w!r}; expected one of {WRAPPERS}")
        clash = set(self.honest) & set(self.adversary.principals)
        if clash:
            raise ValueError(f"principals {sorted(clash)} are both honest and dishonest")
        for k, _ in self.scripts:
            if k not in self.honest:
                raise ValueError(f"script given for principal {k}, which is not honest")

    @property
    def iface(self) -> str:
        """Interface presented to scripts and the adversary."""
        level = self.level
        for w in reversed(self.wrappers):
            level = "nafs" if w == "phi" else "tfs"
        return level

    @property
    def dishonest(self) -> Tuple[int, ...]:
        return tuple(self.adversary.principals)

    def policy(self) -> core.AccessPolicy:
        return core.AccessPolicy.of(self.grants, self.controls)

    def initial_store(self) -> core.Store:
        return core.Store.of(dict(self.store))

    def script_of(self, k: int) -> Script:
        return dict(self.scripts).get(k, ())

    def validate(self) -> None:
        for _, s in self.scripts:
            validate(s, self.iface)

    def with_toggles(self, **kw) -> "Scenario":
        return replace(self, toggles=replace(self.toggles, **kw))


# ---------------------------------------------------------------------------
# YAML form

def _pairs(items) -> Tuple[Tuple[int, str], ...]:
    return tuple((int(k), str(v)) for k, v in items or ())


def alphabet_to_dict(a: Alphabet) -> dict:
    return {
        "auth": [list(p) for p in a.auth], "exec_known": a.exec_known, "forge": a.forge,
        "adm": [list(p) for p in a.adm], "clk": list(a.clk), "op": [list(p) for p in a.op],
        "sends": [list(p) for p in a.sends], "max_actions": a.max_actions,
    }


def alphabet_from_dict(d: dict) -> Alphabet:
    d = d or {}
    return Alphabet(
        auth=_pairs(d.get("auth")), exec_known=bool(d.get("exec_known", False)),
        forge=bool(d.get("forge", False)), adm=_pairs(d.get("adm")),
        clk=tuple(int(k) for k in d.get("clk") or ()), op=_pairs(d.get("op")),
        sends=tuple((str(c), str(t)) for c, t in d.get("sends") or ()),
        max_actions=int(d.get("max_actions", 2)),
    )


def to_dict(sc: Scenario) -> dict:
    adv = sc.adversary
    return {
        "schema": SCHEMA_VERSION,
        "name": sc.name,
        "level": sc.level,
        "variant": sc.variant,
        "toggles": {n: getattr(sc.toggles, n) for n in TOGGLE_NAMES},
        "ideal": {"expired_reply": sc.expired_reply, "failure_blocks": sc.failure_blocks,
                  "clock_requests": sc.clock_requests},
        "wrappers": list(sc.wrappers),
        "honest": list(sc.honest),
        "grants": [list(p) for p in sc.grants],
        "controls": [list(p) for p in sc.controls],
        "store": {f: core.as_term(v).text() for f, v in sc.store},
        "scripts": {int(k): script_text(s) for k, s in sc.scripts},
        "adversary": {
            "kind": adv.kind, "principals": list(adv.principals),
            "alphabet": alphabet_to_dict(adv.alphabet), "script": script_text(adv.script),
        },
        "max_depth": sc.max_depth,
        "seed": sc.seed,
        "budget": sc.budget,
    }


def from_dict(d: dict) -> Scenario:
    if not isinstance(d, dict):
        raise ValueError("scenario file must hold a mapping")
    version = d.get("schema")
    if version != SCHEMA_VERSION:
        raise ValueError(f"unsupported scenario schema {version!r}; expected {SCHEMA_VERSION}")
    toggles = dict(d.get("toggles") or {})
    unknown = set(toggles) - set(TOGGLE_NAMES)
    if unknown:
        raise ValueError(f"unknown toggles {sorted(unknown)}; accepted: {list(TOGGLE_NAMES)}")
    ideal = d.get("ideal") or {}
    adv = d.get("adversary") or {}
    store = {f: core.decode(str(v)) for f, v in (d.get("store") or {}).items()}
    return Scenario(
        name=str(d.get("name", "scenario")),
        level=str(d.get("level", "nafs")),
        variant=str(d.get("variant", "dynamic-plus")),
        toggles=Toggles(**toggles),
        expired_reply=bool(ideal.get("expired_reply", False)),
        failure_blocks=bool(ideal.get("failure_blocks", False)),
        clock_requests=ideal.get("clock_requests"),
        wrappers=tuple(d.get("wrappers") or ()),
        honest=tuple(int(k) for k in d.get("honest") or ()),
        grants=_pairs(d.get("grants")),
        controls=_pairs(d.get("controls")),
        store=tuple(sorted(store.items())),
        scripts=tuple(sorted((int(k), parse_script(v)) for k, v in (d.get("scripts") or {}).items())),
        adversary=Adversary(
            kind=str(adv.get("kind", "none")),
            principals=tuple(int(k) for k in adv.get("principals") or ()),
            alphabet=alphabet_from_dict(adv.get("alphabet")),
            script=parse_script(adv.get("script") or ()),
        ),
        max_depth=int(d.get("max_depth", 8)),
        seed=int(d.get("seed", 0)),
        budget=int(d.get("budget", 10**6)),
    )


def dumps(sc: Scenario) -> str:
    return yaml.safe_dump(to_dict(sc), sort_keys=False)


def loads(text: str) -> Scenario:
    return from_dict(yaml.safe_load(text))


def save(sc: Scenario, path) -> None:
    with open(path, "w") as fh:
        fh.write(dumps(sc))


def load(path) -> Scenario:
    with open(path) as fh:
        return loads(fh.read())
