"""Symbolic terms, access policies, stores, admin schedules and the
capability primitives shared by every file-system machine.

Terms are immutable and hashable.  Their canonical text form is a fully
parenthesised prefix notation, e.g. ``mac(tup(1,read:f,5),K_real)``, and two
terms are equal exactly when their canonical texts are equal.
"""

from __future__ import annotations

import hashlib
import hmac
import re
from dataclasses import dataclass, field
from typing import FrozenSet, Optional, Tuple, Union


# ---------------------------------------------------------------------------
# Terms

_NAME_RE = re.compile(r"^[A-Za-z_*?'][A-Za-z0-9_:.\-*?'+@]*$|^[0-9]+[.:][A-Za-z0-9_:.\-*?'+@]*$")


@dataclass(frozen=True)
class KeyId:
    name: str
    private: bool = True

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Nat:
    n: int

    def __post_init__(self):
        if not isinstance(self.n, int) or self.n < 0:
            raise ValueError(f"Nat needs a natural number, got {self.n!r}")

    def text(self) -> str:
        return str(self.n)


@dataclass(frozen=True)
class Name:
    id: str

    def __post_init__(self):
        if self.id == "inf" or not _NAME_RE.match(self.id):
            raise ValueError(f"invalid name {self.id!r}")

    def text(self) -> str:
        return self.id


@dataclass(frozen=True)
class Tup:
    items: Tuple["Term", ...]

    def text(self) -> str:
        return "tup(" + ",".join(t.text() for t in self.items) + ")"

    def __len__(self) -> int:
        return len(self.items)


@dataclass(frozen=True)
class Mac:
    message: "Term"
    key: KeyId

    def text(self) -> str:
        return f"mac({self.message.text()},{self.key.name})"


@dataclass(frozen=True)
class Enc:
    coin: int
    plaintext: "Term"
    key: KeyId

    def text(self) -> str:
        return f"enc(c{self.coin},{self.plaintext.text()},{self.key.name})"


@dataclass(frozen=True)
class Infinity:
    def text(self) -> str:
        return "inf"


Term = Union[Nat, Name, Tup, Mac, Enc, Infinity]

INF = Infinity()
ACK = Name("ack")
ERROR = Name("error")
EMPTY = Name("empty")
UNIT = Tup(())

# Well-known keys.  Private keys never leave the machines that own them.
K_REAL = KeyId("K_real")
K_FAKE = KeyId("K_fake")
E_REAL = KeyId("E_real")
K_DUMMY = KeyId("K_dummy")
E_DUMMY = KeyId("E_dummy")
K_ADV = KeyId("K_adv", private=False)

KNOWN_KEYS = {k.name: k for k in (K_REAL, K_FAKE, E_REAL, K_DUMMY, E_DUMMY, K_ADV)}


def tup(*items) -> Tup:
    return Tup(tuple(as_term(i) for i in items))


def as_term(x) -> Term:
    """Coerce plain Python values (int, str, tuple) into terms."""
    if isinstance(x, (Nat, Name, Tup, Mac, Enc, Infinity)):
        return x
    if isinstance(x, bool):
        raise TypeError("booleans are not terms")
    if isinstance(x, int):
        return Nat(x)
    if isinstance(x, str):
        return INF if x == "inf" else Name(x)
    if isinstance(x, tuple):
        return tup(*x)
    raise TypeError(f"cannot make a term from {x!r}")


def encode(t: Term) -> str:
    return t.text()


def leq(a: Term, b: Term) -> bool:
    """Order on time values: naturals by value, every natural below infinity."""
    if isinstance(b, Infinity):
        return isinstance(a, (Nat, Infinity))
    if isinstance(a, Nat) and isinstance(b, Nat):
        return a.n <= b.n
    return False


def msg(t: Term) -> Optional[Term]:
    """The only MAC equation: the message of ``mac(x, k)`` is ``x``."""
    return t.message if isinstance(t, Mac) else None


def field_at(t: Optional[Term], i: int) -> Optional[Term]:
    """1-based tuple projection, None when undefined."""
    if isinstance(t, Tup) and 1 <= i <= len(t.items):
        return t.items[i - 1]
    return None


def contains_key(t: Term, key: KeyId) -> bool:
    if isinstance(t, Mac):
        return t.key == key or contains_key(t.message, key)
    if isinstance(t, Enc):
        return t.key == key or contains_key(t.plaintext, key)
    if isinstance(t, Tup):
        return any(contains_key(x, key) for x in t.items)
    return False


class DecodeError(ValueError):
    pass


_TOKEN_RE = re.compile(r"\s*([(),]|[^(),\s]+)")


def decode(text: str, keys: Optional[dict] = None) -> Term:
    """Parse canonical text back into a term.  Unknown key names become
    adversary-known keys."""
    keys = KNOWN_KEYS if keys is None else keys
    tokens = _TOKEN_RE.findall(text)
    if "".join(tokens) != re.sub(r"\s+", "", text):
        raise DecodeError(f"bad characters in {text!r}")
    pos = 0

    def peek():
        return tokens[pos] if pos < len(tokens) else None

    def take(expected=None):
        nonlocal pos
        if pos >= len(tokens):
            raise DecodeError("unexpected end of input")
        tok = tokens[pos]
        if expected is not None and tok != expected:
            raise DecodeError(f"expected {expected!r}, got {tok!r}")
        pos += 1
        return tok

    def key_of(tok: str) -> KeyId:
        if tok in "(),":
            raise DecodeError(f"expected key, got {tok!r}")
        return keys.get(tok) or KeyId(tok, private=False)

    def term() -> Term:
        tok = take()
        if tok in ("tup", "mac", "enc") and peek() == "(":
            take("(")
            if tok == "tup":
                items = []
                if peek() != ")":
                    items.append(term())
                    while peek() == ",":
                        take(",")
                        items.append(term())
                take(")")
                return Tup(tuple(items))
            if tok == "mac":
                m = term()
                take(",")
                k = key_of(take())
                take(")")
                return Mac(m, k)
            coin = take()
            if not re.fullmatch(r"c[0-9]+", coin):
                raise DecodeError(f"bad coin {coin!r}")
            take(",")
            p = term()
            take(",")
            k = key_of(take())
            take(")")
            return Enc(int(coin[1:]), p, k)
        if tok in "(),":
            raise DecodeError(f"unexpected {tok!r}")
        if tok == "inf":
            return INF
        if tok.isdigit():
            return Nat(int(tok))
        try:
            return Name(tok)
        except ValueError as e:
            raise DecodeError(str(e)) from None

    result = term()
    if pos != len(tokens):
        raise DecodeError(f"trailing input in {text!r}")
    return result


# ---------------------------------------------------------------------------
# Operations and admin operations
#
# Operations are strings: ``read:f``, ``write:f:v``, ``opaque:f`` (executes
# but always answers like a denial), ``noop``.  Admin operations are
# ``grant:<k>:<op>`` and ``revoke:<k>:<op>``.

def is_admin(op: str) -> bool:
    return op.startswith("grant:") or op.startswith("revoke:")


def grant(k: int, op: str) -> str:
    return f"grant:{k}:{op}"


def revoke(k: int, op: str) -> str:
    return f"revoke:{k}:{op}"


def parse_admin(adm: str) -> Tuple[str, int, str]:
    kind, k, op = adm.split(":", 2)
    if kind not in ("grant", "revoke"):
        raise ValueError(f"not an admin operation: {adm!r}")
    return kind, int(k), op


def check_op(op: str) -> str:
    parts = op.split(":")
    if op == "noop" or (parts[0] in ("read", "opaque") and len(parts) == 2) or (
        parts[0] == "write" and len(parts) == 3
    ):
        Name(op)
        return op
    if is_admin(op):
        parse_admin(op)
        check_op(op.split(":", 2)[2])
        return op
    raise ValueError(f"unknown operation {op!r}")


# ---------------------------------------------------------------------------
# Policies, stores and schedules

@dataclass(frozen=True)
class AccessPolicy:
    grants: FrozenSet[Tuple[int, str]] = frozenset()
    controls: FrozenSet[Tuple[int, str]] = frozenset()

    @staticmethod
    def of(grants=(), controls=()) -> "AccessPolicy":
        return AccessPolicy(frozenset((int(k), o) for k, o in grants),
                            frozenset((int(k), a) for k, a in controls))

    def canonical(self) -> str:
        g = ",".join(f"{k}:{o}" for k, o in sorted(self.grants))
        c = ",".join(f"{k}:{a}" for k, a in sorted(self.controls))
        return f"grants[{g}] controls[{c}]"


def perm(F: AccessPolicy, k: int, op: str) -> bool:
    if is_admin(op):
        return (k, op) in F.controls
    return (k, op) in F.grants


@dataclass(frozen=True)
class Store:
    cells: Tuple[Tuple[str, Term], ...] = ()

    @staticmethod
    def of(mapping=None) -> "Store":
        mapping = mapping or {}
        return Store(tuple(sorted((f, as_term(v)) for f, v in mapping.items())))

    def get(self, f: str) -> Optional[Term]:
        for name, v in self.cells:
            if name == f:
                return v
        return None

    def set(self, f: str, v: Term) -> "Store":
        d = dict(self.cells)
        d[f] = v
        return Store(tuple(sorted(d.items())))

    def as_dict(self) -> dict:
        return dict(self.cells)


def exec_op(L: bool, op: str, rho: Store) -> Tuple[Term, Store]:
    if not L:
        return ERROR, rho
    parts = op.split(":")
    kind = parts[0]
    if kind == "read":
        v = rho.get(parts[1])
        return (EMPTY if v is None else v), rho
    if kind == "write":
        return ACK, rho.set(parts[1], as_term(int(parts[2]) if parts[2].isdigit() else parts[2]))
    if kind == "opaque":
        return ERROR, rho
    if kind == "noop":
        return ACK, rho
    raise ValueError(f"cannot execute {op!r}")


@dataclass(frozen=True)
class AdmRecord:
    adm: str
    requester: int
    clk: int

    def text(self) -> str:
        return f"{self.adm}@{self.clk}"


Schedule = Tuple[AdmRecord, ...]


def push(L: bool, adm: str, xi: Schedule, clk: int, requester: int = 0) -> Tuple[Term, Schedule]:
    if not L:
        return ERROR, xi
    return ACK, xi + (AdmRecord(adm, requester, clk),)


def sync(F: AccessPolicy, xi: Schedule, clk: int) -> AccessPolicy:
    grants = set(F.grants)
    for rec in xi:
        if rec.clk > clk:
            continue
        kind, k, op = parse_admin(rec.adm)
        if kind == "grant":
            grants.add((k, op))
        else:
            grants.discard((k, op))
    return AccessPolicy(frozenset(grants), F.controls)


def remaining(xi: Schedule, clk: int) -> Schedule:
    return tuple(r for r in xi if r.clk > clk)


def tick_record(xi: Schedule, clk: int) -> Tup:
    """``tup(new clock, applied admin ops...)`` for the tick leaving ``clk``."""
    return Tup((Nat(clk + 1),) + tuple(Name(r.adm) for r in xi if r.clk <= clk))


# ---------------------------------------------------------------------------
# Capabilities

STATIC = "static"
DYNAMIC_PLAIN = "dynamic-plain"
DYNAMIC_ENC = "dynamic-encrypted-ts"
CERT_VARIANTS = (STATIC, DYNAMIC_PLAIN, DYNAMIC_ENC)

ANON = Name("_")


def cert(F: AccessPolicy, k: int, op: str, clk: int, variant: str = DYNAMIC_PLAIN,
         coin: int = 0, user_in_cap: bool = True) -> Mac:
    if variant not in CERT_VARIANTS:
        raise ValueError(f"unknown certificate variant {variant!r}")
    key = K_REAL if perm(F, k, op) else K_FAKE
    user = Nat(k) if user_in_cap else ANON
    if variant == STATIC:
        body = Tup((user, Name(op)))
    elif variant == DYNAMIC_PLAIN:
        body = Tup((user, Name(op), Nat(clk)))
    else:
        body = Tup((user, Name(op), Enc(coin, Nat(clk), E_REAL)))
    return Mac(body, key)


def verif(kappa: Term) -> Optional[bool]:
    """True for the real key, False for the fake key, None when invalid."""
    if not isinstance(kappa, Mac):
        return None
    if kappa.key == K_REAL:
        return True
    if kappa.key == K_FAKE:
        return False
    return None


# ---------------------------------------------------------------------------
# Optional bit-level backend

@dataclass
class HmacBackend:
    """Keyed-hash MACs over canonical encodings, same decision interface as
    the symbolic ``verif``.  Not used by the checker."""

    secrets: dict = field(default_factory=lambda: {"K_real": b"real-secret", "K_fake": b"fake-secret"})

    def tag(self, message: Term, key: KeyId) -> str:
        secret = self.secrets[key.name]
        return hmac.new(secret, encode(message).encode(), hashlib.sha256).hexdigest()

    def verify(self, message: Term, tag: str) -> Optional[bool]:
        for name, decision in (("K_real", True), ("K_fake", False)):
            if hmac.compare_digest(self.tag(message, KNOWN_KEYS[name]), tag):
                return decision
        return None
