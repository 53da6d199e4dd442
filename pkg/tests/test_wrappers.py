from dataclasses import replace

import pytest

from capcheck.core import E_DUMMY, INF, K_DUMMY, K_REAL, AccessPolicy, Enc, Mac, Name, Nat, Store, Tup
from capcheck.explore import explore, included_in
from capcheck.harness import ADVERSARY
from capcheck.nas_fs import NafsConfig, NafsMachine, Toggles
from capcheck.protocol import ADM, AUTH, CLK, EXEC, OP, Request
from capcheck.scenario import Adversary, Alphabet, Scenario
from capcheck.spec_fs import TfsMachine, tfs_config
from capcheck.wrappers import PhiMachine, PsiMachine

R = "read:f"
STORE = Store.of({"f": 7})


def _drain(m, s):
    """Serve every pending choice in label order; collect all outputs."""
    outs = []
    while True:
        labels = [c for c in m.choices(s) if c != "tick" and not c.endswith("tick")]
        if not labels:
            return s, outs
        s, o = m.step(s, labels[0])
        outs += o


def _replies(outs):
    return [o.payload for o in outs if o.kind == "reply"]


def phi(stamp="plain", clk=0, grants=((2, R),)):
    inner = TfsMachine(tfs_config("dynamic-plus"), AccessPolicy.of(grants), STORE)
    m = PhiMachine(inner, frozenset({2}), stamp)
    s = m.initial()
    return m, replace(s, inner=replace(s.inner, clk=clk))


def psi(clk=0, grants=((2, R),), variant="dynamic-plus"):
    inner = NafsMachine(NafsConfig(variant, Toggles()), AccessPolicy.of(grants), STORE)
    m = PsiMachine(inner, frozenset({2}))
    s = m.initial()
    return m, replace(s, inner=replace(s.inner, clk=clk))


# -- phi ------------------------------------------------------------------------

def test_phi_dummy_capability_carries_inner_clock():
    m, s = phi(clk=4)
    s, outs = _drain(m, m.receive(s, Request(AUTH, 2, (Name(R),), "c")))
    assert _replies(outs) == [Mac(Tup((Nat(2), Name(R), Nat(4))), K_DUMMY)]


def test_phi_exec_becomes_bounded_op():
    m, _ = phi()
    req = m.translate_exec(Request(EXEC, 2, (Mac(Tup((Nat(2), Name(R), Nat(4))), K_DUMMY),), "c"))
    assert req == Request(OP, 2, (Name(R), Nat(4)), "c")


@pytest.mark.parametrize("kappa", [
    Nat(0),
    Mac(Tup((Nat(2), Name(R), Nat(4))), K_REAL),
    Mac(Tup((Nat(2), Name(R))), K_DUMMY),
    Mac(Nat(1), K_DUMMY),
])
def test_phi_exec_undecodable_dropped(kappa):
    m, s = phi()
    assert m.translate_exec(Request(EXEC, 2, (kappa,), "c")) is None
    assert m.receive(s, Request(EXEC, 2, (kappa,), "c")) == s


def test_phi_static_caps_unbounded():
    m, _ = phi(stamp="none")
    req = m.translate_exec(Request(EXEC, 2, (Mac(Tup((Nat(2), Name(R))), K_DUMMY),), "c"))
    assert req.args == (Name(R), INF)


def test_phi_encrypted_stamp_fresh_coins():
    m, s = phi(stamp="encrypted", clk=1)
    s = m.receive(s, Request(AUTH, 2, (Name(R),), "c1"))
    s = m.receive(s, Request(AUTH, 2, (Name(R),), "c2"))
    _, outs = _drain(m, s)
    a, b = _replies(outs)
    assert a != b
    for cap in (a, b):
        ts = cap.message.items[2]
        assert isinstance(ts, Enc) and ts.key == E_DUMMY and ts.plaintext == Nat(1)


def test_phi_run_of_dummy_cap_reaches_store():
    m, s = phi(clk=0)
    s, outs = _drain(m, m.receive(s, Request(AUTH, 2, (Name(R),), "c")))
    s, outs = _drain(m, m.receive(s, Request(EXEC, 2, (_replies(outs)[0],), "r")))
    assert _replies(outs) == [Nat(7)]


def test_phi_honest_traffic_passes_through():
    m, s = phi()
    req = Request(OP, 1, (Name(R), INF), "c")
    assert m.receive(s, req).inner == m.inner.receive(s.inner, req)


def test_phi_rejects_wrong_inner_interface():
    inner = NafsMachine(NafsConfig("static", Toggles()), AccessPolicy.of(), STORE)
    with pytest.raises(ValueError):
        PhiMachine(inner, frozenset({2}))


# -- psi ------------------------------------------------------------------------

def test_psi_clock_reply():
    m, s = psi(clk=2)
    _, outs = _drain(m, m.receive(s, Request(CLK, 2, (), "c")))
    assert _replies(outs) == [Nat(2)]


def test_psi_op_dropped_past_bound():
    m, s = psi(clk=2)
    _, outs = _drain(m, m.receive(s, Request(OP, 2, (Name(R), Nat(1)), "c")))
    assert _replies(outs) == []


def test_psi_op_within_and_unbounded():
    for bound in (Nat(2), INF):
        m, s = psi(clk=2)
        _, outs = _drain(m, m.receive(s, Request(OP, 2, (Name(R), bound), "c")))
        assert _replies(outs) == [Nat(7)]


def test_psi_acquires_fresh_capability_each_time():
    m, s = psi()
    s = m.receive(s, Request(OP, 2, (Name(R), INF), "c1"))
    s = m.receive(s, Request(OP, 2, (Name(R), INF), "c2"))
    auths = [r for r in s.inner.pending if r.kind == AUTH]
    assert len(auths) == 2 and len(s.conts) == 2


def test_psi_admin_forwarded_verbatim():
    m, s = psi()
    req = Request(ADM, 2, (Name("grant:2:read:f"),), "c")
    assert m.receive(s, req).inner.pending == (req,)


# -- round trips -------------------------------------------------------------------

def _adv(level):
    if level == "nafs":
        return Adversary("exhaustive", (2,), Alphabet(auth=((2, R),), exec_known=True, max_actions=2))
    return Adversary("exhaustive", (2,), Alphabet(op=((2, R),), clk=(2,), max_actions=2))


@pytest.mark.parametrize("variant", ["static", "dynamic-plus", "dynamic-minus"])
def test_round_trip_over_networked(variant):
    base = Scenario(name="rt", variant=variant, grants=((2, R),), store=(("f", 7),),
                    adversary=_adv("nafs"), max_depth=4)
    a = explore(replace(base, wrappers=("phi", "psi")))
    inc = included_in(a, base, ADVERSARY, 6)
    assert a.complete and inc.complete and inc.included, inc.unmatched[:1]


@pytest.mark.parametrize("variant", ["dynamic-plus", "dynamic-minus"])
def test_round_trip_over_ideal(variant):
    base = Scenario(name="rt", level="tfs", variant=variant, grants=((2, R),), store=(("f", 7),),
                    adversary=_adv("tfs"), max_depth=4)
    a = explore(replace(base, wrappers=("psi", "phi")))
    inc = included_in(a, base, ADVERSARY, 6)
    assert len(a.trie) > 1
    assert a.complete and inc.complete and inc.included, inc.unmatched[:1]
