import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from capcheck import core
from capcheck.core import (ACK, ERROR, INF, K_ADV, K_FAKE, K_REAL, AccessPolicy, AdmRecord, Enc, KeyId, Mac,
                           Name, Nat, Store, Tup, cert, decode, encode, exec_op, perm, push, sync, verif)

from .strategies import adversary_terms, terms

R, W = "read:f", "write:f:9"


def test_perm_membership():
    assert perm(AccessPolicy.of([(1, R)]), 1, R)
    for k, op in itertools.product((1, 2), (R, W)):
        assert not perm(AccessPolicy.of(), k, op)


def test_perm_after_push_and_sync():
    F = AccessPolicy.of(controls=[(1, core.grant(2, R))])
    _, xi = push(perm(F, 1, core.grant(2, R)), core.grant(2, R), (), 0, 1)
    assert perm(sync(F, xi, 0), 2, R)


def test_exec_examples():
    assert exec_op(True, "write:f:7", Store.of()) == (ACK, Store.of({"f": 7}))
    assert exec_op(True, "read:f", Store.of({"f": 7})) == (Nat(7), Store.of({"f": 7}))
    assert exec_op(False, "write:f:9", Store.of({"f": 7})) == (ERROR, Store.of({"f": 7}))


def test_push_examples():
    g = core.grant(2, R)
    assert push(True, g, (), 0) == (ACK, (AdmRecord(g, 0, 0),))
    xi = (AdmRecord(g, 0, 0),)
    assert push(False, core.revoke(1, R), xi, 3) == (ERROR, xi)
    res, xi2 = push(True, core.revoke(1, R), xi, 1)
    assert res == ACK and [r.adm for r in xi2] == [g, core.revoke(1, R)]


def test_sync_examples():
    assert sync(AccessPolicy.of(), (AdmRecord(core.grant(2, R), 0, 0),), 0).grants == {(2, R)}
    assert sync(AccessPolicy.of([(1, R)]), (AdmRecord(core.revoke(1, R), 0, 2),), 2).grants == frozenset()
    F = AccessPolicy.of([(1, R)])
    assert sync(F, (), 5) == F


def test_sync_ignores_future_records():
    F = AccessPolicy.of([(1, R)])
    assert sync(F, (AdmRecord(core.revoke(1, R), 0, 3),), 2) == F


def test_cert_examples():
    F = AccessPolicy.of([(1, R)])
    assert cert(F, 1, R, 5) == Mac(Tup((Nat(1), Name(R), Nat(5))), K_REAL)
    assert cert(F, 2, R, 5) == Mac(Tup((Nat(2), Name(R), Nat(5))), K_FAKE)
    assert cert(F, 1, R, 5) != cert(F, 2, R, 5)


def test_verif_matches_perm_over_all_small_policies():
    # Oracle: every policy over 2 users x 2 ops (16 of them).
    universe = [(k, op) for k in (1, 2) for op in (R, W)]
    for bits in range(16):
        F = AccessPolicy.of([universe[i] for i in range(4) if bits >> i & 1])
        for (k, op), clk, variant in itertools.product(universe, (0, 1), core.CERT_VARIANTS):
            assert verif(cert(F, k, op, clk, variant)) == perm(F, k, op)


def test_verif_rejects_wrong_key_and_non_mac():
    assert verif(Mac(Tup((Nat(1), Name(R), Nat(5))), K_ADV)) is None
    assert verif(Nat(3)) is None


def test_capabilities_distinct_per_user():
    for bits in range(4):
        F = AccessPolicy.of([(k, R) for k in (1, 2) if bits >> (k - 1) & 1])
        for variant in core.CERT_VARIANTS:
            assert cert(F, 1, R, 0, variant) != cert(F, 2, R, 0, variant)


def test_enc_equality_needs_coin_plaintext_key():
    a = Enc(1, Nat(5), core.E_REAL)
    assert a == Enc(1, Nat(5), core.E_REAL)
    assert a != Enc(2, Nat(5), core.E_REAL)
    assert a != Enc(1, Nat(6), core.E_REAL)


def test_msg_and_fields():
    m = Tup((Nat(1), Name(R), Nat(4)))
    assert core.msg(Mac(m, K_REAL)) == m
    assert core.field_at(m, 3) == Nat(4)
    assert core.field_at(m, 4) is None


@pytest.mark.parametrize("bad", ["tup(", "mac(1)", "tup(1,,2)", "enc(c1,2)", "", "tup(1))"])
def test_decode_errors(bad):
    with pytest.raises(core.DecodeError):
        decode(bad)


def test_leq_with_infinity():
    assert core.leq(Nat(3), INF) and core.leq(Nat(3), Nat(3)) and not core.leq(Nat(4), Nat(3))
    assert not core.leq(INF, Nat(10**6))


def test_hmac_backend_agrees_with_symbolic_verif():
    b = core.HmacBackend()
    m = Tup((Nat(1), Name(R), Nat(0)))
    assert b.verify(m, b.tag(m, K_REAL)) is True
    assert b.verify(m, b.tag(m, K_FAKE)) is False
    assert b.verify(m, "00") is None


# -- properties -------------------------------------------------------------

@given(terms())
def test_encode_decode_roundtrip(t):
    assert decode(encode(t)) == t


@given(terms(), terms())
def test_equality_is_encoding_equality(a, b):
    assert (a == b) == (encode(a) == encode(b))


@settings(max_examples=300)
@given(adversary_terms())
def test_adversary_terms_never_verify(t):
    assert verif(t) is None


policies = st.frozensets(st.tuples(st.sampled_from((1, 2)), st.sampled_from((R, W))))
adm_ops = st.sampled_from([core.grant(k, op) for k in (1, 2) for op in (R, W)]
                          + [core.revoke(k, op) for k in (1, 2) for op in (R, W)])
schedules = st.lists(st.tuples(adm_ops, st.integers(0, 3)), max_size=5).map(
    lambda xs: tuple(AdmRecord(a, 1, c) for a, c in sorted(xs, key=lambda x: x[1])))


@given(policies, schedules, st.integers(0, 4))
def test_sync_idempotent(grants, xi, clk):
    F = AccessPolicy(grants)
    once = sync(F, xi, clk)
    assert sync(once, xi, clk) == once
    assert sync(once, core.remaining(xi, clk), clk) == once
