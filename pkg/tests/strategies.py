"""Hypothesis strategies for terms."""

from hypothesis import strategies as st

from capcheck import core
from capcheck.core import INF, K_ADV, Enc, Mac, Name, Nat, Tup

NAMES = ["a", "f", "read:f", "write:f:9", "ack", "error", "x1", "1.0"]
KEYS = [core.K_REAL, core.K_FAKE, core.E_REAL, core.K_DUMMY, core.E_DUMMY, K_ADV]

atoms = st.one_of(st.integers(0, 20).map(Nat), st.sampled_from(NAMES).map(Name), st.just(INF))


def terms():
    return st.recursive(
        atoms,
        lambda inner: st.one_of(
            st.lists(inner, max_size=3).map(lambda xs: Tup(tuple(xs))),
            st.builds(Mac, inner, st.sampled_from(KEYS)),
            st.builds(Enc, st.integers(0, 5), inner, st.sampled_from(KEYS)),
        ),
        max_leaves=8,
    )


def _observed():
    F = core.AccessPolicy.of([(1, "read:f")])
    return [core.cert(F, k, "read:f", c, v) for k in (1, 2) for c in (0, 1) for v in core.CERT_VARIANTS]


def adversary_terms():
    """Terms an adversary can build: public atoms, its own key, and copies of
    capabilities it saw, but only *inside* other terms.  None of them is a
    capability under a private key at the top level."""
    seen = st.sampled_from(_observed())
    inner = st.recursive(
        st.one_of(atoms, seen),
        lambda x: st.one_of(st.lists(x, max_size=3).map(lambda xs: Tup(tuple(xs))), st.builds(Mac, x, st.just(K_ADV))),
        max_leaves=6,
    )
    tampered = seen.flatmap(lambda c: st.one_of(
        st.just(c.message),
        st.just(Mac(c.message, K_ADV)),
        inner.map(lambda t: Mac(t, K_ADV)),
        st.just(Tup((c,))),
    ))
    top = st.one_of(atoms, inner.map(lambda t: Tup((t,))), st.builds(Mac, inner, st.just(K_ADV)), tampered)
    return top
