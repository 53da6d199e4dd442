import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from capcheck import core
from capcheck.core import INF, Enc, KeyId, Mac, Name, Nat, Tup
from capcheck.graphdist import (FS_CUT, CompGraph, GraphError, _Lts, bar, bnd, check_cut, dec, distribute,
                                distributed_interface, enabled, explicate, explicated_interface, fs_graph,
                                graph_from_dict, graph_to_dict, hat, initial_config, load_graph,
                                plain_interface, request_universe, revise, save_graph, split_record,
                                static_fs_graph, step, timed_sources, trace_equiv_oracle)

from .strategies import adversary_terms

REQ = Tup((Nat(1), Name("read:f")))


def chain():
    """in -> f with f the successor function."""
    return CompGraph(("in", "f"), frozenset({("in", "f")}), frozenset(), (("f", "nat.succ"),))


def accumulator():
    """in -> v, v a state node adding its input to its own value, v -> out."""
    return CompGraph(("in", "v", "out"), frozenset({("in", "v"), ("v", "out")}), frozenset({"v"}),
                     (("out", "nat.succ"), ("v", "nat.add")), (("v", Nat(10)),))


# -- graphs and steps ------------------------------------------------------------

def test_step_non_state_consumes_input():
    g = chain()
    cfg = step(g, initial_config(g).with_values({"in": Nat(3)}), "f")
    assert cfg.get("f") == Nat(4) and cfg.get("in") is None


def test_step_state_node_uses_own_value_and_ticks():
    g = accumulator()
    cfg = step(g, initial_config(g).with_values({"in": Nat(5)}), "v")
    assert cfg.get("v") == Nat(15) and cfg.time("v") == 1 and cfg.get("in") is None


def test_state_input_not_consumed():
    g = accumulator()
    cfg = step(g, initial_config(g), "out")
    assert cfg.get("out") == Nat(11) and cfg.get("v") == Nat(10)
    cfg = step(g, cfg, "out")
    assert cfg.get("v") == Nat(10)


def test_missing_input_not_enabled():
    g = chain()
    assert enabled(g, initial_config(g), "f") is None
    assert enabled(g, initial_config(g).with_values({"in": Nat(1)}), "in") is None
    with pytest.raises(GraphError):
        step(g, initial_config(g), "f")


def test_undefined_function_not_enabled():
    g = chain()
    assert enabled(g, initial_config(g).with_values({"in": Name("a")}), "f") is None


@pytest.mark.parametrize("kw, msg", [
    (dict(nodes=("a", "b", "c"), edges={("a", "b"), ("a", "c")}, state=set(),
          labels=(("b", "nat.succ"), ("c", "nat.succ"))), "fans out"),
    (dict(nodes=("a", "b"), edges={("a", "b")}, state={"a"}, labels=(("b", "nat.succ"),), init=(("a", Nat(0)),)),
     "input"),
    (dict(nodes=("a", "b"), edges={("a", "b")}, state=set(), labels=()), "no function"),
    (dict(nodes=("a", "b"), edges={("a", "x")}, state=set(), labels=()), "unknown"),
    (dict(nodes=("a", "b"), edges={("a", "b")}, state={"b"}, labels=(("b", "nat.add"),)), "initial"),
    (dict(nodes=("a", "a"), edges=set(), state=set(), labels=()), "duplicate"),
    (dict(nodes=("a", "b", "c"), edges={("a", "b"), ("b", "c"), ("c", "b")}, state={"c"},
          labels=(("b", "nat.add"), ("c", "nat.succ")), init=(("c", Nat(0)),)), "cycle"),
])
def test_validation(kw, msg):
    kw["edges"] = frozenset(kw["edges"])
    kw["state"] = frozenset(kw["state"])
    with pytest.raises(GraphError, match=msg):
        CompGraph(**kw)


def test_fs_graph_structure():
    g = fs_graph()
    assert g.inputs == ("n1", "n5") and g.outputs == ("n3", "n8")
    assert g.preds("s2") == ("n1", "s4") and g.preds("n6") == ("s4", "n5")
    assert timed_sources(g, "n6") == ("s4",)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.sampled_from(["n1", "s2", "n3", "s4", "n5", "n6", "s7", "n8", "w1", "w5"]), max_size=25))
def test_times_monotone(moves):
    g = fs_graph()
    cfg = initial_config(g)
    for m in moves:
        before = dict(cfg.tau)
        if m == "w1":
            cfg = cfg.with_values({"n1": Tup((Nat(1), Name("revoke:2:read:f")))})
        elif m == "w5":
            cfg = cfg.with_values({"n5": REQ})
        else:
            cfg = enabled(g, cfg, m) or cfg
        assert all(cfg.time(v) >= t for v, t in before.items())


# -- transformations ----------------------------------------------------------------

@pytest.mark.parametrize("g, cut", [(fs_graph(), FS_CUT), (static_fs_graph(), FS_CUT)])
def test_node_count_formulas(g, cut):
    gh, gs = explicate(g), revise(g, cut)
    gd = distribute(gh, cut)
    assert len(gh.nodes) == len(g.nodes) + len(g.inputs) + len(g.outputs)
    assert len(gd.nodes) == len(gh.nodes) + 2 * len(cut)
    assert len(gs.nodes) == len(g.nodes) + len(cut)
    assert len(gh.edges) == len(g.edges) + len(g.inputs) + len(g.outputs)
    assert len(gd.edges) == len(gh.edges) + len(cut)
    assert len(gs.edges) == len(g.edges) + len(cut)


def test_explicated_node_set():
    g = fs_graph()
    assert set(explicate(g).nodes) == set(g.nodes) | {hat("n1"), hat("n3"), hat("n5"), hat("n8")}


def _fire(g, cfg, nodes):
    for v in nodes:
        cfg = step(g, cfg, v)
    return cfg


def test_explicated_check_records_input_and_clock():
    gh = explicate(fs_graph())
    cfg = _fire(gh, initial_config(gh).with_values({hat("n5"): REQ}), ["n5", "n6"])
    assert cfg.get("n6") == Tup((Tup((Nat(0), REQ)), Tup((Name("read:f"), Name("true")))))
    assert split_record(gh, "n6", cfg.get("n6").items[0]) == ((REQ,), (("s4", Nat(0)),))


def test_distributed_structure_and_capability_shape():
    gd = distribute(explicate(fs_graph()), FS_CUT)
    assert {bar("n6"), dec("n6")} <= set(gd.nodes)
    assert gd.label("n6").startswith("cap:") and gd.label(dec("n6")) == "decode:n6"
    cfg = _fire(gd, initial_config(gd).with_values({hat("n5"): REQ}), ["n5", "n6"])
    kappa = cfg.get("n6")
    assert isinstance(kappa, Mac) and kappa.key == KeyId("K[n6]")
    header, body = kappa.message.items
    assert header == Tup((Nat(0), REQ))
    assert isinstance(body, Enc) and body.key == KeyId("E[n6]")
    assert body.plaintext == Tup((Name("read:f"), Name("true")))


def _submit(gd, kappa, cfg=None):
    cfg = cfg or initial_config(gd)
    return enabled(gd, cfg.with_values({bar("n6"): kappa}), dec("n6"))


def _issue(gd, req=REQ):
    cfg = _fire(gd, initial_config(gd).with_values({hat("n5"): req}), ["n5", "n6"])
    return cfg.get("n6"), cfg.with_values({"n6": None})


def test_capability_round_trip_reaches_store():
    gd = distribute(explicate(fs_graph()), FS_CUT)
    kappa, cfg = _issue(gd)
    cfg = _submit(gd, kappa, cfg)
    cfg = _fire(gd, cfg, ["s7", "n8", hat("n8")])
    assert cfg.get(hat("n8")) == Nat(7)


def test_stale_capability_rejected_fresh_required():
    g = fs_graph()
    gd = distribute(explicate(g), FS_CUT)
    kappa, cfg = _issue(gd)
    later = step(gd, cfg, "s4")
    assert _submit(gd, kappa, later) is None
    naive = distribute(explicate(g), FS_CUT, fresh=False)
    kappa, cfg = _issue(naive)
    assert _submit(naive, kappa, step(naive, cfg, "s4")) is not None


def test_capability_from_other_key_rejected():
    gd = distribute(explicate(fs_graph()), FS_CUT)
    kappa, _ = _issue(gd)
    header, body = kappa.message.items
    assert _submit(gd, Mac(kappa.message, KeyId("K[n5]"))) is None
    assert _submit(gd, Mac(Tup((header, Enc(body.coin, body.plaintext, KeyId("E[x]")))), kappa.key)) is None


@settings(max_examples=300, deadline=None)
@given(adversary_terms())
def test_tampered_capabilities_have_no_effect(t):
    gd = distribute(explicate(fs_graph()), FS_CUT)
    assert _submit(gd, t) is None


@settings(max_examples=200, deadline=None)
@given(st.sampled_from([REQ, Tup((Nat(2), Name("write:f:9")))]), st.integers(0, 3),
       st.sampled_from(["header", "body", "key", "wrap"]), st.integers(0, 9))
def test_modified_real_capabilities_rejected(req, clk, part, n):
    gd = distribute(explicate(fs_graph()), FS_CUT)
    kappa, _ = _issue(gd, req)
    header, body = kappa.message.items
    if part == "header":
        forged = Mac(Tup((Tup((Nat(clk + 1), req)), body)), core.K_ADV)
    elif part == "body":
        forged = Mac(Tup((header, Enc(n, Tup((Name("read:f"), Name("true"))), KeyId("E[n6]")))), core.K_ADV)
    elif part == "key":
        forged = Mac(kappa.message, core.K_REAL)
    else:
        forged = Tup((kappa, Nat(n)))
    assert _submit(gd, forged) is None


def test_revised_bound_guard():
    g = fs_graph()
    gs = revise(g, FS_CUT)
    assert gs.nodes[-1] == bnd("n6") and (bnd("n6"), "n6") in gs.edges
    cfg = _fire(gs, initial_config(gs), ["s4", "s4"])
    assert cfg.time("s4") == 2
    assert enabled(gs, cfg.with_values({"n5": REQ, bnd("n6"): Nat(1)}), "n6") is None
    assert enabled(gs, cfg.with_values({"n5": REQ, bnd("n6"): Nat(2)}), "n6") is not None
    assert enabled(gs, cfg.with_values({"n5": REQ, bnd("n6"): INF}), "n6") is not None


@settings(max_examples=80, deadline=None)
@given(st.lists(st.one_of(
    st.sampled_from(["n1", "s2", "n3", "s4", "n5", "n6", "s7", "n8"]),
    st.tuples(st.just("op"), st.sampled_from(request_universe())),
    st.tuples(st.just("adm"), st.sampled_from([Tup((Nat(1), Name("revoke:2:read:f"))),
                                                Tup((Nat(2), Name("grant:2:write:f:9")))])),
), max_size=30))
def test_infinite_bounds_match_original(moves):
    g = fs_graph()
    gs = revise(g, FS_CUT)
    a, b = initial_config(g), initial_config(gs)
    for m in moves:
        if isinstance(m, tuple):
            node = "n5" if m[0] == "op" else "n1"
            if a.get(node) is None:
                a = a.with_values({node: m[1]})
                b = b.with_values({node: m[1], **({bnd("n6"): INF} if node == "n5" else {})})
            continue
        na, nb = enabled(g, a, m), enabled(gs, b, m)
        assert (na is None) == (nb is None)
        if na is not None:
            a, b = na, nb
        assert a.sigma == tuple(x for x in b.sigma if x[0] != bnd("n6")) and a.tau == b.tau


def test_cut_validation():
    g = fs_graph()
    with pytest.raises(GraphError):
        check_cut(g, [("n5", "n6")])     # leaves an input
    with pytest.raises(GraphError):
        check_cut(g, [("s4", "n6")])     # leaves a state node
    with pytest.raises(GraphError):
        check_cut(g, [("n6", "n8")])     # not an edge


# -- explication oracle on a chain --------------------------------------------------------

def test_explicated_chain_agrees_on_every_input():
    g = chain()
    gh = explicate(g)
    universe = [Nat(0), Nat(5), Name("a")]
    for t in universe:
        out = enabled(g, initial_config(g).with_values({"in": t}), "f")
        cfg = initial_config(gh).with_values({hat("in"): t})
        for v in ("in", "f", hat("f")):
            cfg = enabled(gh, cfg, v) if cfg is not None else None
        assert (out is None) == (cfg is None)
        if out is not None:
            assert cfg.get(hat("f")) == out.get("f")


def test_explicated_chain_trace_equal():
    g = chain()
    gh = explicate(g)
    universe = (Nat(0), Nat(5), Nat(9))
    res = trace_equiv_oracle(plain_interface(g, universe, request_node="in"),
                             explicated_interface(gh, g, universe, request_node="in"), depth=8)
    assert res.equal is True


def test_explication_differs_for_partial_functions():
    # An input the function rejects stays stuck in the original graph, while
    # the explicated input wrapper still absorbs it and frees the slot.
    g = chain()
    universe = (Nat(0), Name("a"))
    res = trace_equiv_oracle(plain_interface(g, universe, request_node="in"),
                             explicated_interface(explicate(g), g, universe, request_node="in"), depth=4)
    assert res.equal is False and res.counterexample == ("op a", "op 0") and res.only_in == "second"


def test_static_explication_trace_equal():
    g = static_fs_graph()
    req = request_universe()
    res = trace_equiv_oracle(plain_interface(g, req), explicated_interface(explicate(g), g, req), depth=12)
    assert res.equal is True


def test_oracle_finds_difference_between_policies():
    req = request_universe()
    a, b = static_fs_graph(), static_fs_graph(grants=((1, "read:f"),))
    res = trace_equiv_oracle(plain_interface(a, req), plain_interface(b, req), depth=6)
    assert res.equal is False and res.only_in in ("first", "second")
    assert res.counterexample[-1].startswith("out n8")
    assert res.moves


def test_oracle_budget_inconclusive():
    g = fs_graph()
    req = request_universe()
    res = trace_equiv_oracle(plain_interface(g, req), plain_interface(g, req), depth=12, budget=20)
    assert res.equal is None


def test_encryption_keys_never_readable():
    g = fs_graph()
    gd = distribute(explicate(g), FS_CUT)
    itf = distributed_interface(gd, g, FS_CUT, request_universe(), op_budget=1, max_time=1)
    lts = _Lts(itf, 10**5)
    todo, seen = [lts.root], set()
    for _ in range(6):
        nxt = []
        for macro in todo:
            for label, m2 in lts.after(macro).items():
                assert "E[n6]" not in label or label.startswith("op ")
                assert "enc(" not in label
                if m2 not in seen:
                    seen.add(m2)
                    nxt.append(m2)
        todo = nxt


# -- files ------------------------------------------------------------------------------------

@pytest.mark.parametrize("make", [
    fs_graph, static_fs_graph,
    lambda: explicate(fs_graph()),
    lambda: distribute(explicate(fs_graph()), FS_CUT),
    lambda: revise(fs_graph(), FS_CUT),
    accumulator,
])
def test_graph_file_round_trip(make, tmp_path):
    g = make()
    save_graph(g, tmp_path / "g.yaml", FS_CUT)
    g2, cut = load_graph(tmp_path / "g.yaml")
    assert g2 == g and cut == FS_CUT


def test_graph_markers_checked():
    d = graph_to_dict(chain())
    d["nodes"][0]["marks"] = []
    with pytest.raises(GraphError, match="markers"):
        graph_from_dict(d)
