from dataclasses import replace

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from capcheck import core, scenario
from capcheck.core import E_REAL, Enc, Nat
from capcheck.explore import explore
from capcheck.harness import (ADVERSARY, SAFETY, Event, random_schedule, read_schedule, read_trace,
                              run, safety_view, adversary_view, view_strings, write_schedule, write_trace)
from capcheck.library import attack_library
from capcheck.protocol import ScheduleError
from capcheck.scenario import Scenario
from capcheck.scripts import ScriptError, parse_script

from .oracles import brute_force_traces, small_scenarios

SMALL = small_scenarios()
PRIVATE_KEYS = [k.name for k in (core.K_REAL, core.K_FAKE, core.K_DUMMY, core.E_REAL, core.E_DUMMY)]


def _by_name(name):
    return next(sc for sc in SMALL if sc.name == name)


# -- run ---------------------------------------------------------------------------

def test_empty_schedule_empty_trace():
    sc = Scenario(name="idle", variant="dynamic-plus", store=(("f", 7),))
    assert run(sc, []).events == ()


def test_single_tick():
    sc = Scenario(name="idle", variant="dynamic-plus", store=(("f", 7),))
    tr = run(sc, ["m tick"])
    assert [(e.direction, e.clk) for e in tr.events] == [("tick", 1)]


def test_eager_request_visible_at_start():
    # The first honest request is sent before any choice is made.
    tr = run(_by_name("acquire-use"), [])
    assert [e.direction for e in tr.events] == ["in"]
    assert not tr.events[0].visible


def test_schedule_error_on_disabled_choice():
    sc = Scenario(name="idle", variant="static")
    with pytest.raises(ScheduleError):
        run(sc, ["m tick"])
    with pytest.raises(ScheduleError):
        run(sc, ["bogus"])


def test_depth_bound_stops_machine_steps():
    sc = Scenario(name="idle", variant="dynamic-plus", max_depth=2)
    with pytest.raises(ScheduleError):
        run(sc, ["m tick"] * 3)


def test_choice_ids_accepted():
    from capcheck.harness import choice_id
    sc = _by_name("spy-static")
    labels = random_schedule(sc, 6, seed=3)
    assert run(sc, [choice_id(x) for x in labels]).text() == run(sc, labels).text()


@pytest.mark.parametrize("sc", SMALL, ids=lambda s: s.name)
def test_run_deterministic(sc):
    for seed in range(5):
        labels = random_schedule(sc, 12, seed=seed)
        a, b = run(sc, labels), run(sc, labels)
        assert a.text() == b.text() and a.schedule == b.schedule


def test_random_schedule_uses_scenario_seed():
    sc = replace(_by_name("ideal-op"), seed=11)
    assert random_schedule(sc, 8) == random_schedule(sc, 8, seed=11)


# -- views ---------------------------------------------------------------------------

def test_honest_only_view_empty():
    script = parse_script(["acquire(read:f, k)", "use(k, r)", "assert_success(r)"])
    sc = Scenario(name="quiet", variant="dynamic-plus", grants=((1, "read:f"),), store=(("f", 7),),
                  scripts=((1, script),))
    for labels in (random_schedule(sc, 10, seed=s) for s in range(10)):
        assert adversary_view(run(sc, labels)) == ()


def test_encryptions_render_as_distinct_tokens():
    evs = [Event("x", "out", True, Enc(1, Nat(5), E_REAL), "send"),
           Event("x", "out", True, Enc(2, Nat(5), E_REAL), "send"),
           Event("x", "out", True, Enc(1, Nat(5), E_REAL), "send")]
    strings, _ = view_strings(evs, ADVERSARY, ())
    assert strings == ("out x enc#0", "out x enc#1", "out x enc#0")


def test_private_macs_render_by_first_appearance():
    m = core.Tup((Nat(1),))
    evs = [Event("x", "out", True, core.Mac(m, core.K_FAKE), "send"),
           Event("x", "out", True, core.Mac(m, core.K_REAL), "send")]
    strings, _ = view_strings(evs, ADVERSARY, ())
    assert strings == ("out x mac(tup(1),#0)", "out x mac(tup(1),#1)")


@pytest.mark.parametrize("sc", SMALL, ids=lambda s: s.name)
def test_no_private_key_in_views(sc):
    for mode in (ADVERSARY, SAFETY):
        for path in explore(sc, mode).trie.paths:
            text = " ".join(path)
            assert not any(k in text for k in PRIVATE_KEYS), path


def test_safety_view_adds_ticks_and_execs():
    sc = _by_name("acquire-use-d+")
    labels = ["m tick", "m serve auth 1 (read:f) 1.0"]
    tr = run(sc, labels)
    assert adversary_view(tr) == ()
    assert safety_view(tr)[0] == "tick tup(1)"


# -- explore -------------------------------------------------------------------------

def test_acquire_use_trace_counts():
    # Frozen from the brute-force enumerator.
    sc = _by_name("acquire-use")
    assert len(explore(sc, ADVERSARY).trie) == 2
    assert len(explore(sc, SAFETY).trie) == 3


@pytest.mark.parametrize("sc", SMALL, ids=lambda s: s.name)
def test_explore_matches_brute_force(sc):
    for mode in (ADVERSARY, SAFETY):
        assert set(explore(sc, mode).trie.paths) == brute_force_traces(sc, mode)


@pytest.mark.parametrize("sc", [s for s in SMALL if s.variant == "static"], ids=lambda s: s.name)
def test_static_clock_stays_zero(sc):
    for seed in range(10):
        tr = run(sc, random_schedule(sc, 15, seed=seed))
        assert all(e.clk == 0 for e in tr.events)
        assert not any(e.direction == "tick" for e in tr.events)


@pytest.mark.parametrize("sc", SMALL[:6], ids=lambda s: s.name)
def test_deepening_keeps_traces(sc):
    shallow = set(explore(sc, SAFETY).trie.paths)
    deeper = set(explore(replace(sc, max_depth=sc.max_depth + 1), SAFETY).trie.paths)
    assert shallow <= deeper


def test_parallel_explore_same_traces():
    sc = _by_name("context")
    assert explore(sc, jobs=2).traces == explore(sc).traces


def test_budget_exhaustion_flagged():
    res = explore(_by_name("ideal-op"), budget=10)
    assert not res.complete


# -- files -------------------------------------------------------------------------------

def _library_scenarios():
    return [sc for case in attack_library() for w in ("broken", "fixed") for sc in case.config(w).scenarios]


def test_scenario_yaml_round_trip():
    for sc in SMALL + _library_scenarios():
        assert scenario.loads(scenario.dumps(sc)) == sc


def test_scenario_rejects_unknown_toggle():
    d = scenario.to_dict(SMALL[0])
    d["toggles"]["bogus"] = True
    with pytest.raises(ValueError, match="accepted"):
        scenario.from_dict(d)


def test_scenario_rejects_bad_schema():
    d = scenario.to_dict(SMALL[0])
    d["schema"] = 99
    with pytest.raises(ValueError):
        scenario.from_dict(d)


def test_trace_file_round_trip(tmp_path):
    sc = _by_name("context")
    tr = run(sc, random_schedule(sc, 10, seed=4))
    write_trace(tr, tmp_path / "t.tsv")
    back = read_trace(tmp_path / "t.tsv")
    assert back.events == tr.events
    assert all(len(line.split("\t")) == 6 for line in tr.text().splitlines())


def test_schedule_file_round_trip(tmp_path):
    sc = _by_name("spy-d-")
    labels = random_schedule(sc, 8, seed=2)
    write_schedule(sc, labels, tmp_path / "s.yaml")
    sc2, labels2 = read_schedule(tmp_path / "s.yaml")
    assert sc2 == sc and labels2 == labels
    assert run(sc2, labels2).text() == run(sc, labels).text()


# -- script discipline ---------------------------------------------------------------

@pytest.mark.parametrize("lines", [
    ["acquire(read:f, k)", "send(c, k)"],
    ["acquire(read:f, k)", "assert_success(k)"],
    ["acquire(read:f, k)", "acquire(read:f, k)"],
])
def test_capability_handles_are_opaque(lines):
    with pytest.raises(ScriptError):
        Scenario(name="bad", scripts=((1, parse_script(lines)),)).validate()


# -- property: replay determinism over random scenarios ----------------------------------

@settings(max_examples=25, deadline=None)
@given(st.sampled_from(SMALL), st.integers(0, 2**16), st.integers(1, 14))
def test_replay_determinism_property(sc, seed, length):
    labels = random_schedule(sc, length, seed=seed)
    assert run(sc, labels).text() == run(sc, labels).text()
    assert len(labels) <= length
