from __future__ import annotations

import itertools
import random

import pytest
from hypothesis import given, strategies as st

from artifact.agents import (CARRIED, CooperativeAgent, CooperativeAgentSpec, DirectTape, GraphWorld,
                             SystemConfiguration, UndefinedTransition, agent_from_document,
                             agent_to_document, cooperative_from_document, cooperative_to_document,
                             detect_period, noncooperative, random_pebble_machine, restrict,
                             run_cooperative, run_pebble_machine, run_single)
from artifact.graph import generate
from artifact.reductions import random_agent
from artifact.traps import Lockstep, alternator, as_cooperative, cautious_pair, oscillator, rotor

from conftest import cubic_graphs


def random_team(seed: int, k: int, states: int) -> CooperativeAgentSpec:
    rng = random.Random(seed)
    names = [tuple(f"s{i}{j}" for j in range(states)) for i in range(k)]
    members = []
    for i in range(k):
        others = [(None,) + names[j] for j in range(k) if j != i]
        table = {}
        for s in names[i]:
            for vis in itertools.product(*others):
                for b in range(3):
                    move = None if rng.random() < 0.2 else rng.randrange(3)
                    table[(s, vis, 3, b)] = (rng.choice(names[i]), move)
        members.append(CooperativeAgent(names[i], frozenset(), names[i][0], table, f"m{i}"))
    return CooperativeAgentSpec(tuple(members))


@given(cubic_graphs(max_n=20), st.integers(0, 10 ** 6), st.integers(1, 3), st.integers(1, 3))
def test_lockstep_matches_run_cooperative(g, seed, k, s):
    spec = random_team(seed, k, s)
    starts = [seed % g.vertex_count] * k
    tr = run_cooperative(spec, g, starts, 60)
    sim = Lockstep(spec, g, starts)
    for c in tr.configurations[1:]:
        sim.step()
        assert c == SystemConfiguration(tuple(zip(sim.states, sim.positions, sim.backs)))


@given(cubic_graphs(max_n=20), st.integers(0, 10 ** 6))
def test_single_agent_equals_its_one_member_set(g, seed):
    a = random_agent(seed, max_pebbles=0)
    single = run_single(a, g, 0, 80)
    coop = run_cooperative(as_cooperative(a), g, 0, 80)
    assert single.walks[0] == coop.walks[0]
    assert [c.agents for c in single.configurations] == [c.agents for c in coop.configurations]


def test_noncooperative_members_ignore_each_other():
    g = generate("prism")
    team = noncooperative([rotor(1), alternator()])
    tr = run_cooperative(team, g, 0, 40)
    assert tr.walks[0] == run_single(rotor(1), g, 0, 40).walks[0]
    assert tr.walks[1] == run_single(alternator(), g, 0, 40).walks[0]


def test_restrict_treats_others_as_absent():
    spec = cautious_pair()
    alone = restrict(spec, [1])
    g = generate("k4")
    # alone the partner always turns by 2
    tr = run_cooperative(alone, g, 0, 10)
    assert tr.walks[0] == run_single(rotor(2), g, 0, 10).walks[0]


def test_detect_period():
    g = generate("k4")
    tr = run_single(oscillator(0), g, 0, 10)
    p = detect_period(tr)
    assert p is not None and (p.preperiod, p.period) == (0, 2)


def test_pebble_conservation_is_enforced():
    a = random_agent(3, max_pebbles=2)
    g = generate("k4")
    tr = run_single(a, g, 0, 200)
    final = tr.notes["final"]["pebbles"]
    assert set(final) == set(a.pebble_set)
    assert all(v == CARRIED or 0 <= v < 4 for v in final.values())


def test_undefined_transition_is_raised():
    spec = CooperativeAgentSpec((CooperativeAgent(("a",), frozenset(), "a", {}, "empty"),))
    with pytest.raises(UndefinedTransition):
        run_cooperative(spec, generate("k4"), 0, 1)


def test_agent_document_roundtrip():
    a = random_agent(11, max_pebbles=1)
    b = agent_from_document(agent_to_document(a))
    g = generate("prism")
    assert run_single(a, g, 0, 100).walks == run_single(b, g, 0, 100).walks


def test_cooperative_document_roundtrip():
    spec = cautious_pair()
    again = cooperative_from_document(cooperative_to_document(spec))
    g = generate("prism")
    assert run_cooperative(spec, g, 0, 30).walks == run_cooperative(again, g, 0, 30).walks


def test_pebble_machine_direct_run_terminates():
    T = random_pebble_machine(2, 8, pebbles=1, macro_steps=4)
    tr = run_pebble_machine(T, generate("prism"), 0, 10 ** 5)
    assert tr.halted and tr.steps == 4
    assert all(len(s) == 8 for s in tr.tape_snapshots)


def test_direct_tape_clamps_at_the_ends():
    tape = DirectTape(3)
    tape.write_move(1, -1)
    assert tape.clamp_events == 1 and tape.snapshot() == (1, 0, 0)


def test_graph_world_tracks_visits():
    w = GraphWorld(generate("k4"), 0, [1])
    assert w.position == 0 and w.where[1] == CARRIED
