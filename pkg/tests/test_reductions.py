from __future__ import annotations

from itertools import combinations

import pytest
from hypothesis import given, strategies as st

from artifact.agents import run_single
from artifact.corpus import exhaustive_corpus
from artifact.reductions import (SIX_STATES, ReproductionWitness, StateEncoding,
                                 check_pebbles_to_agents, check_reproduction,
                                 check_states_to_pebbles, compile_states_to_pebbles,
                                 random_agent, walk_edges)

GRAPHS = [e.graph for e in exhaustive_corpus(8)]


def _embeds_bruteforce(orig, new):
    """Any order-preserving choice of positions, tried exhaustively."""
    a, b = walk_edges(orig), walk_edges(new)
    return any(all(b[j] == e for j, e in zip(pos, a)) for pos in combinations(range(len(b)), len(a)))


@given(st.lists(st.integers(0, 2), min_size=1, max_size=5),
       st.lists(st.integers(0, 2), min_size=1, max_size=8))
def test_reproduction_check_matches_exhaustive_embedding(orig, new):
    new = [orig[0]] + new
    assert isinstance(check_reproduction(orig, new), ReproductionWitness) == _embeds_bruteforce(orig, new)


@given(st.integers(1, 40), st.data())
def test_state_encoding_roundtrip(s, data):
    r = max(1, (s - 1).bit_length())
    enc = StateEncoding(tuple(range(s)), 3, r)
    q = data.draw(st.integers(0, s - 1))
    code = enc.encode(q)
    assert code <= enc.extra and enc.decode(code) == q


def test_compiled_agent_has_six_states_and_log_pebbles():
    for seed in range(20):
        a = random_agent(seed)
        c = compile_states_to_pebbles(a)
        assert tuple(c.states) == SIX_STATES
        assert c.pebbles - a.pebbles == (max(0, (len(a.states) - 1).bit_length()))


@pytest.mark.parametrize("seed", range(30))
def test_states_to_pebbles_reproduces_within_factor_three(seed):
    a = random_agent(seed)
    r = check_states_to_pebbles(a, GRAPHS[seed % len(GRAPHS)], 0, 200)
    assert r["reproduced"]
    assert r["compiled_traversals"] <= 3 * r["original_traversals"]


@pytest.mark.parametrize("seed", range(30))
def test_port_aware_compiler_keeps_stepwise_invariant(seed):
    a = random_agent(seed)
    r = check_pebbles_to_agents(a, GRAPHS[seed % len(GRAPHS)], 0, 200, port_aware=True)
    assert r["invariant"].ok and r["reproduced"] and r["ratio_ok"]


def test_literal_pebble_compiler_diverges_on_known_agent():
    # three states, two pebbles: the pebble agent guesses its return port wrongly
    a = random_agent(1)
    assert (len(a.states), a.pebbles) == (3, 2)
    r = check_pebbles_to_agents(a, GRAPHS[1], 0, 200)
    v = r["invariant"].first_violation
    assert not r["invariant"].ok and v["step"] == 7
    assert "agent 2 is not at pebble 2" in v["problems"]
    assert not r["reproduced"]


def test_literal_pebble_compiler_population_count():
    ok = sum(check_pebbles_to_agents(random_agent(i), GRAPHS[i % len(GRAPHS)], 0, 200)["invariant"].ok
             for i in range(100))
    assert ok == 85


def test_pebble_free_agent_is_its_own_compilation():
    for seed in range(200):
        a = random_agent(seed)
        if a.pebbles == 0:
            break
    r = check_pebbles_to_agents(a, GRAPHS[0], 0, 100)
    assert r["invariant"].ok and r["reproduced"]
    assert r["agent_traversals"][0] == run_single(a, GRAPHS[0], 0, 100).traversals
