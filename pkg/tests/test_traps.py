from __future__ import annotations

from itertools import product

import pytest
from hypothesis import given

from artifact.agents import noncooperative, run_cooperative
from artifact.corpus import exhaustive_corpus
from artifact.graph import Edge, PortLabeledGraph, generate
from artifact.traps import (Lockstep, NoncooperativeTrap, alternator, as_cooperative, assemble_1barrier,
                            build_1barrier, build_gadget_graph, build_rbarrier, build_trap,
                            cautious_pair, certify_noncooperative_trap, chain_length,
                            gadget_vertex_count, macro_trace, min_barriers_crossed,
                            oscillator, rotor, shortest_label_paths, trap_candidates,
                            trap_structure_audit, verify_barrier, verify_trap)
from conftest import general_graphs

K1_AGENTS = {"oscillator": oscillator(0), "rotor1": rotor(1), "rotor2": rotor(2), "alternator": alternator()}


def _least_paths_bruteforce(g, ref):
    """Enumerate label words by length, then lexicographically; first hit wins."""
    rot = g.rotation
    best = {ref: ()}
    for length in range(1, g.vertex_count):
        for word in product(range(max(g.degrees)), repeat=length):
            x = ref
            for p in word:
                if p >= len(rot[x]):
                    break
                x = rot[x][p][0]
            else:
                best.setdefault(x, word)
        if len(best) == g.vertex_count:
            break
    return best


@given(general_graphs(max_n=7))
def test_shortest_label_paths_are_least_words(g):
    assert shortest_label_paths(g, 0, range(g.vertex_count)) == _least_paths_bruteforce(g, 0)


@pytest.mark.parametrize("seed", range(5))
def test_lockstep_matches_cooperative_runner(seed):
    spec = as_cooperative(noncooperative([rotor(1), oscillator(seed % 3), alternator()]))
    g = exhaustive_corpus(8)[seed].graph
    trace = run_cooperative(spec, g, 0, 60)
    sim = Lockstep(spec, g, [0] * spec.k)
    for cfg in trace.configurations:
        assert cfg.agents == tuple(zip(sim.states, sim.positions, sim.backs))
        sim.step()


def test_oscillator_on_k4_is_trapped():
    ev = verify_trap(generate("k4"), [oscillator(0)], 0)
    assert ev.verdict == "trapped" and ev.reconfirmed
    assert ev.unvisited == (2, 3) and ev.period == 2


def test_two_vertex_graph_is_explored():
    g = PortLabeledGraph(2, (Edge(0, 1, 0, 0),))
    assert verify_trap(g, [oscillator(0)], 0).verdict == "explored"


@pytest.mark.parametrize("name", sorted(K1_AGENTS))
def test_single_agent_traps(name):
    trap = build_trap([K1_AGENTS[name]], verify_barriers=True)
    b = trap.barrier
    assert b.n == 2 * b.structure["h_vertices"] + 8
    assert b.evidence["verdict"] == "verified"
    audit = trap_structure_audit(trap)
    assert audit["vertices"] == audit["expected"] == 2 * b.n + 4
    assert audit["block_labels"] == [1, 2, 2, 1] and audit["bridge_labels"] == [0, 0, 0, 0]
    assert trap.graph.is_3regular()
    ev = verify_trap(trap.graph, [K1_AGENTS[name]], trap.start)
    assert ev.verdict == "trapped" and ev.reconfirmed and ev.unvisited


def test_found_trap_survives_recertification():
    nt = build_1barrier([rotor(1)], verify=False)
    s = nt.structure
    h = next(h for name, h in trap_candidates() if name == s["search"]["source"])
    assert certify_noncooperative_trap([rotor(1)], h, tuple(s["enter_edge"]), tuple(s["unused_edge"]))


def test_verifier_catches_a_barrier_built_on_a_used_edge():
    # on K4 the alternator crosses edge {0,2}; a barrier that pretends otherwise must fail
    name, h = next(iter(trap_candidates()))
    assert name == "cubic-n4-c0-l0"
    bogus = assemble_1barrier(NoncooperativeTrap(h, (0, 1), (0, 2), 1))
    ev = verify_barrier(bogus, [alternator()], 1)
    assert ev.verdict == "counterexample"
    assert ev.counterexample["outcome"] == "crossed"


def test_two_agent_barrier_counts():
    spec = cautious_pair()
    b = build_rbarrier(spec, 2, verify=True)
    s = b.structure
    assert s["chain"] == chain_length(2, 2) == 1
    assert b.n == s["expected_vertices"] == 1680
    assert s["min_barriers_crossed"] >= 3
    assert b.evidence["verdict"] == "verified"
    trap = build_trap(spec)
    assert verify_trap(trap.graph, spec, trap.start).verdict == "trapped"


@pytest.mark.parametrize("idx", range(len(exhaustive_corpus(8))))
def test_gadget_graph_sizes(idx):
    base = exhaustive_corpus(8)[idx].graph
    b = build_1barrier([rotor(1)], verify=False)
    gg = build_gadget_graph(base, b)
    assert gg.graph.vertex_count == gadget_vertex_count(base.vertex_count, b.n)
    assert gg.graph.is_3regular()
    assert min_barriers_crossed(gg, [0], [base.neighbor(0, 0)[0]]) == 1
    assert min_barriers_crossed(gg, [0], [0]) == 0


def test_macro_trace_is_local():
    b = build_1barrier([rotor(1)], verify=False)
    gg = build_gadget_graph(generate("k4"), b)
    tr = macro_trace(as_cooperative([rotor(1)]), gg, budget=50_000)
    assert tr.locality_violations == 0
    assert len(tr.labels) == len(tr.macro_vertices) - 1
    for a, c, lab in zip(tr.macro_vertices, tr.macro_vertices[1:], tr.labels):
        assert gg.base.edge_label(a, c) == lab
