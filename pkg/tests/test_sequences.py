from __future__ import annotations

import itertools

import pytest
from hypothesis import given, strategies as st

from artifact.corpus import corpus_descriptor, exhaustive_corpus
from artifact.graph import generate, koucky_regularize, koucky_vertex
from artifact.sequences import (Certificate, CertifiedProvider, ExplorationSequence, SeededProvider,
                                TraversalSequence, certificate_prefix_length,
                                closed_walk_sequence_3regular, desk_prefix_length, find_uxs_bruteforce,
                                follow, general_graph_sequence, generator_walk, lift_cosimulate,
                                regular_labels, verify_universal)

from conftest import cubic_graphs, general_graphs

offsets = st.lists(st.integers(0, 2), min_size=0, max_size=60)


@given(cubic_graphs(), offsets, st.data())
def test_closed_walk_law(g, prefix, data):
    start = data.draw(st.integers(0, g.vertex_count - 1))
    w = follow(g, start, closed_walk_sequence_3regular(prefix))
    assert w.closed


def test_closed_walk_sequence_shape():
    assert closed_walk_sequence_3regular([1, 2, 1]).offsets == (1, 2, 1, 0, 2, 1)
    assert closed_walk_sequence_3regular([]).offsets == ()


@given(general_graphs(max_n=25), offsets, st.data())
def test_lift_invariants(g, prefix, data):
    start = data.draw(st.integers(0, g.vertex_count - 1))
    res = lift_cosimulate(g, start, closed_walk_sequence_3regular(prefix).offsets)
    assert res.ok, res.failure


@given(general_graphs(max_n=20), offsets)
def test_lifted_walk_follows_regularized_walk(g, prefix):
    """Second route: project the regularized walk and compare vertex by vertex at group ends."""
    reg, vmap = koucky_regularize(g)
    owner = vmap.inverse()
    reg_walk = follow(reg, koucky_vertex(g, 0, 0), prefix)
    lifted = follow(g, 0, general_graph_sequence(prefix))
    sizes = {0: 2, 1: 2, 2: 1}
    idx = 2
    assert lifted.vertices[idx] == owner[reg_walk.vertices[0]]
    for lab, v in zip(regular_labels(prefix), reg_walk.vertices[1:]):
        idx += sizes[lab]
        assert lifted.vertices[idx] == owner[v]


def test_regular_labels_do_not_depend_on_the_graph():
    prefix = [1, 2, 0, 0, 1, 2, 2]
    for g in (generate("k4"), generate("prism")):
        reg, _ = koucky_regularize(g)
        w = follow(reg, 0, prefix)
        assert list(w.exit_ports) == regular_labels(prefix)


def test_traversal_sequence_uses_absolute_labels():
    g = generate("k4")
    w = follow(g, 0, TraversalSequence((0, 0, 1)))
    assert w.vertices[0] == w.vertices[2]


def _shortest_uxs_length(graphs, limit):
    for length in range(limit + 1):
        for seq in itertools.product(range(3), repeat=length):
            if all(follow(g, s, list(seq)).distinct == g.vertex_count
                   for g in graphs for s in range(g.vertex_count)):
                return length
    return None


@pytest.mark.parametrize("n, expected", [(4, 3), (6, 5)])
def test_bruteforce_certificate_is_shortest(n, expected, tmp_path, monkeypatch):
    monkeypatch.setenv("ARTIFACT_CACHE_DIR", str(tmp_path))
    entries = exhaustive_corpus(n, all_labelings=True)
    graphs = [e.graph for e in entries]
    cert = find_uxs_bruteforce(n, 3, graphs, corpus_descriptor(entries))
    assert len(cert.offsets) == expected == _shortest_uxs_length(graphs, expected)
    assert verify_universal(cert.offsets, graphs).ok
    # the cached copy is served on the second call
    assert list(tmp_path.iterdir())
    assert find_uxs_bruteforce(n, 3, [], corpus_descriptor(entries)) == cert


def test_certificate_document_roundtrip():
    cert = Certificate(4, 3, "abc", (1, 2, 0), True)
    assert Certificate.from_document(cert.to_document()) == cert
    with pytest.raises(ValueError):
        CertifiedProvider(cert).prefix(4)


def test_verify_universal_reports_the_failure():
    g = generate("k4")
    rep = verify_universal([0], [g])
    assert not rep.ok and rep.failure["distinct"] == 2 and rep.failure["needed"] == 4


def test_seeded_provider_prefixes_are_consistent():
    p = SeededProvider(7)
    long = p.prefix(500)
    assert SeededProvider(7).prefix(120) == long[:120]
    assert set(long) <= {0, 1, 2}
    assert SeededProvider(8).prefix(50) != long[:50]


def test_length_rules():
    assert certificate_prefix_length(4, 15) == 12 * 4 * 15 + 1
    assert desk_prefix_length(8) == 192


@pytest.mark.parametrize("z", [2, 4, 8])
def test_generator_walk_is_closed_and_covers(z):
    w = generator_walk(z)
    assert w.offsets == general_graph_sequence(w.reg_offsets).offsets
    for e in exhaustive_corpus(8):
        for s in range(e.graph.vertex_count):
            walk = follow(e.graph, s, w.offsets)
            assert walk.closed and walk.distinct >= min(z, e.graph.vertex_count)


def test_exploration_sequence_type():
    seq = ExplorationSequence((1, 2))
    assert follow(generate("k4"), 0, seq).steps == 2
