from __future__ import annotations

import pytest
from hypothesis import given, strategies as st

from artifact.graph import (Edge, GraphError, PortLabeledGraph, generate, koucky_regularize,
                            koucky_vertex, label_smallest_available, parse, regular_extension,
                            relabel_colors, serialize, to_dot, validate)

from conftest import cubic_graphs, general_graphs


def test_k4_is_cubic_and_edge_symmetric():
    g = generate("k4")
    assert g.vertex_count == 4 and g.is_3regular() and g.is_edge_symmetric()
    assert validate(g).ok


def test_diamond_labels():
    d = generate("diamond_gadget")
    # edge order (a1,a4),(a1,a3),(a2,a3),(a3,a4),(a4,a2) labeled smallest-available
    assert [e.pu for e in d.edges] == [0, 1, 0, 2, 1]


@given(general_graphs())
def test_serialize_parse_roundtrip(g):
    assert parse(serialize(g)) == g
    assert serialize(parse(serialize(g))) == serialize(g)


@pytest.mark.parametrize("text, fragment", [
    ('{"vertex_count": 2, "edges": [ {"u":0,"v":1,"pu":0,"pv":0}, ]}', "line 1 column"),
    ('{"vertex_count": 2, "edges": [{"u":0,"v":1,"pu":0}]}', "edge #0"),
    ('{"vertex_count": 2, "edges": [{"u":0,"v":5,"pu":0,"pv":0}]}', "out of range"),
    ('{"vertex_count": 2, "edges": [{"u":0,"v":1,"pu":1,"pv":0}]}', "outside 0..0"),
    ('[]', "must be an object"),
])
def test_parse_rejects_with_a_position(text, fragment):
    with pytest.raises(GraphError, match=fragment):
        parse(text)


def test_parse_accepts_single_vertex():
    g = parse('{"vertex_count": 1, "edges": []}')
    assert validate(g).ok


def test_validate_reports_disconnected_and_duplicates():
    g = PortLabeledGraph(4, (Edge(0, 1, 0, 0), Edge(2, 3, 0, 0)))
    assert validate(g).kinds() == {"disconnected"}
    h = PortLabeledGraph(3, (Edge(0, 1, 0, 0), Edge(0, 2, 0, 0), Edge(1, 2, 1, 1)))
    assert "duplicate_port" in validate(h).kinds()


@given(general_graphs(max_n=20))
def test_koucky_regularize_is_cubic(g):
    reg, vmap = koucky_regularize(g)
    assert reg.is_3regular()
    assert reg.vertex_count == 3 * sum(g.degrees)
    assert validate(reg).ok
    inv = vmap.inverse()
    assert sorted(inv) == list(range(reg.vertex_count))
    for v in range(g.vertex_count):
        assert inv[koucky_vertex(g, v, 0)] == v


def test_koucky_rejects_leaves():
    g = PortLabeledGraph(2, (Edge(0, 1, 0, 0),))
    with pytest.raises(GraphError):
        koucky_regularize(g)


def test_regular_extension_of_diamond():
    d = generate("diamond_gadget")
    ext, vmap = regular_extension(d)
    assert ext.vertex_count == 8 and ext.is_3regular() and ext.is_edge_symmetric()
    assert vmap.forward[0] == (0, 4)
    # the twin edge of a1 carries the label a1 is missing
    missing = ({0, 1, 2} - {e.pu for e in d.edges if 0 in (e.u, e.v)}).pop()
    assert ext.edge_label(0, 4) == missing


@given(cubic_graphs(), st.permutations([0, 1, 2]))
def test_relabel_keeps_edge_symmetry(g, perm):
    h = relabel_colors(g, perm)
    assert h.is_edge_symmetric() and h.is_3regular() and validate(h).ok


def test_label_smallest_available_symmetric_preassigned():
    g = label_smallest_available(2, [(0, 1)], symmetric=True, preassigned={0: {0}})
    assert g.edges[0].pu == g.edges[0].pv == 1


def test_dot_output_lists_every_edge():
    g = generate("prism")
    dot = to_dot(g)
    assert dot.startswith("graph G {") and dot.count("--") == len(g.edges)
