from __future__ import annotations

import itertools
import random

import networkx as nx
import pytest
from networkx.algorithms.isomorphism import categorical_edge_match

from artifact.corpus import (canonical_code, cubic_classes, exhaustive_corpus, graph_from_code,
                             label_variants, labeled_trees, manifest_hash, sampled_corpus)
from artifact.graph import random_matchings_3regular, relabel_colors, validate

EDGE_MATCH = categorical_edge_match("c", None)


def _nx(g, perm=(0, 1, 2)):
    h = nx.Graph()  # corpus graphs are simple
    h.add_nodes_from(range(g.vertex_count))
    for e in g.edges:
        h.add_edge(e.u, e.v, c=perm[e.pu])
    return h


def _color_invariant(g):
    # multiset over color pairs of the sorted cycle lengths of the 2-colored subgraphs
    out = []
    for a, b in ((0, 1), (0, 2), (1, 2)):
        h = nx.Graph()
        h.add_edges_from((e.u, e.v) for e in g.edges if e.pu in (a, b))
        out.append(tuple(sorted(len(c) for c in nx.connected_components(h))))
    return tuple(sorted(out))


def _isomorphic_up_to_colors(g, h):
    target = _nx(h)
    return any(nx.is_isomorphic(_nx(g, p), target, edge_match=EDGE_MATCH)
               for p in itertools.permutations(range(3)))


def _oracle_count(n):
    """Brute-force class count with networkx: fix the first matching, enumerate the rest."""
    m0 = [(2 * i, 2 * i + 1) for i in range(n // 2)]

    def matchings(vs, forbid):
        if not vs:
            yield []
            return
        a = vs[0]
        for b in vs[1:]:
            if frozenset((a, b)) not in forbid:
                rest = [x for x in vs if x not in (a, b)]
                for m in matchings(rest, forbid):
                    yield [(a, b)] + m

    reps = []
    f0 = {frozenset(e) for e in m0}
    for m1 in matchings(list(range(n)), f0):
        f1 = f0 | {frozenset(e) for e in m1}
        for m2 in matchings(list(range(n)), f1):
            g = nx.Graph()
            for c, m in enumerate((m0, m1, m2)):
                g.add_edges_from(m, c=c)
            if not nx.is_connected(g):
                continue
            variants = []
            for p in itertools.permutations(range(3)):
                h = nx.Graph()
                h.add_edges_from((a, b, {"c": p[d["c"]]}) for a, b, d in g.edges(data=True))
                variants.append(h)
            if not any(nx.is_isomorphic(r, v, edge_match=EDGE_MATCH) for r in reps for v in variants):
                reps.append(g)
    return len(reps)


@pytest.mark.parametrize("n, expected", [(4, 1), (6, 2)])
def test_class_counts_match_networkx_enumeration(n, expected):
    assert _oracle_count(n) == expected == len(cubic_classes(n))


def test_class_counts_frozen():
    # n=8 was confirmed by the networkx enumeration above (about a minute);
    # n=10 and 12 are backed by the soundness and completeness checks below
    assert [len(cubic_classes(n)) for n in (4, 6, 8, 10, 12)] == [1, 2, 7, 21, 146]


@pytest.mark.parametrize("n", [8, 10, 12])
def test_classes_pairwise_non_isomorphic(n):
    classes = cubic_classes(n)
    buckets: dict = {}
    for g in classes:
        assert g.is_3regular() and g.is_edge_symmetric() and validate(g).ok
        buckets.setdefault(_color_invariant(g), []).append(g)
    for group in buckets.values():
        for g, h in itertools.combinations(group, 2):
            assert not _isomorphic_up_to_colors(g, h)


@pytest.mark.parametrize("n, samples", [(8, 300), (10, 300)])
def test_random_colored_graphs_fall_into_a_class(n, samples):
    classes = cubic_classes(n)
    buckets: dict = {}
    for g in classes:
        buckets.setdefault(_color_invariant(g), []).append(g)
    rng = random.Random(n)
    for _ in range(samples):
        g = random_matchings_3regular(n, rng)
        assert any(_isomorphic_up_to_colors(g, h) for h in buckets.get(_color_invariant(g), []))


def test_canonical_code_is_a_class_invariant():
    rng = random.Random(5)
    for g in cubic_classes(8):
        code = canonical_code(g)
        perm = list(range(8))
        rng.shuffle(perm)
        shuffled = type(g)(8, tuple(type(e)(perm[e.u], perm[e.v], e.pu, e.pv) for e in g.edges))
        assert canonical_code(shuffled) == code
        assert canonical_code(relabel_colors(g, (2, 0, 1))) == code
        assert canonical_code(graph_from_code(code)) == code


def test_label_variants_and_all_labelings():
    assert len(exhaustive_corpus(10, all_labelings=True)) == 81
    for g in cubic_classes(6):
        variants = label_variants(g)
        assert len(set(variants)) == len(variants) <= 6


def test_samples_are_seeded_and_in_range():
    a, b = sampled_corpus(), sampled_corpus()
    assert len(a) == 200 and manifest_hash(a) == manifest_hash(b)
    assert all(12 <= e.graph.vertex_count <= 200 and e.graph.is_3regular() for e in a)


def test_labeled_trees_counts():
    # labeled trees up to 4 vertices: n=2: 1; n=3: the path with 2 labelings at the middle (2);
    # n=4: path (2*2 = 4) and star (3! = 6)
    counts = {}
    for t in labeled_trees(4):
        counts[t.vertex_count] = counts.get(t.vertex_count, 0) + 1
    assert counts == {2: 1, 3: 2, 4: 10}
