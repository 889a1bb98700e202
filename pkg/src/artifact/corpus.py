"""Test corpora: edge-colored cubic graphs, port-labeled trees, seeded samples.

The exhaustive cubic corpus lists every connected simple 3-regular graph with
a proper 3-edge-coloring (colors used as symmetric port labels), once per
class under vertex relabeling and color permutation.
"""
from __future__ import annotations

import hashlib
import itertools
import json
import random
from collections import deque
from dataclasses import dataclass
from functools import lru_cache

import networkx as nx

from .graph import Edge, PortLabeledGraph, random_matchings_3regular, relabel_colors

PERMS3 = tuple(itertools.permutations(range(3)))
EXHAUSTIVE_MAX_N = 10
SAMPLE_COUNT = 200
SAMPLE_MAX_N = 200
SAMPLE_SEED = 20240601


def _color_adjacency(g: PortLabeledGraph) -> list[list[int]]:
    adj = [[-1, -1, -1] for _ in range(g.vertex_count)]
    for e in g.edges:
        adj[e.u][e.pu] = e.v
        adj[e.v][e.pv] = e.u
    return adj


def _bfs_code(adj: list[list[int]], start: int, perm: tuple[int, ...]) -> tuple[int, ...]:
    # perm maps old color -> new color; visit colors in new-color order
    inv = [0, 0, 0]
    for old, new in enumerate(perm):
        inv[new] = old
    order = {start: 0}
    queue = deque([start])
    code: list[int] = []
    while queue:
        x = queue.popleft()
        for new_c in range(3):
            y = adj[x][inv[new_c]]
            if y not in order:
                order[y] = len(order)
                queue.append(y)
            code.append(order[y])
    return tuple(code)


def canonical_code(g: PortLabeledGraph, *, allow_permutation: bool = True) -> tuple[int, ...]:
    """Canonical form of a connected edge-colored cubic graph."""
    adj = _color_adjacency(g)
    perms = PERMS3 if allow_permutation else ((0, 1, 2),)
    return min(
        _bfs_code(adj, s, p) for s in range(g.vertex_count) for p in perms
    )


def graph_from_code(code: tuple[int, ...]) -> PortLabeledGraph:
    n = len(code) // 3
    edges = []
    for x in range(n):
        for c in range(3):
            y = code[3 * x + c]
            if x < y:
                edges.append(Edge(x, y, c, c))
    return PortLabeledGraph(n, tuple(edges))


def _perfect_matchings(vertices: list[int], forbidden: set[frozenset[int]]):
    if not vertices:
        yield []
        return
    a = vertices[0]
    for i in range(1, len(vertices)):
        b = vertices[i]
        if frozenset((a, b)) in forbidden:
            continue
        rest = vertices[1:i] + vertices[i + 1:]
        for m in _perfect_matchings(rest, forbidden):
            yield [(a, b)] + m


def _even_partitions(n: int, smallest: int = 4):
    if n == 0:
        yield []
        return
    for part in range(smallest, n + 1, 2):
        for rest in _even_partitions(n - part, part):
            yield [part] + rest


@lru_cache(maxsize=None)
def _cubic_codes(n: int) -> tuple[tuple[int, ...], ...]:
    codes: set[tuple[int, ...]] = set()
    if n < 4 or n % 2:
        return ()
    for parts in _even_partitions(n):
        edges01: list[Edge] = []
        base = 0
        for size in parts:
            for i in range(size):
                a, b = base + i, base + (i + 1) % size
                color = i % 2
                edges01.append(Edge(a, b, color, color))
            base += size
        forbidden = {frozenset((e.u, e.v)) for e in edges01}
        for m in _perfect_matchings(list(range(n)), forbidden):
            g = PortLabeledGraph(n, tuple(edges01) + tuple(Edge(a, b, 2, 2) for a, b in m))
            if not g.is_connected():
                continue
            codes.add(canonical_code(g))
    return tuple(sorted(codes))


def cubic_classes(n: int) -> list[PortLabeledGraph]:
    """One representative per class, up to isomorphism and color permutation."""
    return [graph_from_code(c) for c in _cubic_codes(n)]


def label_variants(g: PortLabeledGraph) -> list[PortLabeledGraph]:
    """Distinct labeled graphs obtained by permuting the three colors."""
    seen: dict[tuple[int, ...], PortLabeledGraph] = {}
    for p in PERMS3:
        h = relabel_colors(g, p)
        code = canonical_code(h, allow_permutation=False)
        seen.setdefault(code, graph_from_code(code))
    return [seen[c] for c in sorted(seen)]


@dataclass(frozen=True)
class CorpusEntry:
    name: str
    graph: PortLabeledGraph
    source: str  # "exhaustive" or "sample"


def exhaustive_corpus(max_n: int = EXHAUSTIVE_MAX_N, *, all_labelings: bool = False) -> list[CorpusEntry]:
    out = []
    for n in range(4, max_n + 1, 2):
        for i, g in enumerate(cubic_classes(n)):
            if all_labelings:
                for j, h in enumerate(label_variants(g)):
                    out.append(CorpusEntry(f"cubic-n{n}-c{i}-l{j}", h, "exhaustive"))
            else:
                out.append(CorpusEntry(f"cubic-n{n}-c{i}", g, "exhaustive"))
    return out


def sample_sizes(count: int = SAMPLE_COUNT, max_n: int = SAMPLE_MAX_N, seed: int = SAMPLE_SEED) -> list[int]:
    rng = random.Random(seed)
    low = EXHAUSTIVE_MAX_N + 2
    return [rng.randrange(low, max_n + 1, 2) for _ in range(count)]


def sampled_corpus(count: int = SAMPLE_COUNT, max_n: int = SAMPLE_MAX_N, seed: int = SAMPLE_SEED) -> list[CorpusEntry]:
    out = []
    for i, n in enumerate(sample_sizes(count, max_n, seed)):
        g = random_matchings_3regular(n, random.Random(seed * 1_000 + i))
        out.append(CorpusEntry(f"sample-{i}-n{n}", g, "sample"))
    return out


def standard_corpus(max_n: int = SAMPLE_MAX_N) -> list[CorpusEntry]:
    """Exhaustive classes for n <= 10 plus the seeded samples, capped at ``max_n``."""
    entries = exhaustive_corpus(min(max_n, EXHAUSTIVE_MAX_N))
    entries += [e for e in sampled_corpus() if e.graph.vertex_count <= max_n]
    return entries


def labeled_trees(max_n: int) -> list[PortLabeledGraph]:
    """Every port labeling of every unlabeled tree with 2..max_n vertices."""
    out = []
    for n in range(2, max_n + 1):
        for t in nx.nonisomorphic_trees(n):
            pairs = sorted(tuple(sorted(e)) for e in t.edges())
            incident: dict[int, list[int]] = {v: [] for v in range(n)}
            for idx, (a, b) in enumerate(pairs):
                incident[a].append(idx)
                incident[b].append(idx)
            choices = [list(itertools.permutations(range(len(incident[v])))) for v in range(n)]
            for pick in itertools.product(*choices):
                port = {}
                for v in range(n):
                    for slot, idx in enumerate(incident[v]):
                        port[(v, idx)] = pick[v][slot]
                edges = tuple(
                    Edge(a, b, port[(a, idx)], port[(b, idx)]) for idx, (a, b) in enumerate(pairs)
                )
                out.append(PortLabeledGraph(n, edges))
    return out


def corpus_descriptor(entries: list[CorpusEntry]) -> str:
    return manifest_hash(entries)[:16]


def manifest(entries: list[CorpusEntry]) -> list[dict]:
    return [
        {"name": e.name, "source": e.source, "vertex_count": e.graph.vertex_count,
         "edges": [list(x) for x in e.graph.canonical_edges]}
        for e in entries
    ]


def manifest_hash(entries: list[CorpusEntry]) -> str:
    blob = json.dumps(manifest(entries), separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()
