"""Port-labeled undirected graphs and the transformations built on them.

Vertices are integers ``0..n-1``. These ids exist for the harness only; the
agent layer never sees them.
"""
from __future__ import annotations

import json
import random
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence


class GraphError(ValueError):
    """Raised when a graph document or construction breaks an invariant."""


@dataclass(frozen=True)
class Edge:
    u: int
    v: int
    pu: int
    pv: int

    def canonical(self) -> "Edge":
        if self.u <= self.v:
            return self
        return Edge(self.v, self.u, self.pv, self.pu)

    def key(self) -> tuple[int, int, int, int]:
        c = self.canonical()
        return (c.u, c.v, c.pu, c.pv)


@dataclass(frozen=True)
class PortLabeledGraph:
    """An undirected multigraph with a port label at every edge endpoint.

    Construction does not check invariants, so that broken graphs can be
    handed to :func:`validate`. Use :func:`parse` or the generators for
    checked input.
    """

    vertex_count: int
    edges: tuple[Edge, ...]

    def __post_init__(self) -> None:
        edges = tuple(
            e if isinstance(e, Edge) else Edge(*e) for e in self.edges
        )
        object.__setattr__(self, "edges", edges)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PortLabeledGraph):
            return NotImplemented
        return (
            self.vertex_count == other.vertex_count
            and self.canonical_edges == other.canonical_edges
        )

    def __hash__(self) -> int:
        return hash((self.vertex_count, self.canonical_edges))

    @cached_property
    def canonical_edges(self) -> tuple[tuple[int, int, int, int], ...]:
        return tuple(sorted(e.key() for e in self.edges))

    @cached_property
    def rotation(self) -> tuple[tuple[tuple[int, int], ...], ...]:
        """``rotation[v][p] = (w, q)``: port p at v leads to w, arriving on port q.

        Only meaningful for graphs whose ports are contiguous; gaps are
        filled with ``(-1, -1)``.
        """
        slots: list[dict[int, tuple[int, int]]] = [
            {} for _ in range(self.vertex_count)
        ]
        for e in self.edges:
            slots[e.u][e.pu] = (e.v, e.pv)
            slots[e.v][e.pv] = (e.u, e.pu)
        out = []
        for s in slots:
            width = max(s) + 1 if s else 0
            out.append(tuple(s.get(p, (-1, -1)) for p in range(width)))
        return tuple(out)

    @cached_property
    def degrees(self) -> tuple[int, ...]:
        deg = [0] * self.vertex_count
        for e in self.edges:
            deg[e.u] += 1
            deg[e.v] += 1
        return tuple(deg)

    def degree(self, v: int) -> int:
        return self.degrees[v]

    def neighbor(self, v: int, port: int) -> tuple[int, int]:
        return self.rotation[v][port]

    def ports(self, v: int) -> list[int]:
        out = []
        for e in self.edges:
            if e.u == v:
                out.append(e.pu)
            if e.v == v:
                out.append(e.pv)
        return sorted(out)

    def is_3regular(self) -> bool:
        return all(d == 3 for d in self.degrees)

    def is_edge_symmetric(self) -> bool:
        return all(e.pu == e.pv for e in self.edges)

    def edge_label(self, u: int, v: int) -> int | None:
        """Label of the edge {u,v} for edge-symmetric graphs (first match)."""
        for e in self.edges:
            if {e.u, e.v} == {u, v} and e.pu == e.pv:
                return e.pu
        return None

    def is_connected(self) -> bool:
        if self.vertex_count <= 1:
            return True
        adj: list[list[int]] = [[] for _ in range(self.vertex_count)]
        for e in self.edges:
            if 0 <= e.u < self.vertex_count and 0 <= e.v < self.vertex_count:
                adj[e.u].append(e.v)
                adj[e.v].append(e.u)
        seen = {0}
        queue = deque([0])
        while queue:
            x = queue.popleft()
            for y in adj[x]:
                if y not in seen:
                    seen.add(y)
                    queue.append(y)
        return len(seen) == self.vertex_count


@dataclass(frozen=True)
class VertexMap:
    forward: dict[int, tuple[int, ...]]
    kind: str

    def inverse(self) -> dict[int, int]:
        inv: dict[int, int] = {}
        for v, images in self.forward.items():
            for w in images:
                if w in inv:
                    raise GraphError(f"image vertex {w} covered twice")
                inv[w] = v
        return inv


@dataclass(frozen=True)
class Violation:
    kind: str
    message: str
    vertex: int | None = None
    edge: int | None = None


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)

    def __bool__(self) -> bool:  # truthy when the graph is valid
        return not self.violations

    @property
    def ok(self) -> bool:
        return not self.violations

    def kinds(self) -> set[str]:
        return {v.kind for v in self.violations}

    def messages(self) -> list[str]:
        return [v.message for v in self.violations]


def _port_violations(g: PortLabeledGraph, *, check_connected: bool) -> list[Violation]:
    out: list[Violation] = []
    n = g.vertex_count
    if n < 0:
        return [Violation("vertex_count", f"negative vertex_count {n}")]
    incident: list[list[tuple[int, int]]] = [[] for _ in range(n)]
    for idx, e in enumerate(g.edges):
        bad = [w for w in (e.u, e.v) if not 0 <= w < n]
        if bad:
            out.append(Violation("range", f"edge #{idx}: vertex {bad[0]} out of range", bad[0], idx))
            continue
        if e.u == e.v:
            out.append(Violation("self_loop", f"edge #{idx}: self-loop at vertex {e.u}", e.u, idx))
        incident[e.u].append((e.pu, idx))
        incident[e.v].append((e.pv, idx))
    for w in range(n):
        labels = sorted(p for p, _ in incident[w])
        deg = len(labels)
        seen: set[int] = set()
        for p, idx in sorted(incident[w]):
            if p in seen:
                out.append(Violation("duplicate_port", f"duplicate port {p} at vertex {w}", w, idx))
            seen.add(p)
            if not 0 <= p < deg:
                out.append(Violation(
                    "port_range",
                    f"port {p} at vertex {w} outside 0..{deg - 1}",
                    w, idx,
                ))
    if check_connected and n > 0 and not g.is_connected():
        out.append(Violation("disconnected", "graph is disconnected"))
    return out


def validate(g: PortLabeledGraph) -> ValidationReport:
    """List every broken invariant; an empty report means ``g`` is valid."""
    return ValidationReport(_port_violations(g, check_connected=True))


def _require_valid(g: PortLabeledGraph) -> None:
    rep = validate(g)
    if not rep.ok:
        raise GraphError("invalid graph: " + "; ".join(rep.messages()))


# --- transformations -------------------------------------------------------

def koucky_regularize(g: PortLabeledGraph) -> tuple[PortLabeledGraph, VertexMap]:
    """Replace each vertex of degree d by a 3d-cycle and each edge by three label-2 edges.

    Subvertex ``(v, i)`` gets id ``offset[v] + i``. Cycle edges carry port 0
    at ``(v, i)`` and port 1 at ``(v, i+1)``.
    """
    _require_valid(g)
    deg = g.degrees
    if g.vertex_count == 0 or any(d < 2 for d in deg):
        low = next((v for v, d in enumerate(deg) if d < 2), None)
        raise GraphError(f"koucky_regularize needs every degree >= 2 (vertex {low})")
    offset = []
    total = 0
    for d in deg:
        offset.append(total)
        total += 3 * d
    edges: list[Edge] = []
    forward: dict[int, tuple[int, ...]] = {}
    for v, d in enumerate(deg):
        size = 3 * d
        base = offset[v]
        forward[v] = tuple(range(base, base + size))
        for i in range(size):
            edges.append(Edge(base + i, base + (i + 1) % size, 0, 1))
    for e in g.edges:
        dv, dw = deg[e.u], deg[e.v]
        for t in range(3):
            a = offset[e.u] + e.pu + t * dv
            b = offset[e.v] + e.pv + t * dw
            edges.append(Edge(a, b, 2, 2))
    return PortLabeledGraph(total, tuple(edges)), VertexMap(forward, "koucky")


def koucky_vertex(g: PortLabeledGraph, v: int, i: int) -> int:
    """Id of subvertex ``(v, i)`` in ``koucky_regularize(g)``."""
    return sum(3 * d for d in g.degrees[:v]) + i


def _local_labels(g: PortLabeledGraph) -> list[list[int]]:
    labels: list[list[int]] = [[] for _ in range(g.vertex_count)]
    for e in g.edges:
        labels[e.u].append(e.pu)
        labels[e.v].append(e.pv)
    return labels


def regular_extension(g: PortLabeledGraph) -> tuple[PortLabeledGraph, VertexMap]:
    """Two copies of ``g`` with every degree-2 vertex joined to its twin.

    Copy 0 keeps ids ``0..n-1``, copy 1 uses ``n..2n-1``. The twin edge gets
    the one label in {0,1,2} the vertex is missing.
    """
    n = g.vertex_count
    for idx, e in enumerate(g.edges):
        if e.pu != e.pv:
            raise GraphError(f"edge #{idx} is not endpoint-symmetric")
        if e.u == e.v:
            raise GraphError(f"edge #{idx}: self-loop at vertex {e.u}")
    labels = _local_labels(g)
    edges: list[Edge] = list(g.edges)
    edges += [Edge(e.u + n, e.v + n, e.pu, e.pv) for e in g.edges]
    for v in range(n):
        have = labels[v]
        if len(have) not in (2, 3):
            raise GraphError(f"vertex {v} has degree {len(have)}, expected 2 or 3")
        if len(set(have)) != len(have) or not set(have) <= {0, 1, 2}:
            raise GraphError(f"vertex {v} labels {sorted(have)} are not distinct labels in 0..2")
        if len(have) == 2:
            (missing,) = {0, 1, 2} - set(have)
            edges.append(Edge(v, v + n, missing, missing))
    forward = {v: (v, v + n) for v in range(n)}
    return PortLabeledGraph(2 * n, tuple(edges)), VertexMap(forward, "extension")


# --- labeling helpers ------------------------------------------------------

def label_smallest_available(
    n: int,
    pairs: Sequence[tuple[int, int]],
    *,
    symmetric: bool = False,
    preassigned: dict[int, Iterable[int]] | None = None,
) -> PortLabeledGraph:
    """Label edges in input order with the smallest free label at each end.

    With ``symmetric=True`` one label per edge is chosen, the smallest free at
    both endpoints. ``preassigned`` reserves labels at a vertex, as needed when
    a piece will later be joined to something else.
    """
    used: list[set[int]] = [set() for _ in range(n)]
    for v, labs in (preassigned or {}).items():
        used[v].update(labs)
    edges = []
    for u, v in pairs:
        if u == v:
            raise GraphError(f"self-loop at vertex {u}")
        if symmetric:
            lab = 0
            while lab in used[u] or lab in used[v]:
                lab += 1
            pu = pv = lab
        else:
            pu = min(set(range(len(used[u]) + 1)) - used[u])
            pv = min(set(range(len(used[v]) + 2)) - used[v])
        used[u].add(pu)
        used[v].add(pv)
        edges.append(Edge(u, v, pu, pv))
    return PortLabeledGraph(n, tuple(edges))


# --- generators --------------------------------------------------------------

K4_PAIRS = ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))
PRISM_PAIRS = ((0, 1), (1, 2), (2, 0), (3, 4), (4, 5), (5, 3), (0, 3), (1, 4), (2, 5))
# a1..a4 -> 0..3; a1 and a2 are the two degree-2 vertices
DIAMOND_PAIRS = ((0, 3), (0, 2), (1, 2), (2, 3), (3, 1))


def random_matchings_3regular(n: int, rng: random.Random, *, attempts: int = 10_000) -> PortLabeledGraph:
    """Union of three disjoint random perfect matchings, colored 0, 1, 2."""
    if n < 4 or n % 2:
        raise GraphError(f"random_3regular needs an even vertex count >= 4, got {n}")
    for _ in range(attempts):
        taken: set[frozenset[int]] = set()
        edges: list[Edge] = []
        ok = True
        for color in range(3):
            matched = None
            for _ in range(200):
                perm = list(range(n))
                rng.shuffle(perm)
                pairs = [frozenset(perm[i:i + 2]) for i in range(0, n, 2)]
                if not any(p in taken for p in pairs):
                    matched = pairs
                    break
            if matched is None:
                ok = False
                break
            for p in matched:
                taken.add(p)
                a, b = sorted(p)
                edges.append(Edge(a, b, color, color))
        if not ok:
            continue
        g = PortLabeledGraph(n, tuple(edges))
        if g.is_connected():
            return g
    raise GraphError(f"could not sample a connected 3-regular graph on {n} vertices")


def random_general(n: int, extra: int, rng: random.Random) -> PortLabeledGraph:
    """A Hamiltonian cycle plus ``extra`` random chords; minimum degree is 2."""
    if n < 3:
        raise GraphError(f"random_general needs n >= 3, got {n}")
    order = list(range(n))
    rng.shuffle(order)
    pairs = [(order[i], order[(i + 1) % n]) for i in range(n)]
    present = {frozenset(p) for p in pairs}
    max_extra = n * (n - 1) // 2 - n
    if extra > max_extra:
        raise GraphError(f"at most {max_extra} extra edges fit on {n} vertices")
    while extra > 0:
        a, b = rng.sample(range(n), 2)
        if frozenset((a, b)) in present:
            continue
        present.add(frozenset((a, b)))
        pairs.append((a, b))
        extra -= 1
    return label_smallest_available(n, pairs)


def generate(kind: str, params: dict | None = None, seed: int = 0) -> PortLabeledGraph:
    params = dict(params or {})
    if kind == "k4":
        return label_smallest_available(4, K4_PAIRS, symmetric=True)
    if kind == "prism":
        return label_smallest_available(6, PRISM_PAIRS, symmetric=True)
    if kind == "diamond_gadget":
        return label_smallest_available(4, DIAMOND_PAIRS, symmetric=True)
    rng = random.Random(seed)
    if kind == "random_3regular":
        return random_matchings_3regular(int(params.get("n", 10)), rng)
    if kind == "random_general":
        n = int(params.get("n", 8))
        return random_general(n, int(params.get("extra", n // 2)), rng)
    raise GraphError(f"unknown graph kind {kind!r}")


# --- documents -------------------------------------------------------------

def to_document(g: PortLabeledGraph) -> dict:
    edges = [
        {"u": u, "v": v, "pu": pu, "pv": pv}
        for (u, v, pu, pv) in g.canonical_edges
    ]
    return {"vertex_count": g.vertex_count, "edges": edges}


def serialize(g: PortLabeledGraph) -> bytes:
    doc = to_document(g)
    lines = ["{", f'  "vertex_count": {doc["vertex_count"]},']
    if not doc["edges"]:
        lines.append('  "edges": []')
    else:
        lines.append('  "edges": [')
        rows = [json.dumps(e, separators=(", ", ": ")) for e in doc["edges"]]
        lines.append(",\n".join("    " + r for r in rows))
        lines.append("  ]")
    lines.append("}")
    return ("\n".join(lines) + "\n").encode()


def from_document(doc: object) -> PortLabeledGraph:
    if not isinstance(doc, dict):
        raise GraphError("graph document must be an object")
    n = doc.get("vertex_count")
    if not isinstance(n, int) or isinstance(n, bool) or n < 0:
        raise GraphError("vertex_count must be a non-negative integer")
    raw = doc.get("edges")
    if not isinstance(raw, list):
        raise GraphError("edges must be an array")
    edges = []
    for idx, item in enumerate(raw):
        if not isinstance(item, dict) or set(item) != {"u", "v", "pu", "pv"}:
            raise GraphError(f"edge #{idx}: expected keys u, v, pu, pv")
        vals = [item[k] for k in ("u", "v", "pu", "pv")]
        if not all(isinstance(x, int) and not isinstance(x, bool) for x in vals):
            raise GraphError(f"edge #{idx}: fields must be integers")
        edges.append(Edge(*vals))
    g = PortLabeledGraph(n, tuple(edges))
    problems = _port_violations(g, check_connected=False)
    if problems:
        raise GraphError("; ".join(p.message for p in problems))
    return g


def parse(data: bytes | str) -> PortLabeledGraph:
    """Parse a graph document. Disconnected graphs pass; ``validate`` flags them."""
    text = data.decode() if isinstance(data, bytes) else data
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise GraphError(f"syntax error at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    return from_document(doc)


def to_dot(g: PortLabeledGraph, name: str = "G") -> str:
    lines = [f"graph {name} {{"]
    for v in range(g.vertex_count):
        lines.append(f"  {v};")
    for (u, v, pu, pv) in g.canonical_edges:
        lines.append(f'  {u} -- {v} [taillabel="{pu}", headlabel="{pv}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def relabel_colors(g: PortLabeledGraph, perm: Sequence[int]) -> PortLabeledGraph:
    """Apply a permutation to every port label (for label-permuted corpus members)."""
    return PortLabeledGraph(
        g.vertex_count,
        tuple(Edge(e.u, e.v, perm[e.pu], perm[e.pv]) for e in g.edges),
    )
