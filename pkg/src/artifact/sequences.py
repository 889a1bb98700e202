"""Exploration and traversal sequences, their lifting, and sequence providers.

Exploration semantics: at a vertex of degree d, having arrived on port l, the
offset e sends the walker out on port ``(l + e) mod d``. A walk starts with
``l = 0`` as if it had arrived on port 0.
"""
from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Protocol, Sequence

import numpy as np

from .graph import GraphError, PortLabeledGraph, koucky_regularize, koucky_vertex


@dataclass(frozen=True)
class ExplorationSequence:
    offsets: tuple[int, ...]

    def __len__(self) -> int:
        return len(self.offsets)


@dataclass(frozen=True)
class TraversalSequence:
    labels: tuple[int, ...]

    def __len__(self) -> int:
        return len(self.labels)


@dataclass(frozen=True)
class Walk:
    vertices: tuple[int, ...]
    back_labels: tuple[int, ...]  # arrival port at each vertex, index 0 is the convention label
    exit_ports: tuple[int, ...]

    @property
    def steps(self) -> int:
        return len(self.exit_ports)

    @property
    def distinct(self) -> int:
        return len(set(self.vertices))

    @property
    def closed(self) -> bool:
        return self.vertices[0] == self.vertices[-1]

    def first_occurrences(self) -> list[int]:
        seen: set[int] = set()
        out = []
        for i, v in enumerate(self.vertices):
            if v not in seen:
                seen.add(v)
                out.append(i)
        return out


def follow(
    g: PortLabeledGraph,
    start: int,
    seq: ExplorationSequence | TraversalSequence | Sequence[int],
    limit: int | None = None,
    *,
    initial_back: int = 0,
) -> Walk:
    """Walk ``seq`` from ``start``. A bare sequence of ints is read as offsets.

    The walk stops early at a vertex of degree 0.
    """
    relative = not isinstance(seq, TraversalSequence)
    items = seq.labels if isinstance(seq, TraversalSequence) else getattr(seq, "offsets", seq)
    if limit is not None:
        items = items[:limit]
    rot = g.rotation
    deg = g.degrees
    v, back = start, initial_back
    verts = [v]
    backs = [back]
    exits = []
    for x in items:
        d = deg[v]
        if d == 0:
            break
        port = (back + x) % d if relative else x
        if not 0 <= port < d:
            raise GraphError(f"label {port} does not exist at a vertex of degree {d}")
        v, back = rot[v][port]
        verts.append(v)
        backs.append(back)
        exits.append(port)
    return Walk(tuple(verts), tuple(backs), tuple(exits))


def closed_walk_sequence_3regular(prefix: Sequence[int]) -> ExplorationSequence:
    """``e_1..e_a, 0, -e_a, ..., -e_2`` (mod 3): on edge-symmetric cubic graphs the walk returns home."""
    e = [x % 3 for x in prefix]
    if not e:
        return ExplorationSequence(())
    back = [0] + [(-x) % 3 for x in reversed(e[1:])]
    return ExplorationSequence(tuple(e + back))


# label taken in the regularized graph -> offsets emitted in the original graph
_LIFT = {0: (1, 0), 1: (-1, 0), 2: (0,)}
# label taken -> arrival port in the regularized graph
_ARRIVAL = {0: 1, 1: 0, 2: 2}


def regular_labels(reg_offsets: Sequence[int]) -> list[int]:
    """Ports taken by a walk of ``reg_offsets`` on any Koucký-regularized graph.

    They do not depend on the graph: the arrival port is fixed by the port taken.
    """
    back = 0
    out = []
    for e in reg_offsets:
        lab = (back + e) % 3
        out.append(lab)
        back = _ARRIVAL[lab]
    return out


def general_graph_sequence(reg_seq: ExplorationSequence | Sequence[int]) -> ExplorationSequence:
    """Lift an exploration sequence for regularized graphs to one for the original graph.

    The leading ``0, 0`` makes the real arrival port at the start equal 0.
    """
    offsets = getattr(reg_seq, "offsets", reg_seq)
    out = [0, 0]
    for lab in regular_labels(offsets):
        out.extend(_LIFT[lab])
    return ExplorationSequence(tuple(out))


def lifted_length(reg_length_labels: Iterable[int]) -> int:
    return 2 + sum(len(_LIFT[x]) for x in reg_length_labels)


@dataclass(frozen=True)
class LiftCheck:
    ok: bool
    steps_checked: int
    failure: str | None = None


def lift_cosimulate(g: PortLabeledGraph, start: int, reg_offsets: Sequence[int]) -> LiftCheck:
    """Run both walks side by side and check the position/back-label correspondence.

    After the ``0, 0`` preamble and after each lifted group, the walker on g
    must sit at the vertex owning the regularized walker's subvertex, with an
    arrival port congruent to the subvertex index modulo the degree.
    """
    reg, vmap = koucky_regularize(g)
    owner = vmap.inverse()
    base = {v: koucky_vertex(g, v, 0) for v in range(g.vertex_count)}
    reg_walk = follow(reg, base[start], list(reg_offsets))
    lifted = general_graph_sequence(reg_offsets)
    g_walk = follow(g, start, lifted)
    labels = regular_labels(reg_offsets)
    idx = 2
    checks = 0
    for i in range(len(labels) + 1):
        if i > 0:
            idx += len(_LIFT[labels[i - 1]])
        sub = reg_walk.vertices[i]
        v = owner[sub]
        a = sub - base[v]
        gv, gb = g_walk.vertices[idx], g_walk.back_labels[idx]
        if gv != v or gb % g.degree(v) != a % g.degree(v):
            return LiftCheck(False, checks, f"step {i}: reg at ({v},{a}), walker at {gv} back {gb}")
        checks += 1
    return LiftCheck(True, checks)


# --- universality -----------------------------------------------------------

@dataclass(frozen=True)
class UniversalityReport:
    ok: bool
    checked: int
    failure: dict | None = None


def verify_universal(
    seq: ExplorationSequence | Sequence[int],
    graphs: Iterable[PortLabeledGraph],
    *,
    target: int | None = None,
    require_closed: bool = False,
) -> UniversalityReport:
    """Check that ``seq`` visits ``min(target, n)`` vertices from every start of every graph."""
    checked = 0
    for gi, g in enumerate(graphs):
        need = g.vertex_count if target is None else min(target, g.vertex_count)
        for s in range(g.vertex_count):
            w = follow(g, s, seq)
            checked += 1
            if w.distinct < need or (require_closed and not w.closed):
                return UniversalityReport(False, checked, {
                    "graph": gi, "start": s, "distinct": w.distinct,
                    "needed": need, "closed": w.closed,
                })
    return UniversalityReport(True, checked)


# --- providers ---------------------------------------------------------------

class SequenceProvider(Protocol):
    def prefix(self, length: int) -> tuple[int, ...]: ...
    def configuration_count(self) -> int | None: ...


@dataclass(frozen=True)
class Certificate:
    n: int
    d: int
    corpus_descriptor: str
    offsets: tuple[int, ...]
    verified: bool

    def to_document(self) -> dict:
        return {
            "n": self.n, "d": self.d, "corpus_descriptor": self.corpus_descriptor,
            "offsets": list(self.offsets), "verified": self.verified,
        }

    @classmethod
    def from_document(cls, doc: dict) -> "Certificate":
        return cls(int(doc["n"]), int(doc["d"]), str(doc["corpus_descriptor"]),
                   tuple(int(x) for x in doc["offsets"]), bool(doc["verified"]))


@dataclass(frozen=True)
class CertifiedProvider:
    """Serves prefixes of a brute-force certified sequence."""

    certificate: Certificate

    def prefix(self, length: int) -> tuple[int, ...]:
        if length > len(self.certificate.offsets):
            raise ValueError(
                f"certificate has {len(self.certificate.offsets)} offsets, {length} requested"
            )
        return self.certificate.offsets[:length]

    def configuration_count(self) -> int:
        return len(self.certificate.offsets)


@dataclass(frozen=True)
class FileProvider:
    path: str

    def _offsets(self) -> tuple[int, ...]:
        doc = json.loads(Path(self.path).read_text())
        return tuple(int(x) for x in doc["offsets"])

    def prefix(self, length: int) -> tuple[int, ...]:
        offs = self._offsets()
        if length > len(offs):
            raise ValueError(f"{self.path} holds {len(offs)} offsets, {length} requested")
        return offs[:length]

    def configuration_count(self) -> int:
        return len(self._offsets())


@dataclass(frozen=True)
class SeededProvider:
    """Offsets drawn from a keyed hash stream; every prefix is a prefix of one fixed stream.

    Its configuration is just a counter, so it has no meaningful configuration
    count and cannot drive the certificate length rule.
    """

    seed: int = 0
    _cache: dict = field(default_factory=dict, compare=False, repr=False)

    def prefix(self, length: int) -> tuple[int, ...]:
        have = self._cache.get("offsets", ())
        if len(have) < length:
            out: list[int] = []
            block = 0
            while len(out) < length:
                digest = hashlib.blake2b(f"{self.seed}:{block}".encode(), digest_size=64).digest()
                out.extend(b % 3 for b in digest if b < 255)
                block += 1
            have = tuple(out)
            self._cache["offsets"] = have
        return have[:length]

    def configuration_count(self) -> None:
        return None


def desk_prefix_length(z: int) -> int:
    """Number of regular-graph offsets used for a walk that should reach ``z`` vertices."""
    return 3 * z * z


def certificate_prefix_length(z: int, c_gen: int) -> int:
    return 12 * z * c_gen + 1


@dataclass(frozen=True)
class GeneratorWalk:
    """The closed lifted walk used by the explorer for target ``z``."""

    z: int
    reg_offsets: tuple[int, ...]
    offsets: tuple[int, ...]

    def __len__(self) -> int:
        return len(self.offsets)


_WALK_CACHE: dict[tuple[int, int], GeneratorWalk] = {}


def generator_walk(z: int, seed: int = 0) -> GeneratorWalk:
    key = (z, seed)
    if key not in _WALK_CACHE:
        prefix = SeededProvider(seed).prefix(desk_prefix_length(z))
        reg = closed_walk_sequence_3regular(prefix).offsets
        _WALK_CACHE[key] = GeneratorWalk(z, reg, general_graph_sequence(reg).offsets)
    return _WALK_CACHE[key]


def generator_walk_length(z: int, seed: int = 0) -> int:
    return len(generator_walk(z, seed))


# --- brute-force search -----------------------------------------------------

def cache_dir() -> Path:
    root = os.environ.get("ARTIFACT_CACHE_DIR")
    path = Path(root) if root else Path.home() / ".cache" / "artifact"
    path.mkdir(parents=True, exist_ok=True)
    return path


class SearchBudgetExceeded(RuntimeError):
    pass


def _walker_arrays(graphs: Sequence[PortLabeledGraph]):
    rot_v, rot_b, local, starts, sizes = [], [], [], [], []
    base = 0
    for g in graphs:
        for v in range(g.vertex_count):
            rot_v.append([base + w for (w, _) in g.rotation[v]])
            rot_b.append([b for (_, b) in g.rotation[v]])
            local.append(v)
        for s in range(g.vertex_count):
            starts.append(base + s)
            sizes.append(g.vertex_count)
        base += g.vertex_count
    return (np.array(rot_v, dtype=np.int64), np.array(rot_b, dtype=np.int64),
            np.array(local, dtype=np.int64), np.array(starts, dtype=np.int64),
            np.array(sizes, dtype=np.int64))


def find_uxs_bruteforce(
    n: int,
    d: int,
    graphs: Sequence[PortLabeledGraph],
    corpus_descriptor: str,
    *,
    node_budget: int = 5_000_000,
    use_cache: bool = True,
) -> Certificate:
    """Shortest exploration sequence covering every graph in ``graphs`` from every start.

    Iterative deepening over the length, pruned by the number of still
    unvisited vertices and by the no-op pair ``0, 0``.
    """
    if d != 3:
        raise ValueError("only cubic corpora are supported")
    path = cache_dir() / f"uxs-n{n}-d{d}-{corpus_descriptor}.json"
    if use_cache and path.exists():
        cert = Certificate.from_document(json.loads(path.read_text()))
        return cert
    if not graphs:
        raise ValueError("empty corpus")
    rot_v, rot_b, local, starts, sizes = _walker_arrays(graphs)
    full = (np.ones(len(starts), dtype=np.int64) << sizes) - 1
    pos0 = starts.copy()
    back0 = np.zeros(len(starts), dtype=np.int64)
    vis0 = np.ones(len(starts), dtype=np.int64) << local[starts]
    nodes = 0

    width = int(sizes.max())
    table = np.array([bin(i).count("1") for i in range(1 << width)], dtype=np.int64)

    def popcount(x: np.ndarray) -> np.ndarray:
        return table[x]

    def dfs(pos, back, vis, depth, limit, seq, last):
        nonlocal nodes
        nodes += 1
        if nodes > node_budget:
            raise SearchBudgetExceeded(f"node budget {node_budget} exhausted at length {limit}")
        if np.array_equal(vis, full):
            return True
        need = int((sizes - popcount(vis)).max())
        if need > limit - depth:
            return False
        for e in range(3):
            if e == 0 and last == 0:
                continue
            port = (back + e) % 3
            npos = rot_v[pos, port]
            nback = rot_b[pos, port]
            nvis = vis | (np.int64(1) << local[npos])
            seq.append(e)
            if dfs(npos, nback, nvis, depth + 1, limit, seq, e):
                return True
            seq.pop()
        return False

    limit = 0
    while True:
        seq: list[int] = []
        if dfs(pos0, back0, vis0, 0, limit, seq, None):
            break
        limit += 1
    cert = Certificate(n, d, corpus_descriptor, tuple(seq), True)
    report = verify_universal(cert.offsets, graphs)
    if not report.ok:
        raise AssertionError(f"search produced a non-universal sequence: {report.failure}")
    if use_cache:
        path.write_text(json.dumps(cert.to_document(), indent=2) + "\n")
    return cert
