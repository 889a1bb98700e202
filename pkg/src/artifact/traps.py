"""Barriers and traps for sets of cooperating agents, with pigeonhole verifiers.

Everything here works on edge-symmetric 3-regular graphs. Agents start with
back-label 0. A verifier verdict speaks only about the probe graphs it names.
"""
from __future__ import annotations

import itertools
import random
from collections import deque
from dataclasses import dataclass, field, replace
from math import comb
from typing import Callable, Hashable, Iterable, Iterator, Sequence

from .agents import (
    AgentSpec,
    CooperativeAgentSpec,
    Transition,
    UndefinedTransition,
    agent_from_rule,
    cooperative_from_rules,
    restrict,
    visible_vector,
)
from .corpus import cubic_classes, label_variants
from .graph import (
    DIAMOND_PAIRS,
    Edge,
    GraphError,
    PortLabeledGraph,
    VertexMap,
    generate,
    label_smallest_available,
    random_matchings_3regular,
    regular_extension,
)

DEFAULT_MAX_STEPS = 2_000_000
DEFAULT_ALPHA_CAP = 4_096
PROBE_BASES = ("k4", "prism")


class TrapError(RuntimeError):
    pass


class SearchExhausted(TrapError):
    """No candidate graph was certified within the budget."""


class CapExceeded(TrapError):
    """A desk-scale cap was hit; the construction is not buildable here."""


class MacroInconsistency(TrapError):
    """Two probes disagree on a macro transition. Fatal: the tabulation is unsound."""


# --- solo views --------------------------------------------------------------

@dataclass(frozen=True)
class SoloAgent:
    """An agent as seen while alone: ``rule(state, degree, back) -> (next, move)``."""

    states: tuple
    halting: frozenset
    start: Hashable
    rule: Callable[[Hashable, int, int], tuple]
    name: str = "solo"

    def step(self, state, degree: int, back: int) -> tuple:
        try:
            return self.rule(state, degree, back)
        except UndefinedTransition:
            if state in self.halting:
                return state, None
            raise


def solo_view(agent) -> SoloAgent:
    if isinstance(agent, SoloAgent):
        return agent
    if isinstance(agent, MacroAgentSpec):
        agent = agent.agent
    if isinstance(agent, AgentSpec):
        if agent.pebbles:
            raise ValueError(f"{agent.name}: barrier agents carry no pebbles")

        def rule(s, d, b, a=agent):
            t = a.delta(s, d, b, frozenset(), frozenset())
            return t.state, t.move

        return SoloAgent(agent.states, agent.halting, agent.start, rule, agent.name)
    raise TypeError(f"cannot view {type(agent).__name__} as a single agent")


def solo_members(spec: CooperativeAgentSpec) -> list[SoloAgent]:
    """Each member with nobody else in sight."""
    blank = (None,) * (spec.k - 1)
    out = []
    for a in spec.agents:
        out.append(SoloAgent(a.states, a.halting, a.start,
                             lambda s, d, b, a=a: a.delta(s, blank, d, b), a.name))
    return out


def as_cooperative(agents) -> CooperativeAgentSpec:
    """Accept a cooperating set, a macro agent or a list of single agents."""
    if isinstance(agents, CooperativeAgentSpec):
        return agents
    if isinstance(agents, (AgentSpec, SoloAgent, MacroAgentSpec)):
        agents = [agents]
    solos = [solo_view(a) for a in agents]
    return cooperative_from_rules(
        [(a.states, a.halting, a.start, lambda s, vis, d, b, a=a: a.step(s, d, b)) for a in solos],
        [a.name for a in solos])


def _solos(agents) -> list[SoloAgent]:
    if isinstance(agents, CooperativeAgentSpec):
        return solo_members(agents)
    if isinstance(agents, (AgentSpec, SoloAgent, MacroAgentSpec)):
        agents = [agents]
    return [solo_view(a) for a in agents]


# --- small agent zoo used by the suite and the tests ------------------------

def oscillator(port: int = 0) -> AgentSpec:
    """One state, always leaves by the same port."""
    return agent_from_rule(("o",), (), "o", lambda s, d, b, c, h: Transition("o", port % d),
                           name=f"oscillator{port}")


def rotor(offset: int = 1) -> AgentSpec:
    """One state, leaves by (back + offset) mod degree."""
    return agent_from_rule(("r",), (), "r", lambda s, d, b, c, h: Transition("r", (b + offset) % d),
                           name=f"rotor{offset}")


def alternator() -> AgentSpec:
    """Two states taking offsets 1 and 2 in turn."""
    def rule(s, d, b, c, h):
        return Transition("b", (b + 1) % d) if s == "a" else Transition("a", (b + 2) % d)
    return agent_from_rule(("a", "b"), (), "a", rule, name="alternator")


def cautious_pair() -> CooperativeAgentSpec:
    """Two 1-state agents: a rotor, and a partner that turns the other way when alone."""
    def lead(s, vis, d, b):
        return "x", (b + 1) % d

    def partner(s, vis, d, b):
        return "y", (b + 1) % d if vis[0] is not None else (b + 2) % d

    return cooperative_from_rules([(("x",), (), "x", lead), (("y",), (), "y", partner)],
                                  ["lead", "partner"])


# --- lockstep simulation --------------------------------------------------------

class Lockstep:
    """Synchronous stepping with the same semantics as ``run_cooperative``.

    ``frozen`` agents never act but stay visible where they stand.
    """

    def __init__(self, spec: CooperativeAgentSpec, g: PortLabeledGraph, positions: Sequence[int],
                 states: Sequence | None = None, backs: Sequence[int] | None = None,
                 frozen: Iterable[int] = ()) -> None:
        self.spec = spec
        self.rot = g.rotation
        self.deg = g.degrees
        self.positions = list(positions)
        self.states = list(states) if states is not None else [a.start for a in spec.agents]
        self.backs = list(backs) if backs is not None else [0] * spec.k
        frozen = set(frozen)
        self.active = [i for i in range(spec.k) if i not in frozen]
        self.time = 0

    def halted(self) -> bool:
        return all(self.states[i] in self.spec.agents[i].halting for i in self.active)

    def key(self) -> tuple:
        return tuple(self.states), tuple(self.positions), tuple(self.backs)

    def step(self) -> list[tuple[int, int, int]]:
        """Advance one round; returns (agent, from, to) for every move."""
        snap_s = tuple(self.states)
        snap_p = tuple(self.positions)
        agents = self.spec.agents
        outs = [(i, agents[i].delta(snap_s[i], visible_vector(snap_s, snap_p, i),
                                    self.deg[snap_p[i]], self.backs[i]))
                for i in self.active]
        moved = []
        for i, (nxt, move) in outs:
            if move is not None:
                src = self.positions[i]
                self.positions[i], self.backs[i] = self.rot[src][move]
                moved.append((i, src, self.positions[i]))
            self.states[i] = nxt
        self.time += 1
        return moved


def pigeonhole_bound(spec: CooperativeAgentSpec, active: Iterable[int], n: int) -> int:
    """Number of system configurations plus one; a run this long must repeat."""
    bound = 1
    for i in active:
        bound *= len(spec.agents[i].states) * 3 * n
    return bound + 1


# --- non-cooperative trap search ---------------------------------------------------

@dataclass(frozen=True)
class NoncooperativeTrap:
    graph: PortLabeledGraph
    enter_edge: tuple[int, int]
    unused_edge: tuple[int, int]
    label: int
    evidence: dict = field(default_factory=dict, compare=False)


def _dart_closure(agent: SoloAgent, g: PortLabeledGraph, starts: Iterable[tuple]) -> tuple[set, int]:
    """Darts (vertex, port) used from any start; also the number of configurations seen."""
    rot, deg = g.rotation, g.degrees
    seen: set = set()
    darts: set = set()
    for cfg in starts:
        while cfg not in seen:
            seen.add(cfg)
            state, v, back = cfg
            nxt, move = agent.step(state, deg[v], back)
            if move is None:
                if nxt == state:
                    break
                cfg = (nxt, v, back)
                continue
            darts.add((v, move))
            w, q = rot[v][move]
            cfg = (nxt, w, q)
    return darts, len(seen)


def state_closure(agents) -> list[SoloAgent]:
    """Every agent once per state, each started in that state."""
    out = []
    for a in _solos(agents):
        for s in a.states:
            out.append(replace(a, start=s, name=f"{a.name}^{s}"))
    return out


def certify_noncooperative_trap(agents, h: PortLabeledGraph, enter: tuple[int, int],
                                unused: tuple[int, int]) -> dict | None:
    """Audit every agent in every state from both ends of ``enter``; None if the edge is used."""
    v1, v2 = enter
    v3, v4 = unused
    lab = h.edge_label(v3, v4)
    bad = {(v3, lab), (v4, lab)}
    configs = 0
    for a in state_closure(agents):
        darts, seen = _dart_closure(a, h, [(a.start, v1, 0), (a.start, v2, 0)])
        configs += seen
        if darts & bad:
            return None
    return {"configurations": configs}


def trap_candidates(seed: int = 0) -> Iterator[tuple[str, PortLabeledGraph]]:
    """Corpus graphs in every labeling for n <= 10, then seeded random graphs of growing size."""
    for n in range(4, 11, 2):
        for i, g in enumerate(cubic_classes(n)):
            for j, h in enumerate(label_variants(g)):
                yield f"cubic-n{n}-c{i}-l{j}", h
    rng = random.Random(seed)
    for i in itertools.count():
        n = 12 + 2 * (i // 8)
        yield f"random-{seed}-{i}-n{n}", random_matchings_3regular(n, rng)


def find_noncooperative_trap(agents, budget: int = 5_000, seed: int = 0) -> NoncooperativeTrap:
    """First candidate with a 0-edge {v1,v2} and an edge {v3,v4} no agent crosses from v1 or v2."""
    pool = state_closure(agents)
    for idx, (name, h) in enumerate(trap_candidates(seed)):
        if idx >= budget:
            break
        edges = sorted({(min(e.u, e.v), max(e.u, e.v), e.pu) for e in h.edges})
        for v1, v2, lab in edges:
            if lab != 0:
                continue
            used: set = set()
            configs = 0
            for a in pool:
                darts, seen = _dart_closure(a, h, [(a.start, v1, 0), (a.start, v2, 0)])
                used |= darts
                configs += seen
            for v3, v4, l in edges:
                if (v3, v4) == (v1, v2) or (v3, l) in used or (v4, l) in used:
                    continue
                return NoncooperativeTrap(h, (v1, v2), (v3, v4), l,
                                          {"candidate": idx, "source": name, "configurations": configs,
                                           "agents": len(pool)})
    raise SearchExhausted(f"no certified trap among {budget} candidates")


# --- barriers ---------------------------------------------------------------------

@dataclass(frozen=True)
class Barrier:
    graph: PortLabeledGraph
    rank: int
    u: int
    v: int
    u2: int  # u'
    v2: int  # v'
    evidence: dict = field(default_factory=dict, compare=False)
    structure: dict = field(default_factory=dict, compare=False)

    @property
    def n(self) -> int:
        return self.graph.vertex_count

    @property
    def distinguished(self) -> tuple[tuple[int, int], tuple[int, int]]:
        return (self.u, self.v), (self.u2, self.v2)

    def interior_edges(self) -> list[Edge]:
        """All edges except the two distinguished ones."""
        drop = {frozenset((self.u, self.v)), frozenset((self.u2, self.v2))}
        out = []
        for e in self.graph.edges:
            if frozenset((e.u, e.v)) in drop and e.pu == e.pv == 0:
                drop.discard(frozenset((e.u, e.v)))
                continue
            out.append(e)
        return out


def check_barrier(b: Barrier) -> list[str]:
    """Shape problems; empty when the barrier is well formed."""
    g = b.graph
    problems = []
    if not g.is_3regular() or not g.is_edge_symmetric():
        problems.append("not an edge-symmetric 3-regular graph")
    for x, y in b.distinguished:
        if g.edge_label(x, y) != 0:
            problems.append(f"distinguished edge {{{x},{y}}} is not a 0-edge")
    if len({b.u, b.v, b.u2, b.v2}) != 4:
        problems.append("distinguished edges share a vertex")
    if len(b.interior_edges()) != len(g.edges) - 2:
        problems.append("distinguished edges missing")
    return problems


def _diamond(l: int) -> list[Edge]:
    """Diamond a1..a4 -> 0..3 whose degree-2 vertices a1, a2 keep label l free."""
    return list(label_smallest_available(4, DIAMOND_PAIRS, symmetric=True,
                                         preassigned={0: {l}, 1: {l}}).edges)


def _diamond_zero_edge(l: int) -> tuple[int, int]:
    # (u, v) inside the diamond: a4-a1 for l in {1,2}; for l = 0 the edge a4-a3
    # between the two vertices not attached to H
    return (3, 0) if l else (3, 2)


def _shift(edges: Iterable[Edge], off: int) -> list[Edge]:
    return [Edge(e.u + off, e.v + off, e.pu, e.pv) for e in edges]


def _without(g: PortLabeledGraph, *pairs: tuple[int, int]) -> list[Edge]:
    drop = [frozenset(p) for p in pairs]
    out = []
    for e in g.edges:
        key = frozenset((e.u, e.v))
        if key in drop:
            drop.remove(key)
            continue
        out.append(e)
    if drop:
        raise GraphError(f"edges {sorted(map(sorted, drop))} not present")
    return out


def assemble_1barrier(trap: NoncooperativeTrap) -> Barrier:
    """Two copies of H joined across their 0-edges, the unused edges cut into diamonds.

    Layout: H at 0..n-1, H' at n..2n-1, left diamond 2n..2n+3, right diamond
    2n+4..2n+7. The right pair is named as the mirror image of the left pair,
    so that swapping the copies maps u to u' and v to v'.
    """
    h = trap.graph
    n = h.vertex_count
    (v1, v2), (v3, v4), l = trap.enter_edge, trap.unused_edge, trap.label
    inner = _without(h, (v1, v2), (v3, v4))
    edges = inner + _shift(inner, n)
    edges += [Edge(v1, v1 + n, 0, 0), Edge(v2, v2 + n, 0, 0)]
    left, right = 2 * n, 2 * n + 4
    diamond = _diamond(l)
    edges += _shift(diamond, left) + _shift(diamond, right)
    edges += [Edge(v3, left, l, l), Edge(v4, left + 1, l, l),
              Edge(v3 + n, right, l, l), Edge(v4 + n, right + 1, l, l)]
    du, dv = _diamond_zero_edge(l)
    g = PortLabeledGraph(2 * n + 8, tuple(edges))
    structure = {"kind": "1-barrier", "h_vertices": n, "enter_edge": list(trap.enter_edge),
                 "unused_edge": list(trap.unused_edge), "cut_label": l,
                 "zero_case": l == 0, "search": dict(trap.evidence)}
    return Barrier(g, 1, left + du, left + dv, right + du, right + dv, {}, structure)


def build_1barrier(agents, *, budget: int = 5_000, seed: int = 0, verify: bool = True,
                   max_steps: int = DEFAULT_MAX_STEPS) -> Barrier:
    """A 1-barrier for ``agents`` in any starting states, from a certified trap search."""
    trap = find_noncooperative_trap(agents, budget, seed)
    b = assemble_1barrier(trap)
    if verify:
        ev = verify_barrier(b, as_cooperative(agents), 1, max_steps=max_steps)
        b = replace(b, evidence=ev.to_document())
    return b


def attach(g: PortLabeledGraph, b: Barrier) -> PortLabeledGraph:
    """Cut the two lexicographically least 0-edges of g and bridge them into b.

    Barrier vertices are shifted by ``g.vertex_count``. The first cut edge
    (x < y) is bridged x-u, y-v; the second x'-u', y'-v'.
    """
    zeros = sorted((min(e.u, e.v), max(e.u, e.v)) for e in g.edges if e.pu == e.pv == 0)
    if len(zeros) < 2:
        raise GraphError("attach needs at least two 0-labeled edges in g")
    (x1, y1), (x2, y2) = zeros[:2]
    off = g.vertex_count
    edges = _without(g, (x1, y1), (x2, y2)) + _shift(b.interior_edges(), off)
    edges += [Edge(x1, b.u + off, 0, 0), Edge(y1, b.v + off, 0, 0),
              Edge(x2, b.u2 + off, 0, 0), Edge(y2, b.v2 + off, 0, 0)]
    return PortLabeledGraph(off + b.n, tuple(edges))


# --- gadget substitution ------------------------------------------------------------

@dataclass(frozen=True)
class GadgetGraph:
    graph: PortLabeledGraph
    base: PortLabeledGraph
    barrier: Barrier
    macro_map: VertexMap  # base vertex -> its two copies
    gadget_of: tuple[int, ...]  # per vertex: index into ``gadgets`` or -1
    barrier_copy: tuple[int, ...]  # per vertex: embedded barrier copy id or -1
    gadgets: tuple[tuple[int, int, int], ...]  # (a, b, label) per replaced base edge
    kept: tuple[tuple[int, int], ...]

    @property
    def half(self) -> int:
        return self.graph.vertex_count // 2

    def macro_of(self, x: int) -> int | None:
        base = x % self.half
        return base if base < self.base.vertex_count else None

    def neighborhood_gadgets(self, v: int) -> frozenset[int]:
        return frozenset(i for i, (a, b, _) in enumerate(self.gadgets) if v in (a, b))


def gadget_vertex_count(n_base: int, n_barrier: int) -> int:
    """Vertices of G(B) when every edge of a 3-regular base graph becomes a gadget."""
    return 2 * (n_base + (3 * n_base // 2) * (n_barrier + 8))


def _gadget_edges(a: int, b: int, l: int, off: int, barrier: Barrier) -> list[Edge]:
    w1, w2, w3, w4 = off, off + 1, off + 2, off + 3
    x1, x2, x3, x4 = off + 4, off + 5, off + 6, off + 7
    bo = off + 8
    edges = _shift(barrier.interior_edges(), bo)
    edges += [Edge(barrier.u + bo, w1, 0, 0), Edge(barrier.v + bo, w3, 0, 0),
              Edge(w4, w3, 1, 1), Edge(w1, w4, 2, 2),
              Edge(barrier.u2 + bo, x1, 0, 0), Edge(barrier.v2 + bo, x3, 0, 0),
              Edge(x3, x4, 1, 1), Edge(x4, x1, 2, 2)]
    for hub, ring in ((w2, (w4, w1, w3)), (x2, (x4, x1, x3))):
        # ring[j] is joined to the hub by label j; the label-l spoke is left out
        edges += [Edge(hub, ring[j], j, j) for j in range(3) if j != l]
    edges += [Edge(a, w2, l, l), Edge(b, x2, l, l)]
    return edges


def build_gadget_graph(g: PortLabeledGraph, b: Barrier,
                       keep: Iterable[tuple[int, int]] = ()) -> GadgetGraph:
    """Replace every edge of g by B(l), then take the 3-regular extension.

    Edges listed in ``keep`` stay plain; r-barriers use this for their own
    distinguished edges.
    """
    n = g.vertex_count
    keep_set = {frozenset(p) for p in keep}
    block = b.n + 8
    edges: list[Edge] = []
    gadgets = []
    kept = []
    for e in sorted(g.edges, key=lambda e: e.key()):
        lo, hi = sorted((e.u, e.v))
        if frozenset((lo, hi)) in keep_set:
            keep_set.discard(frozenset((lo, hi)))
            kept.append((lo, hi))
            edges.append(Edge(lo, hi, e.pu, e.pv))
            continue
        off = n + len(gadgets) * block
        edges += _gadget_edges(lo, hi, e.pu, off, b)
        gadgets.append((lo, hi, e.pu))
    total = n + len(gadgets) * block
    ext, _ = regular_extension(PortLabeledGraph(total, tuple(edges)))
    gadget_of = [-1] * n + [i for i in range(len(gadgets)) for _ in range(block)]
    copy = [-1] * n + [i if j >= 8 else -1 for i in range(len(gadgets)) for j in range(block)]
    gadget_of = gadget_of + gadget_of
    copy = copy + [c + len(gadgets) if c >= 0 else -1 for c in copy]
    forward = {v: (v, v + total) for v in range(n)}
    return GadgetGraph(ext, g, b, VertexMap(forward, "macro"), tuple(gadget_of), tuple(copy),
                       tuple(gadgets), tuple(kept))


def min_barriers_crossed(gg: GadgetGraph, sources: Iterable[int], targets: Iterable[int]) -> int | None:
    """Fewest embedded barrier copies any path from sources to targets passes through (0-1 BFS)."""
    g = gg.graph
    rot = g.rotation
    copy = gg.barrier_copy
    inf = float("inf")
    dist = [inf] * g.vertex_count
    dq: deque = deque()
    for s in sources:
        d0 = 1 if copy[s] >= 0 else 0
        if d0 < dist[s]:
            dist[s] = d0
            (dq.appendleft if d0 == 0 else dq.append)(s)
    while dq:
        x = dq.popleft()
        for y, _ in rot[x]:
            w = 1 if copy[y] >= 0 and copy[y] != copy[x] else 0
            if dist[x] + w < dist[y]:
                dist[y] = dist[x] + w
                (dq.appendleft if w == 0 else dq.append)(y)
    best = min((dist[t] for t in targets), default=inf)
    return None if best == inf else int(best)


# --- relative configurations and macro traces -------------------------------------

@dataclass(frozen=True)
class RelativeConfiguration:
    agents: tuple[tuple[Hashable, int, tuple[int, ...] | None], ...]  # (state, back, path)


def shortest_label_paths(g: PortLabeledGraph, ref: int, targets: Iterable[int]) -> dict[int, tuple[int, ...]]:
    """Lexicographically least shortest label sequence from ref to each target.

    Breadth-first search in port order: within a level the queue is sorted by
    path, so the first discovery of a vertex comes through its least path.
    """
    want = set(targets) - {ref}
    paths: dict[int, tuple[int, ...]] = {ref: ()}
    queue = deque([ref])
    rot = g.rotation
    while queue and want:
        x = queue.popleft()
        for port, (y, _) in enumerate(rot[x]):
            if y not in paths:
                paths[y] = paths[x] + (port,)
                want.discard(y)
                queue.append(y)
    missing = set(targets) - set(paths)
    if missing:
        raise GraphError(f"vertices {sorted(missing)} unreachable from {ref}")
    return {t: paths[t] for t in targets}


def relative_configuration(g: PortLabeledGraph, ref: int, states: Sequence, positions: Sequence[int],
                           backs: Sequence[int]) -> RelativeConfiguration:
    paths = shortest_label_paths(g, ref, set(positions))
    return RelativeConfiguration(tuple(
        (s, b, None if p == ref else paths[p]) for s, p, b in zip(states, positions, backs)))


def place(g: PortLabeledGraph, ref: int, config: RelativeConfiguration) -> tuple[list, list[int], list[int]]:
    """States, positions and backs realizing ``config`` around ``ref``."""
    rot = g.rotation
    positions = []
    for _, _, path in config.agents:
        x = ref
        for p in path or ():
            x = rot[x][p][0]
        positions.append(x)
    return [s for s, _, _ in config.agents], positions, [b for _, b, _ in config.agents]


@dataclass
class MacroTrace:
    macro_vertices: list[int]
    labels: list[int]
    entry_times: list[int]
    configurations: list[RelativeConfiguration]
    end: str = "budget"  # halted, periodic or budget
    steps: int = 0
    locality_violations: int = 0
    simultaneous_events: int = 0


def _locality_ok(gg: GadgetGraph, current: int, positions: Sequence[int]) -> bool:
    near = gg.neighborhood_gadgets(current)
    for x in positions:
        m = gg.macro_of(x)
        if m == current or (m is None and gg.gadget_of[x] in near):
            continue
        return False
    return True


def _advance_to_event(gg: GadgetGraph, sim: Lockstep, current: int, budget: int,
                      check_locality: bool = False) -> tuple[str, int | None, int | None, int]:
    """Step until an agent reaches a macro vertex other than ``current``.

    Returns (outcome, agent vertex, new macro vertex, locality violations).
    """
    seen: dict = {}
    violations = 0
    while sim.time < budget:
        if sim.halted():
            return "halted", None, None, violations
        key = sim.key()
        if key in seen:
            return "periodic", None, None, violations
        seen[key] = sim.time
        hits = []
        for i, _, dst in sim.step():
            m = gg.macro_of(dst)
            if m is not None and m != current:
                hits.append((i, dst, m))
        if check_locality and not _locality_ok(gg, current, sim.positions):
            violations += 1
        if hits:
            i, dst, m = min(hits)
            return ("event" if len({h[2] for h in hits}) == 1 else "event-split"), dst, m, violations
    return "budget", None, None, violations


def macro_trace(spec: CooperativeAgentSpec, gg: GadgetGraph, start_macro: int = 0,
                budget: int = 100_000) -> MacroTrace:
    """Macro vertices, labels, entry times and relative configurations of a joint run."""
    g = gg.graph
    ref = start_macro
    sim = Lockstep(spec, g, [ref] * spec.k)
    trace = MacroTrace([start_macro], [], [0],
                       [relative_configuration(g, ref, sim.states, sim.positions, sim.backs)])
    current = start_macro
    while True:
        outcome, dst, m, bad = _advance_to_event(gg, sim, current, budget, check_locality=True)
        trace.locality_violations += bad
        if dst is None:
            trace.end = outcome
            break
        if outcome == "event-split":
            trace.simultaneous_events += 1
        trace.labels.append(gg.base.edge_label(current, m))
        trace.macro_vertices.append(m)
        trace.entry_times.append(sim.time)
        trace.configurations.append(relative_configuration(g, dst, sim.states, sim.positions, sim.backs))
        current = m
    trace.steps = sim.time
    return trace


# --- macro agents ------------------------------------------------------------------

@dataclass(frozen=True)
class MacroAgentSpec:
    agent: AgentSpec
    alpha: int
    configurations: tuple[RelativeConfiguration, ...]
    transitions: tuple[tuple[int, int] | None, ...]  # per state: (label, next state) or absorbing
    subset: tuple[int, ...]
    evidence: dict = field(default_factory=dict, compare=False)


def _macro_step(gg: GadgetGraph, spec: CooperativeAgentSpec, config: RelativeConfiguration,
                budget: int) -> tuple[int, RelativeConfiguration] | None:
    g = gg.graph
    ref = 0
    states, positions, backs = place(g, ref, config)
    sim = Lockstep(spec, g, positions, states, backs)
    outcome, dst, m, _ = _advance_to_event(gg, sim, ref, budget)
    if outcome == "budget":
        raise CapExceeded(f"no macro event or repetition within {budget} steps")
    if dst is None:
        return None
    if outcome == "event-split":
        raise MacroInconsistency("agents reached two different macro vertices at once")
    return gg.base.edge_label(ref, m), relative_configuration(g, dst, sim.states, sim.positions, sim.backs)


def derive_macro_agent(spec: CooperativeAgentSpec, subset: Sequence[int], b: Barrier, *,
                       cap: int = DEFAULT_ALPHA_CAP, step_budget: int = 200_000,
                       probes: Sequence[str] = PROBE_BASES, debug: bool = True) -> MacroAgentSpec:
    """Tabulate the subset's configurations at macro entries into a single agent.

    Roots are all state vectors with every member at the reference macro
    vertex. With ``debug`` every transition is recomputed on the other probe
    bases and must agree.
    """
    sub = restrict(spec, subset)
    probe_graphs = [build_gadget_graph(generate(p), b) for p in probes]
    main = probe_graphs[0]
    roots = [RelativeConfiguration(tuple((s, 0, None) for s in vec))
             for vec in itertools.product(*(a.states for a in sub.agents))]
    index: dict[RelativeConfiguration, int] = {}
    order: list[RelativeConfiguration] = []
    trans: list = []
    queue = deque()
    for r in roots:
        if r not in index:
            index[r] = len(order)
            order.append(r)
            queue.append(r)
    checks = 0
    while queue:
        x = queue.popleft()
        out = _macro_step(main, sub, x, step_budget)
        if debug:
            for other in probe_graphs[1:]:
                if _macro_step(other, sub, x, step_budget) != out:
                    raise MacroInconsistency(f"probes disagree on configuration #{index[x]}")
                checks += 1
        if out is None:
            trans.append(None)
            continue
        label, y = out
        if y not in index:
            if len(order) >= cap:
                raise CapExceeded(f"more than {cap} macro configurations")
            index[y] = len(order)
            order.append(y)
            queue.append(y)
        trans.append((label, index[y]))
    alpha = len(order)
    table = tuple(trans)
    start_root = RelativeConfiguration(tuple((a.start, 0, None) for a in sub.agents))

    def rule(s, d, back, carried, here):
        if d != 3 or carried or here:
            return None
        t = table[s]
        return Transition(s, None) if t is None else Transition(t[1], t[0])

    agent = agent_from_rule(tuple(range(alpha)), (), index[start_root], rule,
                            name="macro" + "".join(f"-{i}" for i in subset))
    evidence = {"alpha": alpha, "absorbing": sum(t is None for t in table), "probes": list(probes),
                "cross_checks": checks, "roots": len(roots)}
    return MacroAgentSpec(agent, alpha, tuple(order), table, tuple(subset), evidence)


# --- r-barriers ---------------------------------------------------------------------

def _end_diamond() -> list[Edge]:
    # a1..a4 -> 0..3 with a2, a3 left open for the chain; a1-a4 is the 0-edge
    return [Edge(0, 3, 0, 0), Edge(0, 1, 1, 1), Edge(0, 2, 2, 2), Edge(3, 1, 2, 2), Edge(3, 2, 1, 1)]


def chain_barriers(parts: Sequence[Barrier]) -> tuple[PortLabeledGraph, tuple[int, int], tuple[int, int]]:
    """Link 1-barriers in a row between two end diamonds; returns the graph and its end 0-edges."""
    edges: list[Edge] = []
    offs = []
    off = 4
    for p in parts:
        offs.append(off)
        edges += _shift(p.interior_edges(), off)
        off += p.n
    right = off
    edges += _end_diamond() + _shift(_end_diamond(), right)
    # left end: a3 to the first u, a2 to the first v; right end mirrored
    edges += [Edge(2, parts[0].u + offs[0], 0, 0), Edge(1, parts[0].v + offs[0], 0, 0)]
    for p, q, po, qo in zip(parts, parts[1:], offs, offs[1:]):
        edges += [Edge(p.u2 + po, q.u + qo, 0, 0), Edge(p.v2 + po, q.v + qo, 0, 0)]
    last, lo = parts[-1], offs[-1]
    edges += [Edge(right + 2, last.u2 + lo, 0, 0), Edge(right + 1, last.v2 + lo, 0, 0)]
    g = PortLabeledGraph(right + 4, tuple(edges))
    return g, (3, 0), (right + 3, right)


def build_rbarrier(agents, r: int, *, cap: int = DEFAULT_ALPHA_CAP, budget: int = 5_000, seed: int = 0,
                   verify: bool = True, max_steps: int = DEFAULT_MAX_STEPS,
                   lower: Barrier | None = None, debug: bool = True) -> Barrier:
    """Rank-r barrier: chain the 1-barriers of every r-subset's macro agent and substitute."""
    spec = as_cooperative(agents)
    if r < 1 or r > spec.k:
        raise ValueError(f"rank {r} outside 1..{spec.k}")
    if r == 1:
        return build_1barrier(spec, budget=budget, seed=seed, verify=verify, max_steps=max_steps)
    if lower is None:
        lower = build_rbarrier(spec, r - 1, cap=cap, budget=budget, seed=seed, verify=verify,
                               max_steps=max_steps, debug=debug)
    subsets = list(itertools.combinations(range(spec.k), r))
    macros = [derive_macro_agent(spec, s, lower, cap=cap, debug=debug) for s in subsets]
    parts = [build_1barrier([m], budget=budget, seed=seed, verify=False) for m in macros]
    h, (lu, lv), (ru, rv) = chain_barriers(parts)
    gg = build_gadget_graph(h, lower, keep=[(lu, lv), (ru, rv)])
    g = gg.graph
    alpha_max = max(m.alpha for m in macros)
    n_h = h.vertex_count
    expected = 2 * (n_h + (3 * n_h // 2 - 2) * (lower.n + 8))
    structure = {
        "kind": "r-barrier", "rank": r, "chain": len(parts), "subsets": [list(s) for s in subsets],
        "alpha": [m.alpha for m in macros], "part_vertices": [p.n for p in parts],
        "h_vertices": n_h, "lower_vertices": lower.n, "expected_vertices": expected,
        "min_barriers_crossed": min_barriers_crossed(gg, (lu, lv), (ru, rv)),
        "size_constant": g.vertex_count / (len(parts) * lower.n * alpha_max ** 2),
        "macro": [m.evidence for m in macros],
    }
    b = Barrier(g, r, lu, lv, ru, rv, {}, structure)
    if verify:
        b = replace(b, evidence=verify_barrier(b, spec, r, max_steps=max_steps).to_document())
    return b


# --- verifiers ----------------------------------------------------------------------

PROBE_NOTE = "verdict covers the named probe graph only"


@dataclass
class BarrierEvidence:
    verdict: str  # verified, counterexample or inconclusive
    rank: int
    probe: str
    runs: list[dict] = field(default_factory=list)
    counterexample: dict | None = None

    def to_document(self) -> dict:
        return {"verdict": self.verdict, "rank": self.rank, "probe": self.probe, "note": PROBE_NOTE,
                "runs": self.runs, "counterexample": self.counterexample}


def _barrier_run(spec: CooperativeAgentSpec, g: PortLabeledGraph, subset: tuple[int, ...], states: tuple,
                 entries: tuple[int, ...], park: int, sides: dict[int, str], inside: Callable[[int], bool],
                 start_side: str, max_steps: int, split_check: bool) -> dict:
    positions = [park] * spec.k
    all_states = [a.start for a in spec.agents]
    for i, s, x in zip(subset, states, entries):
        positions[i] = x
        all_states[i] = s
    frozen = [i for i in range(spec.k) if i not in subset]
    sim = Lockstep(spec, g, positions, all_states, None, frozen)
    bound = pigeonhole_bound(spec, subset, g.vertex_count)
    last_exit: dict[int, str] = {}
    entered = {i: start_side for i in subset}  # side of each agent's latest entry
    seen: dict = {}
    record = {"subset": list(subset), "states": list(states), "entries": list(entries), "side": start_side}
    while sim.time < max_steps:
        if sim.halted():
            return {**record, "outcome": "halted", "steps": sim.time}
        key = sim.key()
        if key in seen:
            return {**record, "outcome": "periodic", "preperiod": seen[key], "period": sim.time - seen[key],
                    "steps": sim.time, "bound": bound}
        seen[key] = sim.time
        for i, src, dst in sim.step():
            if not inside(src) and inside(dst):
                entered[i] = sides[dst]
                continue
            side = sides.get(dst)
            if not split_check and inside(src) and side is not None and side != entered[i]:
                return {**record, "outcome": "crossed", "agent": i, "time": sim.time, "vertex": dst}
            if inside(src) and not inside(dst):
                last_exit[i] = (sides[src], entered[i])
        if split_check and not any(inside(sim.positions[i]) for i in subset):
            # an episode ends when the whole subset is outside again; agents that
            # only bounced back out do not split the subset unless someone crossed
            ends = {ex for ex, _ in last_exit.values()}
            if len(ends) > 1 and any(ex != en for ex, en in last_exit.values()):
                return {**record, "outcome": "split", "exits": {i: ex for i, (ex, _) in last_exit.items()},
                        "time": sim.time}
            last_exit.clear()
    return {**record, "outcome": "inconclusive", "steps": sim.time, "bound": bound}


def verify_barrier(b: Barrier, agents, r: int, *, max_steps: int = DEFAULT_MAX_STEPS,
                   base: str = "k4") -> BarrierEvidence:
    """Pigeonhole check of both barrier properties on ``attach(base, b)``.

    Agents outside the probing subset are parked, frozen, on base vertex 0.
    Property 1: no agent of a subset of size <= r reaches the far end inside
    the barrier, measured from its latest entry. Property 2: whenever the
    whole (r+1)-subset is outside again after some member crossed, its latest
    exits share one end.
    """
    spec = as_cooperative(agents)
    host = generate(base)
    g = attach(host, b)
    off = host.vertex_count
    left = (b.u + off, b.v + off)
    right = (b.u2 + off, b.v2 + off)
    sides = {left[0]: "L", left[1]: "L", right[0]: "R", right[1]: "R"}

    def inside(x: int) -> bool:
        return x >= off

    ev = BarrierEvidence("verified", r, f"attach({base}, barrier)")
    sizes = [(size, False) for size in range(1, min(r, spec.k) + 1)]
    if r + 1 <= spec.k:
        sizes.append((r + 1, True))
    inconclusive = False
    for size, split in sizes:
        for subset in itertools.combinations(range(spec.k), size):
            for states in itertools.product(*(spec.agents[i].states for i in subset)):
                for side, pair in (("L", left), ("R", right)):
                    for entries in itertools.product(pair, repeat=size):
                        run = _barrier_run(spec, g, subset, states, entries, 0, sides, inside, side,
                                           max_steps, split)
                        ev.runs.append(run)
                        if run["outcome"] in ("crossed", "split"):
                            ev.verdict = "counterexample"
                            ev.counterexample = run
                            return ev
                        inconclusive |= run["outcome"] == "inconclusive"
    if inconclusive:
        ev.verdict = "inconclusive"
    return ev


@dataclass
class TrapEvidence:
    verdict: str  # trapped, explored or inconclusive
    steps: int
    preperiod: int | None = None
    period: int | None = None
    unvisited: tuple[int, ...] = ()
    visited: int = 0
    reconfirmed: bool = False
    bound: int = 0

    def to_document(self) -> dict:
        return {"verdict": self.verdict, "steps": self.steps, "preperiod": self.preperiod,
                "period": self.period, "unvisited_count": len(self.unvisited),
                "unvisited": list(self.unvisited), "visited": self.visited,
                "reconfirmed": self.reconfirmed, "pigeonhole_bound": self.bound}


def verify_trap(g: PortLabeledGraph, agents, start: int, *, max_steps: int = DEFAULT_MAX_STEPS) -> TrapEvidence:
    """Run the whole set until its configuration repeats; trapped iff a vertex is still unvisited.

    A trapped verdict is re-checked by running twice the period further.
    """
    spec = as_cooperative(agents)
    n = g.vertex_count
    sim = Lockstep(spec, g, [start] * spec.k)
    bound = pigeonhole_bound(spec, range(spec.k), n)
    visited = {start}
    seen: dict = {}
    while sim.time < max_steps:
        if len(visited) == n:
            return TrapEvidence("explored", sim.time, visited=n, bound=bound)
        if sim.halted():
            unvisited = tuple(sorted(set(range(n)) - visited))
            return TrapEvidence("trapped", sim.time, sim.time, 0, unvisited, len(visited), True, bound)
        key = sim.key()
        if key in seen:
            pre, period = seen[key], sim.time - seen[key]
            unvisited = tuple(sorted(set(range(n)) - visited))
            ok = _reconfirm(sim, visited, key, period)
            return TrapEvidence("trapped" if ok else "inconclusive", sim.time, pre, period, unvisited,
                                len(visited), ok, bound)
        seen[key] = sim.time
        for _, _, dst in sim.step():
            visited.add(dst)
    return TrapEvidence("inconclusive", sim.time, visited=len(visited), bound=bound)


def _reconfirm(sim: Lockstep, visited: set, key: tuple, period: int) -> bool:
    before = len(visited)
    for t in range(2 * period):
        for _, _, dst in sim.step():
            visited.add(dst)
        if (t + 1) % period == 0 and sim.key() != key:
            return False
    return len(visited) == before


# --- traps --------------------------------------------------------------------------

@dataclass(frozen=True)
class Trap:
    graph: PortLabeledGraph
    start: int
    barrier: Barrier
    structure: dict = field(default_factory=dict, compare=False)


def assemble_trap(b: Barrier) -> Trap:
    """Two barrier copies and a 4-vertex block; agents start at the block vertex v0."""
    n = b.n
    inner = b.interior_edges()
    edges = inner + _shift(inner, n)
    a1, a2, a3, a4 = 2 * n, 2 * n + 1, 2 * n + 2, 2 * n + 3
    edges += [Edge(a1, a2, 1, 1), Edge(a1, a3, 2, 2), Edge(a2, a4, 2, 2), Edge(a3, a4, 1, 1)]
    u1, v1, u1p, v1p = b.u, b.v, b.u2, b.v2
    u2, v2, u2p, v2p = b.u + n, b.v + n, b.u2 + n, b.v2 + n
    edges += [Edge(u1, a3, 0, 0), Edge(v1, a4, 0, 0), Edge(a1, v2, 0, 0), Edge(a2, u2, 0, 0),
              Edge(u1p, v2p, 0, 0), Edge(v1p, u2p, 0, 0)]
    g = PortLabeledGraph(2 * n + 4, tuple(edges))
    return Trap(g, a3, b, {"barrier_vertices": n, "vertices": 2 * n + 4, "far_side": [u1p, v1p]})


def build_trap(agents, *, cap: int = DEFAULT_ALPHA_CAP, budget: int = 5_000, seed: int = 0,
               verify_barriers: bool = False, max_steps: int = DEFAULT_MAX_STEPS) -> Trap:
    spec = as_cooperative(agents)
    b = build_rbarrier(spec, spec.k, cap=cap, budget=budget, seed=seed, verify=verify_barriers,
                       max_steps=max_steps)
    return assemble_trap(b)


def barrier_document(b: Barrier) -> dict:
    return {"rank": b.rank, "vertices": b.n, "distinguished": [list(p) for p in b.distinguished],
            "structure": b.structure, "evidence": b.evidence}


def trap_structure_audit(t: Trap) -> dict:
    """Exact counts for the suite: 2n+4 and the 0-labels on the block bridges."""
    g, n = t.graph, t.barrier.n
    a1, a2, a3, a4 = 2 * n, 2 * n + 1, 2 * n + 2, 2 * n + 3
    return {
        "vertices": g.vertex_count, "expected": 2 * n + 4,
        "block_labels": [g.edge_label(a1, a2), g.edge_label(a1, a3), g.edge_label(a2, a4), g.edge_label(a3, a4)],
        "bridge_labels": [g.edge_label(t.barrier.u, a3), g.edge_label(t.barrier.v, a4),
                          g.edge_label(a1, t.barrier.v + n), g.edge_label(a2, t.barrier.u + n)],
    }


def chain_length(k: int, r: int) -> int:
    return comb(k, r)
