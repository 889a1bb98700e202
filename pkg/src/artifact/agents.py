"""Execution semantics for finite agents, cooperating agent sets and pebble machines.

Vertex ids never reach a transition function: every lookup key is built from
states, the degree, the arrival port and pebble sets only.
"""
from __future__ import annotations

import csv
import io
import itertools
import random
import struct
from collections.abc import Mapping
from dataclasses import dataclass, field
from typing import Callable, Hashable, Iterable, Iterator, Protocol, Sequence

from .graph import PortLabeledGraph

Pebbles = frozenset
EMPTY: frozenset[int] = frozenset()
CARRIED = -1


class UndefinedTransition(KeyError):
    """A transition table has no entry for the observed input."""

    def __init__(self, who: str, key: tuple) -> None:
        super().__init__(f"{who}: no transition for {key!r}")
        self.key = key


class WatchdogExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class Transition:
    state: Hashable
    move: int | None
    carried: frozenset[int] = EMPTY
    here: frozenset[int] = EMPTY


AgentKey = tuple  # (state, degree, back, carried, here)


class RuleTable(Mapping):
    """A transition table computed on demand from a rule and cached.

    ``domain`` enumerates the keys the table is defined on; lookups outside
    the domain, or for which the rule returns ``None``, are missing entries.
    """

    def __init__(self, rule: Callable[..., object], domain: Callable[[], Iterable[tuple]]):
        self._rule = rule
        self._domain = domain
        self._cache: dict[tuple, object] = {}

    def __getitem__(self, key: tuple) -> object:
        if key in self._cache:
            return self._cache[key]
        out = self._rule(*key)
        if out is None:
            raise KeyError(key)
        self._cache[key] = out
        return out

    def __iter__(self) -> Iterator[tuple]:
        for key in self._domain():
            try:
                self[key]
            except KeyError:
                continue
            yield key

    def __len__(self) -> int:
        return sum(1 for _ in self)


def pebble_splits(pebbles: Iterable[int]) -> Iterator[tuple[frozenset[int], frozenset[int]]]:
    """Every way to split ``pebbles`` into (carried, here) plus pebbles elsewhere."""
    pebs = sorted(pebbles)
    for assign in itertools.product((0, 1, 2), repeat=len(pebs)):
        carried = frozenset(p for p, a in zip(pebs, assign) if a == 1)
        here = frozenset(p for p, a in zip(pebs, assign) if a == 2)
        yield carried, here


@dataclass(frozen=True)
class AgentSpec:
    states: tuple
    halting: frozenset
    start: Hashable
    pebbles: int
    table: Mapping
    degrees: tuple[int, ...] = (3,)
    name: str = "agent"

    @property
    def pebble_set(self) -> frozenset[int]:
        return frozenset(range(1, self.pebbles + 1))

    def delta(self, state, degree: int, back: int, carried: frozenset, here: frozenset) -> Transition:
        key = (state, degree, back, carried, here)
        try:
            out = self.table[key]
        except KeyError:
            raise UndefinedTransition(self.name, key) from None
        if carried & here:
            raise UndefinedTransition(self.name, key)
        if out.carried | out.here != carried | here or out.carried & out.here:
            raise ValueError(f"{self.name}: transition {key!r} -> {out!r} breaks pebble conservation")
        if out.move is not None and not 0 <= out.move < degree:
            raise ValueError(f"{self.name}: move {out.move} at a vertex of degree {degree}")
        return out

    def domain(self) -> Iterator[AgentKey]:
        for d in self.degrees:
            for s in self.states:
                for back in range(d):
                    for carried, here in pebble_splits(self.pebble_set):
                        yield (s, d, back, carried, here)

    def with_start(self, start: Hashable) -> "AgentSpec":
        return AgentSpec(self.states, self.halting, start, self.pebbles, self.table,
                         self.degrees, f"{self.name}@{start}")


def agent_from_rule(
    states: Sequence,
    halting: Iterable,
    start: Hashable,
    rule: Callable[..., Transition | None],
    *,
    pebbles: int = 0,
    degrees: tuple[int, ...] = (3,),
    name: str = "agent",
) -> AgentSpec:
    spec_holder: dict[str, AgentSpec] = {}

    def domain() -> Iterator[tuple]:
        return spec_holder["spec"].domain()

    table = RuleTable(rule, domain)
    spec = AgentSpec(tuple(states), frozenset(halting), start, pebbles, table, degrees, name)
    spec_holder["spec"] = spec
    return spec


@dataclass(frozen=True)
class CooperativeAgent:
    """One member of a cooperating set; keys are (state, visible, degree, back)."""

    states: tuple
    halting: frozenset
    start: Hashable
    table: Mapping
    name: str = "member"

    def delta(self, state, visible: tuple, degree: int, back: int) -> tuple[Hashable, int | None]:
        key = (state, visible, degree, back)
        try:
            nxt, move = self.table[key]
        except KeyError:
            raise UndefinedTransition(self.name, key) from None
        if move is not None and not 0 <= move < degree:
            raise ValueError(f"{self.name}: move {move} at a vertex of degree {degree}")
        return nxt, move


@dataclass(frozen=True)
class CooperativeAgentSpec:
    agents: tuple[CooperativeAgent, ...]

    @property
    def k(self) -> int:
        return len(self.agents)


def cooperative_from_rules(members: Sequence[tuple[Sequence, Iterable, Hashable, Callable]],
                           names: Sequence[str] | None = None) -> CooperativeAgentSpec:
    agents = []
    for i, (states, halting, start, rule) in enumerate(members):
        table = RuleTable(rule, lambda: iter(()))
        agents.append(CooperativeAgent(tuple(states), frozenset(halting), start, table,
                                       names[i] if names else f"member{i}"))
    return CooperativeAgentSpec(tuple(agents))


# --- traces ----------------------------------------------------------------

@dataclass(frozen=True)
class SystemConfiguration:
    agents: tuple[tuple[Hashable, int, int], ...]  # (state, position, back) per agent
    pebbles: tuple[int, ...] = ()  # position per pebble, CARRIED if carried (single agent)


@dataclass(frozen=True)
class Event:
    step: int
    agent: int
    kind: str  # move, stay, compute
    vertex: int
    state: Hashable
    back: int
    target: int | None = None


@dataclass
class Trace:
    events: list[Event] = field(default_factory=list)
    configurations: list[SystemConfiguration] = field(default_factory=list)
    walks: dict[int, list[int]] = field(default_factory=dict)
    traversals: int = 0
    compute_steps: int = 0
    steps: int = 0
    halted: bool = False
    clamp_events: int = 0
    tape_snapshots: list[tuple[int, ...]] = field(default_factory=list)
    notes: dict = field(default_factory=dict)

    def visited(self, agent: int | None = None) -> set[int]:
        if agent is not None:
            return set(self.walks.get(agent, ()))
        out: set[int] = set()
        for w in self.walks.values():
            out.update(w)
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["step", "agent", "kind", "vertex", "state", "back", "target"])
        for e in self.events:
            writer.writerow([e.step, e.agent, e.kind, e.vertex, e.state, e.back,
                             "" if e.target is None else e.target])
        return buf.getvalue()

    def to_binary(self) -> bytes:
        """Compact form: one little-endian (step, agent, kind, vertex, target) record per event."""
        kinds = {"move": 0, "stay": 1, "compute": 2}
        out = bytearray(b"TRC1")
        for e in self.events:
            out += struct.pack("<IHBii", e.step, e.agent, kinds[e.kind], e.vertex,
                               -1 if e.target is None else e.target)
        return bytes(out)


@dataclass(frozen=True)
class Period:
    preperiod: int
    period: int


def detect_period(trace: Trace | Sequence[SystemConfiguration]) -> Period | None:
    configs = trace.configurations if isinstance(trace, Trace) else trace
    seen: dict[SystemConfiguration, int] = {}
    for t, c in enumerate(configs):
        if c in seen:
            return Period(seen[c], t - seen[c])
        seen[c] = t
    return None


# --- single agent -----------------------------------------------------------

def run_single(agent: AgentSpec, g: PortLabeledGraph, start: int, max_steps: int,
               *, record: bool = True) -> Trace:
    rot = g.rotation
    deg = g.degrees
    pebble_ids = sorted(agent.pebble_set)
    where = {p: CARRIED for p in pebble_ids}
    state, pos, back = agent.start, start, 0
    trace = Trace(walks={0: [pos]})

    def snapshot() -> SystemConfiguration:
        return SystemConfiguration(((state, pos, back),), tuple(where[p] for p in pebble_ids))

    if record:
        trace.configurations.append(snapshot())
    for t in range(max_steps):
        if state in agent.halting:
            trace.halted = True
            break
        carried = frozenset(p for p in pebble_ids if where[p] == CARRIED)
        here = frozenset(p for p in pebble_ids if where[p] == pos)
        d = deg[pos]
        tr = agent.delta(state, d, back, carried, here)
        for p in tr.carried:
            where[p] = CARRIED
        for p in tr.here:
            where[p] = pos
        src = pos
        if tr.move is not None:
            pos, back = rot[pos][tr.move]
            trace.traversals += 1
            trace.walks[0].append(pos)
        state = tr.state
        trace.steps += 1
        if record:
            trace.events.append(Event(t, 0, "stay" if tr.move is None else "move", src,
                                      state, back, None if tr.move is None else pos))
            trace.configurations.append(snapshot())
    else:
        trace.halted = state in agent.halting
    trace.notes["final"] = {"state": state, "position": pos, "back": back,
                            "pebbles": dict(where)}
    return trace


# --- cooperating agents ---------------------------------------------------------

def visible_vector(states: Sequence, positions: Sequence[int], i: int) -> tuple:
    return tuple(
        states[j] if positions[j] == positions[i] else None
        for j in range(len(states)) if j != i
    )


def run_cooperative(spec: CooperativeAgentSpec, g: PortLabeledGraph, start: int | Sequence[int],
                    max_steps: int, *, record: bool = True,
                    initial_states: Sequence | None = None,
                    initial_backs: Sequence[int] | None = None) -> Trace:
    """Synchronous run; observations in a step come from the pre-step snapshot.

    ``start`` may give one vertex per agent for harness probes; agent runs in
    the model proper start together.
    """
    k = spec.k
    rot = g.rotation
    deg = g.degrees
    positions = [start] * k if isinstance(start, int) else list(start)
    states = list(initial_states) if initial_states is not None else [a.start for a in spec.agents]
    backs = list(initial_backs) if initial_backs is not None else [0] * k
    trace = Trace(walks={i: [positions[i]] for i in range(k)})

    def snapshot() -> SystemConfiguration:
        return SystemConfiguration(tuple(zip(states, positions, backs)))

    def all_halting() -> bool:
        return all(s in a.halting for s, a in zip(states, spec.agents))

    if record:
        trace.configurations.append(snapshot())
    for t in range(max_steps):
        if all_halting():
            trace.halted = True
            break
        snap_states = tuple(states)
        snap_pos = tuple(positions)
        outs = [
            spec.agents[i].delta(snap_states[i], visible_vector(snap_states, snap_pos, i),
                                 deg[snap_pos[i]], backs[i])
            for i in range(k)
        ]
        for i, (nxt, move) in enumerate(outs):
            src = positions[i]
            if move is not None:
                positions[i], backs[i] = rot[src][move]
                trace.traversals += 1
                trace.walks[i].append(positions[i])
            states[i] = nxt
            if record:
                trace.events.append(Event(t, i, "stay" if move is None else "move", src,
                                          nxt, backs[i], None if move is None else positions[i]))
        trace.steps += 1
        if record:
            trace.configurations.append(snapshot())
    else:
        trace.halted = all_halting()
    trace.notes["final"] = {"states": list(states), "positions": list(positions),
                            "backs": list(backs)}
    return trace


# --- pebble machines ------------------------------------------------------------

@dataclass(frozen=True)
class Observation:
    degree: int
    back: int
    carried: frozenset[int]
    here: frozenset[int]


class World(Protocol):
    def observe(self, pebbles: frozenset[int]) -> Observation: ...
    def act(self, pebbles: frozenset[int], carried: frozenset[int], here: frozenset[int],
            move: int | None) -> None: ...


class Tape(Protocol):
    length: int

    def read(self) -> int: ...
    def write_move(self, bit: int, direction: int) -> None: ...


class GraphWorld:
    """A single physical agent on a graph, carrying or placing pebbles."""

    def __init__(self, g: PortLabeledGraph, start: int, pebbles: Iterable[int] = (),
                 *, record_walk: bool = True) -> None:
        self.g = g
        self.rot = g.rotation
        self.position = start
        self.back = 0
        self.where: dict[int, int] = {p: CARRIED for p in pebbles}
        self.traversals = 0
        self.record_walk = record_walk
        self.walk: list[int] = [start]
        self.visited: set[int] = {start}

    def add_pebbles(self, pebbles: Iterable[int]) -> None:
        for p in pebbles:
            self.where.setdefault(p, CARRIED)

    def observe(self, pebbles: frozenset[int]) -> Observation:
        carried = frozenset(p for p in pebbles if self.where[p] == CARRIED)
        here = frozenset(p for p in pebbles if self.where[p] == self.position)
        return Observation(self.g.degrees[self.position], self.back, carried, here)

    def act(self, pebbles: frozenset[int], carried: frozenset[int], here: frozenset[int],
            move: int | None) -> None:
        before = self.observe(pebbles)
        if carried | here != before.carried | before.here or carried & here:
            raise ValueError("pebble action breaks conservation")
        for p in carried:
            self.where[p] = CARRIED
        for p in here:
            self.where[p] = self.position
        if move is not None:
            self.step(move)

    def step(self, port: int) -> None:
        self.position, self.back = self.rot[self.position][port]
        self.traversals += 1
        self.visited.add(self.position)
        if self.record_walk:
            self.walk.append(self.position)

    # direct pebble helpers for host programs
    def drop(self, p: int) -> None:
        if self.where[p] != CARRIED:
            raise ValueError(f"pebble {p} is not carried")
        self.where[p] = self.position

    def pickup(self, p: int) -> None:
        if self.where[p] not in (CARRIED, self.position):
            raise ValueError(f"pebble {p} is not here")
        self.where[p] = CARRIED

    def sees(self, p: int) -> bool:
        return self.where[p] in (CARRIED, self.position)

    def degree(self) -> int:
        return self.g.degrees[self.position]


class DirectTape:
    def __init__(self, length: int) -> None:
        self.length = length
        self.bits = [0] * length
        self.head = 0
        self.steps = 0
        self.clamp_events = 0

    def read(self) -> int:
        return self.bits[self.head]

    def write_move(self, bit: int, direction: int) -> None:
        self.bits[self.head] = bit
        self.steps += 1
        h = self.head + direction
        if h < 0 or h >= self.length:
            self.clamp_events += 1
            h = min(max(h, 0), self.length - 1)
        self.head = h

    def snapshot(self) -> tuple[int, ...]:
        return tuple(self.bits)


@dataclass(frozen=True)
class PebbleMachine:
    """A finite control with an m-cell binary work tape and p pebbles.

    A macro step applies ``delta_in`` to the observation, runs ``delta_tm``
    until a state in ``halting`` is reached, then applies ``delta_out``. The
    machine stops for good once its state lies in ``final``.
    """

    states: tuple
    halting: frozenset
    final: frozenset
    start: Hashable
    pebbles: int
    tape_length: int
    delta_in: Mapping
    delta_tm: Mapping
    delta_out: Mapping
    name: str = "machine"

    @property
    def pebble_set(self) -> frozenset[int]:
        return frozenset(range(1, self.pebbles + 1))

    def watchdog(self) -> int:
        return len(self.states) * self.tape_length * (2 ** self.tape_length)

    def execute(self, world: World, tape: Tape, *, max_macro: int | None = None,
                max_work: int | None = None,
                on_compute: Callable[[], None] | None = None,
                work: Callable[[], int] | None = None) -> dict:
        pebbles = self.pebble_set
        q = self.start
        macro = 0
        limit = self.watchdog()
        while q not in self.final:
            if max_macro is not None and macro >= max_macro:
                return {"state": q, "macro_steps": macro, "halted": False}
            if max_work is not None and work is not None and work() >= max_work:
                return {"state": q, "macro_steps": macro, "halted": False}
            obs = world.observe(pebbles)
            key = (q, obs.degree, obs.back, obs.carried, obs.here)
            try:
                q = self.delta_in[key]
            except KeyError:
                raise UndefinedTransition(f"{self.name}.delta_in", key) from None
            inner = 0
            while q not in self.halting:
                bit = tape.read()
                try:
                    q, written, direction = self.delta_tm[(q, bit)]
                except KeyError:
                    raise UndefinedTransition(f"{self.name}.delta_tm", (q, bit)) from None
                tape.write_move(written, direction)
                inner += 1
                if on_compute is not None:
                    on_compute()
                if inner > limit:
                    raise WatchdogExceeded(f"{self.name}: compute phase exceeded {limit} steps")
            key = (q, obs.carried, obs.here, obs.degree, obs.back)
            try:
                carried, here, move = self.delta_out[key]
            except KeyError:
                raise UndefinedTransition(f"{self.name}.delta_out", key) from None
            if move is not None and not 0 <= move < obs.degree:
                raise ValueError(f"{self.name}: move {move} at a vertex of degree {obs.degree}")
            world.act(pebbles, carried, here, move)
            macro += 1
        return {"state": q, "macro_steps": macro, "halted": True}


def run_pebble_machine(T: PebbleMachine, g: PortLabeledGraph, start: int, max_work: int,
                       *, snapshots: bool = True) -> Trace:
    """Run ``T`` directly on ``g`` with a physical tape.

    ``max_work`` bounds edge traversals plus computation steps.
    """
    world = GraphWorld(g, start, T.pebble_set)
    tape = DirectTape(T.tape_length)
    trace = Trace()

    def on_compute() -> None:
        if snapshots:
            trace.tape_snapshots.append(tape.snapshot())

    result = T.execute(world, tape, max_work=max_work, on_compute=on_compute,
                       work=lambda: world.traversals + tape.steps)
    trace.walks = {0: world.walk}
    trace.traversals = world.traversals
    trace.compute_steps = tape.steps
    trace.steps = result["macro_steps"]
    trace.halted = result["halted"]
    trace.clamp_events = tape.clamp_events
    trace.notes["final"] = {"state": result["state"], "position": world.position,
                            "back": world.back, "pebbles": dict(world.where),
                            "tape": tape.snapshot()}
    return trace


def random_pebble_machine(seed: int, tape_length: int, *, pebbles: int = 1, macro_steps: int = 5,
                          compute_len: int = 3, degrees: Sequence[int] = (3,),
                          move_prob: float = 0.7) -> PebbleMachine:
    """A terminating random machine: ``macro_steps`` cycles, each with at most ``compute_len`` tape steps.

    States carry the cycle counter, so every run ends after ``macro_steps``
    macro steps whatever the graph.
    """
    rng = random.Random(seed)
    pebs = range(1, pebbles + 1)
    splits = list(pebble_splits(pebs))
    start = ("in", 0)
    halting = [("h", t, k) for t in range(macro_steps) for k in range(2)]
    compute = [("c", t, i) for t in range(macro_steps) for i in range(compute_len)]
    final = frozenset(("h", macro_steps - 1, k) for k in range(2))
    d_in: dict = {}
    for q in [start] + [h for h in halting if h not in final]:
        t = 0 if q == start else q[1] + 1
        for d in degrees:
            for b in range(d):
                for carried, here in splits:
                    d_in[(q, d, b, carried, here)] = ("c", t, rng.randrange(compute_len))
    d_tm: dict = {}
    for q in compute:
        _, t, i = q
        for bit in (0, 1):
            if i + 1 < compute_len and rng.random() < 0.6:
                nxt = ("c", t, i + 1)
            else:
                nxt = ("h", t, rng.randrange(2))
            d_tm[(q, bit)] = (nxt, rng.randrange(2), rng.choice((-1, 0, 1)))
    d_out: dict = {}
    for q in halting:
        for d in degrees:
            for b in range(d):
                for carried, here in splits:
                    avail = sorted(carried | here)
                    keep = frozenset(x for x in avail if rng.random() < 0.5)
                    move = rng.randrange(d) if rng.random() < move_prob else None
                    d_out[(q, carried, here, d, b)] = (keep, frozenset(avail) - keep, move)
    return PebbleMachine(tuple([start] + compute + halting), frozenset(halting), final, start,
                         pebbles, tape_length, d_in, d_tm, d_out, name=f"random-machine-{seed}")


# --- documents -------------------------------------------------------------------

def _pset(xs) -> frozenset[int]:
    return frozenset(int(x) for x in xs)


def agent_from_document(doc: dict) -> AgentSpec:
    """Load explicit rows; ``degree``/``back`` may be ``"any"`` and are expanded here."""
    degrees = tuple(int(d) for d in doc.get("degrees", [3]))
    table: dict = {}
    for row in doc["rows"]:
        ds = degrees if row.get("degree", "any") == "any" else (int(row["degree"]),)
        for d in ds:
            backs = range(d) if row.get("back", "any") == "any" else (int(row["back"]),)
            for b in backs:
                key = (row["state"], d, b, _pset(row.get("carried", [])), _pset(row.get("here", [])))
                move = row.get("move")
                table[key] = Transition(row["next"], None if move is None else int(move),
                                        _pset(row.get("carried_after", row.get("carried", []))),
                                        _pset(row.get("here_after", row.get("here", []))))
    return AgentSpec(tuple(doc["states"]), frozenset(doc.get("halting", [])), doc["start"],
                     int(doc.get("pebbles", 0)), table, degrees, doc.get("name", "agent"))


def agent_to_document(agent: AgentSpec) -> dict:
    rows = []
    for key in agent.domain():
        try:
            tr = agent.table[key]
        except KeyError:
            continue
        s, d, b, carried, here = key
        rows.append({"state": s, "degree": d, "back": b, "carried": sorted(carried),
                     "here": sorted(here), "next": tr.state, "move": tr.move,
                     "carried_after": sorted(tr.carried), "here_after": sorted(tr.here)})
    return {"kind": "agent", "name": agent.name, "states": list(agent.states),
            "halting": sorted(agent.halting, key=str), "start": agent.start,
            "pebbles": agent.pebbles, "degrees": list(agent.degrees), "rows": rows}


def machine_from_document(doc: dict) -> PebbleMachine:
    degrees = tuple(int(d) for d in doc.get("degrees", [3]))
    d_in: dict = {}
    for row in doc["delta_in"]:
        ds = degrees if row.get("degree", "any") == "any" else (int(row["degree"]),)
        for d in ds:
            backs = range(d) if row.get("back", "any") == "any" else (int(row["back"]),)
            for b in backs:
                d_in[(row["state"], d, b, _pset(row.get("carried", [])), _pset(row.get("here", [])))] = row["next"]
    d_tm = {(r["state"], int(r["read"])): (r["next"], int(r["write"]), int(r["dir"])) for r in doc["delta_tm"]}
    d_out: dict = {}
    for row in doc["delta_out"]:
        ds = degrees if row.get("degree", "any") == "any" else (int(row["degree"]),)
        for d in ds:
            backs = range(d) if row.get("back", "any") == "any" else (int(row["back"]),)
            for b in backs:
                mv = row.get("move")
                d_out[(row["state"], _pset(row.get("carried", [])), _pset(row.get("here", [])), d, b)] = (
                    _pset(row.get("carried_after", row.get("carried", []))),
                    _pset(row.get("here_after", row.get("here", []))),
                    None if mv is None else int(mv))
    return PebbleMachine(tuple(doc["states"]), frozenset(doc["halting"]), frozenset(doc.get("final", [])),
                         doc["start"], int(doc.get("pebbles", 0)), int(doc["tape_length"]),
                         d_in, d_tm, d_out, doc.get("name", "machine"))


def cooperative_from_document(doc: dict) -> CooperativeAgentSpec:
    """Members list explicit rows; ``visible``, ``degree`` and ``back`` may be ``"any"``."""
    members = doc["agents"]
    k = len(members)
    all_states = [tuple(m["states"]) for m in members]
    agents = []
    for i, m in enumerate(members):
        degrees = tuple(int(d) for d in m.get("degrees", [3]))
        others = [(None,) + all_states[j] for j in range(k) if j != i]
        table: dict = {}
        for row in m["rows"]:
            vis = row.get("visible", "any")
            visibles = itertools.product(*others) if vis == "any" else (tuple(vis),)
            for v in visibles:
                ds = degrees if row.get("degree", "any") == "any" else (int(row["degree"]),)
                for d in ds:
                    backs = range(d) if row.get("back", "any") == "any" else (int(row["back"]),)
                    for b in backs:
                        mv = row.get("move")
                        table[(row["state"], tuple(v), d, b)] = (row["next"], None if mv is None else int(mv))
        agents.append(CooperativeAgent(all_states[i], frozenset(m.get("halting", [])), m["start"],
                                       table, m.get("name", f"member{i}")))
    return CooperativeAgentSpec(tuple(agents))


def cooperative_to_document(spec: CooperativeAgentSpec, degrees: tuple[int, ...] = (3,)) -> dict:
    members = []
    for i, a in enumerate(spec.agents):
        others = [(None,) + spec.agents[j].states for j in range(spec.k) if j != i]
        rows = []
        for s in a.states:
            for v in itertools.product(*others):
                for d in degrees:
                    for b in range(d):
                        try:
                            nxt, mv = a.table[(s, v, d, b)]
                        except KeyError:
                            continue
                        rows.append({"state": s, "visible": list(v), "degree": d, "back": b,
                                     "next": nxt, "move": mv})
        members.append({"name": a.name, "states": list(a.states), "start": a.start,
                        "halting": sorted(a.halting, key=str), "degrees": list(degrees), "rows": rows})
    return {"kind": "cooperative", "agents": members}


def noncooperative(agents: Sequence[AgentSpec]) -> CooperativeAgentSpec:
    """Pebble-free single agents as a cooperating set whose members ignore each other."""
    members = []
    for a in agents:
        if a.pebbles:
            raise ValueError(f"{a.name}: only pebble-free agents can join a set")

        def rule(state, visible, degree, back, a=a):
            try:
                t = a.delta(state, degree, back, EMPTY, EMPTY)
            except UndefinedTransition:
                return None
            return t.state, t.move

        members.append((a.states, a.halting, a.start, rule))
    return cooperative_from_rules(members, [a.name for a in agents])


def restrict(spec: CooperativeAgentSpec, subset: Sequence[int]) -> CooperativeAgentSpec:
    """The members in ``subset`` alone: everybody else is treated as absent."""
    subset = tuple(subset)
    k = spec.k
    members = []
    for pos, i in enumerate(subset):
        a = spec.agents[i]
        # slot of each other subset member inside the full visible vector of agent i
        slots = [j if j < i else j - 1 for j in subset if j != i]

        def rule(state, visible, degree, back, a=a, slots=slots):
            full = [None] * (k - 1)
            for slot, val in zip(slots, visible):
                full[slot] = val
            try:
                return a.delta(state, tuple(full), degree, back)
            except UndefinedTransition:
                return None

        members.append((a.states, a.halting, a.start, rule))
    return cooperative_from_rules(members, [spec.agents[i].name for i in subset])
