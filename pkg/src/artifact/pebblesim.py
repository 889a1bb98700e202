"""Halving a pebble machine's tape by storing it in pebble positions on a closed walk.

A host machine T' keeps the tape of the simulated machine T (length 2m) as
the positions of memory pebbles on a closed walk omega that starts at the
vertex marked ``p_start``. A pebble at the vertex with id ``k`` (``k`` = number
of distinct vertices seen on omega before that vertex) encodes ``m_1`` bits.

The host program is ordinary Python control flow over a ``World``; its
variables live in a ``RegisterBank`` whose accesses are counted and charged
``width`` computation steps each. Two interchangeable back ends drive the
primitives: a strict one that moves the agent one edge at a time, and a fast
one that resolves whole primitive calls against precomputed tables of omega.
Both produce identical counters, registers and pebble placements.
"""
from __future__ import annotations

import math
from contextlib import contextmanager
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Iterator

import numpy as np

from .agents import CARRIED, EMPTY, DirectTape, GraphWorld, Observation, PebbleMachine, World
from .graph import PortLabeledGraph
from .sequences import GeneratorWalk, follow, generator_walk

# host variables; c_0 is their number, one block each
REGISTERS = (
    "R_walk", "R_lbl", "R_steps", "R_id", "R_head",
    "R_steps'", "R_walk'", "R_lbl'", "R_id'",
    "R_back", "R_move", "R_tmp",
)
C0 = len(REGISTERS)

# named control points of the host program; their count stands in for c_Alg
HOST_PHASES = (
    "init", "count", "case1_restart", "case1_collect", "case2_layout", "run_inner",
    "cleanup", "halt", "step", "find_pebble", "restart", "ndv_entry", "ndv_loop",
    "get_id", "put_id", "read_bit", "write_bit", "head_move", "reloc_mark",
    "reloc_get", "reloc_carry", "reloc_put", "reloc_return", "reloc_finish",
)

NEW, CAP, EXHAUSTED = "new", "cap", "exhausted"
EXPLORED, REPRODUCED = "explored_and_returned", "reproduced_host_walk"


class SimulationError(RuntimeError):
    pass


class PebbleNotFound(SimulationError):
    pass


class BudgetExceeded(SimulationError):
    pass


class LayoutError(ValueError):
    pass


class _Exhausted(Exception):
    """Raised by Step when the walk generator has no further output."""


# --- constants -------------------------------------------------------------------

@dataclass(frozen=True)
class Constants:
    c0: int
    c1: int
    c_prime: int
    m0: int
    c_alg: int
    c: int
    c1_samples: tuple[tuple[int, int], ...]  # (m_1, walk length) pairs c_1 was fitted on

    def to_document(self) -> dict:
        return {"c0": self.c0, "c1": self.c1, "c_prime": self.c_prime, "m0": self.m0,
                "c_alg": self.c_alg, "c_log2": self.c.bit_length() - 1,
                "c1_samples": [list(x) for x in self.c1_samples]}


def _ceil_log2(x: int) -> int:
    return max(0, (x - 1).bit_length())


@lru_cache(maxsize=None)
def constants(seed: int = 0, fit_levels: int = 4) -> Constants:
    """Pin c_1 from the generator actually used, then derive m_0, c' and c.

    c_1 is the least integer with ``len(omega(2^k)) <= 2^(c_1 k)`` for
    ``k = 1..fit_levels``; walk length grows like ``9 * 4^k`` so the ratio
    ``log2(len)/k`` only falls for larger ``k``.
    """
    samples = tuple((k, len(generator_walk(2 ** k, seed))) for k in range(1, fit_levels + 1))
    c1 = max(-(-_ceil_log2(length) // k) for k, length in samples)
    c0 = C0
    bad = [m for m in range(1, 10_000) if not (2 ** (m / c0) > 2 * m and c1 <= 2 ** (m / c0))]
    m0 = max(bad) + 1
    c_alg = len(HOST_PHASES)
    c = max(2 ** (2 * m0), 2 * c0 * c1 + 3, c_alg)
    return Constants(c0, c1, c0 * c1, m0, c_alg, c, samples)


# --- layout ----------------------------------------------------------------------

@dataclass(frozen=True)
class TapeLayout:
    """How a host tape of length ``m`` stores a simulated tape of length ``2m``.

    ``desk`` layouts choose ``m_1`` freely so that small machines can be
    simulated on small graphs; their registers are not width-checked.
    """

    m: int
    m1: int
    c0: int = C0
    bit_order: str = "lsb"
    desk: bool = False

    def __post_init__(self) -> None:
        if self.m < 1 or self.m1 < 1:
            raise LayoutError("m and m_1 must be positive")
        if (2 * self.m) % self.m1:
            raise LayoutError(f"m_1={self.m1} does not divide the simulated tape length {2 * self.m}")
        if self.bit_order not in ("lsb", "msb"):
            raise LayoutError(f"unknown bit order {self.bit_order!r}")

    @classmethod
    def standard(cls, m: int, consts: Constants | None = None) -> "TapeLayout":
        consts = consts or constants()
        m1 = m // consts.c_prime
        if m1 < 1 or m % consts.c_prime:
            raise LayoutError(f"m={m} is not a positive multiple of c'={consts.c_prime}")
        return cls(m, m1, consts.c0)

    @classmethod
    def desk_layout(cls, m: int, m1: int, bit_order: str = "lsb") -> "TapeLayout":
        return cls(m, m1, C0, bit_order, desk=True)

    @property
    def simulated_length(self) -> int:
        return 2 * self.m

    @property
    def memory_count(self) -> int:
        return 2 * self.m // self.m1

    @property
    def z(self) -> int:
        return 2 ** self.m1

    @property
    def width(self) -> int:
        return max(1, -(-self.m // self.c0))

    def role_count(self) -> int:
        return 3 + self.memory_count

    def pebble_roles(self, p: int) -> dict[str, int]:
        roles = {"p_start": p + 1, "p_temp": p + 2, "p_next": p + 3}
        for i in range(self.memory_count):
            roles[f"p_{i}"] = p + 4 + i
        return roles

    def weight(self, j: int) -> int:
        return 1 << (j if self.bit_order == "lsb" else self.m1 - 1 - j)

    def encode(self, bits) -> tuple[int, ...]:
        bits = tuple(bits)
        if len(bits) != self.simulated_length:
            raise LayoutError(f"expected {self.simulated_length} bits, got {len(bits)}")
        return tuple(
            sum(self.weight(j) for j in range(self.m1) if bits[i * self.m1 + j])
            for i in range(self.memory_count)
        )

    def decode(self, ids) -> tuple[int, ...]:
        ids = tuple(ids)
        return tuple(
            1 if ids[i] & self.weight(j) else 0
            for i in range(self.memory_count) for j in range(self.m1)
        )

    def locate(self, head: int) -> tuple[int, int]:
        """Head position -> (pebble index, bit index within the pebble)."""
        return divmod(head, self.m1)


# --- registers -------------------------------------------------------------------

class RegisterBank:
    def __init__(self, width: int, enforce: bool) -> None:
        self.width = width
        self.enforce = enforce
        self.values = {r: 0 for r in REGISTERS}
        self.accesses = 0

    def get(self, name: str) -> int:
        self.accesses += 1
        return self.values[name]

    def set(self, name: str, value: int) -> None:
        self.accesses += 1
        self.poke(name, value)

    def peek(self, name: str) -> int:
        return self.values[name]

    def poke(self, name: str, value: int) -> None:
        if value < 0 or (self.enforce and value >= 1 << self.width):
            raise SimulationError(f"{name}={value} does not fit a {self.width}-bit block")
        self.values[name] = value

    def snapshot(self) -> dict[str, int]:
        return dict(self.values)


# --- precomputed walk tables for the fast back end -------------------------------

class OmegaTable:
    """Omega from one base vertex, with the lookups the fast primitives need."""

    def __init__(self, g: PortLabeledGraph, base: int, offsets) -> None:
        w = follow(g, base, offsets)
        self.V = np.asarray(w.vertices, dtype=np.int64)
        self.B = np.asarray(w.back_labels, dtype=np.int64)
        self.L = len(self.V) - 1
        if self.V[-1] != base:
            raise SimulationError(f"walk from {base} is not closed")
        n = g.vertex_count
        first = np.full(n, -1, dtype=np.int64)
        uniq, idx = np.unique(self.V, return_index=True)
        first[uniq] = idx
        self.first = first
        idx_all = np.arange(self.L + 1, dtype=np.int64)
        self.f = first[self.V]
        self.new_idx = np.flatnonzero(self.f == idx_all)
        order = np.argsort(self.V, kind="stable")
        self._order = order
        self._starts = np.searchsorted(self.V[order], np.arange(n + 1))
        occ_base = self.occurrences(base)
        self.s = occ_base[np.searchsorted(occ_base, idx_all)]
        cost = 1 + (self.s - idx_all) + self.f
        cost[0] = 0
        self.P = np.cumsum(cost)

    def occurrences(self, x: int) -> np.ndarray:
        return self._order[self._starts[x]:self._starts[x + 1]]

    def next_occurrence(self, x: int, k: int) -> int | None:
        occ = self.occurrences(x)
        i = int(np.searchsorted(occ, k))
        return int(occ[i]) if i < len(occ) else None

    def next_new(self, k: int) -> int | None:
        i = int(np.searchsorted(self.new_idx, k, side="right"))
        return int(self.new_idx[i]) if i < len(self.new_idx) else None

    def id_of(self, x: int) -> int | None:
        f = int(self.first[x])
        if f < 0:
            return None
        return int(np.searchsorted(self.new_idx, f))


# --- host context ----------------------------------------------------------------

class HostContext:
    """Registers, role pebbles and the walk primitives of one simulator level."""

    def __init__(self, world: World, layout: TapeLayout, walk: GeneratorWalk, p: int, *,
                 fast: bool = False, budget: int | None = None, debug: bool = False) -> None:
        self.world = world
        self.layout = layout
        self.offsets = walk.offsets
        self.L = len(walk.offsets)
        self.z = layout.z
        self.reg = RegisterBank(layout.width, enforce=not layout.desk)
        roles = layout.pebble_roles(p)
        self.p_start, self.p_temp, self.p_next = roles["p_start"], roles["p_temp"], roles["p_next"]
        self.memory = [roles[f"p_{i}"] for i in range(layout.memory_count)]
        self.anchor = self.p_start
        self.traversals = 0
        self.budget = budget
        self.debug = debug
        self.relocations = 0
        self.fast = fast
        if fast:
            if not isinstance(world, GraphWorld):
                raise SimulationError("the fast back end needs direct access to the graph")
            self.g = world.g
            self.tables: dict[int, OmegaTable] = {}
            self.base = world.position
            self.hi: dict[int, int] = {}

    # physical actions
    def _charge(self, k: int) -> None:
        self.traversals += k
        if self.budget is not None and self.traversals > self.budget:
            raise BudgetExceeded(f"traversal budget {self.budget} exceeded")

    def observe(self, p: int) -> bool:
        if self.fast:
            x = self.world.where[p]
            return x == CARRIED or x == self.world.position
        o = self.world.observe(frozenset((p,)))
        return p in o.carried or p in o.here

    def drop(self, p: int) -> None:
        self.world.act(frozenset((p,)), EMPTY, frozenset((p,)), None)

    def pickup(self, p: int) -> None:
        self.world.act(frozenset((p,)), frozenset((p,)), EMPTY, None)

    def traverse(self, port: int) -> int:
        """Cross one edge directly; returns the arrival port."""
        if self.fast:
            self.world.step(port)
            self._charge(1)
            return self.world.back
        self.world.act(EMPTY, EMPTY, EMPTY, port)
        self._charge(1)
        return self.world.observe(EMPTY).back

    def _degree(self) -> int:
        return self.world.observe(EMPTY).degree

    @contextmanager
    def anchored(self, pebble: int) -> Iterator[None]:
        saved = self.anchor
        self.anchor = pebble
        try:
            yield
        finally:
            self.anchor = saved

    # fast-mode helpers
    def table(self, base: int | None = None) -> OmegaTable:
        base = self.base if base is None else base
        t = self.tables.get(base)
        if t is None:
            t = self.tables[base] = OmegaTable(self.g, base, self.offsets)
        return t

    def _advance(self, j: int) -> None:
        t = self.table()
        k = self.reg.peek("R_walk")
        if j > k:
            self._charge(j - k)
            self.world.traversals += j - k
            self.world.position = int(t.V[j])
            self.world.back = int(t.B[j])
            self.hi[self.base] = max(self.hi.get(self.base, 0), j)
            self.reg.poke("R_walk", j)
            self.reg.poke("R_lbl", int(t.B[j]))
            self.reg.poke("R_steps", self.reg.peek("R_steps") + j - k)
            self.reg.accesses += 6 * (j - k)

    def _check_on_walk(self) -> OmegaTable:
        t = self.table()
        k = self.reg.peek("R_walk")
        if int(t.V[k]) != self.world.position:
            raise SimulationError("host is off its walk")
        return t

    # Step / FindPebble / Restart
    def step(self) -> None:
        k = self.reg.get("R_walk")
        if k >= self.L:
            raise _Exhausted
        d = self._degree()
        if d == 0:
            raise _Exhausted
        lbl = self.reg.get("R_lbl")
        back = self.traverse((lbl + self.offsets[k]) % d)
        self.reg.set("R_walk", k + 1)
        self.reg.set("R_lbl", back)
        self.reg.set("R_steps", self.reg.get("R_steps") + 1)

    def find_pebble(self, p: int) -> None:
        if self.fast:
            return self._fast_find(p)
        while not self.observe(p):
            try:
                self.step()
            except _Exhausted:
                raise PebbleNotFound(f"pebble {p} not on the rest of the walk") from None

    def _fast_find(self, p: int) -> None:
        if self.observe(p):
            return
        t = self._check_on_walk()
        j = t.next_occurrence(self.world.where[p], self.reg.peek("R_walk"))
        if j is None:
            self._advance(t.L)
            self.reg.accesses += 1
            raise PebbleNotFound(f"pebble {p} not on the rest of the walk")
        self._advance(j)

    def restart(self) -> None:
        self.find_pebble(self.anchor)
        for r in ("R_steps", "R_id", "R_walk", "R_lbl"):
            self.reg.set(r, 0)
        if self.fast:
            self.base = self.world.position

    # NextDistinctVertex
    def next_distinct_vertex(self) -> str:
        """Move to the next vertex of omega not seen before; returns NEW, CAP or EXHAUSTED.

        ``R_id`` and ``R_lbl`` are saved and restored around the inner Restart
        together with ``R_walk``: Restart zeroes the id counter, and the walk
        continues from the stored arrival label, not the physical one.
        """
        if self.reg.get("R_id") == self.z - 1:
            self.restart()
            return CAP
        self.reg.set("R_id", self.reg.get("R_id") + 1)
        self.reg.set("R_steps'", self.reg.get("R_steps"))
        if self.fast:
            return self._fast_ndv_loop()
        while True:
            try:
                self.step()
            except _Exhausted:
                return EXHAUSTED
            self.reg.set("R_steps'", self.reg.get("R_steps'") + 1)
            self.drop(self.p_temp)
            self.reg.set("R_walk'", self.reg.get("R_walk"))
            self.reg.set("R_lbl'", self.reg.get("R_lbl"))
            self.reg.set("R_id'", self.reg.get("R_id"))
            self.restart()
            self.find_pebble(self.p_temp)
            self.pickup(self.p_temp)
            self.reg.set("R_walk", self.reg.get("R_walk'"))
            self.reg.set("R_lbl", self.reg.get("R_lbl'"))
            self.reg.set("R_id", self.reg.get("R_id'"))
            if self.reg.get("R_steps") == self.reg.get("R_steps'"):
                return NEW

    def _fast_ndv_loop(self) -> str:
        t = self._check_on_walk()
        k = self.reg.peek("R_walk")
        if self.reg.peek("R_steps") != k:
            raise SimulationError("step counter out of sync with the walk")
        nxt = t.next_new(k)
        end = t.L if nxt is None else nxt
        iters = end - k
        if iters:
            trav = int(t.P[end] - t.P[k])
            self._charge(trav)
            self.world.traversals += trav
            self.reg.accesses += 6 * trav + 20 * iters
            rid = self.reg.peek("R_id")
            f, s = int(t.f[end]), int(t.s[end])
            self.hi[self.base] = max(self.hi.get(self.base, 0), s)
            self.reg.poke("R_steps'", self.reg.peek("R_steps'") + iters)
            for r, v in (("R_walk'", end), ("R_lbl'", int(t.B[end])), ("R_id'", rid),
                         ("R_walk", end), ("R_lbl", int(t.B[end])), ("R_id", rid), ("R_steps", f)):
                self.reg.poke(r, v)
            self.world.position = int(t.V[end])
            if f > 0:
                self.world.back = int(t.B[f])
            elif s > end:
                self.world.back = int(t.B[s])
            else:
                self.world.back = int(t.B[end])
        if nxt is None:
            self.reg.accesses += 1
            return EXHAUSTED
        return NEW

    # GetPebbleId / PutPebbleAtId
    def get_pebble_id(self, p: int) -> int:
        self.restart()
        while not self.observe(p):
            status = self.next_distinct_vertex()
            if status != NEW:
                raise PebbleNotFound(f"pebble {p} has no id below {self.z} ({status})")
        return self.reg.get("R_id")

    def put_pebble_at_id(self, p: int, ident: int) -> None:
        if not 0 <= ident < self.z:
            raise SimulationError(f"id {ident} out of range for z={self.z}")
        self.find_pebble(p)
        self.pickup(p)
        self.restart()
        self.reg.set("R_tmp", ident)
        while self.reg.get("R_tmp") > 0:
            self.reg.set("R_tmp", self.reg.get("R_tmp") - 1)
            if self.next_distinct_vertex() != NEW:
                raise PebbleNotFound(f"walk has fewer than {ident + 1} distinct vertices")
        self.drop(p)

    # simulated tape
    def read_bit(self) -> int:
        i, j = self.layout.locate(self.reg.get("R_head"))
        ident = self.get_pebble_id(self.memory[i])
        self.restart()
        return 1 if ident & self.layout.weight(j) else 0

    def write_bit(self, b: int) -> None:
        i, j = self.layout.locate(self.reg.get("R_head"))
        w = self.layout.weight(j)
        self.reg.set("R_tmp", self.get_pebble_id(self.memory[i]))
        if b == 1 and self.read_bit() == 0:
            self.reg.set("R_tmp", self.reg.get("R_tmp") + w)
        elif b == 0 and self.read_bit() == 1:
            self.reg.set("R_tmp", self.reg.get("R_tmp") - w)
        self.put_pebble_at_id(self.memory[i], self.reg.get("R_tmp"))
        self.restart()

    def move_head(self, direction: int) -> bool:
        """Returns True when the move was clamped at a tape end."""
        h = self.reg.get("R_head") + direction
        clamped = not 0 <= h < self.layout.simulated_length
        self.reg.set("R_head", min(max(h, 0), self.layout.simulated_length - 1))
        return clamped

    # moving the walk along with the simulated machine
    def relocate_walk(self, move: int) -> None:
        before = self.oracle_tape() if self.debug else None
        self.reg.set("R_move", move)
        self.reg.set("R_back", self.traverse(self.reg.get("R_move")))
        self.drop(self.p_next)
        self.traverse(self.reg.get("R_back"))
        for p in self.memory:
            self.reg.set("R_tmp", self.get_pebble_id(p))
            self.pickup(p)
            self.restart()
            self.traverse(self.reg.get("R_move"))
            with self.anchored(self.p_next):
                self.put_pebble_at_id(p, self.reg.get("R_tmp"))
                self.restart()
            self.traverse(self.reg.get("R_back"))
        self.pickup(self.p_start)
        self.traverse(self.reg.get("R_move"))
        self.drop(self.p_start)
        self.pickup(self.p_next)
        self.restart()
        self.relocations += 1
        if before is not None:
            after = self.oracle_tape()
            if after != before:
                raise SimulationError("relocation changed the simulated tape")
            if self.readback() != before:
                raise SimulationError("primitive readback disagrees after relocation")

    def cleanup(self) -> None:
        """Walk omega once from the anchor, collecting every memory pebble."""
        mem = frozenset(self.memory)
        if self.fast:
            t = self._check_on_walk()
            k = self.reg.peek("R_walk")
            on_rest = set(int(v) for v in np.unique(t.V[k:]))
            for p in self.memory:
                if self.world.where[p] in on_rest:
                    self.world.where[p] = CARRIED
            self._advance(t.L)
            self.reg.accesses += 1
        else:
            while True:
                here = self.world.observe(mem).here
                if here:
                    self.world.act(here, here, EMPTY, None)
                try:
                    self.step()
                except _Exhausted:
                    break
        self.pickup(self.p_start)

    # oracles and debug
    def oracle_tape(self) -> tuple[int, ...]:
        """Tape decoded from pebble positions by direct graph access (no primitives)."""
        if not isinstance(self.world, GraphWorld):
            raise SimulationError("the oracle needs direct access to the graph")
        return decode_tape(self.world.g, self.world.where, self.layout, self.p_start,
                           self.memory, self.offsets)

    def readback(self) -> tuple[int, ...]:
        """All simulated bits via GetPebbleId; counters and walk log are restored."""
        w = self.world
        saved = (self.traversals, self.reg.accesses, getattr(w, "traversals", 0),
                 len(getattr(w, "walk", ())))
        ids = [self.get_pebble_id(p) for p in self.memory]
        self.restart()
        self.traversals, self.reg.accesses = saved[0], saved[1]
        if isinstance(w, GraphWorld):
            w.traversals = saved[2]
            del w.walk[saved[3]:]
        return self.layout.decode(ids)

    def finish_visited(self) -> None:
        if self.fast:
            for base, hi in self.hi.items():
                self.world.visited.update(int(v) for v in np.unique(self.table(base).V[:hi + 1]))

    def state(self) -> dict:
        """Everything the two back ends must agree on."""
        w = self.world
        return {"registers": self.reg.snapshot(), "accesses": self.reg.accesses,
                "traversals": self.traversals,
                "position": getattr(w, "position", None), "back": getattr(w, "back", None),
                "pebbles": dict(getattr(w, "where", {}))}


def decode_tape(g: PortLabeledGraph, where: dict[int, int], layout: TapeLayout, p_start: int,
                memory: list[int], offsets) -> tuple[int, ...]:
    anchor = where[p_start]
    if anchor == CARRIED:
        raise SimulationError("p_start is not placed")
    rank: dict[int, int] = {}
    for v in follow(g, anchor, offsets).vertices:
        rank.setdefault(v, len(rank))
    ids = []
    for p in memory:
        v = where[p]
        if v == CARRIED or v not in rank or rank[v] >= layout.z:
            raise SimulationError(f"memory pebble {p} is not on omega")
        ids.append(rank[v])
    return layout.decode(ids)


# --- the simulated machine's view ------------------------------------------------

class SimulatedWorld:
    """What the inner machine sees: the anchor vertex and ``R_back`` as its arrival port."""

    def __init__(self, ctx: HostContext) -> None:
        self.ctx = ctx

    def observe(self, pebbles: frozenset[int]) -> Observation:
        o = self.ctx.world.observe(pebbles)
        return Observation(o.degree, self.ctx.reg.get("R_back"), o.carried, o.here)

    def act(self, pebbles: frozenset[int], carried: frozenset[int], here: frozenset[int],
            move: int | None) -> None:
        self.ctx.world.act(pebbles, carried, here, None)
        if move is not None:
            self.ctx.relocate_walk(move)


class PebbleTape:
    def __init__(self, ctx: HostContext) -> None:
        self.ctx = ctx
        self.length = ctx.layout.simulated_length
        self.steps = 0
        self.clamp_events = 0

    def read(self) -> int:
        return self.ctx.read_bit()

    def write_move(self, bit: int, direction: int) -> None:
        self.ctx.write_bit(bit)
        if self.ctx.move_head(direction):
            self.clamp_events += 1
        self.steps += 1


# --- machines --------------------------------------------------------------------

@dataclass(frozen=True)
class Simulator:
    """T': runs ``inner`` with its tape encoded in pebble positions."""

    inner: object
    layout: TapeLayout
    walk: GeneratorWalk
    fast: bool = False
    debug: bool = False
    name: str = "simulator"

    @property
    def pebbles(self) -> int:
        return self.inner.pebbles + self.layout.role_count()

    @property
    def pebble_set(self) -> frozenset[int]:
        return frozenset(range(1, self.pebbles + 1))

    @property
    def tape_length(self) -> int:
        return self.layout.m

    def execute(self, world: World, tape=None, *, max_macro: int | None = None,
                max_work: int | None = None, on_compute: Callable[[], None] | None = None,
                work: Callable[[], int] | None = None, budget: int | None = None,
                on_context: Callable[[HostContext], None] | None = None) -> dict:
        ctx = HostContext(world, self.layout, self.walk, self.inner.pebbles,
                          fast=self.fast, budget=budget, debug=self.debug)
        if on_context is not None:
            on_context(ctx)
        reg = ctx.reg
        ctx.drop(ctx.p_start)
        ctx.restart()
        outcome = None
        while outcome is None:
            if reg.get("R_id") == ctx.z - 1:
                outcome = REPRODUCED
            elif ctx.next_distinct_vertex() == EXHAUSTED:
                outcome = EXPLORED
        distinct = reg.peek("R_id") + (1 if outcome == REPRODUCED else 0)
        inner_result = None
        inner_tape = None
        if outcome == EXPLORED:
            ctx.restart()
            ctx.pickup(ctx.p_start)
        else:
            ctx.restart()
            for p in ctx.memory:
                ctx.drop(p)
            reg.set("R_head", 0)
            reg.set("R_back", 0)
            inner_tape = PebbleTape(ctx)
            inner_result = self.inner.execute(SimulatedWorld(ctx), inner_tape,
                                              on_compute=on_compute)
            ctx.cleanup()
        ctx.finish_visited()
        inner_steps = inner_tape.steps if inner_tape is not None else 0
        return {"outcome": outcome, "halted": True, "distinct": distinct, "context": ctx,
                "inner": inner_result, "inner_compute_steps": inner_steps,
                "accesses": reg.accesses,
                "compute_steps": reg.accesses * self.layout.width + inner_steps}


@dataclass(frozen=True)
class FoldedMachine:
    """Below m_0 the simulated tape is held in the finite control: run the inner machine as is."""

    inner: object
    name: str = "folded"

    @property
    def pebbles(self) -> int:
        return self.inner.pebbles

    @property
    def pebble_set(self) -> frozenset[int]:
        return self.inner.pebble_set

    @property
    def tape_length(self) -> int:
        return self.inner.tape_length // 2

    def execute(self, world: World, tape=None, *, budget: int | None = None,
                on_compute: Callable[[], None] | None = None, **_) -> dict:
        kw: dict = {"on_compute": on_compute}
        if isinstance(self.inner, Simulator):
            kw["budget"] = budget
        return self.inner.execute(world, DirectTape(self.inner.tape_length), **kw)


def build_simulator(T, layout: TapeLayout, *, fast: bool = False, debug: bool = False,
                    seed: int = 0, consts: Constants | None = None):
    """T' for ``T``: a ``Simulator``, or a ``FoldedMachine`` for standard layouts below m_0."""
    if T.tape_length != layout.simulated_length:
        raise LayoutError(f"layout simulates {layout.simulated_length} cells, machine has {T.tape_length}")
    consts = consts or constants(seed)
    if not layout.desk:
        if layout.m1 != layout.m // consts.c_prime:
            raise LayoutError(f"m_1 must be m // c' = {layout.m // consts.c_prime}")
        if layout.m < consts.m0:
            return FoldedMachine(T, name=f"fold({getattr(T, 'name', 'T')})")
    return Simulator(T, layout, generator_walk(layout.z, seed), fast, debug,
                     name=f"sim[m={layout.m}]({getattr(T, 'name', 'T')})")


def trivial_machine(tape_length: int) -> PebbleMachine:
    """Stops before its first computation step or move."""
    return PebbleMachine(("halt",), frozenset({"halt"}), frozenset({"halt"}), "halt", 0,
                         tape_length, {}, {}, {}, name="trivial")


# --- bit primitives in isolation ------------------------------------------------

def bit_roundtrip(g: PortLabeledGraph, start: int, layout: TapeLayout, *, seed: int = 0,
                  fast: bool = False) -> list[dict]:
    """Write then read every bit position with both values; returns the mismatches.

    The decoded tape (direct graph access) must agree with the primitives
    after every write.
    """
    walk = generator_walk(layout.z, seed)
    p = 0
    pebbles = frozenset(range(1, p + layout.role_count() + 1))
    world = GraphWorld(g, start, pebbles, record_walk=False)
    ctx = HostContext(world, layout, walk, p, fast=fast)
    ctx.drop(ctx.p_start)
    ctx.restart()
    for q in ctx.memory:
        ctx.drop(q)
    tape = [0] * layout.simulated_length
    bad = []
    for head in range(layout.simulated_length):
        for b in (1, 0):
            ctx.reg.set("R_head", head)
            ctx.write_bit(b)
            tape[head] = b
            got = ctx.read_bit()
            oracle = ctx.oracle_tape()
            if got != b or oracle != tuple(tape):
                bad.append({"head": head, "bit": b, "read": got, "oracle": list(oracle)})
    return bad


# --- single runs -----------------------------------------------------------------

@dataclass(frozen=True)
class SimulatorReport:
    outcome: str
    pebbles_used: int
    edge_traversals: int
    computation_steps: int
    distinct_vertices_on_omega: int
    start: int
    final_vertex: int
    all_pebbles_carried: bool
    visited_count: int
    register_accesses: int
    inner_compute_steps: int
    relocations: int

    def to_document(self) -> dict:
        return dict(self.__dict__)


@dataclass
class SimulationRun:
    report: SimulatorReport
    world: GraphWorld
    context: HostContext
    inner: dict | None
    tapes: list[tuple[int, ...]] = field(default_factory=list)


def simulate(sim: Simulator, g: PortLabeledGraph, start: int, *, budget: int | None = None,
             oracle_snapshots: bool = False) -> SimulationRun:
    """Run ``sim`` on ``g``; optionally decode the simulated tape after every inner compute step."""
    world = GraphWorld(g, start, sim.pebble_set, record_walk=not sim.fast)
    tapes: list[tuple[int, ...]] = []
    holder: list[HostContext] = []

    def on_compute() -> None:
        if oracle_snapshots:
            tapes.append(holder[0].oracle_tape())

    res = sim.execute(world, budget=budget, on_compute=on_compute, on_context=holder.append)
    ctx = res["context"]
    report = SimulatorReport(
        outcome=res["outcome"], pebbles_used=sim.pebbles, edge_traversals=world.traversals,
        computation_steps=res["compute_steps"], distinct_vertices_on_omega=res["distinct"],
        start=start, final_vertex=world.position,
        all_pebbles_carried=all(x == CARRIED for x in world.where.values()),
        visited_count=len(world.visited), register_accesses=res["accesses"],
        inner_compute_steps=res["inner_compute_steps"], relocations=ctx.relocations)
    return SimulationRun(report, world, ctx, res["inner"], tapes)


# --- the iterated explorer -------------------------------------------------------

@dataclass(frozen=True)
class LevelCost:
    level: int
    m: int
    m1: int
    z: int
    walk_length: int
    traversals: int
    computation_steps: int
    exact: bool  # False when composed from per-step unit costs


@dataclass(frozen=True)
class ExploreIteration:
    r: int
    outcome: str
    levels: tuple[LevelCost, ...]
    traversals: int
    computation_steps: int


@dataclass(frozen=True)
class ExploreReport:
    outcome: str
    r: int
    start: int
    final_vertex: int
    all_pebbles_carried: bool
    visited_all: bool
    pebbles_used: int
    memory_bits: int
    edge_traversals: int
    computation_steps: int
    exact_traversals: int
    iterations: tuple[ExploreIteration, ...]
    constants: Constants
    mode: str

    def to_document(self) -> dict:
        return {
            "outcome": self.outcome, "r": self.r, "start": self.start,
            "final_vertex": self.final_vertex, "all_pebbles_carried": self.all_pebbles_carried,
            "visited_all": self.visited_all, "pebbles_used": self.pebbles_used,
            "memory_bits": self.memory_bits, "edge_traversals": self.edge_traversals,
            "computation_steps": self.computation_steps, "exact_traversals": self.exact_traversals,
            "mode": self.mode, "constants": self.constants.to_document(),
            "iterations": [
                {"r": it.r, "outcome": it.outcome, "traversals": it.traversals,
                 "computation_steps": it.computation_steps,
                 "levels": [dict(lv.__dict__) for lv in it.levels]}
                for it in self.iterations
            ],
        }


def level_layout(i: int, consts: Constants) -> TapeLayout:
    return TapeLayout.standard(consts.c_prime * 2 ** i, consts)


def _level_run(g: PortLabeledGraph, start: int, i: int, consts: Constants, seed: int,
               budget: int | None) -> SimulationRun:
    layout = level_layout(i, consts)
    sim = Simulator(trivial_machine(layout.simulated_length), layout,
                    generator_walk(layout.z, seed), fast=True)
    return simulate(sim, g, start, budget=budget)


def unit_costs(g: PortLabeledGraph, start: int, i: int, consts: Constants, seed: int = 0) -> dict:
    """Level-i cost of one reproduced traversal and of one simulated bit operation.

    Measured with every memory pebble at the largest id, which maximizes the
    id searches; used to compose costs of levels that are not run literally.
    """
    layout = level_layout(i, consts)
    world = GraphWorld(g, start, range(1, layout.role_count() + 1), record_walk=False)
    ctx = HostContext(world, layout, generator_walk(layout.z, seed), 0, fast=True)
    ctx.drop(ctx.p_start)
    ctx.restart()
    for p in ctx.memory:
        ctx.drop(p)
        ctx.put_pebble_at_id(p, layout.z - 1)
        ctx.restart()

    def measure(fn) -> tuple[int, int]:
        t0, a0 = ctx.traversals, ctx.reg.accesses
        fn()
        return ctx.traversals - t0, (ctx.reg.accesses - a0) * layout.width

    write = measure(lambda: ctx.write_bit(1))
    reloc = measure(lambda: ctx.relocate_walk(0))
    return {"reloc": reloc, "bit": write}


def explore_loglog(g: PortLabeledGraph, start: int = 0, *, seed: int = 0, max_r: int = 8,
                   budget: int | None = None, mode: str = "collapsed") -> ExploreReport:
    """Iterative deepening over r until the innermost simulator finds the graph small.

    ``collapsed`` runs the innermost level r on the graph (exactly counted) and
    composes the cost of the outer levels 1..r-1 from measured unit costs;
    level 0 is folded into states. ``literal`` executes the whole nested chain
    and is only practical for tiny graphs or with a budget.
    """
    consts = constants(seed)
    if mode not in ("collapsed", "literal"):
        raise ValueError(f"unknown mode {mode!r}")
    iterations = []
    exact_total = 0
    final = None
    own_runs: dict[int, SimulatorReport] = {}
    units: dict[int, dict] = {}
    for r in range(1, max_r + 1):
        if mode == "literal":
            chain = trivial_machine(consts.c_prime * 2 ** (r + 1))
            for i in range(r, -1, -1):
                chain = build_simulator(chain, level_layout(i, consts), fast=(i == 1), seed=seed,
                                        consts=consts)
            top = chain.inner if isinstance(chain, FoldedMachine) else chain
            world = GraphWorld(g, start, top.pebble_set, record_walk=False)
            res = chain.execute(world, budget=budget)
            outcome = res["outcome"]
            lv = level_layout(1, consts)
            levels = (LevelCost(1, lv.m, lv.m1, lv.z, len(top.walk), world.traversals,
                                res["compute_steps"], True),)
            trav, comp = world.traversals, res["compute_steps"]
            exact_total += trav
            if r > 1 and outcome == REPRODUCED:
                outcome = _innermost_outcome(res)
            final = (world, outcome)
        else:
            run = _level_run(g, start, r, consts, seed, budget)
            rep = own_runs[r] = run.report
            lv = level_layout(r, consts)
            levels = [LevelCost(r, lv.m, lv.m1, lv.z, len(run.context.offsets),
                                rep.edge_traversals, rep.computation_steps, True)]
            exact_total += rep.edge_traversals
            trav, comp = rep.edge_traversals, rep.computation_steps
            for i in range(r - 1, 0, -1):
                if i not in own_runs:
                    own_runs[i] = _level_run(g, start, i, consts, seed, None).report
                if i not in units:
                    units[i] = unit_costs(g, start, i, consts, seed)
                own, u = own_runs[i], units[i]
                trav, comp = (
                    own.edge_traversals + u["reloc"][0] * trav + u["bit"][0] * comp,
                    own.computation_steps + u["reloc"][1] * trav + u["bit"][1] * comp,
                )
                li = level_layout(i, consts)
                levels.append(LevelCost(i, li.m, li.m1, li.z, len(generator_walk(li.z, seed)),
                                         trav, comp, False))
            outcome = rep.outcome
            final = (run.world, outcome)
        iterations.append(ExploreIteration(r, outcome, tuple(levels), trav, comp))
        if outcome == EXPLORED:
            break
    world, outcome = final
    r_final = iterations[-1].r
    return ExploreReport(
        outcome=outcome, r=r_final, start=start, final_vertex=world.position,
        all_pebbles_carried=all(x == CARRIED for x in world.where.values()),
        visited_all=len(world.visited) == g.vertex_count,
        pebbles_used=r_final * (2 * consts.c_prime + 3),
        memory_bits=_memory_bits(r_final, consts),
        edge_traversals=sum(it.traversals for it in iterations),
        computation_steps=sum(it.computation_steps for it in iterations),
        exact_traversals=exact_total, iterations=tuple(iterations), constants=consts, mode=mode)


def _innermost_outcome(res: dict) -> str:
    while res.get("inner") is not None and "outcome" in res["inner"]:
        res = res["inner"]
    return res["outcome"]


def _memory_bits(r: int, consts: Constants) -> int:
    # state of the level-0 machine (log of c^(r+2) states), its tape c', and the counter r
    return (r + 2) * (consts.c.bit_length() - 1) + consts.c_prime + max(1, r.bit_length())


def predicted_r(n: int) -> int:
    """Smallest r with n < 2^(2^r): the level the mechanism terminates at."""
    r = 1
    while n >= 2 ** (2 ** r):
        r += 1
    return r


def stated_r(n: int) -> int:
    """ceil(log2 log2 n) + 1 for n >= 2."""
    return math.ceil(math.log2(math.log2(n))) + 1 if n > 2 else 1
