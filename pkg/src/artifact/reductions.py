"""Compilers trading memory for pebbles and pebbles for agents, plus the reproduction check."""
from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import Hashable, Sequence

from .agents import (
    CARRIED,
    AgentSpec,
    CooperativeAgent,
    CooperativeAgentSpec,
    RuleTable,
    Trace,
    Transition,
    agent_from_rule,
    pebble_splits,
    run_cooperative,
    run_single,
)
from .graph import PortLabeledGraph

START, COMP, HALT, BACK1, BACK2, SWAP = "start'", "comp", "halt", "back-1", "back-2", "swap"
SIX_STATES = (START, COMP, HALT, BACK1, BACK2, SWAP)


# --- reproduction -----------------------------------------------------------------

@dataclass(frozen=True)
class ReproductionWitness:
    original_edges: tuple[tuple[int, int], ...]
    reproducer_edges: tuple[tuple[int, int], ...]
    alignment: tuple[int, ...]


@dataclass(frozen=True)
class ReproductionFailure:
    index: int
    edge: tuple[int, int] | None
    reason: str

    def __bool__(self) -> bool:
        return False


def walk_edges(walk: Sequence[int]) -> tuple[tuple[int, int], ...]:
    return tuple(zip(walk, walk[1:]))


def check_reproduction(t_original: Trace | Sequence[int], t_new: Trace | Sequence[int],
                       designated_agent: int = 0, original_agent: int = 0
                       ) -> ReproductionWitness | ReproductionFailure:
    """Greedy leftmost embedding of the original edge sequence into the designated agent's."""
    w_orig = t_original.walks[original_agent] if isinstance(t_original, Trace) else t_original
    w_new = t_new.walks[designated_agent] if isinstance(t_new, Trace) else t_new
    if w_orig and w_new and w_orig[0] != w_new[0]:
        return ReproductionFailure(0, None, "different start vertices")
    orig = walk_edges(list(w_orig))
    new = walk_edges(list(w_new))
    alignment = []
    j = 0
    for i, e in enumerate(orig):
        while j < len(new) and new[j] != e:
            j += 1
        if j == len(new):
            return ReproductionFailure(i, e, f"edge {e} (index {i}) not found")
        alignment.append(j)
        j += 1
    return ReproductionWitness(orig, new, tuple(alignment))


# --- memory to pebbles ----------------------------------------------------------

@dataclass(frozen=True)
class StateEncoding:
    """Binary encoding of state indices as subsets of the extra pebbles."""

    states: tuple
    base: int  # extra pebbles are base+1 .. base+r
    r: int

    @property
    def extra(self) -> frozenset[int]:
        return frozenset(range(self.base + 1, self.base + self.r + 1))

    def encode(self, state: Hashable) -> frozenset[int]:
        i = self.states.index(state)
        return frozenset(self.base + 1 + b for b in range(self.r) if i >> b & 1)

    def decode(self, pebs: frozenset[int]) -> Hashable:
        i = sum(1 << (p - self.base - 1) for p in pebs)
        if i >= len(self.states):
            raise KeyError(f"pebble code {sorted(pebs)} names no state")
        return self.states[i]


def compile_states_to_pebbles(a: AgentSpec) -> AgentSpec:
    """A six-state agent storing the original state in ceil(log2 s) extra pebbles."""
    s = len(a.states)
    r = max(0, math.ceil(math.log2(s))) if s > 1 else 0
    p = a.pebbles
    enc = StateEncoding(tuple(a.states), p, r)
    P = a.pebble_set
    extra = enc.extra
    everything = P | extra

    def rule(state, d, l, carried, here):
        if state == START:
            if carried != everything or here:
                return None
            code = enc.encode(a.start)
            nxt = HALT if a.start in a.halting else COMP
            return Transition(nxt, None, code | P, extra - code)
        if state == COMP:
            try:
                sigma = enc.decode(carried & extra)
            except KeyError:
                return None
            tr = a.delta(sigma, d, l, carried & P, here & P)
            code = enc.encode(tr.state)
            out_carried = tr.carried | code
            out_here = tr.here | (extra - code)
            if tr.state in a.halting:
                nxt = HALT
            elif tr.move is None:
                nxt = COMP
            else:
                nxt = BACK1
            return Transition(nxt, tr.move, out_carried, out_here)
        if state == BACK1:
            return Transition(BACK2, l, carried - extra, here | (extra & carried))
        if state == BACK2:
            return Transition(SWAP, l, carried | (extra & here), here - extra)
        if state == SWAP:
            # a true exchange of the extra pebbles held and lying here
            return Transition(COMP, None, (carried - extra) | (extra & here),
                              (here - extra) | (extra & carried))
        return None

    return agent_from_rule(SIX_STATES, {HALT}, START, rule, pebbles=p + r,
                           degrees=a.degrees, name=f"mem2peb({a.name})")


# --- pebbles to agents ----------------------------------------------------------

def c_state(j: int) -> tuple[str, int]:
    return ("c", j)


def d_state(j: int) -> tuple[str, int]:
    return ("d", j)


def _vector_index(i: int, j: int) -> int:
    """Slot of agent j inside agent i's visible vector."""
    return j if j < i else j - 1


def compile_pebbles_to_agents(a: AgentSpec) -> CooperativeAgentSpec:
    """Agent 0 replays ``a``; agent j stands in for pebble j.

    Every member evaluates the original transition on its own degree and
    arrival port, as the construction prescribes.
    """
    p = a.pebbles
    k = p + 1

    def pebble_sets(i: int, own_state, visible: tuple) -> tuple[frozenset[int], frozenset[int]]:
        carried, here = set(), set()
        for j in range(1, k):
            sj = own_state if j == i else visible[_vector_index(i, j)]
            if sj == c_state(j):
                carried.add(j)
            elif sj == d_state(j):
                here.add(j)
        return frozenset(carried), frozenset(here)

    def rule0(state, visible, d, l):
        carried, here = pebble_sets(0, state, visible)
        tr = a.delta(state, d, l, carried, here)
        return (tr.state, tr.move)

    def rule_j(j):
        def rule(state, visible, d, l):
            sigma0 = visible[_vector_index(j, 0)]
            if sigma0 is None:
                return (state, None)
            carried, here = pebble_sets(j, state, visible)
            tr = a.delta(sigma0, d, l, carried, here)
            if j in tr.carried:
                return (c_state(j), tr.move)
            if j in tr.here:
                return (d_state(j), None)
            return None
        return rule

    members = [CooperativeAgent(tuple(a.states), frozenset(a.halting), a.start,
                                RuleTable(rule0, lambda: iter(())), f"A0({a.name})")]
    for j in range(1, k):
        states = (c_state(j), d_state(j))
        members.append(CooperativeAgent(states, frozenset(states), c_state(j),
                                        RuleTable(rule_j(j), lambda: iter(())), f"A{j}"))
    return CooperativeAgentSpec(tuple(members))


def compile_pebbles_to_agents_port_aware(a: AgentSpec) -> CooperativeAgentSpec:
    """Repaired variant: agent 0 publishes its arrival port in its state.

    After every move agent 0 spends one stay step copying the observed arrival
    port into its state, so that pebble agents evaluate the original
    transition on agent 0's port rather than their own. Agent 0 then has
    ``s * (max_degree + 1)`` states; traversal counts are unchanged.
    """
    p = a.pebbles
    k = p + 1
    max_deg = max(a.degrees)
    states0 = tuple((q, x) for q in a.states for x in (None, *range(max_deg)))
    halting0 = frozenset((q, x) for (q, x) in states0 if q in a.halting)

    def pebble_sets(i, own_state, visible):
        carried, here = set(), set()
        for j in range(1, k):
            sj = own_state if j == i else visible[_vector_index(i, j)]
            if sj == c_state(j):
                carried.add(j)
            elif sj == d_state(j):
                here.add(j)
        return frozenset(carried), frozenset(here)

    def rule0(state, visible, d, l):
        q, port = state
        if port is None:
            return ((q, l), None)
        carried, here = pebble_sets(0, state, visible)
        tr = a.delta(q, d, port, carried, here)
        return ((tr.state, port if tr.move is None else None), tr.move)

    def rule_j(j):
        def rule(state, visible, d, l):
            s0 = visible[_vector_index(j, 0)]
            if s0 is None or s0[1] is None:
                return (state, None)
            carried, here = pebble_sets(j, state, visible)
            tr = a.delta(s0[0], d, s0[1], carried, here)
            if j in tr.carried:
                return (c_state(j), tr.move)
            if j in tr.here:
                return (d_state(j), None)
            return None
        return rule

    members = [CooperativeAgent(states0, halting0, (a.start, 0),
                                RuleTable(rule0, lambda: iter(())), f"A0*({a.name})")]
    for j in range(1, k):
        states = (c_state(j), d_state(j))
        members.append(CooperativeAgent(states, frozenset(states), c_state(j),
                                        RuleTable(rule_j(j), lambda: iter(())), f"A{j}"))
    return CooperativeAgentSpec(tuple(members))


# --- co-simulation oracles ------------------------------------------------------

@dataclass(frozen=True)
class InvariantReport:
    ok: bool
    steps: int
    first_violation: dict | None = None


def replay_steps_needed(original: Trace, a: AgentSpec) -> int:
    """Transitions the six-state agent needs to replay the recorded steps."""
    total = 1
    for ev in original.events:
        total += 4 if ev.kind == "move" and ev.state not in a.halting else 1
    return total


def check_states_to_pebbles(a: AgentSpec, g: PortLabeledGraph, start: int, steps: int) -> dict:
    compiled = compile_states_to_pebbles(a)
    orig = run_single(a, g, start, steps)
    new = run_single(compiled, g, start, replay_steps_needed(orig, a))
    wit = check_reproduction(orig, new)
    ratio_ok = new.traversals <= 3 * orig.traversals
    return {"reproduced": bool(isinstance(wit, ReproductionWitness)), "ratio_ok": ratio_ok,
            "original_traversals": orig.traversals, "compiled_traversals": new.traversals,
            "witness": wit}


def check_pebbles_to_agents(a: AgentSpec, g: PortLabeledGraph, start: int, steps: int,
                            *, port_aware: bool = False) -> dict:
    """Lockstep comparison of ``a`` with its compiled agent set.

    With ``port_aware`` the repaired compiler is used and the bookkeeping
    steps of agent 0 (copying its arrival port) are skipped when aligning.
    """
    spec = compile_pebbles_to_agents_port_aware(a) if port_aware else compile_pebbles_to_agents(a)
    orig = run_single(a, g, start, steps)
    budget = orig.steps
    if port_aware:
        budget += sum(1 for ev in orig.events if ev.kind == "move" and ev.state not in a.halting)
    coop = run_cooperative(spec, g, start, budget)
    configs = coop.configurations
    if port_aware:
        acting = [c for c in configs if c.agents[0][0][1] is not None]
        if coop.halted and configs[-1].agents[0][0][1] is None:
            acting.append(configs[-1])
        configs = acting[:len(orig.configurations)]

    def state0(c):
        return c.agents[0][0][0] if port_aware else c.agents[0][0]

    pebble_ids = sorted(a.pebble_set)
    violation = None
    horizon = min(len(orig.configurations), len(configs))
    for t in range(horizon):
        (sigma, pos, _back), = orig.configurations[t].agents
        where = orig.configurations[t].pebbles
        agents = configs[t].agents
        bad = []
        if state0(configs[t]) != sigma or agents[0][1] != pos:
            bad.append("agent 0 differs from the original")
        for idx, j in enumerate(pebble_ids):
            pj = pos if where[idx] == CARRIED else where[idx]
            if agents[j][1] != pj:
                bad.append(f"agent {j} is not at pebble {j}")
            if (agents[j][0] == c_state(j)) != (where[idx] == CARRIED):
                bad.append(f"agent {j} carried flag differs")
        if bad:
            violation = {"step": t, "problems": bad,
                         "original": orig.configurations[t], "compiled": configs[t]}
            break
    if violation is None and len(orig.configurations) != len(configs):
        violation = {"step": horizon, "problems": ["runs have different lengths"]}
    wit = check_reproduction(orig, coop, designated_agent=0)
    per_agent = {i: len(coop.walks[i]) - 1 for i in coop.walks}
    ratio_ok = all(v <= orig.traversals for v in per_agent.values())
    return {"invariant": InvariantReport(violation is None, horizon, violation),
            "reproduced": bool(isinstance(wit, ReproductionWitness)), "ratio_ok": ratio_ok,
            "original_traversals": orig.traversals, "agent_traversals": per_agent}


def random_agent(seed: int, *, max_states: int = 8, max_pebbles: int = 2,
                 degrees: tuple[int, ...] = (3,), halt_prob: float = 0.05) -> AgentSpec:
    """A total random transition table over the agent's full input domain."""
    rng = random.Random(seed)
    s = rng.randint(1, max_states)
    p = rng.randint(0, max_pebbles)
    states = tuple(f"q{i}" for i in range(s))
    halting = frozenset(q for q in states[1:] if rng.random() < halt_prob * s)
    table = {}
    pebbles = frozenset(range(1, p + 1))
    for d in degrees:
        for q in states:
            for back in range(d):
                for carried, here in pebble_splits(pebbles):
                    at_hand = sorted(carried | here)
                    keep = frozenset(x for x in at_hand if rng.random() < 0.5)
                    move = None if rng.random() < 0.25 else rng.randrange(d)
                    table[(q, d, back, carried, here)] = Transition(
                        rng.choice(states), move, keep, frozenset(at_hand) - keep)
    return AgentSpec(states, halting, states[0], p, table, degrees, f"random-{seed}")
