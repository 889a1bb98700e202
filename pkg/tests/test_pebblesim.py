from __future__ import annotations

import pytest
from hypothesis import given, strategies as st

from artifact.agents import GraphWorld, random_pebble_machine, run_pebble_machine
from artifact.corpus import exhaustive_corpus, sampled_corpus
from artifact.graph import Edge, PortLabeledGraph, generate
from artifact.pebblesim import (EXPLORED, REPRODUCED, HostContext, LayoutError, TapeLayout,
                                bit_roundtrip, build_simulator, constants, explore_loglog,
                                predicted_r, simulate, stated_r)
from artifact.sequences import follow, generator_walk

FIG_TAPE = (0, 1, 0, 1, 1, 0, 1, 0, 0, 0, 1, 1)


def test_twelve_bit_layout_ids():
    # three bits per pebble, chunks (0,1,0) (1,1,0) (1,0,0) (0,1,1)
    lsb = TapeLayout.desk_layout(6, 3)
    msb = TapeLayout.desk_layout(6, 3, bit_order="msb")
    assert lsb.memory_count == 4 and lsb.z == 8
    assert lsb.encode(FIG_TAPE) == (2, 3, 1, 6)
    assert msb.encode(FIG_TAPE) == (2, 6, 4, 3)
    # the listed ids (2,6,1,12) decode to neither tape: 12 does not fit three bits
    assert max((2, 6, 1, 12)) >= lsb.z


@given(st.sampled_from([(4, 2), (6, 3), (6, 4), (8, 2)]), st.data())
def test_encode_decode_roundtrip(mm, data):
    m, m1 = mm
    layout = TapeLayout.desk_layout(m, m1)
    bits = tuple(data.draw(st.lists(st.integers(0, 1), min_size=2 * m, max_size=2 * m)))
    ids = layout.encode(bits)
    assert all(0 <= x < layout.z for x in ids)
    assert layout.decode(ids) == bits


def test_layout_rejects_bad_block_size():
    with pytest.raises(LayoutError):
        TapeLayout.desk_layout(5, 4)


@pytest.mark.parametrize("fast", [False, True])
@pytest.mark.parametrize("mm", [(4, 2), (6, 3)])
def test_bit_roundtrip(fast, mm):
    layout = TapeLayout.desk_layout(*mm)
    for e in sampled_corpus()[:3]:
        assert bit_roundtrip(e.graph, 0, layout, fast=fast) == []


@pytest.mark.parametrize("fast", [False, True])
def test_pebble_ids_follow_first_occurrence_order(fast):
    """A dropped pebble's id is the rank of its vertex among omega's first visits."""
    g = sampled_corpus()[0].graph
    layout = TapeLayout.desk_layout(6, 3)
    walk = generator_walk(layout.z)
    order = []
    for v in follow(g, 0, walk.offsets).vertices:
        if v not in order:
            order.append(v)
    for target in range(layout.z):
        world = GraphWorld(g, 0, range(1, layout.role_count() + 1), record_walk=False)
        ctx = HostContext(world, layout, walk, 0, fast=fast)
        ctx.drop(ctx.p_start)
        ctx.restart()
        p = ctx.memory[0]
        world.where[p] = order[target]
        assert ctx.get_pebble_id(p) == target


def _subsequence(short, long):
    it = iter(long)
    return all(x in it for x in short)


@pytest.mark.parametrize("seed", range(4))
def test_simulated_machine_reproduces_direct_run(seed):
    layout = TapeLayout.desk_layout(*((4, 2), (6, 3))[seed % 2])
    T = random_pebble_machine(seed, layout.simulated_length, pebbles=1)
    g = sampled_corpus()[seed].graph
    direct = run_pebble_machine(T, g, 0, 10 ** 6)
    strict = simulate(build_simulator(T, layout), g, 0, oracle_snapshots=True)
    fast = simulate(build_simulator(T, layout, fast=True), g, 0, oracle_snapshots=True)
    assert strict.report.outcome == fast.report.outcome == REPRODUCED
    assert strict.tapes == fast.tapes == direct.tape_snapshots
    assert _subsequence(direct.walks[0], strict.world.walk)
    assert strict.report.final_vertex == fast.report.final_vertex
    assert strict.report.edge_traversals == fast.report.edge_traversals


def test_small_graphs_are_explored_and_left_clean():
    layout = TapeLayout.desk_layout(6, 3)
    T = random_pebble_machine(1, layout.simulated_length)
    for e in exhaustive_corpus(6):
        rep = simulate(build_simulator(T, layout), e.graph, 0).report
        assert rep.outcome == EXPLORED and rep.final_vertex == 0 and rep.all_pebbles_carried
        assert rep.visited_count == e.graph.vertex_count


@pytest.mark.parametrize("n, mechanism, stated", [
    (4, 2, 2), (8, 2, 3), (15, 2, 3), (16, 3, 3), (17, 3, 4), (255, 3, 4), (256, 4, 4), (257, 4, 5),
])
def test_terminating_level_formulas(n, mechanism, stated):
    assert predicted_r(n) == mechanism
    assert stated_r(n) == stated


def test_constants_are_pinned():
    c = constants(0)
    assert (c.c0, c.c1, c.c_prime, c.m0) == (12, 6, 72, 90)
    # c_1 bounds the generator walk lengths it was fitted on
    assert all(length <= 2 ** (c.c1 * k) for k, length in c.c1_samples)


@pytest.mark.parametrize("n", [2, 3])
def test_literal_and_collapsed_explorers_agree_on_paths(n):
    g = PortLabeledGraph(n, tuple(Edge(i, i + 1, 0 if i == 0 else 1, 0) for i in range(n - 1)))
    a = explore_loglog(g, 0, mode="collapsed")
    b = explore_loglog(g, 0, mode="literal")
    assert (a.r, a.outcome, a.edge_traversals) == (b.r, b.outcome, b.edge_traversals)
    assert b.visited_all and b.final_vertex == 0 and b.all_pebbles_carried


def test_literal_explorer_on_k4_bounded_by_collapsed():
    g = generate("k4")
    a = explore_loglog(g, 0, mode="collapsed")
    b = explore_loglog(g, 0, mode="literal")
    assert (a.r, a.outcome, a.final_vertex) == (b.r, b.outcome, b.final_vertex) == (2, EXPLORED, 0)
    assert b.visited_all and b.all_pebbles_carried
    assert b.edge_traversals <= a.edge_traversals


@pytest.mark.parametrize("idx", [0, 5, 40, 100])
def test_explorer_on_corpus_graphs(idx):
    e = (exhaustive_corpus(10) + sampled_corpus())[idx]
    rep = explore_loglog(e.graph, 0)
    assert rep.visited_all and rep.final_vertex == 0 and rep.all_pebbles_carried
    assert rep.r == predicted_r(e.graph.vertex_count)
    assert rep.pebbles_used == rep.r * (2 * rep.constants.c_prime + 3)

