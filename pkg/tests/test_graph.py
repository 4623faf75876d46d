from __future__ import annotations

import math

import networkx as nx
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import to_nx
from spinal_lab.generators import lattice_plate, path_graph, vicsek
from spinal_lab.graph import (
    Disconnected,
    DuplicateEdge,
    EmptySample,
    IdGap,
    SelfLoop,
    ball,
    ball_intersection_min_ratio,
    build_graph,
    distance,
    measure_doubling,
    safe_radii,
    safe_radius,
    volume_table,
)


@st.composite
def connected_graphs(draw, max_n=12):
    n = draw(st.integers(1, max_n))
    parents = [draw(st.integers(0, i - 1)) for i in range(1, n)]
    edges = {(p, i) for i, p in enumerate(parents, start=1)}
    extra = draw(st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)), max_size=2 * n))
    edges |= {tuple(sorted(e)) for e in extra if e[0] != e[1]}
    return build_graph(sorted(edges), vertex_count=n)


def test_k2():
    g = build_graph([(0, 1)])
    assert g.vertex_count == 2 and g.degrees.tolist() == [1, 1]


def test_triangle_degrees():
    g = build_graph([(0, 1), (1, 2), (2, 0)])
    assert g.degrees.tolist() == [2, 2, 2]
    assert g.edges().tolist() == [[0, 1], [0, 2], [1, 2]]


@pytest.mark.parametrize(
    "edges, err",
    [
        ([(0, 1), (2, 3)], Disconnected),
        ([(0, 0)], SelfLoop),
        ([(0, 1), (1, 0)], DuplicateEdge),
        ([(0, 2)], IdGap),
    ],
)
def test_build_rejects(edges, err):
    with pytest.raises(err) as info:
        build_graph(edges)
    assert str(info.value)


def test_adjacency_sorted_and_immutable():
    g = build_graph([(3, 0), (0, 2), (1, 0), (2, 3)])
    assert g.neighbors(0).tolist() == [1, 2, 3]
    with pytest.raises(ValueError):
        g.indices[0] = 5


def test_path_distances():
    g = path_graph(3)
    assert distance(g, 0, 2) == 2
    assert distance(g, 1, 1) == 0


def test_vicsek_level1_diagonal_distance():
    v = vicsek(2, 1)
    assert distance(v.graph, v.center, v.vertex_at((3, 3))) == 3
    assert nx.shortest_path_length(to_nx(v.graph), v.center, v.vertex_at((3, 3))) == 3


def test_ball_examples():
    g = path_graph(101)
    assert ball(g, 50, 0).tolist() == [50]
    for r in range(51):
        assert len(ball(g, 50, r)) == 2 * r + 1
    plate = lattice_plate(2, 2)
    assert len(ball(plate.graph, plate.origin, 2)) == 13
    assert len(ball(g, 50, 2.7)) == 5


def test_volume_tables():
    assert volume_table(build_graph([(0, 1)]), 0, 2).volumes == (1, 2, 2)
    assert volume_table(path_graph(7), 3, 3).volumes == (1, 3, 5, 7)


@given(connected_graphs())
def test_distances_match_networkx(g):
    ref = dict(nx.all_pairs_shortest_path_length(to_nx(g)))
    for x in range(g.vertex_count):
        for y in range(g.vertex_count):
            assert distance(g, x, y) == ref[x][y]


@given(connected_graphs(), st.data())
def test_metric_axioms(g, data):
    x, y, z = (data.draw(st.integers(0, g.vertex_count - 1)) for _ in range(3))
    assert distance(g, x, y) == distance(g, y, x)
    assert distance(g, x, z) <= distance(g, x, y) + distance(g, y, z)
    assert (distance(g, x, y) == 0) == (x == y)


@given(connected_graphs(), st.data())
def test_volume_table_matches_balls(g, data):
    x = data.draw(st.integers(0, g.vertex_count - 1))
    vt = volume_table(g, x, g.vertex_count)
    assert vt[0] == 1
    assert all(a <= b for a, b in zip(vt.volumes, vt.volumes[1:]))
    for r in range(g.vertex_count + 1):
        assert vt[r] == len(ball(g, x, r))


def test_safe_radius_on_truncated_path():
    g = path_graph(11, boundary_ends=True)
    assert safe_radius(g, 5) == 5
    assert safe_radius(path_graph(11), 5) == math.inf
    assert safe_radii(path_graph(7, boundary_ends=True)).tolist() == [0, 1, 2, 3, 2, 1, 0]
    assert np.all(np.isinf(safe_radii(path_graph(4))))


def test_doubling_path():
    g = path_graph(201)
    est = measure_doubling(g, range(60, 141, 10), (1, 40))
    # (2R+1)/(2r+1) <= 3 R/r, so nu = 1 is feasible with C_d <= 3
    assert dict(est.scan)[1.0] <= 3
    assert est.nu <= 1.0
    assert est.C_d <= est.c_max
    assert est.holds(g)


def test_doubling_complete_graph():
    k5 = build_graph([(i, j) for i in range(5) for j in range(i + 1, 5)])
    est = measure_doubling(k5, range(5), (1, 3))
    assert est.nu == pytest.approx(0.1)
    assert est.C_d <= 1.0 + 1e-12


def test_doubling_vicsek_exponent():
    v = vicsek(2, 4)
    est = measure_doubling(v.graph, [v.center], (1, 27))
    assert est.holds(v.graph)
    assert 1.0 <= est.nu <= 2.0
    # the scan at log_3 5 keeps a bounded constant
    scan = dict(est.scan)
    assert scan[1.5] <= 4.0


def test_doubling_empty_sample():
    with pytest.raises(EmptySample):
        measure_doubling(path_graph(5), [], (1, 2))


def test_ball_intersection_containment():
    g = path_graph(21)
    rep = ball_intersection_min_ratio(g, [10], [3], r_cap=3)
    # x = y gives ratio 1; the minimum is over all x in B(y, 3)
    assert 0 < rep.min_ratio <= 1


def test_ball_intersection_hand_count():
    g = path_graph(201)
    rep = ball_intersection_min_ratio(g, [100], [2], r_cap=2)
    # x = 102, r = 2: B(x,2) = {100..104}, intersection {100, 101, 102}
    assert rep.min_ratio == pytest.approx(0.6)
    assert rep.argmin[1:] == (2, 100, 2)
    assert rep.argmin[0] in (98, 102)


def test_ball_intersection_sampling_is_seeded():
    v = vicsek(2, 2)
    a = ball_intersection_min_ratio(v.graph, v.spinal.spine[:10], [1, 3, 9], budget=500, seed=5)
    b = ball_intersection_min_ratio(v.graph, v.spinal.spine[:10], [1, 3, 9], budget=500, seed=5)
    assert not a.exhaustive
    assert a == b


def test_ball_intersection_brute_force_small():
    g = build_graph([(0, 1), (1, 2), (2, 3), (3, 0), (1, 4), (4, 5)])
    h = to_nx(g)
    d = dict(nx.all_pairs_shortest_path_length(h))
    best = 2.0
    for y in range(6):
        for R in (1, 2):
            for x in [v for v in range(6) if d[y][v] <= R]:
                for r in range(1, 2 * R + 1):
                    bx = {v for v in range(6) if d[x][v] <= r}
                    by = {v for v in range(6) if d[y][v] <= R}
                    best = min(best, len(bx & by) / len(bx))
    rep = ball_intersection_min_ratio(g, range(6), [1, 2])
    assert rep.min_ratio == pytest.approx(best)
    assert rep.exhaustive
    assert rep.case1_count + rep.case2_count == rep.tuples


def test_edges_sorted_lexicographic():
    g = build_graph(np.array([[4, 1], [0, 3], [1, 2], [2, 0], [3, 4]]))
    e = g.edges().tolist()
    assert e == sorted(e)
    assert all(u < v for u, v in e)
