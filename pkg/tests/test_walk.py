from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from spinal_lab.analysis import TooFewPoints
from spinal_lab.generators import path_graph, random_glued, vicsek
from spinal_lab.graph import build_graph
from spinal_lab.walk import (
    BoundaryReached,
    ReturnProbSeries,
    decay_fit,
    nonincreasing_violations,
    return_probabilities_exact,
    return_probabilities_mc,
)


def dense_return(g, x, t_max):
    n = g.vertex_count
    P = np.zeros((n, n))
    for a, b in g.edges().tolist():
        P[a, b] = 1 / g.degrees[a]
        P[b, a] = 1 / g.degrees[b]
    out, v = [], np.eye(n)[x]
    for t in range(t_max + 1):
        if t % 2 == 0:
            out.append(v[x])
        v = v @ P
    return np.array(out)


def test_k2_return_is_one():
    s = return_probabilities_exact(build_graph([(0, 1)]), 0, 10, waive_boundary=True)
    assert np.all(s.p == 1.0)


def test_path_p2_and_central_binomial():
    g = path_graph(201, boundary_ends=True)
    s = return_probabilities_exact(g, 100, 60)
    assert s.at(2) == pytest.approx(0.5)
    for t in range(0, 61, 2):
        assert s.at(t) == pytest.approx(math.comb(t, t // 2) / 2**t, rel=1e-12)


@given(st.integers(0, 10**6), st.integers(1, 5), st.integers(1, 4), st.sampled_from(["half", "direct"]))
def test_exact_matches_dense_powers(seed, k, f, method):
    sg = random_glued(seed, k, f)
    g = sg.graph
    if g.vertex_count < 2:
        return
    s = return_probabilities_exact(g, 0, 12, method=method, waive_boundary=True)
    assert np.max(np.abs(s.p - dense_return(g, 0, 12))) <= 1e-12
    assert s.max_mass_error <= 1e-12


def test_half_and_direct_agree_on_vicsek():
    v = vicsek(2, 3)
    a = return_probabilities_exact(v.graph, v.center, 40, "half")
    b = return_probabilities_exact(v.graph, v.center, 40, "direct")
    assert np.max(np.abs(a.p - b.p)) <= 1e-13
    assert a.max_mass_error <= 1e-12 and b.max_mass_error <= 1e-12


def test_monte_carlo_within_three_standard_errors():
    v = vicsek(2, 2)
    exact = return_probabilities_exact(v.graph, v.center, 16)
    mc = return_probabilities_mc(v.graph, v.center, 16, walkers=20_000, seed=11)
    assert not mc.exact
    inside = np.abs(mc.p - exact.p) <= 3 * np.maximum(mc.stderr, 1e-3)
    assert inside.all()
    again = return_probabilities_mc(v.graph, v.center, 16, walkers=20_000, seed=11)
    assert np.array_equal(mc.p, again.p)


def test_boundary_reached():
    g = path_graph(21, boundary_ends=True)
    with pytest.raises(BoundaryReached):
        return_probabilities_exact(g, 10, 20)
    with pytest.raises(BoundaryReached):
        return_probabilities_mc(g, 10, 20, walkers=10)
    assert len(return_probabilities_exact(g, 10, 18).t) == 10


def test_bad_arguments():
    g = path_graph(5)
    with pytest.raises(ValueError):
        return_probabilities_exact(g, 2, -2)
    with pytest.raises(ValueError):
        return_probabilities_exact(g, 2, 4, method="spectral")


def test_decay_fit_path():
    g = path_graph(2005, boundary_ends=True)
    s = return_probabilities_exact(g, 1002, 2000)
    assert decay_fit(s, (100, 2000)).slope == pytest.approx(-0.5, abs=0.05)
    assert nonincreasing_violations(s) == []


def test_decay_fit_too_few_points():
    s = return_probabilities_exact(path_graph(41, boundary_ends=True), 20, 10)
    with pytest.raises(TooFewPoints):
        decay_fit(s, (6, 8))


def test_nonincreasing_violations_reported():
    star = build_graph([(0, i) for i in range(1, 5)])
    exact = return_probabilities_exact(star, 1, 8, waive_boundary=True)
    assert exact.at(2) == pytest.approx(0.25)
    assert nonincreasing_violations(exact) == []
    noisy = ReturnProbSeries(0, np.arange(0, 10, 2), np.array([1.0, 0.5, 0.6, 0.4, 0.45]), False)
    assert nonincreasing_violations(noisy) == [4, 8]
