from __future__ import annotations

import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from spinal_lab.generators import path_graph, random_glued, vicsek
from spinal_lab.io import (
    FORMAT,
    FormatError,
    dumps_graph,
    dumps_report,
    dumps_spinal,
    edges_csv,
    format_value,
    loads_graph,
    loads_spinal,
    to_dot,
    volumes_csv,
)
from spinal_lab.spinal import InvalidSpinalGraph


@given(st.integers(0, 10**6), st.integers(1, 6), st.integers(1, 5))
def test_spinal_round_trip(seed, k, f):
    sg = random_glued(seed, k, f)
    text = dumps_spinal(sg, {"seed": seed})
    back = loads_spinal(text)
    assert back.graph == sg.graph
    assert np.array_equal(back.spine, sg.spine) and np.array_equal(back.pi, sg.pi)
    assert dumps_spinal(back, {"seed": seed}) == text


def test_graph_round_trip_keeps_boundary():
    g = path_graph(9, boundary_ends=True)
    back = loads_graph(dumps_graph(g))
    assert back == g and back.boundary.tolist() == [0, 8]


def test_key_order_is_fixed():
    doc = json.loads(dumps_spinal(vicsek(2, 0).spinal, {"center": 0}))
    assert list(doc) == ["format", "vertex_count", "edges", "boundary", "spine", "pi", "provenance"]
    assert doc["format"] == FORMAT


@pytest.mark.parametrize(
    "text",
    ["not json", "[1, 2]", '{"format": "other", "vertex_count": 1, "edges": []}',
     '{"format": "%s", "edges": []}' % FORMAT],
)
def test_format_errors(text):
    with pytest.raises(FormatError):
        loads_graph(text)


def test_spinal_document_needs_spine():
    with pytest.raises(FormatError):
        loads_spinal(dumps_graph(path_graph(3)))


def test_invalid_spinal_document_rejected():
    doc = json.loads(dumps_spinal(vicsek(2, 1).spinal))
    doc["pi"][0] = (doc["pi"][0] + 1) % doc["vertex_count"]
    with pytest.raises(InvalidSpinalGraph):
        loads_spinal(json.dumps(doc))
    assert loads_spinal(json.dumps(doc), validate=False).vertex_count == 21


def test_csv_and_dot():
    assert volumes_csv([1, 3, 5]) == "r,volume\n0,1\n1,3\n2,5\n"
    assert edges_csv(path_graph(3)) == "u,v\n0,1\n1,2\n"
    dot = to_dot(path_graph(3), [1])
    assert dot.splitlines() == ["graph G {", "  1 [shape=box];", "  0 -- 1;", "  1 -- 2;", "}"]


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_float_text_round_trips(x):
    assert float(format_value(x)) == x


def test_report_numbers():
    text = dumps_report({"b": np.float64(0.1), "a": np.int64(3), "c": math.inf, "d": np.array([True])})
    assert text == '{"a":3,"b":0.1,"c":"inf","d":[true]}\n'
