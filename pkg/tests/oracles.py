"""Independent reference implementations used only by the tests."""

from __future__ import annotations

import itertools
import math
from collections import deque

import networkx as nx
import numpy as np


def to_nx(g) -> nx.Graph:
    h = nx.Graph()
    h.add_nodes_from(range(g.vertex_count))
    h.add_edges_from(map(tuple, g.edges().tolist()))
    return h


def vicsek_coordinate_oracle(dim: int, level: int) -> tuple[set, set]:
    """Vertex and edge sets of V^dim_level from the digit expansion of cell centres.

    Every level-0 cell is centred at Σ_j 2·3^(j-1) e_j with e_j ∈ {0} ∪ {±1}^dim
    and joins its centre to its 2^dim corners.
    """
    corners = list(itertools.product((-1, 1), repeat=dim))
    digits = [(0,) * dim] + corners
    centres = set()
    for choice in itertools.product(digits, repeat=level):
        centres.add(tuple(sum(2 * 3**j * e[i] for j, e in enumerate(choice)) for i in range(dim)))
    verts, edges = set(), set()
    for c in centres:
        verts.add(c)
        for e in corners:
            q = tuple(ci + ei for ci, ei in zip(c, e))
            verts.add(q)
            edges.add(frozenset((c, q)))
    return verts, edges


def vicsek_oracle_points(dim: int, level: int) -> np.ndarray:
    """Sorted unique vertex coordinates of V^dim_level; same digit expansion, vectorised."""
    corners = np.array(list(itertools.product((-1, 1), repeat=dim)), dtype=np.int64)
    digits = np.vstack([np.zeros((1, dim), dtype=np.int64), corners])
    centres = np.zeros((1, dim), dtype=np.int64)
    for j in range(level):
        centres = (centres[:, None, :] + 2 * 3**j * digits[None, :, :]).reshape(-1, dim)
    pts = (centres[:, None, :] + np.vstack([np.zeros((1, dim), dtype=np.int64), corners])[None]).reshape(-1, dim)
    return np.unique(pts, axis=0)


def lattice_l1_count(delta: int, r: int) -> int:
    """Brute-force count of points in Z^delta with ℓ¹ norm <= r."""
    return sum(1 for p in itertools.product(range(-r, r + 1), repeat=delta) if sum(map(abs, p)) <= r)


def bfs_dict(adj: dict, source) -> dict:
    dist = {source: 0}
    q = deque([source])
    while q:
        u = q.popleft()
        for w in adj[u]:
            if w not in dist:
                dist[w] = dist[u] + 1
                q.append(w)
    return dist


def spinal_set_oracle(g, spine, pi, x, r) -> set:
    """π⁻¹(B_Σ(π x, r)) via a pure-Python BFS on the induced spine graph."""
    spine = set(spine)
    adj = {s: [w for w in g.neighbors(s).tolist() if w in spine] for s in spine}
    d = bfs_dict(adj, int(pi[x]))
    return {v for v in range(g.vertex_count) if d.get(int(pi[v]), math.inf) <= r}


def gradient_oracle(adj: list[list[int]], f) -> list[float]:
    out = []
    for x, nbrs in enumerate(adj):
        m = len(nbrs)
        out.append(math.sqrt(0.5 * sum((f[y] - f[x]) ** 2 / m for y in nbrs)) if m else 0.0)
    return out
