"""Generators for the graph families used throughout the analysis.

* Vicsek graphs V^n_m on integer coordinates, with the diagonal spine;
* lattice plates (ℓ¹ balls of Z^δ);
* the plate construction: a ray skeleton with growing plate balls as fibres;
* seeded random glued graphs for property tests;
* a small hand-drawn spinal graph with two forbidden extra edges.
"""

from __future__ import annotations

import heapq
import itertools
import math
import random
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .graph import INDEX_DTYPE, Graph, build_graph
from .spinal import SpinalGraph, glue


class SizeBudgetExceeded(ValueError):
    pass


DEFAULT_SIZE_BUDGET = 20_000_000


# -- Vicsek ------------------------------------------------------------------------


@dataclass(frozen=True)
class VicsekGraph:
    dim: int
    level: int
    spinal: SpinalGraph
    center: int
    coords: np.ndarray = field(repr=False)

    @property
    def graph(self) -> Graph:
        return self.spinal.graph

    def vertex_at(self, point) -> int:
        hits = np.flatnonzero(np.all(self.coords == np.asarray(point), axis=1))
        if hits.size == 0:
            raise KeyError(point)
        return int(hits[0])


def vicsek_vertex_count(dim: int, level: int) -> int:
    return 2**dim * (2**dim + 1) ** level + 1


def _vicsek_levels(dim: int, level: int) -> tuple[np.ndarray, np.ndarray]:
    corners = np.array(list(itertools.product((-1, 1), repeat=dim)), dtype=INDEX_DTYPE)
    coords = np.vstack([np.zeros((1, dim), dtype=INDEX_DTYPE), corners])
    edges = np.array([(0, i) for i in range(1, len(coords))], dtype=INDEX_DTYPE)
    for m in range(1, level + 1):
        # one copy at the centre, one centred at each corner 2*3^(m-1)*eps;
        # copies share the corner vertices 3^(m-1)*eps
        offsets = np.vstack([np.zeros((1, dim), dtype=INDEX_DTYPE), 2 * 3 ** (m - 1) * corners])
        n_prev = len(coords)
        stacked = (coords[None, :, :] + offsets[:, None, :]).reshape(-1, dim)
        shifted = (edges[None, :, :] + (np.arange(len(offsets)) * n_prev)[:, None, None]).reshape(-1, 2)
        coords, inverse = np.unique(stacked, axis=0, return_inverse=True)
        edges = np.sort(inverse.reshape(-1)[shifted], axis=1)
    return coords, edges


def _project_to_spine(g: Graph, on_spine: np.ndarray) -> np.ndarray:
    """Label every vertex with the spine vertex it reaches without crossing the spine."""
    label = np.where(on_spine, np.arange(g.vertex_count), -1)
    frontier = np.flatnonzero(on_spine)
    while frontier.size:
        starts = g.indptr[frontier]
        counts = g.degrees[frontier]
        owners = np.repeat(frontier, counts)
        offsets = np.repeat(starts - (np.cumsum(counts) - counts), counts) + np.arange(int(counts.sum()))
        nbrs = g.indices[offsets]
        fresh = label[nbrs] < 0
        nbrs, owners = nbrs[fresh], owners[fresh]
        nbrs, first = np.unique(nbrs, return_index=True)
        label[nbrs] = label[owners[first]]
        frontier = nbrs
    return label


def vicsek(dim: int, level: int, size_budget: int = DEFAULT_SIZE_BUDGET) -> VicsekGraph:
    """V^dim_level with the diagonal spine and its projection.

    Level 0 is the centre 0 joined to the 2^dim corners of {-1, 1}^dim; the
    corners of level m sit at ±3^m.  The outer corners form the truncation
    boundary.
    """
    if not 1 <= dim <= 4:
        raise ValueError("dimension must be between 1 and 4")
    if level < 0:
        raise ValueError("level must be nonnegative")
    expected = vicsek_vertex_count(dim, level)
    if expected > size_budget:
        raise SizeBudgetExceeded(f"V^{dim}_{level} has {expected} vertices (budget {size_budget})")
    coords, edges = _vicsek_levels(dim, level)
    absval = np.abs(coords)
    on_spine = np.all(absval == absval[:, :1], axis=1)
    outer = np.flatnonzero(np.all(absval == 3**level, axis=1))
    g = build_graph(edges, vertex_count=len(coords), boundary=outer)
    pi = _project_to_spine(g, on_spine)
    sg = SpinalGraph(g, np.flatnonzero(on_spine), pi)
    center = int(np.flatnonzero(~absval.any(axis=1))[0])
    coords.flags.writeable = False
    return VicsekGraph(dim, level, sg, center, coords)


# -- lattice plates ---------------------------------------------------------------


@dataclass(frozen=True)
class LatticePlate:
    graph: Graph
    origin: int
    coords: np.ndarray = field(repr=False)


def lattice_ball_count(delta: int, r: int) -> int:
    """Number of points of Z^delta with ℓ¹ norm <= r."""
    return sum(2**k * math.comb(delta, k) * math.comb(r, k) for k in range(min(delta, r) + 1))


def _box_plate(delta: int, r: int, keep, steps: np.ndarray, size_budget: int) -> LatticePlate:
    side = 2 * r + 1
    if side**delta > size_budget:
        raise SizeBudgetExceeded(f"box of side {side} in dimension {delta} exceeds budget {size_budget}")
    grid = np.indices((side,) * delta, dtype=INDEX_DTYPE).reshape(delta, -1).T - r
    mask = keep(grid)
    coords = grid[mask]
    index = np.full(side**delta, -1, dtype=INDEX_DTYPE)
    index[np.flatnonzero(mask)] = np.arange(len(coords))
    index = index.reshape((side,) * delta)
    blocks = []
    for step in steps:
        nb = coords + step
        inside = np.all((nb >= -r) & (nb <= r), axis=1)
        src = np.flatnonzero(inside)
        dst = index[tuple((nb[inside] + r).T)]
        ok = dst >= 0
        blocks.append(np.stack([src[ok], dst[ok]], axis=1))
    edges = np.concatenate(blocks) if blocks else np.empty((0, 2), dtype=INDEX_DTYPE)
    origin = int(index[(r,) * delta])
    return coords, edges, origin


def lattice_plate(delta: int, r: int, size_budget: int = DEFAULT_SIZE_BUDGET) -> LatticePlate:
    """Full subgraph of Z^delta on the ℓ¹ ball of radius r about 0.

    Points of norm exactly r lose neighbours to the cut and form the boundary.
    """
    if delta < 1 or r < 0:
        raise ValueError("need delta >= 1 and r >= 0")
    steps = np.eye(delta, dtype=INDEX_DTYPE)
    coords, edges, origin = _box_plate(delta, r, lambda p: np.abs(p).sum(axis=1) <= r, steps, size_budget)
    boundary = np.flatnonzero(np.abs(coords).sum(axis=1) == r)
    g = build_graph(edges, vertex_count=len(coords), boundary=boundary if r > 0 else ())
    coords.flags.writeable = False
    return LatticePlate(g, origin, coords)


def king_plate(delta: int, r: int, size_budget: int = DEFAULT_SIZE_BUDGET) -> LatticePlate:
    """ℓ∞ ball of radius r in Z^delta with king-move adjacency (same growth r^delta)."""
    steps = np.array([s for s in itertools.product((-1, 0, 1), repeat=delta) if s > (0,) * delta], dtype=INDEX_DTYPE)
    coords, edges, origin = _box_plate(delta, r, lambda p: np.ones(len(p), dtype=bool), steps, size_budget)
    boundary = np.flatnonzero(np.abs(coords).max(axis=1) == r)
    g = build_graph(edges, vertex_count=len(coords), boundary=boundary if r > 0 else ())
    return LatticePlate(g, origin, coords)


# -- the plate construction ------------------------------------------------------------

PlateProvider = Callable[[int, int, int, random.Random], tuple[Graph, int]]


def _lattice_provider(n: int, delta: int, radius: int, rng: random.Random) -> tuple[Graph, int]:
    plate = _cached_plate(lattice_plate, delta, radius)
    return plate.graph, plate.origin


def _king_provider(n: int, delta: int, radius: int, rng: random.Random) -> tuple[Graph, int]:
    plate = _cached_plate(king_plate, delta, radius)
    return plate.graph, plate.origin


def _mixed_provider(n: int, delta: int, radius: int, rng: random.Random) -> tuple[Graph, int]:
    pick = _lattice_provider if rng.random() < 0.5 else _king_provider
    return pick(n, delta, radius, rng)


_PLATE_CACHE: dict = {}


def _cached_plate(fn, delta: int, radius: int) -> LatticePlate:
    key = (fn.__name__, delta, radius)
    if key not in _PLATE_CACHE:
        _PLATE_CACHE[key] = fn(delta, radius)
    return _PLATE_CACHE[key]


PLATE_PROVIDERS: dict[str, PlateProvider] = {
    "lattice": _lattice_provider,
    "king": _king_provider,
    "mixed": _mixed_provider,
}


def register_plate_provider(name: str, provider: PlateProvider) -> None:
    """Register a fibre source: ``provider(n, delta, radius, rng) -> (ball graph, centre)``."""
    PLATE_PROVIDERS[name] = provider


@dataclass(frozen=True)
class PlateSpec:
    D: float
    delta: int
    length: int
    provider: str = "lattice"
    seed: int = 0

    def __post_init__(self):
        if not self.D > 1:
            raise ValueError("target dimension D must exceed 1")
        if not self.delta > self.D:
            raise ValueError("plate exponent delta must exceed D")
        if self.length < 2:
            raise ValueError("length must be at least 2")
        if self.provider not in PLATE_PROVIDERS:
            raise ValueError(f"unknown plate provider {self.provider!r}")

    @property
    def plate_alpha(self) -> float:
        """Fibre growth exponent (D - 1) / delta; unrelated to any heat-kernel exponent."""
        return (self.D - 1) / self.delta

    alpha = plate_alpha

    def radius(self, n: int) -> int:
        # guard against n**alpha landing just below an integer
        return math.floor(n**self.alpha + 1e-9)


@dataclass(frozen=True)
class PlateGraph:
    spec: PlateSpec
    spinal: SpinalGraph
    radii: tuple[int, ...] = field(repr=False)

    @property
    def graph(self) -> Graph:
        return self.spinal.graph

    def spine_vertex(self, n: int) -> int:
        """Spine id of ray position n (1-based)."""
        if not 1 <= n <= self.spec.length:
            raise IndexError(n)
        return n - 1

    def position(self, x: int) -> int:
        """Ray position n of the fibre containing x."""
        return int(self.spinal.pi[x]) + 1


def path_graph(n: int, boundary_ends: bool = False) -> Graph:
    edges = np.stack([np.arange(n - 1), np.arange(1, n)], axis=1)
    return build_graph(edges, vertex_count=n, boundary=(0, n - 1) if boundary_ends else ())


def plates(spec: PlateSpec) -> PlateGraph:
    """Ray skeleton 1..N with fibre n = plate ball of radius floor(n^alpha) about o_n."""
    rng = random.Random(spec.seed)
    provider = PLATE_PROVIDERS[spec.provider]
    fibers, z, radii = [], [], []
    for n in range(1, spec.length + 1):
        r = spec.radius(n)
        fg, center = provider(n, spec.delta, r, rng)
        fibers.append(fg)
        z.append(center)
        radii.append(r)
    skeleton = path_graph(spec.length)
    sg = glue(skeleton, fibers, z, boundary=(spec.length - 1,))
    return PlateGraph(spec, sg, tuple(radii))


# -- random glued graphs -------------------------------------------------------------


def _prufer_tree(k: int, rng: random.Random) -> list[tuple[int, int]]:
    """Uniform labelled tree on k vertices (uniform spanning tree of K_k)."""
    if k == 1:
        return []
    if k == 2:
        return [(0, 1)]
    seq = [rng.randrange(k) for _ in range(k - 2)]
    degree = [1] * k
    for v in seq:
        degree[v] += 1
    leaves = [v for v in range(k) if degree[v] == 1]
    heapq.heapify(leaves)
    edges = []
    for v in seq:
        leaf = heapq.heappop(leaves)
        edges.append((leaf, v))
        degree[v] -= 1
        if degree[v] == 1:
            heapq.heappush(leaves, v)
    edges.append((heapq.heappop(leaves), heapq.heappop(leaves)))
    return edges


def random_connected_graph(k: int, rng: random.Random, extra_prob: float = 0.25) -> Graph:
    edges = {tuple(sorted(e)) for e in _prufer_tree(k, rng)}
    for u, v in itertools.combinations(range(k), 2):
        if (u, v) not in edges and rng.random() < extra_prob:
            edges.add((u, v))
    return build_graph(sorted(edges), vertex_count=k)


def random_glued(seed: int, skeleton_size: int, max_fiber_size: int, extra_prob: float = 0.25) -> SpinalGraph:
    """Glue random connected fibres onto a random connected skeleton; reproducible per seed."""
    if skeleton_size < 1 or max_fiber_size < 1:
        raise ValueError("sizes must be >= 1")
    rng = random.Random(seed)
    skeleton = random_connected_graph(skeleton_size, rng, extra_prob)
    fibers, z = [], []
    for _ in range(skeleton_size):
        fg = random_connected_graph(rng.randint(1, max_fiber_size), rng, extra_prob)
        fibers.append(fg)
        z.append(rng.randrange(fg.vertex_count))
    return glue(skeleton, fibers, z)


# -- hand-drawn example ------------------------------------------------------------------


@dataclass(frozen=True)
class ExampleSpinal:
    spinal: SpinalGraph
    labels: dict
    forbidden_edges: tuple[tuple[int, int], ...]
    points: tuple[tuple[float, float], ...]


_EXAMPLE_SPINE = [(0, 0), (1, 0), (2, 0), (3, 0), (3, -1), (3, -2), (4, 0), (5, 0.5), (5, -0.5), (6, 0), (7, 0)]
_EXAMPLE_FIBRES = {
    (1, 0): [(1, 0.5), (0.8, 1), (1.4, 1.3), (1.2, 1.7)],
    (2, 0): [(1.8, 0.4), (2.1, 0.8)],
    (3, 0): [(3.1, 0.6), (3, 1.2)],
    (3, -1): [(2.4, -1.3), (1.8, -1.3), (2, -0.8), (1.1, -1.2)],
    (5, -0.5): [(4.8, -1), (4.5, -0.8), (4.2, -0.5), (4.2, -1.4)],
    (6, 0): [(6, -1.2)],
}
_EXAMPLE_EDGES = [
    ((0, 0), (1, 0)), ((1, 0), (2, 0)), ((2, 0), (3, 0)), ((3, 0), (4, 0)),
    ((3, 0), (3, -1)), ((3, -1), (3, -2)), ((4, 0), (5, 0.5)), ((4, 0), (5, -0.5)),
    ((5, 0.5), (6, 0)), ((5, -0.5), (6, 0)), ((6, 0), (7, 0)),
    ((1, 0), (1, 0.5)), ((1, 0.5), (0.8, 1)), ((1, 0.5), (1.4, 1.3)),
    ((0.8, 1), (1.2, 1.7)), ((1.4, 1.3), (1.2, 1.7)),
    ((2, 0), (1.8, 0.4)), ((1.8, 0.4), (2.1, 0.8)),
    ((3, 0), (3.1, 0.6)), ((3.1, 0.6), (3, 1.2)),
    ((3, -1), (2.4, -1.3)), ((2.4, -1.3), (1.8, -1.3)), ((2.4, -1.3), (2, -0.8)), ((1.8, -1.3), (1.1, -1.2)),
    ((5, -0.5), (4.8, -1)), ((5, -0.5), (4.5, -0.8)), ((4.5, -0.8), (4.2, -0.5)),
    ((4.2, -0.5), (4.2, -1.4)), ((4.2, -1.4), (4.5, -0.8)),
    ((6, 0), (6, -1.2)),
]
_EXAMPLE_FORBIDDEN = [((2.1, 0.8), (3, 1.2)), ((3, -2), (4.2, -1.4))]


def example_spinal_graph() -> ExampleSpinal:
    """Small drawn spinal graph; adding either forbidden edge breaks the spinal property."""
    points = list(_EXAMPLE_SPINE)
    owner = {p: p for p in _EXAMPLE_SPINE}
    for base, members in _EXAMPLE_FIBRES.items():
        points.extend(members)
        owner.update({m: base for m in members})
    ids = {p: i for i, p in enumerate(points)}
    g = build_graph([(ids[a], ids[b]) for a, b in _EXAMPLE_EDGES], vertex_count=len(points))
    pi = [ids[owner[p]] for p in points]
    sg = SpinalGraph(g, [ids[p] for p in _EXAMPLE_SPINE], pi)
    labels = {"x": ids[(1.2, 1.7)], "y": ids[(6, -1.2)]}
    forbidden = tuple((ids[a], ids[b]) for a, b in _EXAMPLE_FORBIDDEN)
    return ExampleSpinal(sg, labels, forbidden, tuple(points))
