"""Spinal graphs: a connected graph, a spine Σ and a projection π onto it.

Validity is checked through the edge-level characterisation: π fixes Σ,
every fibre π⁻¹(x) induces a connected subgraph, and an edge between
different fibres always joins two spine vertices.  ``validate_bruteforce``
checks the path condition directly and exists as an oracle for small graphs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .graph import (
    INDEX_DTYPE,
    Graph,
    GraphError,
    InvalidVertex,
    bfs,
    bfs_distances,
    build_graph,
    volumes_from_distances,
)


class SpinalError(ValueError):
    pass


class InvalidSpinalGraph(SpinalError):
    def __init__(self, report: "ValidationReport"):
        first = report.violations[0] if report.violations else {}
        super().__init__(f"not a spinal graph: {len(report.violations)} violation(s), first {first}")
        self.report = report


class NotOnSpine(SpinalError):
    def __init__(self, vertex: int):
        super().__init__(f"vertex {vertex} is not on the spine")
        self.vertex = vertex


class DisconnectedFiber(SpinalError):
    def __init__(self, x: int):
        super().__init__(f"fibre graph for skeleton vertex {x} is not connected")
        self.x = x


class BadDistinguishedVertex(SpinalError):
    def __init__(self, x: int, z: int):
        super().__init__(f"distinguished vertex {z} is not a vertex of fibre {x}")
        self.x = x
        self.z = z


class BudgetExceeded(SpinalError):
    pass


class RadiusUnsafe(ValueError):
    def __init__(self, radius: float, safe: float, what: str = "radius"):
        super().__init__(f"{what} {radius} exceeds the truncation-safe radius {safe}")
        self.radius = radius
        self.safe = safe


# -- validation ---------------------------------------------------------------


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    violations: tuple[dict, ...] = ()

    def to_json(self) -> dict:
        return {"ok": self.ok, "violations": list(self.violations)}


def validate_structural(g: Graph, spine: Iterable[int], pi: Sequence[int]) -> ValidationReport:
    """Check the spinal-graph conditions edge by edge; never raises on bad input."""
    n = g.vertex_count
    violations: list[dict] = []
    try:
        spine_arr = np.asarray(sorted(int(s) for s in spine), dtype=INDEX_DTYPE)
        pi_arr = np.asarray([int(p) for p in pi], dtype=INDEX_DTYPE)
    except (TypeError, ValueError) as exc:
        return ValidationReport(False, ({"kind": "malformed", "detail": str(exc)},))

    if spine_arr.size == 0:
        violations.append({"kind": "empty_spine"})
    if len(pi_arr) != n:
        violations.append({"kind": "pi_length", "expected": n, "got": int(len(pi_arr))})
    bad_spine = spine_arr[(spine_arr < 0) | (spine_arr >= n)]
    for s in bad_spine.tolist():
        violations.append({"kind": "spine_out_of_range", "vertex": s})
    dup = spine_arr[1:][spine_arr[1:] == spine_arr[:-1]]
    for s in np.unique(dup).tolist():
        violations.append({"kind": "spine_duplicate", "vertex": s})
    if violations:
        return ValidationReport(False, tuple(violations))

    in_spine = np.zeros(n, dtype=bool)
    in_spine[spine_arr] = True
    out_of_range = (pi_arr < 0) | (pi_arr >= n)
    for v in np.flatnonzero(out_of_range).tolist():
        violations.append({"kind": "pi_out_of_range", "vertex": v, "pi": int(pi_arr[v])})
    if violations:
        return ValidationReport(False, tuple(violations))

    for v in np.flatnonzero(~in_spine[pi_arr]).tolist():
        violations.append({"kind": "projection_off_spine", "vertex": v, "pi": int(pi_arr[v])})
    for s in spine_arr[pi_arr[spine_arr] != spine_arr].tolist():
        violations.append({"kind": "spine_not_fixed", "vertex": s, "pi": int(pi_arr[s])})

    edges = g.edges()
    u, v = edges[:, 0], edges[:, 1]
    cross = pi_arr[u] != pi_arr[v]
    off = cross & ~((pi_arr[u] == u) & (pi_arr[v] == v))
    for a, b in edges[off].tolist():
        violations.append({"kind": "cross_fiber_edge", "edge": [a, b], "pi": [int(pi_arr[a]), int(pi_arr[b])]})

    if not any(item["kind"] == "projection_off_spine" for item in violations):
        intra = edges[~cross]
        adj = coo_matrix((np.ones(len(intra)), (intra[:, 0], intra[:, 1])), shape=(n, n))
        _, labels = connected_components(adj, directed=False)
        stray = np.flatnonzero(labels != labels[pi_arr])
        for fib in np.unique(pi_arr[stray]).tolist():
            members = stray[pi_arr[stray] == fib]
            violations.append(
                {"kind": "fiber_disconnected", "fiber": fib, "unreachable": members[:20].tolist()}
            )
    return ValidationReport(not violations, tuple(violations))


def validate_bruteforce(
    g: Graph,
    spine: Iterable[int],
    pi: Sequence[int],
    max_path_len: int | None = None,
    node_budget: int = 5_000_000,
) -> bool:
    """Check the defining path condition by enumerating simple paths.

    For every simple path a = v0, ..., vk = b with π(a) ≠ π(b) there must be
    indices i <= j with vi = π(a) and vj = π(b).  Only for small graphs.
    """
    n = g.vertex_count
    spine_set = {int(s) for s in spine}
    pi = [int(p) for p in pi]
    if not spine_set or len(pi) != n:
        return False
    if any(not 0 <= p < n or p not in spine_set for p in pi):
        return False
    if any(pi[s] != s for s in spine_set):
        return False
    if len(set(pi)) == 1:
        return True

    adj = g.adjacency_lists()
    limit = n if max_path_len is None else max_path_len
    budget = [node_budget]

    def explore(a: int) -> bool:
        target_a = pi[a]
        pos = {a: 0}
        path = [a]
        # iterative DFS over simple paths starting at a
        stack = [iter(adj[a])]
        while stack:
            nxt = next(stack[-1], None)
            if nxt is None:
                stack.pop()
                gone = path.pop()
                del pos[gone]
                continue
            if nxt in pos or len(path) > limit:
                continue
            budget[0] -= 1
            if budget[0] < 0:
                raise BudgetExceeded(f"path enumeration exceeded {node_budget} nodes")
            pos[nxt] = len(path)
            path.append(nxt)
            pb = pi[nxt]
            if pb != target_a:
                i = pos.get(target_a)
                j = pos.get(pb)
                if i is None or j is None or i > j:
                    return False
            stack.append(iter(adj[nxt]))
        return True

    return all(explore(a) for a in range(n))


# -- the spinal graph type ---------------------------------------------------------


class SpinalGraph:
    """A validated spinal graph (G, Σ, π); immutable.

    ``pi`` is a dense per-vertex array of spine ids and ``spine`` the sorted
    spine ids.  The skeleton Γ (full subgraph on Σ) uses spine *indices*
    ``0..|Σ|-1``; ``spine[i]`` is the ambient id of skeleton vertex i.
    """

    glue_maps: tuple[np.ndarray, ...] | None = None

    def __init__(self, graph: Graph, spine: Iterable[int], pi: Sequence[int], validate: bool = True):
        self.graph = graph
        self.spine = np.asarray(sorted(int(s) for s in spine), dtype=INDEX_DTYPE)
        self.pi = np.asarray(pi, dtype=INDEX_DTYPE)
        if validate:
            report = validate_structural(graph, self.spine, self.pi)
            if not report.ok:
                raise InvalidSpinalGraph(report)
        self.spine.flags.writeable = False
        self.pi.flags.writeable = False

    @property
    def vertex_count(self) -> int:
        return self.graph.vertex_count

    @cached_property
    def spine_index(self) -> np.ndarray:
        idx = np.full(self.graph.vertex_count, -1, dtype=INDEX_DTYPE)
        idx[self.spine] = np.arange(len(self.spine))
        return idx

    @cached_property
    def skeleton(self) -> Graph:
        edges = self.graph.edges()
        si = self.spine_index
        both = (si[edges[:, 0]] >= 0) & (si[edges[:, 1]] >= 0)
        skel_edges = si[edges[both]]
        boundary = np.unique(si[self.pi[self.graph.boundary]]) if self.graph.boundary.size else ()
        return build_graph(skel_edges, vertex_count=len(self.spine), boundary=boundary)

    @cached_property
    def fiber_sizes(self) -> np.ndarray:
        """Fibre size per skeleton index."""
        return np.bincount(self.spine_index[self.pi], minlength=len(self.spine))

    def fiber(self, x: int) -> np.ndarray:
        """Ambient ids of π⁻¹(π(x)), sorted."""
        return np.flatnonzero(self.pi == self.pi[self.graph.check_vertex(x)])

    def project(self, x: int) -> int:
        return int(self.pi[self.graph.check_vertex(x)])

    def is_spine(self, x: int) -> bool:
        return bool(self.spine_index[self.graph.check_vertex(x)] >= 0)

    def skeleton_distances(self, x: int, max_radius: float | None = None) -> np.ndarray:
        """d_Σ(π(x), s) per skeleton index (-1 beyond max_radius)."""
        return bfs_distances(self.skeleton, int(self.spine_index[self.project(x)]), max_radius)

    def spinal_safe_radius(self, x: int) -> float:
        """Skeleton distance from π(x) to the truncation boundary (inf if none)."""
        skel = self.skeleton
        if skel.boundary.size == 0:
            return math.inf
        d = self.skeleton_distances(x)
        return float(d[skel.boundary].min())

    def __repr__(self) -> str:
        return f"SpinalGraph(vertices={self.vertex_count}, spine={len(self.spine)})"


def spinal_distances(sg: SpinalGraph, x: int, max_radius: float | None = None) -> np.ndarray:
    """[x, y] for every vertex y (-1 beyond max_radius)."""
    d = sg.skeleton_distances(x, max_radius)
    return d[sg.spine_index[sg.pi]]


def spinal_distance(sg: SpinalGraph, x: int, y: int) -> int:
    y = sg.graph.check_vertex(y)
    return int(sg.skeleton_distances(x)[sg.spine_index[sg.pi[y]]])


def spinal_set(sg: SpinalGraph, x: int, r: float) -> np.ndarray:
    """Sorted ids of D(x, r) = π⁻¹(B_Σ(π(x), r))."""
    d = spinal_distances(sg, x, r)
    return np.flatnonzero(d >= 0)


def spinal_volume_table(sg: SpinalGraph, x: int, r_max: int) -> np.ndarray:
    """|D(x, r)| for r = 0..r_max."""
    d = sg.skeleton_distances(x, r_max)
    reached = d >= 0
    counts = np.bincount(d[reached], weights=sg.fiber_sizes[reached], minlength=r_max + 1)
    return np.cumsum(counts[: r_max + 1]).astype(INDEX_DTYPE)


def spine_ball_table(sg: SpinalGraph, x: int, r_max: int) -> np.ndarray:
    """|B_Σ(π(x), r)| for r = 0..r_max."""
    return volumes_from_distances(sg.skeleton_distances(x, r_max), r_max)


# -- glue / decompose -----------------------------------------------------------


def _as_fiber_graph(x: int, fib) -> Graph:
    if isinstance(fib, Graph):
        return fib
    edges, count = fib
    try:
        return build_graph(edges, vertex_count=count)
    except GraphError as exc:
        raise DisconnectedFiber(x) from exc


def glue(
    skeleton: Graph,
    fibers: Sequence[Graph | tuple[Sequence[Sequence[int]], int]],
    z: Sequence[int],
    boundary: Iterable[int] = (),
) -> SpinalGraph:
    """Glue fibre G_x to skeleton vertex x along its distinguished vertex z_x.

    Numbering: skeleton vertex x keeps id x and is the image of z_x; the
    remaining vertices of G_0, G_1, ... follow in fibre-internal order.
    ``boundary`` lists skeleton vertices cut off by truncation.
    """
    k = skeleton.vertex_count
    if len(fibers) != k or len(z) != k:
        raise SpinalError(f"need one fibre and one distinguished vertex per skeleton vertex ({k})")
    graphs = [_as_fiber_graph(x, f) for x, f in enumerate(fibers)]
    maps, edge_blocks = [], [skeleton.edges()]
    pi_blocks = [np.arange(k, dtype=INDEX_DTYPE)]
    next_id = k
    for x, (fg, zx) in enumerate(zip(graphs, z)):
        zx = int(zx)
        size = fg.vertex_count
        if not 0 <= zx < size:
            raise BadDistinguishedVertex(x, zx)
        local = np.empty(size, dtype=INDEX_DTYPE)
        local[zx] = x
        rest = np.arange(size) != zx
        local[rest] = np.arange(next_id, next_id + size - 1)
        next_id += size - 1
        maps.append(local)
        if fg.edge_count:
            edge_blocks.append(local[fg.edges()])
        pi_blocks.append(np.full(size - 1, x, dtype=INDEX_DTYPE))
    edges = np.concatenate(edge_blocks)
    g = build_graph(edges, vertex_count=next_id, boundary=boundary)
    sg = SpinalGraph(g, np.arange(k), np.concatenate(pi_blocks), validate=False)
    sg.glue_maps = tuple(maps)  # per fibre: local id -> ambient id
    return sg


@dataclass(frozen=True)
class FiberDecomposition:
    skeleton: Graph
    fibers: tuple[Graph, ...]
    z: tuple[int, ...]
    spine_ids: np.ndarray = field(repr=False)  # skeleton index -> ambient id
    fiber_vertices: tuple[np.ndarray, ...] = field(repr=False)  # local id -> ambient id

    def to_ambient(self, x: int, local: int) -> int:
        return int(self.fiber_vertices[x][local])

    def glue(self) -> SpinalGraph:
        return glue(self.skeleton, self.fibers, self.z, self.skeleton.boundary)

    def relabeling(self) -> np.ndarray:
        """Ambient id of each vertex of ``self.glue()``."""
        out = np.empty(sum(len(v) for v in self.fiber_vertices), dtype=INDEX_DTYPE)
        k = len(self.fibers)
        out[:k] = self.spine_ids
        pos = k
        for verts in self.fiber_vertices:
            out[pos : pos + len(verts) - 1] = verts[1:]
            pos += len(verts) - 1
        return out


def _fiber_bfs_order(sg: SpinalGraph) -> np.ndarray:
    """Vertices sorted by (π rank, BFS depth from π(v) inside the fibre, id)."""
    g = sg.graph
    edges = g.edges()
    intra = edges[sg.pi[edges[:, 0]] == sg.pi[edges[:, 1]]]
    src = np.concatenate([intra[:, 0], intra[:, 1]])
    dst = np.concatenate([intra[:, 1], intra[:, 0]])
    order = np.lexsort((dst, src))
    indptr = np.zeros(g.vertex_count + 1, dtype=INDEX_DTYPE)
    np.cumsum(np.bincount(src, minlength=g.vertex_count), out=indptr[1:])
    forest = Graph(indptr, dst[order])
    _, depth = bfs(forest, sg.spine)
    return np.lexsort((np.arange(g.vertex_count), depth, sg.spine_index[sg.pi]))


def decompose(sg: SpinalGraph) -> FiberDecomposition:
    """Skeleton Γ = full subgraph on Σ, fibres G_x = full subgraph on π⁻¹(x), z_x = x.

    Fibre vertices are renumbered in BFS order from x inside the fibre, so
    z_x is local vertex 0 and ``decompose(sg).glue()`` is the canonical
    renumbering of ``sg``.
    """
    g = sg.graph
    order = _fiber_bfs_order(sg)
    fiber_of = sg.spine_index[sg.pi[order]]
    starts = np.searchsorted(fiber_of, np.arange(len(sg.spine) + 1))
    local = np.empty(g.vertex_count, dtype=INDEX_DTYPE)
    local[order] = np.arange(g.vertex_count) - starts[fiber_of]
    edges = g.edges()
    intra = edges[sg.pi[edges[:, 0]] == sg.pi[edges[:, 1]]]
    intra_fiber = sg.spine_index[sg.pi[intra[:, 0]]]
    by_fiber = np.argsort(intra_fiber, kind="stable")
    intra, intra_fiber = intra[by_fiber], intra_fiber[by_fiber]
    edge_starts = np.searchsorted(intra_fiber, np.arange(len(sg.spine) + 1))

    fibers, verts = [], []
    for i in range(len(sg.spine)):
        members = order[starts[i] : starts[i + 1]]
        block = local[intra[edge_starts[i] : edge_starts[i + 1]]]
        fibers.append(build_graph(block, vertex_count=len(members)))
        verts.append(members)
    return FiberDecomposition(sg.skeleton, tuple(fibers), (0,) * len(fibers), sg.spine.copy(), tuple(verts))


@dataclass(frozen=True)
class CanonicalForm:
    edges: tuple[tuple[int, int], ...]
    spine: tuple[int, ...]
    pi: tuple[int, ...]


def canonical_relabeling(sg: SpinalGraph) -> np.ndarray:
    """new id -> old id: spine in id order, then fibres by spine id in BFS order."""
    order = _fiber_bfs_order(sg)
    head = sg.spine
    tail = order[sg.spine_index[order] < 0]
    return np.concatenate([head, tail])


def canonical_form(sg: SpinalGraph) -> CanonicalForm:
    new_to_old = canonical_relabeling(sg)
    old_to_new = np.empty_like(new_to_old)
    old_to_new[new_to_old] = np.arange(len(new_to_old))
    e = np.sort(old_to_new[sg.graph.edges()], axis=1)
    e = e[np.lexsort((e[:, 1], e[:, 0]))]
    pi = old_to_new[sg.pi[new_to_old]]
    return CanonicalForm(
        tuple(map(tuple, e.tolist())),
        tuple(sorted(old_to_new[sg.spine].tolist())),
        tuple(pi.tolist()),
    )


def current_form(sg: SpinalGraph) -> CanonicalForm:
    """Edges, spine and projection under the graph's present numbering."""
    e = sg.graph.edges()
    return CanonicalForm(tuple(map(tuple, e.tolist())), tuple(sg.spine.tolist()), tuple(sg.pi.tolist()))


# -- fibre geodesics ------------------------------------------------------------------


@dataclass(frozen=True)
class GeodesicReport:
    pairs_checked: int
    sources_checked: int
    violations: tuple[tuple[int, int, int, int], ...]  # (a, b, d_G, d_fiber)

    @property
    def ok(self) -> bool:
        return not self.violations


def _fiber_distance_map(sg: SpinalGraph, a: int) -> dict[int, int]:
    fib = sg.fiber(a)
    member = set(fib.tolist())
    adj = sg.graph
    dist = {a: 0}
    frontier = [a]
    while frontier:
        nxt = []
        for u in frontier:
            for w in adj.neighbors(u).tolist():
                if w in member and w not in dist:
                    dist[w] = dist[u] + 1
                    nxt.append(w)
        frontier = nxt
    return dist


def check_fiber_geodesics(
    sg: SpinalGraph,
    pairs: Iterable[tuple[int, int]] | None = None,
    max_violations: int = 100,
) -> GeodesicReport:
    """Compare ambient and fibre-internal distances for same-fibre pairs.

    Every minimal path between two vertices of one fibre stays in that fibre,
    so both distances must agree.  ``pairs=None`` checks all pairs.
    """
    if pairs is None:
        by_source = {a: None for a in range(sg.vertex_count) if sg.fiber_sizes[sg.spine_index[sg.pi[a]]] > 1}
    else:
        by_source = {}
        for a, b in pairs:
            a, b = sg.graph.check_vertex(a), sg.graph.check_vertex(b)
            if sg.pi[a] != sg.pi[b]:
                raise SpinalError(f"pair ({a}, {b}) lies in different fibres")
            by_source.setdefault(a, set()).add(b)

    violations = []
    checked = 0
    for a, targets in by_source.items():
        fdist = _fiber_distance_map(sg, a)
        radius = max(fdist.values())
        gdist = bfs_distances(sg.graph, a, radius)
        wanted = fdist.keys() if targets is None else targets
        for b in wanted:
            checked += 1
            df = fdist.get(b, -1)
            dg = int(gdist[b])
            if df != dg and len(violations) < max_violations:
                violations.append((a, b, dg, df))
    return GeodesicReport(checked, len(by_source), tuple(violations))


# -- test functions --------------------------------------------------------------------


@dataclass(frozen=True)
class TestFunction:
    """g_n(x) = max(0, n - [x, x0]) / n stored as integer numerators."""

    __test__ = False  # not a pytest class

    center: int
    denominator: int
    numerators: np.ndarray = field(repr=False)

    def values(self) -> np.ndarray:
        return self.numerators / self.denominator

    def support(self) -> np.ndarray:
        return np.flatnonzero(self.numerators)


def test_function(sg: SpinalGraph, x0: int, n: int) -> TestFunction:
    x0 = sg.graph.check_vertex(x0)
    if not sg.is_spine(x0):
        raise NotOnSpine(x0)
    if n < 1:
        raise ValueError("n must be a positive integer")
    d = spinal_distances(sg, x0, n)
    num = np.where(d >= 0, n - d, 0)
    num = np.maximum(num, 0).astype(INDEX_DTYPE)
    num.flags.writeable = False
    return TestFunction(x0, int(n), num)


test_function.__test__ = False


def relabel_spinal(sg: SpinalGraph, new_to_old: Sequence[int]) -> SpinalGraph:
    """Same spinal graph with vertex ``new_to_old[i]`` renamed to i."""
    new_to_old = np.asarray(new_to_old, dtype=INDEX_DTYPE)
    old_to_new = np.empty_like(new_to_old)
    old_to_new[new_to_old] = np.arange(len(new_to_old))
    g = build_graph(old_to_new[sg.graph.edges()], vertex_count=sg.vertex_count,
                    boundary=old_to_new[sg.graph.boundary])
    return SpinalGraph(g, old_to_new[sg.spine], old_to_new[sg.pi[new_to_old]])


__all__ = [
    "BadDistinguishedVertex",
    "BudgetExceeded",
    "CanonicalForm",
    "DisconnectedFiber",
    "FiberDecomposition",
    "GeodesicReport",
    "InvalidSpinalGraph",
    "InvalidVertex",
    "NotOnSpine",
    "RadiusUnsafe",
    "SpinalGraph",
    "TestFunction",
    "ValidationReport",
    "canonical_form",
    "check_fiber_geodesics",
    "decompose",
    "glue",
    "spinal_distance",
    "spinal_distances",
    "spinal_set",
    "spinal_volume_table",
    "spine_ball_table",
    "test_function",
    "validate_bruteforce",
    "validate_structural",
]
