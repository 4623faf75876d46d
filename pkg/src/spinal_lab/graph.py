"""Immutable undirected simple graphs with BFS balls and volume measurements.

Adjacency is stored in compressed (offset-indexed) form: the neighbours of
vertex ``x`` are ``indices[indptr[x]:indptr[x + 1]]``, sorted ascending.
All sweeps are level-synchronous BFS over numpy arrays, so a single sweep
costs one vectorised step per BFS layer.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence, TypeVar

import numpy as np

T = TypeVar("T")
R = TypeVar("R")

INDEX_DTYPE = np.int64


class GraphError(ValueError):
    """Base class for graph construction errors."""


class SelfLoop(GraphError):
    def __init__(self, vertex: int):
        super().__init__(f"self-loop at vertex {vertex}")
        self.vertex = vertex


class DuplicateEdge(GraphError):
    def __init__(self, edge: tuple[int, int]):
        super().__init__(f"duplicate edge {edge}")
        self.edge = edge


class Disconnected(GraphError):
    def __init__(self, vertex: int, components: int):
        super().__init__(
            f"graph is disconnected: vertex {vertex} is not reachable from 0 "
            f"({components} components)"
        )
        self.vertex = vertex
        self.components = components


class IdGap(GraphError):
    def __init__(self, vertex: int):
        super().__init__(f"vertex id {vertex} does not occur in any edge")
        self.vertex = vertex


class InvalidVertex(GraphError, IndexError):
    def __init__(self, vertex: int, n: int):
        super().__init__(f"vertex {vertex} out of range for graph with {n} vertices")
        self.vertex = vertex


class EmptySample(ValueError):
    pass


def thread_count() -> int:
    """Worker count for per-centre sweeps; ``SPINAL_LAB_THREADS`` overrides."""
    raw = os.environ.get("SPINAL_LAB_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            pass
    return 1


def parallel_map(fn: Callable[[T], R], items: Sequence[T]) -> list[R]:
    """Order-preserving map, threaded when ``SPINAL_LAB_THREADS`` > 1."""
    workers = thread_count()
    if workers == 1 or len(items) < 2:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


class Graph:
    """Connected undirected simple graph on vertex ids ``0..n-1``.

    ``boundary`` optionally marks vertices whose neighbourhood was cut off
    when a finite piece of an infinite graph was generated.  Measurements
    around a vertex are exact up to its distance from that set.
    """

    __slots__ = ("indptr", "indices", "degrees", "boundary")

    def __init__(self, indptr: np.ndarray, indices: np.ndarray, boundary: Iterable[int] = ()):
        self.indptr = np.asarray(indptr, dtype=INDEX_DTYPE)
        self.indices = np.asarray(indices, dtype=INDEX_DTYPE)
        self.degrees = np.diff(self.indptr)
        self.boundary = np.unique(np.asarray(list(boundary), dtype=INDEX_DTYPE))
        for arr in (self.indptr, self.indices, self.degrees, self.boundary):
            arr.flags.writeable = False

    @property
    def vertex_count(self) -> int:
        return len(self.indptr) - 1

    def __len__(self) -> int:
        return self.vertex_count

    @property
    def edge_count(self) -> int:
        return len(self.indices) // 2

    def neighbors(self, x: int) -> np.ndarray:
        return self.indices[self.indptr[x] : self.indptr[x + 1]]

    def degree(self, x: int) -> int:
        return int(self.degrees[x])

    def has_edge(self, x: int, y: int) -> bool:
        nbrs = self.neighbors(x)
        i = np.searchsorted(nbrs, y)
        return bool(i < len(nbrs) and nbrs[i] == y)

    def edges(self) -> np.ndarray:
        """Edge array of shape (E, 2) with u < v, lexicographically sorted."""
        src = np.repeat(np.arange(self.vertex_count, dtype=INDEX_DTYPE), self.degrees)
        mask = src < self.indices
        return np.stack([src[mask], self.indices[mask]], axis=1)

    def adjacency_lists(self) -> list[list[int]]:
        return [self.neighbors(x).tolist() for x in range(self.vertex_count)]

    def check_vertex(self, x: int) -> int:
        x = int(x)
        if not 0 <= x < self.vertex_count:
            raise InvalidVertex(x, self.vertex_count)
        return x

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Graph):
            return NotImplemented
        return np.array_equal(self.indptr, other.indptr) and np.array_equal(self.indices, other.indices)

    def __hash__(self) -> int:
        return hash((self.indptr.tobytes(), self.indices.tobytes()))

    def __repr__(self) -> str:
        return f"Graph(vertex_count={self.vertex_count}, edge_count={self.edge_count})"


def _csr_from_edges(edges: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    src = np.concatenate([edges[:, 0], edges[:, 1]])
    dst = np.concatenate([edges[:, 1], edges[:, 0]])
    order = np.lexsort((dst, src))
    src, dst = src[order], dst[order]
    indptr = np.zeros(n + 1, dtype=INDEX_DTYPE)
    np.cumsum(np.bincount(src, minlength=n), out=indptr[1:])
    return indptr, dst


def build_graph(
    edges: Iterable[Sequence[int]] | np.ndarray,
    vertex_count: int | None = None,
    boundary: Iterable[int] = (),
) -> Graph:
    """Build a connected simple graph from an edge list.

    Vertex ids must be ``0..n-1``.  ``vertex_count`` is only needed for the
    single-vertex graph (or to force a count; isolated ids then fail the
    connectivity check).
    """
    arr = np.asarray(edges if isinstance(edges, np.ndarray) else list(edges), dtype=INDEX_DTYPE)
    if arr.size == 0:
        arr = arr.reshape(0, 2)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise GraphError("edges must be pairs of vertex ids")
    if arr.size and arr.min() < 0:
        raise InvalidVertex(int(arr.min()), -1)

    loops = np.flatnonzero(arr[:, 0] == arr[:, 1])
    if loops.size:
        raise SelfLoop(int(arr[loops[0], 0]))

    n = int(arr.max()) + 1 if arr.size else 1
    if vertex_count is not None:
        if vertex_count < n:
            raise InvalidVertex(n - 1, vertex_count)
        n = vertex_count
    elif arr.size:
        seen = np.zeros(n, dtype=bool)
        seen[arr.ravel()] = True
        if not seen.all():
            raise IdGap(int(np.flatnonzero(~seen)[0]))

    canon = np.sort(arr, axis=1)
    if len(canon):
        order = np.lexsort((canon[:, 1], canon[:, 0]))
        canon = canon[order]
        dup = np.flatnonzero(np.all(canon[1:] == canon[:-1], axis=1))
        if dup.size:
            raise DuplicateEdge(tuple(int(v) for v in canon[dup[0]]))

    indptr, indices = _csr_from_edges(canon, n)
    g = Graph(indptr, indices, boundary)
    if g.boundary.size and g.boundary.max() >= n:
        raise InvalidVertex(int(g.boundary.max()), n)
    dist = bfs_distances(g, 0)
    unreached = np.flatnonzero(dist < 0)
    if unreached.size:
        raise Disconnected(int(unreached[0]), count_components(g))
    return g


def count_components(g: Graph) -> int:
    seen = np.zeros(g.vertex_count, dtype=bool)
    count = 0
    for start in range(g.vertex_count):
        if not seen[start]:
            count += 1
            seen[bfs_distances(g, start) >= 0] = True
    return count


def _expand(g: Graph, frontier: np.ndarray) -> np.ndarray:
    starts = g.indptr[frontier]
    counts = g.indptr[frontier + 1] - starts
    total = int(counts.sum())
    if total == 0:
        return np.empty(0, dtype=INDEX_DTYPE)
    offsets = np.repeat(starts - (np.cumsum(counts) - counts), counts) + np.arange(total)
    return g.indices[offsets]


def bfs(
    g: Graph,
    sources: int | Iterable[int],
    max_radius: float | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Level-synchronous BFS.

    Returns ``(order, dist)``: the visited vertices in nondecreasing distance
    (ties by id) and a per-vertex distance array with -1 for vertices beyond
    ``max_radius`` (floored).
    """
    n = g.vertex_count
    src = np.unique(np.atleast_1d(np.asarray(sources, dtype=INDEX_DTYPE)))
    if src.size and (src.min() < 0 or src.max() >= n):
        bad = int(src.min()) if src.min() < 0 else int(src.max())
        raise InvalidVertex(bad, n)
    limit = math.inf if max_radius is None else math.floor(max_radius)
    dist = np.full(n, -1, dtype=INDEX_DTYPE)
    if limit < 0 or src.size == 0:
        return np.empty(0, dtype=INDEX_DTYPE), dist
    dist[src] = 0
    layers = [src]
    frontier = src
    d = 0
    while frontier.size and d < limit:
        nbrs = _expand(g, frontier)
        nbrs = np.unique(nbrs[dist[nbrs] < 0])
        d += 1
        dist[nbrs] = d
        if nbrs.size:
            layers.append(nbrs)
        frontier = nbrs
    return np.concatenate(layers), dist


def bfs_distances(g: Graph, source: int | Iterable[int], max_radius: float | None = None) -> np.ndarray:
    return bfs(g, source, max_radius)[1]


def distance(g: Graph, x: int, y: int) -> int:
    """Combinatorial distance d_G(x, y)."""
    x, y = g.check_vertex(x), g.check_vertex(y)
    if x == y:
        return 0
    return int(bfs_distances(g, x)[y])


def ball(g: Graph, x: int, r: float) -> np.ndarray:
    """Sorted ids of B_G(x, r) = {y : d_G(x, y) <= r}."""
    x = g.check_vertex(x)
    order, _ = bfs(g, x, r)
    return np.sort(order)


@dataclass(frozen=True)
class VolumeTable:
    center: int
    volumes: tuple[int, ...]

    def __getitem__(self, r: int) -> int:
        return self.volumes[r]

    def __len__(self) -> int:
        return len(self.volumes)

    @property
    def r_max(self) -> int:
        return len(self.volumes) - 1


def volumes_from_distances(dist: np.ndarray, r_max: int) -> np.ndarray:
    reached = dist[dist >= 0]
    counts = np.bincount(np.minimum(reached, r_max + 1), minlength=r_max + 2)[: r_max + 1]
    return np.cumsum(counts)


def volume_table(g: Graph, x: int, r_max: int) -> VolumeTable:
    """|B(x, r)| for r = 0..r_max from a single BFS."""
    x = g.check_vertex(x)
    if r_max < 0:
        raise ValueError("r_max must be nonnegative")
    dist = bfs_distances(g, x, r_max)
    return VolumeTable(x, tuple(int(v) for v in volumes_from_distances(dist, r_max)))


def safe_radii(g: Graph) -> np.ndarray:
    """safe_radius for every vertex at once (float array, inf without a boundary)."""
    if g.boundary.size == 0:
        return np.full(g.vertex_count, math.inf)
    return bfs_distances(g, g.boundary).astype(float)


def safe_radius(g: Graph, x: int) -> float:
    """Largest r for which B(x, r) is unaffected by the truncation boundary."""
    x = g.check_vertex(x)
    if g.boundary.size == 0:
        return math.inf
    return float(safe_radii(g)[x])


# -- doubling -----------------------------------------------------------------

DEFAULT_NU_GRID = tuple(round(0.1 * k, 1) for k in range(1, 61))


@dataclass(frozen=True)
class DoublingEstimate:
    C_d: float
    nu: float
    centers: tuple[int, ...]
    r_range: tuple[int, int]
    c_max: float
    scan: tuple[tuple[float, float], ...] = field(repr=False)

    def holds(self, g: Graph) -> bool:
        """Replay the certificate on every sampled triple."""
        return _doubling_violations(g, self.centers, self.r_range, self.nu, self.C_d) == 0


def _sampled_volumes(g: Graph, centers: Sequence[int], r_max: int) -> list[np.ndarray]:
    return parallel_map(lambda c: volume_table(g, c, r_max).volumes, list(centers))


def _ratio_matrix(vols: Sequence[int], r_min: int, r_max: int) -> tuple[np.ndarray, np.ndarray]:
    v = np.asarray(vols, dtype=float)
    rs = np.arange(r_min, r_max + 1)
    r, R = np.meshgrid(rs, rs, indexing="ij")
    mask = r < R
    return (v[R[mask]] / v[r[mask]]), (R[mask] / r[mask])


def measure_doubling(
    g: Graph,
    centers: Iterable[int],
    r_range: tuple[int, int],
    nu_grid: Sequence[float] = DEFAULT_NU_GRID,
    c_max: float = 4.0,
) -> DoublingEstimate:
    """Smallest grid exponent nu whose induced constant C_d(nu) is <= c_max.

    C_d(nu) is the maximum of |B(x,R)| / ((R/r)^nu |B(x,r)|) over the sampled
    centres and integer radii r_min <= r < R <= r_max.  If no grid value
    reaches c_max, the largest grid value is returned.
    """
    centers = tuple(g.check_vertex(c) for c in centers)
    if not centers:
        raise EmptySample("no centres sampled")
    r_min, r_max = r_range
    if r_min < 1 or r_max <= r_min:
        raise ValueError("need 1 <= r_min < r_max")
    vol_ratio, rad_ratio = [], []
    for vols in _sampled_volumes(g, centers, r_max):
        a, b = _ratio_matrix(vols, r_min, r_max)
        vol_ratio.append(a)
        rad_ratio.append(b)
    vol_ratio = np.concatenate(vol_ratio)
    log_rad = np.log(np.concatenate(rad_ratio))
    scan = []
    chosen = None
    for nu in nu_grid:
        c = float(np.max(vol_ratio * np.exp(-nu * log_rad)))
        scan.append((float(nu), c))
        if chosen is None and c <= c_max:
            chosen = (c, float(nu))
    if chosen is None:
        chosen = (scan[-1][1], scan[-1][0])
    return DoublingEstimate(chosen[0], chosen[1], centers, (r_min, r_max), c_max, tuple(scan))


def _doubling_violations(g: Graph, centers, r_range, nu, C_d) -> int:
    r_min, r_max = r_range
    bad = 0
    for vols in _sampled_volumes(g, centers, r_max):
        vr, rr = _ratio_matrix(vols, r_min, r_max)
        # the certificate constant is itself a max over these ratios
        bad += int(np.sum(vr > C_d * rr**nu * (1 + 1e-12)))
    return bad


# -- ball intersections ---------------------------------------------------------


@dataclass(frozen=True)
class BallIntersectionReport:
    min_ratio: float
    argmin: tuple[int, int, int, int]  # (x, r, y, R)
    case1_count: int
    case2_count: int
    tuples: int
    exhaustive: bool


def ball_intersection_min_ratio(
    g: Graph,
    centers_y: Iterable[int],
    R_list: Iterable[int],
    r_cap: int | None = None,
    budget: int = 2_000_000,
    seed: int = 0,
) -> BallIntersectionReport:
    """Minimum of |B(x,r) ∩ B(y,R)| / |B(x,r)| over x in B(y,R), 1 <= r <= min(2R, r_cap).

    Each tuple is classified as case 1 (r > 2 d(x,y)) or case 2 (r <= 2 d(x,y)).
    When the tuple count exceeds ``budget`` the (y, x) pairs are subsampled
    with a seeded generator until the budget is spent.
    """
    ys = [g.check_vertex(y) for y in centers_y]
    Rs = sorted({int(R) for R in R_list})
    if not ys or not Rs:
        raise EmptySample("need at least one centre and one radius")
    if Rs[0] < 1:
        raise ValueError("radii must be >= 1")
    R_top = Rs[-1]
    r_top = 2 * R_top if r_cap is None else min(2 * R_top, r_cap)
    R_arr = np.asarray(Rs)
    r_hi_for_R = np.minimum(2 * R_arr, r_top)

    pairs = []  # (y, x, d(x,y), tuple count)
    y_dists = {}
    for y in ys:
        order, dy = bfs(g, y, R_top)
        y_dists[y] = dy
        dxy = dy[order]
        counts = ((dxy[:, None] <= R_arr[None, :]) * r_hi_for_R[None, :]).sum(axis=1)
        pairs.extend(zip([y] * len(order), order.tolist(), dxy.tolist(), counts.tolist()))
    total = sum(p[3] for p in pairs)
    exhaustive = total <= budget
    if not exhaustive:
        rng = np.random.default_rng(seed)
        perm = rng.permutation(len(pairs))
        chosen, spent = [], 0
        for i in perm:
            if spent >= budget:
                break
            chosen.append(pairs[i])
            spent += pairs[i][3]
        pairs = sorted(chosen)

    best = (2.0, (-1, -1, -1, -1))
    case1 = case2 = tuples = 0
    r_idx = np.arange(r_top + 1)
    # one BFS per x, shared by every centre y paired with it
    pairs.sort(key=lambda item: (item[1], item[0]))
    cached_x, order, a = -1, None, None
    for y, x, dxy, _ in pairs:
        if x != cached_x:
            order, dx = bfs(g, x, r_top)
            a = dx[order]
            cached_x = x
        b = y_dists[y][order]
        b = np.where(b < 0, R_top + 1, b)
        hist = np.bincount(a * (R_top + 2) + b, minlength=(r_top + 1) * (R_top + 2))
        cum = hist.reshape(r_top + 1, R_top + 2).cumsum(axis=0).cumsum(axis=1)
        ball_x = cum[:, -1]
        for R, r_hi in zip(Rs, r_hi_for_R.tolist()):
            if dxy > R:
                continue
            ratios = cum[1 : r_hi + 1, R] / ball_x[1 : r_hi + 1]
            k = int(np.argmin(ratios))
            if ratios[k] < best[0]:
                best = (float(ratios[k]), (x, k + 1, y, R))
            n1 = int(np.sum(r_idx[1 : r_hi + 1] > 2 * dxy))
            case1 += n1
            case2 += r_hi - n1
            tuples += r_hi
    return BallIntersectionReport(best[0], best[1], case1, case2, tuples, exhaustive)
