"""Return probabilities of the simple random walk, exact and Monte Carlo.

The exact engine keeps the distribution on the ball the walk can have
reached, with vertices in BFS order so that B(x, s) is a prefix of the
state vector.  By default it runs only to time t_max/2 and recovers even
return probabilities from reversibility:

    p_{2s}(x, x) = Σ_y p_s(x, y)² m(x) / m(y).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix

from .analysis import ExponentFit, TooFewPoints, fit_exponent
from .graph import Graph, bfs, safe_radius

MASS_TOLERANCE = 1e-12


class BoundaryReached(ValueError):
    def __init__(self, vertex: int, needed: float, safe: float):
        super().__init__(f"walk from {vertex} needs radius {needed} but the truncation boundary is at {safe}")
        self.vertex, self.needed, self.safe = vertex, needed, safe


@dataclass(frozen=True)
class ReturnProbSeries:
    start: int
    t: np.ndarray = field(repr=False)
    p: np.ndarray = field(repr=False)
    exact: bool
    max_mass_error: float = 0.0
    stderr: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        for arr in (self.t, self.p):
            arr.flags.writeable = False

    def rows(self) -> list[tuple[int, float]]:
        return list(zip(self.t.tolist(), self.p.tolist()))

    def at(self, t: int) -> float:
        i = np.searchsorted(self.t, t)
        if i == len(self.t) or self.t[i] != t:
            raise KeyError(t)
        return float(self.p[i])


def _check_boundary(g: Graph, x: int, t_max: int, waive: bool) -> None:
    if waive:
        return
    safe = safe_radius(g, x)
    if not safe > t_max / 2:
        raise BoundaryReached(x, t_max / 2, safe)


def _ball_operator(g: Graph, x: int, radius: int):
    """Transition data on B(x, radius) in BFS order.

    Returns (A, m, prefix) with A the ball-induced adjacency (CSR, rows in
    BFS order), m the ambient degrees, and prefix[s] = |B(x, s)|.
    """
    order, dist = bfs(g, x, radius)
    k = len(order)
    local = np.full(g.vertex_count, -1, dtype=np.int64)
    local[order] = np.arange(k)
    starts, stops = g.indptr[order], g.indptr[order + 1]
    counts = stops - starts
    offsets = np.repeat(starts - (np.cumsum(counts) - counts), counts) + np.arange(int(counts.sum()))
    cols = local[g.indices[offsets]]
    rows = np.repeat(np.arange(k), counts)
    keep = cols >= 0
    A = csr_matrix((np.ones(int(keep.sum())), (rows[keep], cols[keep])), shape=(k, k))
    A.sort_indices()
    prefix = np.searchsorted(dist[order], np.arange(radius + 1), side="right")
    return A, g.degrees[order].astype(float), prefix


def _prefix_rows(A: csr_matrix, k: int) -> csr_matrix:
    end = A.indptr[k]
    return csr_matrix((A.data[:end], A.indices[:end], A.indptr[: k + 1]), shape=(k, A.shape[1]))


def _iterate(A: csr_matrix, m: np.ndarray, prefix: np.ndarray, steps: int, on_step) -> float:
    """Run the walk from BFS index 0 for ``steps`` steps; returns the worst mass error."""
    K = A.shape[0]
    p = np.zeros(K)
    p[0] = 1.0
    w = np.zeros(K)
    worst = 0.0
    on_step(0, p)
    for s in range(1, steps + 1):
        k_prev = int(prefix[min(s - 1, len(prefix) - 1)])
        k_next = int(prefix[min(s, len(prefix) - 1)])
        # mass at time s-1 lives on B(x, s-1); it can only reach B(x, s)
        np.divide(p[:k_prev], m[:k_prev], out=w[:k_prev])
        p[:k_next] = _prefix_rows(A, k_next) @ w
        worst = max(worst, abs(float(p[:k_next].sum()) - 1.0))
        on_step(s, p)
    return worst


def return_probabilities_exact(
    g: Graph,
    x: int,
    t_max: int,
    method: str = "half",
    waive_boundary: bool = False,
) -> ReturnProbSeries:
    """p_t(x, x) for even t = 0, 2, ..., t_max of the non-lazy simple random walk.

    ``method="half"`` iterates to t_max/2 and squares; ``"direct"`` iterates
    all t_max steps.  The walk must not reach the truncation boundary:
    BoundaryReached unless dist(x, boundary) > t_max/2 (or ``waive_boundary``).
    """
    x = g.check_vertex(x)
    if t_max < 0:
        raise ValueError("t_max must be nonnegative")
    t_max -= t_max % 2
    _check_boundary(g, x, t_max, waive_boundary)
    ts = np.arange(0, t_max + 1, 2)
    out = np.empty(len(ts))
    if method == "half":
        half = t_max // 2
        A, m, prefix = _ball_operator(g, x, half)
        ratio = m[0] / m

        def record(s, p):
            out[s] = float(np.dot(p * p, ratio))

        worst = _iterate(A, m, prefix, half, record)
    elif method == "direct":
        A, m, prefix = _ball_operator(g, x, t_max)

        def record(s, p):
            if s % 2 == 0:
                out[s // 2] = p[0]

        worst = _iterate(A, m, prefix, t_max, record)
    else:
        raise ValueError(f"unknown method {method!r}")
    return ReturnProbSeries(x, ts, np.clip(out, 0.0, 1.0), True, worst)


def return_probabilities_mc(
    g: Graph,
    x: int,
    t_max: int,
    walkers: int = 100_000,
    seed: int = 0,
    waive_boundary: bool = False,
) -> ReturnProbSeries:
    """Monte Carlo estimate of p_t(x, x) for even t, with binomial standard errors."""
    x = g.check_vertex(x)
    t_max -= t_max % 2
    _check_boundary(g, x, t_max, waive_boundary)
    rng = np.random.default_rng(seed)
    pos = np.full(walkers, x, dtype=np.int64)
    ts = np.arange(0, t_max + 1, 2)
    hits = np.empty(len(ts))
    hits[0] = walkers
    for t in range(1, t_max + 1):
        deg = g.degrees[pos]
        pos = g.indices[g.indptr[pos] + (rng.random(walkers) * deg).astype(np.int64)]
        if t % 2 == 0:
            hits[t // 2] = np.count_nonzero(pos == x)
    p = hits / walkers
    stderr = np.sqrt(p * (1 - p) / walkers)
    return ReturnProbSeries(x, ts, p, False, 0.0, stderr)


def decay_fit(series: ReturnProbSeries, t_window: tuple[int, int]) -> ExponentFit:
    """Log-log slope of p_t(x, x) over even t in the window."""
    lo, hi = t_window
    mask = (series.t >= lo) & (series.t <= hi) & (series.t > 0)
    if mask.sum() < 3:
        raise TooFewPoints(f"window {t_window} holds {int(mask.sum())} even times")
    return fit_exponent(zip(series.t[mask].tolist(), series.p[mask].tolist()))


def nonincreasing_violations(series: ReturnProbSeries, rel_tol: float = 1e-12) -> list[int]:
    """Even times t where p_t(x,x) exceeds p_{t-2}(x,x); reported, not asserted."""
    p = series.p
    bad = np.flatnonzero(p[1:] > p[:-1] * (1 + rel_tol)) + 1
    return series.t[bad].tolist()
