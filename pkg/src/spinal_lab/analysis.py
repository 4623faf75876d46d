"""Gradients, Lᵖ norms, the Nash functional on test functions, and exponent arithmetic.

Asymptotic claims of the form "a ≲ b" are turned into measured constants
compared against caller thresholds; nothing here hides a constant.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .graph import Graph, safe_radii, volume_table
from .spinal import (
    RadiusUnsafe,
    SpinalGraph,
    spinal_distances,
    spinal_volume_table,
    spine_ball_table,
    test_function,
)


class DegenerateGraph(ValueError):
    pass


class BetaTooLarge(ValueError):
    pass


class DomainError(ValueError):
    pass


class TooFewPoints(ValueError):
    pass


class NonPositive(ValueError):
    pass


# -- fitting --------------------------------------------------------------------------


@dataclass(frozen=True)
class ExponentFit:
    slope: float
    intercept: float
    max_residual: float
    window: tuple[float, float]
    points: int


def fit_exponent(pairs: Iterable[tuple[float, float]]) -> ExponentFit:
    """Least-squares line through (log r, log v)."""
    arr = np.asarray(list(pairs), dtype=float)
    if arr.ndim != 2 or len(arr) < 3:
        raise TooFewPoints(f"need at least 3 points, got {len(arr)}")
    if np.any(arr <= 0):
        raise NonPositive("all r and v must be positive")
    x, y = np.log(arr[:, 0]), np.log(arr[:, 1])
    if np.ptp(x) == 0:
        raise TooFewPoints("need at least two distinct abscissae")
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    return ExponentFit(float(slope), float(intercept), float(np.max(np.abs(resid))),
                       (float(arr[:, 0].min()), float(arr[:, 0].max())), len(arr))


# -- gradient and norms ---------------------------------------------------------------


def graph_gradient(g: Graph, f: Sequence[float], method: str = "vertex") -> np.ndarray:
    """|∇f(x)| = sqrt( (1/2) Σ_{y~x} |f(y) - f(x)|² / m(x) ).

    ``method="vertex"`` sums over each adjacency row; ``"edge"`` sweeps the
    edge list once and scatters to both endpoints.  They agree to rounding.
    """
    f = np.asarray(f, dtype=float)
    if f.shape != (g.vertex_count,):
        raise ValueError("f must have one value per vertex")
    m = g.degrees.astype(float)
    if method == "vertex":
        src = np.repeat(np.arange(g.vertex_count), g.degrees)
        sq = (f[g.indices] - f[src]) ** 2
        total = np.add.reduceat(sq, g.indptr[:-1]) if len(sq) else np.zeros(g.vertex_count)
        total = np.where(g.degrees > 0, total, 0.0)
    elif method == "edge":
        e = g.edges()
        sq = (f[e[:, 1]] - f[e[:, 0]]) ** 2
        total = np.bincount(e[:, 0], sq, g.vertex_count) + np.bincount(e[:, 1], sq, g.vertex_count)
    else:
        raise ValueError(f"unknown method {method!r}")
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.sqrt(np.where(m > 0, 0.5 * total / np.where(m > 0, m, 1.0), 0.0))
    return out


def lp_norm(f: Sequence[float], p: float) -> float:
    """(Σ |f|^p)^(1/p) for counting measure; p = inf gives the max."""
    a = np.abs(np.asarray(f, dtype=float))
    if p == math.inf:
        return float(a.max()) if a.size else 0.0
    if not p > 0:
        raise ValueError("p must be positive")
    a = a[a > 0]
    if a.size == 0:
        return 0.0
    # rescale by the max to keep a**p finite
    top = a.max()
    return float(top * math.fsum((a / top) ** p) ** (1.0 / p))


def conjugate(p: float) -> float:
    return p / (p - 1.0)


def nash_ratio(g: Graph, f: Sequence[float], p: float, beta: float) -> float:
    """‖f‖_p^{1+p'/β} / (‖f‖_1^{p'/β} ‖∇f‖_p)."""
    if g.vertex_count < 2:
        raise DegenerateGraph("the Nash functional needs at least two vertices")
    if not p > 1 or not beta > 0:
        raise ValueError("need p > 1 and beta > 0")
    f = np.asarray(f, dtype=float)
    n1, np_, gp = lp_norm(f, 1), lp_norm(f, p), lp_norm(graph_gradient(g, f), p)
    if n1 == 0:
        raise ValueError("f must be nonzero")
    if gp == 0:
        return math.inf
    q = conjugate(p) / beta
    return math.exp((1 + q) * math.log(np_) - q * math.log(n1) - math.log(gp))


# -- Nash curves on the test functions -----------------------------------------------------


def _require_spinal_radius(sg: SpinalGraph, x0: int, radius: float, strict: bool) -> None:
    safe = sg.spinal_safe_radius(x0)
    if radius > safe or (strict and radius >= safe):
        raise RadiusUnsafe(radius, safe, "spinal radius")


@dataclass(frozen=True)
class NashPoint:
    n: int
    norm1: float
    normp: float
    gradp: float
    ratio: float


@dataclass(frozen=True)
class NashCurve:
    center: int
    p: float
    beta: float
    entries: tuple[NashPoint, ...]
    fit: ExponentFit
    predicted_slope: float | None = None

    @property
    def slope(self) -> float:
        return self.fit.slope

    def slope_law_holds(self, rel_tol: float = 0.15) -> bool:
        if self.predicted_slope is None:
            raise ValueError("no predicted slope: pass delta_sigma and delta_g")
        return abs(self.slope - self.predicted_slope) <= rel_tol * abs(self.predicted_slope)


def predicted_nash_slope(p: float, beta: float, delta_sigma: float, delta_g: float) -> float:
    """Growth exponent of the ratio along g_{2n}: 1 + (δG - δΣ)/p - δG/β."""
    return 1.0 + (delta_g - delta_sigma) / p - delta_g / beta


def nash_curve(
    sg: SpinalGraph,
    x0: int,
    p: float,
    beta: float,
    n_list: Sequence[int],
    delta_sigma: float | None = None,
    delta_g: float | None = None,
) -> NashCurve:
    """Nash ratios of f = g_{2n} for each n, with a log-log slope fit."""
    ns = [int(n) for n in n_list]
    if any(b <= a for a, b in zip(ns, ns[1:])):
        raise ValueError("n_list must be strictly increasing")
    # the gradient at spinal distance 2n uses the degrees there
    _require_spinal_radius(sg, x0, 2 * ns[-1], strict=True)
    entries = []
    for n in ns:
        f = test_function(sg, x0, 2 * n).values()
        grad = graph_gradient(sg.graph, f)
        n1, np_, gp = lp_norm(f, 1), lp_norm(f, p), lp_norm(grad, p)
        entries.append(NashPoint(n, n1, np_, gp, nash_ratio(sg.graph, f, p, beta)))
    fit = fit_exponent((e.n, e.ratio) for e in entries)
    predicted = None
    if delta_sigma is not None and delta_g is not None:
        predicted = predicted_nash_slope(p, beta, delta_sigma, delta_g)
    return NashCurve(int(x0), float(p), float(beta), tuple(entries), fit, predicted)


# -- the three test-function bounds ----------------------------------------------------------


@dataclass(frozen=True)
class Lemma4Report:
    center: int
    n: int
    p: float
    norm1_ok: bool
    normp_ok: bool
    grad_ok: bool
    support_ok: bool
    grad_support_ok: bool
    constants: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.norm1_ok and self.normp_ok and self.grad_ok and self.support_ok and self.grad_support_ok


def lemma4_bounds_check(sg: SpinalGraph, x0: int, n: int, p: float) -> Lemma4Report:
    """Check the explicit bounds for f = g_{2n}.

    * ‖f‖₁ ≤ |D(x0, 2n)|                     (integer form: Σ num ≤ 2n |D(x0,2n)|)
    * ‖f‖_p ≥ |D(x0, n)|^{1/p} / 2             (f ≥ 1/2 on D(x0, n))
    * ‖∇f‖_p ≤ |B_Σ(x0, 2n)|^{1/p} / (2√2 n)
    * supp f = D(x0, 2n - 1), and ∇f vanishes off Σ ∩ D(x0, 2n).

    Neighbouring values of f differ by 0 or 1/(2n), so |∇f(x)| equals
    sqrt(k_x / m_x) / (2√2 n) with k_x the number of neighbours whose
    value differs; the gradient bound is checked on the integers k_x, m_x
    and again on the floating-point gradient.
    """
    _require_spinal_radius(sg, x0, 2 * n, strict=True)
    g = sg.graph
    tf = test_function(sg, x0, 2 * n)
    num = tf.numerators
    d = spinal_distances(sg, x0, 2 * n)
    in_D = lambda r: (d >= 0) & (d <= r)  # noqa: E731
    D2n, Dn = int(in_D(2 * n).sum()), int(in_D(n).sum())
    spine_ball = int((in_D(2 * n) & (sg.spine_index >= 0)).sum())

    norm1_ok = int(num.sum()) <= 2 * n * D2n
    # (num/n)^p = (2 f)^p, so the bound reads Σ (num/n)^p ≥ |D(x0, n)|
    scaled_p = math.fsum(((num[num > 0] / n) ** p).tolist())
    normp_ok = scaled_p >= Dn

    src = np.repeat(np.arange(g.vertex_count), g.degrees)
    diff = num[g.indices] != num[src]
    k = np.bincount(src[diff], minlength=g.vertex_count)
    m = g.degrees
    moving = np.flatnonzero(k)
    grad_sum = math.fsum(((k[moving] / m[moving]) ** (p / 2)).tolist())
    grad = graph_gradient(g, tf.values())
    gradp = lp_norm(grad, p)
    grad_bound = spine_ball ** (1.0 / p) / (2 * math.sqrt(2) * n)
    grad_ok = bool(np.all(k <= m)) and grad_sum <= spine_ball and gradp <= grad_bound * (1 + 1e-12)

    support_ok = np.array_equal(tf.support(), np.flatnonzero(in_D(2 * n - 1)))
    allowed = in_D(2 * n) & (sg.spine_index >= 0)
    grad_support_ok = not np.any((k > 0) & ~allowed) and not np.any((grad > 0) & ~allowed)

    constants = {
        "norm1": lp_norm(tf.values(), 1),
        "D_2n": D2n,
        "normp": lp_norm(tf.values(), p),
        "normp_lower": Dn ** (1.0 / p) / 2,
        "gradp": gradp,
        "gradp_upper": grad_bound,
        "spine_ball_2n": spine_ball,
        "gradient_support": int(moving.size),
    }
    return Lemma4Report(int(x0), int(n), float(p), bool(norm1_ok), bool(normp_ok), bool(grad_ok),
                        bool(support_ok), bool(grad_support_ok), constants)


# -- dimensions ------------------------------------------------------------------------------


@dataclass(frozen=True)
class DimensionCertificate:
    x0: int
    n_seq: tuple[int, ...]
    delta_sigma: float
    delta_g: float
    spinal_volumes: tuple[int, ...]
    spinal_volumes_double: tuple[int, ...]
    spine_balls_double: tuple[int, ...]
    c_double: float
    c_spine: float
    c_lo: float
    c_hi: float
    thresholds: dict
    passed: bool
    failures: tuple[str, ...] = ()

    @property
    def window_ratio(self) -> float:
        return self.c_hi / self.c_lo

    def to_json(self) -> dict:
        return asdict(self)


def certify_dimensions(
    sg: SpinalGraph,
    x0: int,
    n_list: Sequence[int],
    delta_sigma: float,
    delta_g: float,
    double_threshold: float = 8.0,
    spine_threshold: float = 8.0,
    window_threshold: float = 8.0,
) -> DimensionCertificate:
    """Measure the constants of the three dimension conditions along (n_k).

    c_double = max |D(x0,2n)| / |D(x0,n)|, c_spine = max |B_Σ(x0,2n)| / n^δΣ,
    and [c_lo, c_hi] the range of |D(x0,n)| / n^δG.
    """
    ns = tuple(int(n) for n in n_list)
    if not ns or any(b <= a for a, b in zip(ns, ns[1:])) or ns[0] < 1:
        raise ValueError("n_list must be a strictly increasing sequence of positive integers")
    r_top = 2 * ns[-1]
    _require_spinal_radius(sg, x0, r_top, strict=False)
    vols = spinal_volume_table(sg, x0, r_top)
    spine = spine_ball_table(sg, x0, r_top)
    Dn = tuple(int(vols[n]) for n in ns)
    D2n = tuple(int(vols[2 * n]) for n in ns)
    S2n = tuple(int(spine[2 * n]) for n in ns)
    c_double = max(b / a for a, b in zip(Dn, D2n))
    c_spine = max(s / n**delta_sigma for s, n in zip(S2n, ns))
    window = [v / n**delta_g for v, n in zip(Dn, ns)]
    c_lo, c_hi = min(window), max(window)
    failures = []
    if c_double > double_threshold:
        failures.append("doubling")
    if c_spine > spine_threshold:
        failures.append("spine")
    if c_hi / c_lo > window_threshold:
        failures.append("window")
    thresholds = {"double": double_threshold, "spine": spine_threshold, "window": window_threshold}
    return DimensionCertificate(int(x0), ns, float(delta_sigma), float(delta_g), Dn, D2n, S2n,
                                float(c_double), float(c_spine), float(c_lo), float(c_hi),
                                thresholds, not failures, tuple(failures))


# -- exponent arithmetic -----------------------------------------------------------------------


@dataclass(frozen=True)
class DimInequality:
    holds: bool
    slack: float


def dim_inequality(p: float, beta: float, delta_sigma: float, delta_g: float) -> DimInequality:
    """Necessary condition for S(p, β): (δG - δΣ)/p - δG/β + 1 ≤ 0."""
    if not p > 1 or not beta > 0:
        raise ValueError("need p > 1 and beta > 0")
    if delta_sigma < 1 or delta_g < 1:
        raise ValueError("dimensions must be >= 1")
    slack = (delta_g - delta_sigma) / p - delta_g / beta + 1.0
    return DimInequality(slack <= 0, slack)


def p_lower_bound(beta: float, delta_sigma: float, delta_g: float) -> float:
    """β(δG - δΣ)/(δG - β): S(p, β) forces p at least this large."""
    if not delta_g > delta_sigma:
        raise DomainError("need delta_g > delta_sigma")
    if not delta_g > beta:
        raise BetaTooLarge(f"beta={beta} is not below delta_g={delta_g}")
    return beta * (delta_g - delta_sigma) / (delta_g - beta)


def beta_from_nu(nu: float) -> float:
    """Nash exponent 2ν/(ν+1) coming from return-probability decay t^{-ν/(ν+1)}."""
    if not nu > 0:
        raise DomainError("nu must be positive")
    return 2.0 * nu / (nu + 1.0)


def critical_p(delta_sigma: float, delta_g: float, nu: float) -> float:
    """p_c = 2(δG - δΣ) / (δG/ν' - 2δΣ + 2) with ν' = ν/(ν - 1)."""
    if not delta_sigma >= 1:
        raise DomainError("need delta_sigma >= 1")
    if not delta_g > delta_sigma:
        raise DomainError("need delta_g > delta_sigma")
    if not nu > 1:
        raise DomainError("need nu > 1 (nu' = nu/(nu-1) must be finite)")
    # δG/ν' = δG - δG/ν; grouping keeps the δΣ = 1, ν = δG case exact
    denom = (delta_g - delta_g / nu) + 2.0 * (1.0 - delta_sigma)
    if not denom > 0:
        raise DomainError("need delta_g/nu' - 2 delta_sigma + 2 > 0")
    return 2.0 * (delta_g - delta_sigma) / denom


# -- volume lower bound ----------------------------------------------------------------------------


@dataclass(frozen=True)
class VolumeLowerBound:
    D: float
    min_constant: float
    argmin: tuple[int, int]
    samples: int
    case_counts: dict = field(default_factory=dict)


def volume_lower_bound_check(
    g: Graph,
    D: float,
    center_sample: Iterable[int],
    r_list: Iterable[int],
    case_rule: Callable[[int, int], str] | None = None,
) -> VolumeLowerBound:
    """min over sampled (x, r) of |B(x, r)| / r^D; radii must stay inside the truncation.

    ``case_rule(x, r)`` optionally labels each sample, and the labels are counted.
    """
    rs = sorted({int(r) for r in r_list})
    if not rs or rs[0] < 1:
        raise ValueError("radii must be positive")
    best = (math.inf, (-1, -1))
    samples = 0
    cases: dict[str, int] = {}
    radii = safe_radii(g)
    for x in center_sample:
        x = g.check_vertex(x)
        safe = float(radii[x])
        if rs[-1] > safe:
            raise RadiusUnsafe(rs[-1], safe, f"ball radius at vertex {x}")
        vols = volume_table(g, x, rs[-1]).volumes
        for r in rs:
            c = vols[r] / r**D
            samples += 1
            if c < best[0]:
                best = (c, (x, r))
            if case_rule is not None:
                label = case_rule(x, r)
                cases[label] = cases.get(label, 0) + 1
    if samples == 0:
        raise ValueError("empty centre sample")
    return VolumeLowerBound(float(D), float(best[0]), best[1], samples, cases)


def volume_lower_bound_pairs(
    g: Graph,
    D: float,
    pairs: Iterable[tuple[int, int]],
    case_rule: Callable[[int, int], str] | None = None,
) -> VolumeLowerBound:
    """Same as ``volume_lower_bound_check`` over explicit (x, r) pairs."""
    by_center: dict[int, list[int]] = {}
    for x, r in pairs:
        by_center.setdefault(int(x), []).append(int(r))
    best = (math.inf, (-1, -1))
    samples = 0
    cases: dict[str, int] = {}
    for x, rs in sorted(by_center.items()):
        part = volume_lower_bound_check(g, D, [x], rs, case_rule)
        samples += part.samples
        for key, v in part.case_counts.items():
            cases[key] = cases.get(key, 0) + v
        if part.min_constant < best[0]:
            best = (part.min_constant, part.argmin)
    return VolumeLowerBound(float(D), float(best[0]), best[1], samples, cases)


def plate_case_rule(plate) -> Callable[[int, int], str]:
    """Label (x, r) by whether r <= 2 n^alpha for the fibre index n of x."""
    alpha = plate.spec.alpha

    def rule(x: int, r: int) -> str:
        n = plate.position(x)
        return "small" if r <= 2 * n**alpha else "large"

    return rule
