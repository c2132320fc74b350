"""Content estimation and the quantitative integral inequalities.

Grid subsets of R^k are given as integer index arrays with spacing ``h``;
the cell of index ``i`` is the cube of side ``h`` centered at ``i*h``, so a
set of P cells has measure ``P * h**k`` exactly.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import ContractViolationError, UnsupportedDomainError
from .metric_core import MetricOracle

__all__ = [
    "Cover",
    "ContentEstimate",
    "Cube",
    "greedy_cover",
    "hausdorff_content",
    "content_series",
    "write_content_series_csv",
    "fit_loglog",
    "vitali_select",
    "riesz_potential",
    "riesz_ball_constant",
    "poincare_deviation",
    "segment_intersection_stat",
]


@dataclass(frozen=True)
class Cover:
    """A finite family of metric balls with its s-content sum(r_i^s)."""

    centers: np.ndarray    # (B, d)
    radii: np.ndarray      # (B,)
    s: float

    def __post_init__(self):
        radii = np.asarray(self.radii, float)
        if np.any(radii <= 0):
            raise ContractViolationError("all cover radii must be positive")
        object.__setattr__(self, "centers", np.atleast_2d(np.asarray(self.centers, float)))
        object.__setattr__(self, "radii", radii)

    @property
    def ball_count(self) -> int:
        return len(self.radii)

    def content(self, s: float | None = None) -> float:
        return float(np.sum(self.radii ** (self.s if s is None else s)))

    def to_json_dict(self) -> dict:
        return {"centers": self.centers.tolist(), "radii": self.radii.tolist(),
                "s": self.s}


class ContentEstimate(NamedTuple):
    resolution: float
    value: float
    ball_count: int


def greedy_cover(points, radius: float, oracle: MetricOracle, s: float = 1.0) -> Cover:
    """Farthest-point cover of a cloud by balls of one fixed radius.

    Starts from the first point and repeatedly adds the point farthest from
    the chosen centers until every point lies within ``radius`` of a center.
    Deterministic: ties resolve to the lowest row index.
    """
    points = np.atleast_2d(np.asarray(points, float))
    if len(points) == 0:
        raise ContractViolationError("point cloud must be nonempty")
    if radius <= 0:
        raise ContractViolationError("cover radius must be positive")
    chosen = [0]
    dmin = oracle.dist_many(points, points[0])
    while float(dmin.max()) > radius:
        nxt = int(np.argmax(dmin))
        chosen.append(nxt)
        dmin = np.minimum(dmin, oracle.dist_many(points, points[nxt]))
    centers = points[chosen]
    return Cover(centers, np.full(len(chosen), radius), s)


def hausdorff_content(points, s: float, radius: float, oracle: MetricOracle) -> ContentEstimate:
    """Upper estimate of the s-content of a cloud at one resolution."""
    cover = greedy_cover(points, radius, oracle, s)
    return ContentEstimate(radius, cover.content(), cover.ball_count)


def content_series(points, s, radii: Sequence[float], oracle: MetricOracle):
    return [hausdorff_content(points, s, r, oracle) for r in radii]


def write_content_series_csv(path, series: Sequence[ContentEstimate]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["r", "value", "ball_count"])
        for est in series:
            writer.writerow([est.resolution, est.value, est.ball_count])


def fit_loglog(xs, ys):
    """Least-squares slope and intercept of log(y) against log(x)."""
    xs = np.asarray(xs, float)
    ys = np.asarray(ys, float)
    if np.any(xs <= 0) or np.any(ys <= 0):
        raise ContractViolationError("log-log fit needs positive series")
    if xs.size < 2:
        raise ContractViolationError("need at least two points to fit")
    slope, intercept = np.polyfit(np.log(xs), np.log(ys), 1)
    return float(slope), float(intercept)


@dataclass(frozen=True)
class Cube:
    """Closed axis-parallel cube; a ball for the sup metric on R^k."""

    center: np.ndarray
    edge: float

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, float))
        if self.edge <= 0:
            raise ContractViolationError("cube edge must be positive")

    def dilate(self, factor: float) -> "Cube":
        return Cube(self.center, factor * self.edge)

    def intersects(self, other: "Cube") -> bool:
        gap = np.max(np.abs(self.center - other.center))
        return bool(gap <= (self.edge + other.edge) / 2.0)

    def contains_cube(self, other: "Cube") -> bool:
        reach = np.max(np.abs(self.center - other.center)) + other.edge / 2.0
        return bool(reach <= self.edge / 2.0 + 1e-12 * max(1.0, self.edge))


def vitali_select(cubes: Sequence[Cube]) -> list[Cube]:
    """Greedy disjoint subfamily whose 5-fold dilations cover the input union.

    Cubes are visited in order of decreasing edge (ties broken by center
    lexicographically), keeping each cube disjoint from all kept ones.  Every
    discarded cube then meets a kept cube of edge at least its own, so the
    5-dilation of that kept cube swallows it.
    """
    order = sorted(
        range(len(cubes)),
        key=lambda i: (-cubes[i].edge, tuple(cubes[i].center)),
    )
    kept: list[Cube] = []
    for i in order:
        if not any(cubes[i].intersects(c) for c in kept):
            kept.append(cubes[i])
    return kept


def _unit_ball_volume(k: int) -> float:
    return math.pi ** (k / 2.0) / math.gamma(k / 2.0 + 1.0)


def riesz_ball_constant(k: int) -> float:
    """Sharp constant: the potential of a ball of unit measure about its center.

    For a ball B with H^k(B) = m the integral of |x-y|^(1-k) over B centered
    at x equals this constant times m^(1/k).  k=2 gives 2*sqrt(pi).
    """
    alpha = _unit_ball_volume(k)
    omega = k * alpha
    return omega * alpha ** (-1.0 / k)


class RieszValue(NamedTuple):
    value: float
    regularized: bool


def _rect_corner_integral(a: float, b: float) -> float:
    # integral of 1/|y| over [0,a] x [0,b]
    if a <= 0 or b <= 0:
        return 0.0
    return a * math.asinh(b / a) + b * math.asinh(a / b)


def _singular_cell_integral(offset, half: float, k: int, depth: int = 7) -> float:
    """Integral of |y|^(1-k) over a cube of half-width ``half`` centered at
    ``offset`` that contains the origin.  Exact for k <= 2, refined midpoint
    with geometric subdivision otherwise."""
    offset = np.asarray(offset, float)
    if k == 1:
        return 2.0 * half
    if k == 2:
        left = half + offset[0]
        right = half - offset[0]
        down = half + offset[1]
        up = half - offset[1]
        return (_rect_corner_integral(left, down) + _rect_corner_integral(left, up)
                + _rect_corner_integral(right, down) + _rect_corner_integral(right, up))
    # k >= 3: split 3^k, recurse on the singular subcell
    sub = half / 3.0
    shifts = np.stack(np.meshgrid(*([np.array([-1, 0, 1])] * k), indexing="ij"),
                      axis=-1).reshape(-1, k) * 2.0 * sub
    total = 0.0
    for sh in shifts:
        c = offset + sh
        if np.max(np.abs(c)) > sub:  # origin outside this subcell
            total += (2.0 * sub) ** k * float(np.linalg.norm(c)) ** (1 - k)
        elif depth > 0:
            total += _singular_cell_integral(c, sub, k, depth - 1)
        else:
            # bound the residue by the integral over the enclosing ball
            alpha = _unit_ball_volume(k)
            total += k * alpha * sub * math.sqrt(k)
    return total


def _kernel_quadrature(indices, h: float, x, k: int, weights=None):
    """Midpoint quadrature of w(y) |x-y|^(1-k) over a union of grid cells.

    The cell containing ``x`` (if any) is integrated exactly/refined instead
    of by midpoint; the returned flag records that regularization happened.
    """
    indices = np.asarray(indices, np.int64)
    if indices.size == 0:
        return 0.0, False
    x = np.asarray(x, float)
    centers = indices * h
    if weights is None:
        weights = np.ones(len(centers))
    weights = np.asarray(weights, float)
    if k == 1:
        return float(np.sum(weights) * h), False
    diff = centers - x
    dist = np.linalg.norm(diff, axis=1)
    singular = np.max(np.abs(diff), axis=1) <= h / 2.0 * (1 + 1e-9)
    regular = ~singular
    total = float(np.sum(weights[regular] * dist[regular] ** (1 - k)) * h ** k)
    flagged = bool(singular.any())
    for row in np.flatnonzero(singular):
        total += weights[row] * _singular_cell_integral(diff[row], h / 2.0, k)
    return total, flagged


def riesz_potential(indices, h: float, x, k: int) -> RieszValue:
    """Quadrature of the Riesz kernel |x-y|^(1-k) over a grid set.

    Bounded by ``riesz_ball_constant(k) * measure**(1/k)``, with equality
    approached when the set is a ball about ``x``.
    """
    if h <= 0:
        raise ContractViolationError("grid spacing must be positive")
    value, flagged = _kernel_quadrature(indices, h, x, k)
    return RieszValue(value, flagged)


def _require_full_box(indices) -> tuple[np.ndarray, np.ndarray]:
    indices = np.asarray(indices, np.int64)
    lo = indices.min(axis=0)
    hi = indices.max(axis=0)
    expected = int(np.prod(hi - lo + 1))
    if expected != len(indices):
        raise UnsupportedDomainError(
            "domain must be a full axis-aligned box grid"
        )
    return lo, hi


def poincare_deviation(indices, h: float, u_values, x):
    """Deviation-from-mean bound through the Riesz potential of |grad u|.

    Returns ``(lhs, rhs)`` where lhs = |u(x) - mean(u)| and rhs is
    ``diam(D)^k / (k H^k(D))`` times the quadrature of
    ``|grad u(y)| / |x-y|^(k-1)``; the gradient uses central differences.
    ``x`` must be one of the grid points and the domain a full box.
    """
    indices = np.asarray(indices, np.int64)
    k = indices.shape[1]
    lo, hi = _require_full_box(indices)
    shape = tuple(hi - lo + 1)
    u = np.asarray(u_values, float)
    order = np.lexsort(indices.T[::-1])
    u_box = np.empty(shape)
    u_box[tuple((indices[order] - lo).T)] = u[order]
    if k == 1:
        grads = [np.gradient(u_box, h)]
    else:
        grads = np.gradient(u_box, h)
    gnorm = np.sqrt(sum(g ** 2 for g in grads))
    x = np.asarray(x, float)
    xi = np.round(x / h).astype(np.int64)
    if np.max(np.abs(xi * h - x)) > 1e-9 * max(1.0, h):
        raise ContractViolationError("query point must lie on the grid")
    if np.any(xi < lo) or np.any(xi > hi):
        raise ContractViolationError("query point outside the domain box")
    u_mean = float(u_box.mean())
    lhs = abs(float(u_box[tuple(xi - lo)]) - u_mean)
    measure = u_box.size * h ** k
    extent = (hi - lo + 1) * h
    diam = float(np.linalg.norm(extent))
    weights = gnorm[tuple((indices - lo).T)]
    integral, _ = _kernel_quadrature(indices, h, x, k, weights)
    rhs = diam ** k / (k * measure) * integral
    return lhs, rhs


class SegmentStat(NamedTuple):
    median: float
    fraction_below: float
    threshold: float


def segment_intersection_stat(e_indices, h: float, q_lo, q_edge: float, x,
                              samples: int, seed: int) -> SegmentStat:
    """Length of segment-set intersections against random endpoints.

    Draws ``samples`` uniform points y in the cube Q, measures the length of
    the part of the segment [x, y] inside the grid set E by 1-D quadrature,
    and reports the fraction falling below twice the sharp ball-potential
    constant times measure(E)^(1/n).
    """
    if samples < 100:
        raise ContractViolationError("need at least 100 sample segments")
    e_indices = np.asarray(e_indices, np.int64)
    n = len(np.atleast_1d(q_lo))
    q_lo = np.asarray(q_lo, float)
    x = np.asarray(x, float)
    measure = len(e_indices) * h ** n
    threshold = 2.0 * riesz_ball_constant(n) * measure ** (1.0 / n)
    rng = np.random.default_rng(seed)
    ys = q_lo + q_edge * rng.random((samples, n))
    if len(e_indices) == 0:
        return SegmentStat(0.0, 1.0, threshold)
    lo = e_indices.min(axis=0)
    hi = e_indices.max(axis=0)
    raster = np.zeros(tuple(hi - lo + 1), dtype=bool)
    raster[tuple((e_indices - lo).T)] = True
    lengths = np.empty(samples)
    for i, y in enumerate(ys):
        seg = y - x
        seg_len = float(np.linalg.norm(seg))
        if seg_len == 0.0:
            lengths[i] = 0.0
            continue
        nodes = max(64, int(seg_len / (0.25 * h)) + 1)
        ts = (np.arange(nodes) + 0.5) / nodes
        pts = x[None, :] + ts[:, None] * seg[None, :]
        idx = np.round(pts / h).astype(np.int64) - lo
        ok = np.all((idx >= 0) & (idx < raster.shape), axis=1)
        inside = np.zeros(nodes, dtype=bool)
        inside[ok] = raster[tuple(idx[ok].T)]
        lengths[i] = seg_len * float(inside.mean())
    fraction = float(np.mean(lengths <= threshold))
    return SegmentStat(float(np.median(lengths)), fraction, threshold)
