"""Local linear fits of sampled maps and everything built on their ranks:
critical-set stratification, the Jacobian/multiplicity balance, coordinate
straightening and the constructive covering of rank-j critical images.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .errors import (
    ContractViolationError,
    CubeTooCoarseError,
    InsufficientDensityError,
    NeedsPermutationError,
    StraighteningFailureError,
    UnreliableCheckError,
)
from .measure import Cover
from .metric_core import SampledMap

__all__ = [
    "ApproxJet",
    "Stratification",
    "AreaCheck",
    "Straightening",
    "CriticalCover",
    "numerical_rank",
    "approx_jet",
    "stratify_critical",
    "area_formula_check",
    "straightening_map",
    "find_straightening",
    "critical_cover",
]

DEFAULT_RANK_TOL = 1e-6
DEFAULT_MIN_FILL = 0.6


def numerical_rank(matrix, tol: float) -> int:
    """Number of singular values above tol times the largest one."""
    if not 0.0 < tol < 1.0:
        raise ContractViolationError("rank tolerance must lie in (0, 1)")
    matrix = np.atleast_2d(np.asarray(matrix, float))
    sigma = np.linalg.svd(matrix, compute_uv=False)
    if sigma.size == 0 or sigma[0] == 0.0:
        return 0
    return int(np.sum(sigma > tol * sigma[0]))


@dataclass(frozen=True)
class ApproxJet:
    """Least-squares linear model of a sampled map around one grid point."""

    base: np.ndarray             # (k,)
    matrix: np.ndarray           # (N, k) row i = gradient of component i
    singular_values: np.ndarray  # nonincreasing
    rank: int
    residual: float              # max fit residual / fitting radius


_OFFSETS_CACHE: dict = {}


def _ball_offsets(k: int, steps: int) -> np.ndarray:
    key = (k, steps)
    if key not in _OFFSETS_CACHE:
        rng = np.arange(-steps, steps + 1)
        mesh = np.meshgrid(*([rng] * k), indexing="ij")
        offs = np.stack([m.ravel() for m in mesh], axis=1)
        offs = offs[np.sum(offs ** 2, axis=1) <= steps ** 2]
        _OFFSETS_CACHE[key] = offs.astype(np.int64)
    return _OFFSETS_CACHE[key]


def _neighbor_rows(f: SampledMap, row: int, radius: float):
    steps = int(np.floor(radius / f.h + 1e-9))
    offs = _ball_offsets(f.k, steps)
    center = f.indices[row]
    rows = [f._lookup.get(t) for t in map(tuple, (center + offs).tolist())]
    found = [r for r in rows if r is not None]
    return np.asarray(found, int), len(offs)


def approx_jet(f: SampledMap, row: int, radius: float,
               tol: float = DEFAULT_RANK_TOL,
               min_fill: float = DEFAULT_MIN_FILL) -> ApproxJet:
    """Fit f(y) ~ f(x) + D (y - x) over the grid ball of the given radius.

    The neighborhood must contain at least ``min_fill`` of the full lattice
    ball (a density-point proxy) and span all k directions; otherwise an
    InsufficientDensityError is raised.
    """
    rows, lattice_total = _neighbor_rows(f, row, radius)
    if len(rows) < lattice_total * min_fill or len(rows) < f.k + 1:
        raise InsufficientDensityError(
            f"only {len(rows)}/{lattice_total} lattice neighbors present"
        )
    x = f.points[row]
    a = f.points[rows] - x
    b = f.values[rows] - f.values[row]
    sol, _, arank, _ = np.linalg.lstsq(a, b, rcond=None)
    if arank < f.k:
        raise InsufficientDensityError("fit neighborhood is rank deficient")
    matrix = sol.T
    sigma = np.linalg.svd(matrix, compute_uv=False)
    fit = a @ sol
    residual = float(np.max(np.abs(fit - b))) / radius if b.size else 0.0
    # singular values below the data noise scale are solver artifacts, not rank
    floor = 1e-9 * float(np.max(np.abs(b))) / radius if b.size else 0.0
    if sigma.size == 0 or sigma[0] <= floor:
        rank = 0
    else:
        rank = int(np.sum(sigma > max(tol * sigma[0], floor)))
    return ApproxJet(x, matrix, sigma, rank, residual)


@dataclass(frozen=True)
class Stratification:
    """Partition of the domain grid by the fitted derivative rank."""

    k: int
    ranks: np.ndarray       # (P,) fitted rank, -1 where unresolved
    residuals: np.ndarray   # (P,) nan where unresolved

    @property
    def regular(self) -> np.ndarray:
        return np.flatnonzero(self.ranks == self.k)

    @property
    def unresolved(self) -> np.ndarray:
        return np.flatnonzero(self.ranks < 0)

    def stratum(self, j: int) -> np.ndarray:
        if not 0 <= j < self.k:
            raise ContractViolationError("stratum index must satisfy 0 <= j < k")
        return np.flatnonzero(self.ranks == j)

    @property
    def max_resolved_rank(self) -> int:
        resolved = self.ranks[self.ranks >= 0]
        return int(resolved.max()) if resolved.size else -1

    def to_json_dict(self) -> dict:
        return {
            "k": self.k,
            "ranks": self.ranks.tolist(),
            "residuals": [None if np.isnan(r) else r for r in self.residuals],
        }


def stratify_critical(f: SampledMap, radius: float,
                      tol: float = DEFAULT_RANK_TOL,
                      residual_tol: float | None = None,
                      min_fill: float = DEFAULT_MIN_FILL) -> Stratification:
    """Assign every grid point its fitted rank; fit failures go unresolved."""
    if radius < 2 * f.h:
        raise ContractViolationError("fitting radius must be at least 2h")
    if residual_tol is None:
        residual_tol = 0.5 * max(f.lipschitz, 1e-12)
    n = len(f.indices)
    ranks = np.full(n, -1, int)
    residuals = np.full(n, np.nan)
    for row in range(n):
        try:
            jet = approx_jet(f, row, radius, tol, min_fill)
        except InsufficientDensityError:
            continue
        if jet.residual > residual_tol:
            continue
        ranks[row] = jet.rank
        residuals[row] = jet.residual
    return Stratification(f.k, ranks, residuals)


class AreaCheck(NamedTuple):
    lhs: float
    rhs: float
    gap: float
    unresolved_fraction: float


def _domain_cells(f: SampledMap):
    """Grid cells whose 2^k corners are all sampled; corner rows stacked."""
    k = f.k
    corner_offs = np.stack(
        np.meshgrid(*([np.array([0, 1])] * k), indexing="ij"), axis=-1
    ).reshape(-1, k)
    base = []
    corner_rows = []
    for idx in f.indices:
        rows = [f._lookup.get(t) for t in map(tuple, (idx + corner_offs).tolist())]
        if all(r is not None for r in rows):
            base.append(idx)
            corner_rows.append(rows)
    return np.asarray(base, np.int64), np.asarray(corner_rows, int)


def _cluster_count(idx: np.ndarray) -> int:
    # connected components under Chebyshev adjacency of integer index rows
    m = len(idx)
    if m == 1:
        return 1
    parent = list(range(m))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for a in range(m):
        for b in range(a + 1, m):
            if np.max(np.abs(idx[a] - idx[b])) <= 1:
                ra, rb = find(a), find(b)
                if ra != rb:
                    parent[ra] = rb
    return len({find(a) for a in range(m)})


def _rasterized_image_measure(corner_images: np.ndarray, base_idx: np.ndarray,
                              k: int, delta: float) -> float:
    """Multiplicity-weighted measure of the image on a delta-grid.

    A target cell counts once per connected preimage sheet hitting it; a
    cell is hit when its center lies in the bounding box of some domain
    cell's corner images (midpoint sampling keeps boundary bias small).
    """
    m = corner_images.shape[-1]
    lo = corner_images.min(axis=1)
    hi = corner_images.max(axis=1)
    origin = lo.min(axis=0) - 0.37 * delta
    i0 = np.ceil((lo - origin) / delta - 0.5).astype(np.int64)
    i1 = np.floor((hi - origin) / delta - 0.5).astype(np.int64)
    valid = np.flatnonzero(np.all(i1 >= i0, axis=1))
    if valid.size == 0:
        return 0.0
    stride_base = i1[valid].max(axis=0) + 2
    strides = np.ones(m, np.int64)
    for a in range(m - 2, -1, -1):
        strides[a] = strides[a + 1] * stride_base[a + 1]
    base_key = (i0 * strides).sum(axis=1)
    spans = (i1 - i0 + 1)[valid]
    uniq, inverse = np.unique(spans, axis=0, return_inverse=True)
    keys_parts = []
    cells_parts = []
    for u_id, span in enumerate(uniq):
        rows = valid[inverse == u_id]
        axes = [np.arange(s) for s in span]
        mesh = np.meshgrid(*axes, indexing="ij")
        offs = sum(mesh[a].ravel() * strides[a] for a in range(m))
        offs = np.atleast_1d(offs)
        keys_parts.append((base_key[rows][:, None] + offs[None, :]).ravel())
        cells_parts.append(np.repeat(rows, len(offs)))
    keys = np.concatenate(keys_parts)
    cells = np.concatenate(cells_parts)
    order = np.argsort(keys, kind="stable")
    keys = keys[order]
    cells = cells[order]
    bounds = np.flatnonzero(np.r_[True, keys[1:] != keys[:-1], True])
    total = 0
    for gi in range(len(bounds) - 1):
        group = cells[bounds[gi]:bounds[gi + 1]]
        if len(group) == 1:
            total += 1
            continue
        idx = base_idx[group]
        # cells within one 2x2.. index block are mutually adjacent: one sheet
        if int(np.max(idx.max(axis=0) - idx.min(axis=0))) <= 1:
            total += 1
        else:
            total += _cluster_count(idx)
    return float(total) * delta ** k


def area_formula_check(g: SampledMap, target_resolution: float | None = None,
                       jacobian: Callable | None = None,
                       radius: float | None = None,
                       tol: float = DEFAULT_RANK_TOL,
                       max_unresolved: float = 0.01) -> AreaCheck:
    """Compare the Jacobian integral with the multiplicity-weighted image measure.

    lhs integrates sqrt(det(D^T D)) over the domain cells (midpoint rule,
    using the analytic ``jacobian`` callable when given, fitted jets
    otherwise); rhs rasterizes the image at ``target_resolution`` counting
    each target cell once per preimage sheet.
    """
    k = g.k
    base_idx, corner_rows = _domain_cells(g)
    if len(base_idx) == 0:
        raise ContractViolationError("no complete grid cells in the domain")
    centers = (base_idx + 0.5) * g.h
    unresolved_fraction = 0.0
    if jacobian is not None:
        mats = np.asarray(jacobian(centers), float)
        sigma = np.linalg.svd(mats, compute_uv=False)
        jac_abs = np.prod(sigma[:, :k], axis=1)
    else:
        if radius is None:
            radius = 3 * g.h
        strat = stratify_critical(g, radius, tol)
        point_jac = np.full(len(g.indices), np.nan)
        for row in range(len(g.indices)):
            if strat.ranks[row] < 0:
                continue
            try:
                jet = approx_jet(g, row, radius, tol)
            except InsufficientDensityError:
                continue
            point_jac[row] = float(np.prod(jet.singular_values[:k]))
        unresolved_fraction = float(np.isnan(point_jac).mean())
        if unresolved_fraction > max_unresolved:
            raise UnreliableCheckError(
                f"{unresolved_fraction:.1%} of domain points have no "
                f"resolved jet"
            )
        cell_vals = point_jac[corner_rows]
        with np.errstate(invalid="ignore"):
            jac_abs = np.nanmean(cell_vals, axis=1)
        jac_abs = np.where(np.isnan(jac_abs), 0.0, jac_abs)
    lhs = float(np.sum(jac_abs) * g.h ** k)
    corner_images = g.values[corner_rows]
    delta = g.h if target_resolution is None else float(target_resolution)
    if delta <= 0:
        raise ContractViolationError("target resolution must be positive")
    rhs = _rasterized_image_measure(corner_images, base_idx, k, delta)
    gap = abs(lhs - rhs) / max(lhs, 1e-12)
    return AreaCheck(lhs, rhs, gap, unresolved_fraction)


@dataclass(frozen=True)
class Straightening:
    """Coordinate change making the first j map components the identity.

    ``forward`` sends a centered domain displacement u to
    (g_{1..j}(x0+u) - g_{1..j}(x0), u_{j+1..k}) after the stored coordinate
    permutations; ``inverse`` is its Newton inverse, valid on the ball of
    radius ``epsilon`` about 0.
    """

    x0: np.ndarray
    j: int
    domain_perm: tuple
    range_perm: tuple
    epsilon: float
    residual: float
    forward: Callable
    inverse: Callable
    g_centered: Callable


def _newton_invert(hf, hjac, w, tol, max_iter=60):
    u = np.linalg.solve(hjac(np.zeros_like(w)), w)
    res = hf(u) - w
    norm = np.linalg.norm(res)
    for _ in range(max_iter):
        if norm <= tol:
            return u
        step = np.linalg.solve(hjac(u), res)
        lam = 1.0
        while lam > 1e-6:
            cand = u - lam * step
            cres = hf(cand) - w
            cnorm = np.linalg.norm(cres)
            if cnorm < norm:
                u, res, norm = cand, cres, cnorm
                break
            lam *= 0.5
        else:
            return None
    return u if norm <= tol else None


def straightening_map(g: Callable, jac: Callable, x0, j: int,
                      domain_perm=None, range_perm=None,
                      newton_tol: float = 1e-12,
                      eps_init: float = 1.0, eps_min: float = 1e-6,
                      test_points: int = 25, seed: int = 0) -> Straightening:
    """Build the partial coordinate change H and its local Newton inverse.

    The leading j x j minor of the Jacobian at ``x0`` (after the supplied
    permutations) must be nonsingular; the usable radius ``epsilon`` is the
    largest one, found by bisection, at which Newton inversion succeeds at
    ``test_points`` sample targets.
    """
    x0 = np.asarray(x0, float)
    k = x0.size
    if not 1 <= j <= k - 1:
        raise ContractViolationError("need 1 <= j <= k-1")
    dgx0 = np.atleast_2d(np.asarray(jac(x0), float))
    n_out = dgx0.shape[0]
    domain_perm = tuple(range(k)) if domain_perm is None else tuple(domain_perm)
    range_perm = tuple(range(n_out)) if range_perm is None else tuple(range_perm)
    minor = dgx0[np.ix_(range_perm[:j], domain_perm[:j])]
    sigma = np.linalg.svd(minor, compute_uv=False)
    if sigma[-1] <= 1e-10 * max(1.0, sigma[0]):
        raise NeedsPermutationError(
            "leading minor is singular at the base point"
        )
    dperm = np.asarray(domain_perm, int)
    rperm = np.asarray(range_perm, int)

    def to_domain(u):
        dx = np.zeros(k)
        dx[dperm] = u
        return x0 + dx

    g0 = np.asarray(g(x0), float)[rperm]

    def g_centered(u):
        return np.asarray(g(to_domain(u)), float)[rperm] - g0

    def forward(u):
        out = np.empty(k)
        out[:j] = g_centered(u)[:j]
        out[j:] = u[j:]
        return out

    def forward_jac(u):
        full = np.atleast_2d(np.asarray(jac(to_domain(u)), float))
        dh = np.zeros((k, k))
        dh[:j, :] = full[np.ix_(rperm[:j], dperm)]
        dh[j:, j:] = np.eye(k - j)
        return dh

    def inverse(w, tol=newton_tol):
        w = np.asarray(w, float)
        u = _newton_invert(forward, forward_jac, w,
                           tol * max(1.0, float(np.linalg.norm(w))))
        if u is None:
            raise StraighteningFailureError(
                f"Newton inversion diverged at |w|={np.linalg.norm(w):.3g}"
            )
        return u

    rng = np.random.default_rng(seed)
    dirs = rng.normal(size=(test_points, k))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    radii_frac = np.linspace(0.2, 1.0, test_points)

    def works(eps):
        for d, rf in zip(dirs, radii_frac):
            w = eps * rf * d
            if _newton_invert(forward, forward_jac, w,
                              newton_tol * max(1.0, eps)) is None:
                return False
        return True

    eps = eps_init
    while not works(eps):
        eps *= 0.5
        if eps < eps_min:
            raise StraighteningFailureError(
                f"no workable radius above eps_min={eps_min}"
            )
    lo_eps, hi_eps = eps, 2.0 * eps
    if eps < eps_init:
        for _ in range(8):
            mid = 0.5 * (lo_eps + hi_eps)
            if works(mid):
                lo_eps = mid
            else:
                hi_eps = mid
        eps = lo_eps
    residual = 0.0
    for d, rf in zip(dirs, radii_frac):
        w = eps * rf * d
        u = inverse(w)
        residual = max(residual, float(np.max(np.abs(g_centered(u)[:j] - w[:j]))))
    return Straightening(x0, j, domain_perm, range_perm, eps, residual,
                         forward, inverse, g_centered)


def find_straightening(g, jac, x0, j, **kwargs) -> Straightening:
    """Try coordinate permutations until a nonsingular leading minor is found."""
    from itertools import combinations

    x0 = np.asarray(x0, float)
    k = x0.size
    dgx0 = np.atleast_2d(np.asarray(jac(x0), float))
    n_out = dgx0.shape[0]
    last_error = None
    for rsel in combinations(range(n_out), j):
        for dsel in combinations(range(k), j):
            range_perm = list(rsel) + [i for i in range(n_out) if i not in rsel]
            domain_perm = list(dsel) + [i for i in range(k) if i not in dsel]
            try:
                return straightening_map(g, jac, x0, j,
                                         domain_perm, range_perm, **kwargs)
            except NeedsPermutationError as err:
                last_error = err
    raise NeedsPermutationError(
        f"no nonsingular {j}x{j} minor at the base point"
    ) from last_error


@dataclass(frozen=True)
class CriticalCover:
    """m^j balls covering the image of the rank-j stratum of a cube."""

    cover: Cover
    c_constant: float
    d: float
    m: int
    j: int
    per_box_radius: np.ndarray
    verified: bool
    failures: np.ndarray  # (F, k) grid indices escaping their box's ball

    def dump_failures_csv(self, path) -> None:
        """Offending grid points, for debugging a failed containment check."""
        import csv as _csv

        with open(path, "w", newline="") as fh:
            writer = _csv.writer(fh)
            writer.writerow([f"i{a}" for a in range(self.failures.shape[1])])
            writer.writerows(self.failures.tolist())


def critical_cover(f: SampledMap, strat: Stratification, j: int, m: int) -> CriticalCover:
    """Constructive ball cover of f(K_j) on a cube domain.

    Splits the first j coordinates into m^j boxes, picks in each box the
    fiber least polluted by non-K_j points, and centers one target ball per
    box on the image of that fiber.  The single reported radius is
    ``c * L * d / m`` with ``c`` fitted as the smallest workable constant;
    containment is then re-verified exhaustively over the grid.
    """
    if m < 1:
        raise ContractViolationError("m must be a positive integer")
    if not 0 <= j < f.k:
        raise ContractViolationError("need 0 <= j < k")
    indices = f.indices
    lo = indices.min(axis=0)
    hi = indices.max(axis=0)
    extent = hi - lo
    if int(np.prod(extent + 1)) != len(indices):
        raise ContractViolationError("domain must be a full box grid")
    if np.any(extent != extent[0]):
        raise ContractViolationError("domain must be a cube")
    d = float(extent[0]) * f.h
    kj_mask = strat.ranks == j
    out_fraction = 1.0 - float(kj_mask.mean())
    if out_fraction >= m ** (-f.k):
        raise CubeTooCoarseError(
            f"density failure: {out_fraction:.2%} of the cube lies outside "
            f"K_{j} (needs < {m ** (-f.k):.2%})"
        )
    n_fiber_pos = int(extent[0]) + 1
    rel = indices - lo

    if j == 0:
        boxes = {(): np.arange(len(indices))}
    else:
        box_of = np.minimum((rel[:, :j] * m) // n_fiber_pos, m - 1)
        boxes = {}
        for row, key in enumerate(map(tuple, box_of.tolist())):
            boxes.setdefault(key, []).append(row)
        boxes = {key: np.asarray(rows, int) for key, rows in boxes.items()}

    centers = []
    radii = []
    box_keys = sorted(boxes.keys())
    for key in box_keys:
        rows = boxes[key]
        if j == 0:
            fiber_rows = rows
        else:
            prefixes = {}
            for r in rows:
                prefixes.setdefault(tuple(rel[r, :j]), []).append(r)
            best_prefix = min(
                prefixes,
                key=lambda p: (int(np.sum(~kj_mask[prefixes[p]])), p),
            )
            fiber_rows = np.asarray(prefixes[best_prefix], int)
        in_kj = fiber_rows[kj_mask[fiber_rows]]
        pool = in_kj if in_kj.size else fiber_rows
        order = np.lexsort(rel[pool, j:].T[::-1]) if f.k > j else np.arange(len(pool))
        rep = pool[order[len(order) // 2]]
        center = f.values[rep]
        box_kj = rows[kj_mask[rows]]
        radius = float(f.target.dist_many(f.values[box_kj], center).max()) if box_kj.size else 0.0
        centers.append(center)
        radii.append(radius)
    per_box = np.asarray(radii)
    r_star = float(per_box.max())
    ld = f.lipschitz * d
    c_constant = r_star * m / ld if ld > 0 else 0.0
    if r_star <= 0.0:
        r_star = 1e-12 * max(d, 1.0)
    cover = Cover(np.asarray(centers), np.full(len(centers), r_star), float(f.k))

    verified = True
    failures = []
    for key, center in zip(box_keys, centers):
        rows = boxes[key]
        box_kj = rows[kj_mask[rows]]
        if not box_kj.size:
            continue
        dist = f.target.dist_many(f.values[box_kj], center)
        escaped = box_kj[dist > r_star * (1 + 1e-12)]
        if escaped.size:
            verified = False
            failures.extend(indices[escaped].tolist())
    failures = (np.asarray(failures, np.int64) if failures
                else np.zeros((0, f.k), np.int64))
    return CriticalCover(cover, c_constant, d, m, j, per_box, verified, failures)
