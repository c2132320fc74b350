"""Control metrics from user-supplied vector fields.

A :class:`VectorFieldSystem` bundles m locally Lipschitz fields on a box in
R^n that are independent and uniformly nonvanishing on the box (checked on a
dense sample at construction).  Distances are estimated from above by
optimizing piecewise-constant controls of the horizontal flow; only upper
bounds are certified.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy.optimize import minimize

from .errors import (
    ContractViolationError,
    DegenerateFieldsError,
    NoPathFoundError,
    NotHorizontalError,
)
from .metric_core import MetricOracle

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

__all__ = [
    "Box",
    "VectorFieldSystem",
    "HorizontalPathG",
    "BldReport",
    "QuasiconvexityReport",
    "euclidean_system",
    "heisenberg_frame_system",
    "grushin_system",
    "system_from_toml",
    "horizontal_norm",
    "integrate_path",
    "horizontal_length",
    "length_comparison_constant",
    "cc_distance_general",
    "weak_bld_estimate",
    "quasiconvexity_probe",
    "polyline_optimizer",
]


@dataclass(frozen=True)
class Box:
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lo, float)
        hi = np.asarray(self.hi, float)
        if lo.shape != hi.shape or np.any(hi <= lo):
            raise ContractViolationError("box needs lo < hi componentwise")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def n(self) -> int:
        return self.lo.size

    @property
    def diameter(self) -> float:
        return float(np.linalg.norm(self.hi - self.lo))

    def grid(self, per_axis: int = 9) -> np.ndarray:
        axes = [np.linspace(a, b, per_axis) for a, b in zip(self.lo, self.hi)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def contains(self, points, tol: float = 1e-9) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, float))
        return np.all((points >= self.lo - tol) & (points <= self.hi + tol), axis=1)


class SystemCheck(NamedTuple):
    min_field_norm: float
    min_singular_value: float
    sample_size: int


@dataclass(frozen=True)
class VectorFieldSystem:
    """m independent, nonvanishing fields on a box in R^n.

    ``frame(p)`` returns the n x m matrix whose columns are the fields at p
    (batched over leading axes); ``frame_jac`` its derivative tensor with
    entries ``d frame[i, a] / d p[r]`` (finite differences when omitted).
    """

    name: str
    n: int
    m: int
    frame: Callable
    domain: Box
    frame_jac: Callable | None = None
    field_lipschitz: float = 1.0
    check: SystemCheck = field(init=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "check", self._validate())

    def _validate(self, per_axis: int = 9) -> SystemCheck:
        per_axis = max(3, min(per_axis, int(round(4000 ** (1 / self.n)))))
        sample = self.domain.grid(per_axis)
        frames = np.asarray(self.frame(sample), float)
        norms = np.linalg.norm(frames, axis=1)        # (P, m)
        min_norm = float(norms.min())
        svals = np.linalg.svd(frames, compute_uv=False)
        min_sv = float(svals[:, -1].min())
        if min_norm <= 1e-9 or min_sv <= 1e-9:
            raise DegenerateFieldsError(
                f"system {self.name!r}: fields vanish or become dependent on "
                f"the box (min |X_i| = {min_norm:.2e}, min sv = {min_sv:.2e})"
            )
        return SystemCheck(min_norm, min_sv, len(sample))

    def frame_jacobian(self, points) -> np.ndarray:
        points = np.asarray(points, float)
        if self.frame_jac is not None:
            return np.asarray(self.frame_jac(points), float)
        # central finite differences, adequate for Lipschitz coefficients
        step = 1e-6 * max(1.0, float(np.max(np.abs(points))))
        single = points.ndim == 1
        pts = np.atleast_2d(points)
        out = np.zeros((len(pts), self.n, self.m, self.n))
        for r in range(self.n):
            d = np.zeros(self.n)
            d[r] = step
            out[..., r] = (np.asarray(self.frame(pts + d), float)
                           - np.asarray(self.frame(pts - d), float)) / (2 * step)
        return out[0] if single else out


def euclidean_system(n: int, box: Box | None = None) -> VectorFieldSystem:
    if box is None:
        box = Box(np.zeros(n), np.ones(n))
    eye = np.eye(n)

    def frame(p):
        p = np.asarray(p, float)
        return np.broadcast_to(eye, p.shape[:-1] + (n, n)).copy()

    def frame_jac(p):
        p = np.asarray(p, float)
        return np.zeros(p.shape[:-1] + (n, n, n))

    return VectorFieldSystem("euclidean", n, n, frame, box, frame_jac, 0.0)


def heisenberg_frame_system(n: int = 1, box: Box | None = None) -> VectorFieldSystem:
    """Left-invariant horizontal frame on R^(2n+1) matching the group law."""
    dim = 2 * n + 1
    if box is None:
        box = Box(-np.ones(dim), np.ones(dim))

    def frame(p):
        p = np.asarray(p, float)
        shape = p.shape[:-1]
        out = np.zeros(shape + (dim, 2 * n))
        for j in range(n):
            out[..., j, j] = 1.0
            out[..., 2 * n, j] = 2.0 * p[..., n + j]
            out[..., n + j, n + j] = 1.0
            out[..., 2 * n, n + j] = -2.0 * p[..., j]
        return out

    def frame_jac(p):
        p = np.asarray(p, float)
        shape = p.shape[:-1]
        out = np.zeros(shape + (dim, 2 * n, dim))
        for j in range(n):
            out[..., 2 * n, j, n + j] = 2.0
            out[..., 2 * n, n + j, j] = -2.0
        return out

    return VectorFieldSystem("heisenberg", dim, 2 * n, frame, box, frame_jac, 2.0)


def grushin_system(box: Box) -> VectorFieldSystem:
    """X1 = d/dx, X2 = x d/dy; degenerate on any box crossing x = 0."""

    def frame(p):
        p = np.asarray(p, float)
        shape = p.shape[:-1]
        out = np.zeros(shape + (2, 2))
        out[..., 0, 0] = 1.0
        out[..., 1, 1] = p[..., 0]
        return out

    def frame_jac(p):
        p = np.asarray(p, float)
        out = np.zeros(p.shape[:-1] + (2, 2, 2))
        out[..., 1, 1, 0] = 1.0
        return out

    return VectorFieldSystem("grushin", 2, 2, frame, box, frame_jac, 1.0)


_BUILTIN_SYSTEMS = {
    "euclidean": lambda box, opts: euclidean_system(box.n, box),
    "heisenberg": lambda box, opts: heisenberg_frame_system(
        int(opts.get("n", (box.n - 1) // 2)), box),
    "grushin": lambda box, opts: grushin_system(box),
}


def system_from_toml(text: str) -> VectorFieldSystem:
    """Build a named builtin system from a TOML block.

    Expected shape::

        [system]
        name = "grushin"
        box_lo = [0.5, -1.0]
        box_hi = [2.0, 1.0]
    """
    doc = tomllib.loads(text)
    try:
        block = doc["system"]
        name = block["name"]
        box = Box(np.asarray(block["box_lo"], float),
                  np.asarray(block["box_hi"], float))
    except KeyError as err:
        raise ContractViolationError(f"missing TOML key: {err}") from err
    if name not in _BUILTIN_SYSTEMS:
        raise ContractViolationError(
            f"unknown system {name!r}; builtins: {sorted(_BUILTIN_SYSTEMS)}"
        )
    return _BUILTIN_SYSTEMS[name](box, block)


def horizontal_norm(system: VectorFieldSystem, p, v, tol: float = 1e-9) -> float:
    """l2 norm of the coefficients expressing v in the frame at p."""
    a_mat = np.asarray(system.frame(np.asarray(p, float)), float)
    v = np.asarray(v, float)
    coeff, _, _, _ = np.linalg.lstsq(a_mat, v, rcond=None)
    residual = float(np.linalg.norm(a_mat @ coeff - v))
    if residual > tol * max(1.0, float(np.linalg.norm(v))):
        raise NotHorizontalError(
            f"vector misses the horizontal span by {residual:.2e}"
        )
    return float(np.linalg.norm(coeff))


@dataclass(frozen=True)
class HorizontalPathG:
    """Controls plus midpoint-integrated positions for a field system."""

    times: np.ndarray       # (M+1,)
    controls: np.ndarray    # (M, m)
    start: np.ndarray       # (n,)
    positions: np.ndarray   # (M+1, n)

    @property
    def horizontal_length(self) -> float:
        dt = np.diff(self.times)
        return float(np.sum(np.linalg.norm(self.controls, axis=1) * dt))


def integrate_path(system: VectorFieldSystem, controls, times=None,
                   start=None) -> HorizontalPathG:
    """Explicit-midpoint integration of the control system."""
    controls = np.atleast_2d(np.asarray(controls, float))
    m_steps = len(controls)
    if times is None:
        times = np.linspace(0.0, 1.0, m_steps + 1)
    times = np.asarray(times, float)
    dts = np.diff(times)
    if np.any(dts <= 0):
        raise ContractViolationError("time grid must be strictly increasing")
    if start is None:
        start = 0.5 * (system.domain.lo + system.domain.hi)
    pos = np.empty((m_steps + 1, system.n))
    pos[0] = np.asarray(start, float)
    for i, dt in enumerate(dts):
        vel0 = system.frame(pos[i]) @ controls[i]
        mid = pos[i] + 0.5 * dt * vel0
        pos[i + 1] = pos[i] + dt * (system.frame(mid) @ controls[i])
    return HorizontalPathG(times, controls, np.asarray(start, float), pos)


def horizontal_length(system: VectorFieldSystem, path: HorizontalPathG) -> float:
    if path.controls.shape[1] != system.m:
        raise ContractViolationError("control width does not match the system")
    return path.horizontal_length


def length_comparison_constant(system: VectorFieldSystem,
                               per_axis: int = 9) -> float:
    """Constant C with len/C <= horizontal length <= C len on the box."""
    sample = system.domain.grid(max(3, min(per_axis, int(round(4000 ** (1 / system.n))))))
    frames = np.asarray(system.frame(sample), float)
    svals = np.linalg.svd(frames, compute_uv=False)
    smax = float(svals[:, 0].max())
    smin = float(svals[:, -1].min())
    return max(smax, 1.0 / smin)


def _forward_scan(system, controls, start, dt):
    b, m_steps, _ = controls.shape
    pos = np.empty((b, m_steps + 1, system.n))
    mids = np.empty((b, m_steps, system.n))
    pos[:, 0] = start
    for i in range(m_steps):
        a0 = system.frame(pos[:, i])
        vel0 = np.einsum("bnm,bm->bn", a0, controls[:, i])
        mids[:, i] = pos[:, i] + 0.5 * dt * vel0
        am = system.frame(mids[:, i])
        pos[:, i + 1] = pos[:, i] + dt * np.einsum("bnm,bm->bn", am, controls[:, i])
    return pos, mids


def _cc_objective(v, system, b, m_steps, dt, start, targets, lam, mu, eps,
                  box_weight):
    c = v.reshape(b, m_steps, system.m)
    pos, mids = _forward_scan(system, c, start, dt)
    end = pos[:, -1]
    speed = np.sqrt(np.sum(c ** 2, axis=2) + eps * eps)
    lengths = np.sum(speed, axis=1) * dt
    con = end - targets
    lo, hi = system.domain.lo, system.domain.hi
    over = np.maximum(pos - hi, 0.0)
    under = np.maximum(lo - pos, 0.0)
    box_pen = box_weight * np.sum(over ** 2 + under ** 2, axis=(1, 2))
    value = float(np.sum(lengths + np.sum(lam * con, axis=1)
                         + 0.5 * mu * np.sum(con ** 2, axis=1) + box_pen))
    grad_c = (c / speed[..., None]) * dt
    pos_grad = 2.0 * box_weight * (over - under)      # d box_pen / d pos
    adj = lam + mu * con + pos_grad[:, -1]
    for i in range(m_steps - 1, -1, -1):
        a0 = system.frame(pos[:, i])
        am = system.frame(mids[:, i])
        t0 = system.frame_jacobian(pos[:, i])
        tm = system.frame_jacobian(mids[:, i])
        g0 = np.einsum("bimr,bm->bir", t0, c[:, i])
        gm = np.einsum("bimr,bm->bir", tm, c[:, i])
        gm_t_adj = np.einsum("bir,bi->br", gm, adj)
        grad_c[:, i] += dt * (np.einsum("bnm,bn->bm", am, adj)
                              + 0.5 * dt * np.einsum("bnm,bn->bm", a0, gm_t_adj))
        adj = (adj + dt * gm_t_adj
               + 0.5 * dt * dt * np.einsum("bir,bi->br", g0, gm_t_adj))
        adj = adj + pos_grad[:, i]
    return value, grad_c.ravel()


class CcResultG(NamedTuple):
    upper: float
    path: HorizontalPathG
    miss: float
    diagnostics: dict


def cc_distance_general(system: VectorFieldSystem, p, q, segments: int = 24,
                        restarts: int = 4, seed: int = 0,
                        miss_tol: float | None = None,
                        rounds: int = 10, maxiter: int = 250) -> CcResultG:
    """Best horizontal-length upper bound over optimized control sequences.

    Multiple seeded restarts; the reported best length is non-increasing in
    the restart index.  Positions are softly confined to the domain box.
    Raises NoPathFoundError when no restart drives the endpoint residual
    below tolerance.
    """
    p = np.asarray(p, float)
    q = np.asarray(q, float)
    if miss_tol is None:
        miss_tol = 1e-6 * system.domain.diameter
    gap = float(np.linalg.norm(q - p))
    if gap == 0.0:
        path = integrate_path(system, np.zeros((segments, system.m)), start=p)
        return CcResultG(0.0, path, 0.0, {"restarts": [], "scale": 0.0})
    rng = np.random.default_rng(seed)
    dt = 1.0 / segments
    start = np.broadcast_to(p, (1, system.n)).copy()
    targets = q[None, :]
    best = None
    history = []
    base = horizontal_norm(system, 0.5 * (p + q), q - p) if _in_span(system, p, q) else gap
    for r in range(restarts):
        scale = base * (1.0 if r == 0 else rng.uniform(0.5, 2.0))
        c = rng.normal(size=(1, segments, system.m)) * 0.3 * scale
        if r == 0:
            c += _straight_controls(system, p, q, segments)[None]
        v = c.ravel()
        lam = np.zeros((1, system.n))
        mu = 10.0 / max(gap, 1e-9)
        for it in range(rounds):
            eps = max(1e-9, 1e-2 * base * 0.3 ** it)
            res = minimize(_cc_objective, v,
                           args=(system, 1, segments, dt, start, targets, lam,
                                 mu, eps, 10.0),
                           jac=True, method="L-BFGS-B",
                           options={"maxiter": maxiter, "ftol": 1e-15,
                                    "gtol": 1e-13})
            v = res.x
            pos, _ = _forward_scan(system, v.reshape(1, segments, system.m),
                                   start, dt)
            con = pos[:, -1] - targets
            miss = float(np.linalg.norm(con))
            if miss < 0.1 * miss_tol:
                break
            lam = lam + mu * con
            mu = min(mu * 5.0, 1e12)
        controls = v.reshape(segments, system.m)
        length = float(np.sum(np.linalg.norm(controls, axis=1)) * dt)
        history.append({"restart": r, "length": length, "miss": miss})
        if miss <= miss_tol and (best is None or length < best[0]):
            best = (length, controls, miss)
    if best is None:
        worst = min(h["miss"] for h in history)
        raise NoPathFoundError(
            f"endpoint residual {worst:.2e} above tolerance {miss_tol:.2e}",
            best_miss=worst,
        )
    length, controls, miss = best
    path = integrate_path(system, controls, start=p)
    return CcResultG(length, path, miss, {"restarts": history})


def _in_span(system, p, q) -> bool:
    try:
        horizontal_norm(system, 0.5 * (p + q), q - p)
        return True
    except NotHorizontalError:
        return False


def _straight_controls(system, p, q, segments) -> np.ndarray:
    """Controls whose flow roughly follows the straight segment p -> q."""
    c = np.zeros((segments, system.m))
    direction = (q - p)
    for i in range(segments):
        t = (i + 0.5) / segments
        point = p + t * direction
        a_mat = np.asarray(system.frame(point), float)
        coeff, _, _, _ = np.linalg.lstsq(a_mat, direction, rcond=None)
        c[i] = coeff
    return c


def cc_metric(system: VectorFieldSystem, segments: int = 24, restarts: int = 3,
              seed: int = 0) -> MetricOracle:
    """Point-pair oracle backed by the control optimizer (upper bounds)."""

    def kernel(p, q):
        p = np.asarray(p, float)
        q = np.asarray(q, float)
        if p.ndim == 1 and q.ndim == 1:
            return cc_distance_general(system, p, q, segments, restarts, seed).upper
        p2 = np.atleast_2d(p)
        q2 = np.atleast_2d(q)
        p2, q2 = np.broadcast_arrays(p2, q2)
        out = np.array([
            cc_distance_general(system, a, b, segments, restarts, seed).upper
            for a, b in zip(p2, q2)
        ])
        return out

    return MetricOracle("cc", kernel)


@dataclass(frozen=True)
class BldReport:
    """Length-distortion ratios of a map along a sample of horizontal curves."""

    curve_count: int
    ratios: np.ndarray
    ratio_min: float
    ratio_max: float
    implied_two_sided: float      # smallest C with 1/C <= ratio <= C
    implied_lower: float          # smallest C with len <= C * len(image)
    verdict: str                  # PASS / FAIL / INFO
    skipped: int = 0


def weak_bld_estimate(phi: Callable, curves: Sequence[HorizontalPathG],
                      bound: float | None = None) -> BldReport:
    """Chord-sum image lengths against horizontal lengths, per curve.

    ``phi`` maps position arrays (P, n) to (P, N).  Curves of zero length
    are skipped with a warning.  With ``bound`` C given the verdict is PASS
    iff every ratio lies in [1/C, C].
    """
    ratios = []
    skipped = 0
    for curve in curves:
        lx = curve.horizontal_length
        if lx <= 0.0:
            warnings.warn("skipping zero-length curve in distortion estimate")
            skipped += 1
            continue
        img = np.asarray(phi(curve.positions), float)
        ly = float(np.sum(np.linalg.norm(np.diff(img, axis=0), axis=1)))
        ratios.append(ly / lx)
    if not ratios:
        raise ContractViolationError("no curves of positive length supplied")
    ratios = np.asarray(ratios)
    rmin = float(ratios.min())
    rmax = float(ratios.max())
    implied = max(rmax, 1.0 / rmin) if rmin > 0 else np.inf
    implied_lower = (1.0 / rmin) if rmin > 0 else np.inf
    if bound is None:
        verdict = "INFO"
    else:
        verdict = "PASS" if (rmin >= 1.0 / bound and rmax <= bound) else "FAIL"
    return BldReport(len(ratios), ratios, rmin, rmax, implied, implied_lower,
                     verdict, skipped)


@dataclass(frozen=True)
class QuasiconvexityReport:
    pairs: np.ndarray            # (P, 2) sample indices
    distances: np.ndarray
    lengths: np.ndarray          # nan where the optimizer failed
    m_constant: float
    failed_pairs: np.ndarray


def quasiconvexity_probe(oracle: MetricOracle, points, pair_budget: int,
                         path_optimizer: Callable, seed: int = 0) -> QuasiconvexityReport:
    """Best found curve length against oracle distance over sampled pairs.

    ``path_optimizer(x, y)`` returns ``(length, ok)``.  The reported constant
    is the maximum length/distance ratio over successful pairs.
    """
    if pair_budget < 10:
        raise ContractViolationError("pair budget must be at least 10")
    points = np.atleast_2d(np.asarray(points, float))
    if len(points) * (len(points) - 1) < pair_budget:
        raise ContractViolationError("not enough distinct pairs in the sample")
    rng = np.random.default_rng(seed)
    pairs = []
    seen = set()
    while len(pairs) < pair_budget:
        i, j = rng.integers(0, len(points), 2)
        if i == j or (i, j) in seen:
            continue
        seen.add((i, j))
        pairs.append((i, j))
    pairs = np.asarray(pairs)
    dists = np.empty(len(pairs))
    lengths = np.full(len(pairs), np.nan)
    failed = []
    for row, (i, j) in enumerate(pairs):
        dists[row] = oracle.dist(points[i], points[j])
        length, ok = path_optimizer(points[i], points[j])
        if ok:
            lengths[row] = length
        else:
            failed.append(row)
    good = ~np.isnan(lengths) & (dists > 0)
    m_const = float(np.max(lengths[good] / dists[good])) if good.any() else np.inf
    return QuasiconvexityReport(pairs, dists, lengths, m_const,
                                np.asarray(failed, int))


def polyline_optimizer(box: Box | None = None, obstacle=None,
                       waypoints: int = 16, restarts: int = 2, seed: int = 0,
                       rounds: int = 5, maxiter: int = 300) -> Callable:
    """Shortest-polyline optimizer with box and spherical-obstacle penalties.

    ``obstacle`` is an optional ``(center, radius)`` pair the path must
    avoid.  Returns a callable ``(x, y) -> (length, ok)``.
    """
    if obstacle is not None:
        obs_c = np.asarray(obstacle[0], float)
        obs_r = float(obstacle[1])

    def optimize(x, y):
        x = np.asarray(x, float)
        y = np.asarray(y, float)
        n = x.size
        rng = np.random.default_rng(seed)
        ts = np.linspace(0.0, 1.0, waypoints + 2)[1:-1, None]
        best = np.inf
        for r in range(restarts):
            inner = x[None, :] + ts * (y - x)[None, :]
            if r > 0:
                inner = inner + rng.normal(size=inner.shape) * 0.1 * np.linalg.norm(y - x)
            v = inner.ravel()
            weight = 1e2
            for _ in range(rounds):
                res = minimize(_polyline_objective, v,
                               args=(x, y, n, waypoints, box,
                                     (obs_c, obs_r) if obstacle is not None else None,
                                     weight),
                               jac=True, method="L-BFGS-B",
                               options={"maxiter": maxiter, "ftol": 1e-14})
                v = res.x
                weight *= 10.0
            pts = np.vstack([x, v.reshape(waypoints, n), y])
            feasible = True
            if box is not None:
                feasible &= bool(box.contains(pts, tol=1e-6).all())
            if obstacle is not None:
                feasible &= bool(np.all(np.linalg.norm(pts - obs_c, axis=1) >= obs_r - 1e-6))
            if feasible:
                length = float(np.sum(np.linalg.norm(np.diff(pts, axis=0), axis=1)))
                best = min(best, length)
        return (best, True) if np.isfinite(best) else (np.inf, False)

    return optimize


def _polyline_objective(v, x, y, n, waypoints, box, obstacle, penalty_weight):
    pts = np.vstack([x, v.reshape(waypoints, n), y])
    diffs = np.diff(pts, axis=0)
    eps = 1e-9
    seg = np.sqrt(np.sum(diffs ** 2, axis=1) + eps * eps)
    value = float(np.sum(seg))
    grad_pts = np.zeros_like(pts)
    unit = diffs / seg[:, None]
    grad_pts[:-1] -= unit
    grad_pts[1:] += unit
    if box is not None:
        over = np.maximum(pts - box.hi, 0.0)
        under = np.maximum(box.lo - pts, 0.0)
        value += penalty_weight * float(np.sum(over ** 2 + under ** 2))
        grad_pts += penalty_weight * 2.0 * (over - under)
    if obstacle is not None:
        c, r = obstacle
        rel = pts - c
        dist = np.linalg.norm(rel, axis=1)
        depth = np.maximum(r - dist, 0.0)
        value += penalty_weight * float(np.sum(depth ** 2))
        mask = depth > 0
        grad_pts[mask] += penalty_weight * (-2.0 * depth[mask, None]
                                            * rel[mask] / np.maximum(dist[mask, None], 1e-12))
    return value, grad_pts[1:-1].ravel()
