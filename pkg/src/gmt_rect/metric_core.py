"""Metric-space primitives: oracles, sampled maps, landmark projections,
sup-norm embeddings and the infimal-convolution Lipschitz extension.

Points are plain numpy arrays.  A :class:`MetricOracle` wraps a broadcasting
distance kernel together with a tag naming the point representation, so that
the same sampled-map machinery runs over Euclidean targets, truncated
sup-norm targets, Heisenberg coordinates or general control-metric spaces.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import (
    ContractViolationError,
    InconsistentDataError,
    InvalidLandmarkError,
)

__all__ = [
    "MetricOracle",
    "SampledMap",
    "LandmarkSet",
    "euclidean_metric",
    "linf_metric",
    "linf_distance",
    "landmark_projection",
    "kuratowski_embed",
    "kuratowski_defect",
    "mcshane_extend",
    "box_indices",
    "max_triangle_violation",
]


@dataclass(frozen=True)
class MetricOracle:
    """A metric given by a vectorized kernel.

    ``kernel(p, q)`` must accept arrays shaped ``(..., d)`` and broadcast,
    returning nonnegative distances shaped ``(...)``.
    """

    point_kind: str
    kernel: Callable[[np.ndarray, np.ndarray], np.ndarray]

    def dist(self, p, q) -> float:
        return float(self.kernel(np.asarray(p, float), np.asarray(q, float)))

    def dist_many(self, cloud, q) -> np.ndarray:
        """Distances from every row of ``cloud`` to the single point ``q``."""
        cloud = np.asarray(cloud, float)
        return np.asarray(self.kernel(cloud, np.asarray(q, float)[None, :]))

    def dist_aligned(self, a, b) -> np.ndarray:
        """Row-wise distances between two equally shaped point arrays."""
        return np.asarray(self.kernel(np.asarray(a, float), np.asarray(b, float)))


def _euclid_kernel(p, q):
    return np.linalg.norm(p - q, axis=-1)


def _linf_kernel(p, q):
    return np.max(np.abs(p - q), axis=-1)


def euclidean_metric() -> MetricOracle:
    return MetricOracle("euclidean", _euclid_kernel)


def linf_metric() -> MetricOracle:
    """Sup-norm metric on coordinate sequences of any fixed length."""
    return MetricOracle("linf", _linf_kernel)


def linf_distance(u, v) -> float:
    """max_i |u_i - v_i| for two equal-length coordinate sequences."""
    u = np.asarray(u, float)
    v = np.asarray(v, float)
    if u.shape != v.shape or u.ndim != 1:
        raise ContractViolationError(
            f"length mismatch: {u.shape} vs {v.shape}"
        )
    if u.size < 1:
        raise ContractViolationError("sequences must have length >= 1")
    return float(np.max(np.abs(u - v)))


def box_indices(k: int, n_per_axis: int | Sequence[int]) -> np.ndarray:
    """Integer index grid 0..n (inclusive) per axis, shape (P, k)."""
    if np.isscalar(n_per_axis):
        n_per_axis = [int(n_per_axis)] * k
    axes = [np.arange(n + 1) for n in n_per_axis]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1).astype(np.int64)


@dataclass(frozen=True)
class SampledMap:
    """A Lipschitz map known through its values on an h-grid subset of R^k.

    Domain points are stored as integer indices times the spacing ``h`` so
    membership tests and axis-aligned slicing are exact.  The Lipschitz
    estimate is the max distance ratio over grid-adjacent pairs.
    """

    k: int
    h: float
    indices: np.ndarray          # (P, k) int64
    values: np.ndarray           # (P, d) float
    target: MetricOracle
    lipschitz: float = field(init=False, compare=False)
    _lookup: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        indices = np.asarray(self.indices, np.int64)
        values = np.asarray(self.values, float)
        if values.ndim == 1:
            values = values[:, None]
        if indices.ndim != 2 or indices.shape[1] != self.k:
            raise ContractViolationError("indices must have shape (P, k)")
        if len(values) != len(indices):
            raise ContractViolationError("values/domain_points length mismatch")
        if self.h <= 0:
            raise ContractViolationError("grid spacing must be positive")
        lookup = {}
        for row, idx in enumerate(map(tuple, indices.tolist())):
            if idx in lookup:
                raise ContractViolationError(f"duplicate domain point {idx}")
            lookup[idx] = row
        object.__setattr__(self, "indices", indices)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "_lookup", lookup)
        object.__setattr__(self, "lipschitz", self._adjacent_lipschitz())

    def _adjacent_lipschitz(self) -> float:
        best = 0.0
        for axis in range(self.k):
            shifted = self.indices.copy()
            shifted[:, axis] += 1
            rows_b = [self._lookup.get(t, -1) for t in map(tuple, shifted.tolist())]
            rows_b = np.asarray(rows_b)
            mask = rows_b >= 0
            if not mask.any():
                continue
            d = self.target.dist_aligned(self.values[mask], self.values[rows_b[mask]])
            if d.size:
                best = max(best, float(d.max()) / self.h)
        return best

    @property
    def points(self) -> np.ndarray:
        return self.indices * self.h

    @property
    def value_dim(self) -> int:
        return self.values.shape[1]

    def row_of(self, index) -> int:
        return self._lookup[tuple(int(i) for i in index)]

    def has_index(self, index) -> bool:
        return tuple(int(i) for i in index) in self._lookup

    def with_target(self, target: MetricOracle) -> "SampledMap":
        """Same samples reinterpreted under another metric (e.g. a chart)."""
        return SampledMap(self.k, self.h, self.indices, self.values, target)

    @classmethod
    def from_function(cls, fn, k, h, indices, target) -> "SampledMap":
        indices = np.asarray(indices, np.int64)
        values = np.asarray(fn(indices * h), float)
        return cls(k, h, indices, values, target)

    def to_json_dict(self) -> dict:
        return {
            "k": self.k,
            "h": self.h,
            "indices": self.indices.tolist(),
            "values": self.values.tolist(),
            "target": self.target.point_kind,
        }

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh)

    @classmethod
    def from_json_dict(cls, doc: dict) -> "SampledMap":
        target = oracle_for_tag(doc["target"], len(doc["values"][0]))
        return cls(int(doc["k"]), float(doc["h"]),
                   np.asarray(doc["indices"], np.int64),
                   np.asarray(doc["values"], float), target)

    @classmethod
    def load(cls, path) -> "SampledMap":
        with open(path) as fh:
            return cls.from_json_dict(json.load(fh))


def oracle_for_tag(tag: str, value_dim: int) -> MetricOracle:
    """Rebuild the metric oracle named by a serialization tag."""
    if tag == "euclidean":
        return euclidean_metric()
    if tag == "linf":
        return linf_metric()
    if tag == "heisenberg":
        from . import heisenberg

        if value_dim % 2 == 0:
            raise ContractViolationError("heisenberg points need odd width")
        return heisenberg.koranyi_metric((value_dim - 1) // 2)
    raise ContractViolationError(f"cannot rebuild oracle for tag {tag!r}")


@dataclass(frozen=True)
class LandmarkSet:
    """k distinct target points plus a base point."""

    points: np.ndarray        # (k, d)
    base: np.ndarray          # (d,)
    oracle: MetricOracle

    def __post_init__(self):
        points = np.atleast_2d(np.asarray(self.points, float))
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "base", np.asarray(self.base, float))
        for i in range(len(points)):
            for j in range(i + 1, len(points)):
                if self.oracle.dist(points[i], points[j]) <= 0.0:
                    raise InvalidLandmarkError(
                        f"landmarks {i} and {j} coincide"
                    )

    def __len__(self) -> int:
        return len(self.points)


def landmark_projection(f: SampledMap, landmarks: LandmarkSet) -> SampledMap:
    """Replace each value by its vector of distances to the landmarks.

    The result maps into R^k; each coordinate is 1-Lipschitz with respect to
    the target metric, so the grid Lipschitz estimate never exceeds the
    original one.
    """
    if len(landmarks) != f.k:
        raise ContractViolationError(
            f"need exactly k={f.k} landmarks, got {len(landmarks)}"
        )
    cols = [f.target.dist_many(f.values, y) for y in landmarks.points]
    g_values = np.stack(cols, axis=1)
    return SampledMap(f.k, f.h, f.indices, g_values, euclidean_metric())


def kuratowski_embed(f: SampledMap, landmarks, base) -> SampledMap:
    """Map x to (d(f(x), y_i) - d(y_i, y0))_i, a sup-norm valued map.

    With landmarks drawn densely from the image this is an approximate
    isometry; it never expands distances.
    """
    landmarks = np.atleast_2d(np.asarray(landmarks, float))
    if landmarks.size == 0:
        raise ContractViolationError("landmark list must be nonempty")
    base = np.asarray(base, float)
    offsets = f.target.dist_many(landmarks, base)
    cols = [f.target.dist_many(f.values, y) - c for y, c in zip(landmarks, offsets)]
    return SampledMap(f.k, f.h, f.indices, np.stack(cols, axis=1), linf_metric())


def kuratowski_defect(f: SampledMap, landmark_count: int, seed: int = 0) -> float:
    """Worst isometry defect of the embedding with a finite landmark sample.

    Landmarks are drawn (deterministically from the seed) from the image
    sample plus the base point; the defect is the largest gap between an
    oracle distance and the corresponding sup-norm distance over all grid
    pairs.  Nonnegative because the embedding never expands; no decay rate
    in the landmark count is asserted, only observed.
    """
    rng = np.random.default_rng(seed)
    count = min(landmark_count, len(f.values))
    picks = rng.choice(len(f.values), count, replace=False)
    emb = kuratowski_embed(f, f.values[picks], f.values[picks[0]])
    worst = 0.0
    for a in range(len(f.values)):
        d_true = f.target.dist_many(f.values, f.values[a])
        d_emb = np.max(np.abs(emb.values - emb.values[a]), axis=1)
        worst = max(worst, float((d_true - d_emb).max()))
    return worst


def mcshane_extend(points, values, lipschitz: float, x, tol: float = 1e-9):
    """Extend a scalar L-Lipschitz sample by infimal convolution.

    Returns min_y (f(y) + L |x - y|).  The extension agrees with the data on
    the sample set and is L-Lipschitz on all of R^k.  ``x`` may be a single
    point or an array of query points.
    """
    points = np.atleast_2d(np.asarray(points, float))
    values = np.asarray(values, float).ravel()
    if len(points) != len(values):
        raise ContractViolationError("points/values length mismatch")
    gaps = np.abs(values[:, None] - values[None, :])
    dists = np.linalg.norm(points[:, None, :] - points[None, :, :], axis=-1)
    if np.any(gaps > lipschitz * dists + tol):
        worst = float(np.max(gaps - lipschitz * dists))
        raise InconsistentDataError(
            f"values exceed the declared Lipschitz bound by {worst:.3g}"
        )
    x = np.asarray(x, float)
    single = x.ndim == 1
    queries = np.atleast_2d(x)
    d = np.linalg.norm(queries[:, None, :] - points[None, :, :], axis=-1)
    out = np.min(values[None, :] + lipschitz * d, axis=1)
    return float(out[0]) if single else out


def max_triangle_violation(oracle: MetricOracle, sampler, triples: int = 10_000,
                           seed: int = 0) -> float:
    """Largest d(p,q) - d(p,r) - d(r,q) over random triples (<=0 when a metric)."""
    rng = np.random.default_rng(seed)
    p = sampler(rng, triples)
    q = sampler(rng, triples)
    r = sampler(rng, triples)
    viol = (oracle.dist_aligned(p, q)
            - oracle.dist_aligned(p, r)
            - oracle.dist_aligned(r, q))
    return float(viol.max())
