"""Built-in synthetic test maps with analytic Jacobians.

Everything here is smooth by construction, so fitted jets can be checked
against exact derivatives and the harness experiments stay oracle-friendly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .metric_core import (
    MetricOracle,
    SampledMap,
    box_indices,
    euclidean_metric,
    linf_metric,
)

__all__ = [
    "MapSpec",
    "AREA_TEST_MAPS",
    "STRAIGHTENING_TEST_MAPS",
    "scaling_map",
    "fold_map",
    "planar_diffeo",
    "arc_curve",
    "rank_one_surface",
    "horizontal_lift",
    "heisenberg_lift_surface",
    "cubic_shear",
    "exp_shear",
    "cone_bump",
    "sample_on_box",
]


@dataclass(frozen=True)
class MapSpec:
    """A map evaluator paired with its analytic Jacobian."""

    name: str
    k: int
    value: Callable      # (P, k) -> (P, m)
    jacobian: Callable   # (P, k) -> (P, m, k)


def scaling_map(factor: float = 2.0, k: int = 2) -> MapSpec:
    def value(x):
        return factor * np.asarray(x, float)

    def jacobian(x):
        x = np.atleast_2d(np.asarray(x, float))
        return np.broadcast_to(factor * np.eye(k), (len(x), k, k)).copy()

    return MapSpec(f"scale{factor:g}", k, value, jacobian)


def fold_map(crease: float = 0.5) -> MapSpec:
    """One-dimensional tent |x - crease|, multiplicity two onto its image."""

    def value(x):
        x = np.asarray(x, float)
        return np.abs(x - crease)

    def jacobian(x):
        x = np.atleast_2d(np.asarray(x, float))
        return np.sign(x - crease)[:, :, None]

    return MapSpec("fold", 1, value, jacobian)


def planar_diffeo(amplitude: float = 0.15) -> MapSpec:
    """Area-preserving-on-average shear of the unit square; injective for
    amplitude * pi < 1."""
    a = amplitude

    def value(x):
        x = np.atleast_2d(np.asarray(x, float))
        return np.stack([x[:, 0] + a * np.sin(np.pi * x[:, 1]),
                         x[:, 1] + a * np.sin(np.pi * x[:, 0])], axis=1)

    def jacobian(x):
        x = np.atleast_2d(np.asarray(x, float))
        out = np.empty((len(x), 2, 2))
        out[:, 0, 0] = 1.0
        out[:, 0, 1] = a * np.pi * np.cos(np.pi * x[:, 1])
        out[:, 1, 0] = a * np.pi * np.cos(np.pi * x[:, 0])
        out[:, 1, 1] = 1.0
        return out

    return MapSpec("diffeo", 2, value, jacobian)


AREA_TEST_MAPS = {
    "linear": scaling_map(2.0, 2),
    "fold": fold_map(0.5),
    "diffeo": planar_diffeo(0.15),
}


def arc_curve(radius: float = 2.0) -> Callable:
    """Unit-speed circular arc s -> radius * (cos(s/R), sin(s/R))."""

    def gamma(s):
        s = np.asarray(s, float)
        return np.stack([radius * np.cos(s / radius),
                         radius * np.sin(s / radius)], axis=-1)

    return gamma


def rank_one_surface(radius: float = 2.0, ambient: int = 3) -> MapSpec:
    """(x1, x2) -> gamma(x1) padded into R^ambient; rank one everywhere."""
    gamma = arc_curve(radius)

    def value(x):
        x = np.atleast_2d(np.asarray(x, float))
        curve = gamma(x[:, 0])
        out = np.zeros((len(x), ambient))
        out[:, :2] = curve
        return out

    def jacobian(x):
        x = np.atleast_2d(np.asarray(x, float))
        out = np.zeros((len(x), ambient, 2))
        out[:, 0, 0] = -np.sin(x[:, 0] / radius)
        out[:, 1, 0] = np.cos(x[:, 0] / radius)
        return out

    return MapSpec("rank1-arc", 2, value, jacobian)


def horizontal_lift(radius: float = 2.0) -> Callable:
    """Lift of the unit-speed arc into group coordinates (x, y, t).

    The height solves t' = 2 (y x' - x y'), which for the circular arc is
    the constant -2 * radius, so the lift stays unit-speed for the
    horizontal length.
    """

    def lift(s):
        s = np.asarray(s, float)
        x = radius * np.cos(s / radius)
        y = radius * np.sin(s / radius)
        t = -2.0 * radius * s
        return np.stack([x, y, t], axis=-1)

    return lift


def heisenberg_lift_surface(radius: float = 2.0,
                            reparam: Callable | None = None) -> Callable:
    """(x1, x2) -> lift(u(x1, x2)); composing with a scalar u keeps rank one."""
    lift = horizontal_lift(radius)

    def value(x):
        x = np.atleast_2d(np.asarray(x, float))
        s = x[:, 0] if reparam is None else reparam(x)
        return lift(s)

    return value


def cubic_shear() -> MapSpec:
    """g(x) = (x1^3 + x1, x2^2); invertible in x1, folds in x2."""

    def value(x):
        x = np.atleast_2d(np.asarray(x, float))
        return np.stack([x[:, 0] ** 3 + x[:, 0], x[:, 1] ** 2], axis=1)

    def jacobian(x):
        x = np.atleast_2d(np.asarray(x, float))
        out = np.zeros((len(x), 2, 2))
        out[:, 0, 0] = 3.0 * x[:, 0] ** 2 + 1.0
        out[:, 1, 1] = 2.0 * x[:, 1]
        return out

    return MapSpec("cubic-shear", 2, value, jacobian)


def exp_shear() -> MapSpec:
    """g(x) = (exp(x1) - 1 + x2/2, x1 x2); nonsingular first minor at 0."""

    def value(x):
        x = np.atleast_2d(np.asarray(x, float))
        return np.stack([np.exp(x[:, 0]) - 1.0 + 0.5 * x[:, 1],
                         x[:, 0] * x[:, 1]], axis=1)

    def jacobian(x):
        x = np.atleast_2d(np.asarray(x, float))
        out = np.empty((len(x), 2, 2))
        out[:, 0, 0] = np.exp(x[:, 0])
        out[:, 0, 1] = 0.5
        out[:, 1, 0] = x[:, 1]
        out[:, 1, 1] = x[:, 0]
        return out

    return MapSpec("exp-shear", 2, value, jacobian)


STRAIGHTENING_TEST_MAPS = {
    "cubic": cubic_shear(),
    "expshear": exp_shear(),
}


def cone_bump(eps: float, center) -> Callable:
    """Scalar ramp max(0, eps - |x - center|); gradient vanishes outside the
    eps-ball and has unit norm inside."""
    center = np.asarray(center, float)

    def value(x):
        x = np.atleast_2d(np.asarray(x, float))
        return np.maximum(0.0, eps - np.linalg.norm(x - center, axis=1))

    return value


def sample_on_box(fn: Callable, k: int, h: float, n_per_axis: int,
                  target: MetricOracle | None = None) -> SampledMap:
    """Sample a vectorized map on the grid {0..n}^k * h."""
    indices = box_indices(k, n_per_axis)
    values = np.asarray(fn(indices * h), float)
    if target is None:
        target = euclidean_metric() if values.ndim > 1 else euclidean_metric()
    return SampledMap(k, h, indices, values, target)
