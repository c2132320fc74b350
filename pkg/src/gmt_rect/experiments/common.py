"""Shared helpers for the experiment runners."""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from ..errors import ContractViolationError
from ..measure import fit_loglog
from ..report import Metric, Verdict


class RunOutputs(NamedTuple):
    metrics: list
    verdicts: list
    tables: dict
    figures: list


def fit_series(xs, ys):
    """Log-log slope fit; experiments must supply at least four resolutions."""
    if len(xs) < 4:
        raise ContractViolationError("exponent fits need >= 4 resolutions")
    return fit_loglog(xs, ys)


def spawn_seeds(seed: int, count: int) -> list[int]:
    """Deterministic child seeds from a root seed."""
    return [int(s.generate_state(1)[0]) for s in
            np.random.SeedSequence(seed).spawn(count)]


def within(value, center, tol) -> bool:
    return abs(value - center) <= tol


def slope_verdict(name, slope, center, tol) -> Verdict:
    return Verdict(name, within(slope, center, tol),
                   f"slope {slope:.3f} vs {center:+.1f} +/- {tol}")


def metric(name, value, claim) -> Metric:
    return Metric(name, float(value), claim)
