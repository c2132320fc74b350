"""E3: most segments meet a small set along a short intersection.

For seeded random grid sets E with measure at most a tenth of the cube, the
fraction of uniform segments from a fixed point whose intersection length
with E stays below 2 * C_ball(n) * measure^(1/n) must exceed one half in
every instance.
"""

from __future__ import annotations

import numpy as np

from ..measure import segment_intersection_stat
from ..report import Verdict
from .common import RunOutputs, metric, spawn_seeds

CLAIM = ("over half of random segments meet a sparse set along length at most "
         "twice the equal-measure-ball potential constant times measure^(1/n)")

DEFAULTS = {
    "h": 0.02,
    "instances": 100,
    "samples": 300,
    "measure_lo": 0.002,
    "measure_hi": 0.1,
    "cells_per_axis": 50,
}


def _random_sparse_set(rng, params):
    side = params["cells_per_axis"]
    target = np.exp(rng.uniform(np.log(params["measure_lo"]),
                                np.log(params["measure_hi"])))
    h = params["h"]
    blocks = []
    measure = 0.0
    while measure < target:
        c = rng.integers(0, side - 1, size=2)
        w = rng.integers(1, 8, size=2)
        ii, jj = np.meshgrid(np.arange(c[0], min(c[0] + w[0], side)),
                             np.arange(c[1], min(c[1] + w[1], side)),
                             indexing="ij")
        blocks.append(np.stack([ii.ravel(), jj.ravel()], axis=1))
        measure = len(np.unique(np.concatenate(blocks), axis=0)) * h * h
    return np.unique(np.concatenate(blocks), axis=0)


def run(params: dict, seed: int) -> RunOutputs:
    seeds = spawn_seeds(seed, params["instances"])
    rows = []
    for inst, s in enumerate(seeds):
        rng = np.random.default_rng(s)
        e_idx = _random_sparse_set(rng, params)
        x = rng.uniform(0.0, 1.0, size=2)
        stat = segment_intersection_stat(e_idx, params["h"], np.zeros(2), 1.0,
                                         x, params["samples"], seed=s)
        measure = len(e_idx) * params["h"] ** 2
        rows.append([inst, measure, stat.median, stat.threshold,
                     stat.fraction_below])
    fractions = np.array([r[4] for r in rows])
    metrics = [
        metric("min_fraction_below", float(fractions.min()), CLAIM),
        metric("median_fraction_below", float(np.median(fractions)), CLAIM),
        metric("instances", float(len(rows)), CLAIM),
    ]
    verdicts = [Verdict("majority_in_every_instance",
                        bool(np.all(fractions > 0.5)),
                        f"min fraction {fractions.min():.3f} over "
                        f"{len(rows)} instances")]
    tables = {"e3_fractions.csv": (
        ["instance", "measure", "median_length", "threshold", "fraction_below"],
        rows)}
    figures = [{
        "kind": "histogram", "title": "fraction of short segments per instance",
        "output": "e3_fraction_hist", "series": "e3_fractions.csv",
        "x": "fraction_below",
        "annotate": {"min": "min_fraction_below"},
    }]
    return RunOutputs(metrics, verdicts, tables, figures)
