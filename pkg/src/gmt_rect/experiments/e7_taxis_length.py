"""E7: vertical segments have divergent length under refinement.

Chord-summing the intrinsic distance along the t-axis segment [0, tau] with
N subdivisions gives N * d(0, (0,0,tau/N)) ~ sqrt(pi tau N): the log-log
slope against N must be 1/2 and the N = 512 sum must exceed ten times the
straight-line length tau.
"""

from __future__ import annotations

import numpy as np

from .. import heisenberg as hb
from ..report import Verdict
from .common import RunOutputs, fit_series, metric, slope_verdict, spawn_seeds

CLAIM_SLOPE = ("chord-sum length of a vertical segment grows like sqrt(N) "
               "under N-fold refinement")
CLAIM_EXCESS = ("at N = 512 the chord-sum length exceeds 10x the straight "
                "coordinate length")

DEFAULTS = {
    "tau": 1.0,
    "refinements": [8, 16, 32, 64, 128, 256, 512],
    "segments": 16,
    "restarts": 3,
    "slope_tol": 0.1,
    "excess_factor": 10.0,
}


def run(params: dict, seed: int) -> RunOutputs:
    tau = params["tau"]
    ns = params["refinements"]
    seeds = spawn_seeds(seed, len(ns) + 1)
    sums = []
    for n_ref, s in zip(ns, seeds):
        target = np.array([[0.0, 0.0, tau / n_ref]])
        upper = hb.cc_upper_bounds(target, params["segments"],
                                   params["restarts"], seed=s)[0]
        sums.append(n_ref * float(upper))
    slope, _ = fit_series(ns, sums)
    excess = sums[-1] / tau
    metrics = [
        metric("chord_sum_slope", slope, CLAIM_SLOPE),
        metric("chord_sum_at_max_refinement", sums[-1], CLAIM_EXCESS),
        metric("excess_over_straight_length", excess, CLAIM_EXCESS),
    ]
    verdicts = [
        slope_verdict("refinement_growth_rate", slope, 0.5,
                      params["slope_tol"]),
        Verdict("length_divergence", excess > params["excess_factor"],
                f"chord sum {sums[-1]:.1f} vs straight length {tau:g}"),
    ]
    tables = {"e7_chord_sums.csv": (
        ["N", "chord_sum"], [[n_ref, s] for n_ref, s in zip(ns, sums)])}
    # trace one optimized loop reaching the segment top for the path figure
    upper, controls = hb.cc_upper_bounds(np.array([[0.0, 0.0, tau]]),
                                         params["segments"],
                                         params["restarts"],
                                         seed=seeds[-1],
                                         return_controls=True)
    path = hb.integrate_controls(controls[0])
    tables["e7_path.csv"] = (["x", "y", "t"],
                             [[float(a), float(b), float(c)]
                              for a, b, c in path.positions])
    figures = [
        {"kind": "decay", "title": "chord-sum length vs refinement",
         "output": "e7_chord_sums", "series": "e7_chord_sums.csv",
         "x": "N", "y": "chord_sum",
         "annotate": {"slope": "chord_sum_slope"}},
        {"kind": "path3d", "title": "optimized horizontal loop to (0,0,tau)",
         "output": "e7_path", "series": "e7_path.csv",
         "x": "x", "y": "y", "z": "t",
         "annotate": {"length": "chord_sum_at_max_refinement"}},
    ]
    return RunOutputs(metrics, verdicts, tables, figures)
