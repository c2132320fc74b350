"""E5: jet ranks of Lipschitz maps into the first group stay at or below n.

Horizontal-lift test maps from the plane are genuinely Lipschitz for the
gauge metric and must show fitted ranks <= n = 1 in the identity chart.  The
planar inclusion (x, y, 0) is not Lipschitz: its distance ratios must blow
up at fine scales with exponent -1/2, so it cannot witness a higher rank.
"""

from __future__ import annotations

import numpy as np

from .. import heisenberg as hb
from ..jets import stratify_critical
from ..metric_core import SampledMap, box_indices, euclidean_metric
from ..report import Verdict
from ..synthetic import heisenberg_lift_surface
from .common import RunOutputs, fit_series, metric, slope_verdict

CLAIM_RANK = ("Lipschitz maps from R^k into the first group have fitted rank "
              "at most n = 1")
CLAIM_BLOWUP = ("the planar inclusion has distance ratios growing like "
                "scale^(-1/2): not Lipschitz")

DEFAULTS = {
    "n_axis": 64,
    "rank_tol": 1e-2,
    "scale_steps": [1, 2, 4, 8, 16],
    "slope_tol": 0.1,
    "curve_radius": 2.0,
}


def _grid_map(fn, n_axis, target):
    idx = box_indices(2, n_axis)
    h = 1.0 / n_axis
    return SampledMap(2, h, idx, fn(idx * h), target)


def run(params: dict, seed: int) -> RunOutputs:
    n_axis = params["n_axis"]
    oracle = hb.koranyi_metric(1)
    lift = heisenberg_lift_surface(params["curve_radius"])
    composed = heisenberg_lift_surface(
        params["curve_radius"], reparam=lambda x: 0.5 * (x[:, 0] + x[:, 1]))
    line = lambda x: np.stack(
        [x[:, 0], np.zeros(len(x)), np.zeros(len(x))], axis=1)
    test_maps = {"lift_arc": lift, "lift_composed": composed,
                 "horizontal_line": line}
    metrics, verdicts, tables, figures = [], [], {}, []
    strata_map = None
    for tag, fn in test_maps.items():
        f = _grid_map(fn, n_axis, oracle)
        rank = hb.low_rank_check(f, tol=params["rank_tol"])
        metrics.append(metric(f"{tag}_max_rank", rank, CLAIM_RANK))
        verdicts.append(Verdict(f"{tag}_rank_bound", rank <= 1,
                                f"max resolved rank {rank} <= 1"))
        if tag == "lift_arc":
            chart = f.with_target(euclidean_metric())
            strata_map = stratify_critical(chart, 3 * f.h,
                                           tol=params["rank_tol"])
            rows = [[int(i), int(j), int(r)] for (i, j), r in
                    zip(f.indices, strata_map.ranks)]
            tables["e5_strata.csv"] = (["i", "j", "rank"], rows)
            figures.append({
                "kind": "strata", "title": "fitted rank strata of the lift map",
                "output": "e5_strata", "series": "e5_strata.csv",
                "x": "i", "y": "j", "value": "rank",
                "annotate": {"max_rank": f"{tag}_max_rank"},
            })

    planar = _grid_map(lambda x: np.stack(
        [x[:, 0], x[:, 1], np.zeros(len(x))], axis=1), n_axis, oracle)
    profile = hb.h_lipschitz_profile(planar, params["scale_steps"])
    slope, _ = fit_series([row.scale for row in profile],
                          [row.max_ratio for row in profile])
    metrics.append(metric("planar_ratio_scale_exponent", slope, CLAIM_BLOWUP))
    verdicts.append(slope_verdict("planar_inclusion_blowup", slope, -0.5,
                                  params["slope_tol"]))
    tables["e5_profile.csv"] = (["scale", "max_ratio"],
                                [[row.scale, row.max_ratio] for row in profile])
    figures.append({
        "kind": "decay", "title": "distance ratio blow-up of the inclusion",
        "output": "e5_profile", "series": "e5_profile.csv",
        "x": "scale", "y": "max_ratio",
        "annotate": {"slope": "planar_ratio_scale_exponent"},
    })
    return RunOutputs(metrics, verdicts, tables, figures)
