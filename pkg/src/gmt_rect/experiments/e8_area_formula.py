"""E8: the Jacobian integral balances the multiplicity-weighted image measure.

Three built-in maps (a linear doubling, a multiplicity-two fold, an
injective shear) are checked at several spacings; the relative gap at the
finest spacing must stay below one percent for each.
"""

from __future__ import annotations

from ..jets import area_formula_check
from ..metric_core import SampledMap, box_indices, euclidean_metric
from ..report import Verdict
from ..synthetic import AREA_TEST_MAPS
from .common import RunOutputs, metric

CLAIM = ("integral of |J| over the domain equals the multiplicity-weighted "
         "measure of the image")

DEFAULTS = {
    "h": 0.005,
    "series_h": [0.02, 0.01, 0.005],
    "max_gap": 0.01,
}


def _check(spec, h):
    n = int(round(1.0 / h))
    idx = box_indices(spec.k, n)
    g = SampledMap(spec.k, h, idx, spec.value(idx * h), euclidean_metric())
    return area_formula_check(g, jacobian=spec.jacobian)


def run(params: dict, seed: int) -> RunOutputs:
    metrics, verdicts, tables, figures = [], [], {}, []
    for name, spec in AREA_TEST_MAPS.items():
        rows = []
        for h in params["series_h"]:
            res = _check(spec, h)
            rows.append([h, res.lhs, res.rhs, res.gap])
        final = rows[-1] if params["series_h"][-1] == params["h"] else None
        if final is None:
            res = _check(spec, params["h"])
            final = [params["h"], res.lhs, res.rhs, res.gap]
            rows.append(final)
        metrics.append(metric(f"{name}_lhs", final[1], CLAIM))
        metrics.append(metric(f"{name}_rhs", final[2], CLAIM))
        metrics.append(metric(f"{name}_gap", final[3], CLAIM))
        verdicts.append(Verdict(f"{name}_gap_below_1pct",
                                final[3] < params["max_gap"],
                                f"gap {final[3]:.4%} at h = {final[0]:g}"))
        fname = f"e8_{name}_gaps.csv"
        tables[fname] = (["h", "lhs", "rhs", "gap"], rows)
        figures.append({
            "kind": "decay", "title": f"area-formula gap vs spacing ({name})",
            "output": f"e8_{name}_gap", "series": fname,
            "x": "h", "y": "gap",
            "annotate": {"final_gap": f"{name}_gap"},
        })
    return RunOutputs(metrics, verdicts, tables, figures)
