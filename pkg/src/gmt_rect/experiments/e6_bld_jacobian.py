"""E6: two-sided length distortion forces a nonvanishing Jacobian.

Maps with bounded two-sided length distortion (identity, rotation, uniform
scaling) must show |J| above a fitted positive constant at almost every
resolved point; the rank-deficient projection (x1, x2) -> (x1, 0) must fail
the lower distortion bound on vertical segments.
"""

from __future__ import annotations

import numpy as np

from ..cc_spaces import Box, euclidean_system, integrate_path, weak_bld_estimate
from ..jets import approx_jet, stratify_critical
from ..metric_core import SampledMap, box_indices, euclidean_metric
from ..report import Verdict
from .common import RunOutputs, metric, spawn_seeds

CLAIM_JAC = ("two-sided bounded length distortion forces |J| >= c > 0 at "
             "almost every point")
CLAIM_FAIL = ("a rank-deficient projection sends vertical segments to points: "
              "the lower length-distortion bound fails")

DEFAULTS = {
    "h": 0.02,
    "rotation_deg": 30.0,
    "bound": 4.0,
    "min_fraction": 0.99,
    "curve_count": 8,
    "curve_steps": 12,
}


def _bld_maps(params):
    theta = np.deg2rad(params["rotation_deg"])
    rot = np.array([[np.cos(theta), -np.sin(theta)],
                    [np.sin(theta), np.cos(theta)]])
    return {
        "identity": lambda p: np.asarray(p, float),
        "rotation": lambda p: np.asarray(p, float) @ rot.T,
        "scaling2": lambda p: 2.0 * np.asarray(p, float),
    }


def _jacobian_values(fn, params):
    h = params["h"]
    n = int(round(1.0 / h))
    idx = box_indices(2, n)
    f = SampledMap(2, h, idx, fn(idx * h), euclidean_metric())
    strat = stratify_critical(f, 3 * h)
    vals = []
    for row in np.flatnonzero(strat.ranks >= 0):
        jet = approx_jet(f, int(row), 3 * h)
        vals.append(float(np.prod(jet.singular_values[:2])))
    return np.asarray(vals)


def _sample_curves(params, seed):
    sys_ = euclidean_system(2, Box(np.zeros(2), np.ones(2)))
    steps = params["curve_steps"]
    curves = [
        integrate_path(sys_, np.tile([0.5, 0.0], (steps, 1)),
                       start=np.array([0.25, 0.5])),
        integrate_path(sys_, np.tile([0.0, 0.5], (steps, 1)),
                       start=np.array([0.5, 0.25])),
        integrate_path(sys_, np.tile([0.35, 0.35], (steps, 1)),
                       start=np.array([0.25, 0.25])),
    ]
    rng = np.random.default_rng(seed)
    for _ in range(params["curve_count"] - len(curves)):
        controls = rng.normal(size=(steps, 2)) * 0.3
        curves.append(integrate_path(sys_, controls,
                                     start=np.array([0.5, 0.5])))
    return sys_, curves


def run(params: dict, seed: int) -> RunOutputs:
    metrics, verdicts, tables, figures = [], [], {}, []
    _, curves = _sample_curves(params, spawn_seeds(seed, 1)[0])
    pooled = []
    for tag, fn in _bld_maps(params).items():
        jac = _jacobian_values(fn, params)
        pooled.extend([[tag, float(v)] for v in jac])
        c_fit = 0.5 * float(np.percentile(jac, 1))
        frac = float(np.mean(jac > c_fit))
        metrics.append(metric(f"{tag}_jacobian_floor", c_fit, CLAIM_JAC))
        metrics.append(metric(f"{tag}_fraction_above_floor", frac, CLAIM_JAC))
        verdicts.append(Verdict(
            f"{tag}_jacobian_positive",
            c_fit > 0 and frac >= params["min_fraction"],
            f"|J| > {c_fit:.3f} at {frac:.2%} of resolved points"))
        rep = weak_bld_estimate(fn, curves, bound=params["bound"])
        metrics.append(metric(f"{tag}_ratio_min", rep.ratio_min, CLAIM_JAC))
        metrics.append(metric(f"{tag}_ratio_max", rep.ratio_max, CLAIM_JAC))
        verdicts.append(Verdict(f"{tag}_distortion_bounded",
                                rep.verdict == "PASS",
                                f"ratios in [{rep.ratio_min:.3f}, "
                                f"{rep.ratio_max:.3f}]"))

    def collapse(p):
        out = np.asarray(p, float).copy()
        out[:, 1] = 0.0
        return out

    sys_ = euclidean_system(2, Box(np.zeros(2), np.ones(2)))
    vertical = integrate_path(sys_, np.tile([0.0, 0.6], (10, 1)),
                              start=np.array([0.5, 0.1]))
    rep = weak_bld_estimate(collapse, [vertical], bound=params["bound"])
    metrics.append(metric("collapse_ratio_min", rep.ratio_min, CLAIM_FAIL))
    verdicts.append(Verdict("collapse_fails_lower_bound",
                            rep.verdict == "FAIL" and rep.ratio_min < 1e-6,
                            f"vertical segment ratio {rep.ratio_min:.2e}"))
    tables["e6_jacobians.csv"] = (["map", "jac_abs"], pooled)
    figures.append({
        "kind": "histogram", "title": "pooled |J| of distortion-bounded maps",
        "output": "e6_jacobian_hist", "series": "e6_jacobians.csv",
        "x": "jac_abs",
        "annotate": {"floor": "identity_jacobian_floor"},
    })
    return RunOutputs(metrics, verdicts, tables, figures)
