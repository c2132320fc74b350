"""E4: the rank-one critical image is covered by m balls of radius ~ 1/m.

For a map collapsing the second coordinate onto a unit-speed arc, the
constructive cover must return exactly m^j = m balls whose single radius has
the normalized form c L d / m, contain the critical image exhaustively, and
whose 2-content decays like 1/m.
"""

from __future__ import annotations

from ..jets import critical_cover, stratify_critical
from ..metric_core import SampledMap, box_indices, linf_metric
from ..report import Verdict
from ..synthetic import rank_one_surface
from .common import RunOutputs, fit_series, metric, slope_verdict

CLAIM_COUNT = ("the rank-j critical part of a cube maps into m^j balls of "
               "radius proportional to 1/m")
CLAIM_DECAY = "cover content sum r^k decays like m^(j-k) = 1/m"

DEFAULTS = {
    "h": 0.01,
    "ms": [2, 4, 8, 16],
    "rank_tol": 1e-2,
    "curve_radius": 2.0,
    "slope_tol": 0.3,
}


def run(params: dict, seed: int) -> RunOutputs:
    h = params["h"]
    n = int(round(1.0 / h))
    idx = box_indices(2, n)
    spec = rank_one_surface(params["curve_radius"])
    f = SampledMap(2, h, idx, spec.value(idx * h), linf_metric())
    strat = stratify_critical(f, 3 * h, tol=params["rank_tol"])
    metrics, verdicts, rows = [], [], []
    contents = []
    for m in params["ms"]:
        cc = critical_cover(f, strat, j=1, m=m)
        contents.append(cc.cover.content())
        rows.append([m, cc.cover.ball_count, float(cc.cover.radii[0]),
                     cc.c_constant, cc.cover.content()])
        ok_count = cc.cover.ball_count == m
        verdicts.append(Verdict(f"m{m}_ball_count", ok_count,
                                f"{cc.cover.ball_count} balls for m = {m}"))
        verdicts.append(Verdict(f"m{m}_containment", cc.verified,
                                "exhaustive grid membership inside the cover"))
        metrics.append(metric(f"m{m}_radius_constant", cc.c_constant,
                              CLAIM_COUNT))
    slope, _ = fit_series(params["ms"], contents)
    metrics.append(metric("content_slope_in_m", slope, CLAIM_DECAY))
    verdicts.append(slope_verdict("content_decay_rate", slope, -1.0,
                                  params["slope_tol"]))
    tables = {"e4_cover.csv": (
        ["m", "ball_count", "radius", "c_constant", "content"], rows)}
    figures = [{
        "kind": "decay", "title": "critical cover content vs m",
        "output": "e4_content_decay", "series": "e4_cover.csv",
        "x": "m", "y": "content",
        "annotate": {"slope": "content_slope_in_m"},
    }]
    return RunOutputs(metrics, verdicts, tables, figures)
