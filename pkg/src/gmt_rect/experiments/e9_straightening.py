"""E9: the local coordinate change fixes the leading components.

For both built-in nonlinear maps the Newton-inverted coordinate change must
reproduce the first j components to 1e-8 on 25 sample targets inside the
certified ball.
"""

from __future__ import annotations

import numpy as np

from ..jets import straightening_map
from ..report import Verdict
from ..synthetic import STRAIGHTENING_TEST_MAPS
from .common import RunOutputs, metric

CLAIM = ("after the coordinate change the map acts as the identity on the "
         "first j coordinates near the base point")

DEFAULTS = {
    "j": 1,
    "eps_init": 0.5,
    "test_points": 25,
    "max_residual": 1e-8,
}


def run(params: dict, seed: int) -> RunOutputs:
    metrics, verdicts, tables, figures = [], [], {}, []
    rows = []
    for name, spec in STRAIGHTENING_TEST_MAPS.items():
        def g(x, spec=spec):
            return spec.value(x[None, :])[0]

        def jac(x, spec=spec):
            return spec.jacobian(x[None, :])[0]

        st = straightening_map(g, jac, np.zeros(spec.k), params["j"],
                               eps_init=params["eps_init"],
                               test_points=params["test_points"], seed=seed)
        rng = np.random.default_rng(seed)
        dirs = rng.normal(size=(params["test_points"], spec.k))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        radii = np.linspace(0.2, 1.0, params["test_points"]) * st.epsilon
        worst = 0.0
        for i, (d, r) in enumerate(zip(dirs, radii)):
            w = r * d
            u = st.inverse(w)
            res = float(np.max(np.abs(st.g_centered(u)[:params["j"]]
                                      - w[:params["j"]])))
            rows.append([name, i, float(r), res])
            worst = max(worst, res)
        metrics.append(metric(f"{name}_max_residual", worst, CLAIM))
        metrics.append(metric(f"{name}_ball_radius", st.epsilon, CLAIM))
        verdicts.append(Verdict(f"{name}_residual_bound",
                                worst < params["max_residual"],
                                f"max residual {worst:.2e} on "
                                f"{params['test_points']} targets"))
        verdicts.append(Verdict(f"{name}_ball_above_minimum",
                                st.epsilon >= 1e-6,
                                f"certified radius {st.epsilon:.3g}"))
    tables["e9_residuals.csv"] = (["map", "point", "radius", "residual"], rows)
    figures.append({
        "kind": "histogram", "title": "straightening residuals on test targets",
        "output": "e9_residuals", "series": "e9_residuals.csv",
        "x": "residual",
        "annotate": {"max": "cubic_max_residual"},
    })
    return RunOutputs(metrics, verdicts, tables, figures)
