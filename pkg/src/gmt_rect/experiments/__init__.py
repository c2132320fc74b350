"""Registry of scripted, seeded experiments and the runner entry point."""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable

from ..errors import UnknownExperimentError
from ..report import ExperimentConfig, ExperimentReport
from . import (
    e1_equivalence,
    e2_diameter,
    e3_si_majority,
    e4_covering_decay,
    e5_heisenberg_unrect,
    e6_bld_jacobian,
    e7_taxis_length,
    e8_area_formula,
    e9_straightening,
)

__all__ = ["EXPERIMENTS", "ExperimentSpec", "get_config", "run_experiment"]


@dataclass(frozen=True)
class ExperimentSpec:
    id: str
    summary: str
    defaults: dict
    runner: Callable


EXPERIMENTS: dict[str, ExperimentSpec] = {}


def _register(exp_id, module, summary):
    EXPERIMENTS[exp_id] = ExperimentSpec(exp_id, summary, dict(module.DEFAULTS),
                                         module.run)


_register("E1_equivalence", e1_equivalence,
          "rank-one maps: image content decay matches projection rank deficiency")
_register("E2_diameter", e2_diameter,
          "image diameter scales as the 1/k power of the active-set measure")
_register("E3_si_majority", e3_si_majority,
          "most segments meet a sparse set along a short intersection")
_register("E4_covering_decay", e4_covering_decay,
          "rank-j critical image covered by m^j balls of radius ~ 1/m")
_register("E5_heisenberg_unrect", e5_heisenberg_unrect,
          "jet ranks of Lipschitz maps into the first group stay <= n")
_register("E6_bld_jacobian", e6_bld_jacobian,
          "bounded two-sided length distortion forces a nonvanishing Jacobian")
_register("E7_taxis_length", e7_taxis_length,
          "vertical segments gain length like sqrt(N) under refinement")
_register("E8_area_formula", e8_area_formula,
          "Jacobian integral equals multiplicity-weighted image measure")
_register("E9_straightening", e9_straightening,
          "coordinate change makes the leading map components the identity")


def get_config(exp_id: str, params: dict | None = None,
               seed: int | None = None) -> ExperimentConfig:
    """Merge experiment defaults with overrides into a runnable config."""
    if exp_id not in EXPERIMENTS:
        raise UnknownExperimentError(
            f"unknown experiment {exp_id!r}; known: {sorted(EXPERIMENTS)}"
        )
    merged = dict(EXPERIMENTS[exp_id].defaults)
    merged.update(params or {})
    return ExperimentConfig(exp_id, merged, 0 if seed is None else int(seed))


def run_experiment(config: ExperimentConfig) -> ExperimentReport:
    """Run one registered experiment; deterministic given config and seed."""
    if config.name not in EXPERIMENTS:
        raise UnknownExperimentError(
            f"unknown experiment {config.name!r}; known: {sorted(EXPERIMENTS)}"
        )
    spec = EXPERIMENTS[config.name]
    t0 = time.perf_counter()
    outputs = spec.runner(config.params, config.seed)
    runtime = time.perf_counter() - t0
    return ExperimentReport(
        id=config.name,
        seed=config.seed,
        params=config.params,
        metrics=outputs.metrics,
        verdicts=outputs.verdicts,
        tables=outputs.tables,
        figures=outputs.figures,
        runtime_seconds=runtime,
    )
