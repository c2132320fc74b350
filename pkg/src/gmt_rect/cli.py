"""Command line front end: run registered experiments and list them.

``gmt-rect run <experiment-id> [--config cfg.toml] [--out dir] [--seed N]``
writes ``report.json``, ``metrics.csv``, side tables and a figure manifest
into ``<dir>/<experiment-id>/``.  ``gmt-rect run all`` runs every registered
experiment (optionally ``--parallel``).  The exit code is zero exactly when
every verdict passed.
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .errors import GmtRectError, UnknownExperimentError
from .experiments import EXPERIMENTS, get_config, run_experiment
from .report import emit_report

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib


def _load_config(path: Path | None) -> dict:
    if path is None:
        return {}
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def _config_for(exp_id: str, doc: dict, seed_override: int | None):
    params = dict(doc.get("params", {}))
    params.update(doc.get(exp_id, {}).get("params", {}))
    seed = doc.get("seed", 0)
    seed = doc.get(exp_id, {}).get("seed", seed)
    if seed_override is not None:
        seed = seed_override
    return get_config(exp_id, params, seed)


def _run_one(exp_id: str, doc: dict, seed_override, out_root: Path) -> bool:
    config = _config_for(exp_id, doc, seed_override)
    report = run_experiment(config)
    out_dir = out_root / exp_id
    emit_report(report, out_dir)
    status = "PASS" if report.passed else "FAIL"
    print(f"{status} {exp_id} ({report.runtime_seconds:.1f}s) -> {out_dir}")
    for verdict in report.verdicts:
        if not verdict.passed:
            print(f"  failed: {verdict.name}: {verdict.detail}")
    return report.passed


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="gmt-rect",
        description="Seeded numerical experiments on measure-zero Lipschitz images",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    run_p = sub.add_parser("run", help="run one experiment (or 'all')")
    run_p.add_argument("experiment", help="experiment id, or 'all'")
    run_p.add_argument("--config", type=Path, default=None,
                       help="TOML file with 'seed' and a [params] table")
    run_p.add_argument("--out", type=Path, default=Path("reports"),
                       help="output root; files land in <out>/<id>/")
    run_p.add_argument("--seed", type=int, default=None,
                       help="override the config seed")
    run_p.add_argument("--parallel", action="store_true",
                       help="run independent experiments concurrently")
    sub.add_parser("list", help="list registered experiments")
    args = parser.parse_args(argv)

    if args.command == "list":
        width = max(len(k) for k in EXPERIMENTS)
        for exp_id, spec in EXPERIMENTS.items():
            print(f"{exp_id:<{width}}  {spec.summary}")
        return 0

    try:
        doc = _load_config(args.config)
    except (OSError, tomllib.TOMLDecodeError) as err:
        print(f"error: cannot read config: {err}", file=sys.stderr)
        return 2
    ids = list(EXPERIMENTS) if args.experiment == "all" else [args.experiment]
    try:
        for exp_id in ids:
            if exp_id not in EXPERIMENTS:
                raise UnknownExperimentError(
                    f"unknown experiment {exp_id!r}; see 'gmt-rect list'"
                )
        if args.parallel and len(ids) > 1:
            with ProcessPoolExecutor() as pool:
                results = list(pool.map(
                    _run_one_args,
                    [(exp_id, doc, args.seed, args.out) for exp_id in ids]))
        else:
            results = [_run_one(exp_id, doc, args.seed, args.out)
                       for exp_id in ids]
    except UnknownExperimentError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except GmtRectError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    return 0 if all(results) else 1


def _run_one_args(packed):
    return _run_one(*packed)


if __name__ == "__main__":
    sys.exit(main())
