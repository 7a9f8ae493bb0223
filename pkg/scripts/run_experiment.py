#!/usr/bin/env python3
"""
Command-line runner for the lorentzian varifold experiments.

Builds an ExperimentConfig from the flags, runs it through the experiment
service, writes the report files and exits 0 iff every tolerance check passed.
"""

import argparse
import json
import logging
import sys
import os

from decouple import config
from pydantic import ValidationError

# Add parent directory to path so we can import from the main app
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from app.schemas.experiment_schemas import EXPERIMENTS, BUILTIN_STRINGS, ExperimentConfig
from app.services.experiment_service import experiment_service

FLAG_TO_FIELD = {
    "out_dir": "out_dir", "seed": "seed", "grid_dt": "grid_dt", "grid_du": "grid_du",
    "slice_width": "slice_width", "family_scales": "family_scales",
    "builtin": "builtin", "R": "R", "L": "L", "curve": "curve_path", "curve_b": "curve_b_path", "modes": "modes",
    "theta1": "theta1", "theta2": "theta2", "theta3": "theta3", "alpha": "alpha", "beta": "beta",
    "network": "network_path", "n": "n_values", "t0": "t0", "t1": "t1", "refinements": "refinements",
    "trials": "trials", "h": "h", "N": "N", "C": "C", "vector": "vector", "basis": "basis",
}


def int_list(raw: str):
    return [int(v) for v in raw.split(",") if v.strip()]


def float_list(raw: str):
    return [float(v) for v in raw.split(",") if v.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Run a lorentzian varifold experiment")
    parser.add_argument("--experiment", required=True, choices=EXPERIMENTS)
    parser.add_argument("--out-dir", dest="out_dir")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--grid-dt", dest="grid_dt", type=float)
    parser.add_argument("--grid-du", dest="grid_du", type=float)
    parser.add_argument("--slice-width", dest="slice_width", type=float)
    parser.add_argument("--family-scales", dest="family_scales", type=int_list, help="e.g. 1,2,4")
    parser.add_argument("--no-write", action="store_true", help="print the report without writing files")

    strings = parser.add_argument_group("strings")
    strings.add_argument("--builtin", choices=BUILTIN_STRINGS)
    strings.add_argument("--R", type=float, help="kink radius")
    strings.add_argument("--L", type=float, help="square side")
    strings.add_argument("--curve", help="curve JSON {L, samples} for --builtin curve")
    strings.add_argument("--curve-b", dest="curve_b", help="second curve b for gamma = (a(u + t) + b(u - t)) / 2")
    strings.add_argument("--modes", type=int)

    junctions = parser.add_argument_group("junctions")
    for name in ("theta1", "theta2", "theta3", "alpha", "beta"):
        junctions.add_argument(f"--{name}", type=float)
    junctions.add_argument("--network", help="network JSON {p, lines}")

    grids = parser.add_argument_group("grids")
    grids.add_argument("--n", type=int_list, help="convergence indices, e.g. 4,8,16,32")
    grids.add_argument("--t0", type=float)
    grids.add_argument("--t1", type=float)
    grids.add_argument("--refinements", type=int)
    grids.add_argument("--trials", type=int)
    grids.add_argument("--h", type=int)
    grids.add_argument("--N", type=int)
    grids.add_argument("--C", type=float)

    geometry = parser.add_argument_group("minkowski")
    geometry.add_argument("--vector", type=float_list, help="components v0,v1,...")
    geometry.add_argument("--basis", type=json.loads, help="JSON list of tangent vectors")
    return parser


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    values = {"experiment": args.experiment}
    for flag, field_name in FLAG_TO_FIELD.items():
        value = getattr(args, flag)
        if value is not None:
            values[field_name] = value
    return ExperimentConfig(**values)


def main(argv=None) -> int:
    logging.basicConfig(level=config("LORVAR_LOG_LEVEL", default="INFO"),
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
    except ValidationError as e:
        print(f"❌ Invalid configuration:\n{e}")
        return 2

    report = experiment_service.run(cfg, write=not args.no_write)
    for check in report.checks:
        mark = "✅" if check.passed else "❌"
        print(f"{mark} {check.name}: {check.value:.3e} (tolerance {check.tolerance:.3e})")
    if report.error:
        print(f"❌ {report.error}")
    if args.no_write:
        print(report.model_dump_json(indent=2))
    elif "files" in report.results:
        print(f"📄 Report: {report.results['files']['json']}")
    print("🎉 All checks passed" if report.passed else "⚠️ Some checks failed")
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
