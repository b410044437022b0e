"""Command-line front end.

Subcommands map one to one onto the experiment families; each accepts a
JSON config file plus a handful of overrides, writes the delimited report
(and companion figures) when --out is given, and prints a short summary.
Errors exit nonzero with a machine-readable JSON object on stderr.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from .experiments import (
    ExperimentConfig,
    fit_from_rows,
    parse_report,
    report_text,
    run_experiment,
    zero_hit_upper_bounds,
)
from .sampling import (
    RngStreamSpec,
    StreamRole,
    draw_coefficients,
    draw_to_text,
    truncation_plan,
)

_COMMAND_EXPERIMENTS = {
    "hole": "hole_ladder",
    "crowding": "crowding_ladder",
    "growth": "growth_stats",
    "bounds": "bounds_table",
    "audit": "audits",
    "omega-verify": "omega_verify",
}


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="JSON config file")
    parser.add_argument("--m", type=int, help="dimension override")
    parser.add_argument("--r", type=str, help="radius or comma list, e.g. 1.5,2,3")
    parser.add_argument("--trials", type=int, help="trial count override")
    parser.add_argument("--seed", type=int, help="master seed override")
    parser.add_argument("--out", type=str, help="report base path")
    parser.add_argument("--format", choices=("csv", "json"), help="report format")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bflab",
        description="simulation lab for random entire functions: holes, "
        "zero crowding, growth, and orthant bounds",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sample = sub.add_parser("sample", help="draw one coefficient vector")
    _add_common(sample)
    sample.add_argument("--trial", type=int, default=0, help="trial id")

    for name in ("hole", "crowding", "growth", "bounds", "audit", "omega-verify"):
        p = sub.add_parser(name, help=f"run the {_COMMAND_EXPERIMENTS[name]} experiment")
        _add_common(p)
        if name in ("hole", "crowding"):
            p.add_argument("--kind", type=str, help="event kind override")
            p.add_argument("--sampler", choices=("plain", "tilted"))
            p.add_argument("--tilt-shift", type=float, dest="tilt_shift")
            p.add_argument("--tilt-band-scale", type=float, dest="tilt_band_scale")
        if name == "omega-verify":
            p.add_argument("--variant", choices=("real", "complex"))

    fit = sub.add_parser("fit", help="fit a decay exponent to a ladder report")
    _add_common(fit)
    fit.add_argument("--input", type=Path, required=True, help="ladder report file")
    fit.add_argument("--rel-width-cap", type=float, default=2.0)

    return parser


def _load_config_dict(args) -> dict:
    data: dict = {}
    if args.config is not None:
        data = json.loads(Path(args.config).read_text())
        if not isinstance(data, dict):
            raise ValueError("config file must hold a JSON object")
    return data


def _apply_overrides(data: dict, args, experiment: str) -> ExperimentConfig:
    data = dict(data)
    data["experiment"] = experiment
    if args.m is not None:
        data["m"] = args.m
    if args.r is not None:
        data["r_values"] = [float(tok) for tok in args.r.split(",") if tok]
    if args.trials is not None:
        data["trials"] = args.trials
    if args.seed is not None:
        data["master_seed"] = args.seed
    if args.out is not None:
        data["out"] = args.out
    if args.format is not None:
        data["format"] = args.format
    if getattr(args, "kind", None) is not None:
        data["kind"] = args.kind
    if getattr(args, "sampler", None) is not None:
        data["sampler"] = args.sampler
    if getattr(args, "tilt_shift", None) is not None:
        data["tilt_shift_alpha0"] = args.tilt_shift
    if getattr(args, "tilt_band_scale", None) is not None:
        data["tilt_band_scale"] = args.tilt_band_scale
    if getattr(args, "variant", None) is not None:
        data["variant"] = args.variant
    return ExperimentConfig.from_dict(data)


def _cmd_sample(args) -> int:
    data = _load_config_dict(args)
    m = args.m if args.m is not None else int(data.get("m", 1))
    r = float(args.r.split(",")[0]) if args.r is not None else float(data.get("r_values", [1.0])[0])
    seed = args.seed if args.seed is not None else int(data.get("master_seed", 0))
    plan = truncation_plan(m, r)
    draw = draw_coefficients(RngStreamSpec(seed, args.trial, StreamRole.COEFFICIENTS), plan)
    text = draw_to_text(draw)
    if args.out:
        Path(args.out).write_text(text)
        print(f"wrote {plan.n_coefficients} coefficients to {args.out}")
    else:
        sys.stdout.write(text)
    return 0


def _cmd_experiment(args, experiment: str) -> int:
    config = _apply_overrides(_load_config_dict(args), args, experiment)
    rows, paths = run_experiment(config)
    if paths:
        for p in paths:
            print(f"wrote {p}")
    else:
        sys.stdout.write(report_text(rows, config.format))
    return 0


def _cmd_fit(args) -> int:
    rows = parse_report(args.input)
    fit = fit_from_rows(rows, rel_width_cap=args.rel_width_cap)
    payload = dataclasses.asdict(fit)
    payload["zero_hit_upper_bounds"] = zero_hit_upper_bounds(rows)
    text = json.dumps(payload, indent=2) + "\n"
    if args.out:
        Path(args.out).write_text(text)
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(text)
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "sample":
            return _cmd_sample(args)
        if args.command == "fit":
            return _cmd_fit(args)
        return _cmd_experiment(args, _COMMAND_EXPERIMENTS[args.command])
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        error = {"error": type(exc).__name__, "message": str(exc)}
        print(json.dumps(error), file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
