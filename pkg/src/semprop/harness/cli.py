"""Command-line interface.

Subcommands: simulate (scene plus fusion run), correct (misclassification
correction protocol), gait (friction-threshold gait choice), door
(bimodal affordance update), oracle (fixture regeneration), metrics
(standalone scoring).  Global flags: --config, --seed, --mode, --out.

Exit codes: 0 success, 2 configuration or usage error, 3 numerical
failure, 4 I/O failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .. import __version__
from ..errors import (
    ConfigError,
    DomainError,
    InvalidParameterError,
    MomentUndefinedError,
    PrecisionError,
    SempropError,
    SingularProjectionError,
)
from .experiments import run_config
from .metrics import compute_metrics
from .report import emit_report
from .scene import (
    ScenarioConfig,
    default_correction_config,
    default_door_config,
    default_gait_config,
    default_simulate_config,
    load_config,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_IO = 4

_DEFAULTS = {
    "simulate": default_simulate_config,
    "correct": default_correction_config,
    "gait": default_gait_config,
    "door": default_door_config,
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="semprop",
        description="Joint semantic-class and physical-property estimation experiments.",
    )
    parser.add_argument("--version", action="version", version=f"semprop {__version__}")
    parser.add_argument("--config", help="scenario config file (YAML)")
    parser.add_argument("--seed", type=int, help="override the config seed")
    parser.add_argument("--mode", choices=["paper", "corrected"],
                        help="moment-projection mode (default: paper unless config says otherwise)")
    parser.add_argument("--out", default="out", help="output directory (default: ./out)")
    parser.add_argument("--no-figures", action="store_true", help="skip figure rendering")

    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("simulate", "build a synthetic scene, fuse frames and measurements, report"),
        ("correct", "run the misclassification-correction protocol over many trials"),
        ("gait", "gait decision from expected friction after measurements"),
        ("door", "sequential bimodal door-affordance update"),
    ):
        p = sub.add_parser(name, help=help_text)
        if name == "correct":
            p.add_argument("--trials", type=int, help="number of seeded trials")
        if name == "gait":
            p.add_argument("--psi", type=float, nargs="+", help="measurement values")
            p.add_argument("--force-stream", help="replay (timestamp,f_t,f_n) CSV into one measurement")
        if name == "door":
            p.add_argument("--forces", type=float, nargs="+", help="door opening forces (N)")

    p = sub.add_parser("oracle", help="regenerate quadrature golden fixtures")
    p.add_argument("--fixtures", default=None, help="output fixture file (default: <out>/oracle_fixtures.json)")

    p = sub.add_parser("metrics", help="score a class-probability map against a truth map")
    p.add_argument("--pred", required=True, help=".npy (R,C,k) probability map")
    p.add_argument("--truth", required=True, help=".npy (R,C) 1-based truth map")
    return parser


def _scenario_config(args) -> ScenarioConfig:
    if args.config:
        config = load_config(args.config)
        if config.kind != args.command:
            config = ScenarioConfig.from_dict({**config.to_dict(), "kind": args.command})
    else:
        kwargs = {}
        if args.command == "correct" and getattr(args, "trials", None):
            kwargs["trials"] = args.trials
        config = _DEFAULTS[args.command](**kwargs)
    doc = config.to_dict()
    if args.seed is not None:
        doc["seed"] = args.seed
    if args.mode is not None:
        doc["mode"] = args.mode
    if args.command == "correct" and getattr(args, "trials", None):
        doc["trials"] = args.trials
    if args.command == "gait" and getattr(args, "psi", None):
        doc["measurements"] = {**doc["measurements"], "values": list(args.psi),
                               "count": len(args.psi)}
    if args.command == "gait" and getattr(args, "force_stream", None):
        from ..property_model import psi_from_force_stream, read_force_stream

        samples = read_force_stream(args.force_stream)
        psis = psi_from_force_stream(samples, psi_max=doc.get("psi_max", 2.0))
        doc["measurements"] = {**doc["measurements"], "values": [psis[-1]], "count": 1}
    if args.command == "door" and getattr(args, "forces", None):
        doc["measurements"] = {**doc["measurements"], "values": list(args.forces),
                               "count": len(args.forces)}
    return ScenarioConfig.from_dict(doc)


def _run_experiment(args):
    config = _scenario_config(args)
    report = run_config(config)
    written = emit_report(report, args.out, figures=not args.no_figures)
    for path in written:
        print(path)
    return EXIT_OK


def _run_oracle(args):
    from .fixtures import generate_fixtures

    out = Path(args.fixtures) if args.fixtures else Path(args.out) / "oracle_fixtures.json"
    out.parent.mkdir(parents=True, exist_ok=True)
    generate_fixtures(out)
    print(out)
    return EXIT_OK


def _run_metrics(args):
    pred = np.load(args.pred)
    truth = np.load(args.truth)
    record = compute_metrics(pred, truth)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    doc = record.as_dict()
    (out_dir / "metrics.json").write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")
    print(json.dumps(doc, sort_keys=True))
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command in _DEFAULTS:
            return _run_experiment(args)
        if args.command == "oracle":
            return _run_oracle(args)
        if args.command == "metrics":
            return _run_metrics(args)
        parser.error(f"unknown command {args.command!r}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (MomentUndefinedError, SingularProjectionError, InvalidParameterError,
            PrecisionError, DomainError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except SempropError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
