"""Command-line entry point: ``maee run|figure|motor-curves|selftest``."""

from __future__ import annotations

import argparse
import csv
import subprocess
import sys
import time
from pathlib import Path

from . import harness
from .motor import MotorParams, motor_curves


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", help="result file (default: stdout)")
    p.add_argument("--format", choices=("csv", "json"), help="result format (default csv)")
    p.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
    p.add_argument("--realizations", type=int, help="channel realizations per sweep point")
    p.add_argument("--threads", type=int, help="worker processes (1 = run in-process)")
    p.add_argument("--records", help="also write per-realization records (JSON) here")


def _apply_flags(config: harness.ExperimentConfig, args) -> harness.ExperimentConfig:
    changes = {}
    for name in ("seed", "realizations", "threads", "format"):
        value = getattr(args, name, None)
        if value is not None:
            changes[name] = value
    if args.out is not None:
        changes["output"] = args.out
    return config.with_(**changes) if changes else config


def _execute(config: harness.ExperimentConfig, args) -> int:
    t0 = time.perf_counter()
    records = harness.run_records(config)
    rows = harness.aggregate(config, records)
    text = harness.emit_results(rows, config.format, config.output)
    if config.output is None:
        sys.stdout.write(text)
    if args.records:
        Path(args.records).write_text(harness.records_json(records), encoding="utf-8")
    print(f"{len(rows)} rows from {len(records)} runs in {time.perf_counter() - t0:.1f} s",
          file=sys.stderr)
    return 0


def cmd_run(args) -> int:
    config = harness.load_config(args.config)
    return _execute(_apply_flags(config, args), args)


def cmd_figure(args) -> int:
    config = harness.figure_config(args.name, args.scale)
    return _execute(_apply_flags(config, args), args)


def cmd_motor_curves(args) -> int:
    params = MotorParams()
    omega, torque, power = motor_curves(params, num=args.points)
    out = open(args.out, "w", newline="", encoding="utf-8") if args.out else sys.stdout
    try:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(("omega", "speed", "torque", "power"))
        for o, m, p in zip(omega, torque, power):
            w.writerow([f"{x:.9g}" for x in (o, o * params.lead_radius, m, p)])
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def cmd_selftest(args) -> int:
    tests = Path(__file__).resolve().parents[2] / "tests"
    if not tests.is_dir():
        print("selftest needs a source checkout with the tests/ directory", file=sys.stderr)
        return 2
    cmd = [sys.executable, "-m", "pytest", "-q", str(tests)]
    if not args.all:
        cmd += ["-m", "not slow"]
    return subprocess.call(cmd)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="maee", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run an experiment described by a TOML config")
    p.add_argument("--config", required=True, help="TOML experiment file")
    _add_run_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("figure", help="run a preset figure sweep")
    p.add_argument("name", choices=sorted(harness.FIGURES, key=lambda s: int(s[3:])))
    p.add_argument("--scale", choices=tuple(harness.SCALES), default="desk")
    _add_run_flags(p)
    p.set_defaults(func=cmd_figure)

    p = sub.add_parser("motor-curves", help="pull-out torque and motor power versus speed")
    p.add_argument("--out", help="CSV file (default: stdout)")
    p.add_argument("--points", type=int, default=200)
    p.set_defaults(func=cmd_motor_curves)

    p = sub.add_parser("selftest", help="run the test suites")
    p.add_argument("--all", action="store_true", help="include slow tests")
    p.set_defaults(func=cmd_selftest)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except harness.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
