"""``pto-sched``: run the scheduling pipeline or any single stage of it."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from . import pipeline
from .schedopt import InfeasibleInstanceError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_STAGE = 4


def _parse_window(text: str) -> tuple[str, int]:
    """``YYYY-MM..YYYY-MM`` (inclusive) or a single ``YYYY-MM``."""
    from .datasim import parse_month

    a, _, b = text.partition("..")
    start = parse_month(a)
    end = parse_month(b) if b else start
    n = (end[0] - start[0]) * 12 + end[1] - start[1] + 1
    if n < 1:
        raise ValueError(f"month window {text!r} ends before it starts")
    return a, n


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pto-sched", description=__doc__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file; defaults apply to omitted keys")
    common.add_argument("--seed", type=int, help="override the simulation seed")
    common.add_argument("--months", help="evaluation window YYYY-MM..YYYY-MM")
    common.add_argument("--out", help="output directory")
    common.add_argument("--print-config", action="store_true",
                        help="print the effective config and exit")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    for name in (*pipeline.STAGES, "run"):
        sub.add_parser(name, parents=[common],
                       help="all stages in order" if name == "run" else f"the {name} stage")
    return p


def _effective_config(args) -> pipeline.PipelineConfig:
    cfg = pipeline.load_config(args.config) if args.config else pipeline.PipelineConfig()
    d = cfg.to_dict()
    if args.seed is not None:
        d["sim"]["seed"] = args.seed
    if args.out:
        d["out"] = args.out
    if args.months:
        try:
            start, n = _parse_window(args.months)
        except ValueError as exc:
            raise pipeline.ConfigError(f"--months: {exc}") from exc
        d["evaluation"]["start"] = start
        d["evaluation"]["n_months"] = n
    return pipeline.PipelineConfig.from_dict(d)


def _fail(code: int, kind: str, message: str, **extra) -> int:
    sys.stderr.write(json.dumps({"error": kind, "message": message, **extra}) + "\n")
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _effective_config(args)
    except pipeline.ConfigError as exc:
        return _fail(EXIT_CONFIG, "config", str(exc))
    if args.print_config:
        sys.stdout.write(pipeline.dump_config(cfg))
        return EXIT_OK
    stages = pipeline.STAGES if args.command == "run" else (args.command,)
    try:
        for stage in stages:
            info = pipeline.run_stage(cfg, stage)
            if args.verbose:
                sys.stdout.write(f"{stage}: {json.dumps(info, sort_keys=True)}\n")
    except pipeline.ConfigError as exc:
        return _fail(EXIT_CONFIG, "config", str(exc))
    except InfeasibleInstanceError as exc:
        return _fail(EXIT_INFEASIBLE, "infeasible", str(exc), report=exc.report)
    except pipeline.DependencyError as exc:
        return _fail(EXIT_STAGE, "dependency", str(exc), stage=stage)
    except Exception as exc:  # noqa: BLE001 - surface any stage failure as a structured error
        return _fail(EXIT_STAGE, "stage", f"{type(exc).__name__}: {exc}", stage=stage)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
