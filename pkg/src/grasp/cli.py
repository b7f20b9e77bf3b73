"""``grasp`` command line.

Exit status: 0 ok, 1 partial failure, 2 configuration error, 3 bridge
protocol error. Set ``GRASP_LOG`` (DEBUG, INFO, WARNING...) for verbosity.
"""
from __future__ import annotations

import argparse
import logging
import sys

from .config import COMMANDS, SWEEP_AXES, log_level, parse_overrides, resolve
from .errors import ConfigError, GraspError, ProtocolError
from .runner import run

EXIT_OK, EXIT_PARTIAL, EXIT_CONFIG, EXIT_PROTOCOL = 0, 1, 2, 3


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="grasp", description="Protect images against manipulation models.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("inputs", nargs="*", help="image files or directories")
    p.add_argument("--config", help="flat 'key = value' config file")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override any config key (repeatable)")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--model", help="builtin model: identity, affine or conv")
    src.add_argument("--bridge", help="model bridge endpoint: tcp://HOST:PORT or exec:COMMAND")
    p.add_argument("--seed", type=int, help="model seed")
    p.add_argument("--epsilon", type=float)
    p.add_argument("--iters", type=int, help="number of iterations")
    p.add_argument("--kappa", type=float, help="step size")
    p.add_argument("--jobs", type=int, help="worker threads")
    p.add_argument("--out", help="output directory")
    p.add_argument("--size", type=int, help="resize inputs to SIZE x SIZE")
    p.add_argument("--adv", help="directory of <stem>_adv.png files (evaluate, robustness)")
    p.add_argument("--axis", choices=sorted(SWEEP_AXES), help="sweep axis")
    p.add_argument("--values", help="comma-separated sweep values")
    p.add_argument("--rows", help="comma-separated ablation rows")
    p.add_argument("--battery", help="comma-separated transforms, e.g. gaussian_blur:3,rotate:45")
    return p


def _flags(args) -> dict:
    overrides = {
        "model.name": args.model,
        "model.bridge": args.bridge,
        "model.seed": args.seed,
        "epsilon": args.epsilon,
        "iterations": args.iters,
        "kappa": args.kappa,
        "run.jobs": args.jobs,
        "run.out": args.out,
        "image.size": args.size,
        "sweep.axis": args.axis,
    }
    # list-valued flags go through the same parser as config files
    text = {"sweep.values": args.values, "ablation.rows": args.rows, "robustness.battery": args.battery}
    overrides.update(parse_overrides(f"{k}={v}" for k, v in text.items() if v is not None))
    return overrides


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=getattr(logging, log_level(), logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        cfg = resolve(args.command, args.inputs, args.config, parse_overrides(args.set),
                      _flags(args), args.adv)
        return run(cfg)
    except ConfigError as exc:
        print(f"grasp: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ProtocolError as exc:
        print(f"grasp: bridge protocol error: {exc}", file=sys.stderr)
        return EXIT_PROTOCOL
    except GraspError as exc:
        print(f"grasp: {exc}", file=sys.stderr)
        return EXIT_PARTIAL


if __name__ == "__main__":
    sys.exit(main())
