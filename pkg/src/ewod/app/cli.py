"""``ewod-sim`` command line entry point."""

from __future__ import annotations

import argparse
import sys

from .config import ConfigError, parse_config, serialize_config
from .presets import PRESET_NAMES
from .runner import EXIT_CONFIG, EXIT_IO, run


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ewod-sim", description="2D electrowetting phase-field simulator")
    p.add_argument("--config", help="key = value configuration file (defaults: coarse move preset)")
    p.add_argument("--preset", choices=PRESET_NAMES)
    p.add_argument("--steps", type=int)
    p.add_argument("--out")
    p.add_argument("--vtk-every", type=int)
    p.add_argument("--mode", choices=("split", "coupled"))
    p.add_argument("--print-config", action="store_true", help="print the resolved configuration and exit")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    text = ""
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as e:
            print(f"error: cannot read {args.config}: {e}", file=sys.stderr)
            return EXIT_IO
    # command-line options override the file
    overrides = {"run.preset": args.preset, "run.steps": args.steps, "run.out": args.out,
                 "run.vtk_every": args.vtk_every, "scheme.mode": args.mode}
    lines = [ln for ln in text.splitlines() if ln.split("#", 1)[0].split("=", 1)[0].strip() not in
             {k for k, v in overrides.items() if v is not None}]
    lines += [f"{k} = {v}" for k, v in overrides.items() if v is not None]
    try:
        cfg = parse_config("\n".join(lines))
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    if args.print_config:
        sys.stdout.write(serialize_config(cfg))
        return 0
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
