"""Command-line entry point: scatrel <subcommand> --config <path> [options]."""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from .harness import ConfigError, load_config, run

SUBCOMMANDS = ("gen-data", "ground-truth", "decode", "compare", "report")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="scatrel",
        description=(
            "Recover the scattering relation of an unknown interior metric "
            "from one pseudorandom-noise boundary measurement."
        ),
    )
    parser.add_argument("subcommand", choices=SUBCOMMANDS)
    parser.add_argument("--config", required=True, help="experiment config file")
    parser.add_argument("--mode", choices=("oracle", "blind", "both"),
                        help="override run.mode")
    parser.add_argument("--out", help="override run.out output directory")
    parser.add_argument("--jobs", type=int, default=1,
                        help="parallel workers for per-entry decoding")
    parser.add_argument(
        "--seedless",
        action="store_true",
        help="assert that the pipeline holds no random state (always true; "
        "sources and probes are deterministic)",
    )
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config)
        if args.mode:
            cfg = replace(cfg, mode=args.mode)
        if args.out:
            cfg = replace(cfg, out_dir=args.out)
        cfg.validate()
        run(cfg, args.subcommand, jobs=args.jobs)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
