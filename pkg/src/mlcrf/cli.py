"""Command-line interface: ``mlcrf propose|refine|evaluate|gridsearch|synth``."""

from __future__ import annotations

import argparse
import sys

from .config import PRESETS, build_run_config, config_to_text
from .metrics import format_table
from .pipeline import (
    format_grid_table,
    run_evaluate,
    run_gridsearch,
    run_propose,
    run_refine,
    run_synth,
    write_metrics,
)


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--preset", choices=sorted(PRESETS), help="dataset parameter preset")
    parser.add_argument("--config", help="flat key=value config file")
    parser.add_argument(
        "--set", action="append", default=[], metavar="KEY=VALUE",
        help="override one config key (repeatable)",
    )


def _run_config(args: argparse.Namespace):
    config_text = None
    if args.config:
        with open(args.config) as fh:
            config_text = fh.read()
    extra = "\n".join(args.set) if args.set else None
    if extra:
        config_text = (config_text + "\n" + extra) if config_text else extra
    return build_run_config(preset=args.preset, config_text=config_text)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mlcrf",
        description="Multi-level waste segmentation refinement: region "
        "proposals plus dense-CRF inference over appearance, spatial, and "
        "depth affinities.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("propose", help="generate region proposals and manifests")
    p.add_argument("--root", required=True, help="dataset directory")
    p.add_argument("--out", required=True, help="output directory")
    _add_config_flags(p)

    p = sub.add_parser("refine", help="fuse unaries and run CRF inference")
    p.add_argument("--root", required=True, help="dataset directory (with manifests)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument(
        "--depth", default=None, metavar="DIR|none",
        help="depth directory, or 'none' to disable the depth term "
        "(default: <root>/depth when present)",
    )
    p.add_argument(
        "--filter", choices=("fast", "bruteforce"), default="fast",
        help="message-passing filter implementation",
    )
    p.add_argument("--verbose", action="store_true", help="print per-image diagnostic energy")
    _add_config_flags(p)

    p = sub.add_parser("evaluate", help="score predicted masks against ground truth")
    p.add_argument("--pred", required=True, help="directory of predicted masks")
    p.add_argument("--truth", required=True, help="directory of ground-truth masks")
    p.add_argument("--out", default=None, help="also write metrics.txt/json here")

    p = sub.add_parser("gridsearch", help="exhaustive CRF parameter search")
    p.add_argument("--root", required=True, help="validation dataset directory")
    p.add_argument(
        "--grid", action="append", required=True, metavar="KEY=V1,V2,...",
        help="one grid axis (repeatable, searched in the given order)",
    )
    p.add_argument("--out", default=None, help="write grid table and best config here")
    p.add_argument("--filter", choices=("fast", "bruteforce"), default="fast")
    _add_config_flags(p)

    p = sub.add_parser("synth", help="generate a synthetic validation dataset")
    p.add_argument("--out", required=True, help="output dataset directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count", type=int, default=20)
    p.add_argument("--size", type=int, default=64)
    p.add_argument("--noise", type=float, default=1.0)
    p.add_argument(
        "--camouflage", action="store_true",
        help="color-camouflaged objects separable only by depth",
    )
    _add_config_flags(p)

    return parser


def _parse_grid(entries: list[str]) -> dict[str, list[float]]:
    grid: dict[str, list[float]] = {}
    for entry in entries:
        if "=" not in entry:
            raise SystemExit(f"--grid expects KEY=V1,V2,..., got {entry!r}")
        key, values = entry.split("=", 1)
        grid[key.strip()] = [float(v) for v in values.split(",") if v.strip()]
    return grid


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)

    if args.command == "propose":
        counts = run_propose(args.root, args.out, _run_config(args))
        total = sum(counts.values())
        print(f"proposed {total} regions over {len(counts)} images")
        return 0

    if args.command == "refine":
        ids = run_refine(
            args.root, args.out, _run_config(args),
            depth_dir=args.depth, filter_impl=args.filter, verbose=args.verbose,
        )
        print(f"refined {len(ids)} images -> {args.out}")
        return 0

    if args.command == "evaluate":
        counts, _ = run_evaluate(args.pred, args.truth)
        print(format_table(counts))
        if args.out:
            write_metrics(counts, args.out)
        return 0

    if args.command == "gridsearch":
        best, rows = run_gridsearch(
            args.root, _parse_grid(args.grid), _run_config(args), filter_impl=args.filter,
        )
        table = format_grid_table(rows)
        print(table)
        print("\nbest configuration:")
        print(config_to_text(best), end="")
        if args.out:
            import json
            import os

            os.makedirs(args.out, exist_ok=True)
            with open(os.path.join(args.out, "grid.json"), "w") as fh:
                json.dump(rows, fh, indent=2, sort_keys=True)
                fh.write("\n")
            with open(os.path.join(args.out, "grid.txt"), "w") as fh:
                fh.write(table + "\n")
            with open(os.path.join(args.out, "best_config.txt"), "w") as fh:
                fh.write(config_to_text(best))
        return 0

    if args.command == "synth":
        ids = run_synth(
            args.out, seed=args.seed, count=args.count, size=args.size,
            noise=args.noise, camouflage=args.camouflage, run=_run_config(args),
        )
        print(f"wrote {len(ids)} synthetic scenes -> {args.out}")
        return 0

    raise AssertionError(f"unhandled command {args.command}")


if __name__ == "__main__":
    sys.exit(main())
