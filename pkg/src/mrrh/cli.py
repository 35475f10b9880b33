"""Command line entry point: ``mrrh run | sweep | bounds``.

Exit codes: 0 success, 1 configuration error, 2 runtime failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys

from mrrh import analysis
from mrrh.errors import InvalidConfigError, InvalidInputError
from mrrh.harness import ExperimentConfig, canonical_json, emit_csv, emit_json, run_experiment
from mrrh.topology import derive_channel_count

log = logging.getLogger("mrrh")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2

DEFAULT_SWEEP = (512, 1024, 2048, 4096, 8192)


class _ConfigExit(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage; bad usage is a config error here
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _ConfigExit(f"{self.prog}: error: {message}")


def parse_int_list(text: str) -> list[int]:
    """``"512,1024"`` or ``"1..5"`` (inclusive) or a mix of both."""
    out = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            if ".." in part:
                lo, hi = part.split("..", 1)
                lo, hi = int(lo), int(hi)
                if hi < lo:
                    raise ValueError
                out.extend(range(lo, hi + 1))
            else:
                out.append(int(part))
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad integer list: {text!r}") from None
    if not out:
        raise argparse.ArgumentTypeError(f"empty integer list: {text!r}")
    return out


def _add_common(p):
    p.add_argument("--pairs", type=int, help="source/destination pairs per run (default N/2)")
    p.add_argument("--lambda", dest="lam", type=float, default=1.0, help="throughput, bits/s")
    p.add_argument("--eta0", type=float, default=1.0, help="noise density, W/Hz")
    p.add_argument("--d", type=float, default=2.0, help="path-loss exponent")
    geo = p.add_mutually_exclusive_group()
    geo.add_argument("--density", type=float, help="nodes per m^2 (default 1)")
    geo.add_argument("--radius", type=float, help="fixed sphere radius, m")
    p.add_argument("--hop-limit", type=int)
    p.add_argument("--no-nnc", action="store_true", help="skip the nearest-neighbor baseline")
    p.add_argument("--no-phy", action="store_true", help="skip TDMA/provisioning checks")
    p.add_argument("--no-bounds", action="store_true", help="skip lower bounds")
    p.add_argument("--convention", choices=("smallest", "largest"), default="smallest",
                   help="channel attribution used for the usage column")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", help="JSON report path (stdout if omitted)")
    p.add_argument("--csv", help="CSV summary path")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mrrh", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="one or more (N, seed) runs")
    run.add_argument("--config", help="JSON file with ExperimentConfig fields")
    run.add_argument("--n", type=parse_int_list, default=None)
    run.add_argument("--seed", type=parse_int_list, default=None)
    _add_common(run)

    sweep = sub.add_parser("sweep", help="N x seeds sweep")
    sweep.add_argument("--n", type=parse_int_list, default=list(DEFAULT_SWEEP))
    sweep.add_argument("--seeds", type=parse_int_list, default=[1, 2, 3, 4, 5])
    _add_common(sweep)

    bounds = sub.add_parser("bounds", help="closed-form lower bounds only")
    bounds.add_argument("--n", type=int, required=True)
    bounds.add_argument("--latency", type=float, required=True, help="average hops L")
    bounds.add_argument("--k", type=int, help="channel count (default from N)")
    bounds.add_argument("--lambda", dest="lam", type=float, default=1.0)
    bounds.add_argument("--eta0", type=float, default=1.0)
    bounds.add_argument("--d", type=float, default=2.0)
    geo = bounds.add_mutually_exclusive_group()
    geo.add_argument("--density", type=float)
    geo.add_argument("--radius", type=float)
    return parser


def _config_from_args(args, ns, seeds) -> ExperimentConfig:
    return ExperimentConfig(
        n=tuple(ns), seeds=tuple(seeds), radius=args.radius, density=args.density,
        pairs=args.pairs, lam=args.lam, eta0=args.eta0, d=args.d,
        hop_limit=args.hop_limit, json_path=args.out, csv_path=args.csv,
        run_nnc=not args.no_nnc, run_phy=not args.no_phy, run_bounds=not args.no_bounds,
        lemma7_channel_convention=args.convention, workers=args.workers,
    )


def _experiment(config: ExperimentConfig) -> int:
    report = run_experiment(config)
    if config.json_path:
        emit_json(report, config.json_path)
        log.info("wrote %s", config.json_path)
    else:
        sys.stdout.write(canonical_json(report))
    if config.csv_path:
        emit_csv(report, config.csv_path)
        log.info("wrote %s", config.csv_path)
    return EXIT_OK


def _bounds(args) -> int:
    if args.radius is not None:
        radius = args.radius
    else:
        rho = 1.0 if args.density is None else args.density
        if not rho > 0:
            raise InvalidConfigError("density must be > 0")
        radius = math.sqrt(args.n / (4.0 * math.pi * rho))
    K = args.k if args.k is not None else derive_channel_count(args.n)
    inp = analysis.BoundInputs(args.lam, args.latency, args.n, K, radius, args.eta0, args.d)
    out = {
        "n": args.n, "k_channels": K, "latency": args.latency, "radius": radius,
        "p_lower_bound": analysis.power_lower_bound(inp),
        "b_lower_bound": analysis.bandwidth_lower_bound(inp),
        "p_lower_bound_density_form": analysis.power_lower_bound_density_form(
            inp, args.n / (4.0 * math.pi * radius**2)),
    }
    sys.stdout.write(json.dumps(out, sort_keys=True, indent=1) + "\n")
    return EXIT_OK


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except _ConfigExit as exc:
        print(exc, file=sys.stderr)
        return EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "bounds":
            return _bounds(args)
        if args.command == "run":
            if args.config:
                config = ExperimentConfig.from_file(args.config)
            else:
                config = _config_from_args(args, args.n or [1024], args.seed or [1])
        else:
            config = _config_from_args(args, args.n, args.seeds)
    except (InvalidConfigError, InvalidInputError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return _experiment(config)
    except (InvalidConfigError, InvalidInputError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
