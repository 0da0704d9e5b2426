"""Command line front end: run, converge, table, selftest.

All commands except selftest take a flat ``key = value`` config file; common
fields can be overridden with flags, anything else with ``--set key=value``.
Exit status is 0 on success, 1 on a runtime failure (blow-up, bad reference),
2 on a configuration mistake.
"""
from __future__ import annotations

import argparse
import sys

from . import harness
from .errors import StabilityFailure

OVERRIDE_FLAGS = (
    "epsilon", "t_final", "delta_t", "scheme", "init", "mode",
    "tension", "n_points", "output_dir",
)


def _floats(text: str) -> list[float]:
    return [float(p) for p in text.replace(",", " ").split()]


def _add_config_arguments(p: argparse.ArgumentParser):
    p.add_argument("config", help="flat key = value config file")
    p.add_argument("--epsilon", type=float, help="override epsilon")
    p.add_argument("--t-final", dest="t_final", type=float, help="override t_final")
    p.add_argument("--delta-t", dest="delta_t", type=float, help="override delta_t")
    p.add_argument("--scheme", choices=harness.SCHEMES, help="override scheme")
    p.add_argument("--init", choices=("corrected", "plain"), help="override init")
    p.add_argument("--mode", choices=("linear", "poisson"), help="override mode")
    p.add_argument("--tension", help="override tension")
    p.add_argument("--n-points", dest="n_points", type=int, help="override n_points")
    p.add_argument("--output-dir", dest="output_dir", help="override output_dir")
    p.add_argument(
        "--set",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override any other config entry",
    )


def _load_config(args) -> harness.RunConfig:
    overrides = {name: getattr(args, name) for name in OVERRIDE_FLAGS}
    for item in args.set:
        if "=" not in item:
            raise ValueError(f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        overrides[key.strip()] = value.strip()
    return harness.RunConfig.from_file(args.config, overrides)


def _cmd_run(args) -> int:
    config = _load_config(args)
    result = harness.run(config)
    last = result.records[-1]
    print(
        f"{config.scheme}: t = {last.time:.6g}  dt = {result.dt:.6g}  "
        f"steps = {result.n_steps}  rms = {last.rms:.9g}  mass = {last.mass:.9g}"
    )
    print(f"outputs in {result.output_dir}")
    return 0


def _cmd_converge(args) -> int:
    config = _load_config(args)
    rows, slopes = harness.convergence_study(
        config, args.dt, args.eps, cache_dir=args.reference_cache
    )
    print("epsilon        dt             error")
    for eps, dt, err in rows:
        print(f"{eps:<14.6g} {dt:<14.6g} {err:.6e}")
    for eps, slope in slopes:
        print(f"slope at epsilon = {eps:g}: {slope:.3f}")
    return 0


def _cmd_table(args) -> int:
    config = _load_config(args)
    rows = harness.table_study(config, args.eps, cache_dir=args.reference_cache)
    print("epsilon        ap             second_order   limit")
    for eps, e_ap, e_second, e_limit in rows:
        print(f"{eps:<14.6g} {e_ap:<14.6e} {e_second:<14.6e} {e_limit:.6e}")
    return 0


def _cmd_selftest(args) -> int:
    return harness.selftest(verbose=not args.quiet)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="vlasov-ap",
        description="two-scale asymptotic preserving solver for the paraxial beam",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="execute one run and write its outputs")
    _add_config_arguments(p)
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("converge", help="error sweep over (epsilon, dt)")
    _add_config_arguments(p)
    p.add_argument("--dt", type=_floats, required=True, help="comma separated dt list")
    p.add_argument("--eps", type=_floats, required=True, help="comma separated epsilon list")
    p.add_argument("--reference-cache", help="directory memoizing reference runs")
    p.set_defaults(func=_cmd_converge)

    p = sub.add_parser("table", help="error table of ap and models vs fine splitting")
    _add_config_arguments(p)
    p.add_argument(
        "--eps",
        type=_floats,
        default=list(harness.TABLE_EPSILONS),
        help="comma separated epsilon list",
    )
    p.add_argument("--reference-cache", help="directory memoizing reference runs")
    p.set_defaults(func=_cmd_table)

    p = sub.add_parser("selftest", help="run the invariant suite")
    p.add_argument("--quiet", action="store_true", help="suppress per-check lines")
    p.set_defaults(func=_cmd_selftest)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (StabilityFailure, ZeroDivisionError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
