"""``simulate`` command line entry point.

Exit codes: 0 success, 1 config error, 2 at least one method failed.
"""

import argparse
import contextlib
import logging
import sys

from .experiments import (
    METHODS,
    ConfigError,
    aggregate,
    parse_config,
    run_convergence,
    run_sweep,
    write_convergence_csv,
    write_csv,
)

log = logging.getLogger("hirs_relay.cli")


def build_parser():
    p = argparse.ArgumentParser(prog="simulate", description="Monte-Carlo rate sweeps for the hybrid IRS relay link.")
    p.add_argument("--config", required=True, help="key = value config file")
    p.add_argument("--out", required=True, help="output CSV path ('-' for stdout)")
    p.add_argument("--sweep", choices=["ps", "pi", "k"], help="override the swept parameter")
    p.add_argument("--values", help="override the swept values, comma separated")
    p.add_argument("--trials", type=int, help="trials per sweep point")
    p.add_argument("--seed", type=int, help="base seed")
    p.add_argument("--methods", help=f"comma-separated subset of {','.join(METHODS)}")
    p.add_argument("--convergence", action="store_true", help="write per-iteration traces at the first sweep point")
    p.add_argument("--timing", action="store_true", help="fill the wall_ms column (output no longer reproducible)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _load(args):
    try:
        with open(args.config) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    exp = parse_config(text)
    changes = {}
    if args.sweep:
        changes["sweep"] = args.sweep
    if args.values:
        try:
            changes["values"] = tuple(float(v) for v in args.values.split(",") if v.strip())
        except ValueError:
            raise ConfigError(f"cannot parse --values {args.values!r}") from None
    if args.trials is not None:
        changes["trials"] = args.trials
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.methods:
        changes["methods"] = tuple(m.strip() for m in args.methods.split(",") if m.strip())
    if changes:
        try:
            exp = exp.replace(**changes)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"command-line override: {exc}") from None
    return exp


@contextlib.contextmanager
def _open_out(path):
    if path == "-":
        yield sys.stdout
        return
    with open(path, "w", newline="") as fh:
        yield fh


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        exp = _load(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1

    if args.convergence:
        try:
            rows, _ = run_convergence(exp)
        except Exception as exc:  # any optimizer failure is a method failure here
            print(f"method failure: {exc}", file=sys.stderr)
            return 2
        with _open_out(args.out) as fh:
            write_convergence_csv(rows, fh)
        return 0

    rows = run_sweep(exp, timing=args.timing,
                     progress=lambda p, t: log.info("point %d trial %d done", p, t))
    with _open_out(args.out) as fh:
        write_csv(rows, fh, timing=args.timing)
    if args.verbose:
        for (value, method), (mean, se, n) in sorted(aggregate(rows).items(), key=lambda kv: (kv[0][0], METHODS.index(kv[0][1]))):
            log.info("%s=%g %-13s %.4f +/- %.4f (n=%d)", exp.swept_param, value, method, mean, se, n)
    failed = [r for r in rows if r.status != "ok"]
    if failed:
        print(f"{len(failed)} method run(s) failed", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
