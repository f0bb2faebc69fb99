"""Command line entry point: ``laminate run|verify|cone-table|k-vs-l``."""
from __future__ import annotations

import argparse
import json
import logging
import sys

from . import __version__
from . import runner


def _floats(text):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated numbers, got {text!r}") from None


def _cmd_run(args) -> int:
    try:
        cfg = runner.load_config(args.config)
    except runner.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return runner.EXIT_CONFIG
    code = runner.run(cfg)
    print(f"{'ok' if code == 0 else 'failed'} (exit {code}): {cfg.output_dir}")
    return code


def _cmd_verify(args) -> int:
    code, results = runner.verify(args.dir)
    width = max(len(r.name) for r in results)
    for r in results:
        print(f"{r.name:<{width}}  {'PASS' if r.passed else 'FAIL'}  {r.detail}")
    return code


def _cmd_cone_table(args) -> int:
    from .hyperbolic import cone_profile, flux_residual, sandwich_constants
    print("n,p,t,f_p,lower,upper")
    bad = False
    for p in args.p_list:
        try:
            prof = cone_profile(args.n, p, args.t_max, args.steps)
        except ValueError as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return runner.EXIT_CONFIG
        lo, hi = prof.bounds()
        for row in zip(prof.grid, prof.values, lo, hi):
            print(f"{args.n},{p:g}," + ",".join(f"{x:.12g}" for x in row))
        a, b = sandwich_constants(args.n, p, args.t_max)
        ok = prof.sandwich_ok()
        bad |= not ok
        print(f"# n={args.n} p={p:g} a={a:.6g} b={b:.6g} sandwich={'ok' if ok else 'VIOLATED'} "
              f"flux_residual={flux_residual(prof):.2e}", file=sys.stderr)
    return runner.EXIT_INVARIANT if bad else runner.EXIT_OK


def _cmd_k_vs_l(args) -> int:
    code, doc = runner.k_vs_l(args.dir)
    if code:
        print(f"missing limits.json in {args.dir}", file=sys.stderr)
        return code
    print(json.dumps(doc, indent=1, sort_keys=True))
    return runner.EXIT_INVARIANT if doc["K_hat"] > doc["L_hat"] * (1 + doc["kl_tol"]) else runner.EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="laminate", description=__doc__)
    ap.add_argument("--version", action="version", version=f"laminate {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", help="solve and analyze from a JSON config")
    p.add_argument("config")
    p.set_defaults(func=_cmd_run)
    p = sub.add_parser("verify", help="re-check a stored artifact tree")
    p.add_argument("dir")
    p.set_defaults(func=_cmd_verify)
    p = sub.add_parser("cone-table", help="print hyperbolic cone profiles as CSV")
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--p-list", type=_floats, default=[8.0, 32.0, 128.0])
    p.add_argument("--t-max", type=float, default=2.0)
    p.add_argument("--steps", type=int, default=16)
    p.set_defaults(func=_cmd_cone_table)
    p = sub.add_parser("k-vs-l", help="print the K / L comparison of a run")
    p.add_argument("dir")
    p.set_defaults(func=_cmd_k_vs_l)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
