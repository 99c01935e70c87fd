"""Command line entry point: ``hgcondense condense|inspect``."""
import argparse
import logging
import sys

from .errors import CondenseError
from .pipeline import CondenseConfig, inspect, run


def _common(p):
    p.add_argument("input", help="graph directory")
    p.add_argument("--ratio", type=float, default=0.1)
    p.add_argument("--hops", type=int, default=2)
    p.add_argument("--pool", choices=("train", "all"), default="train")
    p.add_argument("--roles", metavar="FILE", help="'<type> <role>' overrides")


def build_parser():
    parser = argparse.ArgumentParser(prog="hgcondense")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    c = sub.add_parser("condense", help="condense a graph directory")
    _common(c)
    c.add_argument("output", help="output graph directory")
    c.add_argument("--alpha", type=float, default=0.15)
    c.add_argument("--epsilon", type=float, default=1e-4)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--report", metavar="FILE", help="JSON report path (text report beside it)")
    c.add_argument("--baseline", choices=("random",))
    c.add_argument("--threads", type=int, default=1)
    c.add_argument("--ppr-mode", choices=("push", "exact"), default="push")
    c.add_argument("--importance", choices=("ppr", "degree"), default="ppr")

    i = sub.add_parser("inspect", help="print one intermediate artefact")
    i.add_argument("what", choices=("metapaths", "hierarchy", "scores"))
    _common(i)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "inspect":
        cfg = CondenseConfig(args.input, ratio=args.ratio, hops=args.hops,
                             pool=args.pool, roles=args.roles)
        try:
            print(inspect(args.what, cfg))
        except (CondenseError, OSError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
        return 0

    cfg = CondenseConfig(
        args.input, args.output, ratio=args.ratio, hops=args.hops, alpha=args.alpha,
        epsilon=args.epsilon, pool=args.pool, seed=args.seed, roles=args.roles,
        report=args.report, baseline=args.baseline, threads=args.threads,
        ppr_mode=args.ppr_mode, importance=args.importance,
    )
    try:
        rep = run(cfg)
    except CondenseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    counts = ", ".join(f"{t}:{v['condensed']}" for t, v in rep["types"].items())
    print(f"condensed -> {cfg.output} ({counts})")
    return 0


if __name__ == "__main__":
    sys.exit(main())
