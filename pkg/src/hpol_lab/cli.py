"""``hpol-lab <experiment> --config <file> [--out <dir>] [--seed <int>] [--threads <int>]``."""

from __future__ import annotations

import argparse
import logging
import sys

from hpol_lab.experiments.config import EXPERIMENTS, ConfigError, load
from hpol_lab.experiments.report import write_report
from hpol_lab.experiments.runners import run
from hpol_lab.torus import DomainError, NumericError

log = logging.getLogger("hpol_lab")


def build_parser():
    ap = argparse.ArgumentParser(prog="hpol-lab",
                                 description="Polynomial entropy experiments on Tonelli tori.")
    ap.add_argument("experiment", choices=EXPERIMENTS)
    ap.add_argument("--config", required=True, help="key=value config file")
    ap.add_argument("--out", default="out", help="output directory (default: ./out)")
    ap.add_argument("--seed", type=int, default=None, help="overrides the config seed")
    ap.add_argument("--threads", type=int, default=None, help="overrides the config threads")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = load(args.config)
        if cfg.experiment != args.experiment:
            raise ConfigError(f"config is for {cfg.experiment!r}, not {args.experiment!r}")
        changes = {k: v for k, v in (("seed", args.seed), ("threads", args.threads))
                   if v is not None}
        cfg = cfg.replace(**changes)
    except (OSError, ConfigError) as exc:
        print(f"hpol-lab: config error: {exc}", file=sys.stderr)
        return 2

    log.info("running %s", cfg.experiment)
    try:
        report = run(cfg)
    except (DomainError, NumericError) as exc:
        print(f"hpol-lab: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    paths = write_report(report, args.out)
    if cfg.plots:
        from hpol_lab.experiments.plotting import render

        paths += render(report, args.out)

    verdict = {True: "PASS", False: "FAIL", None: "INCONCLUSIVE"}[report.passed]
    print(f"{cfg.experiment}: {verdict} ({report.elapsed:.1f} s)")
    if cfg.experiment == "property_suite":
        for row in report.summary["checks"]:
            mark = {True: "pass", False: "FAIL", None: "n/a"}[row["passed"]]
            print(f"  {row['name']:<20} {mark}")
    for p in paths:
        print(f"  wrote {p}")
    return 1 if report.passed is False else 0


if __name__ == "__main__":
    sys.exit(main())
