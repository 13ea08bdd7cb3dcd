"""``stbusv`` command line: run, regress, analyze, suite."""
from __future__ import annotations

import argparse
import os
import sys

from .analyzer import AnalyzerError, compare_files
from .interconnect.config import InvalidConfig
from .regression.config_io import ParseError, load_config_full
from .regression.runner import (DEFAULT_SEEDS, MODELS, RegressionError, RunSpec, run_matrix,
                                run_test)
from .regression.suite import suite
from .vcdio import VcdError
from .verif.report import render_text

EXIT_FAIL = 1
EXIT_ERROR = 2


def _cmd_run(args) -> int:
    loaded = load_config_full(args.config)
    spec = RunSpec(loaded.node, args.test, args.seed, args.model, args.out,
                   args.txns or loaded.stop_txns, args.cycles or loaded.stop_cycles)
    rep = run_test(spec)
    sys.stdout.write(render_text(rep.report))
    print(f"outputs in {spec.run_dir()}  ({rep.wall_time:.2f}s)")
    return 0 if rep.verdict == "PASS" else EXIT_FAIL


def _cmd_regress(args) -> int:
    tests = args.tests.split(",") if args.tests else None

    def progress(row):
        if not args.quiet:
            print(f"{row['config']:<40} {row['test']} seed {row['seed']:<3} {row['status']}",
                  flush=True)

    summary = run_matrix(args.config_dir, tests, args.seeds, args.out, args.jobs,
                         args.threshold, progress)
    with open(os.path.join(args.out, "summary.txt"), encoding="utf-8") as f:
        sys.stdout.write(f.read())
    print(f"wall time {summary['wall_time']:.1f}s")
    return 0 if summary["verdict"] == "PASS" else EXIT_FAIL


def _cmd_analyze(args) -> int:
    rep = compare_files(args.a, args.b, args.period, args.threshold)
    sys.stdout.write(rep.render_text())
    if args.report:
        with open(args.report, "w", encoding="utf-8") as f:
            f.write(rep.to_json())
    return 0 if rep.verdict == "PASS" else EXIT_FAIL


def _cmd_suite(args) -> int:
    for t in suite():
        cond = f"  [meaningful under {t.policy.name}]" if t.policy else ""
        print(f"{t.id}  {t.description}  (stop: {t.stop_txns} txns or "
              f"{t.stop_cycles} cycles){cond}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="stbusv", description=__doc__)
    sub = p.add_subparsers(dest="cmd", required=True)

    r = sub.add_parser("run", help="one test on one engine")
    r.add_argument("--config", required=True)
    r.add_argument("--test", required=True)
    r.add_argument("--seed", type=int, default=1)
    r.add_argument("--model", choices=MODELS, default="ca")
    r.add_argument("--out", default="out")
    r.add_argument("--txns", type=int, help="override the transaction stop condition")
    r.add_argument("--cycles", type=int, help="override the cycle budget")
    r.set_defaults(func=_cmd_run)

    g = sub.add_parser("regress", help="config x test x seed matrix on both engines")
    g.add_argument("--config-dir", required=True)
    g.add_argument("--seeds", type=int, default=DEFAULT_SEEDS)
    g.add_argument("--jobs", type=int, default=1)
    g.add_argument("--out", default="regress")
    g.add_argument("--tests", help="comma-separated test ids (default: all twelve)")
    g.add_argument("--threshold", type=float, default=0.99)
    g.add_argument("--quiet", action="store_true")
    g.set_defaults(func=_cmd_regress)

    a = sub.add_parser("analyze", help="per-port alignment of two VCD files")
    a.add_argument("a")
    a.add_argument("b")
    a.add_argument("--period", type=int, default=10)
    a.add_argument("--threshold", type=float, default=0.99)
    a.add_argument("--report", help="write the JSON report here")
    a.set_defaults(func=_cmd_analyze)

    s = sub.add_parser("suite", help="describe the twelve tests")
    s.add_argument("--list", action="store_true", help="list the tests (the default)")
    s.set_defaults(func=_cmd_suite)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ParseError, InvalidConfig, RegressionError, AnalyzerError, VcdError, KeyError,
            OSError) as e:
        print(f"stbusv: error: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
