"""Command-line front end.

Commands:
  run        execute an experiment from a JSON config file
  plot       render convergence traces to an SVG chart
  reference  compute (and cache) the reference optimum of a dataset
  check      run the built-in quick verification suites

Exit codes: 0 ok, 1 solver failure, 2 usage or I/O error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .continuation import HandoverViolationError
from .harness import ExperimentConfig, SolverFailure, plot, reference_optimum, run
from .newton import LineSearchStallError
from .objective import LossKind


def _cmd_run(args) -> int:
    cfg_path = Path(args.config)
    if not cfg_path.exists():
        print(f"error: config file not found: {cfg_path}", file=sys.stderr)
        return 2
    try:
        cfg = ExperimentConfig.from_dict(json.loads(cfg_path.read_text()))
    except (json.JSONDecodeError, TypeError, ValueError) as exc:
        print(f"error: bad config: {exc}", file=sys.stderr)
        return 2
    if args.out is not None:
        cfg.out_dir = args.out
    try:
        result = run(cfg)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (HandoverViolationError, LineSearchStallError, SolverFailure) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 1
    status = "converged" if result.converged else "stopped before tolerance"
    print(f"{cfg.solver}: {status} after {result.epochs:.2f} effective epochs; "
          f"artifacts in {result.out_dir}")
    return 0 if result.converged else 1


def _cmd_plot(args) -> int:
    try:
        out = plot(args.traces, args.out, x_axis=args.x_axis, labels=args.labels,
                   stat_line=args.stat_line, title=args.title)
    except (FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {out}")
    return 0


def _cmd_reference(args) -> int:
    from .dataset import load_svmlight
    path = Path(args.dataset)
    if not path.exists():
        print(f"error: dataset file not found: {path}", file=sys.stderr)
        return 2
    ds = load_svmlight(path)
    try:
        value, hit = reference_optimum(ds, args.nu, LossKind(args.loss))
    except SolverFailure as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 1
    print(f"{value:.17g}{'  (cached)' if hit else ''}")
    return 0


def _cmd_check(_args) -> int:
    from .selfcheck import run_checks
    return 0 if run_checks() else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="newtonpath", description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", required=True)

    pr = sub.add_parser("run", help="run an experiment from a JSON config")
    pr.add_argument("--config", required=True)
    pr.add_argument("--out", default=None, help="override the config's out_dir")
    pr.set_defaults(fn=_cmd_run)

    pp = sub.add_parser("plot", help="render trace CSVs to an SVG chart")
    pp.add_argument("traces", nargs="+")
    pp.add_argument("--out", required=True)
    pp.add_argument("--x-axis", choices=("epoch", "time_s"), default="epoch")
    pp.add_argument("--labels", nargs="*", default=None)
    pp.add_argument("--stat-line", action="store_true",
                    help="draw the statistical-accuracy level of the first trace")
    pp.add_argument("--title", default=None)
    pp.set_defaults(fn=_cmd_plot)

    pf = sub.add_parser("reference", help="compute the reference optimum of a dataset")
    pf.add_argument("--dataset", required=True)
    pf.add_argument("--nu", type=float, required=True)
    pf.add_argument("--loss", choices=("logistic", "quadratic"), default="logistic")
    pf.set_defaults(fn=_cmd_reference)

    pc = sub.add_parser("check", help="run the built-in verification suites")
    pc.set_defaults(fn=_cmd_check)
    return p


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
