"""Command-line entry point for the experiment harness.

Subcommands: ``run`` executes a configured suite, ``select-c`` reports the
CV choice of the schedule constant, ``plot-data`` turns a results bundle
into figure-ready TSVs, and ``rerun-cell`` recomputes a single raw row to
check the seed ledger.

Exit codes: 0 on success, 1 when a run finished with failed cells (or a
rerun-cell mismatch), 2 on configuration errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from satl.experiments.config import ConfigError, load_config, paper_scale
from satl.experiments.runner import (
    _select_c_cv_detailed,
    emit_plot_data,
    rerun_cell,
    run_suite,
)


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="satl",
        description="Run smoothness-adaptive transfer regression experiments.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a suite from a TOML config")
    p_run.add_argument("config", help="path to the TOML config file")
    p_run.add_argument("--paper-scale", action="store_true",
                       help="scale sweeps and trials up to the full study sizes")
    p_run.add_argument("--workers", type=int, default=None,
                       help="process count (overrides SATL_WORKERS; default serial)")
    p_run.add_argument("--out", default=None,
                       help="output directory (overrides the config)")

    p_sel = sub.add_parser("select-c",
                           help="K-fold CV choice of the schedule constant")
    p_sel.add_argument("config", help="path to the TOML config file")
    p_sel.add_argument("--k", type=int, default=5, help="number of folds")

    p_plot = sub.add_parser("plot-data",
                            help="emit figure-ready TSVs from a results bundle")
    p_plot.add_argument("bundle", help="bundle directory written by 'run'")
    p_plot.add_argument("--kind", required=True,
                        choices=("error_decay", "tl_curves"))

    p_rerun = sub.add_parser("rerun-cell",
                             help="recompute one raw row and compare")
    p_rerun.add_argument("bundle", help="bundle directory written by 'run'")
    p_rerun.add_argument("row", type=int, help="row id from the raw CSV")

    return parser


def _cmd_run(args):
    cfg = load_config(args.config)
    if args.paper_scale:
        cfg = paper_scale(cfg)
    bundle = run_suite(cfg, workers=args.workers, out_dir=args.out)
    return 1 if bundle.n_failed else 0


def _cmd_select_c(args):
    cfg = load_config(args.config)
    selections = {}
    for nu in cfg.nu_values:
        C, detail = _select_c_cv_detailed(cfg, nu, K=args.k)
        selections[f"nu={nu:g}"] = {"C": C, "detail": detail}
        print(f"nu={nu:g} C={C:g}")
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "c_selection.json", "w") as fh:
        json.dump(selections, fh, indent=1, sort_keys=True)
        fh.write("\n")
    return 0


def _cmd_plot_data(args):
    path = emit_plot_data(args.bundle, args.kind)
    print(path)
    return 0


def _cmd_rerun_cell(args):
    stored, recomputed, match = rerun_cell(args.bundle, args.row)
    print(f"stored:     {stored}")
    print(f"recomputed: {recomputed}")
    print("match" if match else "MISMATCH")
    return 0 if match else 1


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "run": _cmd_run,
        "select-c": _cmd_select_c,
        "plot-data": _cmd_plot_data,
        "rerun-cell": _cmd_rerun_cell,
    }
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
