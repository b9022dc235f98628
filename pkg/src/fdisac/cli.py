"""Command-line interface.

Subcommands:
  simulate   run a Monte Carlo batch and persist per-trial/aggregate CSVs,
             SI traces and figures
  sweep      run batches over a config axis (e.g. dl_power_dbm) and persist
             a long-format CSV plus a trend figure
  radar-map  run one seed and emit the range-Doppler map and angle
             pseudospectrum as CSV and PNG

Exit code 0 on success; on failure a single machine-readable JSON error
line goes to stderr and the exit code is nonzero.
"""

import argparse
import json
import sys
from pathlib import Path

import numpy  # noqa: F401  (loaded before thread limits apply)
import threadpoolctl

from . import report
from .config import SimConfig, desk_profile, paper_profile
from .harness import run_many, run_trial, sweep


def _load_config(args):
    if args.config:
        cfg = SimConfig.load(args.config)
    elif args.profile == "paper":
        cfg = paper_profile()
    else:
        cfg = desk_profile()
    overrides = {}
    if args.seed is not None:
        overrides["master_seed"] = args.seed
    if args.trials is not None:
        overrides["n_trials"] = args.trials
    return cfg.replace(**overrides) if overrides else cfg


def _out_dir(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_simulate(args):
    cfg = _load_config(args)
    out = _out_dir(args)
    report.write_config_snapshot(cfg, out)
    results = run_many(cfg, workers=args.workers)
    report.write_trials_csv(results, out / "trials.csv")
    report.write_aggregate_csv(results, out / "aggregate.csv")
    for r in results:
        report.write_si_trace_csv(r.si_trace, out / f"si_trace_{r.trial_index:03d}.csv")
    report.render_si_trace([r.si_trace for r in results], out / "si_trace.png")
    print(f"wrote {len(results)} trials to {out}")
    return 0


def cmd_sweep(args):
    cfg = _load_config(args)
    out = _out_dir(args)
    report.write_config_snapshot(cfg, out)
    values = [json.loads(v) for v in args.values.split(",")]
    rows = sweep(cfg, args.axis, values, workers=args.workers)
    report.write_sweep_csv(rows, args.axis, out / "sweep.csv")
    report.render_metric_vs_axis(rows, args.axis, "dl_se_sum",
                                 out / f"dl_se_vs_{args.axis}.png")
    print(f"wrote sweep over {args.axis} ({len(values)} values) to {out}")
    return 0


def cmd_radar_map(args):
    cfg = _load_config(args)
    out = _out_dir(args)
    report.write_config_snapshot(cfg, out)
    result = run_trial(cfg, 0, keep_artifacts=True)
    rd = result.artifacts["range_doppler"]
    est = result.artifacts["angle_estimate"]
    report.write_range_doppler_csv(rd, out / "range_doppler.csv")
    report.write_pseudospectrum_csv(est, out / "pseudospectrum.csv")
    report.render_range_doppler(rd, out / "range_doppler.png",
                                range_true=result.range_true,
                                velocity_true=result.velocity_true)
    report.render_pseudospectrum(est, out / "pseudospectrum.png",
                                 angle_true=result.angle_true)
    report.write_si_trace_csv(result.si_trace, out / "si_trace_000.csv")
    report.render_si_trace([result.si_trace], out / "si_trace.png")
    print(json.dumps({
        "angle_error_deg": result.angle_error_deg,
        "range_error_m": result.range_error,
        "velocity_error_mps": result.velocity_error,
        "out": str(out),
    }))
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="fdisac", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=str, default=None,
                        help="JSON config path (keys mirror SimConfig fields)")
    common.add_argument("--profile", choices=("desk", "paper"), default="desk")
    common.add_argument("--seed", type=int, default=None, help="master seed")
    common.add_argument("--trials", type=int, default=None)
    common.add_argument("--out", type=str, default="run_out")
    common.add_argument("--workers", type=int, default=1)

    p_sim = sub.add_parser("simulate", parents=[common],
                           help="run one Monte Carlo batch")
    p_sim.set_defaults(func=cmd_simulate)

    p_sweep = sub.add_parser("sweep", parents=[common],
                             help="run batches over a config axis")
    p_sweep.add_argument("--axis", required=True,
                         help="SimConfig field to sweep, e.g. dl_power_dbm")
    p_sweep.add_argument("--values", required=True,
                         help="comma-separated JSON values, e.g. 10,20,30")
    p_sweep.set_defaults(func=cmd_sweep)

    p_map = sub.add_parser("radar-map", parents=[common],
                           help="emit range-Doppler and pseudospectrum for one seed")
    p_map.set_defaults(func=cmd_radar_map)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    threadpoolctl.threadpool_limits(limits=1)
    try:
        return args.func(args)
    except Exception as exc:  # surface a single parseable line
        print(json.dumps({"error": str(exc), "type": type(exc).__name__}),
              file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
