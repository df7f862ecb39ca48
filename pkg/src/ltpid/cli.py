"""Command-line front end: ``ltpid {simulate,identify,validate,batch,sweep-p}``."""

from __future__ import annotations

import argparse
import json
import os
import sys
import warnings

import numpy as np

from . import experiments as ex
from .harmonic import sliding_phasors
from .identify import IdentifiedModel, NotInformativeError, assemble, error_bound_constant, informativity, solve
from .simulate import SampledTrajectory, SimulationError
from .validation import phasor_error, validate_on_fresh_trajectory, write_overlay_csv


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialize {type(o).__name__}")


def _dump(obj, path):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, default=_json_default)


def load_config(args):
    if args.config:
        cfg = ex.ExperimentConfig.from_json(args.config)
    elif args.preset:
        cfg = ex.ExperimentConfig.preset(args.preset)
    else:
        raise SystemExit("error: pass --config <path> or --preset <name>")
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.noise_ratio is not None:
        changes["noise"] = {"ratio": args.noise_ratio}
    if args.p is not None:
        changes["p"] = args.p
    if args.trials is not None:
        changes["trials"] = args.trials
    if args.out is not None:
        changes["out"] = args.out
    return cfg.replace(**changes) if changes else cfg


def _outdir(cfg):
    out = cfg.out if os.path.isabs(cfg.out) else os.path.join(os.getcwd(), cfg.out)
    try:
        os.makedirs(out, exist_ok=True)
    except OSError as exc:
        raise SystemExit(f"error: cannot create output directory {out}: {exc}")
    if not os.access(out, os.W_OK):
        raise SystemExit(f"error: output directory {out} is not writable")
    return out


def cmd_simulate(args):
    cfg = load_config(args)
    out = _outdir(cfg)
    A, B = ex.build_system(cfg)
    trajs, _ = ex.generate_trajectories(cfg, A, B, args.trial)
    files = []
    for j, tr in enumerate(trajs):
        name = f"traj_{j:03d}.csv"
        tr.to_csv(os.path.join(out, name))
        files.append(name)
    _dump({"config": cfg.to_dict(), "trial": args.trial, "grid": trajs[0].grid.to_dict(), "files": files},
          os.path.join(out, "manifest.json"))
    print(f"wrote {len(files)} trajectories to {out}")
    return 0


def _load_trajectories(args, cfg):
    if args.trajectories:
        period = args.period if args.period is not None else float(cfg.grid.get("period", 1.0)) if cfg else 1.0
        return [SampledTrajectory.from_csv(path, period) for path in args.trajectories], None
    A, B = ex.build_system(cfg)
    trajs, _ = ex.generate_trajectories(cfg, A, B, args.trial)
    return trajs, (A, B)


def cmd_identify(args):
    cfg = load_config(args) if (args.config or args.preset) else None
    if cfg is None and not args.trajectories:
        raise SystemExit("error: pass --config/--preset or --trajectories")
    p = args.p if args.p is not None else cfg.p
    trajs, truth = _load_trajectories(args, cfg)
    quad = cfg.grid.get("quadrature", "trapezoid") if cfg else "trapezoid"
    stride = int(cfg.grid.get("stride", 1)) if cfg else 1
    frames = [sliding_phasors(tr, p, quad, stride) for tr in trajs]
    data = assemble(frames, 1, cfg.columns if cfg else None,
                    cfg.trajectories.get("selection", "even") if cfg else "even")
    info = informativity(data)
    try:
        model = solve(data)
    except NotInformativeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        model = model.with_error_bound(error_bound_constant(data))
    except ValueError:
        pass
    out = _outdir(cfg) if cfg else os.getcwd() if args.out is None else args.out
    os.makedirs(out, exist_ok=True)
    model.to_json(os.path.join(out, "model.json"))
    report = {"p": p, "columns": data.n_columns, "rank": info.rank, "required_rank": info.required,
              "condition_number": info.condition_number, "diagnostics": model.diagnostics()}
    if truth is not None:
        report["phasor_error_pct"] = phasor_error(model, truth[0], truth[1], cfg.err_order)
        report["threshold"] = cfg.threshold
        report["accepted"] = bool(report["phasor_error_pct"] <= cfg.threshold)
    _dump(report, os.path.join(out, "identify.json"))
    msg = f"rank {info.rank}/{info.required}, residual {model.residual:.3g}"
    if "phasor_error_pct" in report:
        msg += f", phasor error {report['phasor_error_pct']:.4g} %"
    print(msg)
    return 0


def cmd_validate(args):
    if not args.model:
        raise SystemExit("error: --model is required")
    model = IdentifiedModel.from_json(args.model)
    cfg = load_config(args) if (args.config or args.preset) else None
    threshold = args.threshold
    if args.truth_csv:
        truth = SampledTrajectory.from_csv(args.truth_csv, model.A.period)
        report, x_true, x_est = validate_on_fresh_trajectory(
            model, truth, truth.states[:, 0], truth.grid, _recorded_input(truth),
            threshold if threshold is not None else 15.0, {"truth": args.truth_csv}, args.criterion)
        times = truth.times
    elif cfg is not None:
        A, B = ex.build_system(cfg)
        x0, u, grid = ex.validation_setup(cfg, A, B, args.trial)
        report, x_true, x_est = validate_on_fresh_trajectory(
            model, (A, B), x0, grid, u, cfg.threshold if threshold is None else threshold,
            {"trial": args.trial, "seed": cfg.seed}, args.criterion)
        times = grid.times
    else:
        raise SystemExit("error: pass --config/--preset or --truth-csv")
    out = args.out or (cfg.out if cfg else os.getcwd())
    os.makedirs(out, exist_ok=True)
    report.to_json(os.path.join(out, "report.json"))
    if x_true is not None:
        write_overlay_csv(os.path.join(out, "overlay.csv"), times, x_true, x_est)
    if report.scenario.get("notice"):
        print(f"notice: {report.scenario['notice']}")
    print(f"accepted={report.accepted} criterion={report.criterion} "
          f"nrmse={report.trajectory_nrmse_total_pct} phasor={report.phasor_error_pct}")
    return 0 if report.accepted else 1


def _recorded_input(truth):
    # recorded samples cannot be replayed as a continuous input, so CSV truth must be autonomous
    if truth.m:
        raise SystemExit("error: trajectory-mode validation from CSV needs an autonomous system (m = 0); "
                         "use --config for forced systems")
    return None


def cmd_batch(args):
    cfg = load_config(args)
    out = _outdir(cfg)
    agg = ex.run_batch(cfg, args.workers, validate=args.validate, out_dir=out)
    if args.error_vs_L:
        mults = [float(v) for v in args.error_vs_L.split(",")]
        agg["error_vs_L"] = ex.error_vs_L(cfg, mults, workers=args.workers)
    _dump(agg, os.path.join(out, "batch.json"))
    e = agg["error"]
    print(f"{e['count']} trials ok, {agg['failures']} failed; error min {e['min']} median {e['median']} max {e['max']}")
    return 0


def cmd_sweep(args):
    cfg = load_config(args)
    out = _outdir(cfg)
    ps = [int(v) for v in args.p_values.split(",")]
    for p in ps:
        ex.check_truncation(cfg.N, p)
    steps = ex.run_sweep(cfg, ps, args.threshold, args.trial)
    _dump(steps, os.path.join(out, "sweep.json"))
    for s in steps:
        print(f"p={s['p']}: top ratio {s['top_ratio']:.3g} decayed={s['decayed']} error={s['error']}")
    return 0


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="experiment config JSON")
    common.add_argument("--preset", choices=sorted(ex.PRESETS), help="built-in config")
    common.add_argument("--out", help="output directory")
    common.add_argument("--seed", type=int, help="root seed (overrides config)")
    common.add_argument("--workers", type=int, default=1, help="parallel trial workers")
    common.add_argument("--noise-ratio", type=float, help="3 sigma / |x| measurement noise ratio")
    common.add_argument("--p", type=int, help="truncation order")
    common.add_argument("--trials", type=int, help="number of trials")
    common.add_argument("--trial", type=int, default=0, help="trial index for single-trial verbs")

    parser = argparse.ArgumentParser(prog="ltpid", description=__doc__)
    sub = parser.add_subparsers(dest="verb", required=True)
    sub.add_parser("simulate", parents=[common], help="write trajectory CSVs").set_defaults(func=cmd_simulate)
    p = sub.add_parser("identify", parents=[common], help="identify phasors from trajectories")
    p.add_argument("--trajectories", nargs="+", help="trajectory CSV files instead of simulating")
    p.add_argument("--period", type=float, help="period of the CSV trajectories")
    p.set_defaults(func=cmd_identify)
    p = sub.add_parser("validate", parents=[common], help="check a model on a fresh trajectory")
    p.add_argument("--model", help="model JSON written by identify")
    p.add_argument("--truth-csv", help="recorded truth trajectory (autonomous systems)")
    p.add_argument("--criterion", choices=["trajectory", "phasor"], default="trajectory")
    p.add_argument("--threshold", type=float)
    p.set_defaults(func=cmd_validate)
    p = sub.add_parser("batch", parents=[common], help="run all trials and aggregate")
    p.add_argument("--validate", action="store_true", help="also validate every trial")
    p.add_argument("--error-vs-L", help="comma-separated multipliers of (n+m)(2p+1)")
    p.set_defaults(func=cmd_batch)
    p = sub.add_parser("sweep-p", parents=[common], help="identify at increasing p")
    p.add_argument("--p-values", default="2,5,10,15,20,25")
    p.add_argument("--threshold", type=float, default=1e-3)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            return args.func(args)
    except SimulationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
