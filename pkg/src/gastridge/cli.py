"""Command-line workflow: build cycles, simulate, generate data, train, evaluate, rank.

Exit codes: 0 success, 2 training finished without a feasible model, 1 error.
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from ._io import atomic_write_text
from .analysis import evaluate_hybrid, save_metrics_csv, save_ranking_csv, svd_rank
from .config import RunConfig, load_run_config
from .cycles import concatenate, constant_current, load_cycle_csv, pulse_train, random_walk, save_cycle_csv
from .errors import ConfigError, GastridgeError
from .ga import GaConfig, run_ga, save_history_csv
from .library import ErrorSegment, RegressionData, build_candidate_library, fit_normalization
from .lfm import load_trace_csv, save_trace_csv, simulate_cycle
from .reference import (
    compute_error_series,
    generate_surrogate_trace,
    load_error_csv,
    load_reference_csv,
    save_error_csv,
    save_reference_csv,
)
from .stridge import SparseErrorModel

__all__ = ["main", "build_parser"]


def _resolve(path, cfg: RunConfig) -> Path:
    path = Path(path)
    if not path.is_absolute() and not path.exists() and cfg.cycles_dir is not None:
        candidate = cfg.cycles_dir / path
        if candidate.exists():
            return candidate
    return path


def _out(args, cfg: RunConfig) -> Path:
    out = Path(args.out) if args.out is not None else cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    return out


def _cell(cfg: RunConfig, cycle):
    if abs(cycle.dt - cfg.dt) > 1e-9:
        raise ConfigError(f"cycle {cycle.name} has dt {cycle.dt}, config expects {cfg.dt}")
    return cfg.cell


def cmd_build_cycle(args, cfg: RunConfig) -> int:
    cap = cfg.cell.capacity_ah
    dt = cfg.dt
    seed = args.seed if args.seed is not None else cfg.seed
    if args.kind == "cc":
        cycle = constant_current(args.c_rate * cap, args.duration, dt, args.name)
    elif args.kind == "pulse":
        cycle = pulse_train(args.c_rate * cap, args.on, args.off, args.pulses, dt, name=args.name)
    elif args.kind == "walk":
        if seed is None:
            raise ConfigError("a random walk needs --seed or a config seed")
        cycle = random_walk(args.duration, cap, seed, dt, name=args.name)
    else:
        if not args.inputs:
            raise ConfigError("cascade needs --inputs")
        parts = [load_cycle_csv(_resolve(p, cfg)) for p in args.inputs]
        cycle = concatenate(parts, args.charge_c_rate * cap, args.charge_duration, args.name)
    path = _out(args, cfg) / f"{args.name}.csv"
    save_cycle_csv(cycle, path)
    print(f"wrote {path} ({len(cycle)} samples)")
    return 0


def cmd_simulate(args, cfg: RunConfig) -> int:
    cycle = load_cycle_csv(_resolve(args.cycle, cfg))
    trace = simulate_cycle(_cell(cfg, cycle), cycle)
    path = _out(args, cfg) / f"{cycle.name}_trace.csv"
    save_trace_csv(trace, path)
    print(f"wrote {path}")
    return 0


def cmd_gen_data(args, cfg: RunConfig) -> int:
    out = _out(args, cfg)
    seed = args.seed if args.seed is not None else cfg.seed
    for k, p in enumerate(args.cycles):
        cycle = load_cycle_csv(_resolve(p, cfg))
        trace = simulate_cycle(_cell(cfg, cycle), cycle)
        # each cycle gets its own noise stream
        spec = cfg.surrogate_spec(None if seed is None else seed + k)
        ref = generate_surrogate_trace(spec, cycle, cfg.cell, trace)
        e_r = compute_error_series(ref, trace)
        save_trace_csv(trace, out / f"{cycle.name}_trace.csv")
        save_reference_csv(ref, out / f"{cycle.name}_ref.csv")
        save_error_csv(trace.t, ErrorSegment.from_trace(e_r, trace), out / f"{cycle.name}_error.csv")
        print(f"{cycle.name}: rms error {float(np.sqrt(np.mean(e_r**2))):.4g} V")
    return 0


def cmd_train(args, cfg: RunConfig) -> int:
    seed = args.seed if args.seed is not None else cfg.seed
    if seed is None:
        raise ConfigError("training needs --seed or a config seed")
    ga_cfg = GaConfig.from_dict({**_ga_dict(cfg.ga), "seed": int(seed)})
    train = RegressionData([load_error_csv(_resolve(p, cfg)) for p in args.train])
    valid = RegressionData([load_error_csv(_resolve(p, cfg)) for p in args.valid])
    lib = build_candidate_library(cfg.library).with_normalization(fit_normalization(train.all_signals))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        result = run_ga(ga_cfg, train, valid, lib)
    best = result.best
    model = best.model
    model.metadata = {
        "seed": int(seed),
        "log_lambda1": best.genome.log_lambda1,
        "log_lambda2": best.genome.log_lambda2,
        "mse_valid": best.mse_valid,
        "fitness": best.fitness,
        "feasible": bool(best.feasible),
        "generations": len(result.history) - 1,
        "note": best.note,
        "train": [s.name for s in train.segments],
        "valid": [s.name for s in valid.segments],
    }
    out = _out(args, cfg)
    atomic_write_text(out / f"{args.name}.json", model.to_json())
    save_history_csv(result.history, out / f"{args.name}_history.csv")
    print(model.equation())
    print(f"mse_train {best.mse_train:.4g} V^2, mse_valid {best.mse_valid:.4g} V^2, feasible {best.feasible}")
    if result.warning:
        print("warning: no feasible candidate; returned the lowest-loss model", file=sys.stderr)
        return 2
    return 0


def _ga_dict(ga: GaConfig) -> dict:
    return {k: getattr(ga, k) for k in ga.__dataclass_fields__}


def _load_model(path) -> SparseErrorModel:
    try:
        return SparseErrorModel.from_json(Path(path).read_text(encoding="utf-8"))
    except (KeyError, TypeError, json.JSONDecodeError) as exc:
        raise ConfigError(f"{path}: not a valid model file ({exc})") from exc


def cmd_evaluate(args, cfg: RunConfig) -> int:
    model = _load_model(args.model)
    reports = []
    for trace_path, ref_path in args.pair:
        trace = load_trace_csv(_resolve(trace_path, cfg))
        ref = load_reference_csv(_resolve(ref_path, cfg))
        ref.name = trace.name = Path(ref_path).stem.removesuffix("_ref")
        ev = evaluate_hybrid(model, trace, ref, mode=args.mode)
        reports.append(ev)
        print(f"{ref.name}: rmse lfm {ev.lfm.rmse:.4g} V, hybrid {ev.hybrid.rmse:.4g} V, RRR {ev.rrr_percent:.2f}%")
    path = _out(args, cfg) / f"{args.name}.csv"
    save_metrics_csv(reports, path)
    print(f"wrote {path}")
    return 0


def cmd_rank(args, cfg: RunConfig) -> int:
    model = _load_model(args.model)
    trace = load_trace_csv(_resolve(args.trace, cfg))
    signals = None
    if args.ref is not None:
        ref = load_reference_csv(_resolve(args.ref, cfg))
        signals = ErrorSegment.from_trace(compute_error_series(ref, trace), trace).signals
    report = svd_rank(model, trace, signals)
    path = _out(args, cfg) / f"{args.name}.csv"
    save_ranking_csv(report, path, model.library)
    for row in report.rows(model.library)[:10]:
        print(f"{row[0]:>3} {model.library.descriptors[row[1]].name:<16} xbar {row[4]:+.4g}  cumulative {row[5]:.3f}")
    print(f"wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=argparse.SUPPRESS, help="TOML run configuration")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="master seed")
    common.add_argument("--out", default=argparse.SUPPRESS, help="output directory")

    parser = argparse.ArgumentParser(prog="gastridge", description=__doc__.splitlines()[0], parents=[common])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-cycle", parents=[common], help="write a synthetic or cascaded drive cycle")
    p.add_argument("--kind", choices=("cc", "pulse", "walk", "cascade"), default="walk")
    p.add_argument("--name", default="cycle")
    p.add_argument("--duration", type=float, default=3600.0, help="seconds")
    p.add_argument("--c-rate", type=float, default=1.0, help="current for cc/pulse, in C")
    p.add_argument("--on", type=float, default=30.0, help="pulse on-time, s")
    p.add_argument("--off", type=float, default=30.0, help="pulse off-time, s")
    p.add_argument("--pulses", type=int, default=10)
    p.add_argument("--inputs", nargs="+", help="cycle CSVs joined by a cascade")
    p.add_argument("--charge-c-rate", type=float, default=0.5, help="charge between cascade parts, in C")
    p.add_argument("--charge-duration", type=float, default=0.0, help="seconds of charge between parts")
    p.set_defaults(func=cmd_build_cycle)

    p = sub.add_parser("simulate", parents=[common], help="simulate the low-fidelity model on a cycle")
    p.add_argument("cycle")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("gen-data", parents=[common], help="write trace, reference and error CSVs per cycle")
    p.add_argument("cycles", nargs="+")
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", parents=[common], help="GA-STRidge on error CSVs")
    p.add_argument("--train", nargs="+", required=True, help="training error CSVs")
    p.add_argument("--valid", nargs="+", required=True, help="validation error CSVs")
    p.add_argument("--name", default="model")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", parents=[common], help="hybrid-model metrics on test cycles")
    p.add_argument("--model", required=True)
    p.add_argument("--pair", nargs=2, action="append", required=True, metavar=("TRACE", "REF"))
    p.add_argument("--mode", choices=("free_running", "one_step"), default="free_running")
    p.add_argument("--name", default="metrics")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("rank", parents=[common], help="SVD ranking of a model's terms on a trace")
    p.add_argument("--model", required=True)
    p.add_argument("--trace", required=True)
    p.add_argument("--ref", help="use the measured error instead of the model rollout")
    p.add_argument("--name", default="ranking")
    p.set_defaults(func=cmd_rank)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    for name in ("config", "seed", "out"):
        if not hasattr(args, name):
            setattr(args, name, None)
    try:
        cfg = load_run_config(args.config)
        return args.func(args, cfg)
    except (GastridgeError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
