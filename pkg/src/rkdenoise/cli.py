"""Command-line front end.

Exit codes: 0 success, 1 I/O failure, 2 invalid input or config,
3 divergence, 4 partial convergence (line-search failure; the best point
found is still written).
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import experiment as ex
from .config import CorruptionSpec, ExperimentConfig, load_config
from .corrupt import NoisyDataset
from .errors import DivergenceError, FixedPointError
from .metrics import predict
from .network import mlp_forward
from .serialize import (read_dataset, read_model, read_noise, read_trajectory,
                        write_dataset, write_json, write_trajectory)
from .systems import SYSTEMS, make_field

EXIT_OK, EXIT_IO, EXIT_INVALID, EXIT_DIVERGENCE, EXIT_PARTIAL = 0, 1, 2, 3, 4

log = logging.getLogger("rkdenoise")


class CliError(Exception):
    def __init__(self, message, code=EXIT_INVALID):
        super().__init__(message)
        self.code = code


def _config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else ExperimentConfig()
    changes = {}
    if getattr(args, "seed", None) is not None:
        changes["seed"] = args.seed
    if getattr(args, "out", None) is not None:
        changes["out"] = args.out
    return dataclasses.replace(cfg, **changes) if changes else cfg


def _floats(text, what):
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise CliError(f"{what}: expected comma-separated numbers, got {text!r}") from None


def _out_dir(args, cfg):
    out = Path(args.out if args.out is not None else cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


# -- subcommands ---------------------------------------------------------------
def cmd_simulate(args):
    cfg = _config(args)
    if args.system is not None:
        cfg = dataclasses.replace(cfg, system=args.system, input=None)
    sim = cfg.simulation
    changes = {k: getattr(args, k) for k in ("t0", "t1", "m") if getattr(args, k) is not None}
    if args.x0 is not None:
        changes["x0"] = _floats(args.x0, "--x0")
    if changes:
        sim = dataclasses.replace(sim, **changes)
    cfg = dataclasses.replace(cfg, simulation=sim)
    trajs = ex.simulate(cfg)
    out = Path(args.output)
    if len(trajs) == 1:
        out.parent.mkdir(parents=True, exist_ok=True)
        write_trajectory(out, trajs[0])
        print(out)
    else:
        out.mkdir(parents=True, exist_ok=True)
        for k, tr in enumerate(trajs):
            write_trajectory(out / f"traj_{k:03d}.csv", tr)
        print(f"{len(trajs)} trajectories in {out}")
    return EXIT_OK


def cmd_corrupt(args):
    traj = read_trajectory(args.trajectory)
    if args.as_observations:
        data = NoisyDataset(traj.states, traj.times, provenance={"source": str(args.trajectory)})
    else:
        cfg = _config(args)
        spec = cfg.corruption
        if args.distribution is not None:
            spec = CorruptionSpec(args.distribution, spec.percents,
                                  args.dof if args.dof is not None else
                                  (spec.dof if args.distribution == spec.distribution else None),
                                  spec.seed)
        elif args.dof is not None:
            spec = dataclasses.replace(spec, dof=args.dof)
        percent = args.percent if args.percent is not None else spec.percents[0]
        seed = args.seed if args.seed is not None else spec.seed
        data = ex.corrupt(traj, spec, percent, seed)
        data.provenance["source"] = str(args.trajectory)
        data.validate()
    Path(args.output).parent.mkdir(parents=True, exist_ok=True)
    write_dataset(args.output, data)
    print(args.output)
    return EXIT_OK


def cmd_train(args):
    cfg = _config(args)
    datasets = [read_dataset(p) for p in args.datasets]
    q = cfg.loss.q
    for p, d in zip(args.datasets, datasets):
        if d.m <= 2 * q:
            raise CliError(f"{p}: m={d.m} samples, the window needs m > 2q = {2 * q}")
    out = _out_dir(args, cfg)
    with open(out / "trace.jsonl", "w") as trace:
        trained = ex.train(datasets, cfg, cfg.seed, trace)
    path = ex.save_training(out, trained, datasets, args.datasets, cfg.fingerprint())
    print(f"{path}: {trained.report.termination} after {trained.report.iterations} iterations, "
          f"loss {trained.report.fun:.6e}")
    return EXIT_PARTIAL if ex.partial(trained) else EXIT_OK


def _noises_for(record, model_path, datasets, noise_paths):
    if noise_paths:
        return [read_noise(p) for p in noise_paths]
    base = Path(model_path).parent
    if len(record.noise) != len(datasets):
        raise CliError(f"model was trained on {len(record.noise)} datasets, {len(datasets)} given; "
                       "pass --noise explicitly")
    return [read_noise(base / ref["file"]) for ref in record.noise]


def cmd_evaluate(args):
    record = read_model(args.model)
    datasets = [read_dataset(p) for p in args.datasets]
    noises = _noises_for(record, args.model, datasets, args.noise)
    metrics = ex.evaluate(record.model, noises, datasets, args.system)
    if args.output:
        write_json(args.output, metrics)
        print(args.output)
    else:
        print(json.dumps(metrics, indent=1))
    return EXIT_OK


def cmd_predict(args):
    record = read_model(args.model)
    x0 = np.array(_floats(args.x0, "--x0"))
    if x0.size != record.model.params.dim:
        raise CliError(f"--x0 has {x0.size} entries, model dimension is {record.model.params.dim}")
    if args.m < 1:
        raise CliError("--m must be at least 1")
    times = np.linspace(args.t0, args.t1, args.m) if args.m > 1 else np.array([args.t0])
    traj = predict(record.model, x0, times)
    write_trajectory(args.output, traj)
    print(args.output)
    return EXIT_OK


def _parse_fix(items, n):
    fixed = {}
    for item in items or []:
        try:
            axis, value = item.split("=")
            fixed[int(axis)] = float(value)
        except ValueError:
            raise CliError(f"--fix expects AXIS=VALUE, got {item!r}") from None
    for axis in fixed:
        if not 1 <= axis <= n:
            raise CliError(f"axis {axis} outside state dimension {n} (axes are 1-based)")
    free = [a for a in range(1, n + 1) if a not in fixed]
    if len(free) != 2:
        raise CliError(f"fix {n - 2} axes so that exactly two remain free; free axes {free}")
    return fixed, free


def field_grid(n, fixed, free, bounds, resolution):
    """Column states on a ``resolution x resolution`` grid over the free axes."""
    if resolution < 2:
        raise CliError("--resolution must be at least 2")
    lo1, hi1, lo2, hi2 = bounds
    if not all(np.isfinite(bounds)) or not (hi1 > lo1 and hi2 > lo2):
        raise CliError("--bounds must be finite with high > low")
    g1, g2 = np.meshgrid(np.linspace(lo1, hi1, resolution), np.linspace(lo2, hi2, resolution),
                         indexing="ij")
    X = np.empty((n, resolution * resolution))
    for axis, v in fixed.items():
        X[axis - 1] = v
    X[free[0] - 1] = g1.ravel()
    X[free[1] - 1] = g2.ravel()
    return X


def cmd_export_field(args):
    if args.model is None and args.system is None:
        raise CliError("export-field needs --model, --system, or both")
    record = read_model(args.model) if args.model else None
    n = record.model.params.dim if record else SYSTEMS[args.system].dim
    if record and args.system and SYSTEMS[args.system].dim != n:
        raise CliError(f"system {args.system} has dimension {SYSTEMS[args.system].dim}, model {n}")
    fixed, free = _parse_fix(args.fix, n)
    X = field_grid(n, fixed, free, args.bounds, args.resolution)
    cols = [X]
    header = [f"x{i + 1}" for i in range(n)]
    if record:
        cols.append(mlp_forward(record.model.params, X))
        header += [f"f{i + 1}" for i in range(n)]
    if args.system:
        cols.append(make_field(args.system)(X))
        header += [f"true{i + 1}" for i in range(n)]
    table = np.vstack(cols)
    lines = [",".join(header)] + [",".join(repr(float(v)) for v in row) for row in table.T]
    Path(args.output).write_text("\n".join(lines) + "\n")
    print(args.output)
    return EXIT_OK


def cmd_run_experiment(args):
    cfg = _config(args)
    result = ex.run_experiment(cfg, cfg.out)
    for row in result["summary"]:
        print("  ".join(f"{k}={v}" for k, v in row.items()))
    failed = sum(r["failed"] for r in result["summary"])
    return EXIT_PARTIAL if failed else EXIT_OK


# -- parser --------------------------------------------------------------------
def build_parser():
    p = argparse.ArgumentParser(prog="rkdenoise", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log training progress")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out=True):
        sp.add_argument("--config", help="experiment config (YAML)")
        sp.add_argument("--seed", type=int, help="override the config seed")
        if out:
            sp.add_argument("--out", help="output directory override")

    s = sub.add_parser("simulate", help="simulate a benchmark system to a trajectory CSV")
    common(s, out=False)
    s.add_argument("--system", choices=sorted(SYSTEMS))
    s.add_argument("--x0", help="comma-separated initial state")
    s.add_argument("--t0", type=float, help="first sample time")
    s.add_argument("--t1", type=float, help="last sample time")
    s.add_argument("--m", type=int, help="number of samples")
    s.add_argument("-o", "--output", required=True,
                   help="CSV path (a directory when the config asks for several trajectories)")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("corrupt", help="add measurement noise to a trajectory")
    common(s, out=False)
    s.add_argument("trajectory", help="trajectory CSV")
    s.add_argument("--distribution", choices=("gaussian", "student_t"))
    s.add_argument("--percent", type=float, help="noise scale as a percent of each coordinate's std")
    s.add_argument("--dof", type=int, help="Student-t degrees of freedom")
    s.add_argument("--as-observations", action="store_true",
                   help="store the CSV as observations with unknown truth")
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_corrupt)

    s = sub.add_parser("train", help="fit a model to one or more dataset bundles")
    common(s)
    s.add_argument("datasets", nargs="+", help="dataset JSON bundles sharing one model")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("evaluate", help="metrics JSON for a model and its datasets")
    s.add_argument("model", help="model JSON")
    s.add_argument("datasets", nargs="+", help="dataset JSON bundles, in training order")
    s.add_argument("--noise", nargs="+", help="learned-noise CSVs (default: from the model file)")
    s.add_argument("--system", choices=sorted(SYSTEMS), help="analytic field for E_f")
    s.add_argument("-o", "--output", help="metrics JSON path (default: stdout)")
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("predict", help="iterate the learned flow map from x0")
    s.add_argument("model", help="model JSON")
    s.add_argument("--x0", required=True, help="comma-separated initial state")
    s.add_argument("--t0", type=float, default=0.0, help="time of x0")
    s.add_argument("--t1", type=float, required=True, help="last output time")
    s.add_argument("--m", type=int, required=True, help="number of output samples")
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_predict)

    s = sub.add_parser("export-field", help="learned and/or analytic field on a planar grid")
    s.add_argument("--model", help="model JSON for the learned field")
    s.add_argument("--system", choices=sorted(SYSTEMS), help="also export the analytic field")
    s.add_argument("--fix", action="append", metavar="AXIS=VALUE",
                   help="hold a 1-based axis at a value; repeat until two axes remain")
    s.add_argument("--bounds", type=float, nargs=4, default=(-1.0, 1.0, -1.0, 1.0),
                   metavar=("LO1", "HI1", "LO2", "HI2"), help="ranges of the two free axes")
    s.add_argument("--resolution", type=int, default=41, help="points per free axis")
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_export_field)

    s = sub.add_parser("run-experiment", help="simulate, corrupt, train and evaluate a sweep")
    common(s)
    s.set_defaults(func=cmd_run_experiment)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(message)s")
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (DivergenceError, FixedPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except FileNotFoundError as exc:
        print(f"error: {exc.filename}: {exc.strerror}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
