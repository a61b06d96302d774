"""Simulate -> corrupt -> train -> evaluate pipeline shared by the CLI and scripts."""
from __future__ import annotations

import logging
import math
import traceback
from pathlib import Path

import numpy as np

from .config import CorruptionSpec, ExperimentConfig
from .corrupt import NoisyDataset, add_gaussian_noise, add_student_t_noise
from .errors import DivergenceError
from .integrate import Trajectory, implicit_midpoint_simulate, rk4_simulate
from .metrics import (forward_orbit_error, median_over_trials, noise_error, noise_moments,
                      vector_field_error)
from .optimize import LINE_SEARCH_FAILURE
from .serialize import (ModelRecord, read_trajectory, sha256_file, write_dataset,
                        write_json, write_model, write_noise)
from .stepper import FlowModel, get_tableau
from .systems import make_field
from .train import TrainedModel, fit

log = logging.getLogger(__name__)

SYMPLECTIC_SYSTEMS = {"double_pendulum"}


def simulate_system(system: str, x0, times) -> Trajectory:
    """Ground truth: implicit midpoint for Hamiltonian systems, substepped RK4 otherwise."""
    field = make_field(system)
    if system in SYMPLECTIC_SYSTEMS:
        return implicit_midpoint_simulate(field, x0, times)
    return rk4_simulate(field, x0, times)


def simulate(cfg: ExperimentConfig, trial: int = 0) -> list:
    """Truth trajectories for ``cfg``: simulated, or read from ``cfg.input``.

    Exponential sampling draws fresh gaps per trial.
    """
    if cfg.input is not None:
        return [read_trajectory(cfg.input)]
    sim = cfg.simulation
    offset = trial if sim.sampling == "exponential" else 0
    trajs = []
    for k, x0 in enumerate(sim.initial_states(cfg.system)):
        trajs.append(simulate_system(cfg.system, x0, sim.times(offset + 7919 * k)))
    return trajs


def corrupt(traj: Trajectory, spec: CorruptionSpec, percent: float, seed: int) -> NoisyDataset:
    if spec.distribution == "gaussian":
        data = add_gaussian_noise(traj, percent, seed)
    else:
        data = add_student_t_noise(traj, percent, spec.dof, seed)
    return data


def corrupt_all(trajs, spec: CorruptionSpec, percent: float, seed: int) -> list:
    # distinct streams per trajectory from one base seed
    seeds = np.random.SeedSequence(seed).generate_state(len(trajs)) if len(trajs) > 1 else [seed]
    return [corrupt(tr, spec, percent, int(s)) for tr, s in zip(trajs, seeds)]


def train(datasets, cfg: ExperimentConfig, seed: int, trace=None) -> TrainedModel:
    return fit(datasets, hidden=cfg.model.hidden, tableau=get_tableau(cfg.model.tableau),
               loss=cfg.loss, opts=cfg.optimizer, seed=seed,
               smoothing_window=cfg.model.smoothing_window, trace=trace)


def evaluate(model: FlowModel, noises, datasets, system: str | None = None) -> dict:
    """Metrics for a trained model against its datasets.

    Metrics needing ground truth (or an analytic field) are ``None`` when
    it is missing. ``E_N`` and ``E_f`` pool all datasets; ``E_F`` is the
    median of the per-dataset orbit errors.
    """
    if len(noises) != len(datasets):
        raise ValueError(f"{len(noises)} noise estimates for {len(datasets)} datasets")
    for N, d in zip(noises, datasets):
        if np.shape(N) != d.observations.shape:
            raise ValueError(f"noise estimate {np.shape(N)} does not match dataset "
                             f"{d.observations.shape}")
        if d.n != model.params.dim:
            raise ValueError(f"model dimension {model.params.dim} != dataset dimension {d.n}")
    Nhat = np.concatenate(noises, axis=1)
    has_noise = all(d.true_noise is not None for d in datasets)
    has_truth = all(d.truth is not None for d in datasets)
    out = {"E_N": None, "E_N_zero": None, "E_f": None, "E_F": None, "E_F_aligned": None}
    if has_noise:
        N = np.concatenate([d.true_noise for d in datasets], axis=1)
        out["E_N"] = noise_error(Nhat, N)
        out["E_N_zero"] = noise_error(np.zeros_like(N), N)
    if has_truth:
        if system is not None:
            X = np.concatenate([d.truth.states for d in datasets], axis=1)
            out["E_f"] = vector_field_error(model, make_field(system), X)
        out["E_F"] = median_over_trials([forward_orbit_error(model, d.truth) for d in datasets])[0]
        out["E_F_aligned"] = median_over_trials(
            [forward_orbit_error(model, d.truth, aligned=True) for d in datasets])[0]
    out["noise_fro"] = float(np.linalg.norm(Nhat))
    out["true_noise_fro"] = float(np.linalg.norm(N)) if has_noise else None
    out["moments"] = [noise_moments(row) for row in Nhat]
    out["true_moments"] = [noise_moments(row) for row in N] if has_noise and np.any(N) else None
    return out


def box_grid(box, resolution: int) -> np.ndarray:
    """Column states on a regular grid filling ``box`` (one ``(low, high)`` row per axis)."""
    axes = [np.linspace(lo, hi, resolution) for lo, hi in box]
    return np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")])


def grid_field_error(model: FlowModel, system: str, box, resolution: int = 11) -> float:
    """Relative field error of ``model`` over a regular grid in ``box``, away from any data."""
    return vector_field_error(model, make_field(system), box_grid(box, resolution))


def save_training(out_dir, trained: TrainedModel, datasets, dataset_paths,
                  config_hash: str) -> Path:
    """Write model.json, one learned-noise CSV per dataset and report.json."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    noise_refs = []
    for k, (N, d, dpath) in enumerate(zip(trained.noises, datasets, dataset_paths)):
        name = f"noise_{k}.csv"
        write_noise(out_dir / name, d.times, N)
        noise_refs.append({"file": name, "dataset_sha256": sha256_file(dpath)})
    report = trained.report.summary()
    record = ModelRecord(trained.model, trained.loss, noise_refs, report, config_hash)
    path = out_dir / "model.json"
    write_model(path, record)
    # wall-clock time stays in the log so reruns write identical files
    write_json(out_dir / "report.json", {**report, "trace": "trace.jsonl"})
    return path


SUMMARY_COLUMNS = ("percent", "trials", "failed", "E_N_mean", "E_N_std", "E_f_mean", "E_f_std",
                   "E_F_median", "E_F_ignored")


def _mean_std(values):
    v = [x for x in values if x is not None and math.isfinite(x)]
    if not v:
        return None, None
    return float(np.mean(v)), float(np.std(v))


def summarize(rows, percents) -> list:
    """Per noise level: mean/std of E_N and E_f, median of E_F over trials."""
    table = []
    for p in percents:
        sel = [r for r in rows if r["percent"] == p]
        ok = [r for r in sel if r.get("error") is None]
        en_m, en_s = _mean_std([r["E_N"] for r in ok])
        ef_m, ef_s = _mean_std([r["E_f"] for r in ok])
        orbit = [r["E_F"] for r in ok if r["E_F"] is not None]
        if orbit and any(math.isfinite(x) for x in orbit):
            ef_med, ignored = median_over_trials(orbit)
        else:
            ef_med, ignored = None, len(orbit)
        table.append({"percent": p, "trials": len(sel), "failed": len(sel) - len(ok),
                      "E_N_mean": en_m, "E_N_std": en_s, "E_f_mean": ef_m, "E_f_std": ef_s,
                      "E_F_median": ef_med, "E_F_ignored": ignored})
    return table


def _csv_cell(v):
    return "" if v is None else (repr(v) if isinstance(v, float) else str(v))


def write_table(path, rows, columns):
    lines = [",".join(columns)]
    lines += [",".join(_csv_cell(r.get(c)) for c in columns) for r in rows]
    Path(path).write_text("\n".join(lines) + "\n")


def run_trial(cfg: ExperimentConfig, percent: float, trial: int, trial_dir: Path) -> dict:
    trial_dir.mkdir(parents=True, exist_ok=True)
    trajs = simulate(cfg, trial)
    datasets = corrupt_all(trajs, cfg.corruption, percent, cfg.corruption.seed + trial)
    dataset_paths = []
    for k, d in enumerate(datasets):
        p = trial_dir / f"dataset_{k}.json"
        write_dataset(p, d)
        dataset_paths.append(p)
    with open(trial_dir / "trace.jsonl", "w") as trace:
        trained = train(datasets, cfg, cfg.seed + trial, trace)
    save_training(trial_dir, trained, datasets, dataset_paths, cfg.fingerprint())
    metrics = evaluate(trained.model, trained.noises, datasets, cfg.system)
    metrics["termination"] = trained.report.termination
    metrics["iterations"] = trained.report.iterations
    metrics["loss"] = trained.report.fun
    write_json(trial_dir / "metrics.json", metrics)
    return metrics


TRIAL_COLUMNS = ("percent", "trial", "E_N", "E_N_zero", "E_f", "E_F", "E_F_aligned",
                 "noise_fro", "true_noise_fro", "termination", "iterations", "error")


def run_experiment(cfg: ExperimentConfig, out_dir=None) -> dict:
    """Run every (noise level, trial) pair; failures are recorded and the sweep continues."""
    out = Path(out_dir if out_dir is not None else cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / "config.json", cfg.to_dict())
    rows = []
    for percent in cfg.corruption.percents:
        for trial in range(cfg.trials):
            trial_dir = out / f"p{percent:g}" / f"trial{trial}"
            log.info("noise %g%%, trial %d", percent, trial)
            row = {"percent": percent, "trial": trial, "error": None}
            try:
                m = run_trial(cfg, percent, trial, trial_dir)
                row.update({k: m[k] for k in TRIAL_COLUMNS if k in m})
            except (DivergenceError, ArithmeticError, ValueError) as exc:
                log.warning("trial failed: %s", exc)
                log.debug("%s", traceback.format_exc())
                row.update({k: None for k in ("E_N", "E_f", "E_F")})
                row["error"] = f"{type(exc).__name__}: {exc}"
            rows.append(row)
    summary = summarize(rows, cfg.corruption.percents)
    write_table(out / "trials.csv", rows, TRIAL_COLUMNS)
    write_table(out / "summary.csv", summary, SUMMARY_COLUMNS)
    result = {"config_hash": cfg.fingerprint(), "summary": summary, "trials": rows}
    write_json(out / "summary.json", result)
    return result


def partial(trained: TrainedModel) -> bool:
    return trained.report.termination == LINE_SEARCH_FAILURE

