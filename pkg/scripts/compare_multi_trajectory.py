"""Field accuracy off the attractor: many short Lorenz trajectories vs one long one.

Trains both models from the committed configs, reports the relative field
error on a grid filling the initial-state box, and writes z=25 slices of
both learned fields (plus the true field) as plot-ready CSVs.
"""
import argparse
import logging
from pathlib import Path

import numpy as np

from rkdenoise.config import load_config
from rkdenoise.experiment import corrupt_all, grid_field_error, simulate, train
from rkdenoise.network import mlp_forward
from rkdenoise.systems import make_field

ROOT = Path(__file__).resolve().parents[1]


def fit_config(path, percent):
    cfg = load_config(path)
    datasets = corrupt_all(simulate(cfg), cfg.corruption, percent, cfg.corruption.seed)
    return cfg, train(datasets, cfg, cfg.seed).model


def write_slice(path, models, level=25.0, resolution=41):
    g = np.linspace(-20, 20, resolution)
    x, y = np.meshgrid(g, g, indexing="ij")
    X = np.stack([x.ravel(), y.ravel(), np.full(x.size, level)])
    cols, header = [X], ["x1", "x2", "x3"]
    for name, model in models.items():
        cols.append(mlp_forward(model.params, X))
        header += [f"{name}_f{i}" for i in (1, 2, 3)]
    cols.append(make_field("lorenz")(X))
    header += ["true_f1", "true_f2", "true_f3"]
    rows = np.vstack(cols).T
    Path(path).write_text(",".join(header) + "\n"
                          + "\n".join(",".join(repr(float(v)) for v in r) for r in rows) + "\n")


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out", type=Path, default=ROOT / "runs" / "multi_vs_single")
    p.add_argument("--resolution", type=int, default=11)
    args = p.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    multi_cfg, multi = fit_config(ROOT / "configs" / "lorenz_multi.yaml", 5.0)
    _, single = fit_config(ROOT / "configs" / "lorenz_sweep.yaml", 5.0)
    box = multi_cfg.simulation.x0_box
    e_multi = grid_field_error(multi, "lorenz", box, args.resolution)
    e_single = grid_field_error(single, "lorenz", box, args.resolution)
    print(f"grid field error: multi {e_multi:.4g}  single {e_single:.4g}  ratio {e_multi / e_single:.3f}")
    args.out.mkdir(parents=True, exist_ok=True)
    write_slice(args.out / "slice_z25.csv", {"multi": multi, "single": single})


if __name__ == "__main__":
    main()
