"""Joint fit of the network vector field and per-sample noise."""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass

from .corrupt import NoisyDataset, smooth_initial_noise
from .loss import LossConfig, WindowedObjective
from .network import xavier_init
from .optimize import OptimizeReport, OptimizerOptions, lbfgs_minimize
from .stepper import RK4, FlowModel, RkTableau

log = logging.getLogger(__name__)


@dataclass
class TrainedModel:
    model: FlowModel
    noises: list
    loss: LossConfig
    report: OptimizeReport
    seconds: float = 0.0

    @property
    def params(self):
        return self.model.params


def fit(datasets, hidden=(32, 32, 32), tableau: RkTableau = RK4,
        loss: LossConfig = LossConfig(), opts: OptimizerOptions = OptimizerOptions(),
        seed=0, smoothing_window: int = 5, trace=None, log_every: int = 500) -> TrainedModel:
    """Minimize the windowed loss over ``[theta; N_1; ...; N_k]``.

    Network weights start from Xavier draws seeded by ``seed``; each noise
    estimate starts from the residual of a centered moving average of its
    observations.
    """
    if isinstance(datasets, NoisyDataset):
        datasets = [datasets]
    n = datasets[0].n
    widths = (n, *hidden, n)
    objective = WindowedObjective(datasets, widths, tableau, loss)
    params0 = xavier_init(widths, seed)
    noises0 = [smooth_initial_noise(d.observations, smoothing_window) for d in datasets]
    z0 = objective.pack(params0, noises0)

    t0 = time.perf_counter()

    def progress(it, z, f):
        if log_every and it % log_every == 0:
            log.info("iter %d  loss %.6e  (%.1fs)", it, f, time.perf_counter() - t0)

    report = lbfgs_minimize(objective, z0, opts, trace=trace, callback=progress)
    params, noises = objective.split(report.x)
    seconds = time.perf_counter() - t0
    log.info("finished: %s after %d iterations, loss %.6e (%.1fs)", report.termination,
             report.iterations, report.fun, seconds)
    return TrainedModel(FlowModel(params, tableau), noises, loss, report, seconds)

