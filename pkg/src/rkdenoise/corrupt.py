"""Synthetic measurement noise and the smoothing warm start.

All random draws use ``numpy.random.default_rng(seed)`` (PCG64), so a seed
reproduces a dataset bit for bit.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .integrate import Trajectory


@dataclass(frozen=True)
class NoisyDataset:
    observations: np.ndarray
    times: np.ndarray
    truth: Trajectory | None = None
    true_noise: np.ndarray | None = None
    provenance: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        Y = np.asarray(self.observations, dtype=float)
        t = np.asarray(self.times, dtype=float)
        if Y.ndim != 2 or t.ndim != 1 or t.size != Y.shape[1]:
            raise ValueError(f"observations {Y.shape} do not match {t.shape} times")
        if t.size > 1 and not np.all(np.diff(t) > 0):
            raise ValueError("times must be strictly increasing")
        object.__setattr__(self, "observations", Y)
        object.__setattr__(self, "times", t)
        if self.truth is not None:
            if self.truth.states.shape != Y.shape or not np.array_equal(self.truth.times, t):
                raise ValueError("truth trajectory does not match observations")
        if self.true_noise is not None:
            N = np.asarray(self.true_noise, dtype=float)
            if N.shape != Y.shape:
                raise ValueError(f"true noise {N.shape} does not match observations {Y.shape}")
            object.__setattr__(self, "true_noise", N)

    @property
    def n(self) -> int:
        return self.observations.shape[0]

    @property
    def m(self) -> int:
        return self.observations.shape[1]

    @property
    def gaps(self) -> np.ndarray:
        return np.diff(self.times)

    def validate(self, atol: float = 0.0):
        """Check ``Y = X + N`` when both truth sections are present.

        The generators store ``Y`` as the floating-point sum ``X + N``, so the
        default check is exact equality.
        """
        if self.truth is None or self.true_noise is None:
            return
        err = np.abs(self.truth.states + self.true_noise - self.observations)
        if np.max(err, initial=0.0) > atol:
            j = int(np.argmax(np.max(err, axis=0)))
            raise ValueError(f"Y != X + N at column {j} (max error {err.max():.3e})")


def noise_sigma(data, percent: float) -> np.ndarray:
    """Per-coordinate noise scale ``percent/100 * std(row)`` (sample std, ddof=1)."""
    data = np.asarray(data, dtype=float)
    if percent < 0:
        raise ValueError("noise percent must be non-negative")
    if data.ndim != 2 or data.shape[1] < 2:
        raise ValueError("need an n x m matrix with m >= 2")
    if percent == 0:
        return np.zeros(data.shape[0])
    std = data.std(axis=1, ddof=1)
    flat = np.flatnonzero(std == 0)
    if flat.size:
        raise ValueError(f"coordinate {int(flat[0])} is constant; a percentage "
                         "of its standard deviation is undefined")
    return percent / 100.0 * std


def _corrupted(X: Trajectory, noise, provenance):
    return NoisyDataset(X.states + noise, X.times, truth=X, true_noise=noise,
                        provenance=provenance)


def add_gaussian_noise(X: Trajectory, percent: float, seed) -> NoisyDataset:
    scale = noise_sigma(X.states, percent)
    rng = np.random.default_rng(seed)
    noise = scale[:, None] * rng.standard_normal(X.states.shape)
    return _corrupted(X, noise, {"distribution": "gaussian", "percent": percent,
                                 "seed": seed})


def add_student_t_noise(X: Trajectory, percent: float, dof: float, seed) -> NoisyDataset:
    """Heavy-tailed noise: standard Student's T draws times the percentage scale.

    The scale multiplies the standard T variate, so the noise variance is
    ``scale**2 * dof / (dof - 2)``, not ``scale**2``.
    """
    if dof is None or not dof >= 3:
        raise ValueError(f"Student's T noise needs dof >= 3, got {dof}")
    scale = noise_sigma(X.states, percent)
    rng = np.random.default_rng(seed)
    noise = scale[:, None] * rng.standard_t(dof, size=X.states.shape)
    return _corrupted(X, noise, {"distribution": "student_t", "percent": percent,
                                 "dof": dof, "seed": seed})


def moving_average(Y, window: int) -> np.ndarray:
    """Centered moving average along columns; the window shrinks symmetrically
    near the ends so every average stays centered."""
    Y = np.asarray(Y, dtype=float)
    m = Y.shape[1]
    if window < 1 or window % 2 == 0 or window > m:
        raise ValueError(f"window must be odd and in [1, {m}], got {window}")
    half = window // 2
    j = np.arange(m)
    h = np.minimum(half, np.minimum(j, m - 1 - j))
    total = Y.copy()
    for k in range(1, half + 1):
        cols = j[h >= k]
        total[:, cols] += Y[:, cols - k] + Y[:, cols + k]
    return total / (2 * h + 1)


def smooth_initial_noise(Y, window: int = 5) -> np.ndarray:
    """Initial noise estimate ``Y - moving_average(Y, window)``."""
    Y = np.asarray(Y, dtype=float)
    if window == 1:
        return np.zeros_like(Y)
    return Y - moving_average(Y, window)
