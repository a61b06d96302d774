"""Ground-truth trajectory generation."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DivergenceError, FixedPointError

DEFAULT_MAX_STEP = 1e-3


@dataclass(frozen=True)
class Trajectory:
    """Sampled states: ``states[:, j]`` is the state at ``times[j]``."""

    times: np.ndarray
    states: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        states = np.asarray(self.states, dtype=float)
        if states.ndim != 2:
            raise ValueError(f"states must be an n x m matrix, got shape {states.shape}")
        if times.ndim != 1 or times.shape[0] != states.shape[1]:
            raise ValueError(
                f"{times.shape[0] if times.ndim == 1 else times.shape} times "
                f"for {states.shape[1]} state columns")
        if times.size > 1 and not np.all(np.diff(times) > 0):
            raise ValueError("times must be strictly increasing")
        if not np.all(np.isfinite(states)):
            raise ValueError("trajectory states must be finite")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "states", states)

    @property
    def n(self) -> int:
        return self.states.shape[0]

    @property
    def m(self) -> int:
        return self.states.shape[1]

    @property
    def gaps(self) -> np.ndarray:
        return np.diff(self.times)


def _check_times(times):
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size < 1:
        raise ValueError("times must be a nonempty vector")
    if not np.all(np.isfinite(times)) or np.any(np.diff(times) <= 0):
        raise ValueError("times must be finite and strictly increasing")
    return times


def _substeps(h, max_step):
    if max_step is None:
        return 1
    return max(1, math.ceil(abs(h) / max_step - 1e-9))


def rk4_step(field, x, h):
    k1 = field(x)
    k2 = field(x + 0.5 * h * k1)
    k3 = field(x + 0.5 * h * k2)
    k4 = field(x + h * k3)
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def rk4_simulate(field, x0, times, max_step: float | None = DEFAULT_MAX_STEP) -> Trajectory:
    """Integrate ``dx/dt = field(x)`` with classical RK4, sampling at ``times``.

    Each output interval is split into equal substeps no longer than
    ``max_step``; ``max_step=None`` takes exactly one step per interval.
    """
    times = _check_times(times)
    x = np.array(x0, dtype=float)
    out = np.empty((x.size, times.size))
    out[:, 0] = x
    for j in range(times.size - 1):
        gap = times[j + 1] - times[j]
        nsub = _substeps(gap, max_step)
        h = gap / nsub
        for _ in range(nsub):
            x = rk4_step(field, x, h)
        if not np.all(np.isfinite(x)):
            raise DivergenceError(f"non-finite state at t={times[j + 1]!r}",
                                  time=float(times[j + 1]), step=j + 1)
        out[:, j + 1] = x
    return Trajectory(times, out)


def implicit_midpoint_step(field, x, h, fp_tol=1e-12, fp_max_iter=50):
    """Solve ``z = x + h f((x + z)/2)`` by fixed-point iteration.

    Returns the new state and the number of iterations used; raises
    :class:`FixedPointError` if the update size does not drop below ``fp_tol``.
    """
    z = x + h * field(x)
    for it in range(1, fp_max_iter + 1):
        z_new = x + h * field(0.5 * (x + z))
        res = np.max(np.abs(z_new - z))
        z = z_new
        if res < fp_tol:
            return z, it
        if not np.isfinite(res):
            break
    raise FixedPointError(f"implicit midpoint fixed point did not converge "
                          f"(last update {res:.3e})")


def implicit_midpoint_simulate(field, x0, times, fp_tol: float = 1e-12,
                               fp_max_iter: int = 50,
                               max_step: float | None = DEFAULT_MAX_STEP) -> Trajectory:
    """Symplectic (implicit midpoint) integration sampled at ``times``.

    The rule is symmetric, so integrating over negated gaps retraces the
    forward solution. Substepping follows :func:`rk4_simulate`: internal
    steps never exceed ``max_step`` (``None`` takes one step per interval).
    The energy error of the midpoint rule is second order in the step, so
    the cap keeps the double-pendulum energy drift near 1e-6 at output
    spacing 0.01, against 1.6e-4 without substeps.
    """
    if fp_tol <= 0:
        raise ValueError("fp_tol must be positive")
    times = _check_times(times)
    x = np.array(x0, dtype=float)
    out = np.empty((x.size, times.size))
    out[:, 0] = x
    step = 0
    for j in range(times.size - 1):
        gap = times[j + 1] - times[j]
        nsub = _substeps(gap, max_step)
        h = gap / nsub
        for _ in range(nsub):
            try:
                x, _ = implicit_midpoint_step(field, x, h, fp_tol, fp_max_iter)
            except FixedPointError as exc:
                raise FixedPointError(f"step {step}: {exc}", step=step) from None
            step += 1
        if not np.all(np.isfinite(x)):
            raise DivergenceError(f"non-finite state at t={times[j + 1]!r}",
                                  time=float(times[j + 1]), step=j + 1)
        out[:, j + 1] = x
    return Trajectory(times, out)


def sample_exponential_times(mean_dt: float, t0: float, m: int, seed) -> np.ndarray:
    """``m`` times starting at ``t0`` with i.i.d. exponential gaps of mean ``mean_dt``.

    Uses ``numpy.random.default_rng(seed)``.
    """
    if not mean_dt > 0:
        raise ValueError("mean_dt must be positive")
    if m < 2:
        raise ValueError("need at least two sample times")
    rng = np.random.default_rng(seed)
    gaps = rng.exponential(mean_dt, size=m - 1)
    # a zero draw would break strict monotonicity
    gaps = np.maximum(gaps, np.finfo(float).tiny)
    return t0 + np.concatenate(([0.0], np.cumsum(gaps)))
