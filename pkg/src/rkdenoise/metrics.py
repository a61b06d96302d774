"""Error metrics for learned fields, noise estimates and forward orbits."""
from __future__ import annotations

import numpy as np

from .errors import DivergenceError
from .integrate import Trajectory
from .network import mlp_forward
from .stepper import FlowModel, step_cached


def vector_field_error(model: FlowModel, truth_field, X) -> float:
    """Relative squared error of the learned field along the states ``X``.

    ``X`` is a :class:`Trajectory` or an ``n x m`` matrix of column states.
    """
    states = X.states if isinstance(X, Trajectory) else np.asarray(X, dtype=float)
    if states.ndim != 2 or states.shape[1] == 0:
        raise ValueError("need a nonempty n x m matrix of states")
    f = np.asarray(truth_field(states), dtype=float)
    denom = float(np.sum(f * f))
    if denom == 0:
        raise ValueError("true field vanishes on every state; relative error undefined")
    fhat = mlp_forward(model.params, states)
    return float(np.sum((f - fhat) ** 2)) / denom


def noise_error(estimated, true_noise) -> float:
    """Mean over columns of the squared noise-estimate error."""
    est = np.asarray(estimated, dtype=float)
    tru = np.asarray(true_noise, dtype=float)
    if est.shape != tru.shape:
        raise ValueError(f"estimate shape {est.shape} != true noise shape {tru.shape}")
    return float(np.sum((est - tru) ** 2)) / tru.shape[1]


def forward_orbit(model: FlowModel, x0, gaps) -> np.ndarray:
    """States ``F^k(x0)`` for ``k = 0..len(gaps)``, as columns.

    Stops early at the first non-finite state; the remaining columns are NaN.
    """
    gaps = np.asarray(gaps, dtype=float)
    out = np.full((len(x0), gaps.size + 1), np.nan)
    x = np.asarray(x0, dtype=float)[:, None]
    out[:, 0] = x[:, 0]
    with np.errstate(over="ignore", invalid="ignore"):
        for k, dt in enumerate(gaps):
            x, _ = step_cached(model.params, model.tableau, x, dt)
            if not np.all(np.isfinite(x)):
                break
            out[:, k + 1] = x[:, 0]
    return out


def forward_orbit_error(model: FlowModel, X: Trajectory, aligned: bool = False) -> float:
    """Normalized squared distance between the truth and the orbit of its first state.

    By default the k-step image ``F^k(x_1)`` is compared with ``x_k`` for
    ``k = 1..m-1`` (one sample behind the image). ``aligned=True`` compares
    ``F^k(x_1)`` with ``x_{k+1}`` instead. A divergent orbit gives ``inf``.
    """
    S = X.states
    if S.shape[1] < 2:
        raise ValueError("need at least two samples")
    orbit = forward_orbit(model, S[:, 0], X.gaps)
    if not np.all(np.isfinite(orbit)):
        return float("inf")
    ref = S[:, 1:] if aligned else S[:, :-1]
    return float(np.sum((ref - orbit[:, 1:]) ** 2) / np.sum(S * S))


def predict(model: FlowModel, x0, times) -> Trajectory:
    """Forward orbit of ``x0`` sampled at ``times`` (``times[0]`` is the time of ``x0``)."""
    times = np.asarray(times, dtype=float)
    orbit = forward_orbit(model, x0, np.diff(times))
    bad = ~np.all(np.isfinite(orbit), axis=0)
    if bad.any():
        k = int(np.argmax(bad))
        raise DivergenceError(f"prediction diverged after t={times[k - 1]!r}",
                              time=float(times[k - 1]), step=k)
    return Trajectory(times, orbit)


def noise_moments(samples) -> dict:
    """Mean, variance (1/m), skewness and excess kurtosis of a sample."""
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < 4:
        raise ValueError("need at least four samples")
    mu = float(x.mean())
    c = x - mu
    var = float(np.mean(c * c))
    if var == 0:
        raise ValueError("zero variance: skew and kurtosis are undefined")
    skew = float(np.mean(c**3) / var**1.5)
    kurt = float(np.mean(c**4) / var**2 - 3.0)
    return {"mu": mu, "var": var, "skew": skew, "kurt": kurt}


def median_over_trials(values):
    """Median of the finite entries and the number of non-finite ones skipped."""
    v = np.asarray(values, dtype=float).ravel()
    if v.size == 0:
        raise ValueError("no values")
    finite = v[np.isfinite(v)]
    if finite.size == 0:
        raise ValueError("every value is non-finite")
    return float(np.median(finite)), int(v.size - finite.size)
