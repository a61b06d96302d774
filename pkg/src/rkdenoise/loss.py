"""Windowed, noise-aware training objective.

For every anchor column ``j`` with ``q`` columns on either side, the
de-noised state ``y_j - nu_j`` is pushed ``i = 1..q`` steps forward and
backward through the learned flow map and compared with ``y_{j+i} -
nu_{j+i}``. Squared residuals are weighted by ``omega0 * rho**-|i|``; the
objective adds ``gamma * ||N||_F^2 + beta * sum ||W_i||_F^2``.

The joint variable vector is ``[theta; vec(N_1); ...; vec(N_k)]`` with
``theta`` ordered as in :func:`rkdenoise.network.flatten` and each noise
matrix (n x m) raveled row-major.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corrupt import NoisyDataset
from .network import MlpParams, Workspace, flatten, param_count, unflatten, weight_sq_norm
from .stepper import RkTableau, step_backward, step_cached


@dataclass(frozen=True)
class LossConfig:
    q: int = 3
    rho: float = 1.5
    omega0: float = 1.0
    gamma: float = 0.1
    beta: float = 1e-6

    def __post_init__(self):
        if int(self.q) != self.q or self.q < 1:
            raise ValueError(f"window half-width q must be a positive integer, got {self.q}")
        if not self.rho >= 1:
            raise ValueError(f"rho must be >= 1, got {self.rho}")
        if not self.omega0 > 0:
            raise ValueError(f"omega0 must be positive, got {self.omega0}")
        for name in ("gamma", "beta"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v >= 0):
                raise ValueError(f"{name} must be finite and non-negative, got {v}")
        object.__setattr__(self, "q", int(self.q))


def window_weights(config: LossConfig):
    """Offsets ``(-q..-1, 1..q)`` and their weights ``omega0 * rho**-|i|``."""
    q = config.q
    offsets = np.concatenate([np.arange(-q, 0), np.arange(1, q + 1)])
    return offsets, config.omega0 * float(config.rho) ** (-np.abs(offsets).astype(float))


class WindowedObjective:
    """Value and exact gradient of the windowed loss over one or more datasets.

    Index bookkeeping is precomputed once; each call runs all anchors of all
    datasets, forward and backward chains together, as one column batch.
    """

    def __init__(self, datasets, widths, tableau: RkTableau, config: LossConfig):
        if isinstance(datasets, NoisyDataset):
            datasets = [datasets]
        self.datasets = list(datasets)
        if not self.datasets:
            raise ValueError("need at least one dataset")
        self.widths = tuple(widths)
        self.tableau = tableau
        self.config = config
        q = config.q
        n = self.widths[0]
        for k, d in enumerate(self.datasets):
            if d.n != n:
                raise ValueError(f"dataset {k} has dimension {d.n}, network expects {n}")
            if d.m <= 2 * q:
                raise ValueError(f"dataset {k} has m={d.m} samples; the window needs m > 2q = {2 * q}")

        self.shapes = [(d.n, d.m) for d in self.datasets]
        starts = np.cumsum([0] + [d.m for d in self.datasets])
        self.col_starts = starts
        self.Y = np.concatenate([d.observations for d in self.datasets], axis=1)
        # gap from each column to the next one of the same dataset
        gap_next = np.full(starts[-1], np.nan)
        anchors = []
        for s, d in zip(starts[:-1], self.datasets):
            gap_next[s:s + d.m - 1] = d.gaps
            anchors.append(np.arange(s + q, s + d.m - q))
        self.anchors = np.concatenate(anchors)
        J = self.anchors
        self.fwd_idx = [J + k for k in range(1, q + 1)]
        self.bwd_idx = [J - k for k in range(1, q + 1)]
        self.step_dt = [np.concatenate([gap_next[J + k - 1], -gap_next[J - k]])
                        for k in range(1, q + 1)]
        self.weights = config.omega0 * float(config.rho) ** -np.arange(1, q + 1, dtype=float)

        self.n_params = param_count(self.widths)
        self.n_noise = int(self.Y.size)
        self.size = self.n_params + self.n_noise
        self.last_diagnostic = None
        self._ws = Workspace()

    # -- packing ---------------------------------------------------------
    def pack(self, params: MlpParams, noises) -> np.ndarray:
        if isinstance(noises, np.ndarray) and noises.ndim == 2:
            noises = [noises]
        if len(noises) != len(self.datasets):
            raise ValueError(f"{len(noises)} noise estimates for {len(self.datasets)} datasets")
        parts = [flatten(params)]
        for N, shape in zip(noises, self.shapes):
            N = np.asarray(N, dtype=float)
            if N.shape != shape:
                raise ValueError(f"noise estimate shape {N.shape} != dataset shape {shape}")
            parts.append(N.ravel())
        return np.concatenate(parts)

    def _noise_matrix(self, z):
        # (n, M) view with the datasets' noise columns side by side
        blocks = []
        pos = self.n_params
        for n, m in self.shapes:
            blocks.append(z[pos:pos + n * m].reshape(n, m))
            pos += n * m
        return blocks

    def split(self, z):
        """Network parameters and per-dataset noise matrices (copies) from ``z``."""
        z = np.asarray(z, dtype=float)
        if z.shape != (self.size,):
            raise ValueError(f"expected a vector of length {self.size}, got {z.shape}")
        params = unflatten(self.widths, z[:self.n_params])
        return params, [N.copy() for N in self._noise_matrix(z)]

    # -- evaluation ------------------------------------------------------
    def _forward(self, z, keep_tapes):
        params = unflatten(self.widths, z[:self.n_params], copy=False)
        blocks = self._noise_matrix(z)
        N = blocks[0] if len(blocks) == 1 else np.concatenate(blocks, axis=1)
        Y, J = self.Y, self.anchors
        B = J.size
        X0 = Y[:, J] - N[:, J]
        state = np.concatenate([X0, X0], axis=1)
        tapes, residuals = [], []
        pred = 0.0
        for k in range(self.config.q):
            state, tape = step_cached(params, self.tableau, state, self.step_dt[k], self._ws, (k,))
            fi, bi = self.fwd_idx[k], self.bwd_idx[k]
            r = state.copy()
            r[:, :B] += N[:, fi] - Y[:, fi]
            r[:, B:] += N[:, bi] - Y[:, bi]
            pred += self.weights[k] * float(np.sum(r * r))
            if keep_tapes:
                tapes.append(tape)
                residuals.append(r)
        reg = self.config.gamma * float(np.sum(N * N)) + self.config.beta * weight_sq_norm(params)
        return pred + reg, pred, params, N, tapes, residuals

    def value(self, z) -> float:
        with np.errstate(over="ignore", invalid="ignore"):
            total = self._forward(np.asarray(z, dtype=float), False)[0]
        return total if np.isfinite(total) else np.inf

    def prediction_term(self, z) -> float:
        """The windowed residual sum alone, without the two penalties."""
        with np.errstate(over="ignore", invalid="ignore"):
            return self._forward(np.asarray(z, dtype=float), False)[1]

    def value_and_grad(self, z):
        """Loss and gradient at ``z``.

        A non-finite loss (divergent flow map) returns ``(inf, nan-vector)``
        and records the reason in ``last_diagnostic``.
        """
        z = np.asarray(z, dtype=float)
        with np.errstate(over="ignore", invalid="ignore"):
            total, _, params, N, tapes, residuals = self._forward(z, True)
        if not np.isfinite(total):
            self.last_diagnostic = "non-finite loss: learned flow map diverged inside the window"
            return np.inf, np.full(self.size, np.nan)
        self.last_diagnostic = None

        grad = np.zeros(self.size)
        gparams = unflatten(self.widths, grad[:self.n_params], copy=False)
        gN = np.zeros_like(N)
        B = self.anchors.size
        adj = None
        for k in range(self.config.q - 1, -1, -1):
            w2r = (2.0 * self.weights[k]) * residuals[k]
            gN[:, self.fwd_idx[k]] += w2r[:, :B]
            gN[:, self.bwd_idx[k]] += w2r[:, B:]
            adj = w2r if adj is None else adj + w2r
            adj = step_backward(params, self.tableau, tapes[k], adj, gparams, self._ws)
        gN[:, self.anchors] -= adj[:, :B] + adj[:, B:]
        gN += (2.0 * self.config.gamma) * N
        if self.config.beta:
            for gW, W in zip(gparams.weights, params.weights):
                gW += (2.0 * self.config.beta) * W

        pos = self.n_params
        for s, (n, m) in zip(self.col_starts[:-1], self.shapes):
            grad[pos:pos + n * m] = gN[:, s:s + m].ravel()
            pos += n * m
        return total, grad

    __call__ = value_and_grad


def _as_list(x):
    if isinstance(x, (list, tuple)):
        return list(x)
    return [x]


def loss_value(params: MlpParams, noise, data: NoisyDataset, tableau: RkTableau,
               config: LossConfig) -> float:
    obj = WindowedObjective([data], params.widths, tableau, config)
    return obj.value(obj.pack(params, [noise]))


def loss_multi(params: MlpParams, noises, datasets, tableau: RkTableau,
               config: LossConfig) -> float:
    """Shared-network loss summed over datasets, each with its own noise estimate."""
    datasets = _as_list(datasets)
    noises = _as_list(noises)
    if len(noises) != len(datasets):
        raise ValueError(f"{len(noises)} noise estimates for {len(datasets)} datasets")
    obj = WindowedObjective(datasets, params.widths, tableau, config)
    return obj.value(obj.pack(params, noises))


def loss_gradient(params: MlpParams, noises, datasets, tableau: RkTableau, config: LossConfig):
    """Loss and flat gradient over ``[theta; vec(N_1); ...]``."""
    datasets = _as_list(datasets)
    noises = _as_list(noises)
    obj = WindowedObjective(datasets, params.widths, tableau, config)
    return obj.value_and_grad(obj.pack(params, noises))
