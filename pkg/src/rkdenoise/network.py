"""Feed-forward vector-field interpolant with hand-written reverse mode.

States are columns: ``mlp_forward(params, X)`` accepts ``(n,)`` or ``(n, B)``.
Parameters flatten layer by layer, each layer contributing its weight matrix
(shape ``(out, in)``, row-major) followed by its bias.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class MlpParams:
    widths: tuple
    weights: list
    biases: list

    def __post_init__(self):
        widths = tuple(int(w) for w in self.widths)
        object.__setattr__(self, "widths", widths)
        if len(widths) < 2 or min(widths) < 1:
            raise ValueError(f"invalid widths {widths}")
        if widths[0] != widths[-1]:
            raise ValueError(f"input width {widths[0]} != output width {widths[-1]}")
        if len(self.weights) != len(widths) - 1 or len(self.biases) != len(widths) - 1:
            raise ValueError("need one weight matrix and bias per layer")
        for i, (W, c) in enumerate(zip(self.weights, self.biases)):
            if W.shape != (widths[i + 1], widths[i]) or c.shape != (widths[i + 1],):
                raise ValueError(f"layer {i}: weight {W.shape} / bias {c.shape} do not "
                                 f"chain {widths[i]} -> {widths[i + 1]}")

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    @property
    def dim(self) -> int:
        return self.widths[0]


def param_count(widths) -> int:
    return sum(a * b + b for a, b in zip(widths[:-1], widths[1:]))


def flatten(params: MlpParams) -> np.ndarray:
    parts = []
    for W, c in zip(params.weights, params.biases):
        parts.append(W.ravel())
        parts.append(c)
    return np.concatenate(parts)


def unflatten(widths, flat, copy: bool = True) -> MlpParams:
    """Inverse of :func:`flatten`. With ``copy=False`` the layers are views into ``flat``."""
    widths = tuple(int(w) for w in widths)
    flat = np.asarray(flat, dtype=float)
    if flat.ndim != 1 or flat.size != param_count(widths):
        raise ValueError(f"expected {param_count(widths)} parameters for widths "
                         f"{widths}, got {flat.size}")
    if copy:
        flat = flat.copy()
    weights, biases = [], []
    pos = 0
    for a, b in zip(widths[:-1], widths[1:]):
        weights.append(flat[pos:pos + a * b].reshape(b, a))
        pos += a * b
        biases.append(flat[pos:pos + b])
        pos += b
    return MlpParams(widths, weights, biases)


def zeros_like_params(widths) -> tuple[MlpParams, np.ndarray]:
    """Zero parameters as views into a fresh flat buffer; returns both."""
    flat = np.zeros(param_count(widths))
    return unflatten(widths, flat, copy=False), flat


def elu(x):
    x = np.asarray(x, dtype=float)
    return np.where(x > 0, x, np.expm1(np.minimum(x, 0.0)))


class Workspace:
    """Persistent scratch arrays keyed by name.

    Large temporaries dominate the cost of a batched pass, mostly through
    fresh page faults; reusing buffers across objective evaluations avoids
    that. A buffer stays valid until the same key is requested again.
    """

    def __init__(self):
        self._buffers = {}

    def get(self, key, shape):
        buf = self._buffers.get(key)
        if buf is None or buf.shape != shape:
            buf = self._buffers[key] = np.empty(shape)
        return buf


def _buffer(ws, key, shape):
    return np.empty(shape) if ws is None else ws.get(key, shape)


def xavier_init(widths, seed) -> MlpParams:
    """Glorot-uniform weights on +-sqrt(6 / (fan_in + fan_out)), zero biases."""
    rng = np.random.default_rng(seed)
    widths = tuple(int(w) for w in widths)
    weights, biases = [], []
    for a, b in zip(widths[:-1], widths[1:]):
        bound = np.sqrt(6.0 / (a + b))
        weights.append(rng.uniform(-bound, bound, size=(b, a)))
        biases.append(np.zeros(b))
    return MlpParams(widths, weights, biases)


def _as_columns(params, x):
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = x[:, None] if single else x
    if X.ndim != 2 or X.shape[0] != params.dim:
        raise ValueError(f"expected states of dimension {params.dim}, got shape {x.shape}")
    return X, single


def mlp_forward(params: MlpParams, x):
    X, single = _as_columns(params, x)
    out, _ = mlp_forward_cached(params, X)
    return out[:, 0] if single else out


def mlp_forward_cached(params: MlpParams, X, ws: Workspace | None = None, tag=()):
    """Forward pass on column states ``X`` keeping what the backward pass needs.

    The cache holds, per layer, the layer input and (for hidden layers) the
    ELU slope at the pre-activation. With a workspace, outputs and cache live
    in buffers keyed by ``tag``.
    """
    a = X
    cache = []
    last = params.n_layers - 1
    B = X.shape[1]
    for i, (W, c) in enumerate(zip(params.weights, params.biases)):
        z = _buffer(ws, (*tag, "z", i), (W.shape[0], B))
        np.matmul(W, a, out=z)
        z += c[:, None]
        if i == last:
            cache.append((a, None))
            return z, cache
        # in place: slope = exp(min(z, 0)), z <- max(z, 0) + slope - 1
        slope = _buffer(ws, (*tag, "s", i), z.shape)
        np.minimum(z, 0.0, out=slope)
        np.exp(slope, out=slope)
        np.maximum(z, 0.0, out=z)
        z += slope
        z -= 1.0
        cache.append((a, slope))
        a = z


def mlp_backward(params: MlpParams, cache, upstream, grad: MlpParams | None = None,
                 ws: Workspace | None = None):
    """Pull ``upstream`` (n x B) back through a cached forward pass.

    Returns the input gradient ``J^T upstream`` per column. If ``grad`` is
    given, the parameter gradient of ``sum(upstream * output)`` is added into
    it in place. With a workspace the returned array is a scratch buffer,
    overwritten by the next call.
    """
    delta = upstream
    B = upstream.shape[1]
    for i in range(params.n_layers - 1, -1, -1):
        W = params.weights[i]
        a_in, _ = cache[i]
        if grad is not None:
            grad.weights[i] += delta @ a_in.T
            grad.biases[i] += delta.sum(axis=1)
        prev = _buffer(ws, ("back", i), (W.shape[1], B))
        np.matmul(W.T, delta, out=prev)
        if i > 0:
            prev *= cache[i - 1][1]
        delta = prev
    return delta


def mlp_backprop(params: MlpParams, x, upstream):
    """Gradients of ``upstream . f(x)`` with respect to ``x`` and the flat parameters.

    Column batches sum their parameter gradients.
    """
    X, single = _as_columns(params, x)
    U = np.asarray(upstream, dtype=float)
    U = U[:, None] if U.ndim == 1 else U
    if U.shape != (params.widths[-1], X.shape[1]):
        raise ValueError(f"upstream shape {np.shape(upstream)} does not match output")
    _, cache = mlp_forward_cached(params, X)
    grad, flat = zeros_like_params(params.widths)
    gx = mlp_backward(params, cache, U, grad)
    return (gx[:, 0] if single else gx), flat


def weight_sq_norm(params: MlpParams) -> float:
    return float(sum(np.sum(W * W) for W in params.weights))
