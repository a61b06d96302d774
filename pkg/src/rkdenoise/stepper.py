"""Explicit Runge-Kutta flow maps built on the network vector field."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DivergenceError
from .network import MlpParams, Workspace, mlp_backward, mlp_forward_cached, zeros_like_params


@dataclass(frozen=True)
class RkTableau:
    """Butcher coefficients of an explicit scheme for autonomous fields."""

    A: np.ndarray
    b: np.ndarray
    name: str = ""

    def __post_init__(self):
        A = np.array(self.A, dtype=float)
        b = np.array(self.b, dtype=float)
        p = b.size
        if p < 1 or b.ndim != 1 or A.shape != (p, p):
            raise ValueError(f"tableau needs A of shape (p, p) and b of length p, "
                             f"got {A.shape} and {b.shape}")
        if np.any(np.triu(A) != 0):
            raise ValueError("A must be strictly lower triangular (explicit scheme)")
        if not np.isclose(b.sum(), 1.0, rtol=0, atol=1e-12):
            raise ValueError(f"weights b must sum to 1, got {b.sum()!r}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    @property
    def stages(self) -> int:
        return self.b.size


RK4 = RkTableau([[0, 0, 0, 0], [0.5, 0, 0, 0], [0, 0.5, 0, 0], [0, 0, 1, 0]],
                [1 / 6, 1 / 3, 1 / 3, 1 / 6], "rk4")
KUTTA3 = RkTableau([[0, 0, 0], [0.5, 0, 0], [-1, 2, 0]], [1 / 6, 2 / 3, 1 / 6], "kutta3")
EULER = RkTableau([[0]], [1], "euler")

TABLEAUX = {t.name: t for t in (RK4, KUTTA3, EULER)}


def get_tableau(name: str) -> RkTableau:
    try:
        return TABLEAUX[name]
    except KeyError:
        raise ValueError(f"unknown tableau {name!r}; expected one of {sorted(TABLEAUX)}") from None


@dataclass(frozen=True)
class FlowModel:
    params: MlpParams
    tableau: RkTableau = RK4


def step_cached(params: MlpParams, tableau: RkTableau, X, dt,
                ws: Workspace | None = None, tag=()):
    """One RK step on column states ``X`` (n x B).

    ``dt`` is a scalar or a length-B vector of per-column steps. Returns the
    new states and a tape for :func:`step_backward`. With a workspace, the
    tape and result occupy buffers keyed by ``tag``.
    """
    dt = np.asarray(dt, dtype=float)
    h = dt if dt.ndim == 0 else dt[None, :]
    A, b = tableau.A, tableau.b
    ks, caches = [], []
    for s in range(tableau.stages):
        u = X
        for r in range(s):
            if A[s, r] != 0.0:
                u = u + (h * A[s, r]) * ks[r]
        k, cache = mlp_forward_cached(params, u, ws, (*tag, s))
        ks.append(k)
        caches.append(cache)
    incr = b[0] * ks[0]
    for s in range(1, tableau.stages):
        incr += b[s] * ks[s]
    incr *= h
    incr += X
    return incr, (h, caches)


def step_backward(params: MlpParams, tableau: RkTableau, tape, upstream, grad: MlpParams | None,
                  ws: Workspace | None = None):
    """Adjoint of :func:`step_cached`: returns ``J_x^T upstream`` and adds the
    parameter gradient into ``grad`` in place."""
    h, caches = tape
    A, b = tableau.A, tableau.b
    p = tableau.stages
    gx = upstream.copy()
    hup = h * upstream
    kbar = [b[s] * hup for s in range(p)]
    for s in range(p - 1, -1, -1):
        ubar = mlp_backward(params, caches[s], kbar[s], grad, ws)
        gx += ubar
        if s:
            hu = h * ubar
            for r in range(s):
                if A[s, r] != 0.0:
                    kbar[r] = kbar[r] + A[s, r] * hu
    return gx


def _columns(model, x):
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = x[:, None] if single else x
    if X.shape[0] != model.params.dim:
        raise ValueError(f"state dimension {X.shape[0]} != model dimension {model.params.dim}")
    return X, single


def rk_step(model: FlowModel, x, dt):
    X, single = _columns(model, x)
    with np.errstate(over="ignore", invalid="ignore"):
        out, _ = step_cached(model.params, model.tableau, X, dt)
    if not np.all(np.isfinite(out)):
        raise DivergenceError("non-finite state in Runge-Kutta step", step=1)
    return out[:, 0] if single else out


def _step_sequence(gaps, i):
    gaps = np.asarray(gaps, dtype=float)
    if abs(i) > gaps.shape[0]:
        raise ValueError(f"|i|={abs(i)} steps requested but only {gaps.shape[0]} gaps given")
    if i >= 0:
        return gaps[:i]
    # backward: consume the gaps preceding the state, latest first
    return -gaps[::-1][:-i]


def flow_steps(model: FlowModel, x, gaps, i: int):
    """Apply the learned flow map ``i`` times.

    For ``i > 0`` the steps use ``gaps[0], gaps[1], ...``. For ``i < 0``,
    ``gaps`` are the intervals leading up to ``x`` in time order and the
    steps use ``-gaps[-1], -gaps[-2], ...``. ``gaps`` may be ``(L,)`` or,
    for column batches, ``(L, B)``.
    """
    X, single = _columns(model, x)
    with np.errstate(over="ignore", invalid="ignore"):
        for k, dt in enumerate(_step_sequence(gaps, i)):
            X, _ = step_cached(model.params, model.tableau, X, dt)
            if not np.all(np.isfinite(X)):
                raise DivergenceError(f"non-finite state after step {k + 1}", step=k + 1)
    return X[:, 0] if single else X


def flow_steps_backprop(model: FlowModel, x, gaps, i: int, upstream):
    """Gradient of ``upstream . F^i(x)`` with respect to ``x`` and the flat parameters."""
    X, single = _columns(model, x)
    U = np.asarray(upstream, dtype=float)
    U = U[:, None] if U.ndim == 1 else U
    tapes = []
    with np.errstate(over="ignore", invalid="ignore"):
        for k, dt in enumerate(_step_sequence(gaps, i)):
            X, tape = step_cached(model.params, model.tableau, X, dt)
            tapes.append(tape)
            if not np.all(np.isfinite(X)):
                raise DivergenceError(f"non-finite state after step {k + 1}", step=k + 1)
    grad, flat = zeros_like_params(model.params.widths)
    g = U.copy()
    for tape in reversed(tapes):
        g = step_backward(model.params, model.tableau, tape, g, grad)
    return (g[:, 0] if single else g), flat
