"""Analytic benchmark vector fields.

Every field takes the state with coordinates along the first axis, so a
single ``(n,)`` vector and a batch of column states ``(n, B)`` are both
accepted and the result has the same shape as the input.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class CubicOscParams:
    damping: float = 0.1
    coupling: float = 2.0

    def __post_init__(self):
        if not (np.isfinite(self.damping) and np.isfinite(self.coupling)):
            raise ValueError("cubic oscillator parameters must be finite")


@dataclass(frozen=True)
class LorenzParams:
    sigma: float = 10.0
    rho: float = 28.0
    beta: float = 8.0 / 3.0

    def __post_init__(self):
        if not all(np.isfinite([self.sigma, self.rho, self.beta])):
            raise ValueError("Lorenz parameters must be finite")


@dataclass(frozen=True)
class DoublePendulumParams:
    l1: float = 1.0
    l2: float = 1.0
    m1: float = 1.0
    m2: float = 1.0
    g: float = 10.0

    def __post_init__(self):
        vals = [self.l1, self.l2, self.m1, self.m2, self.g]
        if not all(np.isfinite(vals)) or min(vals) <= 0:
            raise ValueError(f"double pendulum parameters must be positive, got {vals}")


def cubic_oscillator_field(state, params: CubicOscParams = CubicOscParams()):
    x, y = np.asarray(state, dtype=float)
    a, c = params.damping, params.coupling
    x3, y3 = x**3, y**3
    return np.array([-a * x3 + c * y3, -c * x3 - a * y3])


def lorenz_field(state, params: LorenzParams = LorenzParams()):
    x, y, z = np.asarray(state, dtype=float)
    return np.array([
        params.sigma * (y - x),
        x * (params.rho - z) - y,
        x * y - params.beta * z,
    ])


def double_pendulum_field(state, params: DoublePendulumParams = DoublePendulumParams()):
    """Canonical equations of the planar double pendulum in (th1, th2, p1, p2)."""
    th1, th2, p1, p2 = np.asarray(state, dtype=float)
    l1, l2, m1, m2, g = params.l1, params.l2, params.m1, params.m2, params.g
    d = th1 - th2
    s, c = np.sin(d), np.cos(d)
    den = m1 + m2 * s**2

    dth1 = (l2 * p1 - l1 * p2 * c) / (l1**2 * l2 * den)
    dth2 = (-m2 * l2 * p1 * c + (m1 + m2) * l1 * p2) / (m2 * l1 * l2**2 * den)
    c1 = p1 * p2 * s / (l1 * l2 * den)
    c2 = (m2 * l2**2 * p1**2 + (m1 + m2) * l1**2 * p2**2
          - 2 * m2 * l1 * l2 * p1 * p2 * c) / (2 * l1**2 * l2**2 * den**2)
    s2 = np.sin(2 * d)
    dp1 = -(m1 + m2) * g * l1 * np.sin(th1) - c1 + c2 * s2
    dp2 = -m2 * g * l2 * np.sin(th2) + c1 - c2 * s2
    return np.array([dth1, dth2, dp1, dp2])


def double_pendulum_energy(state, params: DoublePendulumParams = DoublePendulumParams()):
    """Hamiltonian whose canonical equations are :func:`double_pendulum_field`.

    Kinetic part is the inverse mass matrix quadratic form in the momenta,
    potential is measured from the pivot (so the hanging rest state has
    ``H = -(m1 + m2) g l1 - m2 g l2``).
    """
    th1, th2, p1, p2 = np.asarray(state, dtype=float)
    l1, l2, m1, m2, g = params.l1, params.l2, params.m1, params.m2, params.g
    d = th1 - th2
    den = m1 + m2 * np.sin(d) ** 2
    kinetic = (m2 * l2**2 * p1**2 + (m1 + m2) * l1**2 * p2**2
               - 2 * m2 * l1 * l2 * p1 * p2 * np.cos(d)) / (2 * m2 * l1**2 * l2**2 * den)
    potential = -(m1 + m2) * g * l1 * np.cos(th1) - m2 * g * l2 * np.cos(th2)
    return kinetic + potential


@dataclass(frozen=True)
class System:
    name: str
    dim: int
    field: callable
    params: object


SYSTEMS = {
    "cubic": System("cubic", 2, cubic_oscillator_field, CubicOscParams()),
    "lorenz": System("lorenz", 3, lorenz_field, LorenzParams()),
    "double_pendulum": System("double_pendulum", 4, double_pendulum_field,
                              DoublePendulumParams()),
}


def get_system(name: str) -> System:
    try:
        return SYSTEMS[name]
    except KeyError:
        raise ValueError(f"unknown system {name!r}; expected one of {sorted(SYSTEMS)}") from None


def make_field(name: str):
    """Return a one-argument callable ``f(state)`` with the system's default parameters."""
    system = get_system(name)
    params = system.params
    field = system.field
    return lambda state: field(state, params)
