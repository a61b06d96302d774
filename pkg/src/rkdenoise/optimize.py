"""Limited-memory BFGS with a strong-Wolfe line search.

Line search follows Nocedal & Wright (2006), Algorithms 3.5 and 3.6, with
safeguarded cubic interpolation in both the bracketing and zoom phases.
"""
from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

GRADIENT_TOL = "gradient-tol"
F_TOL = "f-tol"
MAX_ITERS = "max-iters"
LINE_SEARCH_FAILURE = "line-search-failure"


@dataclass(frozen=True)
class OptimizerOptions:
    memory: int | None = 10
    max_iters: int = 5000
    grad_tol: float = 1e-8
    f_tol: float = 1e-12
    wolfe_c1: float = 1e-4
    wolfe_c2: float = 0.9
    max_linesearch: int = 40

    def __post_init__(self):
        if not 0 < self.wolfe_c1 < self.wolfe_c2 < 1:
            raise ValueError("need 0 < wolfe_c1 < wolfe_c2 < 1")
        if self.memory is not None and self.memory < 1:
            raise ValueError("memory must be >= 1 (or None for unlimited)")
        if self.grad_tol <= 0 or self.f_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_iters < 0 or self.max_linesearch < 1:
            raise ValueError("iteration limits must be positive")


@dataclass
class OptimizeReport:
    x: np.ndarray
    fun: float
    grad_norm: float
    iterations: int
    nfev: int
    termination: str
    steps: list = field(default_factory=list, repr=False)

    @property
    def converged(self) -> bool:
        return self.termination in (GRADIENT_TOL, F_TOL)

    def summary(self) -> dict:
        return {"fun": self.fun, "grad_norm": self.grad_norm, "iterations": self.iterations,
                "nfev": self.nfev, "termination": self.termination}


@dataclass
class _Point:
    alpha: float
    f: float
    g: np.ndarray | None
    slope: float


def _cubic_min(a, fa, da, b, fb, db, lo, hi):
    """Minimizer of the cubic through two points with slopes, clipped to [lo, hi];
    falls back to the midpoint when the cubic has no usable minimum."""
    if a == b:
        return 0.5 * (lo + hi)
    d1 = da + db - 3.0 * (fa - fb) / (a - b)
    disc = d1 * d1 - da * db
    if not (np.isfinite(d1) and np.isfinite(disc)) or disc < 0:
        return 0.5 * (lo + hi)
    d2 = math.copysign(math.sqrt(disc), b - a)
    denom = db - da + 2.0 * d2
    if denom == 0:
        return 0.5 * (lo + hi)
    t = b - (b - a) * (db + d2 - d1) / denom
    if not np.isfinite(t):
        return 0.5 * (lo + hi)
    return min(max(t, lo), hi)


def strong_wolfe_search(evaluate, f0, slope0, alpha0, c1=1e-4, c2=0.9, max_evals=40):
    """Find a step satisfying the strong Wolfe conditions along a descent direction.

    ``evaluate(alpha)`` returns ``(f, g, slope)`` at the trial point, where
    slope is the directional derivative. Non-finite values count as a failed
    (too long) step. Returns ``(point or None, evaluations)``.
    """
    if not slope0 < 0:
        raise ValueError("search direction is not a descent direction")
    nfev = 0

    def probe(alpha):
        nonlocal nfev
        nfev += 1
        f, g, slope = evaluate(alpha)
        if not (np.isfinite(f) and np.isfinite(slope)):
            return _Point(alpha, np.inf, None, np.nan)
        return _Point(alpha, f, g, slope)

    def armijo(p):
        return np.isfinite(p.f) and p.f <= f0 + c1 * p.alpha * slope0

    def curvature(p):
        return abs(p.slope) <= -c2 * slope0

    prev = _Point(0.0, f0, None, slope0)
    cur = probe(alpha0)
    lo = hi = None
    first = True
    while True:
        if not armijo(cur) or (not first and cur.f >= prev.f):
            lo, hi = prev, cur
            break
        if curvature(cur):
            return cur, nfev
        if cur.slope >= 0:
            lo, hi = cur, prev
            break
        if nfev >= max_evals:
            return None, nfev
        nxt = _cubic_min(prev.alpha, prev.f, prev.slope, cur.alpha, cur.f, cur.slope,
                         cur.alpha + 0.01 * (cur.alpha - prev.alpha), 10.0 * cur.alpha)
        prev, cur = cur, probe(nxt)
        first = False

    # zoom: lo satisfies Armijo with the lowest value seen; the minimizer lies between lo and hi
    while nfev < max_evals:
        a, b = sorted((lo.alpha, hi.alpha))
        width = b - a
        if width <= 1e-14 * max(1.0, b):
            break
        if np.isfinite(hi.f):
            trial = _cubic_min(lo.alpha, lo.f, lo.slope, hi.alpha, hi.f, hi.slope, a, b)
        else:
            trial = 0.5 * (a + b)
        # keep trials away from the bracket ends
        trial = min(max(trial, a + 0.1 * width), b - 0.1 * width)
        cur = probe(trial)
        if not armijo(cur) or cur.f >= lo.f:
            hi = cur
        else:
            if curvature(cur):
                return cur, nfev
            if cur.slope * (hi.alpha - lo.alpha) >= 0:
                hi = lo
            lo = cur
    return None, nfev


def _two_loop(g, pairs):
    q = g.copy()
    alphas = []
    for s, y, rho in reversed(pairs):
        a = rho * (s @ q)
        q -= a * y
        alphas.append(a)
    s, y, _ = pairs[-1]
    r = ((s @ y) / (y @ y)) * q
    for (s, y, rho), a in zip(pairs, reversed(alphas)):
        b = rho * (y @ r)
        r += (a - b) * s
    return -r


def lbfgs_minimize(objective, x0, opts: OptimizerOptions = OptimizerOptions(),
                   trace=None, callback=None) -> OptimizeReport:
    """Minimize ``objective(x) -> (f, grad)`` from ``x0``.

    ``trace`` is an optional text stream receiving one JSON record per
    accepted iteration (``iter``, ``f``, ``grad_inf``, ``step``). ``callback``
    is called as ``callback(iteration, x, f)`` after each accepted step.

    A line search that fails (after one retry along steepest descent) ends
    the run with ``line-search-failure``; the report then holds the lowest
    finite point evaluated so far.
    """
    x = np.array(x0, dtype=float)
    f, g = objective(x)
    nfev = 1
    if not (np.isfinite(f) and np.all(np.isfinite(g))):
        raise ValueError("objective is not finite at the starting point")
    f = float(f)
    pairs = deque(maxlen=opts.memory)
    steps = []
    termination = MAX_ITERS
    it = 0
    while True:
        gnorm = float(np.max(np.abs(g), initial=0.0))
        if gnorm <= opts.grad_tol:
            termination = GRADIENT_TOL
            break
        if it >= opts.max_iters:
            termination = MAX_ITERS
            break

        result = None
        best = None  # lowest finite trial, kept for a failed search
        for attempt in range(2):
            if pairs:
                d = _two_loop(g, pairs)
                alpha0 = 1.0
                if not g @ d < 0:
                    pairs.clear()
            if not pairs:
                d = -g
                alpha0 = min(1.0, 1.0 / float(np.sum(np.abs(g))))
            slope0 = float(g @ d)

            def evaluate(alpha, d=d):
                nonlocal best
                xa = x + alpha * d
                fa, ga = objective(xa)
                if not np.isfinite(fa):
                    return np.inf, None, np.nan
                if best is None or fa < best[0]:
                    best = (float(fa), xa, ga)
                return float(fa), ga, float(ga @ d)

            result, used = strong_wolfe_search(evaluate, f, slope0, alpha0, opts.wolfe_c1,
                                               opts.wolfe_c2, opts.max_linesearch)
            nfev += used
            if result is not None or not pairs:
                break
            # retry once along steepest descent with the curvature memory dropped
            pairs.clear()
        if result is None:
            termination = LINE_SEARCH_FAILURE
            if best is not None and best[0] < f:
                f, x, g = best
            break

        s = result.alpha * d
        y = result.g - g
        sy = float(s @ y)
        if sy > 1e-10 * np.linalg.norm(s) * np.linalg.norm(y):
            pairs.append((s, y, 1.0 / sy))
        f_old = f
        x = x + s
        f, g = result.f, result.g
        it += 1
        steps.append({"alpha": result.alpha, "f_old": f_old, "f": f,
                      "slope0": slope0, "slope": result.slope})
        if trace is not None:
            trace.write(json.dumps({"iter": it, "f": f, "grad_inf": float(np.max(np.abs(g))),
                                    "step": result.alpha}) + "\n")
        if callback is not None:
            callback(it, x, f)
        if f_old - f <= opts.f_tol * max(abs(f_old), abs(f), 1.0):
            termination = F_TOL
            break

    return OptimizeReport(x, f, float(np.max(np.abs(g), initial=0.0)), it, nfev,
                          termination, steps)
