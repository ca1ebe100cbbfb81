"""Derivative-free 1-D minimization used by the leader response."""
import math

import numpy as np

INV_PHI = (math.sqrt(5) - 1) / 2
INV_PHI2 = (3 - math.sqrt(5)) / 2


def golden_section(f, a, b, xtol=1e-9, max_iter=200):
    """Shrink [a, b] around a local minimum of a unimodal ``f``.

    Returns ``(x, fx, (lo, hi))`` where ``(lo, hi)`` is the final bracket.
    ``f`` may return ``inf`` outside its domain.
    """
    a, b = min(a, b), max(a, b)
    h = b - a
    c = a + INV_PHI2 * h
    d = a + INV_PHI * h
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if h <= xtol:
            break
        if fc <= fd:
            b, d, fd = d, c, fc
            h = INV_PHI * h
            c = a + INV_PHI2 * h
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            h = INV_PHI * h
            d = a + INV_PHI * h
            fd = f(d)
    if fc <= fd:
        return c, fc, (a, d)
    return d, fd, (c, b)


def grid_then_golden(f, lo, hi, n_grid, xtol=1e-9):
    """Coarse grid scan followed by golden-section refinement around the best point.

    Returns ``(x, fx, (lo, hi), at_edge)``; ``at_edge`` is true when the best
    grid point sits on the interval boundary.
    """
    xs = np.linspace(lo, hi, max(int(n_grid), 3))
    fs = np.array([f(x) for x in xs])
    if not np.any(np.isfinite(fs)):
        return None, math.inf, (lo, hi), False
    i = int(np.argmin(fs))
    left = xs[max(i - 1, 0)]
    right = xs[min(i + 1, len(xs) - 1)]
    x, fx, bracket = golden_section(f, left, right, xtol=xtol)
    if fs[i] < fx:
        x, fx = float(xs[i]), float(fs[i])
    return float(x), float(fx), bracket, i in (0, len(xs) - 1)
