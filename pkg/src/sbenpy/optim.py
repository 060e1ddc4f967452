"""Derivative-free minimizers for small extended-real objectives.

Objectives may return :data:`~sbenpy.extended.INF`.  The one-dimensional
routine assumes convexity (so the finite domain is an interval); the
multi-dimensional one is a bounded Nelder-Mead with restarts.
"""

from __future__ import annotations


import numpy as np
from scipy.optimize import minimize, minimize_scalar

from sbenpy.errors import SolverError
from sbenpy.extended import is_inf, to_float



def _finite_boundary(f, inside: float, outside: float, iters: int = 200) -> float:
    """Bisect between a finite point and an infinite one; return the finite side."""
    for _ in range(iters):
        mid = 0.5 * (inside + outside)
        if mid == inside or mid == outside:
            break
        if is_inf(f(mid)):
            outside = mid
        else:
            inside = mid
    return inside


def _polish(f, x: float, a: float, b: float, xtol: float, width: float = 1e-6) -> float:
    """Golden-section refinement near ``x``.

    Bounded Brent stops at roughly ``sqrt(eps) |x|``, which leaves a linear
    error at kinks.  When ``x`` is bracketed by a convex valley the bracket is
    shrunk to ``xtol``.
    """
    h = width * max(1.0, abs(x))
    lo, hi = max(a, x - h), min(b, x + h)
    g = lambda s: to_float(f(s))  # noqa: E731
    fx = g(x)
    if (lo < x and g(lo) < fx) or (hi > x and g(hi) < fx):
        return x
    r = 0.5 * (np.sqrt(5.0) - 1.0)
    c, d = hi - r * (hi - lo), lo + r * (hi - lo)
    fc, fd = g(c), g(d)
    for _ in range(200):
        if hi - lo <= xtol:
            break
        if fc <= fd:
            hi, d, fd = d, c, fc
            c = hi - r * (hi - lo)
            fc = g(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + r * (hi - lo)
            fd = g(d)
    best = min((x, fx), (c, fc), (d, fd), key=lambda p: p[1])
    return best[0]


def minimize_convex_1d(f, lo: float, hi: float, *, rtol: float = 1e-14, grid: int = 9):
    """Minimize a convex extended-real ``f`` on ``[lo, hi]``; returns ``(x, f(x))``.

    The finite domain is located on a coarse grid (refined if empty), its
    ends sharpened by bisection, then bounded Brent search runs to ``rtol``
    relative width.  The domain ends and the best grid node are compared at
    the end so minima sitting on a domain boundary are returned exactly.
    """
    lo, hi = float(lo), float(hi)
    if hi < lo:
        raise ValueError("empty search interval")
    if hi == lo:
        v = f(lo)
        if is_inf(v):
            raise SolverError("objective is +inf on the whole search interval")
        return lo, v

    xs = vals = None
    for npts in (grid, 257, 4097):
        xs = np.linspace(lo, hi, npts)
        vals = [f(float(x)) for x in xs]
        if any(not is_inf(v) for v in vals):
            break
    else:
        raise SolverError("objective is +inf on the whole search interval")

    finite_idx = [i for i, v in enumerate(vals) if not is_inf(v)]
    i0, i1 = finite_idx[0], finite_idx[-1]
    a = float(xs[i0]) if i0 == 0 else _finite_boundary(f, float(xs[i0]), float(xs[i0 - 1]))
    b = float(xs[i1]) if i1 == len(xs) - 1 else _finite_boundary(f, float(xs[i1]), float(xs[i1 + 1]))

    candidates = [(a, f(a)), (b, f(b))]
    best_grid = min(finite_idx, key=lambda i: to_float(vals[i]))
    candidates.append((float(xs[best_grid]), vals[best_grid]))

    if b > a:
        scale = max(1.0, abs(a), abs(b))
        # bounded Brent: parabolic steps on smooth slices, golden-section fallback at kinks
        res = minimize_scalar(lambda s: to_float(f(s)), bounds=(a, b), method="bounded",
                              options={"xatol": rtol * scale, "maxiter": 500})
        xm = _polish(f, float(res.x), a, b, rtol * scale)
        candidates.append((xm, f(xm)))
        step = 4 * rtol * scale
        for xn in (xm - step, xm + step):
            if a <= xn <= b:
                candidates.append((xn, f(xn)))
    x, v = min(candidates, key=lambda c: to_float(c[1]))
    if is_inf(v):
        raise SolverError("no finite value found in the search interval")
    return x, v


def minimize_box(f, lower, upper, start, *, xatol: float = 1e-13, restarts: int = 3,
                 method: str = "nelder-mead", max_sweeps: int = 60):
    """Minimize ``f`` over a box starting from a finite ``start``; returns ``(x, f(x))``.

    Coordinates with ``lower == upper`` are frozen.  One-dimensional problems
    go to :func:`minimize_convex_1d`.  Otherwise ``method="nelder-mead"`` runs
    bounded Nelder-Mead restarted from its own result with a fresh simplex,
    and ``method="cyclic"`` sweeps exact one-dimensional searches over the
    free coordinates until the iterate stops moving.
    """
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    start = np.clip(np.asarray(start, dtype=float), lower, upper)
    free = upper > lower
    nfree = int(free.sum())

    def full(theta_free):
        theta = start.copy()
        theta[free] = theta_free
        return theta

    if nfree == 0:
        v = f(start)
        if is_inf(v):
            raise SolverError("objective is +inf at the only admissible point")
        return start, v

    if nfree == 1:
        j = int(np.flatnonzero(free)[0])
        x, v = minimize_convex_1d(lambda s: f(full(np.array([s]))), lower[j], upper[j])
        return full(np.array([x])), v

    f0 = f(start)
    if is_inf(f0):
        raise SolverError("start point has +inf objective", trace=[start.tolist()])

    if method == "cyclic":
        return _cyclic(f, lower, upper, start, f0, free, xatol, max_sweeps)
    if method != "nelder-mead":
        raise ValueError(f"unknown method {method!r}")

    obj = lambda th: to_float(f(full(th)))  # noqa: E731
    bounds = list(zip(lower[free], upper[free]))
    width = upper[free] - lower[free]
    x = start[free]
    best = to_float(f0)
    scale = max(1.0, float(np.max(np.abs(upper[free]))), float(np.max(np.abs(lower[free]))))
    step = 0.25
    for _ in range(restarts + 1):
        simplex = [x]
        for i in range(nfree):
            e = x.copy()
            delta = step * width[i]
            e[i] = e[i] + delta if e[i] + delta <= upper[free][i] else e[i] - delta
            simplex.append(e)
        res = minimize(
            obj,
            x,
            method="Nelder-Mead",
            bounds=bounds,
            options={
                "initial_simplex": np.array(simplex),
                "xatol": xatol * scale,
                "fatol": 1e-300,
                "maxiter": 20000,
                "maxfev": 40000,
            },
        )
        if res.fun <= best:
            x, best = np.asarray(res.x, dtype=float), float(res.fun)
        step *= 0.1
    theta = full(x)
    return theta, f(theta)


def _cyclic(f, lower, upper, x, fx, free, xatol, max_sweeps):
    x = x.copy()
    scale = max(1.0, float(np.max(np.abs(upper[free]))), float(np.max(np.abs(lower[free]))))
    for _ in range(max_sweeps):
        moved = 0.0
        for j in np.flatnonzero(free):
            def slice_(s, j=j):
                y = x.copy()
                y[j] = s
                return f(y)

            s, v = minimize_convex_1d(slice_, lower[j], upper[j])
            if to_float(v) <= to_float(fx):
                moved = max(moved, abs(s - x[j]))
                x[j], fx = s, v
        if moved <= xatol * scale:
            break
    return x, fx
