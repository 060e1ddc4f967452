"""The SBEN functional on discrete paths and its minimization.

Each step contributes ``dt * [b_hat(z_dot - X_H, z_dot) - omega(z_dot - X_H, z_dot)]``
(or the potential form ``phi + phi^{*omega}``) with ``z_dot`` the forward
difference and ``X_H`` taken at the right endpoint.  The sum ``Pi`` is
nonnegative and vanishes on the discrete natural evolution.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import minimize

from sbenpy.dynamics import (
    DissipationLaw,
    HamiltonianSystem,
    OracleConfig,
    step_integrand,
    symplectic_gradient,
    velocity_split,
)
from sbenpy.errors import AdmissibilityError, SolverError
from sbenpy.extended import INF, ExtReal, ext_sum, is_inf, to_float
from sbenpy.optim import minimize_box, minimize_convex_1d
from sbenpy.path import DiscretePath
from sbenpy.symplectic import PhaseVector, as_phase

__all__ = [
    "StepResidual",
    "step_residual",
    "assemble_functional",
    "residual_profile",
    "StepSpace",
    "minimize_incremental",
    "PathCoordinates",
    "GlobalResult",
    "minimize_global",
    "irreversible_defect",
]


@dataclass(frozen=True)
class StepResidual:
    index: int
    dissipation_term: ExtReal
    pairing_term: float
    gap: ExtReal

    @property
    def dissipates(self) -> bool:
        return not is_inf(self.dissipation_term) and self.dissipation_term > 0


def step_residual(law: DissipationLaw, sys: HamiltonianSystem, z_k, z_k1, t_k: float, t_k1: float,
                  index: int = 0) -> StepResidual:
    """Quadrature of the SBEN integrand over ``[t_k, t_k1]``."""
    dt = float(t_k1) - float(t_k)
    if not dt > 0:
        raise ValueError("t_k1 must exceed t_k")
    diss, pair = step_integrand(sys, law, t_k, z_k, t_k1, z_k1)
    if is_inf(diss):
        return StepResidual(index, INF, dt * pair, INF)
    return StepResidual(index, dt * diss, dt * pair, dt * (diss - pair))


def residual_profile(path: DiscretePath, sys: HamiltonianSystem, law: DissipationLaw) -> list[StepResidual]:
    path.check_admissible()
    return [step_residual(law, sys, z0, z1, t0, t1, index=k) for k, t0, z0, t1, z1 in path.steps()]


def assemble_functional(path: DiscretePath, law: DissipationLaw, sys: HamiltonianSystem):
    """``(Pi, residuals)``; ``Pi`` is :data:`INF` as soon as one step is."""
    profile = residual_profile(path, sys, law)
    return ext_sum(r.gap for r in profile), profile


# ---------------------------------------------------------------------------
# Incremental minimization
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class StepSpace:
    """Admissible increments of one step, parametrized by a box of ``theta``.

    ``node(theta)`` returns ``z_{k+1}`` with the scenario's equality
    constraints already eliminated.  ``rest`` (optional) is a preferred
    parameter used for tie-breaking, typically the no-dissipation candidate.
    ``method`` selects the box minimizer (see :func:`~sbenpy.optim.minimize_box`).
    """

    node: Callable[[np.ndarray], PhaseVector]
    lower: np.ndarray
    upper: np.ndarray
    start: np.ndarray
    rest: Optional[np.ndarray] = None
    candidates: Sequence[np.ndarray] = field(default=())
    method: str = "nelder-mead"


StepSpaceFactory = Callable[[float, PhaseVector, float], StepSpace]


def _solve_step(sys, law, t0, z0, t1, space: StepSpace, tol: float):
    def objective(theta):
        return step_residual(law, sys, z0, space.node(np.asarray(theta, dtype=float)), t0, t1).gap

    if space.rest is not None:
        # residuals are nonnegative, so a zero-residual rest point is already a minimizer
        rest = np.clip(np.asarray(space.rest, dtype=float), space.lower, space.upper)
        val = objective(rest)
        if not is_inf(val) and val <= tol:
            return space.node(rest), val

    theta, best = minimize_box(objective, space.lower, space.upper, space.start, method=space.method)
    cands = [(np.asarray(theta, dtype=float), best)]
    extra = list(space.candidates) + ([space.rest] if space.rest is not None else [])
    for c in extra:
        c = np.clip(np.asarray(c, dtype=float), space.lower, space.upper)
        cands.append((c, objective(c)))
    finite = [(c, v) for c, v in cands if not is_inf(v)]
    if not finite:
        raise SolverError("every candidate increment has an infinite residual",
                          trace=[np.asarray(c).tolist() for c, _ in cands])
    vmin = min(v for _, v in finite)
    scale = max(1.0, abs(vmin))
    near = [(c, v) for c, v in finite if v <= vmin + tol * scale]
    # ties go to the smallest increment
    theta, val = min(near, key=lambda cv: (space.node(cv[0]) - z0).norm())
    return space.node(theta), val


def minimize_incremental(sys: HamiltonianSystem, law: DissipationLaw, z0, cfg: OracleConfig,
                         step_space: StepSpaceFactory, constraint=None,
                         step_tol: Optional[float] = None) -> DiscretePath:
    """Step-by-step argmin of the SBEN residual over admissible increments.

    ``step_tol`` bounds each minimized residual relative to
    ``max(1, energy scale)``; exceeding it is reported as stagnation.
    """
    z0 = as_phase(z0)
    times = cfg.times
    nodes = [z0]
    tie_tol = cfg.inner_tol
    for k in range(times.size - 1):
        t0, t1 = float(times[k]), float(times[k + 1])
        try:
            space = step_space(t0, nodes[-1], t1 - t0)
            z1, val = _solve_step(sys, law, t0, nodes[-1], t1, space, tie_tol)
        except SolverError as exc:
            raise SolverError(exc.reason, step=k, trace=exc.trace, partial=nodes) from exc
        if step_tol is not None:
            scale = max(1.0, abs(sys.H(t1, z1)))
            if val > step_tol * scale:
                raise SolverError(f"step residual {val:.3e} did not reach {step_tol:.1e}",
                                  step=k, trace=[val], partial=nodes)
        nodes.append(z1)
    return DiscretePath(times, tuple(nodes), z0, constraint=constraint)


# ---------------------------------------------------------------------------
# Whole-path descent
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PathCoordinates:
    """Box-bounded scalar coordinates ``c`` describing an admissible path.

    ``from_path`` extracts the coordinates and ``to_path`` rebuilds an
    admissible path.  ``first_step(j)`` is the earliest step whose residual
    depends on coordinate ``j``; earlier residuals are reused when ``c_j``
    is perturbed.  ``rebuild(c, k, nodes)`` (optional) returns the nodes for
    ``c`` given that ``nodes[:k + 1]`` are unchanged.
    """

    from_path: Callable[[DiscretePath], np.ndarray]
    to_path: Callable[[np.ndarray], DiscretePath]
    lower: np.ndarray
    upper: np.ndarray
    first_step: Callable[[int], int] = lambda j: 0
    rebuild: Optional[Callable[[np.ndarray, int, tuple], tuple]] = None

    def nodes(self, c, start: int = 0, base: Optional[tuple] = None) -> tuple:
        if start and base is not None and self.rebuild is not None:
            return self.rebuild(c, start, base)
        return self.to_path(c).nodes


@dataclass(frozen=True)
class GlobalResult:
    path: DiscretePath
    history: tuple
    sweeps: int
    reverted_blocks: int

    @property
    def initial(self) -> float:
        return self.history[0]

    @property
    def final(self) -> float:
        return self.history[-1]


class _PathObjective:
    """``Pi(c)`` with prefix reuse for one-coordinate perturbations."""

    def __init__(self, coords: PathCoordinates, sys, law, times):
        self.coords, self.sys, self.law, self.times = coords, sys, law, times
        self.infinite = 0

    def evaluate(self, c, start: int = 0, base=None):
        """``(gaps, nodes)`` or ``None`` when a step residual is infinite.

        ``base`` is a previous ``(gaps, nodes)`` that agrees with ``c`` up to ``start``.
        """
        nodes = self.coords.nodes(c, start, base[1] if base else None)
        out = np.empty(len(nodes) - 1)
        if start:
            out[:start] = base[0][:start]
        for k in range(start, out.size):
            g = step_residual(self.law, self.sys, nodes[k], nodes[k + 1], self.times[k], self.times[k + 1]).gap
            if is_inf(g):
                self.infinite += 1
                return None
            out[k] = g
        return out, nodes

    def value(self, c, j: Optional[int] = None, base=None) -> ExtReal:
        start = 0 if j is None else self.coords.first_step(j)
        res = self.evaluate(c, start, base)
        return INF if res is None else float(np.sum(res[0]))

    def gradient(self, c, base) -> np.ndarray:
        """Forward differences, taken backwards at the upper bound or into a finite side."""
        f0 = float(np.sum(base[0]))
        grad = np.zeros(c.size)
        lo, hi = self.coords.lower, self.coords.upper
        for j in range(c.size):
            h = _FD_STEP * max(1.0, abs(c[j]))
            for step in (h, -h):
                x = c[j] + step
                if not lo[j] <= x <= hi[j]:
                    continue
                trial = c.copy()
                trial[j] = x
                v = self.value(trial, j, base)
                if not is_inf(v):
                    grad[j] = (v - f0) / step
                    break
        return grad


_FD_STEP = 1e-8


def minimize_global(path0: DiscretePath, sys: HamiltonianSystem, law: DissipationLaw,
                    coords: PathCoordinates, iters: int = 50, rtol: float = 1e-10) -> GlobalResult:
    """Whole-path descent of ``Pi`` over box-bounded path coordinates.

    A sweep is one projected quasi-Newton update of every coordinate
    (L-BFGS-B with difference gradients).  Trial paths with an infinite step
    residual are rejected by the line search and counted in
    ``reverted_blocks``.  With a single coordinate the sweep is an exact
    one-dimensional search, i.e. the incremental step problem.  ``Pi`` is
    non-increasing from sweep to sweep.
    """
    pi0, _ = assemble_functional(path0, law, sys)
    if is_inf(pi0):
        raise AdmissibilityError("global descent needs a starting path with finite functional")
    lo = np.asarray(coords.lower, dtype=float)
    hi = np.asarray(coords.upper, dtype=float)
    obj = _PathObjective(coords, sys, law, path0.times)
    c0 = np.clip(np.asarray(coords.from_path(path0), dtype=float), lo, hi)
    e0 = obj.evaluate(c0)
    if e0 is None:
        raise AdmissibilityError("coordinates of the starting path leave the finite domain")
    pi_start = float(np.sum(e0[0]))
    penalty = 1e3 * max(1.0, pi_start)
    best = {"c": c0.copy(), "eval": e0, "pi": pi_start}
    history = [pi_start]

    def fun(c):
        e = obj.evaluate(c)
        if e is None:
            return penalty, np.zeros(c.size)
        val = float(np.sum(e[0]))
        if val < best["pi"]:
            best.update(c=c.copy(), eval=e, pi=val)
        return val, obj.gradient(c, e)

    def record(intermediate_result):
        val = best["pi"]
        prev = history[-1]
        history.append(min(val, prev))
        if prev - val <= rtol * max(abs(prev), 1e-300):
            raise StopIteration

    if iters > 0 and c0.size == 1:
        # a single coordinate is exactly the incremental step problem
        try:
            x, val = minimize_convex_1d(lambda v: obj.value(np.array([v])), lo[0], hi[0], rtol=1e-13)
        except SolverError:
            x, val = c0[0], history[0]
        if not is_inf(val) and val < history[0]:
            best["c"] = np.array([x])
        history.append(min(to_float(val), history[0]))
    elif iters > 0 and c0.size:
        minimize(fun, c0, jac=True, method="L-BFGS-B", bounds=list(zip(lo, hi)), callback=record,
                 options={"maxiter": iters, "maxfun": 50 * iters * max(1, c0.size), "ftol": 0.0, "gtol": 0.0})
    sweeps = len(history) - 1
    c = best["c"]

    final_path = coords.to_path(c)
    pi_final, _ = assemble_functional(final_path, law, sys)
    history[-1] = to_float(pi_final)
    return GlobalResult(final_path, tuple(history), sweeps, obj.infinite)


def irreversible_defect(path: DiscretePath, sys: HamiltonianSystem) -> float:
    """``sum_k dt ||z_dot - X_H||``: departure of a path from reversible flow."""
    total = 0.0
    for _, t0, z0, t1, z1 in path.steps():
        dt = t1 - t0
        _, z_irr = velocity_split((z1 - z0) / dt, symplectic_gradient(sys, t1, z1))
        total += dt * z_irr.norm()
    return total
