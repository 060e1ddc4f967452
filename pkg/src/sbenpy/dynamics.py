"""Hamiltonian systems, the velocity split, and an implicit-Euler oracle.

The oracle discretizes ``z_dot - X_H(z) in d^omega phi(z_dot)`` by

    (z1 - z0) / dt - X_H(t1, z1)  in  d^omega phi((z1 - z0) / dt),

either through a scenario-supplied closed-form resolver (return mapping,
trial-stick) or, for potential laws with a prox and a quadratic Hamiltonian,
by Douglas-Rachford splitting.  Every step is certified afterwards by its
extremality gap.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from sbenpy.bipotential import SymplecticBipotential
from sbenpy.convex import ConvexFunction
from sbenpy.errors import ConstructionError, SolverError, UnsupportedOperation
from sbenpy.extended import INF, ExtReal, is_inf
from sbenpy.path import DiscretePath, uniform_times
from sbenpy.symplectic import (
    PhaseVector,
    as_phase,
    extremality_tolerance,
    j_apply,
    j_matrix,
    omega,
    symplectic_polar,
)

__all__ = [
    "HamiltonianSystem",
    "quadratic_hamiltonian",
    "symplectic_gradient",
    "velocity_split",
    "DissipationLaw",
    "OracleConfig",
    "step_integrand",
    "oracle_step",
    "oracle_trajectory",
    "gradient_check",
]

Resolver = Callable[["HamiltonianSystem", float, PhaseVector, float], PhaseVector]


@dataclass(frozen=True, eq=False)
class HamiltonianSystem:
    """``H(t, z)`` with its analytic gradient.

    ``linear`` optionally records ``(K, g)`` when ``grad H = K z - g(t)``,
    which lets the generic oracle solve its linear subproblem exactly.
    """

    n: int
    energy: Callable[[float, PhaseVector], float]
    gradient: Callable[[float, PhaseVector], PhaseVector]
    name: str = "H"
    load: Optional[Callable[[float], np.ndarray]] = field(default=None, repr=False)
    linear: Optional[tuple] = field(default=None, repr=False)

    def H(self, t: float, z) -> float:
        return float(self.energy(float(t), as_phase(z)))

    def grad_H(self, t: float, z) -> PhaseVector:
        g = self.gradient(float(t), as_phase(z))
        g = as_phase(g)
        if g.n != self.n:
            raise SolverError(f"gradient of {self.name} has dimension {g.n}, expected {self.n}")
        return g


def quadratic_hamiltonian(K, load=None, offset=None, name: str = "quadratic H") -> HamiltonianSystem:
    """``H(t, z) = 1/2 z^T K z - <g(t), z> + c(t)`` on flat ``z = [x, y]``.

    ``K`` must be symmetric; ``load`` returns ``g(t)`` (length ``2n``) and
    ``offset`` the scalar ``c(t)``.
    """
    K = np.atleast_2d(np.asarray(K, dtype=float))
    if K.shape[0] != K.shape[1] or K.shape[0] % 2 or not np.allclose(K, K.T):
        raise ConstructionError("K must be a symmetric matrix of even size")
    n = K.shape[0] // 2
    zero_load = np.zeros(2 * n)
    g = load if load is not None else (lambda t: zero_load)
    c = offset if offset is not None else (lambda t: 0.0)

    def energy(t, z):
        v = z.flat()
        return 0.5 * float(v @ K @ v) - float(np.asarray(g(t)) @ v) + float(c(t))

    def gradient(t, z):
        return PhaseVector.from_flat(K @ z.flat() - np.asarray(g(t), dtype=float))

    return HamiltonianSystem(n, energy, gradient, name=name, load=g, linear=(K, g))


def symplectic_gradient(sys: HamiltonianSystem, t: float, z) -> PhaseVector:
    """``X_H = J grad H = (grad_y H, -grad_x H)``."""
    try:
        return j_apply(sys.grad_H(t, z))
    except SolverError:
        raise
    except Exception as exc:
        raise SolverError(f"gradient evaluation failed at t={t}: {exc}") from exc


def velocity_split(z_dot, x_h) -> tuple[PhaseVector, PhaseVector]:
    """``(z_R, z_I) = (X_H, z_dot - X_H)``."""
    z_dot, x_h = as_phase(z_dot), as_phase(x_h)
    if z_dot.n != x_h.n:
        raise ValueError("velocity and Hamiltonian field dimensions differ")
    return x_h, z_dot - x_h


def gradient_check(sys: HamiltonianSystem, t: float, z, h: float = 1e-6) -> float:
    """``||grad_H - central differences|| / (1 + ||grad_H||)``."""
    z = as_phase(z).flat()
    g = sys.grad_H(t, z).flat()
    fd = np.empty_like(z)
    for i in range(z.size):
        e = np.zeros_like(z)
        step = h * max(1.0, abs(z[i]))
        e[i] = step
        fd[i] = (sys.H(t, z + e) - sys.H(t, z - e)) / (2 * step)
    return float(np.linalg.norm(g - fd) / (1.0 + np.linalg.norm(g)))


@dataclass(frozen=True, eq=False)
class DissipationLaw:
    """Either a convex potential ``phi`` or a symplectic bipotential ``b_hat``.

    ``resolver(sys, t0, z0, dt) -> z1`` is an optional closed-form step
    solver used by the oracle.  ``polar`` overrides the symplectic polar of
    ``phi`` (e.g. to relax indicator tolerances).
    """

    potential: Optional[ConvexFunction] = None
    bipotential: Optional[SymplecticBipotential] = None
    resolver: Optional[Resolver] = field(default=None, repr=False)
    polar: Optional[ConvexFunction] = field(default=None, repr=False)
    name: str = "law"

    def __post_init__(self):
        if (self.potential is None) == (self.bipotential is None):
            raise ConstructionError("a dissipation law is either a potential or a bipotential")
        if self.potential is not None and self.polar is None:
            object.__setattr__(self, "polar", symplectic_polar(self.potential))

    @property
    def variant(self) -> str:
        return "potential" if self.potential is not None else "bipotential"

    def dissipation(self, z_irr: PhaseVector, z_dot: PhaseVector) -> ExtReal:
        """``phi(z_dot) + phi^{*omega}(z_irr)`` or ``b_hat(z_irr, z_dot)``."""
        if self.bipotential is not None:
            return self.bipotential.evaluate(z_irr, z_dot)
        a = self.potential.evaluate(z_dot.flat())
        if is_inf(a):
            return INF
        b = self.polar.evaluate(z_irr.flat())
        if is_inf(b):
            return INF
        return a + b


@dataclass(frozen=True)
class OracleConfig:
    dt: float
    t_end: float
    scheme: str = "implicit-euler"
    inner_tol: float = 1e-8
    max_inner_iters: int = 10_000

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.t_end >= self.dt:
            raise ValueError("t_end must be at least dt")
        if self.scheme != "implicit-euler":
            raise ValueError(f"unknown scheme {self.scheme!r}; only 'implicit-euler' is available")
        if not self.inner_tol > 0 or self.max_inner_iters < 1:
            raise ValueError("inner_tol must be positive and max_inner_iters at least 1")

    @property
    def times(self) -> np.ndarray:
        return uniform_times(self.dt, self.t_end)


def step_integrand(sys: HamiltonianSystem, law: DissipationLaw, t0, z0, t1, z1):
    """Per-unit-time ``(dissipation, pairing)`` of a step with right-endpoint ``X_H``."""
    z0, z1 = as_phase(z0), as_phase(z1)
    dt = float(t1) - float(t0)
    z_dot = (z1 - z0) / dt
    _, z_irr = velocity_split(z_dot, symplectic_gradient(sys, t1, z1))
    return law.dissipation(z_irr, z_dot), omega(z_irr, z_dot)


def _douglas_rachford(sys: HamiltonianSystem, law: DissipationLaw, t0, z0: PhaseVector, dt, tol, max_iters):
    """Solve ``0 in A w + b + d phi(w)`` for the velocity ``w``.

    With ``grad H = K z - g`` the implicit step reads
    ``J^{-1} w - grad H(z0 + dt w) in d phi(w)``, i.e.
    ``A = dt K - J^{-1}`` (monotone) and ``b = K z0 - g(t1)``.
    """
    phi = law.potential
    if phi.prox_map is None:
        raise UnsupportedOperation(f"potential {phi.name} has no proximal map")
    K, g = sys.linear
    n2 = 2 * sys.n
    t1 = t0 + dt
    A = dt * K - j_matrix(sys.n, inverse=True)
    b = K @ z0.flat() - np.asarray(g(t1), dtype=float)
    gamma = 1.0 / max(1.0, float(np.linalg.norm(A, 2)))
    lhs = np.eye(n2) + gamma * A
    s = np.zeros(n2)
    trace = []
    w = phi.prox_map(s, gamma)
    for it in range(max_iters):
        w = phi.prox_map(s, gamma)
        u = np.linalg.solve(lhs, 2 * w - s - gamma * b)
        delta = u - w
        s = s + delta
        res = float(np.linalg.norm(delta))
        if it % 50 == 0:
            trace.append(res)
        if res <= tol * max(1.0, float(np.linalg.norm(w))) * 1e-3:
            break
    else:
        raise SolverError("Douglas-Rachford did not converge", trace=trace)
    return PhaseVector.from_flat(z0.flat() + dt * w)


def _certify(sys, law, t0, z0, t1, z1, tol, trace=None):
    diss, pair = step_integrand(sys, law, t0, z0, t1, z1)
    if is_inf(diss):
        raise SolverError("oracle step left the domain of the dissipation law", trace=trace)
    gap = diss - pair
    if gap > extremality_tolerance(tol, diss, pair):
        raise SolverError(f"oracle step extremality gap {gap:.3e} exceeds tolerance", trace=trace)
    return gap


def oracle_step(sys: HamiltonianSystem, law: DissipationLaw, t: float, z_k, dt: float,
                inner_tol: float = 1e-8, max_inner_iters: int = 10_000) -> PhaseVector:
    """One implicit-Euler step of the Hamiltonian inclusion, gap-certified."""
    z_k = as_phase(z_k)
    if law.resolver is not None:
        z1 = as_phase(law.resolver(sys, float(t), z_k, float(dt)))
    elif law.potential is not None and sys.linear is not None:
        z1 = _douglas_rachford(sys, law, float(t), z_k, float(dt), inner_tol, max_inner_iters)
    else:
        raise UnsupportedOperation("no closed-form resolver and no prox-based route for this law")
    _certify(sys, law, t, z_k, t + dt, z1, inner_tol)
    return z1


def oracle_trajectory(sys: HamiltonianSystem, law: DissipationLaw, z0, cfg: OracleConfig,
                      constraint=None) -> DiscretePath:
    z0 = as_phase(z0)
    times = cfg.times
    nodes = [z0]
    for k in range(times.size - 1):
        try:
            nodes.append(oracle_step(sys, law, times[k], nodes[-1], times[k + 1] - times[k],
                                     cfg.inner_tol, cfg.max_inner_iters))
        except SolverError as exc:
            raise SolverError(exc.reason, step=k, trace=exc.trace, partial=nodes) from exc
    return DiscretePath(times, tuple(nodes), z0, constraint=constraint)
