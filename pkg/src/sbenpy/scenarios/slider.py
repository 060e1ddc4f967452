"""Block on a rigid plane with Coulomb friction, dragged through a spring.

Phase ``x = q = (q_1, q_2, q_n)`` (two tangential, one normal), ``y = p``::

    H = |p|^2 / (2 m) + 1/2 sum_i k_i (q_i - d_i(t))^2 + N(t) q_n

Contact is persistent (``q_n = 0``, ``p_n = 0``).  The reaction is recovered
from the momentum balance, ``t = p_dot - X_H,p``, so ``t_n = N``.  The law is
``b_c(-q_dot, t)`` on the position block with the momentum block pinned
(``q_dot = p / m``).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import brentq

from sbenpy.bipotential import (
    block_bipotential,
    coulomb_sampler,
    coulomb_bipotential,
    lift_to_symplectic,
    reflect_bipotential,
    transpose_bipotential,
)
from sbenpy.dynamics import DissipationLaw, quadratic_hamiltonian
from sbenpy.errors import ConstructionError
from sbenpy.functional import StepSpace
from sbenpy.scenarios.base import LawParts, Scenario
from sbenpy.scenarios.common import CONSTRAINT_ATOL, as_tuple, pinned_residual
from sbenpy.scenarios.programs import Constant, Program, Zero, program_from_spec
from sbenpy.symplectic import PhaseVector


@dataclass(frozen=True)
class SliderParams:
    mass: float = 1.0
    stiffness: Sequence[float] = (1.0, 1.0)
    friction: float = 0.5
    normal_force: Program = field(default_factory=lambda: Constant(1.0))
    drive: Sequence[Program] = (Zero(), Zero())
    q0: Sequence[float] = (0.0, 0.0)
    v0: Sequence[float] = (0.0, 0.0)

    def __post_init__(self):
        if not self.mass > 0:
            raise ConstructionError("mass must be positive")
        if not self.friction > 0:
            raise ConstructionError("friction coefficient must be positive")
        k = as_tuple(self.stiffness, "stiffness", 2)
        if min(k) <= 0:
            raise ConstructionError("tangential stiffnesses must be positive")
        drive = tuple(program_from_spec(d) for d in (self.drive if isinstance(self.drive, (list, tuple)) else [self.drive]))
        if len(drive) != 2:
            raise ConstructionError("drive needs two tangential components")
        object.__setattr__(self, "stiffness", k)
        object.__setattr__(self, "drive", drive)
        object.__setattr__(self, "normal_force", program_from_spec(self.normal_force))
        object.__setattr__(self, "q0", as_tuple(self.q0, "q0", 2))
        object.__setattr__(self, "v0", as_tuple(self.v0, "v0", 2))

    def check_normal_force(self, times) -> None:
        values = self.normal_force.sample(times)
        bad = np.flatnonzero(values < 0)
        if bad.size:
            raise ConstructionError(f"normal force is negative at t={times[bad[0]]:g}")


class _Kinematics:
    def __init__(self, p: SliderParams):
        self.p = p
        self.k = np.asarray(p.stiffness)

    def d(self, t):
        return np.array([g(t) for g in self.p.drive])

    def stick_reaction(self, t0, z0, dt):
        """Reaction that keeps the block at rest over the step."""
        q0, p0 = z0.x[:2], z0.y[:2]
        return self.k * (q0 - self.d(t0 + dt)) - p0 / dt

    def compliance(self, dt):
        h = dt * dt / self.p.mass
        return h / (1.0 + h * self.k)

    def node(self, z0, dt, t_tan, t_stick):
        dq = self.compliance(dt) * (t_tan - t_stick)
        q1 = z0.x[:2] + dq
        p1 = self.p.mass * dq / dt
        return PhaseVector(np.array([q1[0], q1[1], 0.0]), np.array([p1[0], p1[1], 0.0]))


def build_coulomb_slider(p: SliderParams) -> Scenario:
    kin = _Kinematics(p)
    k1, k2 = p.stiffness
    K = np.diag([k1, k2, 0.0, 1.0 / p.mass, 1.0 / p.mass, 1.0 / p.mass])

    def load(t):
        d = kin.d(t)
        return np.array([k1 * d[0], k2 * d[1], -p.normal_force(t), 0.0, 0.0, 0.0])

    def offset(t):
        d = kin.d(t)
        return 0.5 * (k1 * d[0] ** 2 + k2 * d[1] ** 2)

    system = quadratic_hamiltonian(K, load, offset, name="coulomb slider")
    contact = reflect_bipotential(transpose_bipotential(coulomb_bipotential(p.friction, 2, atol=CONSTRAINT_ATOL)))
    b = block_bipotential(6, [(contact, [0, 1, 2])], pinned=[3, 4, 5], atol=CONSTRAINT_ATOL, name="slider")

    def resolve(sys, t0, z0, dt):
        radius = p.friction * max(p.normal_force(t0 + dt), 0.0)
        ts = kin.stick_reaction(t0, z0, dt)
        if np.linalg.norm(ts) <= radius:
            return kin.node(z0, dt, ts, ts)
        D = kin.compliance(dt)
        # slip: t = (D + lam)^{-1} D t_stick on the cone boundary, so dq = -lam t
        def excess(lam):
            return float(np.linalg.norm(D * ts / (D + lam))) - radius

        if radius == 0.0:
            t_tan = np.zeros(2)
        else:
            hi = float(np.max(D)) * (np.linalg.norm(ts) / radius)
            lam = brentq(excess, 0.0, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)
            t_tan = D * ts / (D + lam)
            t_tan *= radius / np.linalg.norm(t_tan)
        return kin.node(z0, dt, t_tan, ts)

    law = DissipationLaw(bipotential=lift_to_symplectic(b), resolver=resolve, name="coulomb friction")

    def space(t0, z0, dt):
        radius = p.friction * max(p.normal_force(t0 + dt), 0.0)
        ts = kin.stick_reaction(t0, z0, dt)

        def node(th):
            r, ang = float(th[0]), float(th[1])
            return kin.node(z0, dt, r * np.array([np.cos(ang), np.sin(ang)]), ts)

        ang_s = float(np.arctan2(ts[1], ts[0]))
        rest = None
        if np.linalg.norm(ts) <= radius:
            rest = np.array([np.linalg.norm(ts), ang_s])
        # start from the stick reaction pulled back onto the cone; polar slices are unimodal here
        start = np.array([min(np.linalg.norm(ts), radius), ang_s])
        return StepSpace(node=node, lower=np.array([0.0, ang_s - np.pi]), upper=np.array([radius, ang_s + np.pi]),
                         start=start, rest=rest, method="cyclic")

    z0 = PhaseVector(np.array([p.q0[0], p.q0[1], 0.0]),
                     np.array([p.mass * p.v0[0], p.mass * p.v0[1], 0.0]))

    def observe(t, z):
        return [float(z.x[0]), float(z.x[1]), float(z.y[0]), float(z.y[1])]

    return Scenario(
        name="coulomb-slider",
        system=system,
        law=law,
        z0=z0,
        step_space=space,
        columns=("q_1", "q_2", "p_1", "p_2"),
        observe=observe,
        constraint=pinned_residual(system, [3, 4, 5]),
        params=p,
        parts=LawParts(
            reflect_bipotential(transpose_bipotential(coulomb_bipotential(p.friction, 2))),
            (0, 1, 2),
            (3, 4, 5),
            _contact_sampler(p.friction),
        ),
        check_times=p.check_normal_force,
    )


def _contact_sampler(mu):
    # the position block sees b_c(-y, -x): feed Coulomb pairs (v, t) as (x, y) = (-t, -v)
    draw = coulomb_sampler(mu, 2)

    def sample(rng):
        v, t = draw(rng)
        return -t, -v

    return sample


def reactions(p: SliderParams, times, nodes) -> np.ndarray:
    """Contact reactions ``(t_1, t_2, t_n)`` per step from ``t = p_dot + grad_q (elastic + normal energy)``."""
    kin = _Kinematics(p)
    out = []
    for k in range(len(nodes) - 1):
        dt = times[k + 1] - times[k]
        z0, z1 = nodes[k], nodes[k + 1]
        t_tan = (z1.y[:2] - z0.y[:2]) / dt + kin.k * (z1.x[:2] - kin.d(times[k + 1]))
        t_n = (z1.y[2] - z0.y[2]) / dt + p.normal_force(times[k + 1])
        out.append([t_tan[0], t_tan[1], t_n])
    return np.array(out)
