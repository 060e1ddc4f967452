"""Scalar crack-length toy with a threshold driving force.

Phase ``(a, pi)`` with ``H(t, a) = -int_{a_ref}^{a} G(s, l(t)) ds``, hence
``X_H = (0, G)``.  The law pins ``pi_dot = G`` and applies the separated
bipotential of ``phi^*`` (support function of ``{G <= G_c}``) to
``(a_dot, pi_dot)``, so each step contributes

    dt [G_c a_dot + I(G <= G_c) + I(a_dot >= 0) - a_dot G].
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from sbenpy.bipotential import block_bipotential, box_sampler, lift_to_symplectic, separated_bipotential
from sbenpy.convex import HalfSpace, make_indicator
from sbenpy.dynamics import DissipationLaw, HamiltonianSystem
from sbenpy.errors import ConstructionError, SolverError
from sbenpy.functional import StepSpace
from sbenpy.scenarios.base import LawParts, Scenario
from sbenpy.scenarios.common import CONSTRAINT_ATOL, pinned_residual
from sbenpy.scenarios.programs import Program, program_from_spec
from sbenpy.symplectic import PhaseVector


@dataclass(frozen=True)
class PowerLawForce:
    """``G(a, l) = c * l**p * a**q``."""

    coefficient: float = 1.0
    load_exponent: float = 2.0
    length_exponent: float = -1.0

    def __call__(self, a: float, load: float) -> float:
        if a <= 0:
            raise ValueError("crack measure must be positive for a power-law driving force")
        return float(self.coefficient * abs(load) ** self.load_exponent * a ** self.length_exponent)


@dataclass(frozen=True)
class CrackToyParams:
    toughness: float = 1.0
    driving_force: PowerLawForce = field(default_factory=PowerLawForce)
    load: Program = field(default=None)
    a0: float = 1.0
    a_max: float = 100.0

    def __post_init__(self):
        if not self.toughness > 0:
            raise ConstructionError("toughness G_c must be positive")
        if not 0 < self.a0 < self.a_max:
            raise ConstructionError("need 0 < a0 < a_max")
        object.__setattr__(self, "load", program_from_spec(self.load))
        if isinstance(self.driving_force, dict):
            object.__setattr__(self, "driving_force", PowerLawForce(**self.driving_force))

    def G(self, a: float, t: float) -> float:
        value = self.driving_force(a, self.load(t))
        if not np.isfinite(value):
            raise SolverError(f"driving force undefined at a={a:g}, t={t:g}")
        return value


def build_crack_toy(p: CrackToyParams) -> Scenario:
    a_ref = p.a0

    def energy(t, z):
        a = float(z.x[0])
        val, _ = quad(lambda s: p.G(s, t), a_ref, a, epsabs=1e-13, epsrel=1e-12)
        return -val

    def gradient(t, z):
        return PhaseVector([-p.G(float(z.x[0]), t)], [0.0])

    system = HamiltonianSystem(1, energy, gradient, name="crack toy")
    # threshold slack only absorbs round-off in G near G_c
    stability = make_indicator(HalfSpace([1.0], p.toughness, atol=1e-12 * p.toughness))
    # b(a_dot, pi_dot) = phi^*(a_dot) + phi(pi_dot) with phi = I(G <= G_c)
    local = separated_bipotential(stability.conjugate)
    b = block_bipotential(2, [(local, [1])], pinned=[0], atol=CONSTRAINT_ATOL, name="crack")

    def resolve(sys, t0, z0, dt):
        t1 = t0 + dt
        a0, pi0 = float(z0.x[0]), float(z0.y[0])
        if p.G(a0, t1) <= p.toughness:
            a1 = a0
        else:
            excess = lambda a: p.G(a, t1) - p.toughness  # noqa: E731
            if excess(p.a_max) > 0:
                raise SolverError(f"no stable crack length in [{a0:g}, {p.a_max:g}]: G stays above G_c")
            a1 = brentq(excess, a0, p.a_max, xtol=1e-15, rtol=4 * np.finfo(float).eps)
            if excess(a1) > 0:
                a1 = np.nextafter(a1, np.inf)
        return PhaseVector([a1], [pi0 + dt * p.G(a1, t1)])

    law = DissipationLaw(bipotential=lift_to_symplectic(b), resolver=resolve, name="crack threshold")

    def space(t0, z0, dt):
        t1 = t0 + dt
        a0, pi0 = float(z0.x[0]), float(z0.y[0])

        def node(th):
            a1 = float(th[0])
            return PhaseVector([a1], [pi0 + dt * p.G(a1, t1)])

        return StepSpace(node=node, lower=np.array([a0]), upper=np.array([p.a_max]), start=np.array([a0]),
                         rest=np.array([a0]))

    def observe(t, z):
        a = float(z.x[0])
        return [a, p.G(a, t), p.load(t)]

    return Scenario(
        name="crack-toy",
        system=system,
        law=law,
        z0=PhaseVector([p.a0], [0.0]),
        step_space=space,
        columns=("a", "G", "load"),
        observe=observe,
        constraint=pinned_residual(system, [0]),
        params=p,
        parts=LawParts(local, (1,), (0,), box_sampler(1, 2.0 * p.toughness), stability.conjugate),
    )
