"""Elastoplastic and reversible mass-spring oscillators.

Elastoplastic phase variables (``m`` components each, stored flat as
``[u, eps_p, p, pi]``)::

    H = |p|^2 / (2 rho) + k/2 |u - eps_p|^2 + k_d/2 |u - d(t)|^2 - <f(t), u>
    X_H = (p / rho, 0, f + k_d (d - u) - sigma, sigma),   sigma = k (u - eps_p)

``pi`` accumulates the stress (``pi_dot = sigma``).  The dissipation acts on
the ``(eps_p_dot, pi_dot)`` block; the remaining first-argument slots of the
lifted bipotential are pinned to zero, which enforces ``u_dot = p / rho``,
``p_dot = f + k_d (d - u) - sigma`` and ``pi_dot = sigma``.  Per step these
constraints are eliminated exactly and the unknown left is the stress.

The optional drive spring ``k_d`` to an imposed position ``d(t)`` gives a
displacement-controlled loading path.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from sbenpy.bipotential import (
    block_bipotential,
    box_sampler,
    coulomb_sampler,
    coulomb_bipotential,
    lift_to_symplectic,
    separated_bipotential,
)
from sbenpy.convex import scaled_norm
from sbenpy.dynamics import DissipationLaw, OracleConfig, quadratic_hamiltonian
from sbenpy.errors import ConstructionError
from sbenpy.functional import PathCoordinates, StepSpace
from sbenpy.path import DiscretePath
from sbenpy.scenarios.base import LawParts, Scenario
from sbenpy.scenarios.common import CONSTRAINT_ATOL, as_tuple, pinned_residual
from sbenpy.scenarios.programs import Program, Zero, program_from_spec
from sbenpy.symplectic import PhaseVector, j_matrix

FLOWS = ("associated", "plug-in")


@dataclass(frozen=True)
class OscillatorParams:
    mass: float = 1.0
    stiffness: float = 1.0
    yield_stress: float = 1.0
    load: Sequence[Program] = (Zero(),)
    u0: Sequence[float] = (0.0,)
    v0: Sequence[float] = (0.0,)
    drive_stiffness: float = 0.0
    drive: Sequence[Program] = (Zero(),)
    flow: str = "associated"
    friction: float = 0.5

    def __post_init__(self):
        if not (self.mass > 0 and self.stiffness > 0 and self.yield_stress > 0):
            raise ConstructionError("mass, stiffness and yield stress must be positive")
        if self.drive_stiffness < 0:
            raise ConstructionError("drive stiffness must be nonnegative")
        if self.flow not in FLOWS:
            raise ConstructionError(f"unknown flow {self.flow!r}; expected one of {FLOWS}")
        m = 1 if self.flow == "associated" else 2
        u0 = as_tuple(self.u0, "u0")
        v0 = as_tuple(self.v0, "v0")
        u0 = u0 * m if len(u0) == 1 else u0
        v0 = v0 * m if len(v0) == 1 else v0
        if len(u0) != m or len(v0) != m:
            raise ConstructionError(f"u0 and v0 need {m} components for flow {self.flow!r}")
        load = tuple(program_from_spec(p) for p in _listify(self.load))
        drive = tuple(program_from_spec(p) for p in _listify(self.drive))
        if len(load) == 1 and m > 1:
            load = load * m
        if len(drive) == 1 and m > 1:
            drive = drive * m
        if len(load) != m or len(drive) != m:
            raise ConstructionError(f"load and drive need {m} components for flow {self.flow!r}")
        if self.flow == "plug-in" and not self.friction > 0:
            raise ConstructionError("plug-in friction coefficient must be positive")
        object.__setattr__(self, "u0", u0)
        object.__setattr__(self, "v0", v0)
        object.__setattr__(self, "load", load)
        object.__setattr__(self, "drive", drive)

    @property
    def components(self) -> int:
        return len(self.u0)


def _listify(x):
    if isinstance(x, (list, tuple)):
        return list(x)
    return [x]


class _Kinematics:
    """Per-step elimination: everything as a function of the new stress."""

    def __init__(self, p: OscillatorParams):
        self.p = p
        self.m = p.components

    def f(self, t):
        return np.array([g(t) for g in self.p.load])

    def d(self, t):
        return np.array([g(t) for g in self.p.drive])

    def split(self, z: PhaseVector):
        m = self.m
        return z.x[:m], z.x[m:], z.y[:m], z.y[m:]

    def stress(self, z: PhaseVector) -> np.ndarray:
        u, ep, _, _ = self.split(z)
        return self.p.stiffness * (u - ep)

    def predictor(self, t0, z0, dt):
        """``(alpha, h, c, sigma_trial)`` with ``u1 = alpha (c - h sigma1)``."""
        p = self.p
        u0, ep0, p0, _ = self.split(z0)
        t1 = t0 + dt
        h = dt * dt / p.mass
        alpha = 1.0 / (1.0 + h * p.drive_stiffness)
        c = u0 + dt * p0 / p.mass + h * (self.f(t1) + p.drive_stiffness * self.d(t1))
        trial = p.stiffness * (alpha * c - ep0) / (1.0 + p.stiffness * alpha * h)
        return alpha, h, c, trial

    def node(self, z0, dt, sigma, pred):
        alpha, h, c, trial = pred
        u0, ep0, _, pi0 = self.split(z0)
        k = self.p.stiffness
        u1 = alpha * (c - h * sigma)
        p1 = self.p.mass * (u1 - u0) / dt
        # plastic increment from the stress defect: exactly zero on elastic steps
        ep1 = ep0 + (trial - sigma) * (1.0 + k * alpha * h) / k
        pi1 = pi0 + dt * sigma
        return PhaseVector(np.concatenate([u1, ep1]), np.concatenate([p1, pi1]))


def _hamiltonian(p: OscillatorParams):
    m = p.components
    k, kd = p.stiffness, p.drive_stiffness
    eye = np.eye(m)
    zero = np.zeros((m, m))
    K = np.block([
        [(k + kd) * eye, -k * eye, zero, zero],
        [-k * eye, k * eye, zero, zero],
        [zero, zero, eye / p.mass, zero],
        [zero, zero, zero, zero],
    ])

    def load(t):
        f = np.array([g(t) for g in p.load])
        d = np.array([g(t) for g in p.drive])
        return np.concatenate([f + kd * d, np.zeros(3 * m)])

    def offset(t):
        d = np.array([g(t) for g in p.drive])
        return 0.5 * kd * float(d @ d)

    return quadratic_hamiltonian(K, load, offset, name="elastoplastic oscillator")


def _observe(kin: _Kinematics):
    def observe(t, z):
        u, ep, _, _ = kin.split(z)
        s = kin.stress(z)
        return [*u, *s, *ep]

    return observe


def build_elastoplastic_oscillator(p: OscillatorParams) -> Scenario:
    """Mass on an elastic-perfectly-plastic spring (``associated``) or the dilatant plug-in law."""
    m = p.components
    system = _hamiltonian(p)
    kin = _Kinematics(p)
    pinned = list(range(3 * m))
    block = list(range(3 * m, 4 * m))
    if p.flow == "associated":
        phi = scaled_norm(p.yield_stress, m)
        local = separated_bipotential(phi)
        parts = LawParts(local, tuple(block), tuple(pinned), box_sampler(m, 2.0 * p.yield_stress), phi)
    else:
        local = coulomb_bipotential(p.friction, tangential_dim=m - 1, atol=CONSTRAINT_ATOL)
        audit_local = coulomb_bipotential(p.friction, tangential_dim=m - 1)
        parts = LawParts(audit_local, tuple(block), tuple(pinned), coulomb_sampler(p.friction, m - 1))
    b = block_bipotential(4 * m, [(local, block)], pinned=pinned, atol=CONSTRAINT_ATOL,
                          name=f"oscillator[{p.flow}]")
    resolver = _return_mapping(kin) if p.flow == "associated" else _plugin_return(kin)
    law = DissipationLaw(bipotential=lift_to_symplectic(b), resolver=resolver, name=f"plasticity[{p.flow}]")

    z0 = PhaseVector(np.concatenate([p.u0, np.zeros(m)]),
                     np.concatenate([p.mass * np.asarray(p.v0), np.zeros(m)]))
    if p.flow == "associated":
        columns = ("u", "sigma", "eps_p")
        space = _associated_space(kin)
    else:
        columns = ("u_t", "u_n", "sigma_t", "sigma_n", "eps_p_t", "eps_p_n")
        space = _plugin_space(kin)
    coords = (lambda path: oscillator_coordinates(p, path)) if p.flow == "associated" else None
    return Scenario(
        name=f"elastoplastic-oscillator[{p.flow}]",
        system=system,
        law=law,
        z0=z0,
        step_space=space,
        columns=columns,
        observe=_observe(kin),
        constraint=pinned_residual(system, pinned),
        coordinates=coords,
        params=p,
        parts=parts,
    )


def _return_mapping(kin: _Kinematics):
    sy = kin.p.yield_stress

    def resolve(system, t0, z0, dt):
        pred = kin.predictor(t0, z0, dt)
        trial = pred[3]
        norm = float(np.linalg.norm(trial))
        sigma = trial if norm <= sy else sy * trial / norm
        return kin.node(z0, dt, sigma, pred)

    return resolve


def _plugin_return(kin: _Kinematics):
    mu = kin.p.friction

    def resolve(system, t0, z0, dt):
        pred = kin.predictor(t0, z0, dt)
        tau_tr, sn_tr = pred[3]
        if sn_tr <= 0.0:
            sigma = np.zeros(2)
        elif abs(tau_tr) <= mu * sn_tr:
            sigma = np.array([tau_tr, sn_tr])
        else:
            sigma = np.array([np.copysign(mu * sn_tr, tau_tr), sn_tr])
        return kin.node(z0, dt, sigma, pred)

    return resolve


def _associated_space(kin: _Kinematics):
    sy = kin.p.yield_stress

    def space(t0, z0, dt):
        pred = kin.predictor(t0, z0, dt)
        trial = float(pred[3][0])
        current = float(np.clip(kin.stress(z0)[0], -sy, sy))
        return StepSpace(
            node=lambda th: kin.node(z0, dt, np.asarray(th, dtype=float), pred),
            lower=np.array([-sy]),
            upper=np.array([sy]),
            start=np.array([current]),
            rest=np.array([trial]) if abs(trial) <= sy else None,
        )

    return space


def _plugin_space(kin: _Kinematics):
    """Stress ``(tau, sigma_n) = (s mu sigma_n, sigma_n)`` with ``s in [-1, 1]``.

    The lower bound on ``sigma_n`` is where the normal plastic rate vanishes;
    below it the increment is inadmissible (``eps_p_n`` rate would be positive).
    """
    mu = kin.p.friction

    def space(t0, z0, dt):
        pred = kin.predictor(t0, z0, dt)
        tau_tr, sn_tr = (float(v) for v in pred[3])
        sn_lo = max(0.0, sn_tr)
        width = max(1.0, abs(sn_tr), abs(tau_tr) / mu)

        def node(th):
            sn, s = float(th[0]), float(th[1])
            return kin.node(z0, dt, np.array([s * mu * sn, sn]), pred)

        rest = None
        if sn_tr >= 0.0 and abs(tau_tr) <= mu * sn_tr:
            rest = np.array([sn_tr, tau_tr / (mu * sn_tr) if sn_tr > 0 else 0.0])
        return StepSpace(node=node, lower=np.array([sn_lo, -1.0]), upper=np.array([sn_lo + width, 1.0]),
                         start=np.array([sn_lo, 0.0]), rest=rest)

    return space


# ---------------------------------------------------------------------------
# Whole-path coordinates (associated flow): the displacement nodes u_1..u_N
# ---------------------------------------------------------------------------


def _stress_nodes(kin: _Kinematics, z0: PhaseVector, times, sigmas) -> list:
    nodes = [z0]
    for k in range(times.size - 1):
        dt = times[k + 1] - times[k]
        pred = kin.predictor(times[k], nodes[-1], dt)
        nodes.append(kin.node(nodes[-1], dt, sigmas[k], pred))
    return nodes


def stress_path(p: OscillatorParams, cfg: OracleConfig, sigmas) -> DiscretePath:
    """Admissible path generated by a prescribed stress sequence ``sigma_1..sigma_N``."""
    s = build_elastoplastic_oscillator(p)
    times = cfg.times
    sigmas = np.asarray(sigmas, dtype=float).reshape(times.size - 1, -1)
    return DiscretePath(times, tuple(_stress_nodes(_Kinematics(p), s.z0, times, sigmas)), s.z0,
                        constraint=s.constraint)


def oscillator_coordinates(p: OscillatorParams, path: DiscretePath) -> PathCoordinates:
    """Coordinates ``c_j = sigma_{j+1}`` in the box ``|sigma| <= sigma_y``.

    Every node follows from its predecessor and its stress, so ``c_j``
    influences step ``j`` and all later ones.  The stress is read back
    from the momentum conjugate to the plastic strain, ``pi_k = pi_{k-1} + dt sigma_k``.
    """
    if p.components != 1:
        raise ConstructionError("whole-path coordinates are implemented for the scalar oscillator")
    times = path.times
    dts = np.diff(times)
    n = dts.size
    z0 = path.z0

    k, rho, kd = p.stiffness, p.mass, p.drive_stiffness
    # per-step constants of the predictor
    h = dts * dts / rho
    alpha = 1.0 / (1.0 + h * kd)
    force = np.array([p.load[0](t) + kd * p.drive[0](t) for t in times[1:]])
    soft = (1.0 + k * alpha * h) / k

    def from_path(q):
        pis = np.array([float(z.y[1]) for z in q.nodes])
        return np.diff(pis) / dts

    def rebuild(c, start, base):
        nodes = list(base[: start + 1])
        z = nodes[-1]
        u, ep, mom, pi = float(z.x[0]), float(z.x[1]), float(z.y[0]), float(z.y[1])
        for i in range(start, n):
            s = float(c[i])
            cc = u + dts[i] * mom / rho + h[i] * force[i]
            trial = k * (alpha[i] * cc - ep) / (1.0 + k * alpha[i] * h[i])
            u1 = alpha[i] * (cc - h[i] * s)
            mom = rho * (u1 - u) / dts[i]
            ep = ep + (trial - s) * soft[i]
            pi = pi + dts[i] * s
            u = u1
            nodes.append(PhaseVector(np.array([u, ep]), np.array([mom, pi])))
        return tuple(nodes)

    def to_path(c):
        return DiscretePath(times, rebuild(np.asarray(c, dtype=float).ravel(), 0, (z0,)), z0,
                            constraint=path.constraint)

    sy = p.yield_stress
    return PathCoordinates(from_path=from_path, to_path=to_path, lower=np.full(n, -sy), upper=np.full(n, sy),
                           first_step=lambda j: j, rebuild=rebuild)


# ---------------------------------------------------------------------------
# Reversible oscillator (dissipation b_0)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ReversibleParams:
    mass: float = 1.0
    stiffness: float = 1.0
    load: Program = field(default_factory=Zero)
    u0: float = 1.0
    v0: float = 0.0

    def __post_init__(self):
        if not (self.mass > 0 and self.stiffness > 0):
            raise ConstructionError("mass and stiffness must be positive")
        object.__setattr__(self, "load", program_from_spec(self.load))


def build_reversible_oscillator(p: ReversibleParams) -> Scenario:
    """``H = k u^2 / 2 + p^2 / (2 rho) - f(t) u`` with ``b_hat = I_{0}(z_I)``."""
    K = np.diag([p.stiffness, 1.0 / p.mass])
    system = quadratic_hamiltonian(K, lambda t: np.array([p.load(t), 0.0]), name="linear oscillator")
    b0 = block_bipotential(2, [], pinned=[0, 1], atol=CONSTRAINT_ATOL, name="b_0")

    def implicit_euler(sys, t0, z0, dt):
        # u1 = u0 + dt p1 / rho,  p1 = p0 - dt (k u1 - f1), by Cramer's rule
        f1 = p.load(t0 + dt)
        a = dt / p.mass
        b = dt * p.stiffness
        det = 1.0 + a * b
        u0, p0 = float(z0.x[0]), float(z0.y[0])
        rhs_p = p0 + dt * f1
        return PhaseVector([(u0 + a * rhs_p) / det], [(rhs_p - b * u0) / det])

    law = DissipationLaw(bipotential=lift_to_symplectic(b0), resolver=implicit_euler, name="reversible")

    def space(t0, z0, dt):
        # b_0 pins z_I = 0, leaving the single increment solving z1 - z0 = dt X_H(t1, z1)
        Km, g = system.linear
        Jm = j_matrix(1)
        A = np.eye(2) - dt * Jm @ Km
        z1 = PhaseVector.from_flat(np.linalg.solve(A, z0.flat() - dt * Jm @ g(t0 + dt)))
        return StepSpace(node=lambda th: z1, lower=np.zeros(1), upper=np.zeros(1), start=np.zeros(1))

    return Scenario(
        name="reversible-oscillator",
        system=system,
        law=law,
        z0=PhaseVector([p.u0], [p.mass * p.v0]),
        step_space=space,
        columns=("u", "p"),
        observe=lambda t, z: [float(z.x[0]), float(z.y[0])],
        constraint=pinned_residual(system, [0, 1]),
        params=p,
        parts=LawParts(None, (), (0, 1)),
    )
