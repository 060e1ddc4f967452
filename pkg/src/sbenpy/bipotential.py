"""Bipotentials, their symplectic lift, and axiom audits.

A bipotential ``b(x, y)`` is bi-convex with ``b(x, y) >= <x, y>``; the
constitutive law is the set where the gap ``b(x, y) - <x, y>`` vanishes.
On phase space the lift ``b_hat(zI, z) = b(J^{-1} zI, z)`` turns it into a
symplectic bipotential whose gap uses ``omega`` instead of the scalar
product, and the two gaps coincide because ``omega(zI, z) = <<J^{-1} zI, z>>``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from sbenpy.convex import ConvexFunction, as_vec
from sbenpy.errors import ConstructionError
from sbenpy.extended import INF, ExtReal, ext, is_inf
from sbenpy.symplectic import PhaseVector, as_phase, j_inverse, omega

__all__ = [
    "Bipotential",
    "SymplecticBipotential",
    "ContactKinematics",
    "separated_bipotential",
    "coulomb_bipotential",
    "transpose_bipotential",
    "reflect_bipotential",
    "block_bipotential",
    "lift_to_symplectic",
    "bipotential_gap",
    "symplectic_bipotential_gap",
    "AuditReport",
    "axiom_audit",
    "box_sampler",
    "coulomb_sampler",
]


@dataclass(frozen=True, eq=False)
class Bipotential:
    dim_x: int
    dim_y: int
    evaluate: Callable[[np.ndarray, np.ndarray], ExtReal]
    name: str = "b"
    partial_prox_x: Optional[Callable] = field(default=None, repr=False)
    partial_prox_y: Optional[Callable] = field(default=None, repr=False)

    def __post_init__(self):
        if self.dim_x != self.dim_y:
            raise ConstructionError("bipotential arguments must be in duality (equal dimensions)")

    def __call__(self, x, y) -> ExtReal:
        return self.evaluate(as_vec(x, self.dim_x), as_vec(y, self.dim_y))

    def duality(self, x, y) -> float:
        return float(as_vec(x, self.dim_x) @ as_vec(y, self.dim_y))

    def gap(self, x, y) -> ExtReal:
        return bipotential_gap(self, x, y)


@dataclass(frozen=True, eq=False)
class SymplecticBipotential:
    """``b_hat(zI, z)`` on phase vectors, compared against ``omega(zI, z)``."""

    n: int
    evaluate: Callable[[PhaseVector, PhaseVector], ExtReal]
    name: str = "b_hat"
    source: Optional[Bipotential] = field(default=None, repr=False)

    def __call__(self, z_irr, z_dot) -> ExtReal:
        return self.evaluate(as_phase(z_irr), as_phase(z_dot))

    def duality(self, z_irr, z_dot) -> float:
        return omega(z_irr, z_dot)

    def gap(self, z_irr, z_dot) -> ExtReal:
        return symplectic_bipotential_gap(self, z_irr, z_dot)


@dataclass(frozen=True)
class ContactKinematics:
    """Relative velocity ``[u_dot]`` and reaction ``t`` split tangential/normal (normal last)."""

    relative_velocity: np.ndarray
    reaction: np.ndarray

    @property
    def v(self) -> np.ndarray:
        """Bipotential first argument ``-[u_dot]``."""
        return -np.asarray(self.relative_velocity, dtype=float)

    @property
    def t(self) -> np.ndarray:
        return np.asarray(self.reaction, dtype=float)


def separated_bipotential(phi: ConvexFunction) -> Bipotential:
    """``b(x, y) = phi(x) + phi^*(y)``."""
    conj = phi.conjugate

    def ev(x, y):
        a = phi.evaluate(x)
        if is_inf(a):
            return INF
        c = conj.evaluate(y)
        if is_inf(c):
            return INF
        return a + c

    return Bipotential(phi.dim, phi.dim, ev, name=f"sep({phi.name})")


CONE_RTOL = 1e-12


def coulomb_bipotential(mu: float, tangential_dim: int = 2, atol: float = 0.0) -> Bipotential:
    """Coulomb friction bipotential with arguments ``v = -[u_dot]`` and ``t``.

    Components are ordered tangential first, normal last.  The value is
    ``mu * t_n * ||v_t||`` when ``||t_t|| <= mu t_n``, ``t_n >= 0`` and
    ``v_n <= 0`` (no interpenetration rate); ``+inf`` otherwise.  ``atol``
    relaxes the three admissibility tests for round-off in callers; the
    cone test always allows a relative ``CONE_RTOL`` so that reactions built
    on the cone boundary are not rejected by a last-bit excess.
    """
    mu = float(mu)
    if not mu > 0:
        raise ConstructionError("friction coefficient must be positive")
    k = int(tangential_dim)
    dim = k + 1

    def ev(v, t):
        tn = float(t[k])
        if tn < -atol or v[k] > atol:
            return INF
        if float(np.linalg.norm(t[:k])) > mu * max(tn, 0.0) * (1.0 + CONE_RTOL) + atol:
            return INF
        return mu * max(tn, 0.0) * float(np.linalg.norm(v[:k]))

    return Bipotential(dim, dim, ev, name=f"coulomb(mu={mu})")


def transpose_bipotential(b: Bipotential) -> Bipotential:
    """``(x, y) -> b(y, x)``."""
    return Bipotential(b.dim_y, b.dim_x, lambda x, y: b.evaluate(y, x), name=f"{b.name}^T")


def reflect_bipotential(b: Bipotential) -> Bipotential:
    """``(x, y) -> b(-x, -y)``."""
    return Bipotential(b.dim_x, b.dim_y, lambda x, y: b.evaluate(-x, -y), name=f"-{b.name}")


def block_bipotential(
    dim: int,
    blocks: Sequence[tuple[Bipotential, Sequence[int]]],
    pinned: Sequence[int] = (),
    atol: float = 0.0,
    name: str = "b",
) -> Bipotential:
    """Sum of bipotentials on index blocks plus ``I_{0}`` on pinned first-argument indices.

    ``b(z', z) = sum_i b_i(z'[I_i], z[I_i]) + I_{0}(z'[pinned])``.  The blocks
    and the pinned indices must partition ``range(dim)``.  Pinned entries
    count as zero when ``||z'[pinned]|| <= atol * max(1, ||z||_inf)``.
    """
    idx_blocks = [(bp, np.asarray(ix, dtype=int)) for bp, ix in blocks]
    pinned = np.asarray(pinned, dtype=int)
    covered = np.concatenate([ix for _, ix in idx_blocks] + [pinned]) if (idx_blocks or pinned.size) else np.array([], int)
    if sorted(covered.tolist()) != list(range(dim)):
        raise ConstructionError("blocks and pinned indices must partition the phase coordinates")
    for bp, ix in idx_blocks:
        if bp.dim_x != ix.size:
            raise ConstructionError(f"block {bp.name} expects {bp.dim_x} coordinates, got {ix.size}")

    def ev(zp, z):
        if pinned.size and float(np.linalg.norm(zp[pinned])) > atol * max(1.0, float(np.max(np.abs(z)))):
            return INF
        total = 0.0
        for bp, ix in idx_blocks:
            val = bp.evaluate(zp[ix], z[ix])
            if is_inf(val):
                return INF
            total += val
        return total

    return Bipotential(dim, dim, ev, name=name)


def lift_to_symplectic(b: Bipotential) -> SymplecticBipotential:
    """``b_hat(zI, z) = b(J^{-1} zI, z)`` on a phase space of dimension ``b.dim_x``."""
    if b.dim_x % 2:
        raise ConstructionError("lift needs an even-dimensional bipotential (phase space X x Y)")
    n = b.dim_x // 2

    def ev(z_irr: PhaseVector, z_dot: PhaseVector):
        if z_irr.n != n or z_dot.n != n:
            raise ValueError(f"phase dimension mismatch: expected {n}")
        return b.evaluate(j_inverse(z_irr).flat(), z_dot.flat())

    return SymplecticBipotential(n, ev, name=f"lift({b.name})", source=b)


def bipotential_gap(b: Bipotential, x, y) -> ExtReal:
    """``b(x, y) - <x, y>``."""
    x = as_vec(x, b.dim_x)
    y = as_vec(y, b.dim_y)
    val = b.evaluate(x, y)
    if is_inf(val):
        return INF
    return ext(val - float(x @ y))


def symplectic_bipotential_gap(bh: SymplecticBipotential, z_irr, z_dot) -> ExtReal:
    """``b_hat(zI, z) - omega(zI, z)``."""
    z_irr, z_dot = as_phase(z_irr), as_phase(z_dot)
    val = bh.evaluate(z_irr, z_dot)
    if is_inf(val):
        return INF
    return ext(val - omega(z_irr, z_dot))


# ---------------------------------------------------------------------------
# Axiom audits
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AuditReport:
    n_samples: int
    n_infinite: int
    min_cross_margin: float
    n_cross_violations: int
    worst_biconvexity_violation: float
    n_biconvexity_violations: int
    tol: float

    @property
    def passed(self) -> bool:
        return self.n_cross_violations == 0 and self.n_biconvexity_violations == 0

    def as_dict(self) -> dict:
        return {
            "n_samples": self.n_samples,
            "n_infinite": self.n_infinite,
            "min_cross_margin": self.min_cross_margin,
            "n_cross_violations": self.n_cross_violations,
            "worst_biconvexity_violation": self.worst_biconvexity_violation,
            "n_biconvexity_violations": self.n_biconvexity_violations,
            "tol": self.tol,
            "passed": self.passed,
        }


def box_sampler(dim: int, half_width: float = 2.0):
    """Uniform pairs ``(x, y)`` in ``[-h, h]^dim``."""

    def draw(rng):
        return rng.uniform(-half_width, half_width, dim), rng.uniform(-half_width, half_width, dim)

    return draw


def coulomb_sampler(mu: float, tangential_dim: int = 2, scale: float = 2.0):
    """Pairs with ``t`` inside the cone and ``v_n <= 0`` half of the time, uniform otherwise."""
    k = tangential_dim

    def draw(rng):
        if rng.random() < 0.5:
            return rng.uniform(-scale, scale, k + 1), rng.uniform(-scale, scale, k + 1)
        tn = rng.uniform(0.0, scale)
        d = rng.normal(size=k)
        d /= max(np.linalg.norm(d), 1e-300)
        tt = d * rng.uniform(0.0, mu * tn)
        v = np.append(rng.uniform(-scale, scale, k), -rng.uniform(0.0, scale) * (rng.random() < 0.3))
        return v, np.append(tt, tn)

    return draw


def _to_vec(a):
    return a.flat() if isinstance(a, PhaseVector) else np.asarray(a, dtype=float)


def axiom_audit(b, sampler, n: int = 10_000, seed: int = 0, tol: float = 1e-9) -> AuditReport:
    """Spot-check the cross inequality and bi-convexity on ``n`` sampled pairs.

    Works for :class:`Bipotential` and :class:`SymplecticBipotential`; for the
    latter the sampler draws flat phase vectors.
    """
    rng = np.random.default_rng(seed)
    symplectic = isinstance(b, SymplecticBipotential)

    def call(a, c):
        if symplectic:
            return b.evaluate(PhaseVector.from_flat(a), PhaseVector.from_flat(c))
        return b.evaluate(a, c)

    def dual(a, c):
        if symplectic:
            return omega(PhaseVector.from_flat(a), PhaseVector.from_flat(c))
        return float(a @ c)

    n_inf = 0
    min_margin = np.inf
    n_cross = 0
    worst_bc = 0.0
    n_bc = 0
    for _ in range(n):
        x1, y1 = (_to_vec(s) for s in sampler(rng))
        x2, y2 = (_to_vec(s) for s in sampler(rng))
        val = call(x1, y1)
        if is_inf(val):
            n_inf += 1
        else:
            margin = val - dual(x1, y1)
            min_margin = min(min_margin, margin)
            if margin < -tol:
                n_cross += 1
        lam = rng.uniform()
        # convexity in the first argument at fixed y1, then in the second at fixed x1
        for mid, end_a, end_b in (
            (call(lam * x1 + (1 - lam) * x2, y1), call(x1, y1), call(x2, y1)),
            (call(x1, lam * y1 + (1 - lam) * y2), call(x1, y1), call(x1, y2)),
        ):
            if is_inf(end_a) or is_inf(end_b):
                continue
            rhs = lam * end_a + (1 - lam) * end_b
            excess = np.inf if is_inf(mid) else mid - rhs
            if excess > tol * max(1.0, abs(rhs)):
                n_bc += 1
                worst_bc = max(worst_bc, float(excess))
    return AuditReport(
        n_samples=n,
        n_infinite=n_inf,
        min_cross_margin=float(min_margin),
        n_cross_violations=n_cross,
        worst_biconvexity_violation=worst_bc,
        n_biconvexity_violations=n_bc,
        tol=tol,
    )
