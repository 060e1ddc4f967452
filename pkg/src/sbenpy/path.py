"""Discrete phase-space paths on a time grid."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from sbenpy.errors import AdmissibilityError
from sbenpy.symplectic import PhaseVector, as_phase

ConstraintFn = Callable[[float, PhaseVector, float, PhaseVector], float]


@dataclass(frozen=True, eq=False)
class DiscretePath:
    """Nodes ``z_0 .. z_N`` at strictly increasing times.

    ``z0`` is the prescribed initial condition; ``constraint`` (optional)
    returns a nonnegative residual per step for scenario equality
    constraints and must stay below ``constraint_tol``.
    """

    times: np.ndarray
    nodes: tuple
    z0: PhaseVector
    constraint: Optional[ConstraintFn] = field(default=None, repr=False)
    constraint_tol: float = 1e-9

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        nodes = tuple(as_phase(z) for z in self.nodes)
        if times.ndim != 1 or times.size < 2:
            raise AdmissibilityError("a path needs at least two grid points (N >= 1)")
        if times.size != len(nodes):
            raise AdmissibilityError(f"{times.size} times but {len(nodes)} nodes")
        if not np.all(np.diff(times) > 0):
            raise AdmissibilityError("time grid must be strictly increasing")
        if len({z.n for z in nodes}) != 1:
            raise AdmissibilityError("nodes have inconsistent phase dimensions")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "z0", as_phase(self.z0))

    @property
    def n_steps(self) -> int:
        return self.times.size - 1

    @property
    def n(self) -> int:
        return self.nodes[0].n

    def z(self, k: int) -> PhaseVector:
        return self.nodes[k]

    def array(self) -> np.ndarray:
        """Nodes as an ``(N + 1, 2n)`` array."""
        return np.stack([z.flat() for z in self.nodes])

    def steps(self):
        for k in range(self.n_steps):
            yield k, self.times[k], self.nodes[k], self.times[k + 1], self.nodes[k + 1]

    def constraint_residuals(self) -> np.ndarray:
        if self.constraint is None:
            return np.zeros(self.n_steps)
        return np.array([self.constraint(t0, z0, t1, z1) for _, t0, z0, t1, z1 in self.steps()])

    def check_admissible(self) -> None:
        if not self.nodes[0] == self.z0:
            raise AdmissibilityError("path does not start at the prescribed initial state")
        res = self.constraint_residuals()
        bad = np.flatnonzero(res > self.constraint_tol)
        if bad.size:
            k = int(bad[0])
            raise AdmissibilityError(f"constraint residual {res[k]:.3e} exceeds {self.constraint_tol:.1e} at step {k}")

    def replace_nodes(self, nodes: Sequence[PhaseVector]) -> "DiscretePath":
        return DiscretePath(self.times, tuple(nodes), self.z0, self.constraint, self.constraint_tol)


def uniform_times(dt: float, t_end: float, t0: float = 0.0) -> np.ndarray:
    """``t_k = t0 + k dt`` with ``N = round((t_end - t0) / dt)`` steps."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    n = int(round((t_end - t0) / dt))
    if n < 1:
        raise ValueError("horizon shorter than one time step")
    return t0 + dt * np.arange(n + 1)
