"""Helpers shared by the lumped scenarios."""

from __future__ import annotations

import numpy as np

from sbenpy.dynamics import HamiltonianSystem, symplectic_gradient
from sbenpy.symplectic import j_inverse

# Relative tolerance on eliminated equality constraints (round-off only).
CONSTRAINT_ATOL = 1e-9


def pinned_residual(system: HamiltonianSystem, pinned):
    """Constraint residual ``||(J^{-1} z_I)[pinned]|| / max(1, ||z_dot||_inf)`` of a step."""
    pinned = np.asarray(pinned, dtype=int)

    def residual(t0, z0, t1, z1):
        z_dot = (z1 - z0) / (t1 - t0)
        zp = j_inverse(z_dot - symplectic_gradient(system, t1, z1)).flat()
        return float(np.linalg.norm(zp[pinned])) / max(1.0, float(np.max(np.abs(z_dot.flat()))))

    return residual


def as_tuple(values, name: str, length: int | None = None) -> tuple:
    vals = tuple(float(v) for v in np.atleast_1d(np.asarray(values, dtype=float)))
    if length is not None and len(vals) != length:
        raise ValueError(f"{name} must have {length} components, got {len(vals)}")
    return vals
