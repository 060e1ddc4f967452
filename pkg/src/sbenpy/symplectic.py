"""Phase space ``Z = X x Y`` with its canonical symplectic form.

Phase vectors are stored as two equal-length blocks ``(x, y)`` (never
interleaved), so ``J(x, y) = (y, -x)`` is a block swap with one sign flip.
Phase functions are plain :class:`~sbenpy.convex.ConvexFunction` objects of
even dimension acting on the flattened vector ``[x, y]``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from sbenpy.convex import ConvexFunction, as_vec, precompose_orthogonal
from sbenpy.errors import ConstructionError
from sbenpy.extended import INF, ExtReal, ext, is_inf

__all__ = [
    "PhaseVector",
    "as_phase",
    "pairing",
    "omega",
    "j_apply",
    "j_inverse",
    "j_matrix",
    "symplectic_polar",
    "symplectic_gap",
    "in_symplectic_subdifferential",
    "extremality_tolerance",
    "SymplecticPolarGrid",
]


@dataclass(frozen=True, eq=False)
class PhaseVector:
    """``z = (x, y)``: degrees of freedom and momenta of equal dimension."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = as_vec(self.x)
        y = as_vec(self.y)
        if x.shape != y.shape:
            raise ValueError(f"x and y blocks differ in size: {x.size} vs {y.size}")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @classmethod
    def _trusted(cls, x: np.ndarray, y: np.ndarray) -> "PhaseVector":
        # fast path for arithmetic on validated operands (only overflow could slip through)
        z = object.__new__(cls)
        object.__setattr__(z, "x", x)
        object.__setattr__(z, "y", y)
        return z

    @property
    def n(self) -> int:
        return self.x.size

    def flat(self) -> np.ndarray:
        return np.concatenate([self.x, self.y])

    @classmethod
    def from_flat(cls, z) -> "PhaseVector":
        z = as_vec(z)
        if z.size % 2:
            raise ValueError("flat phase vector must have even length")
        n = z.size // 2
        return cls(z[:n], z[n:])

    @classmethod
    def zeros(cls, n: int) -> "PhaseVector":
        return cls(np.zeros(n), np.zeros(n))

    def __add__(self, other: "PhaseVector") -> "PhaseVector":
        _check(self, other)
        return PhaseVector._trusted(self.x + other.x, self.y + other.y)

    def __sub__(self, other: "PhaseVector") -> "PhaseVector":
        _check(self, other)
        return PhaseVector._trusted(self.x - other.x, self.y - other.y)

    def __neg__(self) -> "PhaseVector":
        return PhaseVector._trusted(-self.x, -self.y)

    def __mul__(self, s: float) -> "PhaseVector":
        return PhaseVector._trusted(self.x * s, self.y * s)

    __rmul__ = __mul__

    def __truediv__(self, s: float) -> "PhaseVector":
        return PhaseVector._trusted(self.x / s, self.y / s)

    def __eq__(self, other) -> bool:
        if not isinstance(other, PhaseVector):
            return NotImplemented
        return np.array_equal(self.x, other.x) and np.array_equal(self.y, other.y)

    __hash__ = None

    def norm(self) -> float:
        return float(np.sqrt(self.x @ self.x + self.y @ self.y))


def as_phase(z) -> PhaseVector:
    if isinstance(z, PhaseVector):
        return z
    return PhaseVector.from_flat(z)


def _check(z: PhaseVector, z2: PhaseVector) -> None:
    if z.n != z2.n:
        raise ValueError(f"phase dimension mismatch: {z.n} vs {z2.n}")


def pairing(z, z2) -> float:
    """``<<z, z'>> = <x, x'> + <y, y'>``."""
    z, z2 = as_phase(z), as_phase(z2)
    _check(z, z2)
    return float(z.x @ z2.x + z.y @ z2.y)


def omega(z, z2) -> float:
    """``omega(z, z') = <x, y'> - <x', y>``."""
    z, z2 = as_phase(z), as_phase(z2)
    _check(z, z2)
    return float(z.x @ z2.y) - float(z2.x @ z.y)


def j_apply(z) -> PhaseVector:
    z = as_phase(z)
    return PhaseVector._trusted(z.y, -z.x)


def j_inverse(z) -> PhaseVector:
    z = as_phase(z)
    return PhaseVector._trusted(-z.y, z.x)


def j_matrix(n: int, inverse: bool = False) -> np.ndarray:
    """Dense ``J`` (or ``J^{-1} = J^T``) acting on flat ``[x, y]`` of length ``2n``."""
    eye = np.eye(n)
    zero = np.zeros((n, n))
    J = np.block([[zero, eye], [-eye, zero]])
    return J.T if inverse else J


def _phase_dim(F: ConvexFunction) -> int:
    if F.dim % 2:
        raise ConstructionError(f"phase function {F.name} has odd dimension {F.dim}")
    return F.dim // 2


def symplectic_polar(F: ConvexFunction) -> ConvexFunction:
    """``F^{*omega} = F^* o J^{-1}`` (requires a closed-form conjugate)."""
    n = _phase_dim(F)
    return precompose_orthogonal(F.conjugate, j_matrix(n, inverse=True), name=f"{F.name}^*w")


def extremality_tolerance(tol: float, *values: ExtReal) -> float:
    """Absolute tolerance scaled by ``max(1, |values|)`` for finite values."""
    scale = max([1.0] + [abs(v) for v in values if not is_inf(v)])
    return tol * scale


def symplectic_gap(F: ConvexFunction, z, z2, polar: ConvexFunction | None = None) -> ExtReal:
    """``F(z) + F^{*omega}(z') - omega(z', z) >= 0``."""
    z, z2 = as_phase(z), as_phase(z2)
    if polar is None:
        polar = symplectic_polar(F)
    fz = F(z.flat())
    if is_inf(fz):
        return INF
    fp = polar(z2.flat())
    if is_inf(fp):
        return INF
    return ext(fz + fp - omega(z2, z))


def in_symplectic_subdifferential(F: ConvexFunction, z, z2, tol: float = 1e-8, polar=None) -> bool:
    """``z' in d^omega F(z)`` decided by a scaled gap test."""
    z, z2 = as_phase(z), as_phase(z2)
    if polar is None:
        polar = symplectic_polar(F)
    fz = F(z.flat())
    fp = polar(z2.flat())
    if is_inf(fz) or is_inf(fp):
        return False
    gap = fz + fp - omega(z2, z)
    return gap <= extremality_tolerance(tol, fz, fp)


class SymplecticPolarGrid:
    """Grid supremum ``sup_z omega(z', z) - F(z)`` straight from the definition.

    Independent of the ``J``-composition route: the symplectic form is
    evaluated directly on the grid nodes.  Limited to ``n = 1`` (2-D phase).
    """

    def __init__(self, F: ConvexFunction, box, n_nodes: int):
        if F.dim != 2:
            raise ConstructionError("SymplecticPolarGrid supports 2-D phase functions only")
        box = np.asarray(box, dtype=float)
        ax = [np.linspace(lo, hi, n_nodes) for lo, hi in box]
        X, Y = np.meshgrid(ax[0], ax[1], indexing="ij")
        self.xs = X.ravel()
        self.ys = Y.ravel()
        vals = [F.evaluate(np.array([a, b])) for a, b in zip(self.xs, self.ys)]
        keep = np.array([not is_inf(v) for v in vals])
        self.xs, self.ys = self.xs[keep], self.ys[keep]
        self.vals = np.array([v for v in vals if not is_inf(v)], dtype=float)
        self.spacing = float(max((hi - lo) / (n_nodes - 1) for lo, hi in box))

    def __call__(self, z2) -> float:
        z2 = as_phase(z2)
        # omega(z', z) = x' y - x y'
        obj = z2.x[0] * self.ys - self.xs * z2.y[0] - self.vals
        return float(np.max(obj))
