"""Convex lower semicontinuous functions on ``R^n``.

A :class:`ConvexFunction` bundles an evaluator with whatever closed-form
companions are known: the Fenchel conjugate, the proximal map and, for
one-dimensional members of the catalog, the subdifferential interval.
Subdifferential membership is always decided through :func:`fenchel_gap`.

Catalog constructors: :func:`make_indicator` (point, box/interval, ball,
half-space, nonnegative orthant), :func:`support_function`,
:func:`scaled_norm`, :func:`quadratic`, :func:`linear`, :func:`zero`, plus the
combinators :func:`direct_sum` and :func:`precompose_orthogonal`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np

from sbenpy.errors import ConstructionError, UnreliableConjugateError, UnsupportedOperation
from sbenpy.extended import INF, ExtReal, ext, is_inf

__all__ = [
    "as_vec",
    "ConvexFunction",
    "Point",
    "Box",
    "Ball",
    "HalfSpace",
    "NonnegativeOrthant",
    "interval",
    "make_indicator",
    "support_function",
    "zero",
    "linear",
    "scaled_norm",
    "quadratic",
    "direct_sum",
    "precompose_orthogonal",
    "SampledConvexFunction",
    "ConjugateSample",
    "conjugate_numeric",
    "fenchel_gap",
    "prox_step",
    "DEFAULT_GAP_TOL",
]

DEFAULT_GAP_TOL = 1e-8


def as_vec(v, dim: int | None = None) -> np.ndarray:
    """Validate a finite real vector (scalars are promoted to length 1)."""
    arr = np.asarray(v, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    elif arr.ndim != 1:
        raise ValueError(f"expected a vector, got shape {arr.shape}")
    if dim is not None and arr.shape[0] != dim:
        raise ValueError(f"dimension mismatch: expected {dim}, got {arr.shape[0]}")
    # cheap screen first: the dot product is non-finite whenever a component is
    if not math.isfinite(arr @ arr) and not np.isfinite(arr).all():
        raise ValueError("vector components must be finite")
    return arr


@dataclass(frozen=True, eq=False)
class ConvexFunction:
    """Extended-real convex function with optional closed-form companions.

    ``conjugate_factory`` is a zero-argument callable so that mutually
    conjugate pairs can refer to each other lazily.
    """

    dim: int
    evaluate: Callable[[np.ndarray], ExtReal]
    name: str = "f"
    conjugate_factory: Optional[Callable[[], "ConvexFunction"]] = field(default=None, repr=False)
    prox_map: Optional[Callable[[np.ndarray, float], np.ndarray]] = field(default=None, repr=False)
    subdifferential: Optional[Callable[[np.ndarray], tuple]] = field(default=None, repr=False)
    domain_bound: Optional[float] = None

    def __call__(self, v) -> ExtReal:
        return self.evaluate(as_vec(v, self.dim))

    @property
    def has_conjugate(self) -> bool:
        return self.conjugate_factory is not None

    @cached_property
    def conjugate(self) -> "ConvexFunction":
        if self.conjugate_factory is None:
            raise UnsupportedOperation(f"{self.name} has no closed-form conjugate")
        return self.conjugate_factory()

    def prox(self, v, tau: float) -> np.ndarray:
        return prox_step(self, v, tau)


# ---------------------------------------------------------------------------
# Set descriptions
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Point:
    center: Sequence[float]
    atol: float = 0.0


@dataclass(frozen=True, eq=False)
class Box:
    lower: Sequence[float]
    upper: Sequence[float]
    atol: float = 0.0


@dataclass(frozen=True, eq=False)
class Ball:
    center: Sequence[float]
    radius: float
    atol: float = 0.0


@dataclass(frozen=True, eq=False)
class HalfSpace:
    """``{v : <normal, v> <= offset}``."""

    normal: Sequence[float]
    offset: float
    atol: float = 0.0


@dataclass(frozen=True, eq=False)
class NonnegativeOrthant:
    dim: int
    atol: float = 0.0


def interval(a: float, b: float, atol: float = 0.0) -> Box:
    return Box([a], [b], atol)


def _unit_in(value: float, atol: float) -> bool:
    return value <= atol


def make_indicator(description) -> ConvexFunction:
    """Indicator ``I_K`` of a closed convex set; its conjugate is the support function."""
    if isinstance(description, Point):
        c = as_vec(description.center)
        atol = float(description.atol)

        def ev(v):
            return 0.0 if np.linalg.norm(v - c) <= atol else INF

        return ConvexFunction(
            dim=c.size,
            evaluate=ev,
            name=f"I_point{tuple(c)}",
            conjugate_factory=lambda: linear(c),
            prox_map=lambda v, tau: c.copy(),
            subdifferential=(lambda v: (-math.inf, math.inf)) if c.size == 1 else None,
            domain_bound=float(np.max(np.abs(c))) + atol if c.size else 0.0,
        )

    if isinstance(description, Box):
        lo, hi = as_vec(description.lower), as_vec(description.upper)
        if lo.shape != hi.shape:
            raise ConstructionError("box bounds have different dimensions")
        if np.any(lo > hi):
            raise ConstructionError("empty box: some lower bound exceeds its upper bound")
        atol = float(description.atol)

        def ev(v):
            return 0.0 if np.all(v >= lo - atol) and np.all(v <= hi + atol) else INF

        def subdiff(v):
            x = float(v[0])
            lo_s = -math.inf if x <= lo[0] else 0.0
            hi_s = math.inf if x >= hi[0] else 0.0
            return (lo_s, hi_s)

        return ConvexFunction(
            dim=lo.size,
            evaluate=ev,
            name=f"I_box[{lo.tolist()},{hi.tolist()}]",
            conjugate_factory=lambda: support_function(description),
            prox_map=lambda v, tau: np.clip(v, lo, hi),
            subdifferential=subdiff if lo.size == 1 else None,
            domain_bound=float(max(np.max(np.abs(lo)), np.max(np.abs(hi)))) + atol,
        )

    if isinstance(description, Ball):
        c = as_vec(description.center)
        r = float(description.radius)
        if r < 0:
            raise ConstructionError("ball radius must be nonnegative")
        atol = float(description.atol)

        return ConvexFunction(
            dim=c.size,
            evaluate=lambda v: 0.0 if np.linalg.norm(v - c) <= r + atol else INF,
            name=f"I_ball(r={r})",
            conjugate_factory=lambda: support_function(description),
            prox_map=lambda v, tau: _project_ball(v, c, r),
            domain_bound=float(np.max(np.abs(c))) + r + atol,
        )

    if isinstance(description, HalfSpace):
        a = as_vec(description.normal)
        b = float(description.offset)
        atol = float(description.atol)
        if not np.any(a):
            if b < 0:
                raise ConstructionError("empty half-space: zero normal with negative offset")
            raise ConstructionError("degenerate half-space with zero normal")

        def subdiff(v):
            s = float(a[0] * v[0])
            if s < b:
                return (0.0, 0.0)
            return (0.0, math.inf) if a[0] > 0 else (-math.inf, 0.0)

        return ConvexFunction(
            dim=a.size,
            evaluate=lambda v: 0.0 if float(a @ v) <= b + atol else INF,
            name=f"I_halfspace(<{a.tolist()},v> <= {b})",
            conjugate_factory=lambda: support_function(description),
            prox_map=lambda v, tau: _project_halfspace(v, a, b),
            subdifferential=subdiff if a.size == 1 else None,
        )

    if isinstance(description, NonnegativeOrthant):
        n = int(description.dim)
        if n < 1:
            raise ConstructionError("orthant dimension must be positive")
        atol = float(description.atol)
        return ConvexFunction(
            dim=n,
            evaluate=lambda v: 0.0 if np.all(v >= -atol) else INF,
            name=f"I_orthant({n})",
            conjugate_factory=lambda: support_function(description),
            prox_map=lambda v, tau: np.maximum(v, 0.0),
        )

    raise ConstructionError(f"unsupported set description {description!r}")


def _project_ball(v, c, r):
    d = v - c
    nd = np.linalg.norm(d)
    if nd <= r:
        return v.copy()
    scale = r / nd
    p = c + d * scale
    # round-off may leave the point an ulp outside; shrink until it is inside
    while np.linalg.norm(p - c) > r and scale > 0:
        scale = np.nextafter(scale, 0.0)
        p = c + d * scale
    return p


def _project_halfspace(v, a, b):
    s = float(a @ v)
    if s <= b:
        return v.copy()
    aa = float(a @ a)
    excess = s - b
    p = v - a * (excess / aa)
    while float(a @ p) > b:
        excess = np.nextafter(excess, np.inf) + abs(float(a @ p) - b)
        p = v - a * (excess / aa)
    return p


def _moreau_support_prox(project):
    # prox of tau * sigma_K via Moreau: v - tau * P_K(v / tau)
    return lambda v, tau: v - tau * project(v / tau)


CONJUGATE_RTOL = 1e-12


def _loosened(description):
    """Copy of a set description with atol at least ``CONJUGATE_RTOL`` times its size.

    Used when an indicator arises as the conjugate of a finite function:
    subgradients computed in floating point land on the set boundary only
    up to round-off.
    """
    data = [np.abs(np.asarray(getattr(description, f), dtype=float)).max(initial=0.0)
            for f in ("center", "lower", "upper", "normal", "offset", "radius")
            if hasattr(description, f)]
    slack = CONJUGATE_RTOL * max([1.0] + data)
    return replace(description, atol=max(float(description.atol), slack))


def support_function(description) -> ConvexFunction:
    """Support function ``sigma_K(w) = sup_{v in K} <v, w>``; conjugate is ``I_K`` (round-off slack)."""
    back = lambda: make_indicator(_loosened(description))  # noqa: E731

    if isinstance(description, Point):
        return linear(description.center)

    if isinstance(description, Box):
        lo, hi = as_vec(description.lower), as_vec(description.upper)

        def subdiff(w):
            x = float(w[0])
            if x > 0:
                return (hi[0], hi[0])
            if x < 0:
                return (lo[0], lo[0])
            return (lo[0], hi[0])

        return ConvexFunction(
            dim=lo.size,
            evaluate=lambda w: float(np.sum(np.maximum(lo * w, hi * w))),
            name=f"sigma_box[{lo.tolist()},{hi.tolist()}]",
            conjugate_factory=back,
            prox_map=_moreau_support_prox(lambda u: np.clip(u, lo, hi)),
            subdifferential=subdiff if lo.size == 1 else None,
        )

    if isinstance(description, Ball):
        c = as_vec(description.center)
        r = float(description.radius)
        return ConvexFunction(
            dim=c.size,
            evaluate=lambda w: float(c @ w + r * np.linalg.norm(w)),
            name=f"sigma_ball(r={r})",
            conjugate_factory=back,
            prox_map=_moreau_support_prox(lambda u: _project_ball(u, c, r)),
        )

    if isinstance(description, HalfSpace):
        a = as_vec(description.normal)
        b = float(description.offset)
        aa = float(a @ a)

        def ev(w):
            lam = float(a @ w) / aa
            scale = max(1.0, float(np.linalg.norm(w)))
            if lam < -1e-12 * scale or np.linalg.norm(w - lam * a) > 1e-12 * scale:
                return INF
            return max(lam, 0.0) * b

        def subdiff(w):
            lam = float(w[0]) / float(a[0])
            if lam > 0:
                return (b / a[0], b / a[0])
            return (-math.inf, b / a[0]) if a[0] > 0 else (b / a[0], math.inf)

        return ConvexFunction(
            dim=a.size,
            evaluate=ev,
            name=f"sigma_halfspace({a.tolist()},{b})",
            conjugate_factory=back,
            prox_map=_moreau_support_prox(lambda u: _project_halfspace(u, a, b)),
            subdifferential=subdiff if a.size == 1 else None,
        )

    if isinstance(description, NonnegativeOrthant):
        n = int(description.dim)
        return ConvexFunction(
            dim=n,
            evaluate=lambda w: 0.0 if np.all(w <= 0.0) else INF,
            name=f"sigma_orthant({n})",
            conjugate_factory=back,
            prox_map=lambda v, tau: np.minimum(v, 0.0),
        )

    raise ConstructionError(f"unsupported set description {description!r}")


# ---------------------------------------------------------------------------
# Finite-valued catalog members
# ---------------------------------------------------------------------------


def zero(dim: int, atol: float = 0.0) -> ConvexFunction:
    """The zero function; ``atol`` is handed to its conjugate ``I_{0}``."""
    return ConvexFunction(
        dim=dim,
        evaluate=lambda v: 0.0,
        name="zero",
        conjugate_factory=lambda: make_indicator(Point(np.zeros(dim), atol)),
        prox_map=lambda v, tau: v.copy(),
        subdifferential=(lambda v: (0.0, 0.0)) if dim == 1 else None,
    )


def linear(c) -> ConvexFunction:
    """``v -> <c, v>``; conjugate is the indicator of ``{c}``."""
    c = as_vec(c)
    return ConvexFunction(
        dim=c.size,
        evaluate=lambda v: float(c @ v),
        name=f"linear{tuple(c)}",
        conjugate_factory=lambda: make_indicator(_loosened(Point(c))),
        prox_map=lambda v, tau: v - tau * c,
        subdifferential=(lambda v: (float(c[0]), float(c[0]))) if c.size == 1 else None,
    )


def scaled_norm(a: float, dim: int = 1) -> ConvexFunction:
    """``a * ||v||_2``; for ``dim=1`` this is ``a|v|``."""
    a = float(a)
    if a < 0:
        raise ConstructionError("norm scale must be nonnegative")

    def prox(v, tau):
        nv = np.linalg.norm(v)
        if nv <= tau * a:
            return np.zeros_like(v)
        return v * (1.0 - tau * a / nv)

    def subdiff(v):
        x = float(v[0])
        if x > 0:
            return (a, a)
        if x < 0:
            return (-a, -a)
        return (-a, a)

    return ConvexFunction(
        dim=dim,
        evaluate=lambda v: a * float(np.linalg.norm(v)),
        name=f"{a}*norm",
        conjugate_factory=lambda: make_indicator(_loosened(Ball(np.zeros(dim), a))),
        prox_map=prox,
        subdifferential=subdiff if dim == 1 else None,
    )


def quadratic(Q) -> ConvexFunction:
    """``1/2 <v, Q v>`` with ``Q`` symmetric positive definite."""
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    if Q.shape[0] != Q.shape[1] or not np.allclose(Q, Q.T):
        raise ConstructionError("Q must be square and symmetric")
    try:
        np.linalg.cholesky(Q)
    except np.linalg.LinAlgError as exc:
        raise ConstructionError("Q must be positive definite") from exc
    n = Q.shape[0]
    eye = np.eye(n)
    return ConvexFunction(
        dim=n,
        evaluate=lambda v: 0.5 * float(v @ Q @ v),
        name="quadratic",
        conjugate_factory=lambda: quadratic(np.linalg.inv(Q)),
        prox_map=lambda v, tau: np.linalg.solve(eye + tau * Q, v),
        subdifferential=(lambda v: (float(Q[0, 0] * v[0]),) * 2) if n == 1 else None,
    )


def direct_sum(parts: Sequence[ConvexFunction], name: str | None = None) -> ConvexFunction:
    """Block-separable sum ``f(v) = sum_i f_i(v_i)`` over consecutive blocks."""
    parts = list(parts)
    if not parts:
        raise ConstructionError("direct_sum needs at least one part")
    bounds = np.cumsum([0] + [p.dim for p in parts])
    dim = int(bounds[-1])
    slices = [slice(int(bounds[i]), int(bounds[i + 1])) for i in range(len(parts))]

    def ev(v):
        total = 0.0
        for f, s in zip(parts, slices):
            val = f.evaluate(v[s])
            if is_inf(val):
                return INF
            total += val
        return total

    conj = None
    if all(p.has_conjugate for p in parts):
        conj = lambda: direct_sum([p.conjugate for p in parts])  # noqa: E731

    prox = None
    if all(p.prox_map is not None for p in parts):

        def prox(v, tau):
            return np.concatenate([f.prox_map(v[s], tau) for f, s in zip(parts, slices)])

    bound = None
    if all(p.domain_bound is not None for p in parts):
        bound = max(p.domain_bound for p in parts)

    return ConvexFunction(
        dim=dim,
        evaluate=ev,
        name=name or " (+) ".join(p.name for p in parts),
        conjugate_factory=conj,
        prox_map=prox,
        domain_bound=bound,
    )


def precompose_orthogonal(f: ConvexFunction, Q, name: str | None = None) -> ConvexFunction:
    """``v -> f(Q v)`` for an orthogonal ``Q``.

    Orthogonality gives ``(f o Q)^* = f^* o Q`` and
    ``prox_{f o Q}(v) = Q^T prox_f(Q v)``.
    """
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    if Q.shape != (f.dim, f.dim) or not np.allclose(Q @ Q.T, np.eye(f.dim), atol=1e-12):
        raise ConstructionError("precompose_orthogonal needs an orthogonal matrix of matching size")

    conj = None
    if f.has_conjugate:
        conj = lambda: precompose_orthogonal(f.conjugate, Q)  # noqa: E731
    prox = None
    if f.prox_map is not None:
        prox = lambda v, tau: Q.T @ f.prox_map(Q @ v, tau)  # noqa: E731

    return ConvexFunction(
        dim=f.dim,
        evaluate=lambda v: f.evaluate(Q @ v),
        name=name or f"{f.name} o Q",
        conjugate_factory=conj,
        prox_map=prox,
        domain_bound=f.domain_bound,
    )


# ---------------------------------------------------------------------------
# Numerical conjugation by grid supremum
# ---------------------------------------------------------------------------


class ConjugateSample(NamedTuple):
    value: ExtReal
    reliable: bool


class SampledConvexFunction:
    """Primal samples of ``f`` on a tensor grid; evaluates the grid conjugate.

    ``self(w)`` returns ``max_v <v, w> - f(v)`` over finite grid nodes and
    raises :class:`UnreliableConjugateError` when the maximizer sits on the
    box edge with the objective still increasing one spacing outward.
    """

    def __init__(self, f: ConvexFunction, box, n: int):
        if f.dim not in (1, 2):
            raise UnsupportedOperation("grid conjugation is limited to dimension <= 2")
        if n < 3:
            raise ValueError("need at least 3 nodes per axis")
        box = np.atleast_2d(np.asarray(box, dtype=float))
        if box.shape != (f.dim, 2) or np.any(box[:, 0] >= box[:, 1]):
            raise ValueError("box must be a (dim, 2) array of increasing bounds")
        self.f = f
        self.box = box
        self.n = int(n)
        self.axes = [np.linspace(lo, hi, self.n) for lo, hi in box]
        self.spacing = (box[:, 1] - box[:, 0]) / (self.n - 1)
        mesh = np.meshgrid(*self.axes, indexing="ij")
        self.nodes = np.stack([m.ravel() for m in mesh], axis=1)
        vals = [f.evaluate(node) for node in self.nodes]
        self.finite = np.array([not is_inf(v) for v in vals])
        if not self.finite.any():
            raise ConstructionError("function is +inf on every grid node")
        self.values = np.array([v if not is_inf(v) else 0.0 for v in vals], dtype=float)
        self._fin_nodes = self.nodes[self.finite]
        self._fin_values = self.values[self.finite]

    @property
    def dim(self) -> int:
        return self.f.dim

    def evaluate(self, w) -> ConjugateSample:
        w = as_vec(w, self.dim)
        obj = self._fin_nodes @ w - self._fin_values
        i = int(np.argmax(obj))
        best = float(obj[i])
        return ConjugateSample(best, self._reliable_at(self._fin_nodes[i], w, best))

    def __call__(self, w) -> float:
        sample = self.evaluate(w)
        if not sample.reliable:
            raise UnreliableConjugateError(np.asarray(w).tolist(), sample.value)
        return sample.value

    def _reliable_at(self, node, w, best) -> bool:
        for axis in range(self.dim):
            lo, hi = self.box[axis]
            for edge, sign in ((lo, -1.0), (hi, 1.0)):
                if node[axis] != edge:
                    continue
                outward = node.copy()
                outward[axis] += sign * self.spacing[axis]
                fo = self.f.evaluate(outward)
                if is_inf(fo):
                    continue
                if float(outward @ w) - fo > best + 1e-14 * max(1.0, abs(best)):
                    return False
        return True

    def is_grid_convex(self, tol: float = 1e-12) -> bool:
        """Discrete midpoint inequality along every axis (infinite nodes skipped)."""
        shape = (self.n,) * self.dim
        vals = np.where(self.finite, self.values, np.inf).reshape(shape)
        for axis in range(self.dim):
            v = np.moveaxis(vals, axis, 0)
            left, mid, right = v[:-2], v[1:-1], v[2:]
            ok = np.isinf(left) | np.isinf(right) | (mid <= 0.5 * (left + right) + tol)
            if not np.all(ok):
                return False
        return True


def conjugate_numeric(f: ConvexFunction, box=None, n: int = 201) -> SampledConvexFunction:
    """Grid-supremum conjugate of ``f`` on ``box`` (defaults to ``[-R, R]^dim``)."""
    if box is None:
        if f.domain_bound is None:
            raise ValueError("box required when f has no domain_bound")
        box = [(-f.domain_bound, f.domain_bound)] * f.dim
    return SampledConvexFunction(f, box, n)


# ---------------------------------------------------------------------------
# Gaps and proximal steps
# ---------------------------------------------------------------------------


def fenchel_gap(f: ConvexFunction, v, w, conjugate=None) -> ExtReal:
    """``f(v) + f^*(w) - <v, w>``; zero (within tolerance) iff ``w`` is a subgradient at ``v``.

    ``conjugate`` may be a :class:`SampledConvexFunction` when ``f`` has no
    closed form; an unreliable grid value raises.
    """
    v = as_vec(v, f.dim)
    w = as_vec(w, f.dim)
    fv = f.evaluate(v)
    if is_inf(fv):
        return INF
    if conjugate is None:
        conjugate = f.conjugate
    fw = conjugate(w)
    if is_inf(fw):
        return INF
    return ext(fv + fw - float(v @ w))


def prox_step(f: ConvexFunction, v, tau: float) -> np.ndarray:
    """``argmin_p f(p) + ||p - v||^2 / (2 tau)``."""
    if not tau > 0:
        raise ValueError("prox step size must be positive")
    v = as_vec(v, f.dim)
    if f.prox_map is not None:
        return np.asarray(f.prox_map(v, float(tau)), dtype=float)
    if f.dim != 1:
        raise UnsupportedOperation(f"{f.name}: no prox map and dimension {f.dim} > 1")
    from sbenpy.optim import minimize_convex_1d

    x0 = float(v[0])
    if f.domain_bound is not None:
        lo, hi = -f.domain_bound, f.domain_bound
    else:
        width = 10.0 * (1.0 + abs(x0))
        lo, hi = x0 - width, x0 + width
    obj = lambda p: _prox_objective(f, p, x0, tau)  # noqa: E731
    p, _ = minimize_convex_1d(obj, min(lo, x0), max(hi, x0))
    return np.array([p])


def _prox_objective(f, p, x0, tau):
    val = f.evaluate(np.array([p]))
    if is_inf(val):
        return INF
    return val + (p - x0) ** 2 / (2.0 * tau)
