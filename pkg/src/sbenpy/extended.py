"""Extended reals ``R ∪ {+inf}`` with an explicit infinity marker.

Finite values are plain Python floats.  ``+inf`` is the singleton :data:`INF`,
never ``math.inf``, so an infinite gap cannot silently leak into float
arithmetic.  ``-inf`` does not exist in this number system: subtracting
:data:`INF` raises :class:`~sbenpy.errors.UndefinedArithmetic`.
"""

from __future__ import annotations

import math
from numbers import Real
from typing import Union

from sbenpy.errors import UndefinedArithmetic

__all__ = ["INF", "ExtReal", "is_inf", "ext", "to_float", "ext_sum"]


class _PositiveInfinity:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "INF"

    __str__ = __repr__

    def __reduce__(self):
        return (_PositiveInfinity, ())

    def __float__(self) -> float:
        return math.inf

    def __hash__(self) -> int:
        return hash("sbenpy.INF")

    def __eq__(self, other) -> bool:
        return other is self

    def __lt__(self, other) -> bool:
        _check_operand(other)
        return False

    def __le__(self, other) -> bool:
        _check_operand(other)
        return other is self

    def __gt__(self, other) -> bool:
        _check_operand(other)
        return other is not self

    def __ge__(self, other) -> bool:
        _check_operand(other)
        return True

    def __add__(self, other):
        _check_operand(other)
        return self

    __radd__ = __add__

    def __sub__(self, other):
        _check_operand(other)
        if other is self:
            raise UndefinedArithmetic("+inf - +inf is undefined")
        return self

    def __rsub__(self, other):
        raise UndefinedArithmetic("finite - (+inf) leaves the extended reals")

    def __neg__(self):
        raise UndefinedArithmetic("-(+inf) leaves the extended reals")

    def __mul__(self, other):
        _check_operand(other)
        if other is self:
            return self
        if other > 0:
            return self
        if other == 0:
            # convex-analysis convention 0 * (+inf) = 0
            return 0.0
        raise UndefinedArithmetic("negative multiple of +inf")

    __rmul__ = __mul__


def _check_operand(other) -> None:
    if other is INF:
        return
    if not isinstance(other, Real) or math.isnan(other) or math.isinf(other):
        raise UndefinedArithmetic(f"invalid extended-real operand {other!r}")


INF = _PositiveInfinity()

ExtReal = Union[float, _PositiveInfinity]


def is_inf(value) -> bool:
    return value is INF


def ext(value) -> ExtReal:
    """Coerce a float-like value to an extended real (``math.inf`` becomes :data:`INF`)."""
    if value is INF:
        return INF
    value = float(value)
    if math.isnan(value):
        raise UndefinedArithmetic("NaN is not an extended real")
    if value == math.inf:
        return INF
    if value == -math.inf:
        raise UndefinedArithmetic("-inf is not admitted")
    return value


def to_float(value: ExtReal) -> float:
    """Float view for output and vectorized numerics."""
    return math.inf if value is INF else float(value)


def ext_sum(values) -> ExtReal:
    total = 0.0
    for v in values:
        if v is INF:
            return INF
        total += float(v)
    return total
