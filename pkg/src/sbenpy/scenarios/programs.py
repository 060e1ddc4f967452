"""Scalar time programs for loads, drives and normal forces."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from sbenpy.errors import ConstructionError


class Program:
    def __call__(self, t: float) -> float:  # pragma: no cover - interface
        raise NotImplementedError

    def sample(self, times) -> np.ndarray:
        return np.array([self(float(t)) for t in times])


@dataclass(frozen=True)
class Zero(Program):
    def __call__(self, t: float) -> float:
        return 0.0


@dataclass(frozen=True)
class Constant(Program):
    value: float

    def __call__(self, t: float) -> float:
        return float(self.value)


@dataclass(frozen=True)
class PiecewiseLinear(Program):
    """Linear interpolation through ``(times[i], values[i])``, constant outside."""

    times: Sequence[float]
    values: Sequence[float]

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if t.ndim != 1 or t.size < 1 or t.shape != v.shape:
            raise ConstructionError("piecewise-linear program needs matching, non-empty times and values")
        if np.any(np.diff(t) <= 0):
            raise ConstructionError("piecewise-linear times must be strictly increasing")
        object.__setattr__(self, "times", tuple(t.tolist()))
        object.__setattr__(self, "values", tuple(v.tolist()))

    def __call__(self, t: float) -> float:
        return float(np.interp(t, self.times, self.values))


@dataclass(frozen=True)
class HalfSine(Program):
    """``amplitude * sin(pi (t - start) / duration)`` on ``[start, start + duration]``, zero elsewhere."""

    amplitude: float
    duration: float
    start: float = 0.0

    def __post_init__(self):
        if not self.duration > 0:
            raise ConstructionError("half-sine duration must be positive")

    def __call__(self, t: float) -> float:
        s = t - self.start
        if s < 0 or s > self.duration:
            return 0.0
        return float(self.amplitude * math.sin(math.pi * s / self.duration))


def program_from_spec(spec) -> Program:
    """Build a program from a plain mapping ``{"kind": ..., ...}`` or a number."""
    if isinstance(spec, Program):
        return spec
    if spec is None:
        return Zero()
    if isinstance(spec, (int, float)):
        return Constant(float(spec))
    spec = dict(spec)
    kind = spec.pop("kind")
    table = {
        "zero": Zero,
        "constant": Constant,
        "piecewise_linear": PiecewiseLinear,
        "half_sine": HalfSine,
    }
    if kind not in table:
        raise ConstructionError(f"unknown program kind {kind!r}; expected one of {sorted(table)}")
    return table[kind](**spec)
