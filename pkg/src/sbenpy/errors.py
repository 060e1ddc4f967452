"""Exception hierarchy shared by the library and the command line front-end."""

from __future__ import annotations


class SbenError(Exception):
    """Base class for every error raised by :mod:`sbenpy`."""


class UndefinedArithmetic(SbenError, ArithmeticError):
    """Raised for ``+inf - +inf`` and other operations leaving the extended reals."""


class ConstructionError(SbenError, ValueError):
    """A catalog object was requested with an empty or invalid description."""


class UnsupportedOperation(SbenError):
    """The requested operation needs data the object does not carry."""


class UnreliableConjugateError(SbenError):
    """A grid supremum was attained on the sampling box edge and still growing."""

    def __init__(self, w, value):
        super().__init__(f"numeric conjugate unreliable at w={w!r} (grid value {value!r})")
        self.w = w
        self.value = value


class AdmissibilityError(SbenError):
    """A discrete path violates its initial condition or constraints."""


class SolverError(SbenError):
    """A step solve failed; carries the step index, an iterate trace and the nodes reached."""

    def __init__(self, message: str, step: int | None = None, trace: list | None = None,
                 partial: list | None = None):
        if step is not None:
            message = f"step {step}: {message}"
        super().__init__(message)
        self.reason = message
        self.step = step
        self.trace = list(trace or [])
        self.partial = list(partial or [])


class ConfigError(SbenError):
    """Invalid run configuration."""
