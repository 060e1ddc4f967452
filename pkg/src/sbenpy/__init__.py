"""Symplectic Brezis-Ekeland-Nayroles (SBEN) variational solvers."""

from sbenpy.extended import INF, is_inf

__version__ = "0.1.0"

__all__ = ["INF", "is_inf", "__version__"]
