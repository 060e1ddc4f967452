import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from sbenpy.convex import (
    Ball,
    Box,
    HalfSpace,
    NonnegativeOrthant,
    Point,
    direct_sum,
    interval,
    linear,
    make_indicator,
    quadratic,
    scaled_norm,
    support_function,
    zero,
)

settings.register_profile("repo", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repo")


def catalog_1d():
    return {
        "I_point": make_indicator(Point([0.0])),
        "I_interval": make_indicator(interval(-1.0, 2.0)),
        "I_ball": make_indicator(Ball([0.5], 1.5)),
        "I_halfspace": make_indicator(HalfSpace([2.0], 1.0)),
        "I_orthant": make_indicator(NonnegativeOrthant(1)),
        "sigma_interval": support_function(interval(-1.0, 2.0)),
        "norm": scaled_norm(2.0),
        "quadratic": quadratic([[3.0]]),
        "linear": linear([0.5]),
        "zero": zero(1),
    }


def catalog_2d():
    return {
        "I_ball2": make_indicator(Ball([0.0, 0.0], 1.0)),
        "I_box2": make_indicator(Box([-1.0, 0.0], [1.0, 2.0])),
        "I_halfspace2": make_indicator(HalfSpace([1.0, -1.0], 0.5)),
        "I_orthant2": make_indicator(NonnegativeOrthant(2)),
        "sigma_ball2": support_function(Ball([0.0, 0.0], 1.0)),
        "sigma_box2": support_function(Box([-1.0, 0.0], [1.0, 2.0])),
        "norm2": scaled_norm(1.5, 2),
        "quadratic2": quadratic([[2.0, 0.5], [0.5, 1.0]]),
        "abs_plus_half_square": direct_sum([scaled_norm(1.0), quadratic([[1.0]])]),
        "I_point2": make_indicator(Point([0.0, 0.0])),
    }


def phase_catalog():
    """Catalog members of even dimension, read as functions of ``z = (x, y)``."""
    out = dict(catalog_2d())
    out["quadratic4"] = quadratic(np.diag([1.0, 2.0, 0.5, 3.0]))
    out["norm_plus_ball4"] = direct_sum([scaled_norm(1.0, 2), make_indicator(Ball([0.0, 0.0], 2.0))])
    return out


def full_catalog():
    return {**catalog_1d(), **catalog_2d()}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
