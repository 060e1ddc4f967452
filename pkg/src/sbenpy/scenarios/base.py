"""Scenario container and the common runner."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from sbenpy.dynamics import DissipationLaw, HamiltonianSystem, OracleConfig, oracle_trajectory
from sbenpy.errors import UnsupportedOperation
from sbenpy.extended import to_float
from sbenpy.functional import (
    PathCoordinates,
    StepSpaceFactory,
    assemble_functional,
    minimize_global,
    minimize_incremental,
)
from sbenpy.path import DiscretePath
from sbenpy.symplectic import PhaseVector

SOLVERS = ("oracle", "sben-incremental", "sben-global")


@dataclass(frozen=True, eq=False)
class LawParts:
    """Constitutive block of a scenario's phase bipotential, for audits.

    The phase bipotential is ``local`` on the slots ``block`` plus ``I_{0}``
    on the ``pinned`` first-argument slots.  ``sampler(rng) -> (x, y)``
    draws local argument pairs; ``potential`` is set for separated blocks.
    """

    local: Optional[object]
    block: tuple
    pinned: tuple
    sampler: Optional[Callable] = None
    potential: Optional[object] = None


@dataclass(frozen=True, eq=False)
class Scenario:
    """A runnable lumped problem.

    ``observe(t, z)`` returns the reduced quantities listed in ``columns``;
    ``reaction(t0, z0, t1, z1)`` recovers the dual variable of a step
    (stress, contact reaction, driving force) from the constraint relations.
    """

    name: str
    system: HamiltonianSystem
    law: DissipationLaw
    z0: PhaseVector
    step_space: StepSpaceFactory
    columns: tuple
    observe: Callable[[float, PhaseVector], Sequence[float]]
    constraint: Optional[Callable] = field(default=None, repr=False)
    coordinates: Optional[Callable[[DiscretePath], PathCoordinates]] = field(default=None, repr=False)
    params: object = None
    parts: Optional[LawParts] = field(default=None, repr=False)
    check_times: Optional[Callable[[np.ndarray], None]] = field(default=None, repr=False)


@dataclass(frozen=True)
class TimeSeries:
    scenario: str
    solver: str
    columns: tuple
    times: np.ndarray
    table: np.ndarray
    gaps: np.ndarray
    dissipation: np.ndarray
    total_pi: float
    path: DiscretePath = field(repr=False)
    global_history: Optional[tuple] = None
    profile: tuple = field(default=(), repr=False)

    @property
    def cumulative_dissipation(self) -> np.ndarray:
        return np.concatenate([[0.0], np.cumsum(self.dissipation)])

    def column(self, name: str) -> np.ndarray:
        return self.table[:, self.columns.index(name)]

    @property
    def total_dissipation(self) -> float:
        return float(np.sum(self.dissipation))


def solve_path(s: Scenario, cfg: OracleConfig, solver: str, global_iters: int = 50):
    if solver not in SOLVERS:
        raise ValueError(f"unknown solver {solver!r}; expected one of {SOLVERS}")
    if s.check_times is not None:
        s.check_times(cfg.times)
    if solver == "oracle":
        return oracle_trajectory(s.system, s.law, s.z0, cfg, constraint=s.constraint), None
    if solver == "sben-incremental":
        return minimize_incremental(s.system, s.law, s.z0, cfg, s.step_space, constraint=s.constraint), None
    if solver == "sben-global":
        if s.coordinates is None:
            raise UnsupportedOperation(f"scenario {s.name} has no whole-path coordinates for global descent")
        start = minimize_incremental(s.system, s.law, s.z0, cfg, s.step_space, constraint=s.constraint)
        res = minimize_global(start, s.system, s.law, s.coordinates(start), iters=global_iters)
        return res.path, res.history


def series_from_path(s: Scenario, path: DiscretePath, solver: str, history=None) -> TimeSeries:
    pi, profile = assemble_functional(path, s.law, s.system)
    table = np.array([list(s.observe(t, z)) for t, z in zip(path.times, path.nodes)], dtype=float)
    gaps = np.array([to_float(r.gap) for r in profile])
    diss = np.array([to_float(r.dissipation_term) for r in profile])
    return TimeSeries(s.name, solver, tuple(s.columns), path.times, table, gaps, diss,
                      to_float(pi), path, history, tuple(profile))


def run_scenario(s: Scenario, cfg: OracleConfig, solver: str = "sben-incremental",
                 global_iters: int = 50) -> TimeSeries:
    path, history = solve_path(s, cfg, solver, global_iters)
    return series_from_path(s, path, solver, history)
