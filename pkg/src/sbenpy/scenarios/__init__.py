"""Lumped benchmark problems and a common runner."""

from sbenpy.scenarios.base import SOLVERS, LawParts, Scenario, TimeSeries, run_scenario, series_from_path, solve_path
from sbenpy.scenarios.crack import CrackToyParams, PowerLawForce, build_crack_toy
from sbenpy.scenarios.oscillator import (
    OscillatorParams,
    ReversibleParams,
    build_elastoplastic_oscillator,
    build_reversible_oscillator,
    oscillator_coordinates,
    stress_path,
)
from sbenpy.scenarios.programs import Constant, HalfSine, PiecewiseLinear, Program, Zero, program_from_spec
from sbenpy.scenarios.slider import SliderParams, build_coulomb_slider, reactions

__all__ = [
    "SOLVERS", "LawParts", "Scenario", "TimeSeries", "run_scenario", "series_from_path", "solve_path",
    "CrackToyParams", "PowerLawForce", "build_crack_toy",
    "OscillatorParams", "ReversibleParams", "build_elastoplastic_oscillator", "build_reversible_oscillator",
    "oscillator_coordinates", "stress_path",
    "Constant", "HalfSine", "PiecewiseLinear", "Program", "Zero", "program_from_spec",
    "SliderParams", "build_coulomb_slider", "reactions",
]
