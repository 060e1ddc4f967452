"""Run configuration: a JSON document validated by pydantic models."""

from __future__ import annotations

import json
import os
from pathlib import Path
from typing import Annotated, Any, Literal, Optional, Union

import numpy as np
from pydantic import (
    BaseModel,
    BeforeValidator,
    ConfigDict,
    Field,
    NonNegativeFloat,
    PositiveFloat,
    ValidationError,
    field_validator,
    model_validator,
)

from sbenpy.dynamics import OracleConfig
from sbenpy.errors import ConfigError
from sbenpy.scenarios import (
    Constant,
    CrackToyParams,
    HalfSine,
    OscillatorParams,
    PiecewiseLinear,
    PowerLawForce,
    ReversibleParams,
    Scenario,
    SliderParams,
    Zero,
    build_coulomb_slider,
    build_crack_toy,
    build_elastoplastic_oscillator,
    build_reversible_oscillator,
)

OUTPUT_ROOT_ENV = "SBEN_OUTPUT_ROOT"


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


# --- time programs ----------------------------------------------------------


class ZeroProgram(_Strict):
    kind: Literal["zero"] = "zero"

    def build(self):
        return Zero()


class ConstantProgram(_Strict):
    kind: Literal["constant"] = "constant"
    value: float

    def build(self):
        return Constant(self.value)


class PiecewiseLinearProgram(_Strict):
    kind: Literal["piecewise_linear"] = "piecewise_linear"
    times: tuple[float, ...] = Field(min_length=1)
    values: tuple[float, ...] = Field(min_length=1)

    @model_validator(mode="after")
    def _knots(self):
        if len(self.times) != len(self.values):
            raise ValueError("times and values must have the same length")
        if any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise ValueError("times must be strictly increasing")
        return self

    def build(self):
        return PiecewiseLinear(self.times, self.values)


class HalfSineProgram(_Strict):
    kind: Literal["half_sine"] = "half_sine"
    amplitude: float
    duration: PositiveFloat
    start: float = 0.0

    def build(self):
        return HalfSine(self.amplitude, self.duration, self.start)


def _number_as_constant(v: Any) -> Any:
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        return {"kind": "constant", "value": v}
    return v


ProgramModel = Annotated[
    Union[ZeroProgram, ConstantProgram, PiecewiseLinearProgram, HalfSineProgram],
    Field(discriminator="kind"),
    BeforeValidator(_number_as_constant),
]


def _programs(items) -> tuple:
    return tuple(p.build() for p in items)


# --- scenarios --------------------------------------------------------------


class ElastoplasticOscillatorConfig(_Strict):
    type: Literal["elastoplastic-oscillator"] = "elastoplastic-oscillator"
    mass: PositiveFloat = 1.0
    stiffness: PositiveFloat = 1.0
    yield_stress: PositiveFloat = 1.0
    flow: Literal["associated", "plug-in"] = "associated"
    friction: PositiveFloat = 0.5
    load: tuple[ProgramModel, ...] = (ZeroProgram(),)
    drive_stiffness: NonNegativeFloat = 0.0
    drive: tuple[ProgramModel, ...] = (ZeroProgram(),)
    u0: Optional[tuple[float, ...]] = None
    v0: Optional[tuple[float, ...]] = None

    def build(self) -> Scenario:
        m = 1 if self.flow == "associated" else 2
        zeros = (0.0,) * m
        return build_elastoplastic_oscillator(OscillatorParams(
            mass=self.mass, stiffness=self.stiffness, yield_stress=self.yield_stress,
            load=_programs(self.load), u0=self.u0 or zeros, v0=self.v0 or zeros,
            drive_stiffness=self.drive_stiffness, drive=_programs(self.drive),
            flow=self.flow, friction=self.friction,
        ))


class ReversibleOscillatorConfig(_Strict):
    type: Literal["reversible-oscillator"] = "reversible-oscillator"
    mass: PositiveFloat = 1.0
    stiffness: PositiveFloat = 1.0
    load: ProgramModel = ZeroProgram()
    u0: float = 1.0
    v0: float = 0.0

    def build(self) -> Scenario:
        return build_reversible_oscillator(ReversibleParams(
            self.mass, self.stiffness, self.load.build(), self.u0, self.v0))


class CoulombSliderConfig(_Strict):
    type: Literal["coulomb-slider"] = "coulomb-slider"
    mass: PositiveFloat = 1.0
    stiffness: tuple[PositiveFloat, PositiveFloat] = (1.0, 1.0)
    friction: PositiveFloat = 0.5
    normal_force: ProgramModel = ConstantProgram(value=1.0)
    drive: tuple[ProgramModel, ProgramModel] = (ZeroProgram(), ZeroProgram())
    q0: tuple[float, float] = (0.0, 0.0)
    v0: tuple[float, float] = (0.0, 0.0)

    def build(self) -> Scenario:
        return build_coulomb_slider(SliderParams(
            mass=self.mass, stiffness=self.stiffness, friction=self.friction,
            normal_force=self.normal_force.build(), drive=_programs(self.drive), q0=self.q0, v0=self.v0,
        ))


class DrivingForceConfig(_Strict):
    coefficient: PositiveFloat = 1.0
    load_exponent: float = 2.0
    length_exponent: float = -1.0


class CrackToyConfig(_Strict):
    type: Literal["crack-toy"] = "crack-toy"
    toughness: PositiveFloat = 1.0
    driving_force: DrivingForceConfig = DrivingForceConfig()
    load: ProgramModel = ZeroProgram()
    a0: PositiveFloat = 1.0
    a_max: PositiveFloat = 100.0

    def build(self) -> Scenario:
        return build_crack_toy(CrackToyParams(
            toughness=self.toughness, driving_force=PowerLawForce(**self.driving_force.model_dump()),
            load=self.load.build(), a0=self.a0, a_max=self.a_max,
        ))


ScenarioConfig = Annotated[
    Union[ElastoplasticOscillatorConfig, ReversibleOscillatorConfig, CoulombSliderConfig, CrackToyConfig],
    Field(discriminator="type"),
]


# --- run blocks ---------------------------------------------------------------


class SolverConfig(_Strict):
    name: Literal["oracle", "sben-incremental", "sben-global"] = "sben-incremental"
    inner_tol: PositiveFloat = 1e-8
    max_inner_iters: int = Field(10_000, ge=1)
    global_iters: int = Field(50, ge=1)


class TimeConfig(_Strict):
    dt: PositiveFloat
    t_end: PositiveFloat

    @model_validator(mode="after")
    def _span(self):
        if self.t_end < self.dt:
            raise ValueError("t_end must be at least dt")
        return self


class OutputConfig(_Strict):
    directory: str = "sben-output"
    formats: tuple[Literal["csv", "json"], ...] = ("csv", "json")

    @field_validator("formats")
    @classmethod
    def _unique(cls, v):
        if len(set(v)) != len(v):
            raise ValueError("formats must not repeat")
        return v


class RunConfig(_Strict):
    scenario: ScenarioConfig
    solver: SolverConfig = SolverConfig()
    time: TimeConfig
    output: OutputConfig = OutputConfig()
    seed: int = 0

    def oracle_config(self, dt: float | None = None) -> OracleConfig:
        return OracleConfig(dt=dt or self.time.dt, t_end=self.time.t_end, inner_tol=self.solver.inner_tol,
                            max_inner_iters=self.solver.max_inner_iters)

    def build_scenario(self) -> Scenario:
        return self.scenario.build()

    def output_dir(self, root: str | os.PathLike | None = None) -> Path:
        path = Path(self.output.directory)
        if path.is_absolute():
            return path
        base = root if root is not None else os.environ.get(OUTPUT_ROOT_ENV) or "."
        return Path(base) / path

    def times(self) -> np.ndarray:
        return self.oracle_config().times


# --- parsing ----------------------------------------------------------------


def _line_of(text: str, loc: tuple) -> Optional[int]:
    """Best-effort line of the innermost key in ``loc``, following the keys in order."""
    pos, found = 0, None
    for part in loc:
        if not isinstance(part, str):
            continue
        hit = text.find(json.dumps(part), pos)
        if hit < 0:
            continue
        pos, found = hit, hit
    return None if found is None else text.count("\n", 0, found) + 1


def _describe(text: str, exc: ValidationError) -> str:
    lines = []
    for err in exc.errors():
        loc = tuple(err["loc"])
        where = ".".join(str(p) for p in loc) or "<root>"
        line = _line_of(text, loc)
        at = f" (line {line})" if line else ""
        lines.append(f"{where}{at}: {err['msg']}")
    return "invalid run configuration:\n  " + "\n  ".join(lines)


def parse_config(text: str) -> RunConfig:
    """Validate a JSON run configuration; errors name the field and its line."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(data, dict):
        raise ConfigError("run configuration must be a JSON object")
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_describe(text, exc)) from exc


def load_config(path: str | os.PathLike) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from exc
    return parse_config(text)


def serialize_config(cfg: RunConfig) -> str:
    return json.dumps(cfg.model_dump(mode="json"), indent=2) + "\n"
