"""
Experiment configuration: a TOML file parsed into ExperimentConfig, plus
embedded presets that reproduce the four reference figures.
"""

from __future__ import annotations

import logging
import math
import os
from typing import Literal, Optional, Union

from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    PositiveFloat,
    PositiveInt,
    ValidationError,
    field_validator,
    model_validator,
)

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from utils.dynamics import ControllerSpec, ControllerVariant, PlantParams, State
from utils.integrate import Method

logger = logging.getLogger(__name__)

NON_DITHERED_DEFAULT_STEP = 1e-4

StepPolicy = Union[Literal["default"], PositiveFloat]


class ConfigError(ValueError):
    """Unreadable or invalid configuration; the message names the offending fields."""


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class TimeSpan(_Section):
    t0: float = 0.0
    tf: float

    @model_validator(mode="after")
    def _ordered(self) -> "TimeSpan":
        if self.tf < self.t0:
            raise ValueError(f"tf ({self.tf}) must not precede t0 ({self.t0})")
        return self


class IntegratorSettings(_Section):
    method: Method = Method.EULER
    step: StepPolicy = "default"


class InitialConditions(_Section):
    states: list[tuple[float, float]] = [(1.0, 0.0)]
    random_count: int = Field(0, ge=0)
    y_range: tuple[float, float] = (-2.0, 2.0)
    k_range: tuple[float, float] = (-2.0, 2.0)
    seed: Optional[int] = None

    @model_validator(mode="after")
    def _at_least_one(self) -> "InitialConditions":
        if not self.states and self.random_count == 0:
            raise ValueError("no initial states: list some or set random_count")
        return self


class OutputSettings(_Section):
    directory: str = "out"
    with_lbs: bool = False
    report: bool = True
    band: PositiveFloat = 0.1


class LbsSettings(_Section):
    method: Method = Method.RK4
    step: PositiveFloat = 1e-4


class CompareEntry(_Section):
    variant: ControllerVariant
    label: Optional[str] = None
    omega: PositiveFloat = 400.0
    nussbaum_fn: str = "s_cos_s"
    sign_b: Optional[int] = None
    method: Method = Method.EULER
    step: StepPolicy = "default"

    def controller(self) -> ControllerSpec:
        return ControllerSpec(
            variant=self.variant, omega=self.omega, nussbaum_fn=self.nussbaum_fn, sign_b=self.sign_b
        )

    @property
    def name(self) -> str:
        return self.label or self.variant.value

    @model_validator(mode="after")
    def _valid_controller(self) -> "CompareEntry":
        self.controller()
        return self


class SweepSettings(_Section):
    omegas: list[PositiveFloat] = Field(min_length=1)


class CheckSettings(_Section):
    box: tuple[float, float, float, float] = (-2.0, 2.0, -2.0, 2.0)
    dithers: list[str] = ["sin", "cos"]
    grid: int = Field(50, ge=2)
    time_samples: int = Field(20, ge=1)
    nussbaum_k0: float = 0.0
    nussbaum_k_max: float = 50.0
    nussbaum_grid: int = Field(10_000, ge=1000)


class ChenFliessSettings(_Section):
    orders: list[int] = Field([0, 1, 2], min_length=1)
    periods_per_step: PositiveInt = 1

    @model_validator(mode="after")
    def _orders_in_table(self) -> "ChenFliessSettings":
        bad = [d for d in self.orders if not 0 <= d <= 3]
        if bad:
            raise ValueError(f"orders {bad} outside 0..3")
        return self


class ExperimentConfig(_Section):
    plant: PlantParams
    controller: ControllerSpec = ControllerSpec()
    time: TimeSpan
    integrator: IntegratorSettings = IntegratorSettings()
    initial: InitialConditions = InitialConditions()
    outputs: OutputSettings = OutputSettings()
    lbs: LbsSettings = LbsSettings()
    compare: Optional[list[CompareEntry]] = None
    sweep: Optional[SweepSettings] = None
    check: CheckSettings = CheckSettings()
    chenfliess: ChenFliessSettings = ChenFliessSettings()

    @field_validator("compare")
    @classmethod
    def _distinct_labels(cls, entries: Optional[list[CompareEntry]]) -> Optional[list[CompareEntry]]:
        names = [entry.name for entry in entries or []]
        duplicates = sorted({name for name in names if names.count(name) > 1})
        if duplicates:
            raise ValueError(f"compare entries need distinct labels, repeated: {duplicates}")
        return entries

    @property
    def h(self) -> float:
        return resolve_step(self.controller, self.integrator.step)

    @property
    def explicit_states(self) -> list[State]:
        return [State(y=y, k=k) for y, k in self.initial.states]


def resolve_step(controller: ControllerSpec, step: StepPolicy) -> float:
    """"default" means 1/40 of a dither period for dithered laws and 1e-4 otherwise."""
    if step != "default":
        return float(step)
    if controller.is_dithered:
        return 2.0 * math.pi / (40.0 * controller.omega)
    return NON_DITHERED_DEFAULT_STEP


def format_validation_error(error: ValidationError) -> str:
    lines = []
    for item in error.errors():
        location = ".".join(str(part) for part in item["loc"]) or "<root>"
        lines.append(f"{location}: {item['msg']}")
    return "\n".join(lines)


def parse_config(text: str, source: str = "<string>") -> ExperimentConfig:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"{source}: not valid TOML: {e}") from e
    try:
        config = ExperimentConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(format_validation_error(e)) from e
    logger.info(f"Loaded config from {source}")
    return config


def load_config(path: str) -> ExperimentConfig:
    try:
        with open(path, "r", encoding="utf-8") as f:
            text = f.read()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    return parse_config(text, source=path)


_FIG1 = """\
# Proposed controller from several initial states, with the Lie-bracket orbits.
[plant]
a = 10.0
b = -2.0

[controller]
variant = "proposed"
omega = 400.0

[time]
t0 = 0.0
tf = 3.0

[integrator]
method = "euler"
step = "default"

[initial]
states = [[1.0, 0.0], [-1.0, 0.0], [0.5, -3.0], [-0.5, -7.0]]

[outputs]
directory = "out/fig1"
with_lbs = true

[sweep]
omegas = [100.0, 400.0, 1600.0]
"""

_FIG2 = """\
# Proposed controller against the Nussbaum-type controller h(s) = s cos s.
[plant]
a = 10.0
b = -2.0

[controller]
variant = "proposed"
omega = 400.0

[time]
t0 = 0.0
tf = 3.0

[initial]
states = [[1.0, 0.0]]

[outputs]
directory = "out/fig2"
with_lbs = true

[[compare]]
variant = "proposed"
omega = 400.0
step = "default"

[[compare]]
variant = "nussbaum"
nussbaum_fn = "s_cos_s"
step = 1e-4
"""

_FIG3 = """\
# Proposed controller against the swapped design.
[plant]
a = 10.0
b = -2.0

[controller]
variant = "proposed"
omega = 400.0

[time]
t0 = 0.0
tf = 3.0

[initial]
states = [[1.0, 0.0]]

[outputs]
directory = "out/fig3"
with_lbs = true

[[compare]]
variant = "proposed"
omega = 400.0

[[compare]]
variant = "swapped"
omega = 400.0
"""

_FIG4 = """\
# Chen-Fliess integration of orders 0, 1 and 2 against the Euler orbit.
[plant]
a = 10.0
b = -2.0

[controller]
variant = "proposed"
omega = 400.0

[time]
t0 = 0.0
tf = 2.0

[initial]
states = [[1.0, 0.0]]

[outputs]
directory = "out/fig4"

[chenfliess]
orders = [0, 1, 2]
periods_per_step = 1
"""

PRESETS = {
    "fig1": _FIG1,
    "fig2": _FIG2,
    "fig3": _FIG3,
    "fig4": _FIG4,
}


def load_preset(name: str) -> tuple[ExperimentConfig, str]:
    """Return the parsed preset and its TOML text."""
    if name not in PRESETS:
        raise ConfigError(f"unknown preset '{name}', expected one of {sorted(PRESETS)}")
    text = PRESETS[name]
    return parse_config(text, source=f"preset:{name}"), text


def write_config_text(text: str, directory: str) -> str:
    os.makedirs(directory, exist_ok=True)
    path = os.path.join(directory, "config.toml")
    with open(path, "w", encoding="utf-8") as f:
        f.write(text)
    return path
