"""
Plant, closed-loop vector fields, Lie-bracket system and polar forms.

Every function in this module is pure. A state can be passed as a ``State``
model, a ``(y, k)`` tuple or a numpy array of length two.
"""

from __future__ import annotations

import math
from enum import Enum
from typing import Callable, NamedTuple, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

DEFAULT_OMEGA = 400.0


class PreconditionError(ValueError):
    """Raised when an operation is called outside its domain."""


class PlantParams(BaseModel):
    """The unknown pair (a, b) of the scalar plant dy/dt = a*y + b*u."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    a: float = Field(allow_inf_nan=False)
    b: float = Field(allow_inf_nan=False)

    @field_validator("b")
    @classmethod
    def _b_nonzero(cls, value: float) -> float:
        if value == 0:
            raise ValueError("input gain b must be nonzero")
        return value

    @property
    def c0(self) -> float:
        return self.a / self.b

    @property
    def sign_b(self) -> int:
        return 1 if self.b > 0 else -1


class State(BaseModel):
    """Closed-loop state (y, k)."""

    model_config = ConfigDict(frozen=True)

    y: float = Field(allow_inf_nan=False)
    k: float = Field(allow_inf_nan=False)

    def as_array(self) -> np.ndarray:
        return np.array((self.y, self.k), dtype=float)

    @classmethod
    def from_array(cls, x) -> "State":
        return cls(y=float(x[0]), k=float(x[1]))


class PolarState(BaseModel):
    """Polar image (r, phi) of a state around the center (0, c0)."""

    model_config = ConfigDict(frozen=True)

    r: float = Field(ge=0.0, allow_inf_nan=False)
    phi: float = Field(allow_inf_nan=False)
    c0: float = 0.0
    degenerate: bool = False


class Derivative(NamedTuple):
    dy: float
    dk: float
    u: Optional[float] = None


class PolarDerivative(NamedTuple):
    dr: float
    dphi: float


# Nussbaum-type gain functions, addressable by name from configs

def s_cos_s(s):
    return s * np.cos(s)


def constant_one(s):
    return np.ones_like(s, dtype=float) if isinstance(s, np.ndarray) else 1.0


def constant_minus_one(s):
    return -constant_one(s)


NUSSBAUM_FUNCTIONS: dict[str, Callable] = {
    "s_cos_s": s_cos_s,
    "one": constant_one,
    "minus_one": constant_minus_one,
}


def register_nussbaum_function(name: str, fn: Callable) -> None:
    """Make a custom gain function available to ControllerSpec by name."""
    NUSSBAUM_FUNCTIONS[name] = fn


class ControllerVariant(str, Enum):
    PROPOSED = "proposed"
    SWAPPED = "swapped"
    NUSSBAUM = "nussbaum"
    WILLEMS_BYRNES = "willems-byrnes"


DITHERED_VARIANTS = (ControllerVariant.PROPOSED, ControllerVariant.SWAPPED)


class ControllerSpec(BaseModel):
    """Choice of control law plus its parameters."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    variant: ControllerVariant = ControllerVariant.PROPOSED
    omega: float = DEFAULT_OMEGA
    nussbaum_fn: str = "s_cos_s"
    sign_b: Optional[int] = None

    @model_validator(mode="after")
    def _check_variant_fields(self) -> "ControllerSpec":
        if self.variant in DITHERED_VARIANTS and not self.omega > 0:
            raise ValueError(f"omega must be positive for the {self.variant.value} controller")
        if self.variant is ControllerVariant.WILLEMS_BYRNES and self.sign_b not in (-1, 1):
            raise ValueError("sign_b must be -1 or +1 for the willems-byrnes controller")
        if self.nussbaum_fn not in NUSSBAUM_FUNCTIONS:
            raise ValueError(
                f"unknown nussbaum_fn '{self.nussbaum_fn}', expected one of {sorted(NUSSBAUM_FUNCTIONS)}"
            )
        return self

    @property
    def h(self) -> Callable:
        return NUSSBAUM_FUNCTIONS[self.nussbaum_fn]

    @property
    def is_dithered(self) -> bool:
        return self.variant in DITHERED_VARIANTS


def unpack_state(s) -> tuple[float, float]:
    if isinstance(s, State):
        return s.y, s.k
    return s[0], s[1]


def _require_omega(omega: float) -> None:
    if not omega > 0:
        raise PreconditionError(f"dither frequency must be positive, got {omega}")


# Control laws. None of these receives PlantParams.

def proposed_control(y: float, k: float, t: float, omega: float) -> tuple[float, float]:
    """Return (u, dk/dt) of the proposed law."""
    root = math.sqrt(omega)
    u = -k * y - y * root * math.sin(omega * t)
    return u, y * y * root * math.cos(omega * t)


def swapped_control(y: float, k: float, t: float, omega: float) -> tuple[float, float]:
    """Return (u, dk/dt) of the swapped design."""
    root = math.sqrt(omega)
    u = -k * y - 2.0 * y * y * root * math.sin(omega * t)
    return u, y * root * math.cos(omega * t)


def nussbaum_control(y: float, k: float, h: Callable) -> tuple[float, float]:
    return float(h(k)) * k * y, y * y


def willems_byrnes_control(y: float, k: float, sign_b: int) -> tuple[float, float]:
    return -k * y, sign_b * y * y


def plant_rhs(p: PlantParams, y: float, u: float) -> float:
    return p.a * y + p.b * u


# Closed-loop right-hand sides

def proposed_rhs(p: PlantParams, s, t: float, omega: float = DEFAULT_OMEGA) -> Derivative:
    _require_omega(omega)
    y, k = unpack_state(s)
    u, dk = proposed_control(y, k, t, omega)
    return Derivative(plant_rhs(p, y, u), dk, u)


def swapped_rhs(p: PlantParams, s, t: float, omega: float = DEFAULT_OMEGA) -> Derivative:
    _require_omega(omega)
    y, k = unpack_state(s)
    u, dk = swapped_control(y, k, t, omega)
    return Derivative(plant_rhs(p, y, u), dk, u)


def nussbaum_rhs(p: PlantParams, s, h: Callable = s_cos_s) -> Derivative:
    y, k = unpack_state(s)
    u, dk = nussbaum_control(y, k, h)
    return Derivative(plant_rhs(p, y, u), dk, u)


def willems_byrnes_rhs(p: PlantParams, s, sign_b: int) -> Derivative:
    if sign_b not in (-1, 1):
        raise PreconditionError(f"sign_b must be -1 or +1, got {sign_b}")
    y, k = unpack_state(s)
    u, dk = willems_byrnes_control(y, k, sign_b)
    return Derivative(plant_rhs(p, y, u), dk, u)


def lie_bracket_rhs(p: PlantParams, s) -> Derivative:
    """Averaged dynamics: dy = (a - b*k)*y, dk = b*y**2."""
    y, k = unpack_state(s)
    return Derivative((p.a - p.b * k) * y, p.b * y * y)


class ClosedLoop:
    """Plant closed with one of the four control laws, in integrator shape."""

    is_averaged = False

    def __init__(self, plant: PlantParams, controller: ControllerSpec):
        self.plant = plant
        self.controller = controller
        variant = controller.variant
        if variant is ControllerVariant.PROPOSED:
            self._rhs = lambda x, t: proposed_rhs(plant, x, t, controller.omega)
        elif variant is ControllerVariant.SWAPPED:
            self._rhs = lambda x, t: swapped_rhs(plant, x, t, controller.omega)
        elif variant is ControllerVariant.NUSSBAUM:
            h = controller.h
            self._rhs = lambda x, t: nussbaum_rhs(plant, x, h)
        else:
            self._rhs = lambda x, t: willems_byrnes_rhs(plant, x, controller.sign_b)

    @property
    def label(self) -> str:
        return self.controller.variant.value

    def derivative(self, x, t: float) -> Derivative:
        return self._rhs(x, t)

    def __call__(self, x, t: float) -> np.ndarray:
        d = self._rhs(x, t)
        return np.array((d.dy, d.dk))

    def control(self, x, t: float) -> float:
        return self._rhs(x, t).u


class LieBracketSystem:
    """The averaged system in the same shape as ClosedLoop."""

    is_averaged = True
    label = "lbs"

    def __init__(self, plant: PlantParams):
        self.plant = plant

    def derivative(self, x, t: float = 0.0) -> Derivative:
        return lie_bracket_rhs(self.plant, x)

    def __call__(self, x, t: float = 0.0) -> np.ndarray:
        y, k = unpack_state(x)
        return np.array(((self.plant.a - self.plant.b * k) * y, self.plant.b * y * y))

    def control(self, x, t: float = 0.0) -> None:
        return None


# Polar coordinates around (0, c0)

def to_polar(s, c0: float) -> PolarState:
    """Map (y, k) to (r, phi).

    phi equals arcsin((k - c0)/r) for y >= 0 and pi - arcsin((k - c0)/r)
    for y < 0; both branches are evaluated through atan2. The center itself
    maps to r = 0, phi = 0 with the degenerate flag set.
    """
    y, k = unpack_state(s)
    dk = k - c0
    r = math.hypot(y, dk)
    if r == 0.0:
        return PolarState(r=0.0, phi=0.0, c0=c0, degenerate=True)
    if y >= 0:
        phi = math.atan2(dk, y)
    else:
        phi = math.pi - math.atan2(dk, -y)
    return PolarState(r=r, phi=phi, c0=c0)


def from_polar(ps: PolarState, c0: Optional[float] = None) -> State:
    center = ps.c0 if c0 is None else c0
    return State(y=ps.r * math.cos(ps.phi), k=ps.r * math.sin(ps.phi) + center)


def polar_closed_loop_rhs(
    p: PlantParams,
    ps: PolarState,
    t: float,
    omega: float = DEFAULT_OMEGA,
    u1: Callable[[float], float] = math.sin,
    u2: Callable[[float], float] = math.cos,
) -> PolarDerivative:
    """Proposed closed loop in polar coordinates centered at c0 = a/b."""
    _require_omega(omega)
    r, phi, b = ps.r, ps.phi, p.b
    sin_phi, cos_phi = math.sin(phi), math.cos(phi)
    root = math.sqrt(omega)
    d1 = root * u1(omega * t)
    d2 = root * u2(omega * t)
    dr = (
        -b * r * r * sin_phi * cos_phi**2
        - b * r * cos_phi**2 * d1
        + r * r * sin_phi * cos_phi**2 * d2
    )
    dphi = (
        b * r * sin_phi**2 * cos_phi
        + b * sin_phi * cos_phi * d1
        + r * cos_phi**3 * d2
    )
    return PolarDerivative(dr, dphi)


def polar_lbs_rhs(p: PlantParams, ps: PolarState) -> PolarDerivative:
    return PolarDerivative(0.0, p.b * ps.r * math.cos(ps.phi))


def polar_to_cartesian_rate(ps: PolarState, rate: PolarDerivative) -> tuple[float, float]:
    """Push (dr, dphi) through the Jacobian of from_polar."""
    sin_phi, cos_phi = math.sin(ps.phi), math.cos(ps.phi)
    dy = rate.dr * cos_phi - ps.r * sin_phi * rate.dphi
    dk = rate.dr * sin_phi + ps.r * cos_phi * rate.dphi
    return dy, dk


if __name__ == "__main__":
    plant = PlantParams(a=10.0, b=-2.0)
    print(proposed_rhs(plant, (1.0, 1.0), math.pi / 800.0, 400.0))
    print(lie_bracket_rhs(plant, State(y=1.0, k=-5.0)))
    print(to_polar((1.0, plant.c0 + 1.0), plant.c0))
