"""
Diagnostics on trajectories and gain functions: Lyapunov family of the
Lie-bracket system, its limit point, the frequency sweep of the
approximation error, the Nussbaum-type test and convergence reports.
"""

from __future__ import annotations

import logging
import math
from typing import Callable, Iterable, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy.integrate import cumulative_simpson

from utils.dynamics import (
    ClosedLoop,
    ControllerSpec,
    ControllerVariant,
    LieBracketSystem,
    PlantParams,
    PreconditionError,
    State,
    lie_bracket_rhs,
    unpack_state,
)
from utils.integrate import Method, Trajectory, resample_nearest, simulate

logger = logging.getLogger(__name__)

LBS_MAX_STEP = 1e-4
TAIL_FRACTION = 0.1


def default_step(omega: float) -> float:
    """Euler step of 1/40 of a dither period."""
    return 2.0 * math.pi / (40.0 * omega)


class LyapunovParams(BaseModel):
    """V_p(y, k) = y**2/2 + (k - c_p)**2/2 with c_p = (a + p)/b."""

    model_config = ConfigDict(frozen=True)

    p: float = Field(ge=0.0)
    c_p: float = Field(allow_inf_nan=False)

    @classmethod
    def for_plant(cls, plant: PlantParams, p: float) -> "LyapunovParams":
        return cls(p=p, c_p=(plant.a + p) / plant.b)


def lyapunov_value(lp: LyapunovParams, s) -> float:
    y, k = unpack_state(s)
    return 0.5 * y * y + 0.5 * (k - lp.c_p) ** 2


def lyapunov_rate(lp: LyapunovParams, p_plant: PlantParams, s) -> float:
    """dV_p/dt along the Lie-bracket system, in closed form."""
    y, _ = unpack_state(s)
    return -lp.p * y * y


def lyapunov_rate_from_gradient(lp: LyapunovParams, p_plant: PlantParams, s) -> float:
    y, k = unpack_state(s)
    d = lie_bracket_rhs(p_plant, (y, k))
    return y * d.dy + (k - lp.c_p) * d.dk


def lbs_limit_point(p: PlantParams, s0) -> State:
    """Where the Lie-bracket orbit from s0 comes to rest on the line y = 0."""
    y0, k0 = unpack_state(s0)
    if y0 == 0:
        raise PreconditionError("y0 = 0 is an equilibrium; the limit point is s0 itself")
    c0 = p.c0
    radius = math.hypot(y0, k0 - c0)
    return State(y=0.0, k=c0 + p.sign_b * radius)


class SweepPoint(BaseModel):
    omega: float
    error: float
    h: float
    samples: int
    diverged: bool = False


def approximation_sweep(
    p: PlantParams,
    s0,
    t_f: float,
    omegas: Iterable[float],
    t0: float = 0.0,
) -> list[SweepPoint]:
    """Sup-norm distance between the proposed closed loop and the Lie-bracket system per omega.

    The closed loop runs with Euler at 1/40 of a dither period; the reference
    runs with RK4 on a step that divides the closed-loop step and stays
    at or below LBS_MAX_STEP, so every closed-loop sample has a reference
    sample at the same time.
    """
    omegas = sorted(float(w) for w in omegas)
    if not omegas:
        raise PreconditionError("approximation_sweep needs at least one omega")
    points = []
    for omega in omegas:
        h = default_step(omega)
        if t_f == t0:
            points.append(SweepPoint(omega=omega, error=0.0, h=h, samples=1))
            continue
        h = min(h, t_f - t0)
        full = simulate(
            ClosedLoop(p, ControllerSpec(variant=ControllerVariant.PROPOSED, omega=omega)),
            s0, t0, t_f, h, Method.EULER,
            meta={"variant": "proposed", "omega": omega, "a": p.a, "b": p.b},
        )
        if full.failed:
            points.append(SweepPoint(omega=omega, error=math.inf, h=h, samples=len(full), diverged=True))
            continue
        substeps = max(1, math.ceil(h / LBS_MAX_STEP - 1e-12))
        reference = simulate(
            LieBracketSystem(p), s0, t0, t_f, h / substeps, Method.RK4,
            meta={"system": "lbs", "a": p.a, "b": p.b},
        )
        error = trajectory_distance(full, reference)
        points.append(SweepPoint(omega=omega, error=error, h=h, samples=len(full)))
        logger.info(f"Sweep omega={omega:g}: sup error {error:.6g} over {len(full)} samples")
    return points


def trajectory_distance(traj: Trajectory, reference: Trajectory) -> float:
    """Discrete sup norm of traj minus the reference sampled nearest to traj's times."""
    aligned = resample_nearest(reference.times, reference.states, traj.times)
    return float(np.max(np.linalg.norm(traj.states - aligned, axis=1)))


def is_strictly_decreasing(points: list[SweepPoint]) -> bool:
    errors = [pt.error for pt in points]
    return all(later < earlier for earlier, later in zip(errors, errors[1:]))


class NussbaumReport(BaseModel):
    k0: float
    k_max: float
    grid: int
    running_sup: float
    running_inf: float
    crossings: int
    doubled_sup: float
    doubled_inf: float
    sup_grows: bool
    inf_grows: bool
    is_nussbaum: bool


def _running_mean_integral(h: Callable, k0: float, k_max: float, grid: int):
    s = np.linspace(k0, k_max, grid)
    integrand = np.broadcast_to(np.asarray(h(s), dtype=float), s.shape) * s
    integral = cumulative_simpson(integrand, x=s, initial=0.0)
    mean = integral[1:] / (s[1:] - k0)
    signs = np.sign(mean)
    signs = signs[signs != 0]
    crossings = int(np.count_nonzero(signs[1:] != signs[:-1]))
    return float(mean.max()), float(mean.min()), crossings


def nussbaum_type_check(
    h: Callable,
    k0: float = 0.0,
    k_max: float = 50.0,
    grid: int = 10_000,
) -> NussbaumReport:
    """Numerical stand-in for sup/inf of (1/(k-k0)) * int_{k0}^k h(s) s ds being +inf/-inf.

    The extremes over (k0, k_max] are compared with those over a horizon
    twice as long; a Nussbaum-type function must swing both ways and both
    excursions must grow.
    """
    if not k_max > k0:
        raise PreconditionError(f"k_max must exceed k0, got k0={k0}, k_max={k_max}")
    if grid < 1000:
        raise PreconditionError(f"grid must have at least 1000 points, got {grid}")
    sup, inf, crossings = _running_mean_integral(h, k0, k_max, grid)
    doubled_sup, doubled_inf, _ = _running_mean_integral(h, k0, k0 + 2.0 * (k_max - k0), 2 * grid)
    sup_grows = doubled_sup > sup
    inf_grows = doubled_inf < inf
    return NussbaumReport(
        k0=k0,
        k_max=k_max,
        grid=grid,
        running_sup=sup,
        running_inf=inf,
        crossings=crossings,
        doubled_sup=doubled_sup,
        doubled_inf=doubled_inf,
        sup_grows=sup_grows,
        inf_grows=inf_grows,
        is_nussbaum=sup > 0 and inf < 0 and sup_grows and inf_grows,
    )


class ConvergenceReport(BaseModel):
    converged: bool
    y_final: float
    k_final: float
    band: float
    predicted_limit_k: Optional[float] = None
    time_to_band: Optional[float] = None
    radius_drift: Optional[float] = None


def convergence_report(traj: Trajectory, band: float, predicted: Optional[State] = None) -> ConvergenceReport:
    if len(traj) == 0:
        raise PreconditionError("convergence_report needs a nonempty trajectory")
    if not band > 0:
        raise PreconditionError(f"band must be positive, got {band}")
    y = np.abs(traj.y)
    tail = max(1, math.ceil(TAIL_FRACTION * len(traj)))
    converged = not traj.failed and bool(np.all(y[-tail:] <= band))

    outside = np.nonzero(y > band)[0]
    if outside.size == 0:
        time_to_band = float(traj.times[0])
    elif outside[-1] + 1 < len(traj):
        time_to_band = float(traj.times[outside[-1] + 1])
    else:
        time_to_band = None

    radius_drift = None
    if traj.meta.system == "lbs" and traj.meta.a is not None and traj.meta.b:
        c0 = traj.meta.a / traj.meta.b
        radius = np.hypot(traj.y, traj.k - c0)
        radius_drift = float(np.max(np.abs(radius - radius[0])))

    return ConvergenceReport(
        converged=converged,
        y_final=float(traj.y[-1]),
        k_final=float(traj.k[-1]),
        band=band,
        predicted_limit_k=None if predicted is None else predicted.k,
        time_to_band=time_to_band,
        radius_drift=radius_drift,
    )


if __name__ == "__main__":
    plant = PlantParams(a=10.0, b=-2.0)
    print(lbs_limit_point(plant, State(y=1.0, k=-5.0)))
    for point in approximation_sweep(plant, (1.0, 0.0), 0.5, [100.0, 400.0]):
        print(point)
    print(nussbaum_type_check(lambda s: s * np.cos(s)))
