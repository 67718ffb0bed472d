"""
Fixed-step integration (explicit Euler, classical RK4), the simulation
driver producing Trajectory records, and Chen-Fliess stepping.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Callable, Literal, NamedTuple, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict

from utils.chen_fliess_table import MAX_ORDER, terms_up_to
from utils.dynamics import PlantParams, PreconditionError, State, unpack_state

logger = logging.getLogger(__name__)

Rhs = Callable[[np.ndarray, float], np.ndarray]

CHEN_FLIESS_BOUND = 1e9
PERIOD_TOL = 1e-9


class Method(str, Enum):
    EULER = "euler"
    RK4 = "rk4"


class RunMeta(BaseModel):
    """Run descriptor written next to every trajectory."""

    model_config = ConfigDict(extra="forbid")

    system: Literal["closed_loop", "lbs", "chen_fliess"] = "closed_loop"
    variant: Optional[str] = None
    omega: Optional[float] = None
    h: float
    method: str
    a: Optional[float] = None
    b: Optional[float] = None
    y0: float
    k0: float
    t0: float
    tf: float
    order: Optional[int] = None
    periods_per_step: Optional[int] = None
    samples: int = 0
    status: Literal["ok", "diverged"] = "ok"
    failure_step: Optional[int] = None
    failure_reason: Optional[str] = None


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    meta: RunMeta
    inputs: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return len(self.times)

    @property
    def y(self) -> np.ndarray:
        return self.states[:, 0]

    @property
    def k(self) -> np.ndarray:
        return self.states[:, 1]

    @property
    def failed(self) -> bool:
        return self.meta.status != "ok"

    @property
    def final_state(self) -> State:
        return State.from_array(self.states[-1])


# Single steps

def euler_step(rhs: Rhs, s, t: float, h: float) -> np.ndarray:
    if not h > 0:
        raise PreconditionError(f"step size must be positive, got {h}")
    x = np.asarray(unpack_state(s), dtype=float)
    return x + h * np.asarray(rhs(x, t), dtype=float)


def rk4_step(rhs: Rhs, s, t: float, h: float) -> np.ndarray:
    if not h > 0:
        raise PreconditionError(f"step size must be positive, got {h}")
    x = np.asarray(unpack_state(s), dtype=float)
    k1 = np.asarray(rhs(x, t), dtype=float)
    k2 = np.asarray(rhs(x + 0.5 * h * k1, t + 0.5 * h), dtype=float)
    k3 = np.asarray(rhs(x + 0.5 * h * k2, t + 0.5 * h), dtype=float)
    k4 = np.asarray(rhs(x + h * k3, t + h), dtype=float)
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


STEPPERS = {
    Method.EULER: euler_step,
    Method.RK4: rk4_step,
}


def time_grid(t0: float, t_f: float, h: float) -> tuple[np.ndarray, int]:
    """Sample times t0 + n*h plus t_f when the span is not a whole number of steps.

    Returns the grid and the number of full steps.
    """
    if not h > 0:
        raise PreconditionError(f"step size must be positive, got {h}")
    if t_f < t0:
        raise PreconditionError(f"final time {t_f} precedes start time {t0}")
    span = t_f - t0
    if span == 0.0:
        return np.array([t0]), 0
    if h > span * (1.0 + 1e-12):
        raise PreconditionError(f"step {h} exceeds the horizon {span}")
    ratio = span / h
    nearest = round(ratio)
    full = nearest if abs(ratio - nearest) <= 1e-9 * max(1.0, ratio) else math.floor(ratio)
    times = t0 + h * np.arange(full + 1)
    if full == nearest:
        times[-1] = t_f
    else:
        times = np.append(times, t_f)
    return times, full


def simulate(
    rhs: Rhs,
    s0,
    t0: float,
    t_f: float,
    h: float,
    method: Method = Method.EULER,
    meta: Optional[dict] = None,
    bound: float = math.inf,
) -> Trajectory:
    """Integrate ``rhs`` on a fixed grid from t0 to t_f.

    A non-finite state (or one leaving ``bound``) ends the run: the samples
    so far are kept and the meta is marked diverged with the step index.
    When ``rhs`` exposes ``control(x, t)`` returning a number, the input at
    every sample is recorded as well.
    """
    method = Method(method)
    step = STEPPERS[method]
    times, full = time_grid(t0, t_f, h)
    x = np.asarray(unpack_state(s0), dtype=float)
    states = np.empty((len(times), x.shape[0]))
    states[0] = x

    record = {
        "h": h, "method": method.value, "y0": float(x[0]), "k0": float(x[1]),
        "t0": t0, "tf": t_f, **(meta or {}),
    }
    count = len(times)
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(1, len(times)):
            dt = h if i <= full else t_f - times[i - 1]
            x = step(rhs, x, times[i - 1], dt)
            if not np.all(np.isfinite(x)) or np.max(np.abs(x)) > bound:
                reason = "non-finite state" if not np.all(np.isfinite(x)) else f"state norm above {bound:g}"
                logger.warning(f"Integration diverged at step {i} (t={times[i]:.6g}): {reason}")
                record.update(status="diverged", failure_step=i, failure_reason=reason)
                count = i
                break
            states[i] = x

    times, states = times[:count], states[:count]
    with np.errstate(over="ignore", invalid="ignore"):
        inputs = _record_inputs(rhs, times, states)
    trajectory = Trajectory(times=times, states=states, meta=RunMeta(samples=count, **record), inputs=inputs)
    logger.info(
        f"Simulated {record.get('system', 'closed_loop')}/{record.get('variant')} "
        f"with {method.value} h={h:.6g}: {count} samples, status={trajectory.meta.status}"
    )
    return trajectory


def _record_inputs(rhs, times: np.ndarray, states: np.ndarray) -> Optional[np.ndarray]:
    control = getattr(rhs, "control", None)
    if control is None or getattr(rhs, "is_averaged", False):
        return None
    return np.array([control(x, t) for x, t in zip(states, times)], dtype=float)


def resample_nearest(source_times: np.ndarray, values: np.ndarray, target_times: np.ndarray) -> np.ndarray:
    """Pick, for each target time, the source sample closest in time (ties go to the earlier one)."""
    source_times = np.asarray(source_times)
    target_times = np.asarray(target_times)
    right = np.clip(np.searchsorted(source_times, target_times, side="left"), 0, len(source_times) - 1)
    left = np.clip(right - 1, 0, len(source_times) - 1)
    take_left = np.abs(target_times - source_times[left]) <= np.abs(source_times[right] - target_times)
    return np.asarray(values)[np.where(take_left, left, right)]


# Chen-Fliess stepping

class _Stencil(NamedTuple):
    weights: np.ndarray
    p_b: np.ndarray
    p_y: np.ndarray
    p_r: np.ndarray
    is_y: np.ndarray


@lru_cache(maxsize=64)
def _stencil(order: int, T: float, periods: int) -> _Stencil:
    """Flatten the table up to ``order`` into weight and exponent arrays for a step T."""
    base = 2.0 * math.pi * periods
    rows = []
    for term in terms_up_to(order):
        for monomials, is_y in ((term.coeff_y, True), (term.coeff_k, False)):
            for m in monomials:
                weight = float(m.c) * T ** float(m.p_T) * base ** float(m.p_2pi)
                rows.append((weight, m.p_b, m.p_y, m.p_r, is_y))
    weights, p_b, p_y, p_r, is_y = (np.array(column) for column in zip(*rows))
    return _Stencil(weights.astype(float), p_b, p_y, p_r, is_y.astype(bool))


def whole_periods(T: float, omega: float) -> int:
    """Number of dither periods in T; raises unless T spans a whole number of them."""
    if not omega > 0 or not T > 0:
        raise PreconditionError(f"T and omega must be positive, got T={T}, omega={omega}")
    periods = T * omega / (2.0 * math.pi)
    nearest = round(periods)
    if nearest < 1 or abs(periods - nearest) > PERIOD_TOL * max(1.0, periods):
        raise PreconditionError(
            f"T={T} is {periods:.6g} dither periods; Chen-Fliess steps must span a whole number of periods"
        )
    return nearest


def chen_fliess_step(p: PlantParams, s0, T: float, order: int, omega: float) -> np.ndarray:
    """One step of the order-``order`` Chen-Fliess truncation over T = 2*pi*n/omega."""
    if not 0 <= order <= MAX_ORDER:
        raise PreconditionError(f"order must be within 0..{MAX_ORDER}, got {order}")
    periods = whole_periods(T, omega)
    stencil = _stencil(order, T, periods)
    y0, k0 = (float(v) for v in unpack_state(s0))
    r = p.a - p.b * k0
    terms = stencil.weights * p.b ** stencil.p_b * y0 ** stencil.p_y * r ** stencil.p_r
    return np.array((y0 + terms[stencil.is_y].sum(), k0 + terms[~stencil.is_y].sum()))


def chen_fliess_simulate(
    p: PlantParams,
    s0,
    omega: float,
    periods_per_step: int,
    n_steps: int,
    order: int,
    t0: float = 0.0,
    bound: float = CHEN_FLIESS_BOUND,
) -> Trajectory:
    """Iterate chen_fliess_step; each step restarts the closed forms at a period boundary."""
    if periods_per_step < 1 or n_steps < 0:
        raise PreconditionError(
            f"need periods_per_step >= 1 and n_steps >= 0, got {periods_per_step}, {n_steps}"
        )
    T = 2.0 * math.pi * periods_per_step / omega
    x = np.asarray(unpack_state(s0), dtype=float)
    times = t0 + T * np.arange(n_steps + 1)
    states = np.empty((n_steps + 1, 2))
    states[0] = x
    record = {
        "system": "chen_fliess", "variant": "proposed", "omega": omega, "h": T,
        "method": f"chen-fliess-d{order}", "a": p.a, "b": p.b, "y0": float(x[0]), "k0": float(x[1]),
        "t0": t0, "tf": float(times[-1]), "order": order, "periods_per_step": periods_per_step,
    }
    count = n_steps + 1
    for i in range(1, n_steps + 1):
        x = chen_fliess_step(p, x, T, order, omega)
        if not np.all(np.isfinite(x)) or np.linalg.norm(x) > bound:
            logger.warning(f"Chen-Fliess order {order} diverged at step {i}")
            record.update(status="diverged", failure_step=i, failure_reason=f"state norm above {bound:g}")
            count = i
            break
        states[i] = x
    return Trajectory(times=times[:count], states=states[:count], meta=RunMeta(samples=count, **record))


if __name__ == "__main__":
    from utils.dynamics import ClosedLoop, ControllerSpec

    plant = PlantParams(a=10.0, b=-2.0)
    loop = ClosedLoop(plant, ControllerSpec(omega=400.0))
    run = simulate(loop, (1.0, 0.0), 0.0, 3.0, 2.0 * math.pi / (40.0 * 400.0), meta={"variant": "proposed"})
    print(run.meta.model_dump())
    print("final state:", run.final_state)
    print(chen_fliess_simulate(plant, (1.0, 0.0), 400.0, 1, 5, 2).states)
