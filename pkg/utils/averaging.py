"""
Lie brackets, gamma coefficients and the averaged (Lie-bracket) system of a
control-affine system with periodic dithers

    dx/dt = f0(x, t) + sum_i omega**p_i * f_i(x, t) * u_i(k_i * omega * t)

Fields are callables ``f(x, t)`` that accept a state of shape (n,) or a batch
of shape (n, N) and return an array of the same shape. Jacobians are central
finite differences, so user-supplied fields need no derivative code.
"""

from __future__ import annotations

import logging
import math
from fractions import Fraction
from itertools import combinations, product
from typing import Callable, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from scipy.integrate import cumulative_simpson, simpson

from utils.dynamics import PlantParams, PreconditionError

logger = logging.getLogger(__name__)

VectorField = Callable[[np.ndarray, float], np.ndarray]

FD_REL_STEP = 1e-6
# Outer step for derivatives of Lie derivatives; the inner FD noise would
# dominate a 1e-6 step.
FD_NESTED_REL_STEP = 1e-4
PANELS_PER_PERIOD = 4096
GAMMA_TOL = 1e-8
DITHER_GRID = 10_000
BOUND_TOL = 1e-9
PERIOD_TOL = 1e-12
MEAN_TOL = 1e-9
VANISH_TOL = 1e-9


class QuadratureError(RuntimeError):
    """Raised when a quadrature error estimate exceeds its tolerance."""


class AssumptionError(ValueError):
    """Raised when a dither violates the boundedness, period or zero-mean check."""


class DitherSignal(BaseModel):
    """A 2*pi-periodic probing signal u(k * omega * t) scaled by omega**p."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    fn: Callable[[np.ndarray], np.ndarray]
    multiplier: Fraction = Fraction(1)
    exponent: float = Field(0.5, gt=0.0, lt=1.0)
    name: str = "custom"

    @field_validator("multiplier", mode="before")
    @classmethod
    def _to_fraction(cls, value) -> Fraction:
        value = Fraction(value)
        if value <= 0:
            raise ValueError("frequency multiplier must be positive")
        return value

    def __call__(self, phase):
        return self.fn(phase)


def _biased_sin(phase):
    return np.sin(phase) + 0.5


DITHERS: dict[str, Callable] = {
    "sin": np.sin,
    "cos": np.cos,
    "biased_sin": _biased_sin,
}


def make_dither(name: str, multiplier=1, exponent: float = 0.5) -> DitherSignal:
    if name not in DITHERS:
        raise ValueError(f"unknown dither '{name}', expected one of {sorted(DITHERS)}")
    return DitherSignal(fn=DITHERS[name], multiplier=multiplier, exponent=exponent, name=name)


def _default_dithers() -> list[DitherSignal]:
    return [make_dither("sin"), make_dither("cos")]


class AffineSystem(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    drift: Callable
    fields: list[Callable]
    dithers: list[DitherSignal]
    name: str = "custom"

    @model_validator(mode="after")
    def _check_counts(self) -> "AffineSystem":
        if len(self.fields) < 1:
            raise ValueError("at least one controlled field is required")
        if len(self.fields) != len(self.dithers):
            raise ValueError(
                f"{len(self.fields)} fields but {len(self.dithers)} dithers; counts must match"
            )
        return self

    @property
    def all_fields(self) -> list[Callable]:
        return [self.drift, *self.fields]


def proposed_affine_system(plant: PlantParams, dithers: Optional[list[DitherSignal]] = None) -> AffineSystem:
    """Proposed controller written as drift + two dithered fields (sin, cos by default)."""
    a, b = plant.a, plant.b

    def f0(x, t):
        return np.stack(((a - b * x[1]) * x[0], np.zeros_like(x[0])))

    def f1(x, t):
        return np.stack((-b * x[0], np.zeros_like(x[0])))

    def f2(x, t):
        return np.stack((np.zeros_like(x[0]), x[0] * x[0]))

    return AffineSystem(
        drift=f0, fields=[f1, f2], dithers=dithers or _default_dithers(), name="proposed"
    )


def swapped_affine_system(plant: PlantParams, dithers: Optional[list[DitherSignal]] = None) -> AffineSystem:
    """Swapped design: the quadratic term moves from the gain update into u."""
    a, b = plant.a, plant.b

    def f0(x, t):
        return np.stack(((a - b * x[1]) * x[0], np.zeros_like(x[0])))

    def f1(x, t):
        return np.stack((-2.0 * b * x[0] * x[0], np.zeros_like(x[0])))

    def f2(x, t):
        return np.stack((np.zeros_like(x[0]), x[0] * 1.0))

    return AffineSystem(
        drift=f0, fields=[f1, f2], dithers=dithers or _default_dithers(), name="swapped"
    )


# Differential operators

def jacobian(field: VectorField, x, t: float, rel_step: float = FD_REL_STEP) -> np.ndarray:
    """Central-difference Jacobian, shape (n_out, n, *batch)."""
    x = np.asarray(x, dtype=float)
    step = rel_step * (1.0 + np.linalg.norm(x, axis=0))
    columns = []
    for j in range(x.shape[0]):
        e = np.zeros_like(x)
        e[j] = step
        forward = np.asarray(field(x + e, t), dtype=float)
        backward = np.asarray(field(x - e, t), dtype=float)
        columns.append((forward - backward) / (2.0 * step))
    return np.stack(columns, axis=1)


def time_derivative(field: VectorField, x, t: float, rel_step: float = FD_REL_STEP) -> np.ndarray:
    dt = rel_step * (1.0 + abs(t))
    x = np.asarray(x, dtype=float)
    return (np.asarray(field(x, t + dt)) - np.asarray(field(x, t - dt))) / (2.0 * dt)


def _apply(J: np.ndarray, v: np.ndarray) -> np.ndarray:
    return np.einsum("ij...,j...->i...", J, v)


def lie_derivative(f: VectorField, g: VectorField, x, t: float, rel_step: float = FD_REL_STEP) -> np.ndarray:
    """Derivative of g along f: (dg/dx) f."""
    x = np.asarray(x, dtype=float)
    return _apply(jacobian(g, x, t, rel_step), np.asarray(f(x, t), dtype=float))


def lie_bracket(fi: VectorField, fj: VectorField, x, t: float = 0.0, rel_step: float = FD_REL_STEP) -> np.ndarray:
    """[fi, fj] = (dfj/dx) fi - (dfi/dx) fj."""
    return lie_derivative(fi, fj, x, t, rel_step) - lie_derivative(fj, fi, x, t, rel_step)


def _spectral_norm(J: np.ndarray) -> np.ndarray:
    """Largest singular value of each (n_out, n) slice of a batched Jacobian."""
    return np.linalg.norm(np.moveaxis(J, (0, 1), (-2, -1)), ord=2, axis=(-2, -1))


# Gamma coefficients

def common_period_multiple(ki: Fraction, kj: Fraction) -> Fraction:
    """LCM(1/ki, 1/kj) computed exactly: lcm of numerators over gcd of denominators."""
    ri, rj = 1 / Fraction(ki), 1 / Fraction(kj)
    return Fraction(
        math.lcm(ri.numerator, rj.numerator), math.gcd(ri.denominator, rj.denominator)
    )


def common_period(ui: DitherSignal, uj: DitherSignal, omega: float) -> float:
    return 2.0 * math.pi / omega * float(common_period_multiple(ui.multiplier, uj.multiplier))


def _iterated_integral(ui, uj, omega: float, period: float, panels: int) -> float:
    theta = np.linspace(0.0, period, panels + 1)
    inner = cumulative_simpson(ui(float(ui.multiplier) * omega * theta), x=theta, initial=0.0)
    return float(simpson(uj(float(uj.multiplier) * omega * theta) * inner, x=theta))


def gamma_coefficient(
    ui: DitherSignal,
    uj: DitherSignal,
    omega: float = 1.0,
    panels: int = PANELS_PER_PERIOD,
    tol: float = GAMMA_TOL,
) -> float:
    """(omega**(pi+pj) / T) * int_0^T uj(kj w th) int_0^th ui(ki w s) ds dth.

    The estimate is compared against the same rule on half the panels; a
    disagreement above ``tol`` raises QuadratureError.
    """
    if not omega > 0:
        raise PreconditionError(f"omega must be positive, got {omega}")
    multiple = common_period_multiple(ui.multiplier, uj.multiplier)
    period = 2.0 * math.pi / omega * float(multiple)
    # panels per period of the faster dither
    fastest = max(ui.multiplier, uj.multiplier)
    n = panels * max(1, math.ceil(multiple * fastest))
    n += n % 2
    fine = _iterated_integral(ui, uj, omega, period, n)
    coarse = _iterated_integral(ui, uj, omega, period, n // 2)
    scale = omega ** (ui.exponent + uj.exponent) / period
    gamma = scale * fine
    error = scale * abs(fine - coarse)
    if error > tol * max(1.0, abs(gamma)):
        raise QuadratureError(
            f"gamma({ui.name}, {uj.name}) at omega={omega}: error estimate {error:.3e} exceeds {tol:.1e}"
        )
    return gamma


def _bracket_pairs(sys: AffineSystem) -> list[tuple[int, int]]:
    """Index pairs (1-based, i < j) whose brackets survive the omega limit."""
    pairs = []
    for i, j in combinations(range(1, len(sys.fields) + 1), 2):
        total = sys.dithers[i - 1].exponent + sys.dithers[j - 1].exponent
        if abs(total - 1.0) <= 1e-12:
            pairs.append((i, j))
    return pairs


# Assumption checks

class Box(BaseModel):
    """Axis-aligned region lower <= x <= upper."""

    model_config = ConfigDict(frozen=True)

    lower: list[float]
    upper: list[float]

    @model_validator(mode="after")
    def _non_degenerate(self) -> "Box":
        if len(self.lower) != len(self.upper):
            raise ValueError("lower and upper corners differ in dimension")
        if any(lo >= hi for lo, hi in zip(self.lower, self.upper)):
            raise ValueError(f"degenerate box {self.lower} .. {self.upper}")
        return self

    @classmethod
    def square(cls, half_width: float) -> "Box":
        return cls(lower=[-half_width, -half_width], upper=[half_width, half_width])

    def grid(self, points: int) -> np.ndarray:
        axes = [np.linspace(lo, hi, points) for lo, hi in zip(self.lower, self.upper)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh])


class AssumptionCheck(BaseModel):
    assumption: str
    subject: str
    passed: bool
    value: Optional[float] = None
    witness: Optional[list[float]] = None
    vacuous: bool = False


class AssumptionReport(BaseModel):
    system: str
    box: Box
    bound_M: float
    bound_M_witness: list[float]
    checks: list[AssumptionCheck]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failures(self) -> list[AssumptionCheck]:
        return [c for c in self.checks if not c.passed]

    def find(self, assumption: str) -> list[AssumptionCheck]:
        return [c for c in self.checks if c.assumption == assumption]


def check_dither(u: DitherSignal, label: str) -> list[AssumptionCheck]:
    """Boundedness, 2*pi-periodicity and zero mean of a single dither."""
    phase = np.linspace(0.0, 2.0 * math.pi, DITHER_GRID, endpoint=False)
    values = np.asarray(u(phase), dtype=float) * np.ones_like(phase)
    peak_at = int(np.argmax(np.abs(values)))
    sup = float(np.abs(values[peak_at]))

    shifted = np.asarray(u(phase + 2.0 * math.pi), dtype=float) * np.ones_like(phase)
    gaps = np.abs(values - shifted)
    gap_at = int(np.argmax(gaps))

    quad_phase = np.linspace(0.0, 2.0 * math.pi, PANELS_PER_PERIOD + 1)
    quad_values = np.asarray(u(quad_phase), dtype=float) * np.ones_like(quad_phase)
    mean = float(simpson(quad_values, x=quad_phase)) / (2.0 * math.pi)

    return [
        AssumptionCheck(
            assumption="A1.1", subject=label, passed=sup <= 1.0 + BOUND_TOL,
            value=sup, witness=[float(phase[peak_at])],
        ),
        AssumptionCheck(
            assumption="A1.2", subject=label, passed=float(gaps[gap_at]) <= PERIOD_TOL,
            value=float(gaps[gap_at]), witness=[float(phase[gap_at])],
        ),
        AssumptionCheck(
            assumption="A1.3", subject=label, passed=abs(mean) <= MEAN_TOL, value=mean,
        ),
    ]


def _dither_checks(sys: AffineSystem) -> list[AssumptionCheck]:
    checks = []
    for index, u in enumerate(sys.dithers, start=1):
        checks.extend(check_dither(u, f"u{index}:{u.name}"))
    return checks


def _track_max(best: tuple[float, Optional[np.ndarray]], norms: np.ndarray, X: np.ndarray, t: float):
    norms = np.where(np.isfinite(norms), norms, np.inf)
    at = int(np.argmax(norms))
    if norms[at] > best[0]:
        return float(norms[at]), np.append(X[:, at], t)
    return best


def _estimate_bound(sys: AffineSystem, X: np.ndarray, times: np.ndarray):
    """Grid maximum of the five boundedness norms; returns (M, witness, field scale)."""
    best: tuple[float, Optional[np.ndarray]] = (0.0, None)
    scale = 0.0
    fields = sys.all_fields
    for t in times:
        for f in fields:
            values = np.asarray(f(X, t), dtype=float)
            field_norm = np.linalg.norm(values, axis=0)
            scale = max(scale, float(np.max(field_norm)))
            best = _track_max(best, field_norm, X, t)
            best = _track_max(best, np.linalg.norm(time_derivative(f, X, t), axis=0), X, t)
            best = _track_max(best, _spectral_norm(jacobian(f, X, t)), X, t)
            for g in sys.fields:
                derivative = _lie_derivative_field(f, g)
                best = _track_max(
                    best, np.linalg.norm(time_derivative(derivative, X, t, FD_NESTED_REL_STEP), axis=0), X, t
                )
                best = _track_max(
                    best, _spectral_norm(jacobian(derivative, X, t, FD_NESTED_REL_STEP)), X, t
                )
    return best[0], best[1], scale


def _lie_derivative_field(f: VectorField, g: VectorField) -> VectorField:
    return lambda x, t: lie_derivative(f, g, x, t)


def _pair_checks(sys: AffineSystem, X: np.ndarray, times: np.ndarray, scale: float) -> list[AssumptionCheck]:
    checks = []
    tolerance = VANISH_TOL * (1.0 + scale)
    count = len(sys.fields)
    for i, j in combinations(range(1, count + 1), 2):
        ui, uj = sys.dithers[i - 1], sys.dithers[j - 1]
        if ui.exponent + uj.exponent <= 1.0 + 1e-12:
            continue
        period = common_period(ui, uj, 1.0)
        integral = abs(_iterated_integral(ui, uj, 1.0, period, PANELS_PER_PERIOD))
        if integral <= VANISH_TOL:
            checks.append(AssumptionCheck(assumption="A3.1", subject=f"f{i},f{j}", passed=True, value=integral))
            continue
        worst, witness = _grid_max(lambda x, t: lie_bracket(sys.fields[i - 1], sys.fields[j - 1], x, t), X, times)
        checks.append(
            AssumptionCheck(
                assumption="A3.1", subject=f"f{i},f{j}", passed=worst <= tolerance,
                value=worst, witness=witness if worst > tolerance else None,
            )
        )
    if not checks:
        checks.append(AssumptionCheck(assumption="A3.1", subject="all pairs", passed=True, vacuous=True))

    triples = []
    for i, j, m in product(range(1, count + 1), repeat=3):
        total = sum(sys.dithers[q - 1].exponent for q in (i, j, m))
        if total < 2.0 - 1e-12:
            continue
        fi, fj, fm = sys.fields[i - 1], sys.fields[j - 1], sys.fields[m - 1]
        inner = _lie_derivative_field(fm, fj)
        worst, witness = _grid_max(lambda x, t: lie_derivative(inner, fi, x, t), X, times)
        triples.append(
            AssumptionCheck(
                assumption="A3.2", subject=f"f{i},f{j},f{m}", passed=worst <= tolerance,
                value=worst, witness=witness if worst > tolerance else None,
            )
        )
    if not triples:
        triples.append(AssumptionCheck(assumption="A3.2", subject="all triples", passed=True, vacuous=True))
    return checks + triples


def _grid_max(field: VectorField, X: np.ndarray, times: np.ndarray) -> tuple[float, Optional[list[float]]]:
    best: tuple[float, Optional[np.ndarray]] = (0.0, None)
    for t in times:
        best = _track_max(best, np.linalg.norm(np.asarray(field(X, t)), axis=0), X, t)
    return best[0], None if best[1] is None else best[1].tolist()


def check_assumptions(
    sys: AffineSystem,
    region: Box,
    grid: int = 50,
    time_samples: int = 20,
) -> AssumptionReport:
    """Sample the dither, boundedness and vanishing-bracket assumptions on a box.

    The bound M is the grid maximum over the box and ``time_samples`` times in
    [0, 2*pi) of |f_i|, |df_i/dt|, |df_i/dx| and the time and state
    derivatives of the Lie derivatives L_{f_i} f_j, for i = 0..l and j = 1..l.
    """
    X = region.grid(grid)
    times = np.linspace(0.0, 2.0 * math.pi, time_samples, endpoint=False)
    checks = _dither_checks(sys)

    bound, witness, scale = _estimate_bound(sys, X, times)
    checks.append(
        AssumptionCheck(
            assumption="A2", subject="M", passed=bool(np.isfinite(bound)), value=bound,
            witness=None if witness is None else witness.tolist(),
        )
    )
    checks.extend(_pair_checks(sys, X, times, scale))

    report = AssumptionReport(
        system=sys.name,
        box=region,
        bound_M=bound,
        bound_M_witness=[] if witness is None else witness.tolist(),
        checks=checks,
    )
    for failed in report.failures:
        logger.warning(
            f"Assumption {failed.assumption} failed for {failed.subject}: value={failed.value}, witness={failed.witness}"
        )
    logger.info(f"Checked assumptions for '{sys.name}' on {region.lower}..{region.upper}: M={bound:.6g}")
    return report


def build_averaged_rhs(sys: AffineSystem, omega: float = 1.0) -> VectorField:
    """Return x, t -> f0(x, t) + sum_{i<j} [f_i, f_j](x, t) * gamma_ij.

    Only pairs with p_i + p_j = 1 contribute; their gamma does not depend on
    omega. The dither checks run first and raise AssumptionError on failure.
    The state-space checks are left to check_assumptions.
    """
    failed = [c for c in _dither_checks(sys) if not c.passed]
    if failed:
        details = ", ".join(f"{c.assumption} ({c.subject}, value={c.value})" for c in failed)
        raise AssumptionError(f"dither assumptions violated: {details}")

    terms = []
    for i, j in _bracket_pairs(sys):
        gamma = gamma_coefficient(sys.dithers[i - 1], sys.dithers[j - 1], omega)
        logger.debug(f"gamma_{i}{j} = {gamma:.12g}")
        terms.append((sys.fields[i - 1], sys.fields[j - 1], gamma))

    def averaged(x, t: float = 0.0) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.asarray(sys.drift(x, t), dtype=float)
        for fi, fj, gamma in terms:
            out = out + gamma * lie_bracket(fi, fj, x, t)
        return out

    return averaged


if __name__ == "__main__":
    plant = PlantParams(a=10.0, b=-2.0)
    system = proposed_affine_system(plant)
    print("gamma(sin, cos) =", gamma_coefficient(make_dither("sin"), make_dither("cos")))
    print("averaged at (1, 0):", build_averaged_rhs(system)(np.array([1.0, 0.0])))
    report = check_assumptions(system, Box.square(2.0))
    print("passed:", report.passed, "M =", report.bound_M)
