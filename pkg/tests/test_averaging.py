"""
Lie brackets, gamma coefficients, assumption sampling and the averaged system.
"""

import math
from fractions import Fraction

import numpy as np
import pytest

from utils.averaging import (
    AffineSystem,
    AssumptionError,
    Box,
    DitherSignal,
    build_averaged_rhs,
    check_assumptions,
    check_dither,
    common_period_multiple,
    gamma_coefficient,
    jacobian,
    lie_bracket,
    make_dither,
    proposed_affine_system,
    swapped_affine_system,
)
from utils.dynamics import PlantParams, PreconditionError, lie_bracket_rhs


def _f1(b):
    return lambda x, t: np.stack((-b * x[0], np.zeros_like(x[0])))


def _f2(x, t):
    return np.stack((np.zeros_like(x[0]), x[0] * x[0]))


def test_lie_bracket_of_proposed_fields():
    """[f1, f2] = (0, -2*b*y**2): with b = -2 at (3, 7) this is (0, 36)."""
    value = lie_bracket(_f1(-2.0), _f2, np.array([3.0, 7.0]))
    np.testing.assert_allclose(value, [0.0, 36.0], atol=1e-6)


def test_lie_bracket_is_antisymmetric(rng):
    f1 = _f1(1.5)
    for x in rng.uniform(-3.0, 3.0, size=(10, 2)):
        np.testing.assert_allclose(lie_bracket(f1, _f2, x), -lie_bracket(_f2, f1, x), atol=1e-6)
        np.testing.assert_allclose(lie_bracket(f1, f1, x), [0.0, 0.0], atol=1e-8)


@pytest.mark.parametrize("alpha", [2.0, -3.0])
def test_lie_bracket_is_bilinear_in_scaling(rng, alpha):
    f1 = _f1(1.5)

    def scaled(field):
        return lambda x, t: alpha * field(x, t)

    for x in rng.uniform(-3.0, 3.0, size=(10, 2)):
        expected = alpha * lie_bracket(f1, _f2, x)
        np.testing.assert_allclose(lie_bracket(scaled(f1), _f2, x), expected, rtol=1e-5, atol=1e-5)
        np.testing.assert_allclose(lie_bracket(f1, scaled(_f2), x), expected, rtol=1e-5, atol=1e-5)


def test_jacobian_batched_shape():
    X = np.array([[1.0, 2.0, 3.0], [0.0, 1.0, -1.0]])
    J = jacobian(_f2, X, 0.0)
    assert J.shape == (2, 2, 3)
    np.testing.assert_allclose(J[1, 0], 2.0 * X[0], rtol=1e-8)
    np.testing.assert_allclose(J[0], 0.0, atol=1e-12)


@pytest.mark.parametrize("omega", [1.0, 400.0])
def test_gamma_coefficients(omega):
    sin, cos = make_dither("sin"), make_dither("cos")
    assert gamma_coefficient(sin, cos, omega) == pytest.approx(-0.5, abs=1e-8)
    assert gamma_coefficient(cos, sin, omega) == pytest.approx(0.5, abs=1e-8)
    assert gamma_coefficient(sin, sin, omega) == pytest.approx(0.0, abs=1e-8)


def test_gamma_over_common_period_of_faster_dithers():
    """sin(2*th), cos(2*th): common period pi, gamma = -1/4."""
    sin2 = make_dither("sin", multiplier=2)
    cos2 = make_dither("cos", multiplier=2)
    assert gamma_coefficient(sin2, cos2) == pytest.approx(-0.25, abs=1e-8)


def test_gamma_rejects_non_positive_omega():
    with pytest.raises(PreconditionError):
        gamma_coefficient(make_dither("sin"), make_dither("cos"), 0.0)


def test_common_period_multiple_is_exact():
    assert common_period_multiple(Fraction(1), Fraction(2)) == 1
    assert common_period_multiple(Fraction(2), Fraction(3)) == 1
    assert common_period_multiple(Fraction(1, 2), Fraction(1, 3)) == 6
    assert common_period_multiple(Fraction(2), Fraction(2)) == Fraction(1, 2)


def test_dither_signal_validation():
    with pytest.raises(ValueError):
        make_dither("triangle")
    with pytest.raises(ValueError):
        DitherSignal(fn=np.sin, exponent=1.0)
    with pytest.raises(ValueError):
        DitherSignal(fn=np.sin, multiplier=0)


def test_affine_system_requires_matching_counts():
    with pytest.raises(ValueError):
        AffineSystem(drift=_f2, fields=[_f2, _f2], dithers=[make_dither("sin")])
    with pytest.raises(ValueError):
        AffineSystem(drift=_f2, fields=[], dithers=[])


def test_averaged_rhs_reproduces_lie_bracket_system(plant, rng):
    averaged = build_averaged_rhs(proposed_affine_system(plant))
    for x in rng.uniform(-5.0, 5.0, size=(100, 2)):
        expected = lie_bracket_rhs(plant, x)
        np.testing.assert_allclose(averaged(x), [expected.dy, expected.dk], rtol=1e-5, atol=1e-6)


def test_swapped_design_has_the_same_averaged_system(plant, rng):
    averaged = build_averaged_rhs(swapped_affine_system(plant))
    for x in rng.uniform(-5.0, 5.0, size=(100, 2)):
        expected = lie_bracket_rhs(plant, x)
        np.testing.assert_allclose(averaged(x), [expected.dy, expected.dk], rtol=1e-5, atol=1e-6)


def test_small_exponents_leave_only_drift(plant):
    dithers = [make_dither("sin", exponent=0.3), make_dither("cos", exponent=0.3)]
    system = proposed_affine_system(plant, dithers)
    averaged = build_averaged_rhs(system)
    x = np.array([1.0, 2.0])
    np.testing.assert_allclose(averaged(x), system.drift(x, 0.0))


def test_biased_dither_is_rejected(plant):
    checks = {c.assumption: c for c in check_dither(make_dither("biased_sin"), "u1")}
    assert not checks["A1.3"].passed
    assert checks["A1.3"].value == pytest.approx(0.5, abs=1e-9)
    assert not checks["A1.1"].passed
    assert checks["A1.2"].passed

    system = proposed_affine_system(plant, [make_dither("biased_sin"), make_dither("cos")])
    with pytest.raises(AssumptionError):
        build_averaged_rhs(system)


def test_standard_dithers_pass():
    for name in ("sin", "cos"):
        assert all(c.passed for c in check_dither(make_dither(name), name))


def test_proposed_design_passes_with_bound():
    plant = PlantParams(a=10.0, b=-2.0)
    report = check_assumptions(proposed_affine_system(plant), Box.square(2.0), grid=21, time_samples=4)
    assert report.passed, f"unexpected failures: {report.failures}"
    # sup of the state Jacobian of L_{f0} f2 at the corner (2, 2)
    assert report.bound_M == pytest.approx(80.0 * math.sqrt(2.0), rel=1e-5)
    assert [abs(v) for v in report.bound_M_witness[:2]] == pytest.approx([2.0, 2.0])
    assert all(c.vacuous for c in report.find("A3.1") + report.find("A3.2"))


def test_nonvanishing_bracket_fails_for_large_exponents(plant):
    dithers = [make_dither("sin", exponent=0.6), make_dither("cos", exponent=0.6)]
    report = check_assumptions(proposed_affine_system(plant, dithers), Box.square(1.0), grid=11, time_samples=2)
    pair = report.find("A3.1")
    assert len(pair) == 1 and not pair[0].passed
    assert pair[0].witness is not None
    assert not report.passed


def test_box_validation():
    with pytest.raises(ValueError):
        Box(lower=[0.0, 1.0], upper=[0.0, 2.0])
    assert Box.square(1.0).grid(3).shape == (2, 9)
