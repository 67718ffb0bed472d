"""
Closed-loop right-hand sides, the Lie-bracket system and the polar forms.
"""

import math

import numpy as np
import pytest
from pydantic import ValidationError

from utils.dynamics import (
    ClosedLoop,
    ControllerSpec,
    ControllerVariant,
    LieBracketSystem,
    PlantParams,
    PolarState,
    PreconditionError,
    State,
    from_polar,
    lie_bracket_rhs,
    nussbaum_rhs,
    polar_closed_loop_rhs,
    polar_lbs_rhs,
    polar_to_cartesian_rate,
    proposed_control,
    proposed_rhs,
    s_cos_s,
    swapped_rhs,
    to_polar,
    willems_byrnes_rhs,
)
from utils.integrate import Method, simulate


def test_plant_rejects_zero_gain():
    with pytest.raises(ValidationError):
        PlantParams(a=1.0, b=0.0)


def test_plant_rejects_unknown_fields():
    with pytest.raises(ValidationError):
        PlantParams(a=1.0, b=1.0, c=2.0)


def test_state_rejects_non_finite():
    with pytest.raises(ValidationError):
        State(y=float("nan"), k=0.0)


def test_proposed_rhs_vanishes_at_y_zero(plant):
    d = proposed_rhs(plant, State(y=0.0, k=3.0), 1.7, 400.0)
    assert d.dy == 0.0 and d.dk == 0.0


def test_proposed_rhs_at_phase_zero(unit_plant):
    """sin 0 = 0, cos 0 = 1, sqrt(4) = 2."""
    d = proposed_rhs(unit_plant, State(y=1.0, k=0.0), 0.0, 4.0)
    assert d.dy == pytest.approx(1.0)
    assert d.dk == pytest.approx(2.0)


def test_proposed_rhs_at_quarter_period(plant):
    """omega*t = pi/2: u = -k*y - y*sqrt(omega) = -21, so dy = 10 + (-2)(-21)."""
    d = proposed_rhs(plant, State(y=1.0, k=1.0), math.pi / 800.0, 400.0)
    assert d.u == pytest.approx(-21.0)
    assert d.dy == pytest.approx(52.0)
    assert d.dk == pytest.approx(0.0, abs=1e-12)


def test_proposed_rhs_rejects_non_positive_omega(plant):
    with pytest.raises(PreconditionError):
        proposed_rhs(plant, (1.0, 0.0), 0.0, 0.0)


def test_controller_part_is_plant_free(plant, unit_plant):
    """The input u depends on (y, k, t, omega) only."""
    s, t, omega = (0.7, -1.3), 0.123, 400.0
    u_ref, dk_ref = proposed_control(s[0], s[1], t, omega)
    for p in (plant, unit_plant):
        d = proposed_rhs(p, s, t, omega)
        assert d.u == u_ref
        assert d.dk == dk_ref
        assert d.dy == pytest.approx(p.a * s[0] + p.b * u_ref)


def test_swapped_rhs_at_phase_zero(unit_plant):
    d = swapped_rhs(unit_plant, State(y=1.0, k=0.0), 0.0, 4.0)
    assert d.dy == pytest.approx(1.0)
    assert d.dk == pytest.approx(2.0)


def test_nussbaum_rhs_examples(plant, unit_plant):
    assert nussbaum_rhs(plant, (0.0, 2.5))[:2] == (0.0, 0.0)

    d = nussbaum_rhs(unit_plant, State(y=2.0, k=0.0), s_cos_s)
    assert (d.dy, d.dk) == pytest.approx((2.0, 4.0))

    d = nussbaum_rhs(plant, State(y=1.0, k=math.pi), s_cos_s)
    assert d.dy == pytest.approx(10.0 + 2.0 * math.pi**2)
    assert d.dk == pytest.approx(1.0)


def test_willems_byrnes_rhs(plant):
    d = willems_byrnes_rhs(plant, State(y=1.0, k=0.0), -1)
    assert (d.dy, d.dk) == pytest.approx((10.0, -1.0))
    with pytest.raises(PreconditionError):
        willems_byrnes_rhs(plant, (1.0, 0.0), 0)


@pytest.mark.slow
def test_willems_byrnes_settles_with_known_sign(plant):
    loop = ClosedLoop(plant, ControllerSpec(variant="willems-byrnes", sign_b=-1))
    run = simulate(loop, (1.0, 0.0), 0.0, 10.0, 1e-4, Method.RK4)
    assert not run.failed
    assert abs(run.final_state.y) < 1e-3
    at_nine = int(round(9.0 / 1e-4))
    assert run.times[at_nine] == pytest.approx(9.0)
    assert abs(run.k[-1] - run.k[at_nine]) < 1e-4


def test_lie_bracket_rhs_examples(plant, unit_plant):
    assert lie_bracket_rhs(plant, State(y=1.0, k=-5.0))[:2] == pytest.approx((0.0, -2.0))
    assert lie_bracket_rhs(unit_plant, State(y=2.0, k=0.0))[:2] == pytest.approx((2.0, 4.0))


def test_equilibrium_set_is_exact(plant, rng):
    for k in rng.uniform(-50.0, 50.0, size=20):
        d = lie_bracket_rhs(plant, (0.0, float(k)))
        assert d.dy == 0.0 and d.dk == 0.0


def test_lie_bracket_rhs_odd_in_y(plant, rng):
    for y, k in rng.uniform(-5.0, 5.0, size=(20, 2)):
        d_pos = lie_bracket_rhs(plant, (y, k))
        d_neg = lie_bracket_rhs(plant, (-y, k))
        assert d_neg.dy == pytest.approx(-d_pos.dy)
        assert d_neg.dk == pytest.approx(d_pos.dk)


def test_controller_spec_validation():
    with pytest.raises(ValidationError):
        ControllerSpec(variant="willems-byrnes")
    with pytest.raises(ValidationError):
        ControllerSpec(variant="proposed", omega=-1.0)
    with pytest.raises(ValidationError):
        ControllerSpec(variant="nussbaum", nussbaum_fn="not-registered")
    assert ControllerSpec(variant="willems-byrnes", sign_b=-1).variant is ControllerVariant.WILLEMS_BYRNES


def test_closed_loop_matches_rhs_functions(plant):
    x, t = np.array([0.4, -0.9]), 0.01
    loop = ClosedLoop(plant, ControllerSpec(omega=400.0))
    d = proposed_rhs(plant, x, t, 400.0)
    np.testing.assert_allclose(loop(x, t), [d.dy, d.dk])
    assert loop.control(x, t) == d.u

    averaged = LieBracketSystem(plant)
    np.testing.assert_allclose(averaged(x), lie_bracket_rhs(plant, x)[:2])
    assert averaged.control(x) is None


def test_to_polar_examples(unit_plant):
    ps = to_polar((1.0, 1.0), unit_plant.c0)
    assert not ps.degenerate
    assert (ps.r, ps.phi) == pytest.approx((1.0, 0.0))

    ps = to_polar((1.0, 1.0), 0.0)
    assert ps.r == pytest.approx(math.sqrt(2.0))
    assert ps.phi == pytest.approx(math.pi / 4.0)

    ps = to_polar((-1.0, 0.0), 0.0)
    assert ps.r == pytest.approx(1.0)
    assert ps.phi == pytest.approx(math.pi)


def test_to_polar_degenerate_center():
    ps = to_polar((0.0, 3.0), 3.0)
    assert ps.degenerate and ps.r == 0.0 and ps.phi == 0.0


def test_polar_round_trip(rng):
    for y, k, c0 in rng.uniform(-10.0, 10.0, size=(1000, 3)):
        if math.hypot(y, k - c0) <= 1e-6:
            continue
        back = from_polar(to_polar((y, k), c0))
        err = math.hypot(back.y - y, back.k - k)
        assert err <= 1e-12 * (1.0 + math.hypot(y, k)) * 10, f"round trip error {err:.2e} at {(y, k, c0)}"


def test_polar_closed_loop_at_phi_zero(unit_plant):
    """u1 = sin 0 = 0 removes the dither term from r_dot; (y, k) = (1, 1) is on the line k = c0."""
    rate = polar_closed_loop_rhs(unit_plant, PolarState(r=1.0, phi=0.0, c0=1.0), 0.0, 1.0)
    assert rate.dr == pytest.approx(0.0, abs=1e-15)
    assert rate.dphi == pytest.approx(1.0)


def test_polar_closed_loop_matches_cartesian(plant, rng):
    c0 = plant.c0
    checked = 0
    for y, dk, t in zip(rng.uniform(-3, 3, 200), rng.uniform(-3, 3, 200), rng.uniform(0, 1, 200)):
        ps = to_polar((y, c0 + dk), c0)
        if ps.r < 1e-3 or abs(math.cos(ps.phi)) < 1e-3:
            continue
        dy, dk_dt = polar_to_cartesian_rate(ps, polar_closed_loop_rhs(plant, ps, t, 400.0))
        d = proposed_rhs(plant, (y, c0 + dk), t, 400.0)
        scale = 1.0 + abs(d.dy) + abs(d.dk)
        assert abs(dy - d.dy) <= 1e-9 * scale
        assert abs(dk_dt - d.dk) <= 1e-9 * scale
        checked += 1
    assert checked > 100


def test_polar_lbs_rhs(plant):
    assert polar_lbs_rhs(plant, PolarState(r=2.0, phi=math.pi / 2.0)).dphi == pytest.approx(0.0, abs=1e-15)
    assert tuple(polar_lbs_rhs(plant, PolarState(r=1.0, phi=0.0))) == pytest.approx((0.0, -2.0))
    for phi in np.linspace(-3.0, 3.0, 7):
        assert polar_lbs_rhs(plant, PolarState(r=1.5, phi=float(phi))).dr == 0.0
