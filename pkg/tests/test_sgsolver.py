import math

import numpy as np
import pytest

from sgacs.background import uniform_background
from sgacs.errors import BlowUpError, CflError, PreconditionError
from sgacs.grid import FIXED, NEUMANN, Grid
from sgacs.metric import build_f_tensor
from sgacs.sgsolver import (PlanesMedium, SgMedium, SgState, certify_forces, certify_planes,
                            effective_wavenumber, energy, evolve, junction_derivative, junction_potential,
                            kink_initial_condition, kink_mass, kink_shape_error, planes_at_rest, planes_energy,
                            planes_step, standing_wave_frequency, step, topological_charge)

MEDIA = {
    "periodic_2d_flow": lambda rng: SgMedium(Grid.periodic_box((12, 10), (6, 5)), rng.uniform(0.5, 2, (12, 10)),
                                             rng.normal(size=(2, 12, 10)) * 0.8, rng.uniform(0, 1, (12, 10)),
                                             V0=1.3, hbar=0.9),
    "walls_2d": lambda rng: SgMedium(Grid.centered((9, 8), 4, bc=(FIXED, NEUMANN)), rng.uniform(0.5, 2, (9, 8)),
                                     rng.normal(size=(2, 9, 8)) * 0.5, rng.uniform(0, 1, (9, 8))),
    "periodic_3d": lambda rng: SgMedium(Grid.periodic_box((7, 6, 5), 3.0), rng.uniform(0.5, 2, (7, 6, 5)),
                                        rng.normal(size=(3, 7, 6, 5)) * 0.3, 0.4),
    "twisted_1d": lambda rng: SgMedium(Grid.periodic_box((20,), 5.0), 1.0, 0.0, 0.5, twist=(math.pi,)),
}


@pytest.mark.parametrize("name", sorted(MEDIA))
def test_forces_are_action_gradients(name, rng):
    rep = certify_forces(MEDIA[name](rng), rng)
    assert rep.passed, rep.to_csv()


@pytest.mark.parametrize("gamma0", [math.pi, math.pi / 2])
def test_planes_forces_are_action_gradients(gamma0, rng):
    g = Grid.periodic_box((8, 6), 4.0)
    left = SgMedium(g, 1.0, rng.normal(size=(2, 8, 6)) * 0.2, 0.3)
    right = SgMedium(g, 1.3, 0.0, 0.1)
    rep = certify_planes(PlanesMedium(left, right, 0.4, 1.0, 0.8, gamma0), rng)
    assert rep.passed, rep.to_csv()


def test_junction_potential_is_remainder_of_cosine():
    g = np.linspace(-2, 2, 41)
    for g0 in (math.pi, 2.0, math.pi / 2):
        exact = np.cos(g0 + g) - np.cos(g0) + np.sin(g0) * g
        np.testing.assert_allclose(junction_potential(g, g0), exact, atol=1e-14)
        h = 1e-6
        numeric = (junction_potential(g + h, g0) - junction_potential(g - h, g0)) / (2 * h)
        np.testing.assert_allclose(junction_derivative(g, g0), numeric, atol=1e-8)


def test_linear_energy_conserved_exactly(rng):
    g = Grid.periodic_box((32, 32), 8.0)
    med = SgMedium(g, rng.uniform(0.5, 1.5, g.shape), rng.normal(size=(2,) + g.shape) * 0.2, 0.0)
    s = SgState(med, rng.normal(size=g.shape), rng.normal(size=g.shape), 0.0, med.max_stable_dt())
    e0 = energy(s)
    s, _ = evolve(s, 300)
    assert abs(energy(s) - e0) < 1e-12 * abs(e0)


def test_supersonic_uniform_flow_stays_bounded(rng):
    # every Fourier mode of a uniform flow oscillates, even above the sound speed
    g = Grid.periodic_box((32, 32), 8.0)
    med = SgMedium(g, 0.25, np.array([0.9, 0.3])[:, None, None] * np.ones(g.shape), 0.0)
    s = SgState(med, rng.normal(size=g.shape), rng.normal(size=g.shape), 0.0, med.max_stable_dt())
    e0 = energy(s)
    s, _ = evolve(s, 2000)
    assert np.abs(s.theta).max() < 100
    assert abs(energy(s) - e0) < 1e-10 * abs(e0)


def test_time_reversal_with_flow(rng):
    g = Grid.periodic_box((16, 12), (6, 5))
    med = SgMedium(g, rng.uniform(0.5, 1.5, g.shape), rng.normal(size=(2,) + g.shape) * 0.3, 0.5)
    s0 = SgState(med, rng.normal(size=g.shape) * 0.3, rng.normal(size=g.shape) * 0.3, 0.0, med.max_stable_dt())
    s, _ = evolve(s0, 200)
    back, _ = evolve(s.reversed(), 200)
    np.testing.assert_allclose(back.theta, s0.theta, atol=1e-10)


def test_cfl_violation_raises():
    med = SgMedium(Grid.periodic_box((16,), 4.0), 1.0, 0.0, 0.5)
    with pytest.raises(CflError):
        SgState(med, 0.0, 0.0, 0.0, 10 * med.max_stable_dt())
    with pytest.raises(CflError):
        SgState(med, 0.0, 0.0, 0.0, med.max_stable_dt(0.5), cfl=0.9)


def test_blow_up_is_reported():
    med = SgMedium(Grid.periodic_box((16,), 4.0), 1.0, 0.0, 0.0)
    s = SgState(med, np.full(16, np.inf), 0.0, 0.0, med.max_stable_dt())
    with pytest.raises(BlowUpError) as info, np.errstate(invalid="ignore"):
        step(s)
    assert info.value.last_good is s


def test_medium_preconditions():
    g = Grid.periodic_box((8,), 1.0)
    with pytest.raises(PreconditionError):
        SgMedium(g, -1.0, 0.0, 0.0)
    with pytest.raises(PreconditionError):
        SgMedium(g, 1.0, 0.0, -0.1)
    with pytest.raises(PreconditionError):
        SgMedium(Grid.centered((8,), 1.0, bc=(FIXED,)), 1.0, 0.0, 0.0, twist=(1.0,))


def test_medium_from_background_and_f_tensor_agree(rng):
    g = Grid.periodic_box((6, 6), 3.0)
    bg = uniform_background(g, 0.3, 1.4, 0.7, v=(0.2, -0.1))
    a = SgMedium.from_background(bg)
    b = SgMedium.from_f_tensor(g, build_f_tensor(bg), a.coupling, bg.V0)
    np.testing.assert_allclose(b.cs2, a.cs2, rtol=1e-14)
    np.testing.assert_allclose(b.u, a.u, atol=1e-15)
    np.testing.assert_allclose(a.mass2, 2 * 0.7 * (2 * 0.7 * 1.4 * 0.3))


def kink_medium(cells: int, length: float) -> SgMedium:
    bg = uniform_background(Grid.periodic_box((cells,), length), 0.25, 1.0, 1.0)
    return SgMedium.from_background(bg, twist=(math.pi,))


def test_static_kink_short_run():
    med = kink_medium(256, 16.0)
    assert kink_mass(med) == pytest.approx(1.0)
    s = kink_initial_condition(0.0, 8.0, med, med.max_stable_dt())
    assert topological_charge(s) == pytest.approx(1.0)
    e0 = energy(s)
    s, _ = evolve(s, 500)
    assert abs(energy(s) - e0) / e0 < 1e-10
    assert kink_shape_error(s, 0.0, 8.0) < 1e-3


def test_moving_kink_follows_analytic_profile():
    med = kink_medium(512, 16.0)
    dt = med.max_stable_dt()
    s = kink_initial_condition(0.5, 8.0, med, dt)
    s, _ = evolve(s, int(round(4.0 / 0.5 / dt)))
    assert kink_shape_error(s, 0.5, 8.0) < 5e-3
    with pytest.raises(PreconditionError):
        kink_initial_condition(1.0, 8.0, med, dt)


def test_klein_gordon_dispersion_single_mode():
    bg = uniform_background(Grid.periodic_box((64,), 32.0), 0.25, 1.0, 1.0)
    med = SgMedium.from_background(bg)
    k = 2 * math.pi / 32.0
    expected = effective_wavenumber(k, 0.5) ** 2 + 1.0
    assert standing_wave_frequency(med, 1) ** 2 == pytest.approx(expected, rel=1e-3)
    assert effective_wavenumber(k, 1e-6) == pytest.approx(k)


def test_planes_small_oscillations_and_energy():
    g = Grid.periodic_box((8, 8), 4.0)
    bg = uniform_background(g, 0.25, 1.0, 1.0)
    left, right = SgMedium.from_background(bg), SgMedium.from_background(bg)
    med = PlanesMedium(left, right, 0.3, 1.0, 1.0, math.pi)
    dt = 0.2 * left.max_stable_dt()
    s = planes_at_rest(med, 5e-4, -5e-4, dt)
    e0 = planes_energy(s)["total"]
    trace = []
    for _ in range(3000):
        s = planes_step(s)
        trace.append(float(np.mean(s.theta_L - s.theta_R)))
    p = np.array(trace)
    crossings = np.nonzero(np.sign(p[:-1]) != np.sign(p[1:]))[0]
    omega = math.pi / (dt * np.mean(np.diff(crossings)))
    assert omega**2 == pytest.approx(med.small_oscillation_omega2(), rel=2e-2)
    assert planes_energy(s)["total"] == pytest.approx(e0, rel=1e-6)
