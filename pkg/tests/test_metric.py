import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sgacs.background import Background, uniform_background
from sgacs.errors import DimensionError
from sgacs.grid import FIXED, Grid
from sgacs.metric import (FIGURE1, build_f_tensor, build_metric, ergosurface, f_determinant, metric_residuals,
                          sqrt_neg_g)


def random_background(rng, d: int) -> Background:
    shape = (6,) * d
    g = Grid.periodic_box(shape, 3.0)
    n_H = rng.uniform(0.3, 2.0, shape)
    theta = rng.normal(size=shape) * 0.5
    v = rng.normal(size=(d,) + shape) * 0.4
    return Background(g, rng.uniform(0.1, 1.0, shape), theta - np.pi / 2, n_H, theta, v, 0.0,
                      V0=rng.uniform(0.2, 3.0), m=rng.uniform(0.5, 2.0), hbar=rng.uniform(0.5, 2.0))


@pytest.mark.parametrize("d", [2, 3])
def test_identities_hold_cellwise(rng, d):
    for _ in range(10):
        res = metric_residuals(build_metric(random_background(rng, d)))
        assert res["inverse"] < 1e-10
        assert res["det_f"] < 1e-10
        assert res["conformal"] < 1e-10
        assert res["numeric_inverse"] < 1e-10
        assert res["signature"] == 0 and res["sqrt_neg_g_positive"] == 0


def test_determinant_closed_form_in_three_dimensions(rng):
    bg = random_background(rng, 3)
    f = build_f_tensor(bg)
    np.testing.assert_allclose(np.linalg.det(f), -bg.cs2**3 / bg.V0**4, rtol=1e-10)
    np.testing.assert_allclose(f_determinant(bg.cs2, bg.V0, 3), -bg.cs2**3 / bg.V0**4)


def test_at_rest_metric_is_conformally_flat():
    g = Grid.periodic_box((4, 4), 1.0)
    bg = uniform_background(g, 0.25, 2.0, 0.5)
    met = build_metric(bg)
    cs2 = 0.5 * 2.0
    g_cov = met.covariant[0, 0]
    np.testing.assert_allclose(g_cov / g_cov[1, 1], np.diag([-cs2, 1.0, 1.0]), atol=1e-14)


def test_one_dimension_has_no_unique_metric():
    bg = uniform_background(Grid.periodic_box((8,), 1.0), 0.25, 1.0, 1.0)
    with pytest.raises(DimensionError):
        build_metric(bg)
    with pytest.raises(DimensionError):
        sqrt_neg_g(np.ones(3), 1.0, 1)
    assert build_f_tensor(bg).shape == (8, 2, 2)


def test_masked_cells_hold_nan(rng):
    bg = random_background(rng, 2)
    n = np.array(bg.n_H0)
    n[2, 3] = np.nan
    met = build_metric(bg.with_fields(n_H0=n))
    assert np.all(np.isnan(met.f[2, 3])) and not met.valid[2, 3]
    assert metric_residuals(met)["inverse"] < 1e-10


def test_components_and_save(tmp_path, rng):
    met = build_metric(random_background(rng, 2))
    comps = met.components()
    assert {"g^00", "g_12", "f^01", "sqrt_neg_g"} <= set(comps)
    files = met.save(tmp_path)
    assert len(files) == len(comps)


def rotating_background(omega: float) -> Background:
    g = Grid.centered((41, 41), 4.0, bc=(FIXED, FIXED))
    x1, x2 = g.coords
    v = np.stack([-omega * x2, omega * x1])
    return Background(g, 0.25, -np.pi / 2, 1.0, 0.0, v, 0.0, V0=1.0)


@settings(max_examples=15, deadline=None)
@given(st.floats(0.05, 0.5), st.floats(1.01, 2.0))
def test_ergoregion_grows_with_flow(omega, factor):
    slow = ergosurface(rotating_background(omega))
    fast = ergosurface(rotating_background(omega * factor))
    assert np.all(fast.mask[slow.mask])
    assert fast.area >= slow.area


def test_ergosurface_of_rigid_rotation_is_a_circle():
    # |u| = omega r >= c_s = 1 outside r = 1/omega
    ergo = ergosurface(rotating_background(0.5))
    radii = [np.hypot(*line.T) for line in ergo.polylines]
    assert radii and all(np.all(np.abs(r - 2.0) < 0.1) for r in radii)
    assert ergo.polylines_csv().startswith("x,y,segment_id\n")


def test_figure_convention_threshold():
    g = Grid.centered((21, 21), 2.0)
    x1, _ = g.coords
    bg = Background(g, 1.0, 0.0, 1.0, 0.8 * x1, 0.0, 0.0, V0=1.0)
    # |grad theta|^2 = 0.64 >= 1/2 everywhere
    assert ergosurface(bg, FIGURE1).mask.all()
    with pytest.raises(ValueError):
        ergosurface(bg, "furlongs")
