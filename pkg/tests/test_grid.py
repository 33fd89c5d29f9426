import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from sgacs.errors import GridError, SizeError
from sgacs.grid import (FIXED, NEUMANN, Grid, central_difference_matrix, divergence, forward_difference_matrix,
                        gradient, laplacian, laplacian_compact, read_dump, write_dump)

finite = st.floats(-10, 10, allow_nan=False)


def test_rejects_bad_shapes():
    with pytest.raises(SizeError):
        Grid((2, 5), (1.0, 1.0))
    with pytest.raises(GridError):
        Grid((4, 4, 4, 4), (1.0,) * 4)
    with pytest.raises(GridError):
        Grid((4,), (-1.0,))
    with pytest.raises(GridError):
        Grid((4,), (1.0,), bc=("sticky",))
    with pytest.raises(GridError):
        Grid((4,), (1.0,), n_tau=4)


def test_centered_axis_is_mirror_symmetric():
    g = Grid.centered((161, 33), (4.0, 1.3))
    for axis in range(2):
        x = g.axis_coords(axis)
        assert np.array_equal(x, -x[::-1])
    assert g.axis_coords(0)[0] == -4.0


def test_offset_axis_coordinates():
    g = Grid((5,), (0.5,), origin=(1.0,), bc=(FIXED,))
    np.testing.assert_allclose(g.axis_coords(0), [1.0, 1.5, 2.0, 2.5, 3.0])


def test_gradient_exact_on_quadratics():
    g = Grid.centered((9, 7), 2.0, bc=(FIXED, FIXED))
    x, y = g.coords
    f = 3 * x**2 - x * y + 2 * y
    gx, gy = gradient(f, g)
    np.testing.assert_allclose(gx, 6 * x - y, atol=1e-12)
    np.testing.assert_allclose(gy, -x + 2, atol=1e-12)


def test_neumann_wall_gradient_vanishes():
    g = Grid.centered((7,), 1.0, bc=(NEUMANN,))
    gx = gradient(g.coords[0] ** 2, g)[0]
    assert gx[0] == 0 and gx[-1] == 0


def test_compact_laplacian_of_quadratic():
    g = Grid.centered((8, 6), 1.5, bc=(FIXED, FIXED))
    x, y = g.coords
    np.testing.assert_allclose(laplacian_compact(x**2 + 2 * y**2, g), 6.0, atol=1e-10)


def test_nan_propagates_to_stencil_neighbours(box2):
    f = np.ones(box2.shape)
    f[5, 5] = np.nan
    gx = gradient(f, box2)[0]
    assert np.isnan(gx[4, 5]) and np.isnan(gx[6, 5])
    assert np.isfinite(gx[5, 7])


@settings(max_examples=30, deadline=None)
@given(arrays(float, (12, 10), elements=finite), arrays(float, (12, 10), elements=finite),
       st.floats(-3, 3, allow_nan=False))
def test_laplacian_is_linear(f, h, a):
    g = Grid.periodic_box((12, 10), (6.0, 5.0))
    lhs = laplacian(f + a * h, g)
    rhs = laplacian(f, g) + a * laplacian(h, g)
    np.testing.assert_allclose(lhs, rhs, atol=1e-9 * (1 + np.abs(lhs).max()))


@settings(max_examples=30, deadline=None)
@given(arrays(float, (12, 10), elements=finite), arrays(float, (2, 12, 10), elements=finite))
def test_summation_by_parts_on_periodic_grid(f, u):
    g = Grid.periodic_box((12, 10), (6.0, 5.0))
    lhs = np.sum(f * divergence(u, g))
    rhs = -np.sum(gradient(f, g) * u)
    assert abs(lhs - rhs) <= 1e-9 * (1 + np.sum(np.abs(f)) * np.abs(u).max())


@pytest.mark.parametrize("bc", [("periodic", "periodic"), (FIXED, NEUMANN)])
def test_sparse_central_difference_matches_gradient(bc, rng):
    g = Grid((6, 5), (0.3, 0.7), bc=bc)
    f = rng.normal(size=g.shape)
    for axis in range(2):
        D, b = central_difference_matrix(g, axis)
        np.testing.assert_allclose((D @ f.ravel() + b).reshape(g.shape), gradient(f, g)[axis], atol=1e-12)


def test_twisted_forward_difference(rng):
    g = Grid.periodic_box((8,), 4.0)
    x = g.axis_coords(0)
    # f(x + L) = f(x) + 1: a linear ramp has constant difference with the twist
    D, b = forward_difference_matrix(g, 0, twist=1.0)
    np.testing.assert_allclose(D @ (x / 4.0) + b, 0.25, atol=1e-12)


def test_dump_round_trip(tmp_path, rng):
    g = Grid.centered((4, 3), (1.0, 2.0), bc=(FIXED, NEUMANN))
    f = rng.normal(size=g.shape)
    f[1, 1] = np.nan
    back, g2 = read_dump(write_dump(tmp_path / "f.grid", f, g))
    assert g2 == g
    np.testing.assert_array_equal(back, f)


def test_dump_rejects_wrong_count(tmp_path):
    g = Grid.periodic_box((3,), 1.0)
    p = write_dump(tmp_path / "f.grid", np.zeros(3), g)
    p.write_text(p.read_text() + "1.0\n")
    with pytest.raises(GridError):
        read_dump(p)


def test_integrate_and_inner(box2):
    assert box2.integrate(np.ones(box2.shape)) == pytest.approx(30.0)
    assert box2.inner(np.ones(box2.shape), 2j * np.ones(box2.shape)) == pytest.approx(60j)
