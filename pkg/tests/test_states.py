import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sgacs.errors import DegenerateInputError, PreconditionError, TruncationError
from sgacs.grid import Grid
from sgacs.background import vortex_wavefunction
from sgacs.states import (FockState, apply_lowering, coherent, compressed_coefficients, default_cutoff,
                          even_cat_occupation, even_cat_occupation_tanh_squared, even_coherent, expectation,
                          two_mode_norm, two_mode_superposition)


@pytest.mark.parametrize("alpha", [0.5, 1.0, 2.0, 3.0, 1.5j, 2 * np.exp(0.7j)])
def test_even_cat_is_a_squared_eigenstate(alpha):
    s = even_coherent(alpha, 60)
    res = apply_lowering(s, 0, 2) - alpha**2 * s.amplitudes
    # the two highest levels are annihilated out of the truncated space
    assert np.linalg.norm(res[:-2]) < 1e-10


@pytest.mark.parametrize("alpha", [0.3, 1.0, 2.5])
def test_even_cat_has_zero_mean_field(alpha):
    assert expectation(even_coherent(alpha), "a0") == 0


def test_occupation_closed_form_against_mpmath():
    for a in (0.4, 1.0, 2.0, 3.0):
        mp = mpmath.mpf(a) ** 2
        # only even occupations j = 2k contribute
        brute = mpmath.nsum(lambda k: 2 * k * mp ** (2 * k) / mpmath.factorial(2 * k), [0, mpmath.inf])
        norm = mpmath.nsum(lambda k: mp ** (2 * k) / mpmath.factorial(2 * k), [0, mpmath.inf])
        exact = float(brute / norm)
        assert even_cat_occupation(a) == pytest.approx(exact, rel=1e-13)
        assert expectation(even_coherent(a, 60), "n0").real == pytest.approx(exact, rel=1e-12)


def test_squared_tanh_formula_disagrees():
    assert abs(even_cat_occupation_tanh_squared(1.0) - even_cat_occupation(1.0)) > 0.1


def test_cutoff_too_small_raises():
    with pytest.raises(TruncationError):
        even_coherent(3.0, 20)
    with pytest.raises(TruncationError):
        coherent(3.0, 20)
    assert default_cutoff(3.0) <= 64


def test_coherent_mean_field():
    s = coherent(1.2 + 0.4j)
    assert expectation(s, "a0") == pytest.approx(1.2 + 0.4j, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.1, 2.5), st.floats(-2, 2), st.floats(-2, 2))
def test_two_mode_norm_matches_amplitudes(a, wr, wi):
    w = complex(wr, wi)
    s = two_mode_superposition(a, w, normalize=False)
    assert np.sum(np.abs(s.amplitudes) ** 2) == pytest.approx(two_mode_norm(w, a), rel=1e-10)


def test_two_mode_swap_symmetry():
    s = two_mode_superposition(1.3, 1.0)
    np.testing.assert_allclose(s.swap_modes().amplitudes, s.amplitudes, atol=1e-15)
    assert expectation(s, "n0").real == pytest.approx(expectation(s, "n1").real, rel=1e-12)


def test_degenerate_superposition():
    with pytest.raises(DegenerateInputError):
        two_mode_superposition(0.0, -1.0)


def test_bad_observable_and_shape():
    s = even_coherent(1.0)
    with pytest.raises(PreconditionError):
        expectation(s, "n1")
    with pytest.raises(PreconditionError):
        expectation(s, "a1")
    with pytest.raises(PreconditionError):
        FockState(np.zeros(5), 10)


def test_amplitudes_csv(tmp_path):
    p = even_coherent(1.0, 16).to_csv(tmp_path / "a.csv")
    rows = p.read_text().splitlines()
    assert rows[0] == "j0,j1,re,im"
    assert all(int(r.split(",")[0]) % 2 == 0 for r in rows[1:])


@pytest.fixture(scope="module")
def vortex_grid():
    return Grid.centered((21, 21), 4.0, bc=("fixed", "fixed"))


@settings(max_examples=20, deadline=None)
@given(st.floats(-math.pi, math.pi))
def test_pair_phase_gauge_covariance(chi):
    g = Grid.centered((21, 21), 4.0, bc=("fixed", "fixed"))
    phi0 = vortex_wavefunction(1, 1.0, g)
    a = compressed_coefficients("even_cat", g, phi0, None, 1.0, 1.5)
    b = compressed_coefficients("even_cat", g, phi0 * np.exp(1j * chi), None, 1.0, 1.5)
    shift = np.angle(np.exp(1j * (b.pair_phase - a.pair_phase)))
    ok = np.isfinite(shift)
    np.testing.assert_allclose(np.angle(np.exp(1j * (shift[ok] - 2 * chi))), 0.0, atol=1e-12)
    np.testing.assert_allclose(b.pair_magnitude, a.pair_magnitude, equal_nan=True)


def test_coupling_is_twice_pair_magnitude(vortex_grid):
    phi0 = vortex_wavefunction(1, 1.0, vortex_grid)
    c = compressed_coefficients("coherent", vortex_grid, phi0, None, 0.7, 2.0)
    np.testing.assert_allclose(c.coupling, 2 * c.pair_magnitude, equal_nan=True)


def test_two_mode_needs_orthogonal_modes(vortex_grid):
    phi = np.ones(vortex_grid.shape, complex)
    with pytest.raises(PreconditionError):
        compressed_coefficients("two_mode", vortex_grid, phi, phi, 1.0, 1.0, 1.0)
    phi0 = vortex_wavefunction(1, 1.0, vortex_grid)
    c = compressed_coefficients("two_mode", vortex_grid, phi0, np.where(np.isnan(phi0), np.nan, 1.0 + 0j),
                                1.0, 1.0, 0.5)
    assert np.isnan(c.one_body[10, 10]) and np.isfinite(c.one_body[0, 3])
