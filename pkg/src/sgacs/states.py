"""Truncated Fock-space states for the engineered low-mode vacua.

Two families are covered: the single-mode even coherent ("cat") state and
the two-mode superposition of even cats in modes 0 and 1.  Amplitudes are
always renormalized numerically after construction, so the Gaussian prefactor
conventions of the closed forms never matter.

The module also builds the coefficient fields of the Hamiltonian compressed
to these subspaces, which feed the background and solver modules.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DegenerateInputError, PreconditionError, TruncationError
from .grid import Grid

TAIL_TOLERANCE = 1e-12
ORTHOGONALITY_TOLERANCE = 1e-8
OBSERVABLES = ("a0", "a0^2", "n0", "n1")


def default_cutoff(alpha: complex) -> int:
    return int(math.ceil(10 + 6 * abs(alpha) ** 2))


def _coherent_coefficients(alpha: complex, cutoff: int) -> np.ndarray:
    """alpha**j / sqrt(j!) for j = 0..cutoff, by recursion (no factorial overflow)."""
    c = np.empty(cutoff + 1, dtype=complex)
    c[0] = 1.0
    for j in range(cutoff):
        c[j + 1] = c[j] * alpha / math.sqrt(j + 1)
    return c


def _even_branch(alpha: complex, cutoff: int) -> np.ndarray:
    c = _coherent_coefficients(alpha, cutoff)
    parity = 1 + (-1.0) ** np.arange(cutoff + 1)
    return c * parity


def _tail_fraction(alpha: complex, cutoff: int) -> float:
    """Weight of the even branch beyond ``cutoff`` relative to the total.

    Summed up to a cutoff far beyond the Poisson mean, where the remainder is
    below double precision.
    """
    far = max(2 * cutoff, cutoff + 40, int(4 * abs(alpha) ** 2) + 60)
    w = np.abs(_even_branch(alpha, far)) ** 2
    total = w.sum()
    if total == 0:
        return 0.0
    return float(w[cutoff + 1:].sum() / total)


@dataclass(frozen=True)
class FockState:
    """Normalized amplitudes on ``modes`` bosonic modes truncated at ``cutoff``.

    ``amplitudes`` has shape ``(cutoff + 1,) * modes``; entry ``[j0, j1]`` is
    the coefficient of ``|j0, j1>``.
    """

    amplitudes: np.ndarray
    cutoff: int
    family: str = "custom"
    alpha: complex | None = None
    w: complex | None = None

    def __post_init__(self):
        a = np.asarray(self.amplitudes, dtype=complex)
        if a.ndim not in (1, 2) or any(n != self.cutoff + 1 for n in a.shape):
            raise PreconditionError(f"amplitude shape {a.shape} does not match cutoff {self.cutoff}")
        a = a.copy()
        a.flags.writeable = False
        object.__setattr__(self, "amplitudes", a)

    @property
    def modes(self) -> int:
        return self.amplitudes.ndim

    @property
    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.amplitudes) ** 2)))

    def swap_modes(self) -> "FockState":
        if self.modes != 2:
            raise PreconditionError("mode swap needs a two-mode state")
        return FockState(self.amplitudes.T, self.cutoff, self.family, self.alpha, self.w)

    def to_csv(self, path) -> Path:
        """Write ``j0,j1,re,im`` rows for every nonzero amplitude."""
        path = Path(path)
        with path.open("w", newline="") as fh:
            out = csv.writer(fh, lineterminator="\n")
            out.writerow(["j0", "j1", "re", "im"])
            a = self.amplitudes if self.modes == 2 else self.amplitudes[:, None]
            for j0, j1 in zip(*np.nonzero(a)):
                z = a[j0, j1]
                out.writerow([int(j0), int(j1), repr(float(z.real)), repr(float(z.imag))])
        return path


def _check_cutoff(alpha: complex, cutoff: int):
    if cutoff < 2:
        raise PreconditionError("cutoff must be at least 2")
    tail = _tail_fraction(alpha, cutoff)
    if tail > TAIL_TOLERANCE:
        raise TruncationError(
            f"cutoff {cutoff} discards weight {tail:.3e} > {TAIL_TOLERANCE:g} at |alpha|={abs(alpha):g}; "
            f"try cutoff >= {default_cutoff(alpha)}")


def even_coherent(alpha: complex, cutoff: int | None = None) -> FockState:
    """Single-mode even coherent state, amplitudes prop. to alpha**j (1 + (-1)**j) / sqrt(j!)."""
    cutoff = default_cutoff(alpha) if cutoff is None else int(cutoff)
    _check_cutoff(alpha, cutoff)
    amp = _even_branch(alpha, cutoff)
    amp /= np.linalg.norm(amp)
    return FockState(amp, cutoff, "even_cat", complex(alpha))


def coherent(alpha: complex, cutoff: int | None = None) -> FockState:
    """Ordinary single-mode coherent state (the Bogoliubov c-number substitution)."""
    cutoff = default_cutoff(alpha) if cutoff is None else int(cutoff)
    far = max(2 * cutoff, cutoff + 40)
    w = np.abs(_coherent_coefficients(alpha, far)) ** 2
    if w[cutoff + 1:].sum() / w.sum() > TAIL_TOLERANCE:
        raise TruncationError(f"cutoff {cutoff} too small for |alpha|={abs(alpha):g}")
    amp = _coherent_coefficients(alpha, cutoff)
    amp /= np.linalg.norm(amp)
    return FockState(amp, cutoff, "coherent", complex(alpha))


def two_mode_norm(w: complex, alpha: complex) -> float:
    """4 exp(-|a|^2) ((1 + |w|^2) cosh|a|^2 + 2 Re w), written overflow-free."""
    a2 = abs(alpha) ** 2
    # exp(-a2) cosh(a2) = (1 + exp(-2 a2)) / 2
    return float(2 * (1 + abs(w) ** 2) * (1 + math.exp(-2 * a2)) + 8 * math.exp(-a2) * complex(w).real)


def two_mode_superposition(alpha: complex, w: complex, cutoff: int | None = None,
                           normalize: bool = True) -> FockState:
    """Even cat in mode 0 superposed with ``w`` times an even cat in mode 1.

    Both branches share the ``|0,0>`` component, which is where the
    interference term of the norm comes from.  With ``normalize=False`` the
    amplitudes carry the exp(-|alpha|^2/2) prefactor and no normalization, so
    their squared norm equals :func:`two_mode_norm`.
    """
    cutoff = default_cutoff(alpha) if cutoff is None else int(cutoff)
    _check_cutoff(alpha, cutoff)
    branch = math.exp(-abs(alpha) ** 2 / 2) * _even_branch(alpha, cutoff)
    amp = np.zeros((cutoff + 1, cutoff + 1), dtype=complex)
    amp[:, 0] += branch
    amp[0, :] += w * branch
    if normalize:
        nrm = np.linalg.norm(amp)
        if nrm == 0:
            raise DegenerateInputError("superposition vanishes identically (w = -1, alpha = 0)")
        amp /= nrm
    return FockState(amp, cutoff, "two_mode", complex(alpha), complex(w))


def _lower(amp: np.ndarray, axis: int, power: int = 1) -> np.ndarray:
    """Apply the truncated annihilation operator ``power`` times along ``axis``."""
    out = np.moveaxis(np.asarray(amp, dtype=complex), axis, 0)
    for _ in range(power):
        n = out.shape[0]
        shifted = np.zeros_like(out)
        root = np.sqrt(np.arange(1, n)).reshape((-1,) + (1,) * (out.ndim - 1))
        shifted[:-1] = root * out[1:]
        out = shifted
    return np.moveaxis(out, 0, axis)


def apply_lowering(state: FockState, mode: int = 0, power: int = 1) -> np.ndarray:
    """Amplitudes of ``a_mode**power |state>`` (not renormalized)."""
    if mode >= state.modes:
        raise PreconditionError(f"state has no mode {mode}")
    return _lower(state.amplitudes, mode, power)


def expectation(state: FockState, observable: str) -> complex:
    """Exact truncated-space expectation of ``a0``, ``a0^2``, ``n0`` or ``n1``."""
    amp = state.amplitudes
    if observable not in OBSERVABLES:
        raise PreconditionError(f"unsupported observable {observable!r}; choose from {OBSERVABLES}")
    if observable == "n1" and state.modes < 2:
        raise PreconditionError("n1 needs a two-mode state")
    if observable in ("a0", "a0^2"):
        power = 1 if observable == "a0" else 2
        return complex(np.vdot(amp, _lower(amp, 0, power)))
    mode = 0 if observable == "n0" else 1
    occ = np.arange(state.cutoff + 1, dtype=float)
    weights = np.abs(amp) ** 2
    return complex(np.sum(np.moveaxis(weights, mode, -1) * occ))


def even_cat_occupation(alpha: complex) -> float:
    """Closed form |alpha|^2 tanh|alpha|^2 of the even-cat mean occupation."""
    a2 = abs(alpha) ** 2
    return a2 * math.tanh(a2)


def even_cat_occupation_tanh_squared(alpha: complex) -> float:
    """|alpha|^2 tanh^2|alpha|^2, an alternative form kept only for comparison reports."""
    a2 = abs(alpha) ** 2
    return a2 * math.tanh(a2) ** 2


# --- compressed Hamiltonian coefficients -------------------------------------

FAMILIES = ("coherent", "even_cat", "two_mode")


@dataclass(frozen=True)
class CompressedCoefficients:
    """Coefficient fields of the Hamiltonian compressed to an engineered subspace.

    one_body
        extra one-body potential felt by the high-energy sector.
    pair_magnitude, pair_phase
        the pair-exchange term reads ``pair_magnitude * n * cos(2 theta / hbar - pair_phase)``.
    coupling
        sine-Gordon coupling per unit high-sector density: the potential is
        ``coupling * n_H0 * (1 - cos(2 theta_d / hbar)) / 2``.
    intermode_energy
        scalar vacuum term from intermode pair exchange inside the low sector.
    """

    family: str
    one_body: np.ndarray
    pair_magnitude: np.ndarray
    pair_phase: np.ndarray
    coupling: np.ndarray
    intermode_energy: float = 0.0
    params: dict = field(default_factory=dict)

    def fields(self) -> dict[str, np.ndarray]:
        return {"one_body": self.one_body, "pair_magnitude": self.pair_magnitude,
                "pair_phase": self.pair_phase, "coupling": self.coupling}


def compressed_coefficients(family: str, grid: Grid, phi0: np.ndarray, phi1: np.ndarray | None,
                            V0: float, alpha: complex, w: complex = 0.0) -> CompressedCoefficients:
    """Coefficient fields for ``family`` in {'coherent', 'even_cat', 'two_mode'}.

    ``phi0``/``phi1`` are complex single-particle wave functions on ``grid``
    (NaN marks masked cells).  For the two-mode family they must be
    orthogonal in the discrete inner product.
    """
    if family not in FAMILIES:
        raise PreconditionError(f"unknown family {family!r}")
    phi0 = np.asarray(grid.check(phi0, "phi0"), dtype=complex)
    if not np.nansum(np.abs(phi0) ** 2) > 0:
        raise DegenerateInputError("phi0 has zero norm")
    a2 = abs(alpha) ** 2

    if family in ("coherent", "even_cat"):
        dens = np.abs(phi0) ** 2
        factor = math.tanh(a2) ** 2 if family == "even_cat" else 1.0
        one_body = 2 * V0 * dens * a2 * factor
        pair = V0 * a2 * dens
        # pair term alpha^2 phi0^2 conj(psi)^2: its phase is 2 Arg(alpha phi0)
        xi = np.angle(complex(alpha) ** 2 * phi0**2) if alpha != 0 else 2 * np.angle(phi0)
        xi = np.where(np.isnan(dens), np.nan, xi)
        return CompressedCoefficients(family, one_body, pair, xi, 2 * pair,
                                      params={"V0": V0, "alpha": alpha})

    if phi1 is None:
        raise PreconditionError("two-mode family needs phi1")
    phi1 = np.asarray(grid.check(phi1, "phi1"), dtype=complex)
    if not np.nansum(np.abs(phi1) ** 2) > 0:
        raise DegenerateInputError("phi1 has zero norm")
    valid = ~(np.isnan(phi0) | np.isnan(phi1))
    p0, p1 = np.where(valid, phi0, 0), np.where(valid, phi1, 0)
    overlap = abs(grid.inner(p0, p1))
    scale = math.sqrt(abs(grid.inner(p0, p0)) * abs(grid.inner(p1, p1)))
    if overlap > ORTHOGONALITY_TOLERANCE * scale:
        raise PreconditionError(f"phi0 and phi1 are not orthogonal (overlap {overlap / scale:.3e})")

    nrm = two_mode_norm(w, alpha)
    tanh_a2 = math.tanh(a2)
    one_body = 2 * V0 * a2 * tanh_a2 * (np.abs(phi0) ** 2 + np.abs(w * phi1) ** 2) / nrm
    combo = phi0**2 + abs(w) ** 2 * phi1**2
    pair = V0 * a2 * np.abs(combo) / nrm
    xi = np.angle(combo)
    intermode = 2 * V0 * a2**2 * math.exp(-a2) / nrm * 2 * float(
        np.real(grid.integrate(np.where(valid, w * phi1**2 * np.conj(phi0) ** 2, 0))))
    nan = np.where(valid, 0.0, np.nan)
    return CompressedCoefficients(family, one_body + nan, pair + nan, xi + nan, 2 * pair + nan,
                                  intermode, params={"V0": V0, "alpha": alpha, "w": w, "norm": nrm})
