"""Background configurations: ground states, Thomas-Fermi profiles and vortex phases.

A :class:`Background` bundles everything the metric and the solver need:
the low- and high-sector densities and phases, the gauge field, the external
potential and the scalar parameters.  Phases follow the polar convention
``psi = sqrt(n) exp(i theta / hbar)``, so a wave function ``phi`` contributes
``theta = hbar * Arg(phi)``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import ConvergenceError, DimensionError, GridError, PreconditionError
from .checks import Check, CheckReport
from .grid import FIXED, NEUMANN, PERIODIC, Grid, divergence, gradient, read_dump, write_dump

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Background:
    grid: Grid
    n_L0: np.ndarray
    theta_L0: np.ndarray
    n_H0: np.ndarray
    theta_H0: np.ndarray
    v: np.ndarray
    V_ext: np.ndarray
    V0: float
    mu: float = 0.0
    m: float = 1.0
    hbar: float = 1.0
    meta: dict = field(default_factory=dict)
    phase_period: float | None = None

    def __post_init__(self):
        g = self.grid
        for name in ("n_L0", "theta_L0", "n_H0", "theta_H0", "V_ext"):
            arr = np.array(np.broadcast_to(np.asarray(getattr(self, name), float), g.shape))
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        v = np.array(np.broadcast_to(np.asarray(self.v, float), (g.ndim,) + g.shape))
        v.flags.writeable = False
        object.__setattr__(self, "v", v)
        if not self.V0 > 0:
            raise PreconditionError(f"V0 must be positive, got {self.V0}")
        if self.m <= 0 or self.hbar <= 0:
            raise PreconditionError("m and hbar must be positive")
        for name in ("n_L0", "n_H0"):
            arr = getattr(self, name)
            if np.any(arr[~np.isnan(arr)] < 0):
                raise PreconditionError(f"{name} has negative values")

    @property
    def mask(self) -> np.ndarray:
        """True on valid cells: every field finite."""
        ok = np.ones(self.grid.shape, bool)
        for arr in (self.n_L0, self.theta_L0, self.n_H0, self.theta_H0, self.V_ext):
            ok &= np.isfinite(arr)
        ok &= np.all(np.isfinite(self.v), axis=0)
        return ok

    @property
    def cs2(self) -> np.ndarray:
        return self.V0 * self.n_H0 / self.m

    def phase_gradient(self) -> np.ndarray:
        """grad(theta_H0), wrap-aware when the phase is only defined modulo ``phase_period``."""
        if self.phase_period is None:
            return gradient(self.theta_H0, self.grid)
        return wrapped_gradient(self.theta_H0, self.grid, self.phase_period)

    def flow(self) -> np.ndarray:
        """u = v - grad(theta_H0) / m."""
        return self.v - self.phase_gradient() / self.m

    def with_fields(self, **kw) -> "Background":
        return replace(self, **kw)

    def save(self, directory) -> Path:
        """Write one grid dump per field plus a key=value manifest."""
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        for name in ("n_L0", "theta_L0", "n_H0", "theta_H0", "V_ext"):
            write_dump(d / f"{name}.grid", getattr(self, name), self.grid)
        for i in range(self.grid.ndim):
            write_dump(d / f"v_{i}.grid", self.v[i], self.grid)
        lines = [f"V0={self.V0!r}", f"mu={self.mu!r}", f"m={self.m!r}", f"hbar={self.hbar!r}"]
        if self.phase_period is not None:
            lines.append(f"phase_period={self.phase_period!r}")
        for key in sorted(self.meta):
            lines.append(f"{key}={self.meta[key]}")
        (d / "background.manifest").write_text("\n".join(lines) + "\n")
        return d

    @classmethod
    def load(cls, directory) -> "Background":
        d = Path(directory)
        raw = dict(line.split("=", 1) for line in (d / "background.manifest").read_text().splitlines() if "=" in line)
        arrays = {}
        grid = None
        for name in ("n_L0", "theta_L0", "n_H0", "theta_H0", "V_ext"):
            arrays[name], grid = read_dump(d / f"{name}.grid")
        v = np.stack([read_dump(d / f"v_{i}.grid")[0] for i in range(grid.ndim)])
        scalars = {k: float(raw.pop(k)) for k in ("V0", "mu", "m", "hbar")}
        if "phase_period" in raw:
            scalars["phase_period"] = float(raw.pop("phase_period"))
        return cls(grid, v=v, meta=raw, **arrays, **scalars)


# --- imaginary-time Gross-Pitaevskii ---------------------------------------

def _link_phases(grid: Grid, v: np.ndarray | None, m: float, hbar: float):
    """Peierls phases (m/hbar) v_i dx_i on the forward links of each axis."""
    if v is None:
        return [None] * grid.ndim
    out = []
    for i in range(grid.ndim):
        vi = v[i]
        ax = i
        vf = 0.5 * (vi + np.roll(vi, -1, axis=ax))
        out.append(np.exp(-1j * (m / hbar) * vf * grid.spacing[i]))
    return out


def _forward_links(psi: np.ndarray, grid: Grid, phases) -> list[np.ndarray]:
    """Covariant forward differences, zero on links that cross a wall."""
    diffs = []
    for i in range(grid.ndim):
        nxt = np.roll(psi, -1, axis=i)
        if phases[i] is not None:
            nxt = nxt * phases[i]
        dl = (nxt - psi) / grid.spacing[i]
        if grid.bc[i] != PERIODIC:
            sl = [slice(None)] * grid.ndim
            sl[i] = -1
            dl[tuple(sl)] = 0.0
        diffs.append(dl)
    return diffs


def _kinetic_apply(psi, grid, phases):
    """-D^2 psi, the gradient of sum |D_+ psi|^2 dV with respect to conj(psi) / dV."""
    out = np.zeros_like(psi)
    for i, dl in enumerate(_forward_links(psi, grid, phases)):
        back = np.roll(dl, 1, axis=i)
        if phases[i] is not None:
            back = back * np.conj(np.roll(phases[i], 1, axis=i))
        if grid.bc[i] != PERIODIC:
            sl = [slice(None)] * grid.ndim
            sl[i] = 0
            back[tuple(sl)] = 0.0
        out += -(dl - back) / grid.spacing[i]
    return out


def _dirichlet_nodes(grid: Grid) -> np.ndarray:
    walls = np.zeros(grid.shape, bool)
    for i, rule in enumerate(grid.bc):
        if rule == FIXED:
            sl = [slice(None)] * grid.ndim
            sl[i] = 0
            walls[tuple(sl)] = True
            sl[i] = -1
            walls[tuple(sl)] = True
    return walls


def gpe_energy(psi, grid: Grid, V_ext, V0: float, n_H=None, v=None, m: float = 1.0, hbar: float = 1.0) -> float:
    """Discrete Gross-Pitaevskii energy functional (no chemical-potential term)."""
    phases = _link_phases(grid, v, m, hbar)
    kin = sum(np.sum(np.abs(dl) ** 2) for dl in _forward_links(psi, grid, phases))
    dens = np.abs(psi) ** 2
    pot = np.sum((m * V_ext + (0 if n_H is None else V0 * n_H)) * dens + 0.5 * V0 * dens**2)
    return float((hbar**2 / (2 * m) * kin + pot) * grid.cell_volume)


def max_stable_dtau(grid: Grid, V_ext, V0: float, density_bound: float, n_H=None,
                    m: float = 1.0, hbar: float = 1.0) -> float:
    """Largest explicit step for which the normalized gradient flow is energy-monotone.

    The flow multiplies each eigencomponent by ``1 - dtau * lambda / hbar``;
    monotonicity needs this to stay in [0, 1] for the largest eigenvalue.
    """
    lam = hbar**2 / (2 * m) * sum(4 / h**2 for h in grid.spacing)
    pot = m * np.nanmax(V_ext) + V0 * (density_bound + (0 if n_H is None else np.nanmax(n_H)))
    return float(min(0.4 * min(grid.spacing) ** 2 * m / hbar, hbar / (lam + max(pot, 0.0))))


@dataclass
class GpeSolution:
    n: np.ndarray
    theta: np.ndarray
    mu: float
    psi: np.ndarray
    energies: list[float]
    residual: float
    iterations: int
    n_H: np.ndarray | None = None
    outer_deltas: list[float] = field(default_factory=list)
    inner_energies: list[list[float]] = field(default_factory=list)
    clamped_cells: int = 0

    def __iter__(self):
        # unpacks as (n_L0, theta_L0, mu)
        return iter((self.n, self.theta, self.mu))

    @property
    def monotone(self) -> bool:
        runs = self.inner_energies or [self.energies]
        return all(np.all(np.diff(e[1:]) <= 1e-12 * max(1.0, abs(e[0]))) for e in runs if len(e) > 2)


def _gradient_flow(psi, grid, V_ext, V0, n_H, v, N_target, dtau, tol, max_iter, m, hbar):
    phases = _link_phases(grid, v, m, hbar)
    walls = _dirichlet_nodes(grid)
    extra = m * V_ext + (0 if n_H is None else V0 * n_H)
    dV = grid.cell_volume

    def H(p):
        return hbar**2 / (2 * m) * _kinetic_apply(p, grid, phases) + (extra + V0 * np.abs(p) ** 2) * p

    def renorm(p):
        p = np.where(walls, 0, p)
        return p * math.sqrt(N_target / (np.sum(np.abs(p) ** 2) * dV))

    psi = renorm(psi.astype(complex))
    energies = [gpe_energy(psi, grid, V_ext, V0, n_H, v, m, hbar)]
    residual = np.inf
    mu = np.nan
    for it in range(1, max_iter + 1):
        hpsi = H(psi)
        mu = float(np.real(np.vdot(psi, hpsi)) * dV / N_target)
        res = np.where(walls, 0, hpsi - mu * psi)
        residual = float(np.sqrt(np.sum(np.abs(res) ** 2) * dV / N_target))
        if residual < tol * max(1.0, abs(mu)):
            return psi, mu, energies, residual, it
        psi = renorm(psi - (dtau / hbar) * hpsi)
        energies.append(gpe_energy(psi, grid, V_ext, V0, n_H, v, m, hbar))
    raise ConvergenceError(f"imaginary-time flow did not converge in {max_iter} steps "
                           f"(residual {residual:.3e})", residual=residual, iterations=max_iter)


def solve_gpe_imaginary_time(grid: Grid, V_ext, V0: float, N_target: float, v=None,
                             dtau: float | None = None, tol: float = 1e-10, n_H=None,
                             mu_H: float | None = None, psi0=None, max_iter: int = 200_000,
                             max_outer: int = 50, damping: float = 0.5, outer_tol: float = 1e-8,
                             m: float = 1.0, hbar: float = 1.0) -> GpeSolution:
    """Ground state of the generalized Gross-Pitaevskii functional by normalized gradient flow.

    Each explicit Euler step of imaginary-time evolution is followed by
    renormalization to ``N_target``; the chemical potential is the converged
    Lagrange multiplier.  Convergence is declared when the eigen-residual
    ``|H psi - mu psi|`` drops below ``tol``.

    When ``n_H`` is supplied, the ``V0 n_H`` term couples the low sector to the
    high-sector density.  If ``mu_H`` is also given, an outer fixed-point loop
    updates ``n_H`` from the Thomas-Fermi relation at chemical potential
    ``mu_H`` with the given damping; otherwise ``n_H`` stays fixed.
    """
    V_ext = np.broadcast_to(np.asarray(V_ext, float), grid.shape)
    if v is not None:
        v = np.broadcast_to(np.asarray(v, float), (grid.ndim,) + grid.shape)
    if not N_target > 0:
        raise PreconditionError("N_target must be positive")
    if psi0 is None:
        psi0 = np.where(_dirichlet_nodes(grid), 0.0, 1.0) + 0j
    psi = np.asarray(psi0, dtype=complex)
    density_bound = 4 * N_target / (grid.volume)
    if n_H is not None:
        n_H = np.array(np.broadcast_to(np.asarray(n_H, float), grid.shape))
    bound = max_stable_dtau(grid, V_ext, V0, max(density_bound, float(np.max(np.abs(psi)) ** 2)), n_H, m, hbar)
    if dtau is None:
        dtau = 0.9 * bound
    elif dtau > bound:
        raise PreconditionError(f"dtau={dtau:g} exceeds the stability bound {bound:g}")

    psi, mu, energies, residual, iters = _gradient_flow(
        psi, grid, V_ext, V0, n_H, v, N_target, dtau, tol, max_iter, m, hbar)
    sol = GpeSolution(np.abs(psi) ** 2, hbar * np.angle(psi), mu, psi, energies, residual, iters,
                      n_H=n_H, inner_energies=[energies])
    if n_H is None or mu_H is None:
        return sol

    for outer in range(max_outer):
        n_new, clamped = thomas_fermi_density(mu_H, V_ext, V0, sol.n, return_clamped=True)
        delta = float(np.max(np.abs(n_new - n_H)))
        sol.outer_deltas.append(delta)
        sol.clamped_cells = clamped
        if delta < outer_tol:
            break
        n_H = (1 - damping) * n_H + damping * n_new
        bound = max_stable_dtau(grid, V_ext, V0, float(np.max(sol.n)), n_H, m, hbar)
        psi, mu, energies, residual, it = _gradient_flow(
            sol.psi, grid, V_ext, V0, n_H, v, N_target, min(dtau, 0.9 * bound), tol, max_iter, m, hbar)
        sol.inner_energies.append(energies)
        sol.psi, sol.mu, sol.residual = psi, mu, residual
        sol.iterations += it
        sol.n, sol.theta, sol.energies, sol.n_H = np.abs(psi) ** 2, hbar * np.angle(psi), energies, n_H
    else:
        raise ConvergenceError(f"self-consistency loop did not settle in {max_outer} iterations "
                               f"(last sup-norm change {sol.outer_deltas[-1]:.3e})",
                               residual=sol.outer_deltas[-1], iterations=max_outer)
    if sol.clamped_cells:
        log.info("Thomas-Fermi update clamped %d cells to zero density", sol.clamped_cells)
    return sol


def thomas_fermi_density(mu: float, V_ext, V0: float, n_L0=0.0, return_clamped: bool = False):
    """High-sector density (mu - V_ext - V0 n_L0) / (2 V0), negative values clamped to 0.

    The high sector uses the factor 1/(2 V0); the conventional
    single-component profile (mu - V_ext) / V0 lacks the 2, and
    :func:`validate_assumptions` notes this in its report.
    """
    raw = (mu - np.asarray(V_ext, float) - V0 * np.asarray(n_L0, float)) / (2 * V0)
    clamped = raw < 0
    out = np.where(clamped, 0.0, raw)
    if return_clamped:
        return out, int(np.count_nonzero(clamped))
    return out


# --- analytic vortex backgrounds ---------------------------------------------

def _require_2d(grid: Grid):
    if grid.ndim != 2:
        raise DimensionError(f"needs a 2-D grid, got d={grid.ndim}")


def vortex_wavefunction(n: int, A: float, grid: Grid, xi0: float = 1.0) -> np.ndarray:
    """A exp(i n phi) sqrt(1 - n^2 xi0^2 / r^2), masked (NaN) inside the core r <= |n| xi0."""
    _require_2d(grid)
    x1, x2 = grid.coords
    r2 = x1**2 + x2**2
    core = r2 <= (n * xi0) ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        amp = A * np.sqrt(np.where(core, np.nan, 1 - (n * xi0) ** 2 / r2))
    return amp * np.exp(1j * n * np.arctan2(x2, x1))


def vortnovort_terms(w: float, x1, x2):
    """Numerator and denominator inside the half-arctangent superposition phase."""
    r2 = x1**2 + x2**2
    num = 2 * w**2 * (r2 - 1) * x1 * x2
    den = (1 - w**2) * x1**2 + (1 + w**2) * x2**2 + w**2 * (x1**4 - x2**4)
    return num, den


def vortnovort_phase(w: float, grid: Grid, core_radius: float = 1.0, return_masks: bool = False):
    """Phase of a unit vortex superposed with a constant mode, in units xi0 = 1.

    ``theta = atan2(num, den) / 2`` with the quadrant-correct two-argument
    arctangent.  The core ``r <= core_radius`` is NaN.  With ``return_masks``
    also returns a dict with the core mask and the branch-cut mask (cells
    whose stencil straddles a jump of the two-argument arctangent).
    """
    _require_2d(grid)
    x1, x2 = grid.coords
    num, den = vortnovort_terms(w, x1, x2)
    theta = 0.5 * np.arctan2(num, den)
    core = grid.radius <= core_radius
    theta = np.where(core, np.nan, theta)
    if not return_masks:
        return theta
    return theta, {"core": core, "branch_cut": branch_cut_mask(theta, grid, period=np.pi)}


def branch_cut_mask(theta: np.ndarray, grid: Grid, period: float) -> np.ndarray:
    """Cells adjacent to a jump of more than a quarter period in ``theta``."""
    cut = np.zeros(grid.shape, bool)
    for i in range(grid.ndim):
        jump = np.abs(np.diff(theta, axis=i)) > period / 4
        jump = np.nan_to_num(jump, nan=False).astype(bool)
        lo = [slice(None)] * grid.ndim
        hi = [slice(None)] * grid.ndim
        lo[i] = slice(0, -1)
        hi[i] = slice(1, None)
        cut[tuple(lo)] |= jump
        cut[tuple(hi)] |= jump
    return cut


def wrapped_gradient(theta: np.ndarray, grid: Grid, period: float) -> np.ndarray:
    """Central-difference gradient of a phase defined modulo ``period``.

    Neighbour differences are wrapped into (-period/2, period/2], so branch
    cuts of the representation do not produce spurious spikes.
    """
    out = np.empty((grid.ndim,) + grid.shape)
    for i in range(grid.ndim):
        h = grid.spacing[i]
        fwd = np.roll(theta, -1, axis=i) - theta
        fwd = (fwd + period / 2) % period - period / 2
        back = np.roll(fwd, 1, axis=i)
        g = (fwd + back) / (2 * h)
        if grid.bc[i] != PERIODIC:
            gm = np.moveaxis(g, i, 0)
            fm = np.moveaxis(fwd, i, 0)
            if grid.bc[i] == NEUMANN:
                gm[0] = gm[-1] = 0.0
            else:
                gm[0] = (3 * fm[0] - fm[1]) / (2 * h)
                gm[-1] = (3 * fm[-2] - fm[-3]) / (2 * h)
        out[i] = g
    return out


def superposition_phase(w: complex, phi0: np.ndarray, phi1: np.ndarray, k: int = 0, hbar: float = 1.0):
    """hbar Arg(phi0^2 + |w|^2 phi1^2) / 2 + (2k+1) hbar pi / 2."""
    combo = phi0**2 + abs(w) ** 2 * phi1**2
    return hbar * np.angle(combo) / 2 + (2 * k + 1) * hbar * np.pi / 2


def compare_superposition_phase(w: float, grid: Grid, core_radius: float = 1.0) -> dict:
    """Pointwise comparison of the closed-form phase with half the argument of phi0^2 + w^2 phi1^2.

    phi0 is the n=1 vortex (unit amplitude), phi1 the unit constant mode.  The
    difference is reported modulo pi (both phases are defined modulo pi).
    """
    closed = vortnovort_phase(w, grid, core_radius)
    phi0 = vortex_wavefunction(1, 1.0, grid)
    from_modes = 0.5 * np.angle(phi0**2 + w**2)
    diff = (closed - from_modes + np.pi / 2) % np.pi - np.pi / 2
    valid = np.isfinite(diff) & (grid.radius > core_radius)
    return {"max_abs_difference": float(np.max(np.abs(diff[valid]))) if valid.any() else 0.0,
            "difference": np.where(valid, diff, np.nan)}


def phase_match(theta_L0, k: int = 0, hbar: float = 1.0) -> np.ndarray:
    """theta_H0 = theta_L0 + (2k+1) pi hbar / 2, the lowest-energy relative phase."""
    return np.asarray(theta_L0, float) + (2 * k + 1) * np.pi * hbar / 2


# --- validity checks ------------------------------------------------------------

def _offmask_max(arr, valid):
    sel = np.abs(arr[valid & np.isfinite(arr)])
    return float(sel.max()) if sel.size else 0.0


def quantum_pressure_ratio(n: np.ndarray, grid: Grid, V0: float, m: float = 1.0, hbar: float = 1.0) -> np.ndarray:
    """(hbar^2 |grad n|^2 / (8 m n)) / (V0 n^2 / 2) cellwise; NaN where n <= 0."""
    gn = gradient(n, grid)
    with np.errstate(divide="ignore", invalid="ignore"):
        qp = hbar**2 * np.sum(gn**2, axis=0) / (8 * m * n)
        return np.where(n > 0, qp / (0.5 * V0 * n**2), np.nan)


def two_loop_ratio(bg: Background, amplitude: float, wavenumber: float = 1.0) -> np.ndarray:
    """Bound on the two-phase-one-amplitude vertex relative to the quadratic action density.

    A fluctuation with phase amplitude ``amplitude * hbar``, density amplitude
    ``amplitude * n_H0`` and wavenumber ``wavenumber`` gives a cubic density of
    at most ``(1/3!) (1/m) |n_d| 2 k^2 theta_d^2`` against the quadratic
    ``(V0 n_d^2 + (n_H0/m) k^2 theta_d^2) / 2``.
    """
    n = bg.n_H0
    th = amplitude * bg.hbar
    nd = amplitude * n
    k2 = wavenumber**2
    cubic = (1 / 6) * (1 / bg.m) * nd * 2 * k2 * th**2
    quad = 0.5 * (bg.V0 * nd**2 + n / bg.m * k2 * th**2)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(quad > 0, cubic / quad, np.nan)


def validate_assumptions(bg: Background, tol: float = 1e-2, fluctuation_amplitude: float = 1e-2,
                         wavenumber: float = 1.0, harmonic_tol: float | None = None) -> CheckReport:
    """Check the assumptions behind the metric construction; never raises.

    divergence_free_v    max |div v|                    <= tol * max|v| / min dx (absolute if v == 0)
    harmonic_theta       max |lap theta_H0| off-mask    <= harmonic_tol (default: tol / min dx^2 scale)
    quantum_pressure     max quantum-pressure ratio     <= tol
    two_loop             max two-loop ratio             <= tol
    """
    g = bg.grid
    valid = bg.mask & (bg.n_H0 > 0)
    hmin = min(g.spacing)
    notes = []

    div_v = divergence(bg.v, g)
    vscale = float(np.nanmax(np.abs(bg.v))) if np.any(bg.v) else 0.0
    div_tol = tol * (vscale / hmin if vscale > 0 else 1.0)
    div_res = _offmask_max(div_v, valid)

    grad_theta = bg.phase_gradient()
    lap = divergence(grad_theta, g)
    # cells whose stencil touches the mask are already NaN
    lap_res = _offmask_max(lap, valid)
    finite = np.abs(grad_theta[np.isfinite(grad_theta)])
    th_scale = float(finite.max()) if finite.size and finite.max() > 0 else 1.0
    lap_tol = harmonic_tol if harmonic_tol is not None else tol * th_scale / hmin

    qp = quantum_pressure_ratio(bg.n_H0, g, bg.V0, bg.m, bg.hbar)
    qp_res = _offmask_max(qp, valid)

    tl = two_loop_ratio(bg, fluctuation_amplitude, wavenumber)
    tl_res = _offmask_max(tl, valid)

    checks = [
        Check("divergence_free_v", div_res, div_tol, div_res <= div_tol),
        Check("harmonic_theta", lap_res, lap_tol, lap_res <= lap_tol),
        Check("quantum_pressure", qp_res, tol, qp_res <= tol),
        Check("two_loop", tl_res, tol, tl_res <= tol),
    ]
    if bg.meta.get("thomas_fermi"):
        notes.append("n_H0 uses the 1/(2 V0) Thomas-Fermi factor; the single-component profile would use 1/V0")
    return CheckReport(checks, {"div_v": div_v, "laplacian_theta": lap, "quantum_pressure": qp,
                                   "two_loop": tl}, notes)


def temperature_bound(bg: Background, kT: float, threshold: float = 0.1) -> dict:
    """kT / (V0 min(n_H0 n_L0)); valid only if strictly below ``threshold``."""
    prod = (bg.n_H0 * bg.n_L0)[bg.mask]
    floor = float(prod.min()) if prod.size else 0.0
    if kT == 0:
        return {"valid": True, "ratio": 0.0}
    if floor <= 0:
        return {"valid": False, "ratio": math.inf}
    ratio = kT / (bg.V0 * floor)
    return {"valid": ratio < threshold, "ratio": ratio}


def uniform_background(grid: Grid, n_L0: float, n_H0: float, V0: float, k: int = 0,
                       v=0.0, mu: float | None = None, m: float = 1.0, hbar: float = 1.0, **meta) -> Background:
    """Constant densities, phase-matched constant phases, constant gauge field.

    ``mu`` defaults to the value that makes the configuration stationary:
    mu = m V_ext + m v^2 / 2 + V0 n_H0 + V0 n_L0 (V_ext = 0).
    """
    v = np.broadcast_to(np.asarray(v, float), (grid.ndim,))
    if mu is None:
        mu = 0.5 * m * float(np.sum(v**2)) + V0 * (n_H0 + n_L0)
    theta_L = np.zeros(grid.shape)
    return Background(grid, np.full(grid.shape, float(n_L0)), theta_L, np.full(grid.shape, float(n_H0)),
                      phase_match(theta_L, k, hbar), v.reshape((-1,) + (1,) * grid.ndim) * np.ones(grid.shape),
                      np.zeros(grid.shape), V0, mu, m, hbar, dict(meta, family="uniform", k=k))


def check_grid(bg: Background, grid: Grid):
    if bg.grid.shape != grid.shape:
        raise GridError("background and configuration live on different grids")
