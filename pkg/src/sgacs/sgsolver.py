"""Real-time sine-Gordon evolution on an acoustic background.

Everything is normalized by V0: the field ``theta`` obeys the Euler-Lagrange
equation of the discrete Lagrangian

    L = dV sum[ 1/2 thetadot^2 - thetadot (u . grad theta) ] - V[theta]
    V = dV sum[ 1/2 grad theta . (cs2 I - u u^T) grad theta + U(theta) ]
    U = (V0 lam / 2) (1 - cos(2 theta / hbar)),   lam = 2 V0 n_H0 n_L0

i.e. the f-tensor divergence form multiplied through by V0.  With
``B theta + b = u . grad theta`` (central differences) the Lagrangian is
discretized as

    L = dV sum[ 1/2 (thetadot - B theta - b)^2 - 1/2 cs2 |D theta + d|^2 ] - dV sum U

where ``D`` are forward differences and ``cs2`` is averaged onto the links.
Writing the flow terms through the same ``B`` that carries the advection keeps
every Fourier mode of a uniform flow oscillatory, including inside
ergoregions.  The equation of motion is

    thetadot' = A thetadot + K theta + k - U'(theta),   A = B - B^T.

Time stepping is a staggered leapfrog: ``pi`` lives on half steps, and the
antisymmetric ``A`` term is averaged between the two half steps (a
Crank-Nicolson solve with a prefactorized matrix, skipped when the flow
vanishes).  The scheme is time reversible, and the advective term does not
change the energy ``dV sum 1/2 thetadot^2 + V``.

A twisted periodic axis carries a field with ``theta(x + L) = theta(x) + twist``;
a single kink on a ring uses ``twist = pi hbar``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .action import functional_gradient
from .background import Background
from .checks import Check, CheckReport
from .errors import BlowUpError, CflError, PreconditionError
from .grid import FIXED, PERIODIC, Grid, central_difference_matrix, forward_difference_matrix

log = logging.getLogger(__name__)

SPONGE_CELLS = 8
MAX_CFL = 0.5


@dataclass(frozen=True, eq=False)
class SgMedium:
    """Coefficient fields and the sparse operators assembled from them."""

    grid: Grid
    cs2: np.ndarray
    u: np.ndarray
    coupling: np.ndarray
    V0: float = 1.0
    hbar: float = 1.0
    twist: tuple[float, ...] | None = None
    sponge_strength: float = 0.0

    def __post_init__(self):
        g = self.grid
        object.__setattr__(self, "cs2", np.array(np.broadcast_to(np.asarray(self.cs2, float), g.shape)))
        object.__setattr__(self, "u", np.array(np.broadcast_to(np.asarray(self.u, float), (g.ndim,) + g.shape)))
        object.__setattr__(self, "coupling", np.array(np.broadcast_to(np.asarray(self.coupling, float), g.shape)))
        twist = tuple(float(t) for t in self.twist) if self.twist is not None else (0.0,) * g.ndim
        for t, rule in zip(twist, g.bc):
            if t and rule != PERIODIC:
                raise PreconditionError("a twist needs a periodic axis")
        object.__setattr__(self, "twist", twist)
        for name in ("cs2", "u", "coupling"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise PreconditionError(f"{name} must be finite everywhere for the solver")
        if np.any(self.cs2 <= 0):
            raise PreconditionError("sound speed must be positive on every cell")
        if np.any(self.coupling < 0):
            raise PreconditionError("sine-Gordon coupling must be non-negative")

    @classmethod
    def from_background(cls, bg: Background, twist=None, sponge_strength: float = 0.0) -> "SgMedium":
        """Coefficients of a background; masked or soundless cells become fluid at rest.

        Those cells get the median sound speed of the valid cells, no flow and
        no sine-Gordon coupling, so the solver sees finite coefficients
        everywhere.
        """
        cs2 = bg.cs2
        u = bg.flow()
        lam = 2 * bg.V0 * bg.n_H0 * bg.n_L0
        bad = ~bg.mask | ~(cs2 > 0) | ~np.all(np.isfinite(u), axis=0) | ~np.isfinite(lam)
        if np.all(bad):
            raise PreconditionError("background has no valid cell to evolve on")
        cs2 = np.where(bad, float(np.median(cs2[~bad])), cs2)
        u = np.where(bad, 0.0, u)
        lam = np.where(bad, 0.0, lam)
        return cls(bg.grid, cs2, u, lam, bg.V0, bg.hbar, twist, sponge_strength)

    @classmethod
    def from_f_tensor(cls, grid: Grid, f: np.ndarray, coupling, V0: float, hbar: float = 1.0,
                      twist=None, sponge_strength: float = 0.0) -> "SgMedium":
        """Read cs2 and u back from ``f`` (tensor indices trailing)."""
        F = V0 * f
        u = np.moveaxis(F[..., 0, 1:], -1, 0)
        cs2 = F[..., 1, 1] + u[0] ** 2
        return cls(grid, cs2, u, coupling, V0, hbar, twist, sponge_strength)

    # --- assembled operators ---
    @cached_property
    def frozen(self) -> np.ndarray:
        """Wall nodes of fixed-value axes, held at their initial value."""
        out = np.zeros(self.grid.shape, bool)
        for axis, rule in enumerate(self.grid.bc):
            if rule == FIXED:
                idx = [slice(None)] * self.grid.ndim
                idx[axis] = [0, -1]
                out[tuple(idx)] = True
        return out.ravel()

    @cached_property
    def _differences(self):
        g = self.grid
        fwd = [forward_difference_matrix(g, i, self.twist[i]) for i in range(g.ndim)]
        cen = [central_difference_matrix(g, i, self.twist[i]) for i in range(g.ndim)]
        return fwd, cen

    def _face_average(self, arr: np.ndarray, axis: int) -> np.ndarray:
        nxt = np.roll(arr, -1, axis=axis)
        return 0.5 * (arr + nxt)

    @cached_property
    def stiffness(self):
        """(K, k) with the quadratic part of V having gradient ``-(K theta + k) dV``."""
        g = self.grid
        fwd, _ = self._differences
        K = sp.csr_matrix((g.size, g.size))
        k = np.zeros(g.size)
        for i in range(g.ndim):
            D, d = fwd[i]
            face = sp.diags(self._face_average(self.cs2, i).ravel())
            K = K - D.T @ face @ D
            k = k - D.T @ (face @ d)
        B, b = self.advection
        return sp.csr_matrix(K + B.T @ B), k + B.T @ b

    @cached_property
    def advection(self):
        """(B, b) with ``u . grad theta = B theta + b``."""
        g = self.grid
        _, cen = self._differences
        B = sp.csr_matrix((g.size, g.size))
        b = np.zeros(g.size)
        for i in range(g.ndim):
            C, c = cen[i]
            ui = sp.diags(self.u[i].ravel())
            B = B + ui @ C
            b = b + self.u[i].ravel() * c
        return sp.csr_matrix(B), b

    @cached_property
    def has_flow(self) -> bool:
        return bool(np.any(self.u != 0))

    @cached_property
    def skew(self) -> sp.csr_matrix:
        B, _ = self.advection
        return sp.csr_matrix(B - B.T)

    @cached_property
    def sponge(self) -> np.ndarray:
        """Damping rate ramping quadratically over the last cells before fixed walls."""
        g = self.grid
        sigma = np.zeros(g.shape)
        if self.sponge_strength <= 0:
            return sigma.ravel()
        for axis, rule in enumerate(g.bc):
            if rule != FIXED:
                continue
            n = g.shape[axis]
            idx = np.arange(n)
            dist = np.minimum(idx, n - 1 - idx)
            ramp = np.clip((SPONGE_CELLS - dist) / SPONGE_CELLS, 0, None) ** 2
            shape = [1] * g.ndim
            shape[axis] = n
            sigma = np.maximum(sigma, self.sponge_strength * ramp.reshape(shape))
        return sigma.ravel()

    # --- physics ---
    @property
    def mass2(self) -> np.ndarray:
        """Small-amplitude mass squared, 2 V0 lam / hbar^2."""
        return 2 * self.V0 * self.coupling / self.hbar**2

    def potential_force(self, theta: np.ndarray) -> np.ndarray:
        """-U'(theta) on the flattened field."""
        lam = self.coupling.ravel()
        return -(self.V0 * lam / self.hbar) * np.sin(2 * theta / self.hbar)

    def force(self, theta: np.ndarray) -> np.ndarray:
        """-(1/dV) dV/dtheta on the flattened field; zero on frozen walls."""
        K, k = self.stiffness
        out = K @ theta + k + self.potential_force(theta)
        out[self.frozen] = 0.0
        return out

    def potential_energy(self, theta: np.ndarray) -> float:
        g = self.grid
        fwd, _ = self._differences
        total = 0.0
        for i in range(g.ndim):
            D, d = fwd[i]
            total += 0.5 * np.sum(self._face_average(self.cs2, i).ravel() * (D @ theta + d) ** 2)
        B, b = self.advection
        total -= 0.5 * np.sum((B @ theta + b) ** 2)
        lam = self.coupling.ravel()
        total += np.sum(0.5 * self.V0 * lam * (1 - np.cos(2 * theta / self.hbar)))
        return float(total * g.cell_volume)

    def lagrangian(self, theta: np.ndarray, theta_dot: np.ndarray) -> float:
        """Discrete Lagrangian whose Euler-Lagrange equations the stepper integrates."""
        B, b = self.advection
        kinetic = np.sum(0.5 * theta_dot**2 - theta_dot * (B @ theta + b)) * self.grid.cell_volume
        return float(kinetic) - self.potential_energy(theta)

    def max_stable_dt(self, cfl: float = MAX_CFL) -> float:
        g = self.grid
        speed = float(np.max(np.sqrt(self.cs2) + np.sqrt(np.sum(self.u**2, axis=0))))
        return cfl * min(g.spacing) / speed

    def check_dt(self, dt: float, cfl: float = MAX_CFL):
        if cfl > MAX_CFL:
            raise CflError(f"CFL number {cfl} exceeds {MAX_CFL}")
        bound = self.max_stable_dt(cfl)
        if not 0 < dt <= bound * (1 + 1e-12):
            raise CflError(f"time step {dt} violates the CFL bound {bound}")
        # leapfrog with a mass term: dt^2 (cs2 k_max^2 + M^2) < 4
        stiff = float(np.max(self.cs2)) * sum(4 / h**2 for h in self.grid.spacing)
        if dt**2 * (stiff + float(np.max(self.mass2))) >= 4:
            raise CflError(f"time step {dt} is unstable for the mass term")

    def _cn_for(self, dt: float):
        I = sp.identity(self.grid.size, format="csc")
        A = self.skew.tocsc()
        return spla.splu(sp.csc_matrix(I - 0.5 * dt * A)), sp.csr_matrix(I + 0.5 * dt * A)

    def solver_for(self, dt: float):
        """Cached Crank-Nicolson factors for the advective term at step ``dt``."""
        cache = self.__dict__.setdefault("_cn_cache", {})
        if dt not in cache:
            cache[dt] = self._cn_for(dt)
        return cache[dt]


@dataclass(frozen=True, eq=False)
class SgState:
    """Field at integer time ``t``, rate at ``t - dt/2`` (staggered leapfrog)."""

    medium: SgMedium
    theta: np.ndarray
    pi: np.ndarray
    t: float
    dt: float
    cfl: float = MAX_CFL

    def __post_init__(self):
        shape = self.medium.grid.shape
        for name in ("theta", "pi"):
            arr = np.array(np.broadcast_to(np.asarray(getattr(self, name), float), shape))
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        self.medium.check_dt(self.dt, self.cfl)

    @property
    def grid(self) -> Grid:
        return self.medium.grid

    @property
    def coupling(self) -> np.ndarray:
        return self.medium.coupling

    @property
    def u(self) -> np.ndarray:
        return self.medium.u

    @property
    def cs2(self) -> np.ndarray:
        return self.medium.cs2

    def reversed(self) -> "SgState":
        """Time-reversed state: rates negated and the background flow reversed.

        The rate at t + dt/2, negated, becomes the new rate at t - dt/2.
        """
        ahead = _kick(self.medium, self.theta.ravel(), self.pi.ravel(), self.dt)
        medium = replace(self.medium, u=-self.medium.u) if self.medium.has_flow else self.medium
        return replace(self, medium=medium, pi=-ahead.reshape(self.grid.shape))


def _kick(medium: SgMedium, theta: np.ndarray, pi: np.ndarray, dt: float) -> np.ndarray:
    """Rate at the next half step from the rate at the previous one."""
    if medium.has_flow:
        lu, plus = medium.solver_for(dt)
        rhs = lu.solve(plus @ pi + dt * medium.force(theta))
    else:
        rhs = pi + dt * medium.force(theta)
    sigma = medium.sponge
    if np.any(sigma):
        rhs = rhs * np.exp(-sigma * dt)
    rhs[medium.frozen] = 0.0
    return rhs


def step(state: SgState, dt: float | None = None) -> SgState:
    """Advance one leapfrog step; raises on CFL violation or nonfinite fields."""
    dt = state.dt if dt is None else dt
    if dt != state.dt:
        state = replace(state, dt=dt)
    med = state.medium
    pi_new = _kick(med, state.theta.ravel(), state.pi.ravel(), dt)
    theta_new = state.theta.ravel() + dt * pi_new
    if not (np.all(np.isfinite(theta_new)) and np.all(np.isfinite(pi_new))):
        raise BlowUpError(f"nonfinite field at t = {state.t + dt}", last_good=state)
    shape = med.grid.shape
    return replace(state, theta=theta_new.reshape(shape), pi=pi_new.reshape(shape), t=state.t + dt)


def evolve(state: SgState, steps: int, record_every: int = 0):
    """Run ``steps`` steps; returns the final state and a list of diagnostics rows."""
    rows = []
    if record_every:
        rows.append(diagnostics(state))
    for i in range(1, steps + 1):
        state = step(state)
        if record_every and i % record_every == 0:
            rows.append(diagnostics(state))
    return state, rows


def rate_at(state: SgState) -> np.ndarray:
    """thetadot at integer time: mean of the two neighbouring half-step rates."""
    ahead = _kick(state.medium, state.theta.ravel(), state.pi.ravel(), state.dt)
    return 0.5 * (state.pi.ravel() + ahead)


def energy(state: SgState) -> float:
    """Discrete first integral ``dV sum 1/2 pi^+ (pi^+ - dt F(theta)) + V[theta]`` (static backgrounds).

    Without flow this is ``1/2 pi^- pi^+``.  It is exactly conserved on
    linear problems, with or without flow, and oscillates at O(dt^2)
    otherwise; squaring the mean rate instead would not be conserved.
    """
    med = state.medium
    theta = state.theta.ravel()
    ahead = _kick(med, theta, state.pi.ravel(), state.dt)
    kinetic = 0.5 * float(np.dot(ahead, ahead - state.dt * med.force(theta))) * state.grid.cell_volume
    return kinetic + med.potential_energy(theta)


def topological_charge(state: SgState, axis: int = 0) -> float:
    """Winding of phi = 2 theta / hbar along ``axis``, in units of 2 pi, averaged over the other axes."""
    g = state.grid
    hbar = state.medium.hbar
    th = np.moveaxis(state.theta, axis, 0)
    total = th[-1] - th[0]
    if g.bc[axis] == PERIODIC:
        total = total + (th[0] + state.medium.twist[axis] - th[-1])
    return float(np.mean(total)) / (math.pi * hbar)


def diagnostics(state: SgState) -> dict:
    return {"t": state.t, "energy": energy(state), "charge": topological_charge(state),
            "min": float(state.theta.min()), "max": float(state.theta.max())}


def timeseries_csv(rows: list[dict]) -> str:
    out = ["t,energy,charge,min,max"]
    out += [f"{r['t']!r},{r['energy']!r},{r['charge']!r},{r['min']!r},{r['max']!r}" for r in rows]
    return "\n".join(out) + "\n"


# --- kinks -----------------------------------------------------------------------

def kink_mass(medium: SgMedium) -> float:
    """Inverse kink width at rest, mu_m = M / cs."""
    return float(np.sqrt(np.max(medium.mass2) / np.max(medium.cs2)))


def kink_profile(x: np.ndarray, center: float, length: float | None, slope: float, hbar: float = 1.0):
    """theta of a kink centred at ``center``; ``slope = gamma mu_m``.

    On a ring of ``length`` the nearest image of the kink is used and the
    field is continued with the pi-hbar twist, so the result is consistent
    with a twisted periodic axis.  Returns (theta, dtheta/dx).
    """
    s = x - center
    jump = np.zeros_like(s)
    if length is not None:
        wraps = np.floor((s + 0.5 * length) / length)
        s = s - wraps * length
        jump = wraps * math.pi * hbar
    theta = 2 * hbar * np.arctan(np.exp(slope * s)) + jump
    dtheta = hbar * slope / np.cosh(slope * s)
    return theta, dtheta


def kink_initial_condition(u_kink: float, x0: float, medium: SgMedium, dt: float,
                           cfl: float = MAX_CFL) -> SgState:
    """Travelling kink on a uniform 1-D medium without flow, as a leapfrog state."""
    g = medium.grid
    if g.ndim != 1:
        raise PreconditionError("kinks are launched on 1-D grids")
    if np.ptp(medium.cs2) or np.ptp(medium.coupling) or medium.has_flow:
        raise PreconditionError("kink launch needs a uniform medium at rest")
    cs = math.sqrt(float(medium.cs2.flat[0]))
    if abs(u_kink) >= cs:
        raise PreconditionError(f"kink speed {u_kink} must be below the sound speed {cs}")
    gamma = 1 / math.sqrt(1 - (u_kink / cs) ** 2)
    slope = gamma * kink_mass(medium)
    length = g.spacing[0] * g.shape[0] if g.bc[0] == PERIODIC else None
    if length is not None and abs(medium.twist[0] - math.pi * medium.hbar) > 1e-12:
        raise PreconditionError("a kink on a ring needs a twist of pi hbar")
    x = g.axis_coords(0)
    theta, _ = kink_profile(x, x0, length, slope, medium.hbar)
    _, dtheta = kink_profile(x, x0 - 0.5 * u_kink * dt, length, slope, medium.hbar)
    return SgState(medium, theta, -u_kink * dtheta, 0.0, dt, cfl)


def kink_reference(state: SgState, u_kink: float, x0: float) -> np.ndarray:
    """Analytic kink at the state's time."""
    med = state.medium
    g = med.grid
    cs = math.sqrt(float(med.cs2.flat[0]))
    slope = kink_mass(med) / math.sqrt(1 - (u_kink / cs) ** 2)
    length = g.spacing[0] * g.shape[0] if g.bc[0] == PERIODIC else None
    return kink_profile(g.axis_coords(0), x0 + u_kink * state.t, length, slope, med.hbar)[0]


def kink_shape_error(state: SgState, u_kink: float, x0: float) -> float:
    """RMS error of phi = 2 theta / hbar against the analytic kink."""
    ref = kink_reference(state, u_kink, x0)
    return float(np.sqrt(np.mean((2 * (state.theta - ref) / state.medium.hbar) ** 2)))


def standing_wave_frequency(medium: SgMedium, mode: int, amplitude: float = 1e-6, periods: float = 20.0,
                            dt: float | None = None, base: float = 0.0) -> float:
    """Measured angular frequency of a small cosine standing wave on a periodic 1-D medium.

    The field starts at rest as ``base + amplitude cos(k x)``; the frequency is
    recovered from the zero crossings of the mode's projection, refined by
    linear interpolation.
    """
    g = medium.grid
    x = g.axis_coords(0)
    k = 2 * math.pi * mode / (g.spacing[0] * g.shape[0])
    shape = np.cos(k * x)
    dt = dt or medium.max_stable_dt() / 4
    omega_guess = math.sqrt(float(np.max(medium.cs2)) * k * k + float(np.max(medium.mass2)))
    steps = int(math.ceil(periods * 2 * math.pi / omega_guess / dt))
    theta0 = base + amplitude * shape
    # start at rest: the rate at -dt/2 is the negated rate at +dt/2 to second order
    pi0 = -0.5 * dt * medium.force(theta0.ravel())
    state = SgState(medium, theta0, pi0, 0.0, dt)
    proj = [float(np.dot(state.theta - base, shape))]
    for _ in range(steps):
        state = step(state)
        proj.append(float(np.dot(state.theta - base, shape)))
    p = np.array(proj)
    t = dt * np.arange(len(p))
    idx = np.nonzero(np.sign(p[:-1]) * np.sign(p[1:]) < 0)[0]
    crossings = t[idx] - p[idx] * dt / (p[idx + 1] - p[idx])
    if len(crossings) < 3:
        raise PreconditionError("too few oscillations recorded to measure a frequency")
    half_period = (crossings[-1] - crossings[0]) / (len(crossings) - 1)
    return math.pi / half_period


def effective_wavenumber(k: float, dx: float) -> float:
    """Discrete symbol of the compact three-point Laplacian, 2 sin(k dx / 2) / dx."""
    return 2 * math.sin(0.5 * k * dx) / dx


# --- tunnel-coupled planes --------------------------------------------------------

def junction_potential(gamma: np.ndarray, gamma0: np.ndarray) -> np.ndarray:
    """-cos g0 (1 - cos g) + sin g0 (g - sin g): the remainder of cos(g0 + g) past linear order."""
    return -np.cos(gamma0) * (1 - np.cos(gamma)) + np.sin(gamma0) * (gamma - np.sin(gamma))


def junction_derivative(gamma: np.ndarray, gamma0: np.ndarray) -> np.ndarray:
    return -np.cos(gamma0) * np.sin(gamma) + np.sin(gamma0) * (1 - np.cos(gamma))


@dataclass(frozen=True, eq=False)
class PlanesMedium:
    left: SgMedium
    right: SgMedium
    t_perp: float
    n_L: np.ndarray
    n_R: np.ndarray
    gamma0: np.ndarray

    def __post_init__(self):
        g = self.left.grid
        if self.right.grid != g:
            raise PreconditionError("planes must share a grid")
        for name in ("n_L", "n_R", "gamma0"):
            object.__setattr__(self, name, np.array(np.broadcast_to(np.asarray(getattr(self, name), float), g.shape)))

    @property
    def grid(self) -> Grid:
        return self.left.grid

    @property
    def hbar(self) -> float:
        return self.left.hbar

    @property
    def V0(self) -> float:
        return self.left.V0

    @cached_property
    def junction(self) -> np.ndarray:
        return (self.V0 * self.t_perp * np.sqrt(self.n_L * self.n_R)).ravel()

    def coupling_force(self, theta_L: np.ndarray, theta_R: np.ndarray) -> np.ndarray:
        """Force on the left plane; the right plane receives its negative."""
        gamma = (theta_L - theta_R) / self.hbar
        return -self.junction * junction_derivative(gamma, self.gamma0.ravel()) / self.hbar

    def coupling_energy(self, theta_L: np.ndarray, theta_R: np.ndarray) -> float:
        gamma = (theta_L - theta_R) / self.hbar
        return float(np.sum(self.junction * junction_potential(gamma, self.gamma0.ravel())) * self.grid.cell_volume)

    def lagrangian(self, theta_L, theta_R, rate_L, rate_R) -> float:
        return (self.left.lagrangian(theta_L, rate_L) + self.right.lagrangian(theta_R, rate_R)
                - self.coupling_energy(theta_L, theta_R))

    def forces(self, theta_L, theta_R):
        c = self.coupling_force(theta_L, theta_R)
        fl = self.left.force(theta_L) + np.where(self.left.frozen, 0.0, c)
        fr = self.right.force(theta_R) - np.where(self.right.frozen, 0.0, c)
        return fl, fr

    def small_oscillation_omega2(self) -> float:
        """Frequency squared of uniform relative-phase oscillations on identical uniform planes.

        Each plane's own sine-Gordon mass adds to the junction stiffness
        ``2 V0 t_perp sqrt(n_L n_R) (-cos gamma0) / hbar^2``.
        """
        curvature = -np.cos(self.gamma0).ravel()
        junction = float(np.mean(2 * self.junction * curvature)) / self.hbar**2
        return junction + float(np.mean(0.5 * (self.left.mass2 + self.right.mass2)))


@dataclass(frozen=True, eq=False)
class PlanesState:
    medium: PlanesMedium
    theta_L: np.ndarray
    theta_R: np.ndarray
    pi_L: np.ndarray
    pi_R: np.ndarray
    t: float
    dt: float
    cfl: float = MAX_CFL

    def __post_init__(self):
        shape = self.medium.grid.shape
        for name in ("theta_L", "theta_R", "pi_L", "pi_R"):
            arr = np.array(np.broadcast_to(np.asarray(getattr(self, name), float), shape))
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        self.medium.left.check_dt(self.dt, self.cfl)
        self.medium.right.check_dt(self.dt, self.cfl)
        stiff = 2 * float(np.max(self.medium.junction)) / self.medium.hbar**2
        if self.dt**2 * stiff >= 1:
            raise CflError(f"time step {self.dt} is unstable for the junction coupling")

    @property
    def grid(self) -> Grid:
        return self.medium.grid


def _planes_kick(med: PlanesMedium, th_L, th_R, pi_L, pi_R, dt):
    fl, fr = med.forces(th_L, th_R)
    out = []
    for plane, pi, f in ((med.left, pi_L, fl), (med.right, pi_R, fr)):
        if plane.has_flow:
            lu, plus = plane.solver_for(dt)
            new = lu.solve(plus @ pi + dt * f)
        else:
            new = pi + dt * f
        if np.any(plane.sponge):
            new = new * np.exp(-plane.sponge * dt)
        new[plane.frozen] = 0.0
        out.append(new)
    return out


def planes_step(state: PlanesState, dt: float | None = None) -> PlanesState:
    dt = state.dt if dt is None else dt
    if dt != state.dt:
        state = replace(state, dt=dt)
    med = state.medium
    th_L, th_R = state.theta_L.ravel(), state.theta_R.ravel()
    pi_L, pi_R = _planes_kick(med, th_L, th_R, state.pi_L.ravel(), state.pi_R.ravel(), dt)
    th_L, th_R = th_L + dt * pi_L, th_R + dt * pi_R
    if not all(np.all(np.isfinite(a)) for a in (th_L, th_R, pi_L, pi_R)):
        raise BlowUpError(f"nonfinite field at t = {state.t + dt}", last_good=state)
    s = med.grid.shape
    return replace(state, theta_L=th_L.reshape(s), theta_R=th_R.reshape(s),
                   pi_L=pi_L.reshape(s), pi_R=pi_R.reshape(s), t=state.t + dt)


def planes_energy(state: PlanesState) -> dict[str, float]:
    """Energies of each plane and of the junction, with rates at integer time."""
    med = state.medium
    th_L, th_R = state.theta_L.ravel(), state.theta_R.ravel()
    pl, pr = state.pi_L.ravel(), state.pi_R.ravel()
    al, ar = _planes_kick(med, th_L, th_R, pl, pr, state.dt)
    dV = med.grid.cell_volume
    fl, fr = med.forces(th_L, th_R)
    e_L = 0.5 * float(np.dot(al, al - state.dt * fl)) * dV + med.left.potential_energy(th_L)
    e_R = 0.5 * float(np.dot(ar, ar - state.dt * fr)) * dV + med.right.potential_energy(th_R)
    e_J = med.coupling_energy(th_L, th_R)
    return {"left": e_L, "right": e_R, "junction": e_J, "total": e_L + e_R + e_J}


def planes_at_rest(medium: PlanesMedium, theta_L, theta_R, dt: float) -> PlanesState:
    """Planes released from rest: rates at -dt/2 from a half backward kick."""
    th_L = np.broadcast_to(np.asarray(theta_L, float), medium.grid.shape).ravel()
    th_R = np.broadcast_to(np.asarray(theta_R, float), medium.grid.shape).ravel()
    fl, fr = medium.forces(th_L, th_R)
    s = medium.grid.shape
    return PlanesState(medium, th_L.reshape(s), th_R.reshape(s),
                       (-0.5 * dt * fl).reshape(s), (-0.5 * dt * fr).reshape(s), 0.0, dt)


# --- certification against the discrete action --------------------------------

def _compare(name: str, numeric: float, exact: float, scale: float, tol: float) -> Check:
    r = abs(numeric - exact) / max(scale, abs(exact), 1e-300)
    return Check(name, r, tol, r < tol)


def certify_forces(medium: SgMedium, rng: np.random.Generator, samples: int = 5, tol: float = 1e-6) -> CheckReport:
    """Discrete forces against numeric derivatives of :meth:`SgMedium.lagrangian`.

    Checks, along random directions d on the non-frozen nodes,
    dL/dtheta[d] = dV (F(theta) - B^T thetadot) . d and
    dL/dthetadot[d] = dV (thetadot - B theta - b) . d.
    """
    g = medium.grid
    dV = g.cell_volume
    B, b = medium.advection
    live = ~medium.frozen
    worst_q = worst_v = 0.0
    for _ in range(samples):
        cfg = {"theta": rng.normal(size=g.size), "rate": rng.normal(size=g.size)}
        d = rng.normal(size=g.size) * live

        def lag(c):
            return medium.lagrangian(c["theta"], c["rate"])

        num_q = functional_gradient(lag, cfg, {"theta": d}).real
        exact_q = dV * float(np.dot(medium.force(cfg["theta"]) - B.T @ cfg["rate"], d))
        scale = dV * float(np.sum(np.abs(d) * (np.abs(medium.stiffness[0]) @ np.abs(cfg["theta"]) + np.abs(medium.stiffness[1])
                                                + np.abs(medium.potential_force(cfg["theta"])) + np.abs(B.T) @ np.abs(cfg["rate"]))))
        worst_q = max(worst_q, _compare("q", num_q, exact_q, scale, tol).value)
        num_v = functional_gradient(lag, cfg, {"rate": d}).real
        exact_v = dV * float(np.dot(cfg["rate"] - B @ cfg["theta"] - b, d))
        scale_v = dV * float(np.sum(np.abs(d) * (np.abs(cfg["rate"]) + np.abs(B) @ np.abs(cfg["theta"]) + np.abs(b))))
        worst_v = max(worst_v, _compare("v", num_v, exact_v, scale_v, tol).value)
    return CheckReport([Check("force_vs_action", worst_q, tol, worst_q < tol),
                        Check("momentum_vs_action", worst_v, tol, worst_v < tol)])


def certify_planes(medium: PlanesMedium, rng: np.random.Generator, samples: int = 5,
                   tol: float = 1e-6, amplitude: float = 1.0) -> CheckReport:
    """Coupled-plane forces against numeric derivatives of the junction Lagrangian."""
    g = medium.grid
    dV = g.cell_volume
    worst = 0.0
    for _ in range(samples):
        cfg = {k: amplitude * rng.normal(size=g.size) for k in ("theta_L", "theta_R", "rate_L", "rate_R")}
        d = {"theta_L": rng.normal(size=g.size) * ~medium.left.frozen,
             "theta_R": rng.normal(size=g.size) * ~medium.right.frozen}

        def lag(c):
            return medium.lagrangian(c["theta_L"], c["theta_R"], c["rate_L"], c["rate_R"])

        num = functional_gradient(lag, cfg, d).real
        fl, fr = medium.forces(cfg["theta_L"], cfg["theta_R"])
        BL, _ = medium.left.advection
        BR, _ = medium.right.advection
        exact = dV * float(np.dot(fl - BL.T @ cfg["rate_L"], d["theta_L"]) + np.dot(fr - BR.T @ cfg["rate_R"], d["theta_R"]))
        scale = dV * float(np.sum(np.abs(fl * d["theta_L"])) + np.sum(np.abs(fr * d["theta_R"])))
        worst = max(worst, _compare("planes", num, exact, scale, tol).value)
    return CheckReport([Check("planes_force_vs_action", worst, tol, worst < tol)])
