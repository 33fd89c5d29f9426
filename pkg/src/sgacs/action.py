"""Discretized Euclidean actions and a finite-difference functional-derivative oracle.

Every action is a weighted sum over the space-time lattice with weight
``(dtau / hbar) * dV`` and returns a complex number: the Berry-phase term
``i n dtheta/dtau`` makes the action complex.  Imaginary-time derivatives are
periodic central differences, spatial ones use :func:`sgacs.grid.gradient`.

The oracle functions differentiate any ``action(cfg) -> complex`` along
direction fields by central differences with Richardson extrapolation.  A
configuration is either a :class:`FieldConfiguration` or a dict of arrays;
directions use the same layout and may omit fields (treated as zero).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .background import Background, check_grid
from .checks import Check, CheckReport
from .errors import GridError, NumericError
from .grid import Grid, divergence, gradient

FIELD_NAMES = ("n_H", "theta_H", "n_L", "theta_L")


@dataclass(frozen=True)
class FieldConfiguration:
    """High-sector (and optionally low-sector) fields on a space-time lattice.

    Arrays have shape ``(n_tau, *grid.shape)``; lower-rank input is broadcast.
    """

    grid: Grid
    n_H: np.ndarray
    theta_H: np.ndarray
    n_L: np.ndarray | None = None
    theta_L: np.ndarray | None = None

    def __post_init__(self):
        shape = self.grid.spacetime_shape
        for name in FIELD_NAMES:
            value = getattr(self, name)
            if value is None:
                continue
            arr = np.asarray(value, float)
            try:
                arr = np.array(np.broadcast_to(arr, shape))
            except ValueError as exc:
                raise GridError(f"{name} with shape {arr.shape} does not fit {shape}") from exc
            object.__setattr__(self, name, arr)

    def arrays(self) -> dict[str, np.ndarray]:
        return {k: getattr(self, k) for k in FIELD_NAMES if getattr(self, k) is not None}

    def shifted(self, direction, eps: float) -> "FieldConfiguration":
        return replace(self, **_axpy(self.arrays(), _as_dict(direction), eps))

    @property
    def sup_norm(self) -> float:
        return max(float(np.max(np.abs(a))) for a in self.arrays().values())


def _as_dict(obj) -> dict[str, np.ndarray]:
    if isinstance(obj, FieldConfiguration):
        return obj.arrays()
    return dict(obj)


def _axpy(base: dict, direction: dict, eps: float) -> dict:
    unknown = set(direction) - set(base)
    if unknown:
        raise GridError(f"direction has fields {sorted(unknown)} absent from the configuration")
    return {k: v + eps * direction[k] if k in direction else v for k, v in base.items()}


def _shift(cfg, direction, eps):
    if isinstance(cfg, FieldConfiguration):
        return cfg.shifted(direction, eps)
    return _axpy(dict(cfg), _as_dict(direction), eps)


def _sup(cfg) -> float:
    return max(float(np.max(np.abs(a))) for a in _as_dict(cfg).values())


def _weight(grid: Grid, hbar: float) -> float:
    return grid.dtau / hbar * grid.cell_volume


def _dtau(f: np.ndarray, grid: Grid) -> np.ndarray:
    return (np.roll(f, -1, axis=0) - np.roll(f, 1, axis=0)) / (2 * grid.dtau)


def _dot(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.sum(a * b, axis=0)


def sh_density(cfg: FieldConfiguration, bg: Background, quantum_pressure: bool = False) -> dict[str, np.ndarray]:
    """Term-by-term integrand of the high-sector action on the space-time lattice."""
    check_grid(bg, cfg.grid)
    g, m, hbar, V0 = cfg.grid, bg.m, bg.hbar, bg.V0
    n, th = cfg.n_H, cfg.theta_H
    grad_th = gradient(th, g)
    v = bg.v[:, None]
    terms = {
        "berry": 1j * n * _dtau(th, g),
        "one_body": (m * bg.V_ext - bg.mu + 2 * V0 * bg.n_L0) * n,
        "phase_kinetic": n * _dot(grad_th, grad_th) / (2 * m),
        "gauge": -n * _dot(v, grad_th),
        "gauge_sq": 0.5 * m * n * _dot(v, v),
        "coupling": V0 * n * bg.n_L0 * np.cos(2 * (th - bg.theta_L0) / hbar),
        "contact": 0.5 * V0 * n**2,
    }
    if quantum_pressure:
        grad_n = gradient(n, g)
        terms["quantum_pressure"] = hbar**2 * _dot(grad_n, grad_n) / (8 * m * n)
    return terms


def action_SH(cfg: FieldConfiguration, bg: Background, quantum_pressure: bool = False,
              terms: bool = False):
    """High-sector action in polar variables; with ``terms=True`` a dict per term."""
    w = _weight(cfg.grid, bg.hbar)
    parts = {k: complex(np.sum(v) * w) for k, v in sh_density(cfg, bg, quantum_pressure).items()}
    return parts if terms else sum(parts.values())


def action_SL0(cfg_L, bg: Background) -> complex:
    """Low-sector energy functional of a complex field ``psi(tau, x)``.

    ``cfg_L`` is either the complex array or a configuration carrying
    ``n_L``/``theta_L``, converted through ``psi = sqrt(n) exp(i theta / hbar)``.
    """
    if isinstance(cfg_L, FieldConfiguration):
        if cfg_L.n_L is None or cfg_L.theta_L is None:
            raise GridError("configuration has no low-sector fields")
        grid = cfg_L.grid
        psi = np.sqrt(cfg_L.n_L) * np.exp(1j * cfg_L.theta_L / bg.hbar)
    else:
        grid = bg.grid
        psi = np.broadcast_to(np.asarray(cfg_L, complex), grid.spacetime_shape)
    check_grid(bg, grid)
    m, hbar = bg.m, bg.hbar
    cov = gradient(psi, grid) - 1j * (m / hbar) * bg.v[:, None] * psi
    density = (np.conj(psi) * hbar * _dtau(psi, grid)
               + hbar**2 / (2 * m) * np.sum(np.abs(cov) ** 2, axis=0)
               + (m * bg.V_ext - bg.mu) * np.abs(psi) ** 2
               + 0.5 * bg.V0 * np.abs(psi) ** 4)
    return complex(np.sum(density) * _weight(grid, hbar))


def action_tunneling(theta_L, theta_R, n_L, n_R, t_perp: float, grid: Grid, hbar: float = 1.0) -> complex:
    """Tunnelling action between two planes, ``t_perp sqrt(n_L n_R) cos((theta_L - theta_R)/hbar)``."""
    if grid.ndim != 2:
        raise GridError("tunnelling planes must be two-dimensional")
    shape = grid.spacetime_shape
    try:
        tl, tr, nl, nr = (np.broadcast_to(np.asarray(a, float), shape) for a in (theta_L, theta_R, n_L, n_R))
    except ValueError as exc:
        raise GridError(f"plane fields do not fit the lattice {shape}") from exc
    density = t_perp * np.sqrt(nl * nr) * np.cos((tl - tr) / hbar)
    return complex(np.sum(density) * _weight(grid, hbar))


# --- stationary reference configurations -------------------------------------

def uniform_configuration(bg: Background, grid: Grid | None = None) -> FieldConfiguration:
    """The background's high-sector fields, constant in imaginary time."""
    grid = grid or bg.grid
    if grid.n_tau is None:
        raise GridError("configuration grid needs an imaginary-time axis")
    return FieldConfiguration(grid, bg.n_H0, bg.theta_H0)


# --- finite-difference oracle -----------------------------------------------

def default_eps(cfg) -> float:
    return max(1e-6, 1e-7 * _sup(cfg))


def _evaluate(action, cfg) -> complex:
    value = complex(action(cfg))
    if not np.isfinite(value.real) or not np.isfinite(value.imag):
        raise NumericError("action evaluated to a nonfinite value")
    return value


def _richardson(stencil: Callable[[float], complex], eps: float, order: int = 2):
    """Combine the stencil at ``eps`` and ``eps/2``; returns (value, error estimate)."""
    coarse, fine = stencil(eps), stencil(eps / 2)
    factor = 2**order
    return (factor * fine - coarse) / (factor - 1), abs(fine - coarse)


def functional_gradient(action, cfg, direction, eps: float | None = None, return_error: bool = False):
    """Directional derivative ``dS[cfg + e d]/de`` at ``e = 0``."""
    eps = default_eps(cfg) if eps is None else eps

    def stencil(h):
        return (_evaluate(action, _shift(cfg, direction, h)) - _evaluate(action, _shift(cfg, direction, -h))) / (2 * h)

    value, err = _richardson(stencil, eps)
    return (value, err) if return_error else value


def functional_gradient_terms(action_terms, cfg, direction, eps: float | None = None) -> dict[str, complex]:
    """Per-term directional derivatives of an action returning a dict of terms.

    Terms may be scalars or weighted integrand arrays; arrays are differenced
    cell by cell before summation, which keeps the roundoff per cell.
    """
    eps = default_eps(cfg) if eps is None else eps
    out = {}
    for h in (eps, eps / 2):
        plus, minus = action_terms(_shift(cfg, direction, h)), action_terms(_shift(cfg, direction, -h))
        out[h] = {k: complex(np.sum(plus[k] - minus[k])) / (2 * h) for k in plus}
    return {k: (4 * out[eps / 2][k] - out[eps][k]) / 3 for k in out[eps]}


def relative_gradient(action_terms, cfg, direction, eps: float | None = None) -> float:
    """|sum of term gradients| / sum of |term gradients|; 0 at a stationary point."""
    parts = functional_gradient_terms(action_terms, cfg, direction, eps)
    scale = sum(abs(v) for v in parts.values())
    return abs(sum(parts.values())) / scale if scale else 0.0


def functional_hessian_apply(action, cfg, dir1, dir2, eps: float | None = None, return_error: bool = False):
    """Mixed second derivative ``d2 S / de1 de2`` by the four-point bilinear stencil."""
    eps = max(1e-3, 1e-3 * _sup(cfg)) if eps is None else eps

    def stencil(h):
        vals = [_evaluate(action, _shift(_shift(cfg, dir1, s1 * h), dir2, s2 * h))
                for s1, s2 in ((1, 1), (1, -1), (-1, 1), (-1, -1))]
        return (vals[0] - vals[1] - vals[2] + vals[3]) / (4 * h * h)

    value, err = _richardson(stencil, eps)
    return (value, err) if return_error else value


def third_derivative(action, cfg, a, b, c, eps: float | None = None) -> complex:
    """Mixed third derivative by the eight-point product stencil."""
    eps = max(1e-2, 1e-2 * _sup(cfg)) if eps is None else eps

    def stencil(h):
        total = 0j
        for s1 in (1, -1):
            for s2 in (1, -1):
                for s3 in (1, -1):
                    shifted = _shift(_shift(_shift(cfg, a, s1 * h), b, s2 * h), c, s3 * h)
                    total += s1 * s2 * s3 * _evaluate(action, shifted)
        return total / (8 * h**3)

    return _richardson(stencil, eps)[0]


def fourth_difference(action, cfg, direction, eps: float = 1e-1) -> complex:
    """Five-point fourth derivative along a single direction."""
    vals = [_evaluate(action, _shift(cfg, direction, k * eps)) for k in (-2, -1, 0, 1, 2)]
    return (vals[0] - 4 * vals[1] + 6 * vals[2] - 4 * vals[3] + vals[4]) / eps**4


# --- analytic kernels ---------------------------------------------------------

def _cos_phase(bg: Background, theta: np.ndarray) -> np.ndarray:
    return np.cos(2 * (theta - bg.theta_L0) / bg.hbar)


def _sin_phase(bg: Background, theta: np.ndarray) -> np.ndarray:
    return np.sin(2 * (theta - bg.theta_L0) / bg.hbar)


def hessian_nn(bg: Background, grid: Grid, d1: np.ndarray, d2: np.ndarray) -> float:
    """V0 <d1, d2> (quantum pressure excluded)."""
    return float(bg.V0 * np.sum(d1 * d2) * _weight(grid, bg.hbar))


def hessian_tt(cfg: FieldConfiguration, bg: Background, d1: np.ndarray, d2: np.ndarray) -> float:
    """<d1, -(1/m) div(n grad d2) - (4 V0 n_L0 n / hbar^2) cos(...) d2> on the same stencil."""
    g = cfg.grid
    flux = cfg.n_H * gradient(d2, g) / bg.m
    div = divergence(flux, g)
    kernel = -div - 4 * bg.V0 * bg.n_L0 * cfg.n_H / bg.hbar**2 * _cos_phase(bg, cfg.theta_H) * d2
    return float(np.sum(d1 * kernel) * _weight(g, bg.hbar))


def hessian_nt_density(cfg: FieldConfiguration, bg: Background, dn: np.ndarray, dt: np.ndarray) -> dict:
    """Integrand of the mixed (n, theta) block: Berry term, current coupling, sine term."""
    g = cfg.grid
    grad_th = gradient(cfg.theta_H, g)
    return {
        "berry": 1j * dn * _dtau(dt, g),
        "current": dn * _dot(grad_th / bg.m - bg.v[:, None], gradient(dt, g)),
        "sine": -2 * bg.V0 * bg.n_L0 / bg.hbar * _sin_phase(bg, cfg.theta_H) * dn * dt,
    }


def hessian_nt(cfg: FieldConfiguration, bg: Background, dn: np.ndarray, dt: np.ndarray) -> complex:
    density = sum(hessian_nt_density(cfg, bg, dn, dt).values())
    return complex(np.sum(density) * _weight(cfg.grid, bg.hbar))


def third_ttn(cfg: FieldConfiguration, bg: Background, a: np.ndarray, b: np.ndarray, dn: np.ndarray) -> float:
    """Closed-form (theta, theta, n) third derivative."""
    g = cfg.grid
    density = (dn * _dot(gradient(a, g), gradient(b, g)) / bg.m
               - 4 * bg.V0 * bg.n_L0 / bg.hbar**2 * _cos_phase(bg, cfg.theta_H) * dn * a * b)
    return float(np.sum(density) * _weight(g, bg.hbar))


# --- certification reports -----------------------------------------------------

def smooth_random_field(grid: Grid, rng: np.random.Generator, modes: int = 3) -> np.ndarray:
    """Exponential of a few low Fourier modes on the space-time lattice, unit sup norm.

    The exponential keeps two independent draws from being exactly orthogonal.
    """
    shape = grid.spacetime_shape
    axes = [2 * np.pi * np.arange(shape[0]) / shape[0]]
    axes += [2 * np.pi * np.arange(n) / n for n in grid.shape]
    mesh = np.meshgrid(*axes, indexing="ij")
    f = np.zeros(shape)
    for _ in range(modes):
        k = rng.integers(0, 2, size=len(shape))
        f += rng.normal() * np.cos(sum(ki * x for ki, x in zip(k, mesh)) + rng.uniform(0, 2 * np.pi))
    f = np.exp(0.5 * f / np.max(np.abs(f))) * rng.choice((-1.0, 1.0))
    return f / np.max(np.abs(f))


def _rel(a: complex, b: complex, scale: float = 0.0) -> float:
    """Relative difference; ``scale`` guards against cancellation among terms of ``b``."""
    scale = max(abs(a), abs(b), scale, 1e-300)
    return abs(a - b) / scale


def certify_high_sector(bg: Background, grid: Grid, rng: np.random.Generator, directions: int = 20,
                        tol_grad: float = 1e-6, tol_hess: float = 1e-6, tol_zero: float = 1e-8) -> CheckReport:
    """Stationarity, Hessian blocks and third-derivative pattern of the high-sector action."""
    cfg = uniform_configuration(bg, grid)

    w = _weight(grid, bg.hbar)

    def terms(c):
        return {k: v * w for k, v in sh_density(c, bg).items()}

    def action(c):
        return action_SH(c, bg)

    checks = []
    worst = 0.0
    for _ in range(directions):
        d = {"n_H": rng.normal(size=grid.spacetime_shape), "theta_H": rng.normal(size=grid.spacetime_shape)}
        worst = max(worst, relative_gradient(terms, cfg, d))
    checks.append(Check("gradient_relative", worst, tol_grad, worst < tol_grad))

    d1, d2 = smooth_random_field(grid, rng), smooth_random_field(grid, rng)
    hnn = functional_hessian_apply(action, cfg, {"n_H": d1}, {"n_H": d2})
    r = _rel(hnn, hessian_nn(bg, grid, d1, d2))
    checks.append(Check("hessian_nn", r, tol_hess, r < tol_hess))
    htt = functional_hessian_apply(action, cfg, {"theta_H": d1}, {"theta_H": d2})
    r = _rel(htt, hessian_tt(cfg, bg, d1, d2))
    checks.append(Check("hessian_tt", r, tol_hess, r < tol_hess))
    hnt = functional_hessian_apply(action, cfg, {"n_H": d1}, {"theta_H": d2})
    scale = sum(float(np.sum(np.abs(v))) for v in hessian_nt_density(cfg, bg, d1, d2).values())
    r = _rel(hnt, hessian_nt(cfg, bg, d1, d2), scale * _weight(grid, bg.hbar))
    checks.append(Check("hessian_nt", r, tol_hess, r < tol_hess))

    checks.extend(third_derivative_check(cfg, bg, rng=rng, tol=tol_hess, tol_zero=tol_zero))
    return CheckReport(checks)


def third_derivative_check(cfg: FieldConfiguration, bg: Background, dirs=None, rng=None,
                           tol: float = 1e-6, tol_zero: float = 1e-8) -> list[Check]:
    """Zero blocks with two or more density directions, and the closed (theta, theta, n) kernel."""
    rng = rng or np.random.default_rng(0)
    grid = cfg.grid
    if dirs is None:
        dirs = [smooth_random_field(grid, rng) for _ in range(3)]
    a, b, c = dirs

    def action(x):
        return action_SH(x, bg)

    n = lambda f: {"n_H": f}  # noqa: E731
    t = lambda f: {"theta_H": f}  # noqa: E731
    scale = abs(action(cfg)) or 1.0
    out = []
    for name, args in (("third_nnn", (n(a), n(b), n(c))), ("third_nnt", (n(a), n(b), t(c)))):
        val = abs(third_derivative(action, cfg, *args)) / scale
        out.append(Check(name, val, tol_zero, val < tol_zero))
    num = third_derivative(action, cfg, t(a), t(b), n(c))
    r = _rel(num, third_ttn(cfg, bg, a, b, c))
    out.append(Check("third_ttn", r, tol, r < tol))

    # control: a purely quadratic model has vanishing fourth differences
    def quadratic(x):
        th = _as_dict(x)["theta_H"]
        return hessian_tt(cfg, bg, th, th) / 2

    val = abs(fourth_difference(quadratic, cfg, t(a))) / (abs(quadratic(cfg)) or 1.0)
    out.append(Check("fourth_quadratic_control", val, tol_zero, val < tol_zero))
    return out
