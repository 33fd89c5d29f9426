"""End-to-end pipelines: configuration to background, metric, solver and output bundle.

A bundle is a directory holding ``manifest.txt`` (sorted ``key=value`` lines),
grid dumps, CSV tables, PGM heatmaps and PNG figures.  Nothing time- or
host-dependent is written, so the same configuration gives the same bytes.
"""

from __future__ import annotations

import hashlib
import logging
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
from scipy import ndimage

from . import plotting
from .background import (Background, phase_match, solve_gpe_imaginary_time, temperature_bound,
                         thomas_fermi_density, uniform_background, validate_assumptions,
                         vortex_wavefunction, vortnovort_phase, vortnovort_terms, wrapped_gradient)
from .checks import Check, CheckReport
from .config import ScenarioConfig, from_file
from .errors import ConfigError, DimensionError, PreconditionError, SgacsError
from .grid import FIXED, PERIODIC, Grid, format_value, write_dump
from .metric import FIGURE1, SOUND, build_f_tensor, build_metric, ergosurface, metric_residuals
from .sgsolver import (PlanesMedium, SgMedium, SgState, diagnostics, effective_wavenumber, energy,
                       kink_initial_condition, kink_shape_error, planes_at_rest, planes_energy, planes_step,
                       standing_wave_frequency, step, timeseries_csv)
from .states import (compressed_coefficients, default_cutoff, even_cat_occupation, even_cat_occupation_tanh_squared,
                     even_coherent, expectation, two_mode_superposition, OBSERVABLES)

log = logging.getLogger(__name__)

FIGURE_CLIP = 0.5
QUIET_RADIUS = 2.0


def shipped_configs() -> dict[str, Path]:
    """Configuration files bundled with the package, keyed by stem."""
    root = resources.files("sgacs") / "configs"
    return {Path(str(p)).stem: Path(str(p)) for p in root.iterdir() if str(p).endswith(".cfg")}


def _hash(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


class Bundle:
    """Output directory that records every file written into it."""

    def __init__(self, directory):
        self.dir = Path(directory)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.files: list[Path] = []
        self.summary: dict[str, object] = {}

    def path(self, name: str) -> Path:
        p = self.dir / name
        p.parent.mkdir(parents=True, exist_ok=True)
        self.files.append(p)
        return p

    def text(self, name: str, content: str) -> Path:
        p = self.path(name)
        p.write_text(content)
        return p

    def dump(self, name: str, values: np.ndarray, grid: Grid) -> Path:
        return write_dump(self.path(name), values, grid)

    def adopt(self, paths):
        for p in paths:
            self.files.append(Path(p))

    def write_manifest(self, header: list[str]) -> Path:
        lines = list(header)
        for key in sorted(self.summary):
            val = self.summary[key]
            lines.append(f"{key}={format_value(val) if isinstance(val, float) else val}")
        for p in sorted(set(self.files)):
            if p.name != "manifest.txt":
                lines.append(f"file.{p.relative_to(self.dir).as_posix()}={_hash(p)}")
        out = self.dir / "manifest.txt"
        out.write_text("\n".join(lines) + "\n")
        return out


# --- building blocks ------------------------------------------------------------

def build_grid(cfg: ScenarioConfig) -> Grid:
    shape = cfg["grid.shape"]
    d = len(shape)
    bc = cfg["grid.bc"]
    bc = tuple(bc) * (d if len(bc) == 1 else 1) if bc else None
    if cfg["grid.extent"] is not None:
        ext = cfg["grid.extent"]
        return Grid.centered(shape, ext if len(ext) == d else ext * d, bc)
    length = cfg["grid.length"]
    length = length if len(length) == d else length * d
    bc = bc or (PERIODIC,) * d
    spacing = tuple(L / n if rule == PERIODIC else L / (n - 1) for L, n, rule in zip(length, shape, bc))
    return Grid(shape, spacing, None, bc)


def _trap(grid: Grid, omega: float) -> np.ndarray:
    return 0.5 * omega**2 * grid.radius**2


@dataclass
class BuiltBackground:
    background: Background
    extras: dict = field(default_factory=dict)


def build_background(cfg: ScenarioConfig, grid: Grid) -> BuiltBackground:
    b = cfg.values["background"]
    fam = cfg.family
    V0, m, hbar, k = b["V0"], b["m"], b["hbar"], b["k"]
    meta = {"family": fam, "k": k}
    if b["w"] is not None:
        meta["w"] = b["w"]
    extras: dict = {}

    if fam in ("uniform", "planes"):
        bg = uniform_background(grid, b["n_L0"], b["n_H0"], V0, k, b["v"] or 0.0, b["mu"], m, hbar)
        return BuiltBackground(bg.with_fields(meta=meta), extras)

    if fam == "thomas_fermi":
        V = _trap(grid, b["trap_omega"])
        n_H, clamped = thomas_fermi_density(b["mu"], m * V, V0, b["n_L0"], return_clamped=True)
        theta_L = np.zeros(grid.shape)
        extras["clamped_cells"] = clamped
        bg = Background(grid, b["n_L0"], theta_L, n_H, phase_match(theta_L, k, hbar), 0.0, V, V0, b["mu"], m, hbar,
                        dict(meta, thomas_fermi=True))
        return BuiltBackground(bg, extras)

    if fam == "gpe":
        V = _trap(grid, b["trap_omega"])
        if b["mu_H"] is None and b["n_H0"] is None:
            raise ConfigError("family 'gpe' needs background.n_H0 or background.mu_H", path="background.n_H0")
        n_H = None
        if b["mu_H"] is not None:
            n_H = thomas_fermi_density(b["mu_H"], m * V, V0)
        else:
            n_H = np.full(grid.shape, b["n_H0"])
        sol = solve_gpe_imaginary_time(grid, V, V0, b["N_target"], v=b["v"], tol=b["tol"], n_H=n_H,
                                       mu_H=b["mu_H"], m=m, hbar=hbar)
        extras["gpe"] = sol
        n_H0 = sol.n_H if sol.n_H is not None else n_H
        bg = Background(grid, sol.n, sol.theta, n_H0, phase_match(sol.theta, k, hbar), b["v"] or 0.0, V, V0,
                        sol.mu, m, hbar, dict(meta, thomas_fermi=b["mu_H"] is not None),
                        phase_period=2 * math.pi * hbar)
        return BuiltBackground(bg, extras)

    if fam == "vortex":
        phi0 = vortex_wavefunction(b["circulation"], b["amplitude"], grid)
        n_L = np.abs(phi0) ** 2
        theta_L = hbar * np.angle(phi0)
        theta_L = np.where(np.isnan(n_L), np.nan, theta_L)
        extras["phi0"] = phi0
        bg = Background(grid, n_L, theta_L, b["n_H0"], phase_match(theta_L, k, hbar), b["v"] or 0.0, 0.0, V0,
                        b["mu"] or 0.0, m, hbar, meta, phase_period=2 * math.pi * hbar)
        return BuiltBackground(bg, extras)

    if fam == "vortnovort":
        theta_H, masks = vortnovort_phase(b["w"], grid, return_masks=True)
        theta_H = hbar * theta_H
        theta_L = theta_H - (2 * k + 1) * math.pi * hbar / 2
        extras["masks"] = masks
        bg = Background(grid, b["n_L0"], theta_L, b["n_H0"], theta_H, b["v"] or 0.0, 0.0, V0, b["mu"] or 0.0,
                        m, hbar, meta, phase_period=math.pi * hbar)
        return BuiltBackground(bg, extras)

    raise ConfigError(f"unknown family {fam!r}", path="background.family")


# --- validation --------------------------------------------------------------------

def validate_background(bg: Background, cfg: ScenarioConfig) -> tuple[CheckReport, list[str]]:
    """Assumption checks plus the temperature bound; returns the report and the waived names."""
    v = cfg.values["validate"]
    report = validate_assumptions(bg, tol=v["tol"], fluctuation_amplitude=v["amplitude"],
                                  wavenumber=v["wavenumber"], harmonic_tol=v["harmonic_tol"])
    temp = temperature_bound(bg, cfg["scenario.kT"])
    report.checks.append(Check("temperature", temp["ratio"], 0.1, temp["valid"]))
    waived = list(v["waive"])
    unknown = [w for w in waived if w not in {c.name for c in report.checks}]
    if unknown:
        raise ConfigError(f"validate.waive names unknown checks: {', '.join(unknown)}", path="validate.waive")
    return report, waived


def validation_csv(report: CheckReport, waived) -> str:
    rows = ["check,residual,tolerance,pass"]
    for c in report.checks:
        status = "pass" if c.passed else ("waived" if c.name in waived else "fail")
        rows.append(f"{c.name},{format_value(c.value)},{format_value(c.tolerance)},{status}")
    return "\n".join(rows) + "\n"


def validation_passed(report: CheckReport, waived) -> bool:
    return all(c.passed or c.name in waived for c in report.checks)


# --- Fig. 1 ---------------------------------------------------------------------------

@dataclass
class Figure1Result:
    w: float
    grid: Grid
    theta: np.ndarray
    velocity: np.ndarray
    magnitude: np.ndarray
    core: np.ndarray
    branch_cut: np.ndarray
    singular: np.ndarray
    ergo: object
    metrics: dict

    @property
    def display_magnitude(self) -> np.ndarray:
        return np.minimum(self.magnitude, FIGURE_CLIP)


def figure_grid(extent: float = 4.0, points: int = 161) -> Grid:
    return Grid.centered((points, points), extent, bc=(FIXED, FIXED))


def _sign_change_near(f: np.ndarray) -> np.ndarray:
    lo = ndimage.minimum_filter(f, size=3, mode="nearest")
    hi = ndimage.maximum_filter(f, size=3, mode="nearest")
    return (lo <= 0) & (hi >= 0)


def figure1(w: float, grid: Grid | None = None) -> Figure1Result:
    """Velocity field of the vortex/no-vortex superposition phase in the unitless convention.

    The speed is |grad theta| with theta defined modulo pi; the core r <= 1
    is set to zero velocity.  ``singular`` flags cells next to common zeros
    of the arctangent's numerator and denominator (phase singularities
    outside the core), where the field is not differentiable.
    """
    grid = grid or figure_grid()
    if grid.ndim != 2:
        raise DimensionError("the figure is two-dimensional")
    theta, masks = vortnovort_phase(w, grid, return_masks=True)
    core = masks["core"]
    num, den = vortnovort_terms(w, *grid.coords)
    # differentiate the unmasked formula so cells next to the core keep their stencil
    vel = wrapped_gradient(0.5 * np.arctan2(num, den), grid, math.pi)
    vel = np.where(core, 0.0, vel)
    singular = _sign_change_near(num) & _sign_change_near(den) & ~core
    mag = np.sqrt(np.sum(vel**2, axis=0))
    bg = Background(grid, 1.0, np.where(core, 0.0, theta), 1.0, np.where(core, np.nan, theta), 0.0, 0.0, 1.0,
                    phase_period=math.pi)
    ergo = ergosurface(bg, FIGURE1)
    x1, x2 = grid.coords
    r = grid.radius
    on_axes = ((np.isclose(x1, 0.0, atol=1e-12)) | (np.isclose(x2, 0.0, atol=1e-12))) & ~core & ~singular
    mask = ergo.mask
    quiet = (~mask) & ~core & (r < QUIET_RADIUS)
    ergo_r = r[mask]
    metrics = {
        "w": float(w),
        "ergo_area": ergo.area,
        "quiet_area": float(np.count_nonzero(quiet)) * grid.cell_volume,
        "core_gap": float(ergo_r.min() - 1.0) if ergo_r.size else math.inf,
        "axis_numerator_max": float(np.max(np.abs(num[on_axes]))) if on_axes.any() else 0.0,
        "axis_phase_residual": float(np.max(np.abs(np.sin(2 * theta[on_axes])))) if on_axes.any() else 0.0,
        "mask_symmetric": bool(np.array_equal(mask, mask[::-1, ::-1])),
        "core_speed_max": float(np.max(mag[core])) if core.any() else 0.0,
        "display_max": float(np.nanmax(np.minimum(mag, FIGURE_CLIP))),
        "singular_cells": int(np.count_nonzero(singular)),
        "branch_cut_cells": int(np.count_nonzero(masks["branch_cut"])),
    }
    return Figure1Result(w, grid, theta, vel, mag, core, masks["branch_cut"], singular, ergo, metrics)


def write_figure1(result: Figure1Result, bundle: Bundle, quiver_stride: int = 8) -> None:
    g = result.grid
    plotting.write_pgm(bundle.path("magnitude.pgm"), result.display_magnitude, 0.0, FIGURE_CLIP,
                       comment=f"|grad theta| clipped at {FIGURE_CLIP}, w={format_value(result.w)}")
    plotting.write_pgm(bundle.path("ergomask.pgm"), result.ergo.mask.astype(float), 0.0, 1.0,
                       comment="ergoregion |grad theta|^2 >= 1/2")
    plotting.write_pgm(bundle.path("singularmask.pgm"), (result.singular | result.branch_cut).astype(float),
                       0.0, 1.0, comment="phase singularities and branch-cut cells")
    x1, x2 = g.coords
    rows = ["x,y,vx,vy"]
    for i, j in np.ndindex(g.shape):
        rows.append(f"{format_value(x1[i, j])},{format_value(x2[i, j])},"
                    f"{format_value(result.velocity[0, i, j])},{format_value(result.velocity[1, i, j])}")
    bundle.text("quiver.csv", "\n".join(rows) + "\n")
    bundle.text("ergosurface.csv", result.ergo.polylines_csv())
    bundle.dump("theta.grid", result.theta, g)
    plotting.plot_velocity(bundle.path("figure1.png"), g, result.velocity, result.display_magnitude,
                           result.ergo.polylines, f"w = {result.w:g}", stride=quiver_stride, clip=FIGURE_CLIP)
    for key, val in result.metrics.items():
        bundle.summary[f"figure.{key}"] = val


# --- solver stages -------------------------------------------------------------------------

def _dt(cfg: ScenarioConfig, medium: SgMedium) -> float:
    s = cfg.values["solver"]
    return s["dt"] if s["dt"] is not None else medium.max_stable_dt(s["cfl"])


def _snapshot(bundle: Bundle, state, index: int):
    bundle.dump(f"snapshots/theta_{index:07d}.grid", state.theta, state.grid)


def _run_states(bundle: Bundle, state, steps: int, stride: int, snapshots: int):
    rows = [diagnostics(state)]
    for i in range(1, steps + 1):
        state = step(state)
        if stride and i % stride == 0:
            rows.append(diagnostics(state))
        if snapshots and i % snapshots == 0:
            _snapshot(bundle, state, i)
    if not stride or steps % stride:
        rows.append(diagnostics(state))
    return state, rows


def run_kink(cfg: ScenarioConfig, bg: Background, bundle: Bundle):
    s = cfg.values["solver"]
    g = bg.grid
    if g.ndim != 1 or g.bc[0] != PERIODIC:
        raise PreconditionError("kink runs need a 1-D periodic grid")
    medium = SgMedium.from_background(bg, twist=(math.pi * bg.hbar,))
    dt = _dt(cfg, medium)
    length = g.spacing[0] * g.shape[0]
    x0 = s["x0"] if s["x0"] is not None else g.origin[0] + 0.5 * length
    cs = math.sqrt(float(medium.cs2.flat[0]))
    u = s["u_kink"] * cs
    steps = s["steps"] or (int(round(length / abs(u) / dt)) if u else 10_000)
    state = kink_initial_condition(u, x0, medium, dt, s["cfl"])
    e0 = energy(state)
    state, rows = _run_states(bundle, state, steps, s["stride"], s["snapshots"])
    bundle.text("timeseries.csv", timeseries_csv(rows))
    bundle.dump("theta_final.grid", state.theta, g)
    bundle.summary.update({
        "solver.dt": dt, "solver.steps": steps, "solver.t_final": state.t,
        "kink.speed": u, "kink.energy_drift": abs(energy(state) - e0) / abs(e0),
        "kink.shape_error_l2": kink_shape_error(state, u, x0),
        "kink.charge": rows[-1]["charge"],
    })
    plotting.plot_timeseries(bundle.path("timeseries.png"), rows, f"kink u = {u:g}")
    plotting.plot_profile(bundle.path("kink.png"), g.axis_coords(0),
                          {"phi = 2 theta / hbar": 2 * state.theta / bg.hbar}, f"kink at t = {state.t:g}")


def run_pulse(cfg: ScenarioConfig, bg: Background, bundle: Bundle):
    s = cfg.values["solver"]
    g = bg.grid
    medium = SgMedium.from_background(bg, sponge_strength=s["sponge"])
    dt = _dt(cfg, medium)
    centre = [o + 0.5 * h * (n - 1) for o, h, n in zip(g.origin, g.spacing, g.shape)]
    if s["x0"] is not None:
        centre[0] = s["x0"]
    r2 = sum((x - c) ** 2 for x, c in zip(g.coords, centre))
    theta0 = s["amplitude"] * np.exp(-r2 / (2 * s["width"] ** 2))
    theta0 = np.where(medium.frozen.reshape(g.shape), 0.0, theta0)
    state = SgState(medium, theta0, np.zeros(g.shape), 0.0, dt, s["cfl"])
    e0 = energy(state)
    steps = s["steps"] or 200
    state, rows = _run_states(bundle, state, steps, s["stride"], s["snapshots"])
    bundle.text("timeseries.csv", timeseries_csv(rows))
    bundle.dump("theta_final.grid", state.theta, g)
    bundle.summary.update({"solver.dt": dt, "solver.steps": steps, "solver.t_final": state.t,
                           "pulse.energy_change": (energy(state) - e0) / e0 if e0 else 0.0})
    plotting.plot_timeseries(bundle.path("timeseries.png"), rows, "pulse")
    if g.ndim == 2:
        plotting.plot_field(bundle.path("theta_final.png"), g, state.theta, f"theta at t = {state.t:g}")


def run_dispersion(cfg: ScenarioConfig, bg: Background, bundle: Bundle):
    s = cfg.values["solver"]
    g = bg.grid
    if g.ndim != 1 or g.bc[0] != PERIODIC:
        raise PreconditionError("dispersion runs need a 1-D periodic grid")
    medium = SgMedium.from_background(bg)
    cs2 = float(medium.cs2.flat[0])
    mass2 = float(medium.mass2.flat[0])
    length = g.spacing[0] * g.shape[0]
    rows = ["mode,k,k_eff,omega2_measured,omega2_expected,rel_error"]
    worst = 0.0
    for mode in range(1, s["modes"] + 1):
        k = 2 * math.pi * mode / length
        k_eff = effective_wavenumber(k, g.spacing[0])
        measured = standing_wave_frequency(medium, mode, s["amplitude"], s["periods"], s["dt"]) ** 2
        expected = cs2 * k_eff**2 + mass2
        rel = abs(measured - expected) / expected
        worst = max(worst, rel)
        rows.append(",".join(format_value(x) for x in (mode, k, k_eff, measured, expected, rel)))
    bundle.text("dispersion.csv", "\n".join(rows) + "\n")
    bundle.summary.update({"dispersion.max_rel_error": worst, "dispersion.mass2": mass2})


def run_planes(cfg: ScenarioConfig, bg: Background, bundle: Bundle):
    s = cfg.values["solver"]
    b = cfg.values["background"]
    g = bg.grid
    if g.ndim != 2:
        raise DimensionError("tunnel-coupled planes are two-dimensional")
    left = SgMedium.from_background(bg)
    right = SgMedium.from_background(bg)
    medium = PlanesMedium(left, right, b["t_perp"], bg.n_H0, bg.n_H0, b["gamma0"])
    dt = _dt(cfg, left)
    amp = s["amplitude"]
    state = planes_at_rest(medium, 0.5 * amp, -0.5 * amp, dt)
    steps = s["steps"] or 2000
    stride = s["stride"] or max(1, steps // 200)
    rows = ["t,left,right,junction,total,gamma_mean"]
    trace = []
    for i in range(steps + 1):
        if i:
            state = planes_step(state)
        gamma = float(np.mean(state.theta_L - state.theta_R)) / bg.hbar
        trace.append(gamma)
        if i % stride == 0 or i == steps:
            e = planes_energy(state)
            rows.append(",".join(format_value(x) for x in (state.t, e["left"], e["right"], e["junction"],
                                                          e["total"], gamma)))
    bundle.text("planes.csv", "\n".join(rows) + "\n")
    p = np.array(trace)
    idx = np.nonzero(np.sign(p[:-1]) * np.sign(p[1:]) < 0)[0]
    summary = {"solver.dt": dt, "solver.steps": steps, "planes.omega2_expected": medium.small_oscillation_omega2()}
    if len(idx) >= 3:
        t = dt * np.arange(len(p))
        crossings = t[idx] - p[idx] * dt / (p[idx + 1] - p[idx])
        omega = math.pi / ((crossings[-1] - crossings[0]) / (len(crossings) - 1))
        summary["planes.omega2_measured"] = omega**2
    bundle.summary.update(summary)


SOLVER_STAGES = {"kink": run_kink, "pulse": run_pulse, "dispersion": run_dispersion, "planes": run_planes}


# --- states -----------------------------------------------------------------------

def write_fock(bundle: Bundle, alpha: float, w: float | None, cutoff: int | None, prefix: str = "fock/"):
    """Amplitudes, expectations and the closed-form occupation comparison."""
    cutoff = cutoff or default_cutoff(alpha)
    state = even_coherent(alpha, cutoff) if w is None else two_mode_superposition(alpha, w, cutoff)
    state.to_csv(bundle.path(f"{prefix}amplitudes.csv"))
    rows = ["observable,re,im"]
    for obs in OBSERVABLES:
        if obs == "n1" and state.modes == 1:
            continue
        val = complex(expectation(state, obs))
        rows.append(f"{obs},{format_value(val.real)},{format_value(val.imag)}")
    bundle.text(f"{prefix}expectations.csv", "\n".join(rows) + "\n")
    if w is None:
        n0 = expectation(state, "n0").real
        bundle.summary.update({"fock.n0": n0, "fock.n0_closed_form": even_cat_occupation(alpha),
                               "fock.n0_tanh_squared": even_cat_occupation_tanh_squared(alpha)})
    bundle.summary.update({"fock.alpha": float(alpha), "fock.cutoff": cutoff})
    return state


def write_coefficients(bundle: Bundle, cfg: ScenarioConfig, built: BuiltBackground):
    st = cfg.values["states"]
    if st["alpha"] is None:
        return
    bg = built.background
    g = bg.grid
    if cfg.family == "vortex":
        coeffs = compressed_coefficients("even_cat", g, built.extras["phi0"], None, bg.V0, st["alpha"])
    elif cfg.family == "vortnovort":
        phi0 = vortex_wavefunction(1, 1.0, g)
        phi1 = np.where(np.isnan(phi0), np.nan, 1.0 + 0j)
        w = st["w"] if st["w"] is not None else cfg["background.w"]
        coeffs = compressed_coefficients("two_mode", g, phi0, phi1, bg.V0, st["alpha"], w)
    else:
        return
    for name, arr in coeffs.fields().items():
        bundle.dump(f"coefficients/{name}.grid", np.real(arr) if np.iscomplexobj(arr) else arr, g)


# --- the pipeline -------------------------------------------------------------------

@dataclass
class RunResult:
    directory: Path
    files: list[Path]
    summary: dict
    validation: CheckReport
    waived: list[str]

    @property
    def passed(self) -> bool:
        return validation_passed(self.validation, self.waived)


def _heatmaps(bundle: Bundle, bg: Background):
    g = bg.grid
    if g.ndim != 2:
        return
    u = bg.flow()
    speed = np.sqrt(np.sum(u**2, axis=0))
    with np.errstate(divide="ignore", invalid="ignore"):
        mach = np.where(bg.cs2 > 0, speed / np.sqrt(bg.cs2), np.nan)
    plotting.write_pgm(bundle.path("heatmaps/n_H0.pgm"), bg.n_H0, comment="n_H0")
    plotting.write_pgm(bundle.path("heatmaps/mach.pgm"), mach, 0.0, 2.0, comment="|u| / c_s clipped at 2")
    plotting.plot_field(bundle.path("figures/n_H0.png"), g, bg.n_H0, "n_H0")
    plotting.plot_field(bundle.path("figures/mach.png"), g, np.minimum(mach, 2.0), "|u| / c_s", 0.0, 2.0)


def _metric_outputs(bundle: Bundle, bg: Background):
    g = bg.grid
    if g.ndim == 1:
        f = build_f_tensor(bg)
        for a in range(2):
            for c in range(a, 2):
                bundle.dump(f"metric/fup{a}{c}.grid", f[..., a, c], g)
        return
    metric = build_metric(bg)
    bundle.adopt(metric.save(bundle.dir / "metric"))
    for key, val in metric_residuals(metric).items():
        bundle.summary[f"metric.{key}"] = val
    ergo = ergosurface(bg, SOUND)
    bundle.summary["metric.ergo_area"] = ergo.area
    if g.ndim == 2:
        bundle.text("metric/ergosurface.csv", ergo.polylines_csv())
        plotting.write_pgm(bundle.path("metric/ergomask.pgm"), ergo.mask.astype(float), 0.0, 1.0,
                           comment="ergoregion |u|^2 >= c_s^2")


def run(cfg: ScenarioConfig, out_dir, stages=("background", "metric", "solver")) -> RunResult:
    """Execute a scenario and write its bundle into ``out_dir``."""
    bundle = Bundle(out_dir)
    name = cfg.name
    try:
        grid = build_grid(cfg)
        built = build_background(cfg, grid)
        bg = built.background
        report, waived = validate_background(bg, cfg)
        bundle.text("validation.csv", validation_csv(report, waived))
        bundle.summary["validation.passed"] = validation_passed(report, waived)
        if waived:
            bundle.summary["validation.waived"] = ",".join(waived)
            bundle.summary["validation.waiver_reason"] = cfg["validate.waiver_reason"]
        for note in report.notes:
            bundle.summary.setdefault("validation.note", note)
        bg.save(bundle.dir / "background")
        bundle.adopt(sorted((bundle.dir / "background").iterdir()))
        if "gpe" in built.extras:
            _gpe_outputs(bundle, built.extras["gpe"], bg)
        if "clamped_cells" in built.extras:
            bundle.summary["background.clamped_cells"] = built.extras["clamped_cells"]
        _heatmaps(bundle, bg)
        write_coefficients(bundle, cfg, built)
        if cfg["states.alpha"] is not None:
            write_fock(bundle, cfg["states.alpha"], cfg["states.w"], cfg["states.cutoff"])
        if "metric" in stages:
            _metric_outputs(bundle, bg)
        if cfg.family == "vortnovort" and grid.ndim == 2:
            fig = figure1(cfg["background.w"], grid)
            write_figure1(fig, bundle, cfg["figure.quiver_stride"])
        kind = cfg["solver.kind"]
        if "solver" in stages and kind != "none":
            SOLVER_STAGES[kind](cfg, bg, bundle)
    except SgacsError as exc:
        if exc.args and not str(exc.args[0]).startswith("scenario "):
            exc.args = (f"scenario {name}: {exc.args[0]}",) + exc.args[1:]
        raise
    bundle.write_manifest([f"scenario={name}", f"family={cfg.family}"] + [f"config.{line}" for line in cfg.lines()])
    return RunResult(bundle.dir, sorted(set(bundle.files)), dict(bundle.summary), report, waived)


def _gpe_outputs(bundle: Bundle, sol, bg: Background):
    energies = [e for run in sol.inner_energies for e in run]
    bundle.text("gpe_energy.csv", "iteration,energy\n" + "".join(
        f"{i},{format_value(e)}\n" for i, e in enumerate(energies)))
    bundle.summary.update({"gpe.mu": sol.mu, "gpe.residual": sol.residual, "gpe.iterations": sol.iterations,
                           "gpe.monotone": sol.monotone, "gpe.outer_iterations": len(sol.outer_deltas)})
    tf = thomas_fermi_comparison(bg, sol)
    if tf is not None:
        bundle.summary["gpe.tf_interior_max_rel"] = tf


def thomas_fermi_comparison(bg: Background, sol, inner_fraction: float = 0.6) -> float | None:
    """Largest relative deviation from (mu - m V - V0 n_H0) / V0 inside ``inner_fraction`` of the TF radius.

    Only meaningful in a trap; returns None when the external potential is flat.
    """
    V = bg.m * bg.V_ext
    if not np.ptp(V):
        return None
    tf = (sol.mu - V - bg.V0 * bg.n_H0) / bg.V0
    inside = tf > 0
    if not inside.any():
        return None
    r = bg.grid.radius
    radius = float(r[inside].max())
    core = r <= inner_fraction * radius
    return float(np.max(np.abs(sol.n[core] - tf[core]) / tf[core]))


def run_file(path, out_dir, overrides=()) -> RunResult:
    return run(from_file(path, overrides), out_dir)


def bundle_digest(directory) -> str:
    """Single hash over every file of a bundle (names and contents)."""
    h = hashlib.sha256()
    root = Path(directory)
    for p in sorted(root.rglob("*")):
        if p.is_file():
            h.update(p.relative_to(root).as_posix().encode())
            h.update(p.read_bytes())
    return h.hexdigest()
