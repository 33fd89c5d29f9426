"""Acceptance criteria, one test per criterion, each reporting a single pass/fail line.

The lines are printed as the tests run (visible with ``-s``) and repeated in
the terminal summary under "acceptance criteria".
"""

import math
import time

import mpmath
import numpy as np
import pytest
import scipy.linalg as sl

from conftest import ACCEPTANCE_LINES
from sgacs.action import certify_high_sector
from sgacs.background import Background, solve_gpe_imaginary_time, uniform_background
from sgacs.config import from_file
from sgacs.grid import FIXED, NEUMANN, Grid
from sgacs.metric import build_metric, metric_residuals
from sgacs.scenarios import (FIGURE_CLIP, build_background, build_grid, figure1, shipped_configs,
                             thomas_fermi_comparison, validate_background, validation_passed)
from sgacs.sgsolver import (PlanesMedium, SgMedium, certify_forces, certify_planes, effective_wavenumber, energy,
                            evolve, kink_initial_condition, kink_shape_error, standing_wave_frequency)
from sgacs.states import (apply_lowering, even_cat_occupation, even_cat_occupation_tanh_squared, even_coherent,
                          expectation)


def report(number: int, title: str, ok: bool, detail: str, elapsed: float, limit: float):
    in_time = elapsed < limit
    status = "PASS" if ok and in_time else "FAIL"
    line = f"[{status}] criterion {number}: {title} | {detail} | {elapsed:.2f} s (limit {limit:g} s)"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line
    assert in_time, line


@pytest.fixture(scope="module")
def shipped_backgrounds():
    """Every shipped scenario's configuration and built background, built once."""
    out = {}
    for name, path in sorted(shipped_configs().items()):
        cfg = from_file(path)
        out[name] = (cfg, build_background(cfg, build_grid(cfg)))
    return out


def random_background(rng, d: int) -> Background:
    shape = tuple(int(n) for n in rng.integers(3, 7, size=d))
    g = Grid(shape, tuple(rng.uniform(0.2, 1.0, size=d)), bc=tuple(rng.choice(["periodic", FIXED, NEUMANN], d)))
    n_H = rng.uniform(0.05, 3.0, shape)
    theta = rng.normal(size=shape)
    v = rng.normal(size=(d,) + shape) * rng.uniform(0, 1.5)
    return Background(g, rng.uniform(0.05, 1.0, shape), theta - math.pi / 2, n_H, theta, v, 0.0,
                      V0=rng.uniform(0.1, 5.0), m=rng.uniform(0.3, 3.0), hbar=rng.uniform(0.3, 3.0))


def test_criterion_1_metric_identities():
    rng = np.random.default_rng(1)
    start = time.perf_counter()
    worst = {"inverse": 0.0, "det_f": 0.0, "conformal": 0.0, "numeric_inverse": 0.0}
    bad_signature = 0
    for i in range(200):
        res = metric_residuals(build_metric(random_background(rng, 2 + i % 2)))
        for key in worst:
            worst[key] = max(worst[key], res[key])
        bad_signature += int(res["signature"] != 0 or res["sqrt_neg_g_positive"] != 0)
    elapsed = time.perf_counter() - start
    ok = all(v < 1e-10 for v in worst.values()) and bad_signature == 0
    detail = ", ".join(f"{k} {v:.1e}" for k, v in worst.items()) + f", bad signature {bad_signature}/200"
    report(1, "metric identities on 200 random backgrounds", ok, detail, elapsed, 10)


def test_criterion_2_variational_certification():
    g = Grid.periodic_box((8, 8, 8), 4.0, n_tau=8, beta_hbar=2.0)
    bg = uniform_background(g, 0.25, 1.0, 1.0, v=(0.1, 0.0, -0.2))
    start = time.perf_counter()
    rep = certify_high_sector(bg, g, np.random.default_rng(2), directions=20)
    elapsed = time.perf_counter() - start
    detail = ", ".join(f"{c.name} {c.value:.1e}" for c in rep)
    report(2, "stationarity, Hessian and third-derivative pattern on 8^3 x 8", rep.passed, detail, elapsed, 60)


def test_criterion_3_solver_action_consistency():
    rng = np.random.default_rng(3)
    start = time.perf_counter()
    worst = 0.0
    media = [
        SgMedium(Grid.periodic_box((12, 10), (6, 5)), rng.uniform(0.5, 2, (12, 10)),
                 rng.normal(size=(2, 12, 10)), rng.uniform(0, 1, (12, 10)), V0=1.3, hbar=0.9),
        SgMedium(Grid.centered((9, 8), 4, bc=(FIXED, NEUMANN)), rng.uniform(0.5, 2, (9, 8)),
                 rng.normal(size=(2, 9, 8)) * 0.5, rng.uniform(0, 1, (9, 8))),
        SgMedium(Grid.periodic_box((6, 5, 4), 3.0), rng.uniform(0.5, 2, (6, 5, 4)),
                 rng.normal(size=(3, 6, 5, 4)) * 0.3, 0.4),
        SgMedium(Grid.periodic_box((32,), 8.0), 1.0, 0.0, 0.5, twist=(math.pi,)),
    ]
    checks = []
    for med in media:
        checks += list(certify_forces(med, rng))
    g = Grid.periodic_box((8, 6), 4.0)
    for gamma0 in (math.pi, math.pi / 2):
        planes = PlanesMedium(SgMedium(g, 1.0, rng.normal(size=(2, 8, 6)) * 0.2, 0.3), SgMedium(g, 1.3, 0.0, 0.1),
                              0.4, 1.0, 0.8, gamma0)
        checks += list(certify_planes(planes, rng))
    elapsed = time.perf_counter() - start
    worst = max(c.value for c in checks)
    ok = all(c.passed for c in checks) and worst < 1e-6
    report(3, "sine-Gordon and coupled-plane forces equal action gradients", ok,
           f"worst relative mismatch {worst:.1e} over {len(checks)} checks", elapsed, 60)


def test_criterion_4_kink_regression():
    bg = uniform_background(Grid.periodic_box((1024,), 16.0), 0.25, 1.0, 1.0)
    med = SgMedium.from_background(bg, twist=(math.pi,))
    dt = med.max_stable_dt()
    start = time.perf_counter()
    s = kink_initial_condition(0.0, 8.0, med, dt)
    e0 = energy(s)
    s, _ = evolve(s, 10_000)
    drift = abs(energy(s) - e0) / abs(e0)
    cs = math.sqrt(float(med.cs2.flat[0]))
    u = 0.5 * cs
    m = kink_initial_condition(u, 8.0, med, dt)
    m, _ = evolve(m, int(round(16.0 / u / dt)))
    l2 = kink_shape_error(m, u, 8.0)
    elapsed = time.perf_counter() - start
    report(4, "static kink energy drift over 10^4 steps, moving kink after one crossing",
           drift < 1e-3 and l2 < 1e-3, f"drift {drift:.1e} (< 1e-3), shape L2 {l2:.2e} (< 1e-3)", elapsed, 30)


def test_criterion_5_klein_gordon_dispersion():
    V0, n_H0, n_L0, hbar, L, cells = 1.0, 1.0, 0.25, 1.0, 32.0, 128
    bg = uniform_background(Grid.periodic_box((cells,), L), n_L0, n_H0, V0, hbar=hbar)
    med = SgMedium.from_background(bg)
    cs2 = V0 * n_H0
    start = time.perf_counter()
    errors = []
    for mode in (1, 2, 3):
        k_eff = effective_wavenumber(2 * math.pi * mode / L, L / cells)
        expected = cs2 * k_eff**2 + 4 * V0**2 * n_H0 * n_L0 / hbar**2
        measured = standing_wave_frequency(med, mode) ** 2
        errors.append(abs(measured - expected) / expected)
    elapsed = time.perf_counter() - start
    report(5, "small-amplitude dispersion of the three lowest modes", max(errors) < 0.01,
           "relative errors " + ", ".join(f"{e:.1e}" for e in errors), elapsed, 60)


def test_criterion_6_fock_engine():
    start = time.perf_counter()
    worst_res = worst_n = worst_closed = 0.0
    mean_zero = True
    gaps = []
    for alpha in (0.5, 1.0, 2.0, 3.0):
        s = even_coherent(alpha, 60)
        res = apply_lowering(s, 0, 2) - alpha**2 * s.amplitudes
        worst_res = max(worst_res, float(np.linalg.norm(res)))
        mean_zero &= expectation(s, "a0") == 0
        n0 = expectation(s, "n0").real
        a2 = mpmath.mpf(alpha) ** 2
        weights = [a2 ** (2 * k) / mpmath.factorial(2 * k) for k in range(31)]
        brute = float(sum(2 * k * w for k, w in enumerate(weights)) / sum(weights))
        worst_n = max(worst_n, abs(n0 - brute) / brute)
        worst_closed = max(worst_closed, abs(n0 - even_cat_occupation(alpha)) / n0)
        gaps.append(f"{alpha:g}: {n0 - even_cat_occupation_tanh_squared(alpha):+.2e}")
    elapsed = time.perf_counter() - start
    ok = worst_res < 1e-10 and mean_zero and worst_n < 1e-12 and worst_closed < 1e-12
    detail = (f"a0^2 residual {worst_res:.1e}, <a0> exactly 0: {mean_zero}, n0 vs brute force {worst_n:.1e}, "
              f"vs |a|^2 tanh|a|^2 {worst_closed:.1e}; n0 minus tanh^2 form ({'; '.join(gaps)})")
    report(6, "even-cat eigenrelation and occupation, alpha <= 3, cutoff 60", ok, detail, elapsed, 5)


def test_criterion_7_figure_reproduction():
    start = time.perf_counter()
    figs = {w: figure1(w) for w in (1.0, 0.5)}
    elapsed = time.perf_counter() - start
    props = []
    for w, f in figs.items():
        m = f.metrics
        props.append(m["axis_phase_residual"] < 1e-12 and m["axis_numerator_max"] == 0.0)
        props.append(m["mask_symmetric"] and np.array_equal(f.singular, f.singular[::-1, ::-1]))
        props.append(float(np.nanmax(f.display_magnitude)) <= FIGURE_CLIP)
        props.append(m["core_speed_max"] == 0.0 and bool(np.all(f.velocity[:, f.grid.radius <= 1.0] == 0)))
    q1, q05 = figs[1.0].metrics["quiet_area"], figs[0.5].metrics["quiet_area"]
    gap1, gap05 = figs[1.0].metrics["core_gap"], figs[0.5].metrics["core_gap"]
    props.append(q05 > q1 and gap05 > gap1)
    detail = (f"axes, symmetry, clip, core: {sum(props[:-1])}/8; quiet area w=1/2 {q05:.2f} > w=1 {q1:.2f}; "
              f"core gap {gap05:.2f} > {gap1:.2f}")
    report(7, "figure properties at w = 1 and w = 1/2 on [-4,4]^2", all(props), detail, elapsed, 20)


def test_criterion_8_gpe_solver(shipped_backgrounds):
    start = time.perf_counter()
    g = Grid.centered((32, 32), 4.0, bc=(FIXED, FIXED))
    sol = solve_gpe_imaginary_time(g, 0.0, 0.0, 1.0, tol=1e-11)
    n, h = 30, g.spacing[0]
    T = (2 * np.eye(n) - np.eye(n, k=1) - np.eye(n, k=-1)) / h**2
    H = 0.5 * (np.kron(T, np.eye(n)) + np.kron(np.eye(n), T))
    exact = float(sl.eigh(H, eigvals_only=True, subset_by_index=[0, 0])[0])
    box_err = abs(sol.energies[-1] - exact) / exact
    monotone = {}
    tf_err = None
    for name, (cfg, built) in shipped_backgrounds.items():
        if "gpe" in built.extras:
            monotone[name] = built.extras["gpe"].monotone
            if name == "gpe_trap":
                tf_err = thomas_fermi_comparison(built.background, built.extras["gpe"])
    elapsed = time.perf_counter() - start
    ok = box_err < 1e-8 and monotone and all(monotone.values()) and tf_err is not None and tf_err < 0.05
    detail = (f"box energy vs dense eigensolver {box_err:.1e}; monotone: "
              + ", ".join(f"{k} {v}" for k, v in monotone.items()) + f"; Thomas-Fermi interior {tf_err:.3f}")
    # the shipped GPE backgrounds are built by the fixture; their solve time is not part of this timing
    report(8, "imaginary-time ground states", bool(ok), detail, elapsed, 120)


def test_criterion_9_validators(shipped_backgrounds):
    start = time.perf_counter()
    outcomes = []
    ok = True
    for name, (cfg, built) in shipped_backgrounds.items():
        rep, waived = validate_background(built.background, cfg)
        passed = validation_passed(rep, waived)
        documented = not waived or bool(cfg["validate.waiver_reason"])
        ok &= passed and documented
        failed = [c for c in rep.failed()]
        outcomes.append(f"{name} {'pass' if not failed else 'waived ' + '+'.join(failed)}")
    elapsed = time.perf_counter() - start
    report(9, "assumption suite on every shipped scenario", ok, "; ".join(outcomes), elapsed, 10)
