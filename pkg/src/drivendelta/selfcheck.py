"""Built-in invariant battery behind ``drivendelta selftest``.

Each check returns a short diagnostic string and raises AssertionError
on failure; the fast level finishes well under a minute, the full level
adds the heavier law and cross-module checks.
"""

from __future__ import annotations

import cmath
import math

import numpy as np

from .modes import periodicity_defect, psi_laplace, solve_modes
from .profiles import InitialWavefunction, source_transform
from .reconstruct import (WaveReconstructor, cut_integrals, f_term_integral,
                          free_evolution)
from .sheets import ModelParams, SheetConfig, mode_coefficient, sqrt_on_sheet
from .tdse import evolve, make_grid, survival_decay
from .wronskian import wronskian
from .zeros import (conjugate_pair_check, count_zeros, find_resonances,
                    multiphoton_order, refine_zero, residue_recurrence_residual,
                    residues, small_r_asymptote)
from .barrier import PotentialTransform, to_well_frame


def _sqrt_roundtrip():
    rng = np.random.default_rng(7)
    cfg = SheetConfig.usual(2.0)
    ws = rng.normal(size=2000) + 1j * rng.normal(size=2000)
    worst = max(abs(sqrt_on_sheet(w, cfg) ** 2 - w) / abs(w) for w in ws)
    assert worst < 1e-14
    flip = sqrt_on_sheet(1 + 1j, cfg) + sqrt_on_sheet(1 + 1j, cfg.flipped(0),
                                                      0)
    assert abs(flip) == 0.0
    return f"roundtrip {worst:.1e}, sheets sum to 0"


def _coefficient_points():
    cfg = SheetConfig.usual(2.0)
    a = mode_coefficient(0j, 0, cfg)
    b = mode_coefficient(0j, 1, cfg) - (math.sqrt(3) - 1)
    c = mode_coefficient(0j, -1, cfg) - (-1 - 1j)
    assert max(abs(a), abs(b), abs(c)) < 1e-14
    z = 0.3 - 0.2j
    d = mode_coefficient(z, 2, cfg) - mode_coefficient(z - 2j, 3, cfg)
    assert abs(d) < 1e-14
    return "anchor values and strip shift exact"


def _source_asymptotics():
    psi0 = InitialWavefunction.poly_bump()
    cfg = SheetConfig.usual(2.0)
    # psi0'(0) = 0, so p f - psi0(0) ~ psi0''(0)/p with psi0''(0) = -4
    sv = source_transform(0.0, 400.0 + 0j, psi0, cfg)
    ratio = abs(400.0 * sv.f - 1.0) * 400.0 / 4.0
    assert abs(ratio - 1.0) < 0.2
    sv2 = source_transform(2.0, 9.0 + 1.0j, psi0, cfg)   # outside support
    assert abs(sv2.asymptotic_leading) == 0.0
    return f"curvature-term ratio {ratio:.3f}"


def _diagonal_limit():
    psi0 = InitialWavefunction.poly_bump()
    cfg = SheetConfig.usual(2.0)
    params = ModelParams(2.0, 0.0)
    p = 30.0 + 1.5j
    got = psi_laplace(0.0, p, params, psi0, cfg, N=64)
    f = source_transform(0.0, p, psi0, cfg).f
    closed = f / (1 - cmath.exp(0.25j * math.pi) / cmath.sqrt(p))
    assert abs(got - closed) < 1e-12 * abs(closed)
    return "undriven transform matches closed form"


def _periodicity():
    psi0 = InitialWavefunction.poly_bump()
    cfg = SheetConfig.usual(2.0)
    params = ModelParams(2.0, 0.1)
    d = periodicity_defect(0.37 + 0.21j, params, psi0, cfg, N=64)
    assert d < 1e-10
    return f"strip-shift defect {d:.1e}"


def _jump_condition():
    psi0 = InitialWavefunction.poly_bump()
    cfg = SheetConfig.usual(2.0)
    params = ModelParams(2.0, 0.1)
    p = 0.8 + 0.7j
    h = 1e-5

    def f(x):
        return psi_laplace(x, p, params, psi0, cfg, N=64)

    jump = (-3 * f(0.0) + 4 * f(h) - f(2 * h)) / (2 * h) \
        - (3 * f(0.0) - 4 * f(-h) + f(-2 * h)) / (2 * h)
    rhs = -2.0 * (f(0.0)
                  + 0.1 * psi_laplace(0.0, p - 2j, params, psi0, cfg, N=64)
                  + 0.1 * psi_laplace(0.0, p + 2j, params, psi0, cfg, N=64))
    rel = abs(jump - rhs) / abs(rhs)
    assert rel < 1e-6
    return f"derivative-jump identity to {rel:.1e}"


def _wronskian_methods():
    rng = np.random.default_rng(3)
    cfg_base = SheetConfig.usual(2.0)
    worst_spread = 0.0
    worst_diff = 0.0
    for _ in range(10):
        omega = float(rng.uniform(0.8, 2.8))
        r = float(rng.uniform(0.05, 0.8))
        cfg = SheetConfig.usual(omega)
        z = complex(-rng.uniform(0.1, (2 * r + 1) ** 2), rng.uniform(-0.2,
                                                                     0.2))
        wi = wronskian(z, ModelParams(omega, r), cfg, method="iteration")
        wc = wronskian(z, ModelParams(omega, r), cfg,
                       method="continued_fraction")
        worst_spread = max(worst_spread, wi.n_spread / abs(wi.W))
        worst_diff = max(worst_diff, abs(wi.W - wc.W) / abs(wc.W))
    assert worst_spread < 1e-8 and worst_diff < 1e-10
    return f"spread {worst_spread:.1e}, methods {worst_diff:.1e}"


def _no_rhp_zero():
    params = ModelParams(2.0, 0.3)
    cfg = SheetConfig.usual(2.0)
    count = count_zeros((0.05, 2.0, -0.9, 0.9), params, cfg)
    assert count == 0
    return "right-half-plane count 0"


def _small_r_law():
    params = ModelParams(2.0, 0.02)
    cfg = SheetConfig.usual(2.0)
    a0 = small_r_asymptote(params)
    res = refine_zero(a0 * 4e-4, params, cfg, check_simple=False)
    rel = abs(res.z_star / 4e-4 - a0) / abs(a0)
    assert rel < 0.05
    return f"z/r^2 within {rel:.1%} of the leading coefficient"


def _residue_recurrence():
    params = ModelParams(2.0, 0.1)
    cfg = SheetConfig.usual(2.0)
    psi0 = InitialWavefunction.poly_bump()
    res = refine_zero(small_r_asymptote(params) * 0.01, params, cfg)
    residues(res, params, psi0, N=64)
    rr = residue_recurrence_residual(res, params)
    assert rr < 1e-8
    return f"recurrence residual {rr:.1e}"


def _conjugate_pair():
    params = ModelParams(2.0, 0.1)
    cfg = SheetConfig.usual(2.0)
    res = refine_zero(small_r_asymptote(params) * 0.01, params, cfg,
                      check_simple=False)
    d = conjugate_pair_check(res, params)
    assert d < 1e-8
    return f"pair distance {d:.1e}"


def _theta_freedom():
    params = ModelParams(2.0, 0.1)
    psi0 = InitialWavefunction.poly_bump()
    c1 = cut_integrals(0.0, 5.0, params, psi0, theta=0.1)
    c2 = cut_integrals(0.0, 5.0, params, psi0, theta=0.2)
    assert abs(c1 - c2) < 1e-7
    return f"ray-angle freedom {abs(c1 - c2):.1e}"


def _f_term_oracle():
    psi0 = InitialWavefunction.poly_bump()
    worst = max(abs(f_term_integral(0.3, t, psi0)
                    - free_evolution(0.3, t, psi0)) for t in (1.0, 5.0))
    assert worst < 1e-10
    return f"source cut vs free evolution {worst:.1e}"


def _tdse_conservation():
    psi0 = InitialWavefunction.truncated_exponential(rate=1.0, support=19.0)
    grid = make_grid(psi0, L=20.0, dx=0.05, dt=2e-3)
    traj = evolve(grid, ModelParams(2.0, 0.0), T=5.0, sample_stride=5)
    drift = np.max(np.abs(np.diff(traj.norm))) / traj.norm[0]
    c = np.abs(traj.center)
    wander = np.max(np.abs(c - c[0])) / c[0]
    assert drift < 1e-10 and wander < 1e-3
    return f"norm drift {drift:.1e}, bound-state wander {wander:.1e}"


def _barrier_involution():
    params = ModelParams(2.0, 0.3, "barrier")
    cfg = SheetConfig.usual(2.0)
    tr = PotentialTransform()
    p1, c1, s1 = tr.apply(params, cfg)
    p2, c2, s2 = tr.apply(p1, c1, s1)
    assert p2 == params and c2 == cfg and s2 == 1.0
    p_w, c_w, sgn = to_well_frame(params, cfg)
    assert p_w.r == -0.3 and sgn == -1.0 and not c_w.is_usual()
    zs = find_resonances(ModelParams(2.0, 0.05, "well"), c_w, reference=c_w)
    assert zs == []
    return "involution exact; no small-r barrier zero on its usual branch"


def _multiphoton_fast():
    s = multiphoton_order(1.5, [0.02, 0.04, 0.08])
    assert abs(s - 2.0) < 0.2
    return f"omega=1.5 slope {s:.3f}"


def _multiphoton_slow():
    s = multiphoton_order(0.7, [0.05, 0.08, 0.12, 0.18])
    assert abs(s - 4.0) < 0.4
    return f"omega=0.7 slope {s:.3f}"


def _large_omega_law():
    params = ModelParams(50.0, 0.02)
    cfg = SheetConfig.usual(50.0)
    res = refine_zero(small_r_asymptote(params) * 4e-4, params, cfg,
                      check_simple=False)
    target = 2 * 0.02 ** 2 / math.sqrt(50.0)
    rel = abs(abs(res.z_star.real) - target) / target
    assert rel < 0.1
    return f"|Re z| within {rel:.1%} of 2 r^2 / sqrt(omega)"


def _visibility_window():
    cfg = SheetConfig.usual(2.0)

    def visible(r):
        return bool(find_resonances(ModelParams(2.0, r), cfg))

    flags = [(r, visible(r)) for r in (0.6, 0.72, 1.25, 1.36)]
    assert flags[0][1] and not flags[1][1]
    assert flags[2][1] and not flags[3][1]
    return "transitions bracketed near 0.69 and 1.31"


def _reconstruction_point():
    params = ModelParams(2.0, 0.1)
    psi0 = InitialWavefunction.poly_bump()
    rec = WaveReconstructor(params, psi0)
    grid = make_grid(psi0, L=90.0, dx=0.04, dt=8e-4)
    traj = evolve(grid, params, T=5.0, check_boundary=False)
    ref = traj.center[int(round(5.0 / traj.dt))]
    d = rec.psi(0.0, 5.0)
    rel = abs(d.total - ref) / abs(ref)
    assert rel < 0.03
    return f"psi(0,5) vs time-domain {rel:.1%}"


def _survival_vs_gamma():
    params = ModelParams(2.0, 0.2)
    cfg = SheetConfig.usual(2.0)
    res = refine_zero(small_r_asymptote(params) * 0.04, params, cfg,
                      check_simple=False)
    psi0 = InitialWavefunction.truncated_exponential(rate=1.0, support=12.0)
    grid = make_grid(psi0, L=60.0, dx=0.05, dt=2e-3,
                     boundary="absorbing_layer", absorber_width=12.0,
                     absorber_strength=2.0)
    traj = evolve(grid, params, T=60.0, survival_window=(-5.0, 5.0),
                  sample_stride=25)
    fit = survival_decay(traj)
    rel = abs(fit.rate - 2 * res.gamma) / (2 * res.gamma)
    assert fit.ok and rel < 0.1
    return f"decay rate vs 2*Gamma {rel:.1%}"


FAST = [
    ("sqrt sheets", _sqrt_roundtrip),
    ("sideband coefficients", _coefficient_points),
    ("source asymptotics", _source_asymptotics),
    ("undriven closed form", _diagonal_limit),
    ("strip periodicity", _periodicity),
    ("derivative jump", _jump_condition),
    ("wronskian methods", _wronskian_methods),
    ("right half plane", _no_rhp_zero),
    ("small-r law", _small_r_law),
    ("residue recurrence", _residue_recurrence),
    ("conjugate pair", _conjugate_pair),
    ("ray-angle freedom", _theta_freedom),
    ("source-cut oracle", _f_term_oracle),
    ("time-domain conservation", _tdse_conservation),
    ("barrier reduction", _barrier_involution),
    ("multiphoton m=0", _multiphoton_fast),
]

FULL = FAST + [
    ("multiphoton m=1", _multiphoton_slow),
    ("large-omega law", _large_omega_law),
    ("visibility window", _visibility_window),
    ("reconstruction point", _reconstruction_point),
    ("survival vs width", _survival_vs_gamma),
]


def run(level: str = "fast"):
    checks = FAST if level == "fast" else FULL
    results = []
    for name, fn in checks:
        try:
            detail = fn()
            results.append((name, True, detail))
        except AssertionError as exc:
            results.append((name, False, f"assertion failed: {exc}"))
        except Exception as exc:   # diagnostics, not a crash
            results.append((name, False, f"{type(exc).__name__}: {exc}"))
    return results
