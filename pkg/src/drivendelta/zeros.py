"""Locating resonances: argument-principle counting, Newton refinement,
residues, conjugate pairing, asymptotic laws and parameter sweeps.

A resonance is a zero of the discrete Wronskian on some sheet.  Zeros
are counted by adaptive phase tracking of W around rectangle boundaries,
refined by damped Newton iteration with a central-difference derivative,
and certified simple by a second count on a small disk.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import (ContourError, ConvergenceError, DegenerateAmplitudeError,
                     DrivenDeltaError, DynamicRangeError, NearPoleError,
                     NoZeroFoundError, PhaseTrackingError, QuadratureError)
from .modes import ModeVector, solve_modes
from .profiles import InitialWavefunction, source_transform
from .sheets import (I_POW_3_2, ModelParams, SheetConfig, mode_coefficient,
                     mode_coefficient_row, sqrt_on_sheet)
from .wronskian import wronskian, wronskian_grid

NEWTON_MAX_ITER = 60
SIMPLICITY_RADIUS = 1e-4


@dataclass
class Resonance:
    """A located Wronskian zero with its sheet and derived quantities."""

    z_star: complex
    sheet: SheetConfig
    p_star: complex
    gamma: float
    visible: bool
    newton_residual: float
    residues: ModeVector | None = None
    disk_count: int = 1

    @property
    def lambda_paper(self) -> complex:
        """Decay exponent written as in e^{-lambda t}: lambda = -p_star."""
        return -self.p_star


@dataclass
class SweepRecord:
    r: float
    omega: float
    resonances: list
    zero_count_per_region: int
    events: list = field(default_factory=list)
    status: str = "ok"


def same_sheet(a: SheetConfig, b: SheetConfig) -> bool:
    """Same determinations (cut angle aside)."""
    return (a.default_sheet == b.default_sheet
            and a.overrides == b.overrides)


# ---------------------------------------------------------------------------
# argument-principle counting


def _winding(points: np.ndarray, params: ModelParams, cfg: SheetConfig,
             max_rounds: int = 48) -> int:
    """Winding number of W along a closed polyline through ``points``.

    Adaptive bisection keeps every phase step below pi/2; ambiguity after
    the refinement cap raises :class:`PhaseTrackingError`.
    """
    pts = list(points)
    W, _ = wronskian_grid(np.asarray(pts), params, cfg)
    vals = list(W)
    wmax = max(abs(w) for w in vals)
    for _ in range(max_rounds):
        wmin = min(abs(w) for w in vals)
        if wmin < 1e-12 * max(wmax, 1e-300):
            raise ContourError("|W| dips to zero on the counting contour")
        args = np.angle(np.asarray(vals))
        d = np.diff(np.concatenate([args, args[:1]]))
        d = (d + math.pi) % (2 * math.pi) - math.pi
        bad = np.where(np.abs(d) > 0.5 * math.pi)[0]
        if bad.size == 0:
            total = float(np.sum(d))
            winding = total / (2 * math.pi)
            if abs(winding - round(winding)) > 0.01:
                raise PhaseTrackingError(
                    f"winding {winding} not close to an integer")
            return int(round(winding))
        new_pts = []
        for i in bad:
            j = (int(i) + 1) % len(pts)
            new_pts.append(0.5 * (pts[int(i)] + pts[j]))
        Wn, _ = wronskian_grid(np.asarray(new_pts), params, cfg)
        for i, w, p in sorted(zip(bad, Wn, new_pts), reverse=True):
            pts.insert(int(i) + 1, p)
            vals.insert(int(i) + 1, w)
        wmax = max(wmax, float(np.max(np.abs(Wn))))
    raise PhaseTrackingError("phase step ambiguity after refinement cap")


def _rectangle_points(region, per_edge: int) -> np.ndarray:
    re_lo, re_hi, im_lo, im_hi = region
    corners = [complex(re_lo, im_lo), complex(re_hi, im_lo),
               complex(re_hi, im_hi), complex(re_lo, im_hi)]
    pts = []
    for a, b in zip(corners, corners[1:] + corners[:1]):
        ts = np.linspace(0.0, 1.0, per_edge, endpoint=False)
        pts.extend(a + (b - a) * ts)
    return np.asarray(pts)


def _branch_point_clearance(region, cfg: SheetConfig, limit: float = 1e-6):
    re_lo, re_hi, im_lo, im_hi = region
    n_span = int(abs(im_hi) + abs(im_lo) + 2) * int(1 / cfg.omega + 2) + 4
    for n in range(-n_span, n_span + 1):
        bp = cfg.branch_point(n)
        dx = max(re_lo - bp.real, 0.0, bp.real - re_hi)
        dy = max(im_lo - bp.imag, 0.0, bp.imag - im_hi)
        inside = dx == 0.0 and dy == 0.0
        edge_dist = min(abs(bp.real - re_lo), abs(bp.real - re_hi),
                        abs(bp.imag - im_lo), abs(bp.imag - im_hi))
        if inside:
            raise ContourError(f"branch point {bp} inside counting region")
        if math.hypot(dx, dy) < limit:
            raise ContourError(f"branch point {bp} within {limit} of contour")


def count_zeros(region, params: ModelParams, cfg: SheetConfig,
                per_edge: int = 24) -> int:
    """Number of Wronskian zeros inside the rectangle ``region``
    (re_lo, re_hi, im_lo, im_hi), by the argument principle."""
    if params.r == 0:
        raise DegenerateAmplitudeError("counting needs r != 0")
    _branch_point_clearance(region, cfg)
    pts = _rectangle_points(region, per_edge)
    return _winding(pts, params, cfg)


def disk_count(center: complex, radius: float, params: ModelParams,
               cfg: SheetConfig, n_pts: int = 32) -> int:
    ts = np.linspace(0.0, 2 * math.pi, n_pts, endpoint=False)
    pts = center + radius * np.exp(1j * ts)
    return _winding(pts, params, cfg)


# ---------------------------------------------------------------------------
# refinement


def _wronskian_value(z, params, cfg):
    return wronskian_grid(np.asarray([z]), params, cfg)[0][0]


def refine_zero(guess: complex, params: ModelParams, cfg: SheetConfig,
                check_simple: bool = True,
                reference: SheetConfig | None = None) -> Resonance:
    """Newton refinement of a Wronskian zero from ``guess``.

    The derivative is a central difference; steps are damped whenever
    |W| fails to decrease.  Divergence after 60 iterations or collapse
    onto a branch point raises.
    """
    if params.r == 0:
        raise DegenerateAmplitudeError("refine_zero needs r != 0; the r = 0 "
                                       "bound state is a closed form")
    z = complex(guess)
    W = _wronskian_value(z, params, cfg)
    for _ in range(NEWTON_MAX_ITER):
        h = 1e-7 * max(1.0, abs(z))
        Wp = (_wronskian_value(z + h, params, cfg)
              - _wronskian_value(z - h, params, cfg)) / (2 * h)
        if Wp == 0:
            raise ConvergenceError("flat Wronskian during refinement")
        dz = -W / Wp
        step = 1.0
        for _ in range(10):
            z_new = z + step * dz
            W_new = _wronskian_value(z_new, params, cfg)
            if abs(W_new) <= abs(W):
                break
            step *= 0.5
        else:
            raise ConvergenceError(f"Newton stalled at z={z}, |W|={abs(W)}")
        z, W = z_new, W_new
        nb = round((abs(z.imag) + 2) / params.omega) + 2
        for n in range(-nb, nb + 1):
            if abs(z - cfg.branch_point(n)) < 1e-9:
                raise ContourError(f"refinement collapsed onto branch point "
                                   f"{cfg.branch_point(n)}")
        if abs(step * dz) <= 1e-12 * max(1.0, abs(z)):
            break
    else:
        raise ConvergenceError(f"Newton did not converge from {guess}")
    count = 1
    if check_simple:
        count = disk_count(z, SIMPLICITY_RADIUS, params, cfg)
        if count != 1:
            raise DrivenDeltaError(
                f"zero at {z} is not simple in a {SIMPLICITY_RADIUS} disk "
                f"(count {count})")
    n0 = cfg.nearest_branch_index()
    p_star = 1j * (1 + n0 * cfg.omega) + z
    ref = reference if reference is not None else SheetConfig.usual(cfg.omega)
    return Resonance(z_star=z, sheet=cfg, p_star=p_star,
                     gamma=-p_star.real, visible=same_sheet(cfg, ref),
                     newton_residual=abs(W), disk_count=count)


def bound_state_resonance(params: ModelParams, psi0: InitialWavefunction,
                          cfg: SheetConfig | None = None) -> Resonance:
    """The r = 0 degenerate reference point: the unperturbed bound state.

    The transform has a simple pole at p = i with residue equal to the
    overlap of psi0 with the bound state e^{-|x|}.
    """
    if params.r != 0:
        raise DrivenDeltaError("bound_state_resonance is the r = 0 path")
    if cfg is None:
        cfg = SheetConfig.usual(params.omega)
    n0 = cfg.nearest_branch_index()
    z_star = -1j * n0 * cfg.omega   # p = i
    f_at_i = source_transform(0.0, 1j, psi0, cfg).f
    residue = 2j * f_at_i
    vec = ModeVector(n_min=n0, n_max=n0,
                     values=np.asarray([residue], dtype=complex))
    return Resonance(z_star=z_star, sheet=cfg, p_star=1j, gamma=0.0,
                     visible=cfg.is_usual(), newton_residual=0.0,
                     residues=vec)


# ---------------------------------------------------------------------------
# residues


def residues(res: Resonance, params: ModelParams, psi0: InitialWavefunction,
             eps: float | None = None, quad_points: int = 64,
             N: int = 128, src_sign: float = 1.0,
             src_sqrt_sign: float = 1.0) -> ModeVector:
    """Residue sideband vector by trapezoidal contour quadrature of the
    mode solve around the pole; doubles the node count until the vector
    is stable to 1e-9 and stores the result on ``res``."""
    if params.r == 0:
        vec = bound_state_resonance(params, psi0, res.sheet).residues
        res.residues = vec
        return vec
    cfg = res.sheet
    z0 = res.z_star
    bp_dist = min(abs(z0 - cfg.branch_point(n)) for n in range(-N, N + 1))
    if eps is None:
        eps = min(bp_dist / 3.0, 0.05)
    if eps <= 0 or eps >= bp_dist:
        raise ContourError(
            f"residue disk radius {eps} reaches a branch point "
            f"(distance {bp_dist})")
    if quad_points < 64:
        raise ValueError("quad_points must be >= 64")

    def trapezoid(Q):
        acc = np.zeros(2 * N + 1, dtype=complex)
        for j in range(Q):
            phase = cmath.exp(2j * math.pi * j / Q)
            y, _ = solve_modes(z0 + eps * phase, params, psi0, cfg, N=N,
                               src_sign=src_sign,
                               src_sqrt_sign=src_sqrt_sign)
            acc += y.values * phase
        return acc * (eps / Q)

    prev = trapezoid(quad_points)
    Q = 2 * quad_points
    while Q <= 1024:
        cur = trapezoid(Q)
        scale = float(np.max(np.abs(cur)))
        if scale == 0 or float(np.max(np.abs(cur - prev))) <= 1e-9 * scale:
            vec = ModeVector(n_min=-N, n_max=N, values=cur)
            res.residues = vec
            return vec
        prev = cur
        Q *= 2
    raise QuadratureError("residue quadrature did not stabilize under "
                          "node doubling")


def residue_recurrence_residual(res: Resonance, params: ModelParams) -> float:
    """Scaled residual of the residue three-term recurrence."""
    if res.residues is None:
        raise DrivenDeltaError("compute residues first")
    A = res.residues.values
    if A.size < 3:
        return 0.0
    h, _ = mode_coefficient_row(res.z_star, res.residues.n_min,
                                res.residues.n_max, res.sheet)
    lhs = h[1:-1] * A[1:-1] - params.r * (A[:-2] + A[2:])
    scale = max(float(np.max(np.abs(h * A))), 1e-300)
    return float(np.max(np.abs(lhs))) / scale


# ---------------------------------------------------------------------------
# asymptotic laws


def small_r_asymptote(params: ModelParams) -> complex:
    """Leading r^2 coefficient of the resonance position on the usual
    branch: z ~ a0 r^2 with a0 = 2i/h_1(0) + 2i/h_{-1}(0).

    The determination of both coefficients is the usual branch; this
    choice is pinned by a regression test against the extrapolated
    Wronskian zero (see tests).  Degenerate at omega = 1 where the n=-1
    branch point meets the expansion point.
    """
    if abs(params.omega - 1.0) < 1e-9:
        raise DrivenDeltaError("omega = 1 is degenerate for the small-r law")
    cfg = SheetConfig.usual(params.omega)
    h1 = mode_coefficient(0j, 1, cfg)
    hm1 = mode_coefficient(0j, -1, cfg)
    return 2j / h1 + 2j / hm1


def multiphoton_index(omega: float) -> int:
    """m with 1/(m+1) < omega <= 1/m (m = 0 for omega > 1)."""
    if omega > 1.0:
        return 0
    m = math.ceil(1.0 / omega) - 1
    if not (1.0 / (m + 1) < omega <= 1.0 / m):
        raise DrivenDeltaError(f"omega={omega} sits on a 1/m threshold")
    return m


def multiphoton_order(omega: float, r_grid) -> float:
    """Least-squares slope of log|Re z_star| against log r; the real
    part scales like r^{2m+2} in the m-photon window."""
    params0 = ModelParams(omega, max(r_grid))
    a0 = small_r_asymptote(params0)
    cfg = SheetConfig.usual(omega)
    re_parts = []
    for r in r_grid:
        params = ModelParams(omega, float(r))
        res = refine_zero(a0 * r * r, params, cfg, check_simple=False)
        if abs(res.z_star.real) < 1e-14:
            raise DynamicRangeError(
                f"|Re z| = {abs(res.z_star.real):.2e} at r={r} is below the "
                "float64 floor; reduce m or raise r")
        re_parts.append(abs(res.z_star.real))
    slope = float(np.polyfit(np.log(np.asarray(r_grid, dtype=float)),
                             np.log(np.asarray(re_parts)), 1)[0])
    return slope


# ---------------------------------------------------------------------------
# conjugate pairing


def conjugate_pair_sheet(res: Resonance, n_window: int = 128) -> SheetConfig:
    """Sheet on which the partner zero -conj(z_star) lives: flip every
    sideband whose branch-point argument lands in the lower half plane."""
    zp = -res.z_star.conjugate()
    flips = [n for n in range(-n_window, n_window + 1)
             if 1.0 + n * res.sheet.omega + zp.imag < 0.0]
    return res.sheet.flipped(*flips)


def conjugate_pair_check(res: Resonance, params: ModelParams) -> float:
    """Refine the partner zero near -conj(z_star) on the paired sheet and
    return |z_pair + conj(z_star)|."""
    cfg_pair = conjugate_pair_sheet(res)
    guess = -res.z_star.conjugate()
    try:
        pair = refine_zero(guess, params, cfg_pair, check_simple=False)
    except (ConvergenceError, ContourError) as exc:
        raise NoZeroFoundError(
            f"no partner zero near {guess}: {exc}") from exc
    if abs(pair.z_star - guess) > 0.5 * max(abs(guess), 0.1):
        raise NoZeroFoundError(
            f"refinement left the search disk: {pair.z_star} vs {guess}")
    return abs(pair.z_star + res.z_star.conjugate())


# ---------------------------------------------------------------------------
# region search and sweeps


def strip_bounds(omega: float, delta: float = 0.02):
    """Cut-free horizontal strip around Im z = 0 (shrunk by delta)."""
    cuts = sorted(-(1.0 + n * omega) for n in range(-int(3 / omega) - 3,
                                                    int(3 / omega) + 4))
    above = min(c for c in cuts if c > 1e-12)
    below = max(c for c in cuts if c < -1e-12)
    return below + delta, above - delta


def default_region(params: ModelParams, delta: float = 0.02):
    im_lo, im_hi = strip_bounds(params.omega, delta)
    re_lo = -((2 * abs(params.r) + 2.0) ** 2)
    return (re_lo, -1e-6, im_lo, im_hi)


def find_zeros_in_region(region, params: ModelParams, cfg: SheetConfig,
                         max_depth: int = 6,
                         reference: SheetConfig | None = None):
    """Count-and-refine over a box lattice covering ``region``."""
    re_lo, re_hi, im_lo, im_hi = region
    nx = max(1, int(math.ceil((re_hi - re_lo) / 1.2)))
    ny = max(1, int(math.ceil((im_hi - im_lo) / (0.8 * params.omega))))
    xs = np.linspace(re_lo, re_hi, nx + 1)
    ys = np.linspace(im_lo, im_hi, ny + 1)
    found = []
    total = 0

    def count_with_nudge(box):
        for shift in (0.0, 1.3e-3, -2.1e-3):
            b = (box[0] + shift, box[1] + shift, box[2] + shift,
                 box[3] + shift)
            if b[1] >= -1e-7:
                b = (b[0], -1e-7, b[2], b[3])
            try:
                return count_zeros(b, params, cfg), b
            except ContourError:
                continue
        raise ContourError(f"could not count cleanly near {box}")

    def handle(box, depth):
        nonlocal total
        cnt, box2 = count_with_nudge(box)
        if cnt == 0:
            return
        if depth == 0:
            total += cnt
        center = complex(0.5 * (box2[0] + box2[1]),
                         0.5 * (box2[2] + box2[3]))
        if cnt == 1:
            try:
                res = refine_zero(center, params, cfg, reference=reference)
            except (ConvergenceError, ContourError, DrivenDeltaError):
                res = None
            if res is not None and (box2[0] <= res.z_star.real <= box2[1]
                                    and box2[2] <= res.z_star.imag
                                    <= box2[3]):
                found.append(res)
                return
        if depth >= max_depth:
            raise NoZeroFoundError(f"could not isolate {cnt} zeros in {box2}")
        xm = 0.5 * (box2[0] + box2[1])
        ym = 0.5 * (box2[2] + box2[3])
        for sub in ((box2[0], xm, box2[2], ym), (xm, box2[1], box2[2], ym),
                    (box2[0], xm, ym, box2[3]), (xm, box2[1], ym, box2[3])):
            handle(sub, depth + 1)

    for i in range(nx):
        for j in range(ny):
            handle((xs[i], xs[i + 1], ys[j], ys[j + 1]), 0)

    unique = []
    for res in sorted(found, key=lambda r: (r.z_star.imag, r.z_star.real)):
        if all(abs(res.z_star - o.z_star) > 1e-8 for o in unique):
            unique.append(res)
    return unique, total


def find_resonances(params: ModelParams, cfg: SheetConfig | None = None,
                    region=None, psi0: InitialWavefunction | None = None,
                    reference: SheetConfig | None = None):
    """All Wronskian zeros of the given sheet inside the search region.

    At r = 0 returns the closed-form bound-state point (psi0 needed for
    its residue)."""
    if cfg is None:
        cfg = SheetConfig.usual(params.omega)
    if params.r == 0:
        if cfg.sheet(cfg.nearest_branch_index()) != "principal":
            return []   # the undriven pole needs the principal determination
        psi0_eff = psi0 if psi0 is not None else InitialWavefunction.zero()
        return [bound_state_resonance(params, psi0_eff, cfg)]
    if region is None:
        region = default_region(params)
    zeros, _ = find_zeros_in_region(region, params, cfg,
                                    reference=reference)
    return zeros


def sheet_family(omega: float, flips=(-2, -1, 0, 1, 2)):
    """The usual branch plus the single-flip sheets used by sweeps."""
    usual = SheetConfig.usual(omega)
    return [usual] + [usual.flipped(n) for n in flips]


def sweep_point(r: float, params_base: ModelParams, cfg_set,
                region=None, seeds=None,
                reference: SheetConfig | None = None) -> SweepRecord:
    """Resonances of all configured sheets at one drive amplitude."""
    params = replace(params_base, r=float(r))
    reg = region if region is not None else default_region(params)
    all_res = []
    total = 0
    status = "ok"
    for cfg in cfg_set:
        try:
            zeros, count = find_zeros_in_region(reg, params, cfg,
                                                reference=reference)
            total += count
            if seeds:
                for z0 in seeds:
                    if any(abs(z0 - res.z_star) < 0.1 for res in zeros):
                        continue
                    try:
                        extra = refine_zero(z0, params, cfg,
                                            reference=reference)
                        if all(abs(extra.z_star - res.z_star) > 1e-8
                               for res in zeros):
                            zeros.append(extra)
                    except DrivenDeltaError:
                        pass
            all_res.extend(zeros)
        except DrivenDeltaError as exc:
            status = f"partial: {exc}"
    all_res.sort(key=lambda res: (res.sheet.sheet_id(), res.z_star.imag))
    return SweepRecord(r=float(r), omega=params.omega, resonances=all_res,
                       zero_count_per_region=total, status=status)


def sweep(r_grid, params_base: ModelParams, cfg_set=None,
          tracking: bool = False, region=None,
          reference: SheetConfig | None = None):
    """Resonance sets along a monotone r grid; with ``tracking`` the
    previous zeros seed the next refinement and emergence events are
    logged whenever the count changes."""
    r_grid = list(r_grid)
    if any(b < a for a, b in zip(r_grid, r_grid[1:])):
        raise ValueError("r grid must be monotone nondecreasing")
    if cfg_set is None:
        cfg_set = [SheetConfig.usual(params_base.omega)]
    records = []
    seeds = None
    prev_count = None
    for r in r_grid:
        rec = sweep_point(r, params_base, cfg_set, region=region,
                          seeds=seeds if tracking else None,
                          reference=reference)
        if prev_count is not None and rec.zero_count_per_region != prev_count:
            rec.events.append(
                f"count {prev_count} -> {rec.zero_count_per_region}")
        prev_count = rec.zero_count_per_region
        if tracking:
            seeds = [res.z_star for res in rec.resonances]
            lost = [s for s in (seeds or [])
                    if not rec.resonances]
            if lost:
                rec.events.append("lost-track")
        records.append(rec)
    return records
