"""One-sided decaying solutions and the discrete Wronskian.

The homogeneous recurrence h_n(z) x_n = r (x_{n-1} + x_{n+1}) has a
solution u decaying as n -> +oo and a solution v decaying as n -> -oo
(the minimal solutions in each direction).  Their discrete Wronskian

    W = u_n v_{n+1} - v_n u_{n+1}

is independent of n; resonances are exactly its zeros.  Two independent
constructions are provided: the contraction fixed-point iteration and
backward continued fractions; they agree to roundoff and cross-validate
each other.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (ConvergenceError, DegenerateAmplitudeError,
                     DrivenDeltaError)
from .sheets import ModelParams, SheetConfig, mode_coefficient_row

ITERATION = "iteration"
CONTINUED_FRACTION = "continued_fraction"

ANCHOR_MARGIN = 0.5


@dataclass
class OneSidedSolution:
    """Values of a one-sided decaying solution on [n_lo, n_hi].

    Normalization: the entry just inside the anchor equals 1
    (u_{n1-1} = 1 for the upward solution, v_{n2+1} = 1 downward).
    """

    direction: str            # 'upward' decays as n -> +inf
    anchor: int
    n_lo: int
    n_hi: int
    values: np.ndarray
    method: str

    def __getitem__(self, n: int) -> complex:
        if not (self.n_lo <= n <= self.n_hi):
            raise IndexError(f"mode {n} outside [{self.n_lo}, {self.n_hi}]")
        return complex(self.values[n - self.n_lo])

    def tail_weighted_norm(self) -> float:
        """Weighted tail norm beyond the anchor (finite by construction)."""
        if self.direction == "upward":
            n = np.arange(self.anchor, self.n_hi + 1)
            vals = self.values[self.anchor - self.n_lo:]
        else:
            n = np.arange(self.n_lo, self.anchor + 1)
            vals = self.values[:self.anchor - self.n_lo + 1]
        return math.sqrt(float(np.sum((1 + np.abs(n) ** 1.5)
                                      * np.abs(vals) ** 2)))

    def residual(self, z: complex, params: ModelParams,
                 cfg: SheetConfig) -> float:
        """Interior residual of the homogeneous recurrence, scaled to the
        largest row magnitude of the solution."""
        h, _ = mode_coefficient_row(z, self.n_lo, self.n_hi, cfg)
        x = self.values
        res = h[1:-1] * x[1:-1] - params.r * (x[:-2] + x[2:])
        scale = max(float(np.max(np.abs(h[1:-1] * x[1:-1]))), 1e-300)
        return float(np.max(np.abs(res)) / scale)


@dataclass
class WronskianValue:
    W: complex
    n_spread: float
    sheet: SheetConfig
    anchors: tuple
    method: str


# ---------------------------------------------------------------------------
# anchors


def _bound_index(z_abs: float, params: ModelParams, margin: float) -> int:
    """Sideband count beyond which sqrt(|1+n w|-|z|)-1 > 2|r|+margin."""
    thr = (2.0 * abs(params.r) + margin + 1.0) ** 2 + z_abs + 1.0
    return int(math.ceil(thr / params.omega)) + 1


def pick_anchors(z: complex, params: ModelParams, cfg: SheetConfig,
                 margin: float = ANCHOR_MARGIN):
    """Smallest n1 > 0 and largest n2 < 0 with |h_n| > 2|r| + margin for
    all n beyond them."""
    nb = _bound_index(abs(z), params, margin)
    thr = 2.0 * abs(params.r) + margin
    h_up, _ = mode_coefficient_row(z, 1, nb, cfg)
    bad = np.where(np.abs(h_up) <= thr)[0]
    n1 = 1 if bad.size == 0 else int(bad[-1]) + 2
    h_dn, _ = mode_coefficient_row(z, -nb, -1, cfg)
    bad = np.where(np.abs(h_dn) <= thr)[0]
    n2 = -1 if bad.size == 0 else -nb + int(bad[0]) - 1
    if n1 > nb or n2 < -nb:
        raise DrivenDeltaError(f"no contraction anchors at z={z}")
    return n1, n2


def _anchor_ok(z, params, cfg, n_from, n_to, margin):
    h, _ = mode_coefficient_row(z, min(n_from, n_to), max(n_from, n_to), cfg)
    return bool(np.all(np.abs(h) > 2.0 * abs(params.r) + margin))


# ---------------------------------------------------------------------------
# constructions


def _tail_by_iteration(h: np.ndarray, r: float, tol: float):
    """Fixed point of x = T x + a on the window (index 0 = anchor)."""
    contraction = float(np.max(2.0 * abs(r) / np.abs(h)))
    if contraction >= 1.0:
        return None
    x = np.zeros(h.size, dtype=complex)
    g = r / h
    for _ in range(10000):
        xn = np.empty_like(x)
        xn[0] = g[0] * (x[1] + 1.0)
        xn[1:-1] = g[1:-1] * (x[:-2] + x[2:])
        xn[-1] = g[-1] * x[-2]
        delta = float(np.max(np.abs(xn - x)))
        x = xn
        if delta <= tol * max(float(np.max(np.abs(x))), 1e-300):
            return x
    raise ConvergenceError("one-sided tail iteration hit its cap")


def _tail_by_continued_fraction(z, params, cfg, anchor, up: bool,
                                span: int, keep: int):
    """Ratios by backward recursion; returns solution values on
    ``keep`` modes starting at the anchor and moving away from it."""
    r = params.r
    prev = None
    depth = 2 * span + 40
    for _ in range(8):
        if up:
            h, _ = mode_coefficient_row(z, anchor, anchor + depth, cfg)
            h = h[::-1]
        else:
            h, _ = mode_coefficient_row(z, anchor - depth, anchor, cfg)
        rho = np.zeros((), dtype=complex)
        ratios = np.empty(keep, dtype=complex)
        for i in range(h.size):
            rho = r / (h[i] - r * rho)
            k = h.size - 1 - i
            if k < keep:
                ratios[k] = rho
        cur = ratios[0]
        if prev is not None and abs(cur - prev) <= 1e-12 * max(abs(cur),
                                                               1e-300):
            vals = np.empty(keep, dtype=complex)
            acc = 1.0 + 0j
            for k in range(keep):
                acc *= ratios[k]
                vals[k] = acc
            return vals
        prev = cur
        depth *= 2
    raise ConvergenceError("continued fraction depth doubling stalled")


def _build(z, params, cfg, direction, tol, method, anchor, n_keep,
           extend_to):
    r = params.r
    if r == 0:
        raise DegenerateAmplitudeError(
            "one-sided solutions need r != 0; use the closed bound-state "
            "path instead")
    up = direction == "upward"
    span = abs(anchor - extend_to) + 2

    if method == ITERATION:
        window = max(48, n_keep + 8)
        for attempt in range(6):
            lo, hi = (anchor, anchor + window) if up \
                else (anchor - window, anchor)
            h, _ = mode_coefficient_row(z, lo, hi, cfg)
            if not up:
                h = h[::-1]
            tail = _tail_by_iteration(h, r, tol)
            if tail is None:
                anchor = anchor + 2 if up else anchor - 2  # escalate anchor
                continue
            if abs(tail[-1]) > 1e-15 * max(float(np.max(np.abs(tail))),
                                           1e-300):
                window *= 2
                continue
            break
        else:
            raise ConvergenceError("could not certify one-sided tail")
        tail = tail[:n_keep]
    elif method == CONTINUED_FRACTION:
        tail = _tail_by_continued_fraction(z, params, cfg, anchor, up, span,
                                           n_keep)
    else:
        raise ValueError(f"unknown method {method!r}")

    # inward extension by the recurrence, running in the growing direction
    if up:
        n_lo, n_hi = extend_to, anchor + tail.size - 1
        h_all, _ = mode_coefficient_row(z, n_lo, n_hi, cfg)
        vals = np.empty(n_hi - n_lo + 1, dtype=complex)
        vals[anchor - 1 - n_lo] = 1.0 + 0j
        vals[anchor - n_lo:] = tail
        for m in range(anchor - 1, extend_to, -1):
            i = m - n_lo
            vals[i - 1] = (h_all[i] / r) * vals[i] - vals[i + 1]
        return OneSidedSolution(direction="upward", anchor=anchor,
                                n_lo=n_lo, n_hi=n_hi, values=vals,
                                method=method)
    else:
        n_lo, n_hi = anchor - tail.size + 1, extend_to
        h_all, _ = mode_coefficient_row(z, n_lo, n_hi, cfg)
        vals = np.empty(n_hi - n_lo + 1, dtype=complex)
        vals[:tail.size] = tail[::-1]
        vals[tail.size] = 1.0 + 0j   # v_{anchor+1} = 1
        for m in range(anchor + 1, extend_to):
            i = m - n_lo
            vals[i + 1] = (h_all[i] / r) * vals[i] - vals[i - 1]
        return OneSidedSolution(direction="downward", anchor=anchor,
                                n_lo=n_lo, n_hi=n_hi, values=vals,
                                method=method)


def minimal_upward(z: complex, params: ModelParams, cfg: SheetConfig,
                   tol: float = 1e-14, method: str = ITERATION,
                   anchor: int | None = None,
                   extend_to: int | None = None) -> OneSidedSolution:
    """Solution decaying as n -> +oo, normalized to 1 just below its
    anchor, extended down to ``extend_to`` by the recurrence."""
    if params.r == 0:
        raise DegenerateAmplitudeError("r = 0 has no one-sided construction")
    n1, n2 = pick_anchors(z, params, cfg)
    if anchor is None:
        anchor = n1
    elif not _anchor_ok(z, params, cfg, anchor, anchor + 64, ANCHOR_MARGIN):
        raise DrivenDeltaError(f"anchor {anchor} violates |h| > 2r + margin")
    if extend_to is None:
        extend_to = n2 - 5
    return _build(z, params, cfg, "upward", tol, method, anchor,
                  n_keep=40, extend_to=extend_to)


def minimal_downward(z: complex, params: ModelParams, cfg: SheetConfig,
                     tol: float = 1e-14, method: str = ITERATION,
                     anchor: int | None = None,
                     extend_to: int | None = None) -> OneSidedSolution:
    """Solution decaying as n -> -oo (mirror of :func:`minimal_upward`)."""
    if params.r == 0:
        raise DegenerateAmplitudeError("r = 0 has no one-sided construction")
    n1, n2 = pick_anchors(z, params, cfg)
    if anchor is None:
        anchor = n2
    elif not _anchor_ok(z, params, cfg, anchor - 64, anchor, ANCHOR_MARGIN):
        raise DrivenDeltaError(f"anchor {anchor} violates |h| > 2r + margin")
    if extend_to is None:
        extend_to = n1 + 5
    return _build(z, params, cfg, "downward", tol, method, anchor,
                  n_keep=40, extend_to=extend_to)


def wronskian(z: complex, params: ModelParams, cfg: SheetConfig,
              method: str = ITERATION, anchors: tuple | None = None,
              tol: float = 1e-14) -> WronskianValue:
    """Discrete Wronskian of the two one-sided solutions at z.

    The value is evaluated on every overlapping pair and the spread
    across the window is reported; accepted evaluations have
    spread <= 1e-8 |W|.
    """
    if params.r == 0:
        raise DegenerateAmplitudeError("Wronskian undefined at r = 0")
    if anchors is None:
        anchors = pick_anchors(z, params, cfg)
    n1, n2 = anchors
    u = minimal_upward(z, params, cfg, tol=tol, method=method, anchor=n1,
                       extend_to=n2 - 5)
    v = minimal_downward(z, params, cfg, tol=tol, method=method, anchor=n2,
                         extend_to=n1 + 5)
    lo = max(u.n_lo, v.n_lo)
    hi = min(u.n_hi, v.n_hi)
    ns = np.arange(lo, hi)
    uu = np.array([u[n] for n in range(lo, hi + 1)])
    vv = np.array([v[n] for n in range(lo, hi + 1)])
    Wn = uu[:-1] * vv[1:] - vv[:-1] * uu[1:]
    W = complex(Wn[len(Wn) // 2])
    spread = float(np.max(np.abs(Wn - W)))
    return WronskianValue(W=W, n_spread=spread, sheet=cfg, anchors=(n1, n2),
                          method=method)


def wronskian_grid(zs, params: ModelParams, cfg: SheetConfig,
                   anchors: tuple | None = None):
    """Vectorized continued-fraction Wronskian over an array of z.

    Shares one pair of anchors across the batch (chosen for the worst
    |z|); intended for boundary walks and sweeps where thousands of
    evaluations are needed.
    """
    if params.r == 0:
        raise DegenerateAmplitudeError("Wronskian undefined at r = 0")
    zs = np.asarray(zs, dtype=complex)
    flat = zs.ravel()
    if anchors is None:
        zmax = float(np.max(np.abs(flat))) if flat.size else 0.0
        nb = _bound_index(zmax, params, ANCHOR_MARGIN)
        thr = 2.0 * abs(params.r) + ANCHOR_MARGIN
        # common anchors: validated on the whole batch
        n1 = None
        for cand in range(1, nb + 1):
            h, _ = mode_coefficient_row(flat, cand, nb, cfg)
            if np.all(np.abs(h) > thr):
                n1 = cand
                break
        n2 = None
        for cand in range(-1, -nb - 1, -1):
            h, _ = mode_coefficient_row(flat, -nb, cand, cfg)
            if np.all(np.abs(h) > thr):
                n2 = cand
                break
        if n1 is None or n2 is None:
            raise DrivenDeltaError("no valid common anchors for the batch")
        anchors = (n1, n2)
    n1, n2 = anchors
    r = params.r
    span = n1 - n2
    depth = 2 * span + 40

    def ratios(anchor, up, keep, depth):
        if up:
            h, _ = mode_coefficient_row(flat, anchor, anchor + depth, cfg)
            h = h[::-1]
        else:
            h, _ = mode_coefficient_row(flat, anchor - depth, anchor, cfg)
        rho = np.zeros(flat.shape, dtype=complex)
        out = np.empty((keep,) + flat.shape, dtype=complex)
        for i in range(h.shape[0]):
            rho = r / (h[i] - r * rho)
            k = h.shape[0] - 1 - i
            if k < keep:
                out[k] = rho
        return out

    for _ in range(8):
        ru = ratios(n1, True, 2, depth)
        rd = ratios(n2, False, 2, depth)
        ru2 = ratios(n1, True, 1, 2 * depth)
        err = np.max(np.abs(ru[0] - ru2[0]) /
                     np.maximum(np.abs(ru2[0]), 1e-300))
        if err <= 1e-12:
            break
        depth *= 2
    else:
        raise ConvergenceError("batched continued fraction stalled")

    # u on [n2-1, n1+1], v on [n2-1, n1+1]
    h_all, _ = mode_coefficient_row(flat, n2 - 1, n1 + 1, cfg)
    m_count = n1 + 1 - (n2 - 1) + 1
    u = np.empty((m_count,) + flat.shape, dtype=complex)
    v = np.empty((m_count,) + flat.shape, dtype=complex)
    iu = n1 - 1 - (n2 - 1)          # index of mode n1-1
    u[iu] = 1.0
    u[iu + 1] = ru[0]
    u[iu + 2] = ru[0] * ru[1]
    for m in range(n1 - 1, n2 - 1, -1):
        i = m - (n2 - 1)
        u[i - 1] = (h_all[i] / r) * u[i] - u[i + 1]
    iv = n2 + 1 - (n2 - 1)
    v[iv] = 1.0
    v[iv - 1] = rd[0]
    v[iv - 2] = rd[0] * rd[1]
    for m in range(n2 + 1, n1 + 1):
        i = m - (n2 - 1)
        v[i + 1] = (h_all[i] / r) * v[i] - v[i - 1]
    Wn = u[:-1] * v[1:] - v[:-1] * u[1:]
    W = Wn[Wn.shape[0] // 2]
    spread = np.max(np.abs(Wn - W[None, ...]), axis=0)
    return W.reshape(zs.shape), spread.reshape(zs.shape)
