"""Initial wave profiles and the Laplace-domain source they generate.

The source function is

    f(x, p) = -(i^{3/2} / (2 sqrt(p))) * (U(x, kappa) + L(x, kappa)),
    kappa   = i^{3/2} sqrt(p),
    U(x, kappa) = int_x^M  e^{kappa (s - x)} psi0(s) ds,
    L(x, kappa) = int_{-M}^x e^{kappa (x - s)} psi0(s) ds,

with all exponentials kept in the shifted, non-overflowing form.  For
polynomial and truncated-exponential profiles the one-sided moments are
closed-form; piecewise cubics go through adaptive quadrature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DrivenDeltaError, QuadratureError, SingularPointError
from .sheets import I_POW_3_2, SheetConfig, sqrt_on_sheet

POLY_BUMP = "poly_bump"
TRUNCATED_EXPONENTIAL = "truncated_exponential"
PIECEWISE_CUBIC = "piecewise_cubic"

_SERIES_CUT = 4.0


def _exp_power_integrals(a: float, kappa, kmax: int) -> np.ndarray:
    """E_j(a, kappa) = int_0^a e^{kappa u} u^j du for j = 0..kmax.

    Series for small |kappa| a (the upward recursion cancels there),
    recursion otherwise.  ``kappa`` may be an array.
    """
    kappa = np.atleast_1d(np.asarray(kappa, dtype=complex))
    out = np.zeros((kmax + 1,) + kappa.shape, dtype=complex)
    if a == 0.0:
        return out
    x = kappa * a
    small = np.abs(x) <= _SERIES_CUT
    if np.any(small):
        xs = x[small]
        for j in range(kmax + 1):
            term = np.ones_like(xs)
            acc = np.full_like(xs, 1.0 / (j + 1))
            for m in range(1, 60):
                term = term * xs / m
                acc += term / (j + m + 1)
                if np.max(np.abs(term)) < 1e-20:
                    break
            out[j][small] = acc * a ** (j + 1)
    big = ~small
    if np.any(big):
        kb = kappa[big]
        e = np.exp(kb * a)
        cur = (e - 1.0) / kb
        out[0][big] = cur
        for j in range(1, kmax + 1):
            cur = (a ** j * e - j * cur) / kb
            out[j][big] = cur
    return out


def _adaptive_segment(g, a, b, kappa, x, tol, budget):
    """Adaptive Simpson of e^{kappa (s - x)} g(s) over [a, b]."""
    def f(s):
        return np.exp(kappa * (s - x)) * g(s)

    def simpson(lo, hi, flo, fmid, fhi):
        return (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi)

    stack = [(a, b, f(a), f(0.5 * (a + b)), f(b), 0)]
    total = 0j
    used = 0
    while stack:
        lo, hi, flo, fmid, fhi, depth = stack.pop()
        m = 0.5 * (lo + hi)
        fl = f(0.5 * (lo + m))
        fr = f(0.5 * (m + hi))
        used += 2
        if used > budget[0]:
            raise QuadratureError("adaptive quadrature evaluation cap reached")
        whole = simpson(lo, hi, flo, fmid, fhi)
        left = simpson(lo, m, flo, fl, fmid)
        right = simpson(m, hi, fmid, fr, fhi)
        err = abs(left + right - whole)
        if err < 15.0 * tol * max(1.0, (hi - lo) / (b - a)) or depth > 48:
            total += left + right + (left + right - whole) / 15.0
        else:
            stack.append((lo, m, flo, fl, fmid, depth + 1))
            stack.append((m, hi, fmid, fr, fhi, depth + 1))
    return total


@dataclass(frozen=True)
class InitialWavefunction:
    """Compactly supported C^2 initial profile on [-M, M].

    Construct through :meth:`poly_bump`, :meth:`truncated_exponential` or
    :meth:`piecewise_cubic`; instances are immutable.
    """

    kind: str
    support: float
    coefficients: tuple = ()      # poly: psi0(s) = sum c_j s^j on [-M, M]
    rate: float = 1.0             # truncated exponential decay rate
    spline: Optional[object] = None

    def __post_init__(self):
        if not (math.isfinite(self.support) and self.support > 0):
            raise ValueError(f"support bound must be > 0, got {self.support}")

    # -- constructors --------------------------------------------------------

    @classmethod
    def poly_bump(cls, support: float = 1.0, coefficients=None):
        """Polynomial profile; default (1 - (x/M)^2)^2 on [-M, M]."""
        if coefficients is None:
            m2 = support * support
            coefficients = (1.0, 0.0, -2.0 / m2, 0.0, 1.0 / (m2 * m2))
        return cls(kind=POLY_BUMP, support=float(support),
                   coefficients=tuple(complex(c) for c in coefficients))

    @classmethod
    def truncated_exponential(cls, rate: float = 1.0, support: float = 8.0):
        """e^{-rate |x|} cut off at |x| = M (approximate bound state)."""
        if rate <= 0:
            raise ValueError("rate must be > 0")
        return cls(kind=TRUNCATED_EXPONENTIAL, support=float(support),
                   rate=float(rate))

    @classmethod
    def piecewise_cubic(cls, knots, values):
        """Natural cubic spline through (knots, complex values)."""
        from scipy.interpolate import CubicSpline
        knots = np.asarray(knots, dtype=float)
        values = np.asarray(values, dtype=complex)
        if knots.ndim != 1 or knots.size < 4:
            raise ValueError("need at least four knots")
        spl = CubicSpline(knots, values, bc_type="natural")
        return cls(kind=PIECEWISE_CUBIC, support=float(max(abs(knots[0]),
                                                           abs(knots[-1]))),
                   spline=spl)

    @classmethod
    def zero(cls, support: float = 1.0):
        return cls(kind=POLY_BUMP, support=float(support),
                   coefficients=(0j,))

    # -- evaluation -----------------------------------------------------------

    def value(self, x):
        x = np.asarray(x, dtype=float)
        scalar = x.ndim == 0
        x = np.atleast_1d(x)
        inside = np.abs(x) <= self.support
        if self.kind == POLY_BUMP:
            acc = np.zeros(x.shape, dtype=complex)
            for c in reversed(self.coefficients):
                acc = acc * x + c
            out = np.where(inside, acc, 0j)
        elif self.kind == TRUNCATED_EXPONENTIAL:
            out = np.where(inside, np.exp(-self.rate * np.abs(x)), 0.0)
            out = out.astype(complex)
        else:
            lo, hi = self.spline.x[0], self.spline.x[-1]
            inside = (x >= lo) & (x <= hi)
            out = np.zeros(x.shape, dtype=complex)
            if np.any(inside):
                out[inside] = self.spline(x[inside])
        if scalar:
            return complex(out[0])
        return out

    def integral(self) -> complex:
        """int psi0 dx, exact for the closed-form kinds."""
        if self.kind == POLY_BUMP:
            M = self.support
            tot = 0j
            for j, c in enumerate(self.coefficients):
                tot += c * (M ** (j + 1) - (-M) ** (j + 1)) / (j + 1)
            return tot
        if self.kind == TRUNCATED_EXPONENTIAL:
            return complex(2.0 * (1.0 - math.exp(-self.rate * self.support))
                           / self.rate)
        return complex(self.spline.integrate(self.spline.x[0],
                                             self.spline.x[-1]))

    # -- one-sided exponential moments ---------------------------------------

    def exp_moments(self, x: float, kappa):
        """(U, L) as defined in the module docstring, vectorized in kappa."""
        kappa = np.atleast_1d(np.asarray(kappa, dtype=complex))
        M = self.support
        if self.kind == POLY_BUMP:
            U = self._poly_U(min(max(x, -M), M), kappa)
            L = self._poly_L(min(max(x, -M), M), kappa)
            if x > M:
                L = L * np.exp(kappa * (x - M))
                U = np.zeros_like(L)
            elif x < -M:
                U = U * np.exp(kappa * (-M - x))
                L = np.zeros_like(U)
            return U, L
        if self.kind == TRUNCATED_EXPONENTIAL:
            return self._trunc_exp_moments(x, kappa)
        return self._spline_moments(x, kappa)

    def _poly_taylor(self, x: float) -> np.ndarray:
        """Coefficients b_k with psi0(x + u) = sum_k b_k u^k."""
        c = np.asarray(self.coefficients, dtype=complex)
        deg = c.size - 1
        b = np.zeros(deg + 1, dtype=complex)
        for j in range(deg + 1):
            for k in range(j + 1):
                b[k] += c[j] * math.comb(j, k) * x ** (j - k)
        return b

    def _poly_U(self, x, kappa):
        b = self._poly_taylor(x)
        E = _exp_power_integrals(self.support - x, kappa, b.size - 1)
        return np.tensordot(b, E, axes=(0, 0))

    def _poly_L(self, x, kappa):
        b = self._poly_taylor(x)
        signs = (-1.0) ** np.arange(b.size)
        E = _exp_power_integrals(x + self.support, kappa, b.size - 1)
        return np.tensordot(b * signs, E, axes=(0, 0))

    def _trunc_exp_moments(self, x, kappa):
        M, lam = self.support, self.rate
        zeros = np.zeros_like(kappa)
        xc = min(max(x, -M), M)

        def seg_U(a, b2, mu):
            # int_a^b e^{kappa (s - xc)} e^{mu s} ds for xc <= a <= b2
            if b2 <= a:
                return zeros
            E0 = _exp_power_integrals(b2 - a, kappa + mu, 0)[0]
            return np.exp(kappa * (a - xc) + mu * a) * E0

        def seg_L(a, b2, mu):
            # int_a^b e^{kappa (xc - s)} e^{mu s} ds for a <= b2 <= xc
            if b2 <= a:
                return zeros
            E0 = _exp_power_integrals(b2 - a, mu - kappa, 0)[0]
            return np.exp(kappa * (xc - a) + mu * a) * E0

        if xc >= 0:
            U = seg_U(xc, M, -lam)
            L = seg_L(-M, 0.0, lam) + seg_L(0.0, xc, -lam)
        else:
            U = seg_U(xc, 0.0, lam) + seg_U(0.0, M, -lam)
            L = seg_L(-M, xc, lam)
        if x > M:
            L = L * np.exp(kappa * (x - M))
            U = zeros
        elif x < -M:
            U = U * np.exp(kappa * (-M - x))
            L = zeros
        return U, L

    def _spline_moments(self, x, kappa, tol=1e-12):
        lo, hi = self.spline.x[0], self.spline.x[-1]
        budget = [10 ** 6]
        U = np.zeros_like(kappa)
        L = np.zeros_like(kappa)
        breaks = [float(b) for b in self.spline.x]
        xc = min(max(x, lo), hi)
        segs = sorted({xc} | set(breaks))
        segs = [s for s in segs if lo <= s <= hi]
        for i, kp in enumerate(kappa):
            for a, b2 in zip(segs[:-1], segs[1:]):
                if b2 <= xc:
                    L[i] += self._one_sided_segment(a, b2, -kp, xc, tol,
                                                    budget)
                else:
                    U[i] += self._one_sided_segment(a, b2, kp, xc, tol,
                                                    budget)
        if x > hi:
            L *= np.exp(kappa * (x - hi))
            U[:] = 0
        elif x < lo:
            U *= np.exp(kappa * (lo - x))
            L[:] = 0
        return U, L

    def _one_sided_segment(self, a, b2, kp, x0, tol, budget):
        """int_a^b e^{kp (s - x0)} g(s) ds; twice-by-parts when oscillatory."""
        g = self.spline
        if abs(kp) * (b2 - a) > 30.0:
            g1 = g.derivative(1)
            g2 = g.derivative(2)

            def boundary(s):
                return np.exp(kp * (s - x0)) * (g(s) / kp - g1(s) / kp ** 2)

            rest = _adaptive_segment(g2, a, b2, kp, x0, tol * abs(kp) ** 2,
                                     budget) / kp ** 2
            return boundary(b2) - boundary(a) + rest
        return _adaptive_segment(g, a, b2, kp, x0, tol, budget)


@dataclass(frozen=True)
class SourceValue:
    """f(x, p) together with its leading large-p behaviour psi0(x)/p."""

    f: complex
    asymptotic_leading: complex


def source_transform(x: float, p: complex, psi0: InitialWavefunction,
                     cfg: Optional[SheetConfig] = None, n: int = 0,
                     sqrt_p: Optional[complex] = None) -> SourceValue:
    """Laplace-domain source f(x, p) on the configured sheet.

    ``sqrt_p`` fixes the determination explicitly; otherwise it is taken
    from ``cfg`` for sideband ``n`` (principal with cut at pi if ``cfg``
    is None).
    """
    p = complex(p)
    if p == 0:
        raise SingularPointError("f(x, p) has a branch point at p = 0")
    if sqrt_p is None:
        if cfg is None:
            cfg = SheetConfig(omega=1.0)
        sqrt_p = sqrt_on_sheet(p, cfg, n)
    kappa = I_POW_3_2 * sqrt_p
    U, L = psi0.exp_moments(x, kappa)
    f = -(I_POW_3_2 / (2.0 * sqrt_p)) * (U + L)
    lead = psi0.value(x) / p
    return SourceValue(f=complex(f[0]), asymptotic_leading=complex(lead))


def source_at_zero(sqrt_p, psi0: InitialWavefunction) -> np.ndarray:
    """Vectorized f(0, p) given explicit square-root determinations."""
    sqrt_p = np.asarray(sqrt_p, dtype=complex)
    if np.any(sqrt_p == 0):
        raise SingularPointError("f(0, p) has a branch point at p = 0")
    kappa = I_POW_3_2 * sqrt_p
    U, L = psi0.exp_moments(0.0, kappa.ravel())
    f = -(I_POW_3_2 / (2.0 * sqrt_p.ravel())) * (U + L)
    return f.reshape(sqrt_p.shape)


def mode_source(z: complex, n: int, params, psi0: InitialWavefunction,
                cfg: SheetConfig) -> complex:
    """Sideband source f(0, w_n) + r f(0, w_{n-1}) + r f(0, w_{n+1}),
    each square root on its own sideband sheet."""
    roots = np.asarray([sqrt_on_sheet(1j * (1 + m * cfg.omega) + z, cfg, m)
                        for m in (n - 1, n, n + 1)])
    f3 = source_at_zero(roots, psi0)
    return complex(f3[1] + params.r * (f3[0] + f3[2]))
