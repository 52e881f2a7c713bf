"""Branch-aware complex square roots and sideband coefficients.

Everything downstream works on the Riemann surface of the family of
square roots sqrt(w_n(z)) with w_n(z) = i(1 + n*omega) + z.  Each
sideband index n has its own branch point at z = -i(1 + n*omega); a
:class:`SheetConfig` fixes one cut direction (shared by all branch
points) together with a per-n choice of determination.  Flipping the
determination of a single n is how the solvers step onto neighbouring
sheets.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DrivenDeltaError

SQRT_MINUS_I = cmath.exp(-0.25j * math.pi)  # principal sqrt(-i)
I_POW_3_2 = cmath.exp(0.75j * math.pi)      # principal i**(3/2)

PRINCIPAL = "principal"
SECOND = "second"

WELL = "well"
BARRIER = "barrier"


@dataclass(frozen=True)
class ModelParams:
    """Drive frequency, relative drive amplitude and potential sign.

    ``r < 0`` never enters through public interfaces; it only appears in
    the internal well frame produced by the barrier reduction.
    """

    omega: float
    r: float
    potential_kind: str = WELL

    def __post_init__(self):
        if not (math.isfinite(self.omega) and self.omega > 0):
            raise ValueError(f"omega must be finite and > 0, got {self.omega}")
        if not math.isfinite(self.r):
            raise ValueError(f"r must be finite, got {self.r}")
        if self.potential_kind not in (WELL, BARRIER):
            raise ValueError(f"unknown potential_kind {self.potential_kind!r}")


def _normalize_overrides(overrides):
    if isinstance(overrides, dict):
        items = overrides.items()
    else:
        items = overrides
    out = []
    for n, sheet in items:
        if sheet not in (PRINCIPAL, SECOND):
            raise ValueError(f"unknown sheet selector {sheet!r}")
        out.append((int(n), sheet))
    out.sort()
    ns = [n for n, _ in out]
    if len(set(ns)) != len(ns):
        raise ValueError("duplicate override indices")
    return tuple(out)


@dataclass(frozen=True)
class SheetConfig:
    """Cut direction plus per-sideband square-root determinations.

    ``cut_angle`` is the direction of every branch cut (the ray
    arg(w) = cut_angle in the w-plane of each sqrt argument).  The
    default pi puts all cuts along the negative real axis of w, which is
    the usual principal determination.  Points exactly on a cut take the
    limit from the counterclockwise side (arg -> cut_angle^-).
    """

    omega: float
    cut_angle: float = math.pi
    default_sheet: str = PRINCIPAL
    overrides: tuple = field(default=())

    def __post_init__(self):
        if not (math.isfinite(self.omega) and self.omega > 0):
            raise ValueError(f"omega must be finite and > 0, got {self.omega}")
        if abs(math.cos(self.cut_angle)) < 1e-12:
            raise DrivenDeltaError(
                f"cut_angle {self.cut_angle} has cos(theta) = 0; cuts must not "
                "be vertical")
        if self.default_sheet not in (PRINCIPAL, SECOND):
            raise ValueError(f"unknown sheet selector {self.default_sheet!r}")
        object.__setattr__(self, "overrides",
                           _normalize_overrides(self.overrides))

    @classmethod
    def usual(cls, omega: float) -> "SheetConfig":
        """The usual branch: principal determination everywhere, cut at pi."""
        return cls(omega=omega)

    # -- selectors ---------------------------------------------------------

    def sheet(self, n: int) -> str:
        for m, s in self.overrides:
            if m == n:
                return s
        return self.default_sheet

    def sign(self, n: int) -> float:
        return 1.0 if self.sheet(n) == PRINCIPAL else -1.0

    def signs(self, n_lo: int, n_hi: int) -> np.ndarray:
        """Vector of determination signs for n in [n_lo, n_hi]."""
        base = 1.0 if self.default_sheet == PRINCIPAL else -1.0
        out = np.full(n_hi - n_lo + 1, base)
        for m, s in self.overrides:
            if n_lo <= m <= n_hi:
                out[m - n_lo] = 1.0 if s == PRINCIPAL else -1.0
        return out

    # -- derived geometry --------------------------------------------------

    def nearest_branch_index(self) -> int:
        """Index n0 minimizing |1 + n*omega| (ties toward 1 + n0*omega >= 0)."""
        lo = math.floor(-1.0 / self.omega)
        cands = sorted((abs(1 + n * self.omega), -(1 + n * self.omega >= 0), n)
                       for n in (lo, lo + 1))
        return cands[0][2]

    def nearest_branch_point(self) -> complex:
        n0 = self.nearest_branch_index()
        return -1j * (1 + n0 * self.omega)

    def branch_point(self, n: int) -> complex:
        return -1j * (1 + n * self.omega)

    # -- derived configs ----------------------------------------------------

    def flipped(self, *ns: int) -> "SheetConfig":
        """Toggle the determination of the listed sideband indices."""
        table = dict(self.overrides)
        for n in ns:
            cur = table.get(n, self.default_sheet)
            new = SECOND if cur == PRINCIPAL else PRINCIPAL
            if new == self.default_sheet:
                table.pop(n, None)
            else:
                table[n] = new
        return replace(self, overrides=tuple(sorted(table.items())))

    def flipped_all(self) -> "SheetConfig":
        """Negate every determination (default and overrides)."""
        other = {PRINCIPAL: SECOND, SECOND: PRINCIPAL}
        return replace(self,
                       default_sheet=other[self.default_sheet],
                       overrides=tuple((n, other[s]) for n, s in self.overrides))

    def shifted(self, k: int) -> "SheetConfig":
        """Transport selectors under z -> z -+ i*omega (override keys += k)."""
        return replace(self,
                       overrides=tuple((n + k, s) for n, s in self.overrides))

    def with_cut(self, angle: float) -> "SheetConfig":
        return replace(self, cut_angle=angle)

    def is_usual(self) -> bool:
        return (self.default_sheet == PRINCIPAL and not self.overrides)

    def sheet_id(self) -> str:
        """Compact human-readable identifier ('usual', 'flip:-1', ...)."""
        flips = [n for n, s in self.overrides if s != self.default_sheet]
        base = "usual" if self.default_sheet == PRINCIPAL else "second"
        if not flips:
            return base
        tag = ",".join(str(n) for n in flips)
        return f"{base}+flip:{tag}" if base == "second" else f"flip:{tag}"


# ---------------------------------------------------------------------------
# square roots


def _shift_arg(a: float, cut: float) -> float:
    while a > cut:
        a -= 2 * math.pi
    while a <= cut - 2 * math.pi:
        a += 2 * math.pi
    return a


def sqrt_on_sheet(w: complex, cfg: SheetConfig, n: int = 0) -> complex:
    """Square root of ``w`` on the sheet assigned to sideband ``n``.

    The principal value is continuous away from the ray
    arg(w) = cfg.cut_angle and squares back to ``w``; the second sheet is
    its negative.  Points on the cut take the counterclockwise limit.
    """
    w = complex(w)
    if not (math.isfinite(w.real) and math.isfinite(w.imag)):
        raise DrivenDeltaError(f"non-finite sqrt argument {w}")
    if w == 0:
        return 0j
    a = _shift_arg(cmath.phase(w), cfg.cut_angle)
    root = math.sqrt(abs(w)) * cmath.exp(0.5j * a)
    return root if cfg.sign(n) > 0 else -root


def sqrt_principal_array(w: np.ndarray, cut_angle: float) -> np.ndarray:
    """Vectorized principal sqrt with the cut along arg(w) = cut_angle."""
    w = np.asarray(w, dtype=complex)
    a = np.angle(w)
    a = np.where(a > cut_angle, a - 2 * math.pi, a)
    a = np.where(a <= cut_angle - 2 * math.pi, a + 2 * math.pi, a)
    return np.sqrt(np.abs(w)) * np.exp(0.5j * a)


def mode_coefficient(z: complex, n: int, cfg: SheetConfig) -> complex:
    """Diagonal coefficient sqrt(-i)*sqrt(i(1+n*omega)+z) - 1 of the
    three-term sideband recurrence, on the configured sheet."""
    w = 1j * (1 + n * cfg.omega) + z
    return SQRT_MINUS_I * sqrt_on_sheet(w, cfg, n) - 1.0


def mode_coefficient_row(z, n_lo: int, n_hi: int, cfg: SheetConfig):
    """Coefficients and sheeted square roots for all n in [n_lo, n_hi].

    Returns ``(h, sqrt_w)`` where ``sqrt_w[k]`` is the determination used
    for sideband ``n_lo + k``; both are vectorized over a scalar or array
    ``z`` (z-axis last).
    """
    n = np.arange(n_lo, n_hi + 1)
    z = np.asarray(z, dtype=complex)
    w = 1j * (1 + n * cfg.omega)[(...,) + (None,) * z.ndim] + z
    root = sqrt_principal_array(w, cfg.cut_angle)
    root *= cfg.signs(n_lo, n_hi)[(...,) + (None,) * z.ndim]
    return SQRT_MINUS_I * root - 1.0, root
