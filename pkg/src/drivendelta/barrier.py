"""Reduction of the barrier problem to the well problem.

Negating the square-root determination everywhere, the drive amplitude
and the source turns the barrier recurrence into the well recurrence,
so one solver stack serves both potentials.  The returned well-frame
parameters carry r < 0, which never leaks through public interfaces.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .errors import DrivenDeltaError
from .sheets import BARRIER, WELL, ModelParams, SheetConfig


@dataclass(frozen=True)
class PotentialTransform:
    """Involution mapping the barrier system onto the well system."""

    sheet_flip: bool = True
    r_sign: float = -1.0
    f_sign: float = -1.0

    def apply(self, params: ModelParams, cfg: SheetConfig,
              src_sign: float = 1.0):
        kind = WELL if params.potential_kind == BARRIER else BARRIER
        new_params = replace(params, r=self.r_sign * params.r,
                             potential_kind=kind)
        new_cfg = cfg.flipped_all() if self.sheet_flip else cfg
        return new_params, new_cfg, self.f_sign * src_sign


def to_well_frame(params: ModelParams, cfg: SheetConfig,
                  psi0=None):
    """Map barrier parameters to the equivalent well frame.

    Returns (well_params, well_cfg, source_sign); the barrier's usual
    branch corresponds to the all-second well-frame sheet.
    """
    if params.potential_kind != BARRIER:
        raise DrivenDeltaError("to_well_frame expects barrier parameters")
    return PotentialTransform().apply(params, cfg)
