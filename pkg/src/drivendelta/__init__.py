"""Resonances, Gamow vectors and wave-function reconstruction for the
time-periodically driven 1-D delta potential."""

from .barrier import PotentialTransform, to_well_frame
from .errors import (ContourError, ConvergenceError, DegenerateAmplitudeError,
                     DrivenDeltaError, DynamicRangeError, NearPoleError,
                     NoZeroFoundError, PhaseTrackingError, QuadratureError,
                     SheetTransportError, SingularPointError)
from .modes import (ModeVector, SolveDiagnostics, periodicity_defect,
                    psi_laplace, reduce_to_strip, solve_modes)
from .profiles import InitialWavefunction, SourceValue, mode_source, \
    source_transform
from .reconstruct import (PsiDecomposition, WaveReconstructor, cut_integrals,
                          f_term_integral, free_evolution, gamow_term, psi_xt)
from .sheets import (BARRIER, WELL, ModelParams, SheetConfig,
                     mode_coefficient, mode_coefficient_row, sqrt_on_sheet)
from .tdse import (DecayFit, GridState, Trajectory, evolve, make_grid,
                   survival_decay)
from .wronskian import (OneSidedSolution, WronskianValue, minimal_downward,
                        minimal_upward, pick_anchors, wronskian,
                        wronskian_grid)
from .zeros import (Resonance, SweepRecord, bound_state_resonance,
                    conjugate_pair_check, count_zeros, disk_count,
                    find_resonances, multiphoton_index, multiphoton_order,
                    refine_zero, residue_recurrence_residual, residues,
                    sheet_family, small_r_asymptote, strip_bounds, sweep,
                    sweep_point)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
