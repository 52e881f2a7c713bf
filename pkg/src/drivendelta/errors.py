"""Exception types shared across the toolkit."""


class DrivenDeltaError(Exception):
    """Base class for all toolkit errors."""


class SingularPointError(DrivenDeltaError):
    """Evaluation requested exactly at a square-root branch point."""


class NearPoleError(DrivenDeltaError):
    """Mode system is numerically singular; carries the offending z."""

    def __init__(self, z, pivot):
        super().__init__(f"near-pole mode system at z={z} (pivot {pivot:.3e})")
        self.z = z
        self.pivot = pivot


class DegenerateAmplitudeError(DrivenDeltaError):
    """r == 0: one-sided solutions and the Wronskian are undefined."""


class SheetTransportError(DrivenDeltaError):
    """Sheet assignments cannot be moved consistently between strips."""


class ContourError(DrivenDeltaError):
    """Counting contour too close to a zero or branch point."""


class PhaseTrackingError(ContourError):
    """Phase step stayed ambiguous after maximal refinement."""


class ConvergenceError(DrivenDeltaError):
    """An iteration failed to reach its tolerance."""


class QuadratureError(DrivenDeltaError):
    """A quadrature failed to stabilize within its evaluation budget."""


class DynamicRangeError(DrivenDeltaError):
    """Requested quantity is below the resolvable floating-point floor."""


class NoZeroFoundError(DrivenDeltaError):
    """No Wronskian zero was located in the search region."""
