"""Exception types shared across the package."""


class JumpFieldError(Exception):
    """Base class for all package errors."""


class NonIntegrable(JumpFieldError):
    """Kernel quadrature failed to converge, or total mass is degenerate."""


class NegativeKernel(JumpFieldError):
    """A sampled rate value was negative."""


class MomentDiverges(JumpFieldError):
    """Shell sums of a moment integral fail the Cauchy criterion."""


class QuadratureFailure(JumpFieldError):
    """Adaptive quadrature exhausted its refinement budget."""


class GridMismatch(JumpFieldError):
    """Field defined on a different grid than the operator."""


class GridTooSmall(JumpFieldError):
    """Grid box cannot accommodate the scaled test-function support."""


class SeriesNotConverged(JumpFieldError):
    """Exponential series tail bound not reached within the term budget."""


class AsymmetricInput(JumpFieldError):
    """Two-point field is not symmetric under coordinate swap."""


class BoundViolated(JumpFieldError):
    """A certified inequality failed on the grid; worst node reported."""


class ZeroMass(JumpFieldError):
    """Intensity integrates to zero over the sampling box."""


class UnstablePotential(JumpFieldError):
    """Probe energy fell below the declared stability line."""


class SupportExceedsWindow(JumpFieldError):
    """Test-function support is not contained in the observation window."""


class ScaledSupportExceedsWindow(SupportExceedsWindow):
    """Support of the rescaled test function exceeds the window."""


class FOutOfRange(JumpFieldError):
    """Bogoliubov argument must satisfy -1 < f."""


class EmptyEnsemble(JumpFieldError):
    """Estimator needs at least two replicas."""


class NotIntegrableDifference(JumpFieldError):
    """Difference of intensity profiles is not integrable."""


class TooManyVertices(JumpFieldError):
    """Graph enumeration is capped at four vertices."""


class OutsideRegime(JumpFieldError):
    """High-temperature/low-activity condition fails; budgets are infinite."""


class MayerIntegralDiverges(JumpFieldError):
    """The Mayer integral C(beta) did not converge."""


class BudgetExceeded(JumpFieldError):
    """Projected work exceeds the configured cap."""


class ConfigInvalid(JumpFieldError):
    """Run configuration failed validation; message names the field path."""
