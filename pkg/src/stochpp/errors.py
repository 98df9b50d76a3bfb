"""Exception hierarchy shared across the package."""


class StochppError(Exception):
    """Base class for all package-specific errors."""


class ValidationError(StochppError):
    """Raised when model coefficients violate their constraints.

    ``violations`` lists every violated constraint, not just the first.
    """

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class RegimePreconditionError(StochppError):
    """The prey-only survival condition a1 > alpha^2/2 fails."""


class ToleranceNotMetError(StochppError):
    """Quadrature could not certify the requested tolerance."""


class NonPositiveCrowdingError(StochppError):
    pass


class NonPositivePointError(StochppError):
    pass


class NonPositiveLambdaError(StochppError):
    pass


class StepOverflowError(StochppError):
    """A log-coordinate state left the representable range (dt too large)."""

    def __init__(self, step, state):
        self.step = step
        self.state = state
        super().__init__(f"log-state overflow at step {step}: {state}")


class OverflowGuardError(StochppError):
    """Evaluating exp() of a log coordinate would overflow."""


class HorizonTooShortError(StochppError):
    pass


class UnknownFunctionalError(StochppError):
    pass


class GridMismatchError(StochppError):
    pass


class GridTooLargeError(StochppError):
    pass


class BracketFailureError(StochppError):
    """Could not establish a finite maximization bracket for h(., z)."""


class ScanInconclusiveError(StochppError):
    """sup_h was already non-positive at the low end of the scan window."""


class DepthExceededError(StochppError):
    pass


class ConfigError(StochppError):
    """Invalid or malformed run configuration."""
