"""Exception hierarchy for the ``erw`` package."""


class ERWError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(ERWError, ValueError):
    """A parameter lies outside the region where an operation is defined."""


class EmptyRegion(DomainError):
    """A search region contains no admissible point."""


class NonConvergence(ERWError, RuntimeError):
    """An iterative computation exhausted its budget."""


class HittingTimeout(ERWError):
    """The walk did not reach its target within the step cap.

    Attributes
    ----------
    target : int
    step_cap : int
    position : int
        Position of the walker when the cap was exhausted.
    """

    def __init__(self, target, step_cap, position):
        super().__init__(
            f"site {target} not reached within {step_cap} steps "
            f"(walker at {position})"
        )
        self.target = target
        self.step_cap = step_cap
        self.position = position
