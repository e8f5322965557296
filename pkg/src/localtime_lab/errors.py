"""Exception types shared by all modules."""


class LabError(ValueError):
    """A precondition on an argument was violated."""


class QuadratureError(RuntimeError):
    """An adaptive quadrature or cubature failed to reach its tolerance."""


class ExperimentError(RuntimeError):
    """An experiment failed; the message names the experiment and the cause."""
