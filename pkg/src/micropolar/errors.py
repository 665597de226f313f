"""Exception hierarchy shared by the solver modules."""


class MicropolarError(Exception):
    """Base class for all solver errors."""


class GridMismatchError(MicropolarError, ValueError):
    def __init__(self, message="incompatible grids"):
        super().__init__(message)


class CompatibilityError(MicropolarError):
    """Boundary velocity violates the zero net flux condition."""


class InflowError(MicropolarError):
    """The declared inflow arc is not a strict inflow arc."""


class DensityError(MicropolarError):
    """Boundary density data is not strictly positive."""


class LinearSolveError(MicropolarError):
    pass


class DivergenceError(MicropolarError):
    """Raised by the fixed-point driver when the iterates blow up.

    The partially filled report travels with the exception so callers can
    still write it out.
    """

    def __init__(self, message, report=None, state=None):
        super().__init__(message)
        self.report = report
        self.state = state


class ConfigError(MicropolarError):
    pass
