"""Exception types shared across the package."""


class SdcError(Exception):
    pass


class UnsupportedNodeCount(SdcError, ValueError):
    pass


class DegenerateNodes(SdcError, ValueError):
    pass


class RoleMismatch(SdcError, ValueError):
    pass


class InvalidFinalUpdate(SdcError, ValueError):
    pass


class DimensionMismatch(SdcError, ValueError):
    pass


class DegenerateFit(SdcError):
    pass


class SingularSystem(SdcError):
    pass


class NonFiniteState(SdcError):
    pass


class NoConvergence(SdcError):
    """An iterative solve ran out of iterations; the current step must abort."""

    def __init__(self, residual: float, iterations: int, what: str = "solver"):
        super().__init__(f"{what} did not converge: residual {residual:.3e} after {iterations} iterations")
        self.residual = residual
        self.iterations = iterations
