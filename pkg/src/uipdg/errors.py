"""Exception types raised across the package."""


class UipdgError(Exception):
    """Base class for all package errors."""


class NonConvergence(UipdgError):
    """An iterative geometric search did not reach its tolerance."""


class NonSquareDomain(UipdgError):
    pass


class AssumptionIViolated(UipdgError):
    """An element's intersection pattern with the interface is not supported."""

    def __init__(self, element, detail=""):
        self.element = element
        super().__init__(f"element {element}: {detail}" if detail else f"element {element}")


class NoLargeNeighbor(UipdgError):
    def __init__(self, element, subdomain):
        self.element = element
        self.subdomain = subdomain
        super().__init__(f"small element {element} (subdomain {subdomain}) has no large edge neighbour")


class CardinalityViolation(UipdgError):
    pass


class OverlapDetected(UipdgError):
    pass


class DegenerateRegion(UipdgError):
    pass


class UnsupportedDegree(UipdgError):
    pass


class DimensionMismatch(UipdgError):
    pass


class UnknownExample(UipdgError):
    pass


class NotConverged(UipdgError):
    def __init__(self, iterations, residual):
        self.iterations = iterations
        self.residual = residual
        super().__init__(f"no convergence after {iterations} iterations (relative residual {residual:.3e})")


class IndefiniteDetected(UipdgError):
    """CG encountered a direction of non-positive curvature."""


class NoExactSolution(UipdgError):
    pass


class OutOfDomain(UipdgError):
    pass


class ConfigError(UipdgError):
    """Invalid experiment configuration; ``field`` names the offending key."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")
