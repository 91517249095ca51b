"""Exception types shared across the package."""


class ParocError(Exception):
    """Base class for all package-specific errors."""


class UnknownProblemError(ParocError, KeyError):
    """Requested problem name is not in the registry."""


class ParameterError(ParocError, ValueError):
    """Unknown parameter key or value outside its declared range."""


class IntegrationError(ParocError, RuntimeError):
    """Non-finite state or costate encountered during integration.

    ``node`` is the index of the first grid node at which the value
    became non-finite.
    """

    def __init__(self, message: str, node: int | None = None):
        super().__init__(message)
        self.node = node


class SingularMatrixError(ParocError, RuntimeError):
    """A matrix required to be invertible is numerically singular."""


class StructureError(ParocError, RuntimeError):
    """A structural assumption (constant nullspace dimension) fails."""
