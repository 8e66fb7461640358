"""Exception types raised across the package."""


class BapcError(Exception):
    """Base class for all package errors."""


class ValidationError(BapcError, ValueError):
    """Inputs violate a documented precondition."""


class NonFiniteInput(ValidationError):
    pass


class RankDeficient(BapcError):
    """The least-squares normal equations are singular."""


class EmptyNeighborhood(ValidationError):
    pass


class DomainError(ValidationError):
    """An argument lies outside the domain of a closed-form expression."""
