"""Exception types shared across the package."""


class SentgateError(Exception):
    """Base class for all package-specific errors."""


class ShapeError(SentgateError, ValueError):
    """Operands have incompatible shapes."""


class DomainError(SentgateError, ValueError):
    """Input is outside an operation's mathematical domain."""


class ContractError(SentgateError, ValueError):
    """A caller violated a documented precondition."""


class DatasetError(SentgateError, ValueError):
    """A dataset file or record is malformed."""


class TrainingDiverged(SentgateError, RuntimeError):
    """Training produced a non-finite loss."""
