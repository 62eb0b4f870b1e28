"""Exception hierarchy for qgc-mac."""


class QgcMacError(Exception):
    """Base class for all qgc-mac errors."""


class DomainError(QgcMacError, ValueError):
    """An argument lies outside the domain of an operation."""


class ResourceCapError(QgcMacError):
    """An enumeration would exceed its configured cap."""


class DocumentError(DomainError):
    """A structured document failed validation at ``path``."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


class ChannelLoadError(DocumentError):
    """A channel document failed validation."""


class AssignmentLoadError(DocumentError):
    """An assignment or experiment document failed validation."""


class UnsupportedChannelError(DomainError):
    """The channel has a structure the region formulas do not cover."""


class InfeasibleAssignmentError(DomainError):
    """An assignment violates a cost budget or a threshold condition."""


class VerificationError(QgcMacError):
    """A numerically checked bound does not hold."""

    def __init__(self, message: str, witness: dict | None = None):
        self.witness = witness or {}
        super().__init__(message)
