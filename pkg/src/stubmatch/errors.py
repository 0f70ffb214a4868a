"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain an operation is defined on."""


class MatchingError(ValueError):
    """A matching violates its structural invariants."""


class SizeError(ValueError):
    """An instance is too large for an exhaustive routine."""


class UnsupportedCase(Exception):
    """The requested construction does not cover this configuration."""


class TieWarning(UserWarning):
    """Exactly equal distances were found; ties are broken by smaller id."""
