"""Exception types shared across the package."""


class LdtailError(Exception):
    """Base class for all package errors."""


class DomainError(LdtailError, ValueError):
    """An argument lies outside the domain of the operation."""


class BudgetExceeded(LdtailError):
    """A requested computation exceeds the configured work budget."""


class CertificateError(LdtailError):
    """A covering-net certificate could not be established."""


class ConfigError(LdtailError, ValueError):
    """An experiment configuration failed validation."""
