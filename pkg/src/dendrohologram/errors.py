"""Exception hierarchy. Each family carries the CLI exit code it maps to."""


class DHTError(Exception):
    exit_code = 1
    kind = "error"


class ConfigError(DHTError, ValueError):
    exit_code = 2
    kind = "config"


class IngestionError(DHTError, ValueError):
    exit_code = 3
    kind = "ingestion"


class DomainError(DHTError, ValueError):
    """A numeric-domain violation (bad geometry, out-of-range input, ...)."""

    exit_code = 4
    kind = "domain"


class InvalidCodeError(DomainError):
    kind = "invalid-code"


class IncompatibleCodesError(DomainError):
    kind = "incompatible-codes"


class InvalidRadiusError(DomainError):
    kind = "invalid-radius"


class StateError(DomainError):
    kind = "state"


class DegenerateDensityError(DomainError):
    kind = "degenerate-density"


class HorizonError(DomainError):
    kind = "horizon-domain"


class IntegrationAbort(DomainError):
    kind = "integration-abort"

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class VerificationError(DHTError):
    exit_code = 5
    kind = "verification"
