"""Exception types shared across the pipeline."""


class QdgenError(Exception):
    """Base class for all package errors."""


class ConfigError(QdgenError):
    """Invalid configuration; carries field-level diagnostics."""

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class GatewayError(QdgenError):
    """A backend call failed; records the role and attempt count."""

    def __init__(self, message, role="?", attempts=1):
        super().__init__(f"{message} (role={role}, attempts={attempts})")
        self.role = role
        self.attempts = attempts


class TransportError(GatewayError):
    """Retryable transport failure (network error, throttling, 5xx)."""


class PermanentBackendError(GatewayError):
    """Malformed endpoint response or other non-retryable failure."""


class MutationParseError(QdgenError):
    """Mutation completion could not be parsed even after the retry."""


class UnusableVerificationError(QdgenError):
    """More than half of a verification set failed on infrastructure."""


class DataError(QdgenError):
    """Invalid or insufficient input data (seed files, pools, budgets)."""
