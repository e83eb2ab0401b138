"""Exception hierarchy shared across the package."""


class PgloError(Exception):
    """Base class for all errors raised by pglo."""


class ConfigError(PgloError, ValueError):
    """Invalid run, study or problem configuration."""


class DomainError(PgloError, ValueError):
    """A location falls outside the design box."""


class ModelFitError(PgloError, RuntimeError):
    """A covariance matrix could not be factorized even after jitter escalation.

    Attributes:
        region_id: index of the local region whose matrix failed, or ``None``
            when the failure happened in the global model.
    """

    def __init__(self, message, region_id=None):
        super().__init__(message)
        self.region_id = region_id


class AcquisitionError(PgloError, RuntimeError):
    """The inner maximizer could not produce a feasible, distinct point."""
