"""Parallel global-local optimization of noisy black-box functions."""

from .archive import DesignArchive, DesignPoint
from .config import RunConfig, parse_config
from .engine import RunResult, initialize, resume, run, run_baseline_multistart_ps
from .errors import AcquisitionError, ConfigError, DomainError, ModelFitError, PgloError
from .surrogate import AglgpModel, fit, partition_space

__all__ = [
    "AcquisitionError",
    "AglgpModel",
    "ConfigError",
    "DesignArchive",
    "DesignPoint",
    "DomainError",
    "ModelFitError",
    "PgloError",
    "RunConfig",
    "RunResult",
    "fit",
    "initialize",
    "parse_config",
    "partition_space",
    "resume",
    "run",
    "run_baseline_multistart_ps",
]

__version__ = "0.1.0"
