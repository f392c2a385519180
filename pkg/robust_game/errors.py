"""Exception hierarchy for robust game experiments.

Every error carries the process exit code the CLI returns for it.
"""
from typing import Any, Optional

import numpy as np


class RobustGameError(Exception):
    """Base class for all errors raised by the package."""

    exit_code = 1


class ConfigurationError(RobustGameError):
    """Scenario or model definition is inconsistent."""

    exit_code = 2


class AssumptionViolationError(RobustGameError):
    """Stabilizability-detectability assumption does not hold."""

    exit_code = 3


class FalsificationError(RobustGameError):
    """Recorded data is inconsistent with the lumped disturbance set."""

    exit_code = 4

    def __init__(self, message: str, sample_index: Optional[int] = None):
        if sample_index is not None:
            message = f"{message} (sample {sample_index})"
        super().__init__(message)
        self.sample_index = sample_index


class RobustInfeasibleError(RobustGameError):
    """No common quadratic certificate exists for the unfalsified set."""

    exit_code = 5


class DivergenceError(RobustGameError):
    """Simulated state became non-finite."""

    exit_code = 6

    def __init__(self, message: str, blow_up_time: float):
        super().__init__(f"{message} at t={blow_up_time:.6g}s")
        self.blow_up_time = blow_up_time


class ConvergenceError(RobustGameError):
    """An iterative solver ran out of iterations."""

    exit_code = 7

    def __init__(self, message: str, diagnostics: Optional[dict[str, Any]] = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class EstimationError(RobustGameError):
    """Least-squares regressor is rank deficient."""

    exit_code = 8

    def __init__(self, message: str, deficient_subspace: Optional[np.ndarray] = None):
        super().__init__(message)
        self.deficient_subspace = deficient_subspace


class NumericalError(RobustGameError):
    """A numerical solver failed or returned an unusable iterate."""

    exit_code = 9

    def __init__(self, message: str, iterate: Optional[dict[str, Any]] = None):
        super().__init__(message)
        self.iterate = iterate or {}


class ContractViolationError(RobustGameError):
    """A function was called outside its precondition."""

    exit_code = 10


class InputError(RobustGameError):
    """Malformed input data (empty trajectory, off-grid sample time)."""

    exit_code = 11


class CertificateError(RobustGameError):
    """The epsilon certificate cannot be computed for the given uncertainty."""

    exit_code = 12
