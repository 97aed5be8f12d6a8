"""Exception hierarchy shared by every module of the package."""

import numpy as np


class SpatialMissError(Exception):
    """Base class for all package errors."""


class InvalidInputError(SpatialMissError, ValueError):
    """Malformed, non-finite or dimensionally inconsistent input."""


class InvalidParameterError(SpatialMissError, ValueError):
    """A model parameter lies outside its admissible range."""


class NotPositiveDefiniteError(SpatialMissError, np.linalg.LinAlgError):
    """Cholesky factorization hit a pivot at or below tolerance."""


class SingularityError(NotPositiveDefiniteError):
    """A CAR coefficient makes ``I - lambda*D`` singular or indefinite."""


# -- model validation ------------------------------------------------------

class ValidationError(SpatialMissError, ValueError):
    """Base class for ModelSpec / SpatialDataset validation failures."""


class IndexOutOfRangeError(ValidationError):
    pass


class CycleError(ValidationError):
    """A conditional ordering refers to itself or to a later element."""


class MARViolationError(ValidationError):
    """A MAR missingness model references a missing-prone covariate or a
    spatial effect."""


class SubModelCoverageError(ValidationError):
    """Missing-prone covariates and covariate sub-models do not pair up."""


class FixedParameterError(ValidationError):
    """Fixed sigma/lambda values are inconsistent with the spatial flags."""


class AdjacencyError(ValidationError):
    """A CAR structure was requested but no usable adjacency is available."""


class CannotInitializeError(SpatialMissError, ValueError):
    """A missing-prone column has no observed value to initialize from."""


# -- sampling / assessment -------------------------------------------------

class SamplerError(SpatialMissError, RuntimeError):
    """Numerical failure inside the sampler; carries the iteration index."""

    def __init__(self, message, iteration=None):
        super().__init__(message)
        self.iteration = iteration


class DegenerateLikelihoodError(SpatialMissError, ArithmeticError):
    """A recorded per-observation likelihood underflowed to zero."""


class CriterionUnavailableError(SpatialMissError, RuntimeError):
    """The requested criterion needs draws that were not recorded."""


class CalibrationError(SpatialMissError, RuntimeError):
    """Missingness calibration could not reach its targets."""

    def __init__(self, message, best_phi=None, best_rates=None):
        super().__init__(message)
        self.best_phi = best_phi
        self.best_rates = best_rates


# -- I/O --------------------------------------------------------------------

class ConfigError(SpatialMissError, ValueError):
    """Configuration file could not be parsed; ``line`` is 1-based."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class SchemaError(SpatialMissError, ValueError):
    """Dataset columns do not match what the model expects."""

    def __init__(self, message, columns=()):
        super().__init__(message)
        self.columns = list(columns)
