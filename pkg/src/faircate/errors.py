"""Semantic exception hierarchy.

Public functions raise these instead of bare ValueError/RuntimeError so the
CLI can map failures onto exit-code categories (config / data / numerical).
"""

from __future__ import annotations


class FaircateError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(FaircateError):
    """Invalid or missing run configuration (CLI / config file)."""


class ParameterError(FaircateError, ValueError):
    """A function argument violates its contract."""


class SchemaError(FaircateError):
    """CSV column-role schema is invalid or does not match the file."""


class DataValidationError(FaircateError):
    """Rows in the input data violate the data-model invariants."""


class FitError(FaircateError):
    """A nuisance learner could not be fit on its training slice."""


class PositivityError(FitError):
    """A training slice has no treated (or no control) units."""


class DegenerateGroupError(FaircateError):
    """A fairness moment is undefined because a group is empty."""


class DegenerateStratumError(DegenerateGroupError):
    """A conditional-parity stratum has no mass in one sensitive group."""


class EvaluationError(FaircateError):
    """A user-supplied function produced a non-finite value."""


class QPNonconvergenceError(FaircateError):
    """The QP solver hit its iteration budget before meeting tolerances."""

    def __init__(self, message: str, *, iterations: int,
                 primal_residual: float, dual_residual: float):
        super().__init__(message)
        self.iterations = iterations
        self.primal_residual = primal_residual
        self.dual_residual = dual_residual


class SingularMatrixError(FaircateError):
    """A linear system remained singular after ridge repair."""


class InferenceError(FaircateError):
    """Bootstrap inference failed (too many dropped replicates)."""


class OracleUnavailableError(FaircateError):
    """An operation requiring ground truth was called on real data."""
