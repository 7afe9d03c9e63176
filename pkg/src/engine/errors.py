# src/engine/errors.py
from __future__ import annotations

from enum import Enum
from typing import Any


class ErrorCategory(str, Enum):
    ARGUMENT = "argument"
    DIMENSION = "dimension"
    DATA = "data"
    STRATIFICATION = "stratification"
    CONVERGENCE = "convergence"
    CONFIG = "config"
    IO = "io"
    VERSION = "version"


EXIT_CODES = {
    ErrorCategory.ARGUMENT: 2,
    ErrorCategory.DIMENSION: 3,
    ErrorCategory.DATA: 4,
    ErrorCategory.STRATIFICATION: 5,
    ErrorCategory.CONVERGENCE: 6,
    ErrorCategory.CONFIG: 7,
    ErrorCategory.IO: 8,
    ErrorCategory.VERSION: 9,
}


class RfmlpError(Exception):
    """
    Base for every error raised by the library.
    Each subclass also derives from the closest builtin, so callers can
    catch ValueError / OSError without knowing about this module.
    """

    category: ErrorCategory = ErrorCategory.ARGUMENT

    @property
    def exit_code(self) -> int:
        return EXIT_CODES[self.category]

    def with_context(self, **context: Any) -> "RfmlpError":
        prefix = " ".join(f"{k}={v}" for k, v in context.items())
        err = type(self)(f"{prefix}: {self}")
        err.__cause__ = self
        return err


class ArgumentError(RfmlpError, ValueError):
    category = ErrorCategory.ARGUMENT


class DimensionError(RfmlpError, ValueError):
    category = ErrorCategory.DIMENSION


class DataError(RfmlpError, ValueError):
    category = ErrorCategory.DATA


class StratificationError(DataError):
    category = ErrorCategory.STRATIFICATION


class ConvergenceError(RfmlpError, ArithmeticError):
    category = ErrorCategory.CONVERGENCE


class ConfigError(RfmlpError, ValueError):
    category = ErrorCategory.CONFIG


class ModelIOError(RfmlpError, OSError):
    category = ErrorCategory.IO


class ModelVersionError(ModelIOError):
    category = ErrorCategory.VERSION
