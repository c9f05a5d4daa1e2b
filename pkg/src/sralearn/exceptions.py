"""Exception types shared across the package."""

from __future__ import annotations


class SralearnError(Exception):
    """Base class for all package-specific errors."""


class ShapeError(SralearnError, ValueError):
    """Operand shapes are incompatible for a primitive."""

    def __init__(self, primitive: str, *shapes: tuple[int, ...]):
        self.primitive = primitive
        self.shapes = shapes
        rendered = " vs ".join(str(tuple(s)) for s in shapes)
        super().__init__(f"{primitive}: incompatible shapes {rendered}")


class ConfigError(SralearnError, ValueError):
    """Invalid configuration value (bad key width, rates, fold counts...)."""


class DataError(SralearnError, ValueError):
    """Malformed input data; carries row/column context when known."""

    def __init__(self, message: str, *, row: int | None = None, column: str | None = None):
        self.row = row
        self.column = column
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column!r}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)


class NotFittedError(SralearnError, RuntimeError):
    """Transform or predict was called before fit."""


class TrainingError(SralearnError, RuntimeError):
    """Optimization failed (non-finite loss, empty split)."""


class UnsupportedModelError(SralearnError, TypeError):
    """Operation not defined for this model kind (e.g. explaining an MLP)."""
