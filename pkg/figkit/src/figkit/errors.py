"""Exception types for figkit."""


class FigkitError(Exception):
    """Base class for figkit errors."""


class MissingColumn(FigkitError):
    """A CSV lacks a column the figure needs."""


class EmptyInput(FigkitError):
    """A required CSV has no data rows, or is absent from the run."""
