"""Exception types raised by magplan.

Everything derives from :class:`DataError` so the command line front end can
map bad inputs onto a single exit status.
"""


class DataError(ValueError):
    """Input data is malformed or outside the domain of an operation."""


class GridFormatError(DataError):
    """A grid-CSV document could not be parsed."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class OutOfBoundsError(DataError):
    """A query point lies outside the interpolation domain of a grid."""

    def __init__(self, x, y, bounds):
        self.point = (float(x), float(y))
        self.bounds = bounds
        super().__init__(
            f"point ({x!r}, {y!r}) outside grid bounds "
            f"x=[{bounds[0]!r}, {bounds[1]!r}] y=[{bounds[2]!r}, {bounds[3]!r}]"
        )


class DegenerateFieldError(DataError):
    """The field has no dynamic range (max == min)."""


class ConfigError(DataError):
    """A configuration file or value is invalid."""
