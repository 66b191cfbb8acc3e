"""Exception types shared across the package.

ValueError is used for plain precondition violations (bad argument shapes,
out-of-range options); the classes below mark failures that carry domain
meaning and that batch drivers are expected to catch per session.
"""


class ParseError(Exception):
    """An input file does not conform to its on-disk schema."""


class CalibrationError(Exception):
    """A pixel-to-metre scale could not be established from the data."""


class QualityError(Exception):
    """The data is structurally valid but too poor to yield a metric."""
