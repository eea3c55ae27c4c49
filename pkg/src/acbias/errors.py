"""Exception types shared across the package.

The CLI maps each class to its own exit code.
"""


class AcbiasError(Exception):
    exit_code = 4


class FormatError(AcbiasError, ValueError):
    """Malformed input file or byte stream."""

    exit_code = 3


class ConfigError(AcbiasError, ValueError):
    """Invalid knob, missing path, or incompatible options."""

    exit_code = 2
