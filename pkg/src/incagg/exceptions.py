"""Exception hierarchy.

The CLI maps :class:`InputError` to exit code 2 and :class:`ConfigError`
to exit code 3.
"""


class InputError(ValueError):
    """Malformed or inconsistent data (shapes, dimensions, sample counts)."""


class DegenerateDataError(InputError):
    """Data for which a required quantity is undefined, e.g. a zero median distance."""


class ConfigError(ValueError):
    """Invalid test or design parameters."""
