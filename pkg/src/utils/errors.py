""" Exception types shared by the library and the command line driver """


class RandBCError(Exception):
    """Base class for all errors raised on purpose by this package."""

    exit_code = 1


class ConfigError(RandBCError):
    """Invalid experiment configuration (schema, type or range)."""

    exit_code = 2


class CapExceededError(RandBCError):
    """A desk-scale cap (enumeration, census range, cluster size, quadrature) was exceeded."""

    exit_code = 3


class DomainError(RandBCError, ValueError):
    """An object does not live on the volume / boundary it was passed with."""


class RealizabilityError(DomainError):
    """A bond set or contour family is not the image of any spin configuration."""
