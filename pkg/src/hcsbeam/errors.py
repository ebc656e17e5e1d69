"""Exception and warning types raised across the package."""


class HcsError(Exception):
    """Base class for all errors raised by :mod:`hcsbeam`."""


class InvalidParam(HcsError, ValueError):
    pass


class DimensionMismatch(HcsError, ValueError):
    pass


class RankDeficient(HcsError, ArithmeticError):
    pass


class DegenerateGeometry(HcsError, ValueError):
    pass


class GridMismatch(HcsError, ValueError):
    pass


class ElementFactorNull(HcsError, ArithmeticError):
    pass


class ZeroVector(HcsError, ArithmeticError):
    pass


class ZeroPattern(HcsError, ArithmeticError):
    pass


class BeamSynthesisError(HcsError):
    """A single beam failed; ``beam`` holds the ``(r, chi)`` pair."""

    def __init__(self, beam, cause):
        self.beam = beam
        self.cause = cause
        super().__init__(f"beam (r={beam[0]}, chi={beam[1]}): {cause}")


class ConfigError(HcsError, ValueError):
    pass


class VisibleRegionOverflow(UserWarning):
    """Woodward-Lawson samples fell outside the visible region and were dropped."""
