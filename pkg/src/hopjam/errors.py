"""Exception hierarchy shared by all hopjam modules.

Every error raised by the library derives from HopjamError, so callers can
catch one base class. Subclasses also inherit the matching builtin
(ValueError / RuntimeError / FileNotFoundError) so generic handlers keep
working.
"""


class HopjamError(Exception):
    """Base class for all hopjam errors."""


class ConfigurationError(HopjamError, ValueError):
    """A parameter set violates a precondition (bad band, bad sizes, ...)."""


class DimensionError(HopjamError, ValueError):
    """Array or grid dimensions are incompatible."""


class DegenerateInputError(HopjamError, ValueError):
    """An input is degenerate for the requested operation (e.g. all-zero)."""


class ResolutionError(HopjamError, ValueError):
    """Requested discretization cannot resolve the operation (e.g. a wavelet
    scale whose discrete support collapses to a few samples)."""


class CropError(HopjamError, ValueError):
    """A frequency crop does not intersect the image's frequency axis."""


class SamplingError(HopjamError, ValueError):
    """Pair or support sampling cannot be satisfied by the available data."""


class ConvergenceError(HopjamError, RuntimeError):
    """An iterative procedure hit its iteration cap without converging."""


class DivergenceError(HopjamError, RuntimeError):
    """Training loss diverged past the configured guard."""


class NumericalError(HopjamError, RuntimeError):
    """A non-finite value appeared where finite numbers are required."""


class MissingInputError(HopjamError, FileNotFoundError):
    """A required input file or artifact does not exist."""
