"""Exception hierarchy shared by all engine modules."""


class VoHedgeError(Exception):
    """Base class for every error raised by this package."""


class DomainViolation(VoHedgeError, ValueError):
    """A cumulant was requested outside its analyticity strip."""


class NoSolution(VoHedgeError, RuntimeError):
    """A root-finder failed to converge within its iteration budget."""


class QuadratureFailure(VoHedgeError, RuntimeError):
    """A numerical integral did not reach its convergence tolerance."""


class TailDivergence(QuadratureFailure):
    """The truncated tail of a line integral is too large to be neglected."""


class DegenerateModel(VoHedgeError, ValueError):
    """The model has deterministic increments (reference measure is not strictly increasing)."""


class InvalidAbscissa(VoHedgeError, ValueError):
    """A contour abscissa is outside the range allowed by the payoff representation."""


class InsufficientSamples(VoHedgeError, ValueError):
    """Too few samples to compute a statistic."""


class ConfigError(VoHedgeError, ValueError):
    """Invalid run configuration."""
