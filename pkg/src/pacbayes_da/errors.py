"""Exception types raised across the package."""


class PacBayesDAError(ValueError):
    """Base class for all input/contract errors."""


class AlignmentError(PacBayesDAError):
    """Voters, domains, samples or posteriors have incompatible shapes."""


class SupportError(PacBayesDAError):
    """Source and target distributions do not share the same support."""


class AbsoluteContinuityError(PacBayesDAError):
    """The posterior puts mass where the prior has none."""


class BoundaryError(PacBayesDAError):
    """A posterior on the simplex boundary where an interior point is required."""


class ContractError(PacBayesDAError):
    """A voter returned something other than -1 or +1."""


class ConfigError(PacBayesDAError):
    """Invalid configuration value."""
