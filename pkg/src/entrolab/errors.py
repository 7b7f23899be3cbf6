"""Exception types shared across the toolkit."""


class EntrolabError(Exception):
    pass


class ArgumentError(EntrolabError, ValueError):
    """Invalid or mismatched arguments."""


class ResourceError(EntrolabError):
    """An enumeration would exceed a configured cap."""


class UnsupportedMeasureError(EntrolabError):
    """A measure cannot answer the requested marginal without extrapolating."""


class CertificationUnavailable(EntrolabError):
    """Parameters for the zero-entropy certificate cannot be found on the schedule."""


class InvariantError(EntrolabError, AssertionError):
    """A structural bound that should hold by construction was violated."""
