"""Exception hierarchy shared by all phyauth modules."""


class PhyAuthError(Exception):
    """Base class for every error raised by this package."""


class DimensionError(PhyAuthError, ValueError):
    pass


class ProtocolError(PhyAuthError, ValueError):
    """Estimates supplied in the wrong phase order."""


class ParameterError(PhyAuthError, ValueError):
    pass


class DataError(PhyAuthError, ValueError):
    """Non-finite or otherwise unusable sample data."""


class InsufficientDataError(PhyAuthError, ValueError):
    pass


class StepSizeError(PhyAuthError, ValueError):
    """Step size outside the mean-square convergence bound."""


class SchemaError(PhyAuthError, ValueError):
    """Invalid experiment/scenario configuration.

    ``path`` is the dotted location of the offending field.
    """

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)
