"""Exception hierarchy shared across the package."""


class OlsWeightsError(Exception):
    """Base class for every error raised by this package."""


class DataError(OlsWeightsError, ValueError):
    """Invalid input data."""


class SchemaError(DataError):
    """A column named in the schema is missing or the schema is malformed."""


class ValidationError(DataError):
    """Data violates a dataset invariant (treatment coding, lengths, finiteness)."""


class ParseError(DataError):
    """A cell could not be parsed as a number."""

    def __init__(self, message, row=None, column=None):
        super().__init__(message)
        self.row = row
        self.column = column


class StratificationError(DataError):
    """Stratification was requested on data that cannot be stratified."""


class DegenerateStrataError(DataError):
    """One or more strata lack a treated or a control unit."""

    def __init__(self, message, strata=()):
        super().__init__(message)
        self.strata = list(strata)


class SingularDesignError(OlsWeightsError, ValueError):
    """Design matrix is (numerically) rank deficient."""

    def __init__(self, message, columns=()):
        super().__init__(message)
        self.columns = list(columns)


class LeverageError(OlsWeightsError, ValueError):
    """HC2 is undefined because some unit has leverage one."""

    def __init__(self, message, units=()):
        super().__init__(message)
        self.units = list(units)


class InfeasibleBalanceError(OlsWeightsError, ValueError):
    """The balance target lies outside the convex hull of an arm's covariates."""

    def __init__(self, message, direction=None):
        super().__init__(message)
        self.direction = direction


class ConvergenceError(OlsWeightsError, RuntimeError):
    """An iterative solver hit its iteration cap."""

    def __init__(self, message, violation=None):
        super().__init__(message)
        self.violation = violation
