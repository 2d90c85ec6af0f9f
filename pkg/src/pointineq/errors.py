"""Exception hierarchy.

Every error carries a stable ``code`` string.  ``InputError`` subclasses are
caller mistakes (CLI exit code 2); ``NumericalError`` subclasses are failures
of the numerics on valid input (CLI exit code 3).
"""


class ToolkitError(Exception):
    code = "TOOLKIT_ERROR"

    def __init__(self, message=""):
        super().__init__(f"{self.code}: {message}" if message else self.code)


class InputError(ToolkitError, ValueError):
    code = "INVALID_INPUT"


class NumericalError(ToolkitError, ArithmeticError):
    code = "NUMERICAL_FAILURE"


class DuplicatePointsError(InputError):
    code = "DUPLICATE_POINTS"


class DimensionMismatchError(InputError):
    code = "DIMENSION_MISMATCH"


class NonfiniteCoordinateError(InputError):
    code = "NONFINITE_COORDINATE"


class NonfiniteEntryError(InputError):
    code = "NONFINITE_ENTRY"


class CenterTooCloseError(InputError):
    code = "CENTER_TOO_CLOSE"


class ZeroWeightsError(InputError):
    code = "ZERO_WEIGHTS"


class NotOnSphereError(InputError):
    code = "NOT_ON_SPHERE"


class AnglesNotSortedError(InputError):
    code = "ANGLES_NOT_SORTED"


class DuplicateAnglesError(InputError):
    code = "DUPLICATE_ANGLES"


class TooManyPointsError(InputError):
    code = "TOO_MANY_POINTS"


class InvalidDimensionError(InputError):
    code = "INVALID_DIMENSION"


class InvalidOptionsError(InputError):
    code = "INVALID_OPTIONS"


class ConvergenceFailure(NumericalError):
    code = "CONVERGENCE_FAILURE"
