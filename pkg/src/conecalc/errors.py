"""Exception hierarchy.

Every error carries an ``exit_code`` used by the command line front end:
1 for bad input, 2 for a violated numerical precondition, 3 for a failed
convergence or a posteriori check.
"""


class ConeCalcError(Exception):
    exit_code = 2


class InputError(ConeCalcError):
    exit_code = 1


class PreconditionError(ConeCalcError):
    exit_code = 2


class ConvergenceError(ConeCalcError):
    exit_code = 3


# input / configuration
class ParseError(InputError):
    def __init__(self, msg, line=None, column=None):
        self.line = line
        self.column = column
        if line is not None:
            msg = f"{msg} (line {line}, column {column})"
        super().__init__(msg)


class SchemaError(InputError):
    def __init__(self, key, msg="invalid or missing key"):
        self.key = key
        super().__init__(f"{key}: {msg}")


class GridMismatch(InputError):
    pass


class BaseMismatch(InputError):
    pass


class StripMismatch(InputError):
    pass


class DepthExceedsTaylor(InputError):
    pass


class NotPolynomialInSecondVariable(InputError):
    pass


# numerical preconditions
class WindowTruncation(PreconditionError):
    pass


class PoleOnWeightLine(PreconditionError):
    pass


class EvalAtPole(PreconditionError):
    pass


class ContaminatedDisk(PreconditionError):
    pass


class NotElliptic(PreconditionError):
    pass


class PoleOnStripBoundary(PreconditionError):
    pass


class NotInvertibleOnLine(PreconditionError):
    pass


class ConormalNotBijective(PreconditionError):
    pass


class PoleTooCloseToTargetLine(PreconditionError):
    pass


class IntermediateLineHitsRoot(PreconditionError):
    pass


class InadmissibleWeight(PreconditionError):
    pass


# convergence / a posteriori
class ContourThroughZero(ConvergenceError):
    pass


class ResidualTooLarge(ConvergenceError):
    pass


class NoConvergence(ConvergenceError):
    pass
