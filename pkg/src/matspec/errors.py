"""Exception hierarchy for matspec."""


class MatSpecError(Exception):
    """Base class for all errors raised by the package."""


class InvalidProblem(MatSpecError, ValueError):
    pass


class NonFiniteState(MatSpecError, FloatingPointError):
    def __init__(self, message, node=None, lam=None):
        super().__init__(message)
        self.node = node
        self.lam = lam


class NearSingular(MatSpecError):
    def __init__(self, message, cond=None):
        super().__init__(message)
        self.cond = cond


class GridMismatch(MatSpecError, ValueError):
    pass


class CountMismatch(MatSpecError):
    """Argument-principle count on a contour disagrees with the expected count."""

    def __init__(self, message, band=None, found=None, expected=None):
        super().__init__(message)
        self.band = band
        self.found = found
        self.expected = expected


class NoConvergence(MatSpecError):
    pass


class AssumptionOneViolated(MatSpecError):
    """A pole of the Weyl matrix is not simple (or its residue disagrees with the zero count)."""

    def __init__(self, message, cluster=None):
        super().__init__(message)
        self.cluster = cluster


class ContourCollision(MatSpecError):
    pass


class DimensionMismatch(MatSpecError, ValueError):
    def __init__(self, message, path=None):
        super().__init__(message if path is None else f"{path}: {message}")
        self.path = path


class TruncationTooLarge(MatSpecError, ValueError):
    pass


class MainEquationSingular(MatSpecError):
    def __init__(self, message, x=None, cond=None):
        super().__init__(message)
        self.x = x
        self.cond = cond


class ParseError(MatSpecError, ValueError):
    def __init__(self, message, line=None, path=None):
        loc = []
        if line is not None:
            loc.append(f"line {line}")
        if path is not None:
            loc.append(path)
        super().__init__(f"{message} ({', '.join(loc)})" if loc else message)
        self.line = line
        self.path = path


class UnsupportedVersion(MatSpecError, ValueError):
    pass
