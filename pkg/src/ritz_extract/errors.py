"""Exception types raised across the package."""


class RitzExtractError(Exception):
    """Base class for all package errors."""


class NonFiniteError(RitzExtractError, ValueError):
    """Input contains NaN or Inf."""


class NoConvergence(RitzExtractError):
    """A dense eigensolver exceeded its iteration budget."""


class NearSingular(RitzExtractError):
    """An HPD solve met a pivot below the rank tolerance.

    Raised by :func:`ritz_extract.dense.solve_hpd`. In the extraction pipeline
    this is a signal that the current Ritz pair is numerically exact, not a
    failure.
    """


class ZeroRank(RitzExtractError, ValueError):
    """Every column of a matrix to orthonormalize is negligible."""


class DimensionMismatch(RitzExtractError, ValueError):
    pass


class TooLarge(RitzExtractError, ValueError):
    pass


# Matrix Market ingestion

class MatrixMarketError(RitzExtractError, ValueError):
    pass


class BadBanner(MatrixMarketError):
    pass


class BadDimensions(MatrixMarketError):
    pass


class IndexOutOfRange(MatrixMarketError):
    pass


class NonSquare(MatrixMarketError):
    pass


class UnsupportedField(MatrixMarketError):
    pass


class DuplicateEntry(MatrixMarketError):
    """Duplicate (i, j) entry met while parsing in strict mode."""


# Root analysis of f and g

class PoleAtTau(RitzExtractError, ValueError):
    pass


class DegenerateTau(RitzExtractError, ValueError):
    pass


class DegenerateIfOne(RitzExtractError, ValueError):
    pass


class BadTrace(RitzExtractError, ValueError):
    pass


class StagnationWarning(RuntimeWarning):
    """Jacobi-Davidson expansion vector vanished after projection."""
