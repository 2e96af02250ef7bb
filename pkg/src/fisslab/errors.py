"""Exception hierarchy for fisslab.

Every structured failure names the violated condition; callers can rely on
the class, the message carries the evidence (offending point, field, value).
"""


class FisslabError(Exception):
    """Base class for all fisslab errors."""


# --- geometry ---------------------------------------------------------------

class GeometryError(FisslabError):
    """Invalid fissured-medium description."""


class OverlapError(GeometryError):
    """Fissure ordering violated: sup(curve_i + h_i) >= inf(curve_{i+1})."""


class VerticalTangentError(GeometryError):
    """Curve slope exceeds the configured cap (lower bound on upward-normal
    vertical component would not be certifiable)."""


class DisconnectedBlockError(GeometryError):
    """A rock block is empty or pinched off."""


class PointOutsideDomain(FisslabError):
    """Point cannot be located in any tagged region of the domain."""


# --- meshing ----------------------------------------------------------------

class MeshError(FisslabError):
    """Mesh construction failure."""


class TargetTooCoarse(MeshError):
    """Requested cell size cannot resolve the thinnest fissure with two
    cell layers."""


class MeshQualityError(MeshError):
    """Minimum triangle angle fell below the quality threshold."""


# --- problem data / assembly --------------------------------------------------

class DataError(FisslabError):
    """Coefficient data violates a solvability hypothesis."""


class CoefficientEvaluationError(DataError):
    """A coefficient field could not be evaluated at a quadrature point."""


class InvalidEpsilon(FisslabError):
    """Thinness parameter outside (0, 1]."""


class LimitDataError(DataError):
    """Strip data depends on the vertical coordinate, so the reduced problem
    is not well defined for it."""


# --- solver -------------------------------------------------------------------

class SolverError(FisslabError):
    """Linear-solve failure."""


class SingularSystemError(SolverError):
    """Factorization detected a singular saddle-point system (broken
    assembly or violated well-posedness hypotheses)."""


class ToleranceNotReached(SolverError):
    """Algebraic residual above the requested tolerance."""


class TooLargeForDense(SolverError):
    """System too large for the dense stability estimator."""


# --- expression language --------------------------------------------------------

class ExprError(FisslabError):
    """Expression-language failure."""


class ExprSyntaxError(ExprError):
    """Malformed expression text.

    Attributes:
        offset: byte offset of the offending character in the source text.
    """

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte {offset})")
        self.offset = offset


class UnknownIdentifier(ExprError):
    """Identifier is neither a variable (x, z) nor a known function."""

    def __init__(self, name: str, offset: int):
        super().__init__(f"unknown identifier '{name}' (at byte {offset})")
        self.name = name
        self.offset = offset


class EvaluationError(ExprError):
    """Expression evaluation hit an undefined operation (division by zero,
    domain error); never silently produces NaN."""


# --- configuration / harness ---------------------------------------------------

class ConfigError(FisslabError):
    """Malformed or inconsistent configuration file; message cites the
    file, field, and where possible the line."""


class UnknownCase(FisslabError):
    """Requested manufactured case is not in the catalog."""
