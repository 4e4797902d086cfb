"""Exception types raised by the geometric pipeline.

Everything derives from ConeFlankError so callers can catch the whole
family with one except clause. Degeneracies that are expected outcomes of
an analysis (multiple roots, degenerate polynomials) are reported as flags
on result objects, not exceptions; the exceptions here mark inputs that an
operation cannot meaningfully process.
"""


class ConeFlankError(Exception):
    """Base class for all errors raised by this package."""


class NormalAtSouthPole(ConeFlankError):
    """Oriented normal too close to (0, 0, -1); the plane-to-point map blows up."""


class DegenerateMeanNormal(ConeFlankError):
    """Mean of the sample normals is (numerically) zero; no alignment exists."""


class ExpressionSyntaxError(ConeFlankError):
    """Malformed surface expression. Carries the character offset."""

    def __init__(self, message, position):
        super().__init__(f"{message} (at offset {position})")
        self.position = position


class UnknownFunction(ConeFlankError):
    """Expression uses a function name outside the supported set."""


class DomainError(ConeFlankError):
    """Expression evaluated outside its domain (division by zero, sqrt/log of a nonpositive value)."""


class TooFewSamples(ConeFlankError):
    """Scattered fit asked for more neighbors than there are samples."""


class IllConditioned(ConeFlankError):
    """Scattered-fit normal equations exceed the configured condition cap."""

    def __init__(self, condition_number, cap):
        super().__init__(f"fit condition number {condition_number:.3e} exceeds cap {cap:.3e}")
        self.condition_number = condition_number


class DegenerateLine(ConeFlankError):
    """Cylinder-candidate line is empty at this point (top view at the origin)."""


class DegenerateDenominator(ConeFlankError):
    """Vertex formula denominator vanishes (no finite vertex, e.g. a cylinder)."""


class SingularSystem(ConeFlankError):
    """Axis probes are degenerate; the 3x3 normal system cannot be solved."""


class AmbiguousSide(ConeFlankError):
    """Side test is at a grazing configuration; the sign is not decidable."""


class InvalidBounds(ConeFlankError):
    """Tool truncation bounds with r_min >= r_max."""


class ZeroHessian(ConeFlankError):
    """All second partials vanish at the seed; no ruling direction."""


class NoRealRuling(ConeFlankError):
    """Positive Gaussian curvature: the asymptotic-direction equation has no real root."""


class BranchJump(ConeFlankError):
    """No ruling branch continues within the angular continuity cone."""


class MultipleRoot(ConeFlankError):
    """Tracked root became a multiple root of the contact system."""


class RootLost(ConeFlankError):
    """Continuous root tracking failed (nearest root too far from the previous one)."""


class NegativeNoise(ConeFlankError):
    """Perturbation magnitude r must be nonnegative."""


class DegenerateNormal(ConeFlankError):
    """Parametric chart has a vanishing cross product at a node."""


class ConfigError(ConeFlankError):
    """Invalid or incomplete analysis configuration."""
