"""Exception hierarchy.

Two top-level branches mirror the CLI exit codes: ``ValidationError``
(bad inputs, broken invariants; exit 2) and ``NumericError`` (a
computation that could not be carried out; exit 3).
"""


class SpinGapError(Exception):
    pass


class ValidationError(SpinGapError):
    pass


class NumericError(SpinGapError):
    pass


# -- measure engine ---------------------------------------------------------

class NonIntegrable(NumericError):
    """Quadrature of exp(-V) diverges or the tail test cannot be satisfied."""


class DegenerateWindow(ValidationError):
    """Window [a, b] with a >= b."""


class NotSubExponential(NumericError):
    """No finite Psi_1 norm below the search cap."""


class MissingDerivative(ValidationError):
    """A derivative required by the requested statistic was not declared."""


class TiltDiverges(NumericError):
    """exp(a*x) is not integrable against the measure."""


class OutOfRange(NumericError):
    """Requested barycenter is outside the attainable tilt range."""


class NotWeaklyGaussian(ValidationError):
    """Convex-plus-bounded decomposition invariants fail."""


class NotAbsolutelyContinuous(ValidationError):
    """The second measure has mass where the first has none."""


class QuadratureDiverges(NumericError):
    """An L^p density-ratio integral grows without bound under refinement."""


# -- transference calculus --------------------------------------------------

class InvalidBound(ValidationError):
    """Holley-Stroock factors below 1."""


class InvalidL(ValidationError):
    """Density-ratio level L outside the theorem's admissible range."""


class CurvatureTooNegative(ValidationError):
    """The LS transference precondition rho > 4p*kappa/(p-1) fails."""


# -- spin systems -----------------------------------------------------------

class DimensionMismatch(ValidationError):
    pass


class MissingStats(ValidationError):
    """A formula needs a statistic that was not (or could not be) computed."""


class InteractionTooStrong(ValidationError):
    """The interaction-matrix smallness condition fails."""


class TooFewSamples(ValidationError):
    pass


class ZeDegenerate(NumericError):
    """The slab-normalization estimate is statistically indistinguishable from 0."""


class NotLogConcave(ValidationError):
    pass


# -- chaos ------------------------------------------------------------------

class ZeroMatrix(ValidationError):
    """Chaos statistic is identically zero."""


class NotSubGaussian(NumericError):
    """Even-moment ratios against the Gaussian keep growing."""


# -- tilt fixed point -------------------------------------------------------

class NoContraction(NumericError):
    """Fixed-point map is not observed (or guaranteed) to contract."""


class MaxIterations(NumericError):
    pass


class Unreachable(NumericError):
    """Target mean-spin outside the attainable range of the tilt family."""


# -- spectral ---------------------------------------------------------------

class GridTooCoarse(NumericError):
    """Richardson comparison reports more than 10% eigenvalue error."""


class TraceTooShort(ValidationError):
    pass


class NoDecay(NumericError):
    """Autocorrelation fit produced a non-negative slope."""


# -- cli --------------------------------------------------------------------

class ConfigError(ValidationError):
    pass
