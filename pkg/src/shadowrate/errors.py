"""Exception hierarchy shared by all pricing modules."""


class PricingError(ValueError):
    """Base class for every domain error raised by this package."""


class DegenerateVolatilitySpread(PricingError):
    """The two assets have (numerically) equal volatility and cannot span a riskless rate."""


class NoRoot(PricingError):
    pass


class NonMonotoneRoot(PricingError):
    """The strike equation is not monotone in the Gaussian variable (negative Z loading)."""


class ToleranceNotMet(PricingError):
    pass


class QuadratureBudgetExceeded(PricingError):
    pass


class MaturityDegenerate(PricingError):
    pass


class NoArbitrageViolation(PricingError):
    """A lattice step produced a risk-neutral probability outside (0, 1)."""


class DegenerateNode(PricingError):
    pass


class ZeroDrift(PricingError):
    """The cumulative-return deflator r_f / mu is undefined because mu == 0."""


class UnboundedDeflator(PricingError):
    pass


class RequiresZeroH0(PricingError):
    pass


class ParseError(PricingError):
    def __init__(self, message: str, row: int | None = None):
        self.row = row
        super().__init__(message if row is None else f"row {row}: {message}")


class NonPositivePrice(ParseError):
    pass


class WindowTooLong(PricingError):
    pass
