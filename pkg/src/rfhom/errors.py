"""Exception and warning types raised across the package."""


class RfHomError(Exception):
    """Base class for all errors raised by rfhom."""


class ParameterError(RfHomError, ValueError):
    """A parameter violates its documented range."""


class NonZeroDephasing(RfHomError, ValueError):
    """The pure joint-state form only exists without pure dephasing."""


class DivisionDomain(RfHomError, ZeroDivisionError):
    """A normalizing denominator is zero or negative."""


class NormalizationError(RfHomError, ValueError):
    """Probability weights do not sum to one."""


class StepTooLarge(RfHomError, ValueError):
    """Integrator step exceeds the accuracy bound."""


class GridTooCoarse(RfHomError, ValueError):
    """Bin width is larger than the detector response FWHM."""


class NegativeInput(RfHomError, ValueError):
    """A correlation value that must be non-negative is negative."""


class EmptyWindow(RfHomError, ValueError):
    """The normalization window holds too few bins or zero counts."""


class IllConditioned(RfHomError, RuntimeError):
    """Deconvolution could not reproduce its input to tolerance."""


class DuplicateAbscissa(RfHomError, ValueError):
    """Interpolation knots share an abscissa."""


class FormatError(RfHomError, ValueError):
    """A histogram or config file is malformed.

    ``offset`` is the byte offset (histograms) or ``line`` the 1-based line
    number (configs) of the offending input, when known.
    """

    def __init__(self, message, *, offset=None, line=None):
        where = []
        if offset is not None:
            where.append(f"byte {offset}")
        if line is not None:
            where.append(f"line {line}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)
        self.offset = offset
        self.line = line


class WindowViolation(UserWarning):
    """Delay lies outside the T1 << tau << T_L validity window."""


class FitWarning(UserWarning):
    """A fit finished with a diagnostic flag (non-convergence, boundary hit...)."""
