"""Exception hierarchy shared by every module in the package."""


class ResolvabilityError(Exception):
    """Base class for all package errors."""


class DomainError(ResolvabilityError, ValueError):
    """A symbol or parameter lies outside its admissible domain."""


class UnsupportedCompositionError(ResolvabilityError):
    """A channel/distribution pairing has no closed form and no quadrature rule."""


class InfiniteInformationError(ResolvabilityError):
    """Mutual information diverges or is undefined."""


class EstimationError(ResolvabilityError):
    """A Monte Carlo estimate produced non-finite values."""


class CodebookSizeError(ResolvabilityError):
    """exp(nR) codewords would exceed the configured maximum."""


class EnumerationTooLargeError(ResolvabilityError):
    """Exact enumeration over the output space exceeds the configured cap."""


class AbsoluteContinuityError(ResolvabilityError):
    """The codebook-induced output puts mass where the target has none."""


class NoValidParamsError(ResolvabilityError):
    """No exponent parameters satisfy the first-order constraints."""


class HypothesisViolation(ResolvabilityError):
    """A bound was requested outside the range where it is valid."""


class DegenerateDispersionError(HypothesisViolation):
    """Zero dispersion; second-order expansions do not apply."""


class RequiresInputQuantizerError(ResolvabilityError):
    """A real-valued codebook needs an input grid before averaging."""


class ConfigError(ResolvabilityError):
    """Invalid experiment configuration."""

    def __init__(self, message, field=None, line=None):
        self.field = field
        self.line = line
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field '{field}'")
        prefix = f"[{', '.join(where)}] " if where else ""
        super().__init__(prefix + message)
