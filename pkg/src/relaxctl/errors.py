"""Exception hierarchy shared by all modules."""


class RelaxCtlError(Exception):
    """Base class for errors raised by relaxctl."""


class DimensionMismatch(RelaxCtlError, ValueError):
    pass


class NotHermitian(RelaxCtlError, ValueError):
    pass


class InvalidDensityMatrix(RelaxCtlError, ValueError):
    pass


class DefectiveLiouvillian(RelaxCtlError):
    """Left/right eigenvectors of a cluster cannot be paired.

    This happens when the generator has a Jordan block, which the
    mode-suppression construction does not support.
    """


class DegenerateSteadyState(RelaxCtlError):
    def __init__(self, d_s):
        super().__init__(f"{d_s} non-decaying modes; a unique steady state requires exactly one")
        self.d_s = d_s


class VanishingTrace(RelaxCtlError):
    def __init__(self, trace, result=None):
        super().__init__(f"projected operator has vanishing trace ({trace:.3e})")
        self.trace = trace
        self.result = result


class NegativeDiscriminant(RelaxCtlError):
    """No real rescaling of the decaying component restores the purity."""

    def __init__(self, discriminant, result=None):
        super().__init__(f"negative discriminant {discriminant:.6e}: no real purity-restoring root")
        self.discriminant = discriminant
        self.result = result


class DegenerateDirection(RelaxCtlError):
    def __init__(self, norm, result=None):
        super().__init__(f"decaying component has vanishing norm (Tr sigma^2 = {norm:.3e})")
        self.norm = norm
        self.result = result


class SpectrumMismatch(RelaxCtlError, ValueError):
    pass


class NeverCrossed(RelaxCtlError):
    def __init__(self, threshold, minimum):
        super().__init__(f"trajectory never drops below {threshold:g} (minimum {minimum:.3e})")
        self.threshold = threshold
        self.minimum = minimum


class EvolutionError(RelaxCtlError):
    pass


class ConfigError(RelaxCtlError, ValueError):
    pass
