"""Exception types raised by the lorentzian varifold toolkit."""


class LorentzianError(ValueError):
    """Root of every domain error; routers map it to HTTP 422."""


class DimensionMismatchError(LorentzianError):
    pass


class ZeroVectorError(LorentzianError):
    pass


class DegenerateBasisError(LorentzianError):
    pass


class CausalityError(LorentzianError):
    """A null or spacelike object was given where a timelike one is required."""


class NotInImageError(LorentzianError):
    pass


class NonUnitVelocityError(LorentzianError):
    pass


class NonLorentzError(LorentzianError):
    pass


class EmptyFamilyError(LorentzianError):
    pass


class PatchError(LorentzianError):
    """Raised for null tangent planes, patches touching S_gamma and range violations."""


class StringDataError(LorentzianError):
    pass


class ClosureError(LorentzianError):
    pass


class JunctionError(LorentzianError):
    pass


class SupportError(LorentzianError):
    pass


class ExperimentError(LorentzianError):
    pass
