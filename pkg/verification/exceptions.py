class VerificationError(Exception):
    """Base class for every error raised by the verification engine."""


# Jet arithmetic

class JetError(VerificationError):
    pass


class JetOrderMismatch(JetError):
    def __init__(self, left, right):
        self.left = left
        self.right = right
        super().__init__(f"Jet orders differ: {left} != {right}")


class UnsupportedOrder(JetError):
    def __init__(self, order, maximum=6):
        self.order = order
        super().__init__(f"Jet order {order} outside supported range 0..{maximum}")


class ZeroConstantTerm(JetError):
    def __init__(self, value):
        self.value = value
        super().__init__(f"Division by a jet with constant term {value!r}")


class NonPositiveConstantTerm(JetError):
    def __init__(self, value, operation='sqrt'):
        self.value = value
        super().__init__(f"{operation} of a jet with constant term {value!r}")


class BasePointMismatch(JetError):
    def __init__(self, distance):
        self.distance = distance
        super().__init__(f"Outer jet expanded {distance:.3e} away from the inner value")


# Surfaces and charts

class DomainError(VerificationError):
    pass


class PointOutsideDomain(DomainError):
    def __init__(self, point, box):
        self.point = point
        self.box = box
        super().__init__(f"Chart point {point} outside domain box {box}")


class OpenPatchError(DomainError):
    def __init__(self, spec):
        self.spec = spec
        super().__init__(f"{spec} is an open patch and cannot be integrated")


class InadmissibleTransform(DomainError):
    def __init__(self, center, sample, distance, margin):
        self.center = center
        self.sample = sample
        self.distance = distance
        self.margin = margin
        super().__init__(
            f"Inversion center {center} is {distance:.3e} from image sample {sample} "
            f"(minimum allowed {margin:.3e})"
        )


class NotAnImmersion(DomainError):
    def __init__(self, singular_value):
        self.singular_value = singular_value
        super().__init__(f"Degree-1 block is rank deficient (smallest singular value {singular_value:.3e})")


# Exterior algebra

class DegreeError(VerificationError):
    pass


class DegreeOverflow(DegreeError):
    def __init__(self, level, degree, limit):
        super().__init__(f"{level} degree {degree} exceeds {limit}")


class DegreeUnderflow(DegreeError):
    def __init__(self, level, left, right):
        super().__init__(f"{level} degree {left} is smaller than {right}")


class InsufficientOrder(VerificationError):
    def __init__(self, needed, available):
        self.needed = needed
        self.available = available
        super().__init__(f"Need jets of order {needed}, got {available}")


class BumpSupportError(VerificationError):
    pass


class FamilyError(VerificationError):
    pass


class IllConditionedFamily(FamilyError):
    def __init__(self, singular_values, message):
        self.singular_values = singular_values
        super().__init__(message)


# Configuration and persistence

class ConfigError(VerificationError):
    pass


class PersistError(VerificationError):
    def __init__(self, path, reason):
        self.path = path
        super().__init__(f"I/O failure at {path}: {reason}")
