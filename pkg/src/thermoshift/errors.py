"""Exception hierarchy.

Every error raised by the library derives from :class:`ThermoshiftError`, so
callers can catch the whole family at once.
"""


class ThermoshiftError(Exception):
    """Base class for all library errors."""


class MismatchAtZero(ThermoshiftError):
    pass


class IllegalBracket(ThermoshiftError):
    pass


class IllegalWord(ThermoshiftError):
    pass


class IllegalPoint(ThermoshiftError):
    pass


class IllegalWindow(ThermoshiftError):
    pass


class EmptyLeafCylinder(ThermoshiftError):
    pass


class NotOnSameLeaf(ThermoshiftError):
    pass


class OracleUnavailable(ThermoshiftError):
    pass


class NotFactorial(ThermoshiftError):
    pass


class EmptyCollection(ThermoshiftError):
    pass


class BoundViolation(ThermoshiftError):
    def __init__(self, side, message=""):
        super().__init__(f"{side}: {message}" if message else side)
        self.side = side


class PreconditionFailed(ThermoshiftError):
    pass


class NotInRectangle(ThermoshiftError):
    pass


class NotOnLeaf(ThermoshiftError):
    pass


class ZeroLeafMeasure(ThermoshiftError):
    pass


class IndependenceViolation(ThermoshiftError):
    pass


class UndetectableReturn(ThermoshiftError):
    pass


class TailUnbounded(ThermoshiftError):
    pass


class InvarianceViolation(ThermoshiftError):
    pass


class GibbsViolation(ThermoshiftError):
    pass


class StepFailed(ThermoshiftError):
    def __init__(self, step, reason):
        super().__init__(f"step {step} failed: {reason}")
        self.step = step
        self.reason = reason


class NotFound(ThermoshiftError):
    pass


class WindowExceedsMemory(ThermoshiftError):
    pass


class NotIrreducible(ThermoshiftError):
    def __init__(self, components):
        super().__init__(f"graph has {len(components)} strongly connected components")
        self.components = components


class InconsistentMeasure(ThermoshiftError):
    pass


class ConfigError(ThermoshiftError):
    pass


class CheckFailure(ThermoshiftError):
    def __init__(self, failures):
        super().__init__("; ".join(failures))
        self.failures = list(failures)
