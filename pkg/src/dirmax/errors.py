"""Exception hierarchy shared by every module."""


class DirmaxError(Exception):
    """Base class; the CLI maps it to exit code 2."""


class NotReduced(DirmaxError, ValueError):
    pass


class WindowExhausted(DirmaxError):
    pass


class InsufficientPool(DirmaxError):
    pass


class ConstraintSearchExhausted(DirmaxError):
    def __init__(self, bullet, detail=""):
        self.bullet = bullet
        super().__init__(f"constraint search exhausted at '{bullet}'" + (f": {detail}" if detail else ""))


class ScaleWindowEmpty(DirmaxError):
    pass


class DegeneratePair(DirmaxError):
    pass


class BudgetExceeded(DirmaxError):
    pass


class ZeroDirection(DirmaxError, ValueError):
    pass


class QuadratureBudgetExceeded(DirmaxError):
    pass


class ArcOverlap(DirmaxError):
    pass


class ConfigInvalid(DirmaxError):
    """Bad experiment configuration; the CLI maps it to exit code 1."""


class IoFailure(DirmaxError):
    pass
