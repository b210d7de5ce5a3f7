"""Exception hierarchy.

Precondition refusals carry the name of the module that raised them so the
CLI can report it (exit code 2). Everything else is a plain ValueError /
TypeError subclass (exit code 1).
"""


class PreconditionError(Exception):
    """An operation's precondition does not hold for the given input."""

    def __init__(self, message: str, module: str, precondition: str | None = None):
        super().__init__(message)
        self.module = module
        self.precondition = precondition or message

    def to_dict(self) -> dict:
        return {
            "error": "precondition",
            "module": self.module,
            "precondition": self.precondition,
            "message": str(self),
        }


class InadmissibleFrame(PreconditionError):
    def __init__(self, message: str, module: str = "period_geometry"):
        super().__init__(message, module, "inadmissible frame")


class SingularSystem(PreconditionError):
    def __init__(self, message: str, cond: float, module: str = "betti"):
        super().__init__(message, module, "singular system")
        self.cond = cond


class ModeError(TypeError):
    """Exact-only operation called with floating-point data (or vice versa)."""


class DimensionError(ValueError):
    pass


class LemmaViolation(RuntimeError):
    """A numerically observed fact contradicts a proven statement (e.g. odd Betti rank)."""


class ConvergenceError(PreconditionError):
    """An iterative solver failed where the operation cannot continue (e.g. fiber corrector)."""

    def __init__(self, message: str, module: str):
        super().__init__(message, module, "corrector convergence")
