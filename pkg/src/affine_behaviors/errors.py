"""Exception hierarchy.

The CLI maps these onto its exit codes: :class:`InputError` to 2,
:class:`EmptyBehaviorError` to 3 and :class:`PreconditionError` to 4.
"""


class AffineBehaviorError(Exception):
    pass


class InputError(AffineBehaviorError, ValueError):
    """Malformed input: bad shapes, dimension mismatches, unparsable files."""


class DimensionError(InputError):
    pass


class WindowRangeError(InputError, IndexError):
    """A requested window lies outside the available samples."""


class EmptyBehaviorError(AffineBehaviorError):
    """The offset kernel representation admits no trajectory."""


class PreconditionError(AffineBehaviorError):
    """A mathematical precondition of the requested operation fails."""


class NotAutonomousError(PreconditionError):
    pass


class SingularMatrixPolynomialError(PreconditionError):
    pass


class WindowTooShortError(PreconditionError):
    pass


class NotContractiveError(PreconditionError):
    def __init__(self, message, roots=()):
        super().__init__(message)
        self.roots = list(roots)


class NotImplementableError(PreconditionError):
    def __init__(self, message, failed=None):
        super().__init__(message)
        self.failed = failed


class SynthesisError(PreconditionError):
    def __init__(self, message, condition=None, diagnostics=None):
        super().__init__(message)
        self.condition = condition
        self.diagnostics = diagnostics or {}


class ConditioningError(AffineBehaviorError):
    """Polynomial elimination became numerically unreliable."""
