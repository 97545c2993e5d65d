"""Exception hierarchy."""


class BifiromError(Exception):
    """Base class for all package errors."""


class ContractError(BifiromError, ValueError):
    """A caller violated a documented precondition."""


class DomainError(ContractError):
    """Parameter point outside the problem's parameter box."""


class UnknownProblemError(BifiromError, KeyError):
    def __init__(self, name, known):
        self.name = name
        self.known = tuple(known)
        super().__init__(f"unknown problem {name!r}; registered: {', '.join(self.known)}")

    def __str__(self):
        return self.args[0]


class StructuralError(BifiromError):
    """Sparsity pattern mismatch between an operator and its reference pattern."""


class NumericalError(BifiromError):
    """Base for numerical failures (CLI exit code 2)."""


class SolverError(NumericalError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class NonConvergenceError(NumericalError):
    def __init__(self, message, history=(), partial=None):
        super().__init__(message)
        self.history = list(history)
        self.partial = partial


class SweepError(NonConvergenceError):
    def __init__(self, message, offenders):
        super().__init__(message)
        self.offenders = list(offenders)


class EmptyBasisError(NumericalError):
    pass


class IllConditionedGramianError(NumericalError):
    pass


class ReducedSolveError(NumericalError):
    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition


class ArtifactFormatError(BifiromError):
    """Malformed, truncated or corrupted artifact file."""


class ArtifactVersionError(ArtifactFormatError):
    pass
