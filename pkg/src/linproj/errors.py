"""Exception types shared across the package."""


class ContractViolation(ValueError):
    """An input violates a documented precondition (shape, finiteness, range)."""


class CertifiedInfeasible(Exception):
    """Canonicalization proved the constraint set empty.

    Raised when a derived slack upper bound is negative beyond the
    feasibility tolerance: the corresponding inequality can never hold
    under the box bounds.
    """


class SingularKkt(Exception):
    """Conjugate gradients failed on the KKT operator even after a
    Tikhonov-shifted retry. Carries the best iterate found."""

    def __init__(self, message, best_iterate=None):
        super().__init__(message)
        self.best_iterate = best_iterate
