"""Exception types shared across the package."""


class ContractViolationError(ValueError):
    """An input violates a documented precondition (shape, symmetry, range)."""


class DecompositionError(RuntimeError):
    """A matrix factorization failed (e.g. Cholesky on a non-PD matrix).

    ``pivot`` holds the 0-based index of the first failing pivot when known.
    """

    def __init__(self, message, pivot=None):
        super().__init__(message)
        self.pivot = pivot


class InfeasibleDesignError(RuntimeError):
    """No design parameter satisfies a hard constraint (e.g. gain threshold)."""

    def __init__(self, message, stream=None):
        super().__init__(message)
        self.stream = stream


class DegenerateSteeringError(RuntimeError):
    """A beamformer steering vector collapsed to zero in the reduced space."""


class NoPeakError(RuntimeError):
    """A spectrum search found no usable peak (degenerate subspace)."""
