"""Error signals raised by the library.

Each exception carries a stable ``signal`` string so CLI consumers and tests
can match on the contract name rather than on prose.
"""

from __future__ import annotations


class FracSdeError(ValueError):
    """Base class for contract violations."""

    signal = "error"

    def __init__(self, message: str = ""):
        super().__init__(f"{self.signal}: {message}" if message else self.signal)


class BoundarySingularityError(FracSdeError):
    """Kernel evaluation requested on the singular boundary s <= 0."""

    signal = "boundary-singularity"


class QuadFailureError(FracSdeError):
    """Quadrature did not reach the requested tolerance."""

    signal = "quad-failure"


class KernelDegenerateError(FracSdeError):
    """Kernel-pair factor functions vanish where they must not."""

    signal = "kernel-degenerate"


class LocalDeterminismError(FracSdeError):
    """Schur extension produced a non-positive conditional variance."""

    signal = "local-determinism"


class TransformSingularError(FracSdeError):
    """Discretized kernel is not invertible."""

    signal = "transform-singular"


class StepExceedsCapError(FracSdeError):
    """A single grid step already violates the partition cap."""

    signal = "step-exceeds-cap"


class SeparatorDegenerateError(FracSdeError):
    """Conditioning design matrix is rank deficient."""

    signal = "separator-degenerate"


class KernelDiscretizationError(FracSdeError):
    """Discretized kernel assembly produced non-finite entries."""

    signal = "kernel-discretization-failure"
