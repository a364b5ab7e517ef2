"""Exception hierarchy shared by all hopfkit modules."""


class HopfkitError(Exception):
    """Base class for all errors raised by hopfkit."""


class ConfigError(HopfkitError, ValueError):
    """A problem or run configuration violates its declared validity range."""


class DomainError(HopfkitError, ValueError):
    """An operand lies outside the subspace an operation is defined on.

    ``energy`` carries the offending (relative) content when meaningful.
    """

    def __init__(self, msg, energy=None):
        super().__init__(msg)
        self.energy = energy


class SpectrumProximityError(HopfkitError, ArithmeticError):
    """A shifted solve ``(z - A) w = r`` is numerically singular."""

    def __init__(self, msg, z):
        super().__init__(msg)
        self.z = z


class DegeneracyError(HopfkitError, ArithmeticError):
    """A quantity that must be nonzero (Gram determinant, pairing, phase) vanishes."""


class ConvergenceError(HopfkitError, RuntimeError):
    """An iterative method failed to converge.

    ``trace`` holds the per-iteration residual history and ``partial`` any
    partial result (e.g. the converged prefix of a branch).
    """

    def __init__(self, msg, trace=None, partial=None):
        super().__init__(msg)
        self.trace = list(trace) if trace is not None else []
        self.partial = partial


class WrongEigenvalueError(ConvergenceError):
    """Inverse iteration converged to an eigenvalue too far from the target."""


class SetupError(HopfkitError, RuntimeError):
    """Prepared problem data (eigenvectors, bordering vector) is missing."""


class NoMatchError(HopfkitError, ValueError):
    """A candidate solution is not on the computed branch within tolerance."""


class NumericError(HopfkitError, FloatingPointError):
    """Non-finite values were produced while evaluating a nonlinearity."""


class PoleError(HopfkitError, ZeroDivisionError):
    """A closed-form expression is evaluated at one of its poles."""
