"""Exception hierarchy shared by all scheduler modules."""


class SchedError(Exception):
    """Base class for every error raised by monosched."""


class ModelError(SchedError, ValueError):
    """A fading model has invalid parameters."""


class NonPositiveSupport(ModelError):
    """A gain atom, grid point or threshold is not strictly positive."""


class DivergentInverseMoment(ModelError):
    """E[1/g] is infinite, so the primal threshold recursion is undefined."""


class QuadratureNotConverged(SchedError, ArithmeticError):
    """Adaptive quadrature ran out of subdivisions.

    ``estimate`` and ``error`` hold the best value reached and its error bound.
    """

    def __init__(self, estimate: float, error: float, panels: int):
        super().__init__(
            f"quadrature did not converge after {panels} subdivisions "
            f"(estimate={estimate:.17g}, error bound={error:.3g})"
        )
        self.estimate = estimate
        self.error = error
        self.panels = panels


class InvalidCost(SchedError, ValueError):
    """Monomial order n <= 1 (or not finite)."""


class TableMismatch(SchedError, ValueError):
    """A policy was given a threshold table of the wrong kind, order or horizon."""


class IndexOutOfHorizon(SchedError, IndexError):
    """A slot index lies outside 1..T of a table."""


class NonPositiveGain(SchedError, ValueError):
    """A channel gain passed to a cost map is <= 0."""


class EmptyHorizon(SchedError, ValueError):
    """An allocation was requested over zero slots."""


class GridTooCoarse(SchedError, ArithmeticError):
    """The DP oracle produced a value table that violates monotonicity in the state."""


class ConfigError(SchedError, ValueError):
    """A JSON config or table file could not be interpreted."""
