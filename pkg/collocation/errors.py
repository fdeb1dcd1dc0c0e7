"""Exception hierarchy for the collocation solver.

Library code raises these; only the CLI turns them into exit codes.
"""

from typing import Optional


class CollocationError(Exception):
    """Base class for every error raised by the package."""


class InvalidParams(CollocationError, ValueError):
    """Collocation parameters, mesh or problem components are invalid."""


class OutOfDomain(CollocationError, ValueError):
    """A point was requested outside the interval the solution lives on."""


class KernelEvaluationError(CollocationError):
    """The kernel returned a negative or non-finite value at a quadrature node."""


class NonFiniteEvaluation(CollocationError):
    """The nonlinearity returned NaN or infinity inside a scanned bracket."""


class DegenerateReference(CollocationError):
    """A reference solution integrates to a non-positive value."""


class ConfigError(CollocationError):
    """A run configuration could not be read or holds invalid entries."""


class SolverError(CollocationError):
    """A collocation step could not be completed.

    Attributes:
        step: Mesh step index n at which the march stopped.
        outcome: The fixed-point outcome behind the failure, when there is one.
    """

    def __init__(self, step: int, message: str = "", outcome: Optional[object] = None):
        self.step = step
        self.outcome = outcome
        detail = f": {message}" if message else ""
        super().__init__(f"{self.__class__.__name__} at step {step}{detail}")


class NoNontrivialSolution(SolverError):
    """No nonzero coefficient could be found on the first subinterval."""


class StepDivergence(SolverError):
    """The step equation has no root below the scan cap for n >= 1."""


class NegativeArgument(SolverError):
    """An argument of G went negative during the general-m iteration."""


class NonConvergence(SolverError):
    """The general-m iteration ran out of iterations."""
