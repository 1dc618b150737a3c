"""
Numerical failure types.

Validation problems are plain ValueError (pydantic's ValidationError included);
everything here signals that the numerics themselves did not deliver.
"""

from typing import Optional

import numpy as np


class NumericalError(RuntimeError):
    """Base class for failures of the numerical machinery."""


class ConvergenceError(NumericalError):
    """Step halving did not converge within the allowed number of refinements."""

    def __init__(self, message: str, coarse: np.ndarray, fine: np.ndarray, change: float):
        super().__init__(message)
        self.coarse = coarse
        self.fine = fine
        self.change = change


class TruncationError(NumericalError):
    """Population reached the top of the Fock ladder and the operator cannot be rebuilt."""

    def __init__(self, message: str, top_population: float):
        super().__init__(message)
        self.top_population = top_population


class FitError(NumericalError):
    """A least-squares fit diverged or left a residual above its threshold."""

    def __init__(self, message: str, residual: Optional[float] = None):
        super().__init__(message)
        self.residual = residual


class OptimizationError(NumericalError):
    """The objective landscape is flat; no maximum can be identified."""


class BoundViolationError(NumericalError):
    """Full dynamics exceeded an analytic error bound."""

    def __init__(self, message: str, eps_bound: float, eps_simulated: float):
        super().__init__(message)
        self.eps_bound = eps_bound
        self.eps_simulated = eps_simulated
