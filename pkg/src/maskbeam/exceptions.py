"""Exception types raised by the toolkit."""

import numpy as np


class ConvergenceError(ArithmeticError):
    """Iterative eigensolver hit its sweep cap.

    ``residual`` is the largest remaining relative off-diagonal norm.
    """

    def __init__(self, message, residual):
        super().__init__(message)
        self.residual = residual


class SingularMatrixError(np.linalg.LinAlgError):
    """Matrix is not positive definite even after diagonal loading."""

    def __init__(self, message, pivot=None, index=None):
        super().__init__(message)
        self.pivot = pivot
        self.index = index


class DegenerateStatisticsError(ValueError):
    """A filter gain or normalization has a vanishing denominator.

    ``bins`` lists the flat batch indices (frequency bins for time-invariant
    statistics) where the problem occurred.
    """

    def __init__(self, message, bins=()):
        super().__init__(message)
        self.bins = tuple(int(b) for b in bins)

