#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
This module contains the error taxonomy of ``slrtrack`` along with the warning classes used for recoverable numerical conditions.

Every error raised by the package derives from :class:`SlrError`.

"""


class SlrError(Exception):
    """
    Base class of all ``slrtrack`` errors.

    """


class DimensionError(SlrError, ValueError):
    """
    Operand shapes are inconsistent, or a requested rank exceeds what the operand supports.

    """


class RankDeficient(SlrError):
    """
    A matrix that must have full column rank does not (numerical rank below the requested one).

    """


class InvalidRotation(SlrError, ValueError):
    """
    A rotation generator is not skew-symmetric.

    """


class InvalidConfig(SlrError, ValueError):
    """
    Configuration values are out of their admissible range.

    """


class PreconditionError(SlrError):
    """
    An operation was invoked in a state where its precondition does not hold.

    """


class IllConditionedSupport(SlrError):
    """
    The Gram matrix of the projector restricted to a support is numerically singular.

    Attributes
    ----------
    cond : : number
        Condition number that triggered the error.

    """

    def __init__(self, message, cond=float("inf")):
        super().__init__(message)
        self.cond = cond


class IterationLimit(SlrError):
    """
    An iterative solver hit its iteration cap before meeting its stopping rule.

    Attributes
    ----------
    last_iterate : : object
        The last iterate of the solver (a vector for the l1 solver, a decomposition for batch solvers).
    residual : : number
        Value of the stopping quantity at exit.

    """

    def __init__(self, message, last_iterate=None, residual=float("nan")):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.residual = residual


class UnderdeterminedRow(SlrError):
    """
    A row (``axis=0``) or column (``axis=1``) has fewer observations than the rank in its least-squares system.

    """

    def __init__(self, message, index, axis):
        super().__init__(message)
        self.index = index
        self.axis = axis


class SkippedStepWarning(RuntimeWarning):
    """
    An update step was skipped and the state was left unchanged.

    """


class FallbackWarning(RuntimeWarning):
    """
    A computation fell back to a less refined estimate.

    """


class NotOrthonormal(SlrError, ValueError):
    """
    A matrix passed as a basis does not have orthonormal columns.

    """
