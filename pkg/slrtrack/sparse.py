#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
This module contains the sparse-recovery toolbox used by the batch solvers and the trackers:
an l1 solver for basis pursuit denoising (one measurement or a block of them), hard thresholding, support thresholding
and least squares on a known support.

Remarks:

- Thresholds are strict: an entry survives iff its magnitude is strictly above the threshold
- Projections :math:`\\Psi = I - \\hat P \\hat P^\\top` are applied as operators and never materialized

"""

import logging
from dataclasses import dataclass
from typing import Any

import numpy as np
import scipy.linalg
import scipy.sparse.linalg

from .exceptions import DimensionError
from .exceptions import IllConditionedSupport
from .exceptions import InvalidConfig
from .exceptions import IterationLimit
from .linalg import BasisMatrix
from .utilities import soft_threshold

logger = logging.getLogger(__name__)

COND_LIMIT = 1e12


class ProjectionOperator(scipy.sparse.linalg.LinearOperator):
    """
    Orthogonal projector :math:`\\Psi = I - \\hat P \\hat P^\\top` onto the complement of a subspace.

    One application costs two products with the ``[n, r]`` basis.

    """

    def __init__(self, basis):
        if not isinstance(basis, BasisMatrix):
            basis = BasisMatrix(basis)
        self.basis = basis
        super().__init__(dtype=np.dtype(float), shape=(basis.n, basis.n))

    def _matvec(self, x):
        return self.basis.project_out(np.ravel(x))

    def _rmatvec(self, x):
        return self._matvec(x)

    def _matmat(self, X):
        return self.basis.project_out(X)

    def _adjoint(self):
        return self

    def shifted_solve(self, b):
        """
        Solve :math:`(I + \\Psi^\\top \\Psi) x = b`; for a projector :math:`(I + \\Psi)^{-1} = I - \\Psi / 2`.

        """
        return b - 0.5 * self.basis.project_out(b)


@dataclass
class L1Problem:
    """
    Basis pursuit denoising :math:`\\min \\|x\\|_1` subject to :math:`\\|y - A x\\|_2 \\le \\xi`.

    Attributes
    ----------
    A : : ``[m, n]`` array, sparse matrix or ``LinearOperator``
        Sensing operator.
    y : : array of shape ``[m,]``
        Measurements.
    xi : : number
        Noise bound, non-negative.
    max_iters : : integer
        Iteration cap of the solver.
    tol : : number
        Stopping tolerance on the primal and dual residuals, relative to :math:`\\max(1, \\|y\\|)`, and absolute
        slack of the constraint at the returned point.
    rho : : number
        Initial augmented-Lagrangian penalty; adapted while iterating.

    """
    A: Any
    y: np.ndarray
    xi: float = 0.0
    max_iters: int = 2000
    tol: float = 1e-7
    rho: float = 1.0

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=float).ravel()
        if self.xi < 0:
            raise InvalidConfig(f"noise bound must be non-negative, got {self.xi}")
        if self.A.shape[0] != self.y.size:
            raise DimensionError(f"operator has {self.A.shape[0]} rows, measurements have {self.y.size} entries")
        if self.max_iters < 1 or self.tol <= 0 or self.rho <= 0:
            raise InvalidConfig("max_iters, tol and rho must be positive")


def _shifted_solver(A):
    """
    Return a solver of :math:`(I + A^\\top A) x = b` and the operator itself.

    """
    if isinstance(A, ProjectionOperator):
        return A.shifted_solve, A
    if isinstance(A, np.ndarray):
        A = np.asarray(A, dtype=float)
        factor = scipy.linalg.cho_factor(np.eye(A.shape[1]) + A.T @ A)
        return (lambda b: scipy.linalg.cho_solve(factor, b)), scipy.sparse.linalg.aslinearoperator(A)
    op = scipy.sparse.linalg.aslinearoperator(A)
    n = op.shape[1]
    shifted = scipy.sparse.linalg.LinearOperator((n, n), matvec=lambda v: v + op.rmatvec(op.matvec(v)), dtype=float)

    def solve(b):
        x, _ = scipy.sparse.linalg.cg(shifted, b, x0=b / 2, rtol=1e-12, atol=0.0)
        return x

    return solve, op


def _project_ball(v, center, radius):
    d = v - center
    norm = np.linalg.norm(d)
    if norm <= radius:
        return v
    return center + d * (radius / norm)


def _project_columns(V, center, radius):
    D = V - center
    norms = np.linalg.norm(D, axis=0)
    factor = np.where(norms > radius, radius / np.where(norms > 0, norms, 1.0), 1.0)
    return center + D * factor


def _restore_feasibility(op, u, y, xi, tol):
    """
    ``u`` itself if :math:`\\|y - A u\\| \\le \\xi +` ``tol``. Otherwise ``u`` moved the shortest way along the
    least-squares correction on its support until the residual norm is :math:`\\xi`, or ``None`` when that
    correction cannot reach the constraint.

    """
    r0 = y - op.matvec(u)
    if np.linalg.norm(r0) <= xi + tol:
        return u
    T = np.flatnonzero(u)
    if T.size == 0 or T.size > y.size:
        return None
    E = np.zeros((u.size, T.size))
    E[T, np.arange(T.size)] = 1.0
    A_T = np.asarray(op.matmat(E))
    delta = np.linalg.lstsq(A_T, r0, rcond=None)[0]
    p = A_T @ delta
    floor = np.linalg.norm(r0 - p)
    p_norm = np.linalg.norm(p)
    if floor > xi + tol or p_norm == 0:
        return None
    # residual along the step is ||r0 - p||^2 + (1 - theta)^2 ||p||^2
    theta = min(1.0, max(0.0, 1.0 - np.sqrt(max(xi ** 2 - floor ** 2, 0.0)) / p_norm))
    x = u.copy()
    x[T] += theta * delta
    if np.linalg.norm(y - op.matvec(x)) > xi + tol:
        return None
    return x


def l1_bpdn(problem):
    """
    Solve basis pursuit denoising by ADMM on the graph of the sensing operator.

    The splitting is :math:`u = x`, :math:`z = A x` with :math:`\\|u\\|_1` and the indicator of the ball
    :math:`\\{z : \\|y - z\\| \\le \\xi\\}`; the ``x``-step solves a system with :math:`I + A^\\top A`, which does not
    depend on the penalty, so the penalty is rebalanced freely between the primal and dual residuals.

    Returns
    -------
    xhat : : array of shape ``[n,]``
        Exactly sparse iterate (output of the soft-thresholding step) with
        :math:`\\|y - A \\hat x\\| \\le \\xi +` ``tol``. A converged iterate that misses the constraint is corrected
        on its own support; if that fails, the residual tolerance is tightened and the iterations go on.

    Raises
    ------
    IterationLimit
        If no feasible converged iterate is found within ``max_iters`` iterations; carries the last iterate.

    """
    y, xi = problem.y, problem.xi
    n = problem.A.shape[1]
    if np.linalg.norm(y) <= xi:
        return np.zeros(n)

    solve, op = _shifted_solver(problem.A)
    rho = problem.rho
    scale = problem.tol * max(1.0, np.linalg.norm(y))
    floor = np.finfo(float).eps * max(1.0, np.linalg.norm(y))

    u = np.zeros(n)
    z = _project_ball(np.zeros(y.size), y, xi)
    du = np.zeros(n)
    dz = np.zeros(y.size)
    r_norm = np.inf

    for it in range(1, problem.max_iters + 1):
        x = solve((u - du) + op.rmatvec(z - dz))
        Ax = op.matvec(x)
        u_old, z_old = u, z
        u = soft_threshold(x + du, 1.0 / rho)
        z = _project_ball(Ax + dz, y, xi)
        du = du + x - u
        dz = dz + Ax - z

        r_norm = np.sqrt(np.sum((x - u) ** 2) + np.sum((Ax - z) ** 2))
        s_norm = rho * np.linalg.norm((u - u_old) + op.rmatvec(z - z_old))
        if r_norm <= scale and s_norm <= scale:
            xhat = _restore_feasibility(op, u, y, xi, problem.tol)
            if xhat is not None:
                logger.debug("l1_bpdn converged after %d iterations", it)
                return xhat
            scale = max(scale / 10.0, floor)

        if r_norm > 10 * s_norm:
            rho, du, dz = 2 * rho, du / 2, dz / 2
        elif s_norm > 10 * r_norm:
            rho, du, dz = rho / 2, du * 2, dz * 2

    raise IterationLimit(
        f"l1_bpdn did not converge in {problem.max_iters} iterations (primal residual {r_norm:.3e})",
        last_iterate=u,
        residual=r_norm,
    )


def l1_bpdn_columns(A, Y, xi=0.0, max_iters=2000, tol=1e-7, rho=1.0):
    """
    Solve one basis pursuit denoising problem per column of ``Y`` with a shared sensing operator.

    Every column follows the iterations of :func:`l1_bpdn` with its own penalty and stopping test; converged
    columns leave the active block. ``A`` is a :class:`ProjectionOperator`, a dense array or anything
    ``scipy.sparse.linalg.aslinearoperator`` takes; the ``x``-step with a general operator is solved column by column.

    Returns
    -------
    X : : array of shape ``[n, k]``
        Solutions; a column that hit ``max_iters`` holds its last iterate.
    converged : : boolean array of shape ``[k,]``

    """
    Y = np.asarray(Y, dtype=float)
    if Y.ndim != 2 or A.shape[0] != Y.shape[0]:
        raise DimensionError(f"operator has {A.shape[0]} rows, measurements have shape {Y.shape}")
    if xi < 0:
        raise InvalidConfig(f"noise bound must be non-negative, got {xi}")
    solve, op = _shifted_solver(A)
    if isinstance(A, (ProjectionOperator, np.ndarray)):
        solve_block = solve
    else:
        def solve_block(B):
            return np.column_stack([solve(b) for b in B.T])

    n, k = A.shape[1], Y.shape[1]
    X = np.zeros((n, k))
    y_norm = np.linalg.norm(Y, axis=0)
    converged = y_norm <= xi
    active = np.flatnonzero(~converged)
    if active.size == 0:
        return X, converged

    Ya = Y[:, active]
    rho = np.full(active.size, float(rho))
    scale = tol * np.maximum(1.0, y_norm[active])
    floor = np.finfo(float).eps * np.maximum(1.0, y_norm[active])
    U = np.zeros((n, active.size))
    Z = _project_columns(np.zeros_like(Ya), Ya, xi)
    DU = np.zeros_like(U)
    DZ = np.zeros_like(Z)

    for it in range(1, max_iters + 1):
        Xa = solve_block((U - DU) + op.rmatmat(Z - DZ))
        AX = op.matmat(Xa)
        U_old, Z_old = U, Z
        U = soft_threshold(Xa + DU, 1.0 / rho)
        Z = _project_columns(AX + DZ, Ya, xi)
        DU = DU + Xa - U
        DZ = DZ + AX - Z

        r_norm = np.sqrt(np.sum((Xa - U) ** 2, axis=0) + np.sum((AX - Z) ** 2, axis=0))
        s_norm = rho * np.linalg.norm((U - U_old) + op.rmatmat(Z - Z_old), axis=0)
        done = np.zeros(active.size, dtype=bool)
        for i in np.flatnonzero((r_norm <= scale) & (s_norm <= scale)):
            x = _restore_feasibility(op, U[:, i], Ya[:, i], xi, tol)
            if x is None:
                scale[i] = max(scale[i] / 10.0, floor[i])
                continue
            X[:, active[i]] = x
            converged[active[i]] = done[i] = True

        grow = r_norm > 10 * s_norm
        shrink = s_norm > 10 * r_norm
        factor = np.where(grow, 2.0, np.where(shrink, 0.5, 1.0))
        rho, DU, DZ = rho * factor, DU / factor, DZ / factor

        if done.any():
            keep = ~done
            active, Ya, rho, scale, floor = active[keep], Ya[:, keep], rho[keep], scale[keep], floor[keep]
            U, Z, DU, DZ = U[:, keep], Z[:, keep], DU[:, keep], DZ[:, keep]
            if active.size == 0:
                logger.debug("l1_bpdn_columns: %d columns converged after %d iterations", k, it)
                return X, converged

    X[:, active] = U
    logger.debug("l1_bpdn_columns: %d of %d columns stopped at the iteration cap", active.size, k)
    return X, converged


def hard_threshold(M, beta):
    """
    Entrywise hard thresholding :math:`\\text{HT}_\\beta`: keep entries with :math:`|m| > \\beta`, zero the rest.

    """
    if beta < 0:
        raise InvalidConfig(f"threshold must be non-negative, got {beta}")
    M = np.asarray(M, dtype=float)
    return np.where(np.abs(M) > beta, M, 0.0)


def support_threshold(x, omega_supp):
    if omega_supp < 0:
        raise InvalidConfig(f"threshold must be non-negative, got {omega_supp}")
    return np.flatnonzero(np.abs(np.asarray(x)) > omega_supp)


def ls_on_support(Psi_op, y_tilde, T):
    """
    Least squares on a known support, :math:`\\hat x = I_T (\\Psi_T^\\top \\Psi_T)^{-1} \\Psi_T^\\top \\tilde y`.

    Since :math:`\\Psi` is a symmetric idempotent, :math:`\\Psi_T^\\top \\Psi_T = I - \\hat P_T \\hat P_T^\\top`
    and :math:`\\Psi_T^\\top \\tilde y = (\\Psi \\tilde y)_T`.

    Parameters
    ----------
    Psi_op : : :class:`ProjectionOperator` or :class:`~slrtrack.linalg.BasisMatrix` of :math:`\\hat P`
    y_tilde : : array of shape ``[n,]``
    T : : integer index array

    Raises
    ------
    IllConditionedSupport
        If the condition number of :math:`\\Psi_T^\\top \\Psi_T` exceeds ``1e12``.

    """
    if not isinstance(Psi_op, ProjectionOperator):
        Psi_op = ProjectionOperator(Psi_op)
    y_tilde = np.asarray(y_tilde, dtype=float).ravel()
    n = Psi_op.shape[0]
    if y_tilde.size != n:
        raise DimensionError(f"measurement has {y_tilde.size} entries, operator acts on R^{n}")
    T = np.asarray(T, dtype=int).ravel()
    xhat = np.zeros(n)
    if T.size == 0:
        return xhat
    P_T = Psi_op.basis.data[T]
    gram = np.eye(T.size) - P_T @ P_T.T
    cond = np.linalg.cond(gram)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise IllConditionedSupport(f"restricted Gram matrix on {T.size} indices has condition {cond:.3e}", cond=cond)
    rhs = Psi_op.matvec(y_tilde)[T]
    xhat[T] = scipy.linalg.solve(gram, rhs, assume_a="pos")
    return xhat
