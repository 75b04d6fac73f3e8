#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
This module contains the dense linear-algebra substrate: orthonormal bases, truncated SVD, principal angles,
subspace-error and incoherence metrics, and skew-symmetric rotations of subspaces.

Remarks:

- All vectors are treated as of type [n,]
- A basis is an ``[n, r]`` array with orthonormal columns, wrapped into :class:`BasisMatrix`
- Every function is pure; returned objects are immutable

"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .exceptions import DimensionError
from .exceptions import InvalidConfig
from .exceptions import InvalidRotation
from .exceptions import NotOrthonormal
from .exceptions import RankDeficient

ORTHO_TOL = 1e-10
RANK_TOL = 1e-10
SKEW_TOL = 1e-12


class BasisMatrix:
    """
    Tall matrix with orthonormal columns representing an ``r``-dimensional subspace of :math:`\\mathbb R^n`.

    A basis with zero columns represents the trivial subspace :math:`\\{0\\}`; it is accepted so that
    "no prior subspace knowledge" can be passed where a basis is expected.

    Attributes
    ----------
    data : : read-only array of shape ``[n, r]``
        The basis vectors as columns.
    n, r : : integers
        Ambient and subspace dimensions.

    """

    def __init__(self, data, check=True):
        data = np.array(data, dtype=float)
        if data.ndim == 1:
            data = data.reshape(-1, 1)
        if data.ndim != 2:
            raise DimensionError(f"a basis must be a 2-D array, got {data.ndim}-D")
        n, r = data.shape
        if r > n:
            raise DimensionError(f"a basis of R^{n} cannot have {r} columns")
        if check and r > 0:
            gram_err = np.max(np.abs(data.T @ data - np.eye(r)))
            if gram_err > ORTHO_TOL:
                raise NotOrthonormal(f"columns are not orthonormal (max Gram deviation {gram_err:.3e})")
        data.setflags(write=False)
        self.data = data

    @classmethod
    def empty(cls, n):
        return cls(np.zeros((n, 0)))

    @property
    def n(self):
        return self.data.shape[0]

    @property
    def r(self):
        return self.data.shape[1]

    def project(self, x):
        """
        Orthogonal projection :math:`P P^\\top x` of a vector or of the columns of a matrix.

        """
        return self.data @ (self.data.T @ x)

    def project_out(self, x):
        """
        Projection onto the orthogonal complement, :math:`(I - P P^\\top) x`.

        """
        return x - self.data @ (self.data.T @ x)

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self.data
        return self.data.astype(dtype)

    def __repr__(self):
        return f"BasisMatrix(n={self.n}, r={self.r})"


@dataclass(frozen=True)
class SvdTriple:
    """
    Top-``r`` part of a singular value decomposition :math:`M \\approx U \\text{diag}(\\sigma) V^\\top`.

    """
    U: BasisMatrix
    sigma: np.ndarray
    V: BasisMatrix

    def reconstruct(self):
        return (self.U.data * self.sigma) @ self.V.data.T


def as_matrix(M):
    M = np.asarray(M, dtype=float)
    if M.ndim == 1:
        M = M.reshape(-1, 1)
    if M.ndim != 2:
        raise DimensionError(f"expected a matrix, got a {M.ndim}-D array")
    return M


def orthonormalize(M):
    """
    Orthonormal basis of the column span of a full-column-rank matrix.

    QR decomposition with the signs fixed so that the triangular factor has a positive diagonal;
    an already orthonormal input is returned unchanged up to round-off.

    Raises
    ------
    RankDeficient
        If the numerical rank (relative tolerance ``1e-10``) is below the number of columns.

    """
    M = as_matrix(M)
    n, r = M.shape
    if r == 0:
        return BasisMatrix.empty(n)
    if r > n:
        raise RankDeficient(f"{r} columns in R^{n} cannot be independent")
    s = np.linalg.svd(M, compute_uv=False)
    if s[0] == 0.0 or s[-1] < RANK_TOL * s[0]:
        raise RankDeficient(f"numerical rank below {r} (sigma_min/sigma_max = {s[-1] / max(s[0], 1e-300):.3e})")
    Q, R = np.linalg.qr(M)
    signs = np.sign(np.diag(R))
    signs[signs == 0] = 1.0
    return BasisMatrix(Q * signs)


def topr_svd(M, r):
    """
    Top-``r`` singular triplets of ``M``.

    The sign of every left singular vector is fixed so that its largest-magnitude entry is positive
    (the matching right singular vector is flipped along), which makes the output deterministic.

    Parameters
    ----------
    M : : array of shape ``[n, d]``
    r : : positive integer, at most ``min(n, d)``

    Returns
    -------
    :class:`SvdTriple`

    """
    M = as_matrix(M)
    if r < 1 or r > min(M.shape):
        raise DimensionError(f"rank {r} not in [1, {min(M.shape)}] for a {M.shape[0]}x{M.shape[1]} matrix")
    U, s, Vt = np.linalg.svd(M, full_matrices=False)
    U = U[:, :r]
    V = Vt[:r, :].T
    pivot = np.argmax(np.abs(U), axis=0)
    signs = np.sign(U[pivot, np.arange(r)])
    signs[signs == 0] = 1.0
    return SvdTriple(U=BasisMatrix(U * signs, check=False), sigma=s[:r].copy(), V=BasisMatrix(V * signs, check=False))


def subspace_error(Phat, P):
    """
    Subspace error :math:`\\text{SE}(\\hat P, P) = \\|(I - \\hat P \\hat P^\\top) P\\|_2`, the sine of the largest principal angle.

    """
    if Phat.n != P.n:
        raise DimensionError(f"ambient dimensions differ: {Phat.n} vs {P.n}")
    if P.r == 0:
        return 0.0
    D = Phat.project_out(P.data)
    return float(min(1.0, np.linalg.norm(D, 2)))


def principal_angle_stats(Phat, P):
    """
    Principal angles between two subspaces of equal dimension and the two GROUSE error measures.

    Cosines are the singular values of :math:`\\hat P^\\top P`, clamped into ``[0, 1]``.
    Angles with :math:`\\cos^2 \\theta \\ge 1/2` are taken from the matching singular values of
    :math:`(I - \\hat P \\hat P^\\top) P` instead, since ``arccos`` loses all accuracy near 1.

    Returns
    -------
    eps : : number
        :math:`\\sum_i \\sin^2 \\theta_i`
    zeta : : number
        :math:`\\prod_i \\cos^2 \\theta_i`
    theta : : array of shape ``[r,]``
        Principal angles in ascending order.

    """
    if Phat.n != P.n or Phat.r != P.r:
        raise DimensionError(f"dimension mismatch: ({Phat.n}, {Phat.r}) vs ({P.n}, {P.r})")
    if P.r == 0:
        return 0.0, 1.0, np.zeros(0)
    A = Phat.data.T @ P.data
    cos = np.clip(np.linalg.svd(A, compute_uv=False), 0.0, 1.0)
    sin = np.clip(np.linalg.svd(P.data - Phat.data @ A, compute_uv=False), 0.0, 1.0)[::-1]
    theta = np.where(cos ** 2 >= 0.5, np.arcsin(sin), np.arccos(cos))
    eps = float(np.sum(np.sin(theta) ** 2))
    zeta = float(np.prod(np.cos(theta) ** 2))
    return eps, zeta, theta


def incoherence(P):
    """
    Smallest :math:`\\mu` such that :math:`\\max_i \\|P^{(i)}\\|^2 \\le \\mu r / n`.

    """
    if P.r == 0:
        raise DimensionError("incoherence of the trivial subspace is undefined")
    row_norms = np.sum(P.data ** 2, axis=1)
    return float(P.n / P.r * np.max(row_norms))


def random_basis(n, r, rng):
    """
    Orthonormalized ``[n, r]`` standard-normal matrix.

    """
    return orthonormalize(rng.standard_normal((n, r)))


def random_skew(n, rng):
    """
    Skew-symmetric :math:`B = \\tilde B - \\tilde B^\\top` with standard-normal :math:`\\tilde B`.

    """
    Bt = rng.standard_normal((n, n))
    return Bt - Bt.T


def rotate_subspace(P, delta, B):
    """
    Rotate a subspace by :math:`e^{\\delta B}`, ``B`` skew-symmetric.

    The matrix exponential uses scaling and squaring with a Padé approximant (``scipy.linalg.expm``);
    the rotated basis is re-orthonormalized.

    """
    B = as_matrix(B)
    if B.shape != (P.n, P.n):
        raise DimensionError(f"generator must be {P.n}x{P.n}, got {B.shape[0]}x{B.shape[1]}")
    if delta < 0:
        raise InvalidConfig(f"rotation magnitude must be non-negative, got {delta}")
    skew_err = np.max(np.abs(B + B.T)) if B.size else 0.0
    if skew_err > SKEW_TOL:
        raise InvalidRotation(f"generator is not skew-symmetric (max |B + B^T| = {skew_err:.3e})")
    if P.r == 0:
        return P
    R = scipy.linalg.expm(delta * B)
    return orthonormalize(R @ P.data)


def diagnostics(L, r):
    """
    Identifiability diagnostics of a low-rank matrix ``L`` with reduced SVD :math:`U \\Sigma V^\\top` truncated at rank ``r``.

    Nothing here is enforced; the values are meant to be reported next to results.

    Returns
    -------
    A dictionary with keys ``mu_left``, ``mu_right`` (incoherence of ``U`` and ``V``), ``condition_number``
    (:math:`\\sigma_1 / \\sigma_r`) and ``strong_incoherence``
    (:math:`\\max_{ij} |(U V^\\top)_{ij}| \\sqrt{n d / r}`).

    """
    L = as_matrix(L)
    n, d = L.shape
    svd = topr_svd(L, r)
    sigma_r = svd.sigma[-1]
    UV = svd.U.data @ svd.V.data.T
    return {
        "mu_left": incoherence(svd.U),
        "mu_right": incoherence(svd.V),
        "condition_number": float(svd.sigma[0] / sigma_r) if sigma_r > 0 else float("inf"),
        "strong_incoherence": float(np.max(np.abs(UV)) * np.sqrt(n * d / r)),
    }
