#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
This module contains batch sparse-plus-low-rank solvers: AltProj (staged alternating projections),
principal component pursuit by an inexact augmented Lagrangian method, and modified principal component pursuit
with partial subspace knowledge.

Remarks:

- Data matrices are of type ``[n, d]``, one frame per column
- PCP and modified PCP share one solver core; PCP is the case of an empty prior basis and an exact constraint

"""

import logging
from dataclasses import dataclass
from dataclasses import field
from typing import List
from typing import Optional

import numpy as np
from pydantic import BaseModel
from pydantic import ConfigDict
from pydantic import Field

from .exceptions import DimensionError
from .exceptions import InvalidConfig
from .exceptions import IterationLimit
from .linalg import RANK_TOL
from .linalg import BasisMatrix
from .linalg import as_matrix
from .linalg import incoherence
from .linalg import topr_svd
from .sparse import hard_threshold
from .utilities import soft_threshold

logger = logging.getLogger(__name__)


@dataclass
class SLRDecomposition:
    """
    Sparse-plus-low-rank decomposition :math:`M \\approx \\hat L + \\hat S`.

    Attributes
    ----------
    Lhat, Shat : : arrays of shape ``[n, d]``
    iterations_used : : integer
    final_residual : : number
        :math:`\\|M - \\hat L - \\hat S\\|_F`.
    residual : : array or ``None``
        Dense residual absorbed by the noise ball of the noisy modified-PCP program.
    A_hat, L_new : : arrays or ``None``
        Modified-PCP split :math:`\\hat L = G \\hat A + \\hat L_{new}`.
    objective_history, residual_history : : lists of numbers
        Per-iteration objective and relative constraint violation. For the augmented Lagrangian solvers the
        objective is taken at the feasible completion :math:`(L_{new}, M - G A - L_{new} - Z)` of every
        iterate and kept as a running minimum: a non-increasing upper bound of the optimal value that meets
        :math:`\\|\\hat L_{new}\\|_* + \\lambda \\|\\hat S\\|_1` as the constraint violation vanishes.
    stage_ranks : : list of integers
        AltProj only: numerical rank of :math:`\\hat L` at the end of every stage.

    """
    Lhat: np.ndarray
    Shat: np.ndarray
    iterations_used: int = 0
    final_residual: float = 0.0
    residual: Optional[np.ndarray] = None
    A_hat: Optional[np.ndarray] = None
    L_new: Optional[np.ndarray] = None
    objective_history: List[float] = field(default_factory=list)
    residual_history: List[float] = field(default_factory=list)
    stage_ranks: List[int] = field(default_factory=list)


def robust_incoherence(M, r):
    """
    Incoherence :math:`\\max(\\mu(U_r), \\mu(V_r))` of the top-``r`` singular vectors of ``M`` winsorized at
    four robust standard deviations. A matrix without spread (zero median magnitude) is used as is.

    """
    M = as_matrix(M)
    spread = 1.4826 * np.median(np.abs(M))
    if spread > 0:
        M = np.clip(M, -4.0 * spread, 4.0 * spread)
    svd = topr_svd(M, r)
    if svd.sigma[0] == 0:
        return 1.0
    return max(incoherence(svd.U), incoherence(svd.V))


class AltProjConfig(BaseModel):
    """
    Parameters of :func:`altproj`.

    ``beta`` and ``T_per_stage`` are resolved from the data when left unset: :math:`\\beta = 4 \\mu r / n`
    and :math:`T = \\lceil c \\log(1/\\epsilon) \\rceil`. :math:`\\mu` is the larger incoherence of the top-``r``
    left and right singular vectors of ``M`` with its entries clipped to four robust standard deviations
    (:math:`1.4826 \\cdot \\text{median} |M_{ij}|`), see :func:`robust_incoherence`.

    """
    model_config = ConfigDict(extra="forbid")

    r: int = Field(ge=1)
    eps: float = Field(1e-6, gt=0.0)
    beta: Optional[float] = Field(None, gt=0.0)
    T_per_stage: Optional[int] = Field(None, ge=1)
    c: float = Field(10.0, gt=0.0)

    def resolved(self, M):
        M = as_matrix(M)
        n = M.shape[0]
        beta = self.beta
        if beta is None:
            beta = 4.0 * robust_incoherence(M, self.r) * self.r / n
        T = self.T_per_stage
        if T is None:
            T = max(1, int(np.ceil(self.c * np.log(1.0 / self.eps))))
        return self.model_copy(update={"beta": float(beta), "T_per_stage": int(T)})


def altproj(M, config):
    """
    AltProj: ``r`` stages of alternating projections onto rank-``k`` matrices and hard-thresholded sparse matrices.

    Starting from :math:`\\hat L = 0`, :math:`\\hat S = \\text{HT}_{\\beta \\sigma_1(M)}(M)`, iteration ``t`` of
    stage ``k`` sets :math:`\\hat L = \\mathcal P_k(M - \\hat S)` and
    :math:`\\hat S = \\text{HT}_\\zeta(M - \\hat L)` with
    :math:`\\zeta = \\beta (\\sigma_{k+1} + 0.5^t \\sigma_k)`, the singular values being those of :math:`M - \\hat S`.
    A stage ends after ``T_per_stage`` iterations or once :math:`\\|\\Delta \\hat L\\|_F < (\\epsilon / 10) \\|M\\|_F`.

    Parameters
    ----------
    M : : array of shape ``[n, d]``
    config : : :class:`AltProjConfig` or a dictionary of its fields

    Returns
    -------
    :class:`SLRDecomposition`

    """
    M = as_matrix(M)
    if isinstance(config, dict):
        config = AltProjConfig(**config)
    n, d = M.shape
    r = config.r
    if r > min(n, d):
        raise DimensionError(f"rank {r} exceeds min({n}, {d})")
    norm_M = np.linalg.norm(M)
    if norm_M == 0:
        return SLRDecomposition(Lhat=np.zeros_like(M), Shat=np.zeros_like(M), stage_ranks=[0] * r)

    config = config.resolved(M)
    beta, T, eps = config.beta, config.T_per_stage, config.eps
    sigma1 = np.linalg.norm(M, 2)
    S = hard_threshold(M, beta * sigma1)
    L = np.zeros_like(M)
    result = SLRDecomposition(Lhat=L, Shat=S)

    for k in range(1, r + 1):
        for t in range(1, T + 1):
            U, s, Vt = np.linalg.svd(M - S, full_matrices=False)
            L_new = (U[:, :k] * s[:k]) @ Vt[:k]
            sigma_next = s[k] if k < s.size else 0.0
            S = hard_threshold(M - L_new, beta * (sigma_next + 0.5 ** t * s[k - 1]))
            change = np.linalg.norm(L_new - L)
            L = L_new
            result.iterations_used += 1
            result.residual_history.append(float(np.linalg.norm(M - L - S) / norm_M))
            if change < eps / 10 * norm_M:
                break
        result.stage_ranks.append(int(np.sum(s[:k] > RANK_TOL * s[0])) if s[0] > 0 else 0)
        logger.debug("altproj stage %d finished after %d iterations", k, t)

    result.Lhat, result.Shat = L, S
    result.final_residual = float(np.linalg.norm(M - L - S))
    return result


def _svt(M, tau):
    U, s, Vt = np.linalg.svd(M, full_matrices=False)
    shrunk = np.maximum(s - tau, 0.0)
    keep = shrunk > 0
    return (U[:, keep] * shrunk[keep]) @ Vt[keep], float(np.sum(shrunk))


def svt(M, tau):
    """
    Singular value soft thresholding :math:`U \\max(\\Sigma - \\tau, 0) V^\\top`, the proximal operator of
    :math:`\\tau \\|\\cdot\\|_*`.

    """
    if tau < 0:
        raise InvalidConfig(f"threshold must be non-negative, got {tau}")
    return _svt(as_matrix(M), tau)[0]


def _project_frobenius_ball(X, radius):
    norm = np.linalg.norm(X)
    if norm <= radius:
        return X
    return X * (radius / norm)


def _inexact_alm(M, lam, G, eps_noise, tol, max_iters, rho=1.6):
    """
    Inexact augmented Lagrangian method for

    .. math:: \\min \\|L_{new}\\|_* + \\lambda \\|S\\|_1 \\quad \\text{s.t.} \\quad \\|M - S - G A - L_{new}\\|_F \\le \\epsilon

    Blocks are updated in the order :math:`A, L_{new}, S, Z` followed by the dual step, where
    :math:`Z = M - S - G A - L_{new}` is kept inside the ball of radius :math:`\\epsilon`.

    """
    n, d = M.shape
    norm_M = np.linalg.norm(M)
    zeros = np.zeros_like(M)
    if norm_M == 0:
        return SLRDecomposition(
            Lhat=zeros, Shat=zeros.copy(), residual=zeros.copy(), A_hat=np.zeros((G.r, d)), L_new=zeros.copy()
        )

    spectral = np.linalg.norm(M, 2)
    Y = M / max(spectral, np.max(np.abs(M)) / lam)
    mu = 1.25 / spectral
    mu_max = mu * 1e7
    Gm = G.data
    A = np.zeros((G.r, d))
    L = zeros.copy()
    S = zeros.copy()
    Z = zeros.copy()
    out = SLRDecomposition(Lhat=L, Shat=S)

    for it in range(1, max_iters + 1):
        A = Gm.T @ (M - L - S - Z + Y / mu)
        GA = Gm @ A
        L, nuclear = _svt(M - GA - S - Z + Y / mu, 1.0 / mu)
        S = soft_threshold(M - GA - L - Z + Y / mu, lam / mu)
        Z = _project_frobenius_ball(M - GA - L - S + Y / mu, eps_noise)
        gap = M - GA - L - S - Z
        Y = Y + mu * gap
        mu = min(mu * rho, mu_max)

        rel = float(np.linalg.norm(gap) / norm_M)
        # S + gap is the feasible completion of the current iterate
        feasible = nuclear + lam * float(np.sum(np.abs(S + gap)))
        out.objective_history.append(min(feasible, out.objective_history[-1]) if out.objective_history else feasible)
        out.residual_history.append(rel)
        if rel <= tol:
            break

    out.iterations_used = it
    out.A_hat, out.L_new, out.Shat, out.residual = A, L, S, Z
    out.Lhat = Gm @ A + L
    out.final_residual = float(np.linalg.norm(M - out.Lhat - S))
    if rel > tol:
        raise IterationLimit(
            f"augmented Lagrangian did not reach tolerance {tol:g} in {max_iters} iterations (residual {rel:.3e})",
            last_iterate=out,
            residual=rel,
        )
    logger.debug("inexact ALM converged after %d iterations", it)
    return out


def default_lambda(M):
    """
    :math:`\\lambda = 1 / \\sqrt{\\max(n, d)}`.

    """
    return 1.0 / np.sqrt(max(np.shape(M)))


def pcp_admm(M, lam=None, tol=1e-7, max_iters=1000):
    """
    Principal component pursuit :math:`\\min \\|L\\|_* + \\lambda \\|S\\|_1` s.t. :math:`M = L + S`.

    Inexact augmented Lagrangian iterations with singular value thresholding for ``L``, entrywise soft
    thresholding for ``S`` and a dual ascent step; the penalty starts at :math:`1.25 / \\sigma_1(M)` and grows
    by a factor 1.6 per iteration. Stops once :math:`\\|M - \\hat L - \\hat S\\|_F / \\|M\\|_F \\le` ``tol``.

    Raises
    ------
    IterationLimit
        Carrying the last :class:`SLRDecomposition`.

    """
    M = as_matrix(M)
    lam = default_lambda(M) if lam is None else lam
    if lam <= 0:
        raise InvalidConfig(f"lambda must be positive, got {lam}")
    out = _inexact_alm(M, lam, BasisMatrix.empty(M.shape[0]), 0.0, tol, max_iters)
    out.A_hat = out.L_new = out.residual = None
    return out


def modified_pcp(M, G, lam=None, eps_noise=0.0, tol=1e-7, max_iters=1000):
    """
    Modified principal component pursuit with partial knowledge ``G`` of the column space:

    .. math:: \\min \\|L_{new}\\|_* + \\lambda \\|S\\|_1 \\quad \\text{s.t.} \\quad \\|M - S - G A - L_{new}\\|_F \\le \\epsilon

    and :math:`\\hat L = G \\hat A + \\hat L_{new}`. With ``eps_noise = 0`` this is the noiseless program in
    which only the part of ``L`` outside ``span(G)`` is penalized. An empty ``G`` gives :func:`pcp_admm`.

    Returns
    -------
    :class:`SLRDecomposition` with ``A_hat``, ``L_new`` and ``residual`` filled in.

    """
    M = as_matrix(M)
    if not isinstance(G, BasisMatrix):
        G = BasisMatrix(G)
    if G.n != M.shape[0]:
        raise DimensionError(f"prior basis lives in R^{G.n}, data in R^{M.shape[0]}")
    if eps_noise < 0:
        raise InvalidConfig(f"noise bound must be non-negative, got {eps_noise}")
    lam = default_lambda(M) if lam is None else lam
    if lam <= 0:
        raise InvalidConfig(f"lambda must be positive, got {lam}")
    return _inexact_alm(M, lam, G, eps_noise, tol, max_iters)
