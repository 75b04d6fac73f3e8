#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
This module contains matrix completion and subspace tracking with missing data:
alternating minimization with a clipped spectral initialization, and GROUSE-style geodesic subspace updates.

Remarks:

- Observation masks are boolean arrays of the matrix shape; ``True`` marks an observed entry
- Unobserved entries of a :class:`MaskedMatrix` are stored as zeros

"""

import logging
import warnings
from dataclasses import dataclass
from dataclasses import field
from typing import List
from typing import Literal
from typing import Optional

import numpy as np
from pydantic import BaseModel
from pydantic import ConfigDict
from pydantic import Field

from .exceptions import DimensionError
from .exceptions import InvalidConfig
from .exceptions import PreconditionError
from .exceptions import SkippedStepWarning
from .exceptions import UnderdeterminedRow
from .linalg import BasisMatrix
from .linalg import orthonormalize
from .linalg import principal_angle_stats
from .linalg import topr_svd
from .utilities import rng_stream

logger = logging.getLogger(__name__)


class MaskedMatrix:
    """
    Partially observed matrix :math:`Y = \\mathcal P_\\Omega(L)`.

    Attributes
    ----------
    Y : : array of shape ``[n, d]``
        Observed values, zero off :math:`\\Omega`.
    omega : : boolean array of shape ``[n, d]``
    p_hat : : number
        Observed fraction :math:`|\\Omega| / (n d)`.

    """

    def __init__(self, values, omega):
        values = np.asarray(values, dtype=float)
        omega = np.asarray(omega, dtype=bool)
        if values.shape != omega.shape or values.ndim != 2:
            raise DimensionError(f"values {values.shape} and mask {omega.shape} must be matrices of one shape")
        self.omega = omega
        self.Y = np.where(omega, values, 0.0)

    @property
    def shape(self):
        return self.Y.shape

    @property
    def p_hat(self):
        return float(self.omega.mean()) if self.omega.size else 0.0

    def col_counts(self):
        return np.sum(self.omega, axis=0)

    def row_counts(self):
        return np.sum(self.omega, axis=1)

    def restricted(self, omega):
        """
        The same matrix observed on a subset of :math:`\\Omega`.

        """
        return MaskedMatrix(self.Y, self.omega & omega)


@dataclass
class FactorPair:
    """
    Factorization :math:`\\hat L = U V^\\top` with ``U`` of shape ``[n, r]`` and ``V`` of shape ``[d, r]``.

    """
    U: np.ndarray
    V: np.ndarray

    def __post_init__(self):
        if self.U.shape[1] != self.V.shape[1]:
            raise DimensionError(f"factor ranks differ: {self.U.shape[1]} vs {self.V.shape[1]}")

    def product(self):
        return self.U @ self.V.T


@dataclass
class AltMinInfo:
    factors: FactorPair
    sweeps: int
    objective_history: List[float] = field(default_factory=list)
    partitioned_sweeps: int = 0


def spectral_init_clipped(Y, r, mu=None, return_clipped=False):
    """
    Top-``r`` left singular vectors of :math:`Y / \\hat p` with entries above :math:`2 \\mu \\sqrt{r/n}` in magnitude
    zeroed, then orthonormalized. ``mu=None`` skips the clipping.

    Raises
    ------
    RankDeficient
        If the clipped matrix lost rank.

    """
    if Y.p_hat == 0:
        raise PreconditionError("no entry is observed")
    n = Y.shape[0]
    U = topr_svd(Y.Y / Y.p_hat, r).U.data
    if mu is not None:
        bound = 2.0 * mu * np.sqrt(r / n)
        U = np.where(np.abs(U) > bound, 0.0, U)
    basis = orthonormalize(U)
    if return_clipped:
        return basis, U
    return basis


def _ls_rows(A, Y, omega, axis, fallback=None):
    """
    Solve :math:`\\min_b \\|Y_{i, \\Omega_i} - A_{\\Omega_i} b\\|` for every row ``i`` of ``Y`` (``axis=0``) or every
    column (``axis=1``). A row with fewer than ``r`` samples in ``omega`` is solved on its samples in ``fallback``;
    if that is missing or short too, :class:`~slrtrack.exceptions.UnderdeterminedRow` is raised.

    """
    if axis == 1:
        Y, omega = Y.T, omega.T
        fallback = None if fallback is None else fallback.T
    r = A.shape[1]
    out = np.zeros((Y.shape[0], r))
    for i in range(Y.shape[0]):
        idx = np.flatnonzero(omega[i])
        if idx.size < r and fallback is not None:
            idx = np.flatnonzero(fallback[i])
        if idx.size < r:
            raise UnderdeterminedRow(
                f"{'column' if axis == 1 else 'row'} {i} has {idx.size} observations for rank {r}", index=i, axis=axis
            )
        out[i] = np.linalg.lstsq(A[idx], Y[i, idx], rcond=None)[0]
    return out


def _masked_objective(Y, omega, U, V):
    return float(np.sum((omega * (Y - U @ V.T)) ** 2))


def partition_mask(omega, parts, seed):
    """
    Split :math:`\\Omega` into ``parts`` disjoint random subsets, returned as a list of masks.

    """
    labels = rng_stream(seed, "partition").integers(0, parts, size=omega.shape)
    return [omega & (labels == k) for k in range(parts)]


def mc_altmin(Y, r, T=None, mode="all_samples", eps=None, mu=None, seed=0, refine=True, return_info=False):
    """
    Matrix completion by alternating minimization of :math:`\\|\\mathcal P_\\Omega(Y - U V^\\top)\\|_F^2`.

    ``U`` starts from :func:`spectral_init_clipped`; every sweep solves the per-column least squares for ``V`` and
    then the per-row least squares for ``U``, each factor being orthonormalized before it is held fixed.
    With all samples the objective is non-increasing across half-sweeps.

    Parameters
    ----------
    Y : : :class:`MaskedMatrix`
    r : : integer
    T : : integer
        Number of sweeps, by default :math:`\\lceil 10 \\log(\\|Y\\|_F / \\epsilon) \\rceil`.
    mode : : ``"all_samples"`` or ``"partitioned"``
        ``"partitioned"`` splits :math:`\\Omega` into ``2T + 1`` disjoint subsets: one for the initialization and
        a fresh one for every half-sweep. A row or column with fewer than ``r`` samples in its subset is solved on
        all of its samples.
    eps : : number
        Target residual :math:`\\|\\mathcal P_\\Omega(Y - U V^\\top)\\|_F`, by default :math:`10^{-10} \\|Y\\|_F`;
        iterations stop once it is met.
    mu : : number or ``None``
        Incoherence used for clipping the initialization.
    refine : : boolean
        Partitioned mode only: if the ``T`` partitioned sweeps end above ``eps``, continue with all-sample sweeps
        from their output until ``eps`` is met, the objective stalls or
        :math:`\\lceil 10 \\log(\\|Y\\|_F / \\epsilon) \\rceil` more sweeps are done.

    Raises
    ------
    UnderdeterminedRow
        If a row or column has fewer than ``r`` observations.

    """
    n, d = Y.shape
    if r < 1 or r > min(n, d):
        raise DimensionError(f"rank {r} not in [1, {min(n, d)}]")
    if mode not in ("all_samples", "partitioned"):
        raise InvalidConfig(f"unknown alternating-minimization mode {mode!r}")
    norm_Y = np.linalg.norm(Y.Y)
    if norm_Y == 0:
        info = AltMinInfo(factors=FactorPair(np.zeros((n, r)), np.zeros((d, r))), sweeps=0)
        return (np.zeros((n, d)), info) if return_info else np.zeros((n, d))
    eps = 1e-10 * norm_Y if eps is None else eps
    T_default = max(1, int(np.ceil(10 * np.log(norm_Y / eps))))
    T = T_default if T is None else T

    if mode == "partitioned":
        subsets = partition_mask(Y.omega, 2 * T + 1, seed)
        U = spectral_init_clipped(Y.restricted(subsets[0]), r, mu).data
        masks = [(subsets[2 * j + 1], subsets[2 * j + 2]) for j in range(T)]
        if refine:
            masks += [(Y.omega, Y.omega)] * T_default
    else:
        U = spectral_init_clipped(Y, r, mu).data
        masks = [(Y.omega, Y.omega)] * T

    history = []
    sweeps = partitioned_sweeps = 0
    for omega_v, omega_u in masks:
        V = _ls_rows(U, Y.Y, omega_v, axis=1, fallback=Y.omega)
        history.append(_masked_objective(Y.Y, Y.omega, U, V))
        V, R = np.linalg.qr(V)
        U = U @ R.T
        U = _ls_rows(V, Y.Y, omega_u, axis=0, fallback=Y.omega)
        history.append(_masked_objective(Y.Y, Y.omega, U, V))
        sweeps += 1
        all_samples = omega_v is Y.omega
        partitioned_sweeps += not all_samples
        if np.sqrt(history[-1]) <= eps:
            break
        if all_samples and sweeps - partitioned_sweeps > 1 and history[-3] - history[-1] <= 1e-12 * history[-3]:
            break
        U, R = np.linalg.qr(U)
        V = V @ R.T

    logger.debug(
        "mc_altmin finished after %d sweeps (%d partitioned), residual %.3e", sweeps, partitioned_sweeps,
        np.sqrt(history[-1]),
    )
    Lhat = U @ V.T
    if return_info:
        info = AltMinInfo(
            factors=FactorPair(U, V), sweeps=sweeps, objective_history=history, partitioned_sweeps=partitioned_sweeps,
        )
        return Lhat, info
    return Lhat


def grouse_sample_bound(n, r, mu):
    """
    Per-column sample count :math:`q = (64/3) r \\log^2 n \\, \\mu \\log(20 r)` of the GROUSE partial-observation guarantee.

    """
    return 64.0 / 3.0 * r * np.log(n) ** 2 * mu * np.log(20 * r)


class GrouseParams(BaseModel):
    """
    Parameters of the GROUSE tracker.

    ``step = "greedy"`` rotates by :math:`\\theta = \\arctan(\\|r\\| / \\|p\\|)`, which moves the estimate onto the
    observed vector when it is fully observed; ``step = "fixed"`` uses :math:`\\theta = \\eta \\|r\\| \\|p\\|`.
    When ``mu_r_bound`` is set, steps whose residual-denseness diagnostic exceeds it trigger a warning.

    """
    model_config = ConfigDict(extra="forbid")

    step: Literal["greedy", "fixed"] = "greedy"
    eta: float = Field(0.1, gt=0.0)
    mu_r_bound: Optional[float] = Field(None, gt=0.0)


@dataclass
class GrouseStepInfo:
    skipped: bool
    residual_norm: float = 0.0
    theta: float = 0.0
    mu_r: float = float("nan")


def _skip(Phat, reason):
    warnings.warn(f"GROUSE step skipped: {reason}", SkippedStepWarning)
    return Phat, GrouseStepInfo(skipped=True)


def grouse_step(Phat, y, omega_t, step="greedy", eta=0.1, return_info=False):
    """
    One GROUSE update of a subspace estimate from a partially observed vector.

    With weights :math:`w = \\arg\\min \\|y_\\Omega - \\hat P_\\Omega w\\|`, prediction :math:`p = \\hat P w` and the
    zero-filled residual :math:`r` on :math:`\\Omega`, the estimate moves along the geodesic

    .. math:: \\hat P \\leftarrow \\hat P + \\left((\\cos\\theta - 1) \\frac{p}{\\|p\\|} + \\sin\\theta \\frac{r}{\\|r\\|}\\right) \\frac{w^\\top}{\\|w\\|}

    and is re-orthonormalized. Steps with :math:`|\\Omega| < r`, a singular restricted system or zero weights are
    skipped with a :class:`~slrtrack.exceptions.SkippedStepWarning`; the estimate is returned unchanged.

    Parameters
    ----------
    omega_t : : integer index array or boolean mask of shape ``[n,]``

    """
    y = np.asarray(y, dtype=float).ravel()
    U = Phat.data
    n, r = U.shape
    if y.size != n:
        raise DimensionError(f"vector has {y.size} entries, subspace lives in R^{n}")
    omega = np.asarray(omega_t)
    if omega.dtype == bool:
        omega = np.flatnonzero(omega)

    def done(P, info):
        return (P, info) if return_info else P

    if omega.size < r:
        return done(*_skip(Phat, f"{omega.size} observations for rank {r}"))
    U_o = U[omega]
    w, _, rank, _ = np.linalg.lstsq(U_o, y[omega], rcond=None)
    if rank < r:
        return done(*_skip(Phat, "restricted basis is singular"))
    norm_w = np.linalg.norm(w)
    if norm_w == 0:
        return done(*_skip(Phat, "zero weights"))

    p = U @ w
    res = np.zeros(n)
    res[omega] = y[omega] - p[omega]
    norm_r = np.linalg.norm(res)
    norm_p = np.linalg.norm(p)
    if norm_r <= 1e-14 * max(1.0, np.linalg.norm(y)):
        return done(Phat, GrouseStepInfo(skipped=False))

    theta = np.arctan(norm_r / norm_p) if step == "greedy" else eta * norm_r * norm_p
    direction = (np.cos(theta) - 1.0) * p / norm_p + np.sin(theta) * res / norm_r
    P_new = orthonormalize(U + np.outer(direction, w / norm_w))
    mu_r = float(n * np.max(np.abs(res)) ** 2 / norm_r ** 2)
    return done(P_new, GrouseStepInfo(skipped=False, residual_norm=float(norm_r), theta=float(theta), mu_r=mu_r))


@dataclass
class TrackTrace:
    """
    Trace of a GROUSE run: error :math:`\\sum_i \\sin^2 \\theta_i` against the truth (when given), residual-denseness
    diagnostic and skipped steps per frame, and the final estimate.

    """
    eps: List[float] = field(default_factory=list)
    mu_r: List[float] = field(default_factory=list)
    skipped: List[int] = field(default_factory=list)
    Phat: Optional[BasisMatrix] = None


class GrouseTracker:
    """
    Subspace tracker with missing data.

    Attributes
    ----------
    params : : :class:`GrouseParams`
    Phat : : :class:`~slrtrack.linalg.BasisMatrix`
        Current estimate.

    """

    def __init__(self, Phat0, params=None):
        self.params = params if params is not None else GrouseParams()
        self.Phat0 = Phat0
        self.Phat = Phat0
        self.t = -1

    def process_frame(self, y, omega_t):
        self.t += 1
        self.Phat, info = grouse_step(self.Phat, y, omega_t, step=self.params.step, eta=self.params.eta, return_info=True)
        bound = self.params.mu_r_bound
        if bound is not None and not info.skipped and info.mu_r > bound:
            warnings.warn(f"residual denseness {info.mu_r:.3g} above {bound:.3g} at t={self.t}", RuntimeWarning)
        return info

    def reset(self):
        self.Phat = self.Phat0
        self.t = -1


def track_missing(stream, Phat0, params=None, truth=None):
    """
    Run GROUSE over a stream of ``(y_t, omega_t)`` pairs.

    Parameters
    ----------
    truth : : :class:`~slrtrack.linalg.BasisMatrix`, a list of them (one per frame) or ``None``
        Ground truth for the error trace.

    Returns
    -------
    :class:`TrackTrace`

    """
    tracker = GrouseTracker(Phat0, params)
    trace = TrackTrace()
    for t, (y, omega_t) in enumerate(stream):
        info = tracker.process_frame(y, omega_t)
        trace.mu_r.append(info.mu_r)
        if info.skipped:
            trace.skipped.append(t)
        if truth is not None:
            P = truth[t] if isinstance(truth, (list, tuple)) else truth
            trace.eps.append(principal_angle_stats(tracker.Phat, P)[0])
    trace.Phat = tracker.Phat
    return trace
