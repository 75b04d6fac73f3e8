#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
This module contains the online robust subspace tracker (ReProCS-NORST): initialization, per-frame recovery by
projected compressive sensing, subspace updates from tumbling windows of estimated low-rank frames, automatic
subspace-change detection and an offline smoothing pass.

Remarks:

- All vectors are treated as of type [n,]
- Frame buffers are treated as of type [n, alpha] where each column is a frame
- Frames are indexed from zero; the tracker sees frames ``t_train, t_train + 1, ...`` after initialization

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

from .batch import AltProjConfig
from .batch import altproj
from .exceptions import DimensionError
from .exceptions import FallbackWarning
from .exceptions import IllConditionedSupport
from .exceptions import InvalidConfig
from .exceptions import IterationLimit
from .exceptions import PreconditionError
from .linalg import BasisMatrix
from .linalg import as_matrix
from .linalg import topr_svd
from .sparse import L1Problem
from .sparse import ProjectionOperator
from .sparse import l1_bpdn
from .sparse import l1_bpdn_columns
from .sparse import ls_on_support
from .sparse import support_threshold
from .utilities import FrameBuffer

logger = logging.getLogger(__name__)

DETECT = "detect"
UPDATE = "update"
OFFLINE_BLOCK = 512


class NorstParams(BaseModel):
    """
    Parameters of the NORST tracker.

    Everything that depends on the data dimensions is optional and filled in by :meth:`resolved`:

    - :math:`K = \\lceil C_K \\log(1/\\epsilon) \\rceil` subspace updates per segment
    - :math:`\\alpha = \\lceil \\max(C_\\alpha r \\ln n, \\alpha_{\\min}) \\rceil` frames per update window
    - :math:`\\omega_{supp} = x_{\\min}/2`, :math:`\\xi = x_{\\min}/15`
    - :math:`\\omega_{evals} = 2 \\epsilon^2 \\hat\\lambda^+` with :math:`\\hat\\lambda^+` estimated at initialization

    ``xi_mode = "video"`` replaces the fixed :math:`\\xi` by :math:`\\xi_t = \\|\\Psi \\hat l_{t-1}\\|`.

    """
    model_config = ConfigDict(extra="forbid")

    r: int = Field(ge=1)
    xmin: float = Field(gt=0.0)
    eps: float = Field(0.01, gt=0.0, lt=1.0)
    t_train: int = Field(100, ge=1)
    K: Optional[int] = Field(None, ge=1)
    alpha: Optional[int] = Field(None, ge=1)
    omega_supp: Optional[float] = Field(None, gt=0.0)
    xi: Optional[float] = Field(None, ge=0.0)
    omega_evals: Optional[float] = Field(None, ge=0.0)
    C_K: float = Field(1.0, gt=0.0)
    C_alpha: float = Field(1.0, gt=0.0)
    alpha_min: int = Field(60, ge=1)
    xi_mode: Literal["fixed", "video"] = "fixed"
    init_iters: Optional[int] = Field(None, ge=1)
    init_beta: Optional[float] = Field(None, gt=0.0)
    l1_max_iters: int = Field(2000, ge=1)
    l1_tol: float = Field(1e-5, gt=0.0)

    def resolved(self, n, lambda_plus=None):
        """
        Copy with every dimension-dependent parameter set. Explicit values are kept.

        """
        K = self.K if self.K is not None else max(1, int(np.ceil(self.C_K * np.log(1.0 / self.eps))))
        alpha = self.alpha
        if alpha is None:
            alpha = int(np.ceil(max(self.C_alpha * self.r * np.log(n), self.alpha_min)))
        if alpha < self.r:
            raise InvalidConfig(f"window length alpha = {alpha} is below the rank r = {self.r}")
        omega_evals = self.omega_evals
        if omega_evals is None and lambda_plus is not None:
            omega_evals = 2.0 * self.eps ** 2 * lambda_plus
        return self.model_copy(update={
            "K": K,
            "alpha": alpha,
            "omega_supp": self.omega_supp if self.omega_supp is not None else self.xmin / 2.0,
            "xi": self.xi if self.xi is not None else self.xmin / 15.0,
            "omega_evals": omega_evals,
        })


@dataclass
class TrackerState:
    """
    Runtime state of the tracker.

    Attributes
    ----------
    Phat : : :class:`~slrtrack.linalg.BasisMatrix`
        Current subspace estimate :math:`\\hat P_{(t)}`.
    phase : : ``"detect"`` or ``"update"``
    k : : integer
        Number of subspace updates done in the current update phase, from 0 to ``K - 1``. The update numbered
        ``k`` in ``[1, K]`` is made while this count is ``k - 1``.
    j : : integer
        Number of completed update phases.
    buffer : : :class:`~slrtrack.utilities.FrameBuffer`
        Tumbling window of the last estimated low-rank frames.
    t_hat : : list of integers
        Detected change times (the initialization time is not included).
    lambda_plus_hat : : number
        Estimate of the largest eigenvalue of the low-rank covariance.
    t : : integer
        Index of the last processed frame.
    segment_bases : : list of :class:`~slrtrack.linalg.BasisMatrix`
        Final estimate of every completed update phase.
    update_log : : list of ``(t, BasisMatrix)``
        Every subspace update with the frame index at which it happened.

    """
    Phat: BasisMatrix
    buffer: FrameBuffer
    lambda_plus_hat: float
    phase: str = UPDATE
    k: int = 0
    j: int = 0
    t: int = -1
    xi_t: Optional[float] = None
    t_hat: List[int] = field(default_factory=list)
    segment_bases: List[BasisMatrix] = field(default_factory=list)
    update_log: List[tuple] = field(default_factory=list)

    def enter(self, phase):
        if (self.phase, phase) not in ((DETECT, UPDATE), (UPDATE, DETECT)):
            raise PreconditionError(f"illegal phase transition {self.phase} -> {phase}")
        self.phase = phase


@dataclass
class FrameOutput:
    """
    Per-frame output of the tracker; ``lhat`` is ``m - xhat``. ``k`` is the update count of the phase when the frame
    was recovered, so frames of the window that yields update ``k`` in ``[1, K]`` carry ``k - 1``.

    """
    t: int
    xhat: np.ndarray
    lhat: np.ndarray
    That: np.ndarray
    phase: str
    k: int
    residual: float
    fallback: bool = False


def norst_init(Y_init, r, T_per_stage=None, beta=None, return_lowrank=False):
    """
    Initial subspace estimate from a training batch.

    AltProj runs with at most ``T_per_stage`` iterations per stage (default :math:`\\max(1, \\lceil 10 \\log r \\rceil)`),
    the estimate is the top-``r`` left singular subspace of its low-rank output :math:`\\hat L`, and
    :math:`\\hat\\lambda^+ = \\sigma_1(\\hat L)^2 / t_{train}`.

    The thresholding scale ``beta`` defaults to :math:`r / \\sqrt{n \\, t_{train}}`, the largest entry-to-:math:`\\sigma_1`
    ratio of a rank-``r`` matrix with unit incoherence on both sides. The data-driven AltProj default is meant for
    a whole batch and is not used here.

    Returns
    -------
    Phat0 : : :class:`~slrtrack.linalg.BasisMatrix`
    lambda_plus_hat : : number
    Lhat : : array of shape ``[n, t_train]``
        Only if ``return_lowrank`` is set.

    """
    Y_init = as_matrix(Y_init)
    n, t_train = Y_init.shape
    if t_train < r:
        raise PreconditionError(f"training batch of {t_train} frames is shorter than the rank {r}")
    if T_per_stage is None:
        T_per_stage = max(1, int(np.ceil(10 * np.log(r))))
    if beta is None:
        beta = r / np.sqrt(n * t_train)
    decomposition = altproj(Y_init, AltProjConfig(r=r, T_per_stage=T_per_stage, beta=beta))
    svd = topr_svd(decomposition.Lhat, r)
    lambda_plus = float(svd.sigma[0] ** 2 / t_train)
    logger.info("initialized from %d frames, lambda+ estimate %.4g", t_train, lambda_plus)
    if return_lowrank:
        return svd.U, lambda_plus, decomposition.Lhat
    return svd.U, lambda_plus


def _finish_frame(Psi, y, x_cs, m_t, params):
    That = support_threshold(x_cs, params.omega_supp)
    fallback = False
    try:
        xhat = ls_on_support(Psi, y, That)
    except IllConditionedSupport as exc:
        warnings.warn(
            f"least squares on {That.size} indices is ill-conditioned (cond {exc.cond:.3e}); "
            "using the compressive-sensing estimate",
            FallbackWarning,
        )
        xhat = np.zeros_like(x_cs)
        xhat[That] = x_cs[That]
        fallback = True
    lhat = m_t - xhat
    return xhat, lhat, That, fallback


def recover_frame(Phat, m_t, params, xi=None):
    """
    Projected compressive sensing followed by least squares on the detected support.

    Returns
    -------
    xhat, lhat, That, fallback

    """
    Psi = ProjectionOperator(Phat)
    y = Psi.matvec(m_t)
    xi = params.xi if xi is None else xi
    try:
        x_cs = l1_bpdn(L1Problem(Psi, y, xi=xi, max_iters=params.l1_max_iters, tol=params.l1_tol))
    except IterationLimit as exc:
        logger.debug("projected CS stopped at the iteration cap, residual %.3e", exc.residual)
        x_cs = exc.last_iterate
    return _finish_frame(Psi, y, x_cs, m_t, params)


def recover_frames(Phat, M_block, params):
    """
    :func:`recover_frame` for every column of ``M_block`` with the same estimate and the fixed :math:`\\xi`;
    the compressive-sensing step runs on the whole block at once.

    Returns
    -------
    list of ``(xhat, lhat, That, fallback)``

    """
    M_block = as_matrix(M_block)
    Psi = ProjectionOperator(Phat)
    Y = Psi.matmat(M_block)
    X_cs, _ = l1_bpdn_columns(Psi, Y, xi=params.xi, max_iters=params.l1_max_iters, tol=params.l1_tol)
    return [_finish_frame(Psi, Y[:, i], X_cs[:, i], M_block[:, i], params) for i in range(M_block.shape[1])]


def norst_frame(state, m_t, params):
    """
    Recover one frame with the current subspace estimate and push its low-rank part into the window buffer.

    """
    m_t = np.asarray(m_t, dtype=float).ravel()
    if m_t.size != state.Phat.n:
        raise DimensionError(f"frame has {m_t.size} entries, tracker expects {state.Phat.n}")
    xi = state.xi_t if params.xi_mode == "video" and state.xi_t is not None else params.xi
    xhat, lhat, That, fallback = recover_frame(state.Phat, m_t, params, xi=xi)
    state.t += 1
    state.buffer.push(lhat)
    residual = float(np.linalg.norm(state.Phat.project_out(lhat)))
    if params.xi_mode == "video":
        state.xi_t = residual
    return FrameOutput(
        t=state.t, xhat=xhat, lhat=lhat, That=That, phase=state.phase, k=state.k, residual=residual, fallback=fallback,
    )


def norst_frames(state, M_block, params):
    """
    :func:`norst_frame` for a block of frames that ends no later than the next full window, so that the estimate
    is the same for all of them. Fixed :math:`\\xi` only.

    """
    M_block = as_matrix(M_block)
    if M_block.shape[0] != state.Phat.n:
        raise DimensionError(f"frames have {M_block.shape[0]} entries, tracker expects {state.Phat.n}")
    if params.xi_mode == "video":
        raise PreconditionError("block recovery needs a fixed xi")
    if M_block.shape[1] > state.buffer.capacity - len(state.buffer):
        raise PreconditionError(
            f"block of {M_block.shape[1]} frames overruns the window ({len(state.buffer)} of {state.buffer.capacity})"
        )
    outputs = []
    for xhat, lhat, That, fallback in recover_frames(state.Phat, M_block, params):
        state.t += 1
        state.buffer.push(lhat)
        residual = float(np.linalg.norm(state.Phat.project_out(lhat)))
        outputs.append(FrameOutput(
            t=state.t, xhat=xhat, lhat=lhat, That=That, phase=state.phase, k=state.k, residual=residual,
            fallback=fallback,
        ))
    return outputs


def norst_subspace_update(state, params):
    """
    Replace the estimate by the top-``r`` left singular subspace of the full window; after ``K`` updates
    the tracker goes back to detection.

    """
    if state.phase != UPDATE:
        raise PreconditionError("subspace updates happen in the update phase only")
    if not state.buffer.full:
        raise PreconditionError(f"window holds {len(state.buffer)} of {state.buffer.capacity} frames")
    state.Phat = topr_svd(state.buffer.matrix(), params.r).U
    state.buffer.clear()
    state.k += 1
    state.update_log.append((state.t, state.Phat))
    logger.debug("subspace update %d of phase %d at t=%d", state.k, state.j, state.t)
    if state.k == params.K:
        state.segment_bases.append(state.Phat)
        state.j += 1
        state.k = 0
        state.enter(DETECT)
    return state


def detection_statistic(state):
    """
    :math:`\\sigma_1^2((I - \\hat P \\hat P^\\top) \\hat L_{window}) / \\alpha`.

    """
    B = state.Phat.project_out(state.buffer.matrix())
    return float(np.linalg.norm(B, 2) ** 2 / state.buffer.capacity)


def norst_detect(state, params):
    """
    Test the full window for a subspace change.

    A change is declared iff :math:`\\sigma_1^2((I - \\hat P \\hat P^\\top) \\hat L_{window}) / \\alpha > \\omega_{evals}`;
    the detection time is the last frame of the window. The window is cleared either way.

    """
    if state.phase != DETECT:
        raise PreconditionError("detection happens in the detect phase only")
    if not state.buffer.full:
        raise PreconditionError(f"window holds {len(state.buffer)} of {state.buffer.capacity} frames")
    if params.omega_evals is None:
        raise PreconditionError("detection threshold omega_evals is not resolved")
    detected = detection_statistic(state) > params.omega_evals
    state.buffer.clear()
    if detected:
        state.t_hat.append(state.t)
        state.enter(UPDATE)
        logger.info("subspace change detected at t=%d", state.t)
    return detected


@dataclass
class NorstResult:
    """
    Output of a full tracking pass over a data matrix.

    ``Lhat`` and ``Xhat`` cover all frames, the first ``t_train`` columns holding the initialization output.

    """
    Lhat: np.ndarray
    Xhat: np.ndarray
    supports: List[np.ndarray]
    t_hat: List[int]
    t_train: int
    params: NorstParams
    segment_bases: List[BasisMatrix]
    update_log: List[tuple]
    basis_per_frame: List[BasisMatrix]
    fallback_frames: List[int] = field(default_factory=list)


class NorstTracker:
    """
    Online robust subspace tracker.

    The tracker is a sequential state machine. It is initialized from a batch of ``t_train`` frames
    (:meth:`initialize`), then consumes one frame per call of :meth:`process_frame`, or the frames up to the end of
    the current window per call of :meth:`process_block`:

    - every frame is recovered by projected compressive sensing with the current estimate :math:`\\hat P`
      (:func:`norst_frame`)
    - in the update phase, each full window of ``alpha`` frames yields a new estimate (:func:`norst_subspace_update`);
      after ``K`` of them the tracker enters the detect phase
    - in the detect phase, each full window is tested for a change (:func:`norst_detect`); on a detection the
      tracker enters the update phase

    The tracker starts in the update phase right after initialization.

    Attributes
    ----------
    params : : :class:`NorstParams`
        Parameters as given; resolved against the data at initialization.
    keep_history : : boolean
        If set, processed frames are stored so that :meth:`offline` can re-run the recovery.

    """

    def __init__(self, params, keep_history=False):
        if isinstance(params, dict):
            params = NorstParams(**params)
        self.params_init = params
        self.params = params
        self.keep_history = keep_history
        self.state = None
        self.history = []
        self.init_lowrank = None

    def initialize(self, Y_init):
        Y_init = as_matrix(Y_init)
        n, t_train = Y_init.shape
        Phat, lambda_plus, Lhat = norst_init(
            Y_init, self.params_init.r, T_per_stage=self.params_init.init_iters,
            beta=self.params_init.init_beta, return_lowrank=True,
        )
        self.params = self.params_init.resolved(n, lambda_plus=lambda_plus).model_copy(update={"t_train": t_train})
        self.state = TrackerState(
            Phat=Phat, buffer=FrameBuffer(n, self.params.alpha), lambda_plus_hat=lambda_plus, t=t_train - 1,
        )
        self.init_lowrank = Lhat
        self.history = [Y_init[:, i].copy() for i in range(t_train)] if self.keep_history else []
        return self.state

    def _end_of_window(self):
        if self.state.buffer.full:
            if self.state.phase == UPDATE:
                norst_subspace_update(self.state, self.params)
            else:
                norst_detect(self.state, self.params)

    def process_frame(self, m_t):
        """
        Main method. See class documentation.

        """
        if self.state is None:
            raise PreconditionError("tracker is not initialized")
        out = norst_frame(self.state, m_t, self.params)
        if self.keep_history:
            self.history.append(np.asarray(m_t, dtype=float).ravel().copy())
        self._end_of_window()
        return out

    def process_block(self, M_block):
        """
        Process frames up to the end of the current window at once (:func:`norst_frames`); same result as
        :meth:`process_frame` on each of them.

        """
        M_block = as_matrix(M_block)
        if self.state is None:
            raise PreconditionError("tracker is not initialized")
        outputs = norst_frames(self.state, M_block, self.params)
        if self.keep_history:
            self.history.extend(np.array(M_block[:, i], dtype=float) for i in range(M_block.shape[1]))
        self._end_of_window()
        return outputs

    def run(self, M):
        """
        Initialize on the first ``t_train`` columns of ``M`` and track the rest, one window at a time
        (one frame at a time with ``xi_mode = "video"``).

        """
        M = as_matrix(M)
        n, tmax = M.shape
        t_train = self.params_init.t_train
        if t_train > tmax:
            raise DimensionError(f"t_train = {t_train} exceeds the number of frames {tmax}")
        self.initialize(M[:, :t_train])
        Lhat = np.empty_like(M)
        Xhat = np.empty_like(M)
        Lhat[:, :t_train] = self.init_lowrank
        Xhat[:, :t_train] = M[:, :t_train] - self.init_lowrank
        supports = [np.flatnonzero(Xhat[:, t]) for t in range(t_train)]
        bases = [self.state.Phat] * t_train
        fallback_frames = []
        t = t_train
        while t < tmax:
            if self.params.xi_mode == "video":
                stop = t + 1
            else:
                stop = min(tmax, t + self.state.buffer.capacity - len(self.state.buffer))
            bases.extend([self.state.Phat] * (stop - t))
            if self.params.xi_mode == "video":
                outputs = [self.process_frame(M[:, t])]
            else:
                outputs = self.process_block(M[:, t:stop])
            for out in outputs:
                Lhat[:, out.t], Xhat[:, out.t] = out.lhat, out.xhat
                supports.append(out.That)
                if out.fallback:
                    fallback_frames.append(out.t)
            t = stop
        return NorstResult(
            Lhat=Lhat, Xhat=Xhat, supports=supports, t_hat=list(self.state.t_hat), t_train=t_train,
            params=self.params, segment_bases=list(self.state.segment_bases), update_log=list(self.state.update_log),
            basis_per_frame=bases, fallback_frames=fallback_frames,
        )

    def final_bases(self):
        """
        Final estimate of every segment; a segment whose update phase was cut short by the end of the stream
        contributes the current estimate.

        """
        bases = list(self.state.segment_bases)
        if len(bases) < len(self.state.t_hat) + 1:
            bases.append(self.state.Phat)
        return bases

    def offline(self):
        """
        Offline pass over the stored history. See :func:`norst_offline`.

        """
        if not self.keep_history:
            raise PreconditionError("offline smoothing needs keep_history=True")
        frames = np.column_stack(self.history)
        return norst_offline(frames, self.final_bases(), self.state.t_hat, self.params)

    def reset(self):
        self.params = self.params_init
        self.state = None
        self.history = []
        self.init_lowrank = None


def norst_offline(frames, segment_bases, t_hat, params):
    """
    Offline smoothing: re-run the recovery of every frame with the final estimate of its segment.

    Segment ``j`` spans the frames from :math:`\\hat t_j` to :math:`\\hat t_{j+1}` (with :math:`\\hat t_0 = 0`).
    Frames in :math:`[\\hat t_j - 2\\alpha, \\hat t_j + K\\alpha)` may belong to either side of the change;
    they are recovered with both segment ``j - 1``'s and segment ``j``'s final estimates and the recovery with the
    smaller projected residual :math:`\\|(I - \\hat P \\hat P^\\top) \\hat l_t\\|` is kept.

    Parameters
    ----------
    frames : : array of shape ``[n, tmax]``
        All frames including the ``t_train`` initialization frames.
    segment_bases : : list of :class:`~slrtrack.linalg.BasisMatrix`
        ``len(t_hat) + 1`` final estimates.
    t_hat : : list of integers
        Detected change times.

    Returns
    -------
    Lhat, Xhat : : arrays of shape ``[n, tmax]``

    """
    frames = as_matrix(frames)
    n, tmax = frames.shape
    if len(segment_bases) != len(t_hat) + 1:
        raise DimensionError(f"{len(t_hat)} detections need {len(t_hat) + 1} segment estimates, got {len(segment_bases)}")
    alpha, K = params.alpha, params.K
    candidates = np.zeros((len(segment_bases), tmax), dtype=bool)
    candidates[np.searchsorted(t_hat, np.arange(tmax), side="right"), np.arange(tmax)] = True
    for i, t_change in enumerate(t_hat, start=1):
        lo, hi = max(0, t_change - 2 * alpha), min(tmax, t_change + K * alpha)
        candidates[i - 1:i + 1, lo:hi] = True

    Lhat = np.empty_like(frames)
    Xhat = np.empty_like(frames)
    best = np.full(tmax, np.inf)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", FallbackWarning)
        for c, P in enumerate(segment_bases):
            cols = np.flatnonzero(candidates[c])
            for block in np.array_split(cols, max(1, int(np.ceil(cols.size / OFFLINE_BLOCK)))):
                if block.size == 0:
                    continue
                for t, (xhat, lhat, _, _) in zip(block, recover_frames(P, frames[:, block], params)):
                    score = float(np.linalg.norm(P.project_out(lhat)))
                    if score < best[t]:
                        best[t] = score
                        Xhat[:, t], Lhat[:, t] = xhat, lhat
    logger.info("offline pass over %d frames with %d segment estimates", tmax, len(segment_bases))
    return Lhat, Xhat
