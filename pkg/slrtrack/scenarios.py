#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
This module contains the synthetic data models: low-rank matrices lying in fixed or piecewise-constant rotating
subspaces, bounded coefficients with a prescribed condition number, Bernoulli and moving-object outlier supports,
outlier magnitudes, missing-entry masks and small dense noise.

Remarks:

- Frames are indexed from zero; a change time ``t_j`` is the first frame generated from ``P_j``
- Every generator takes either an integer seed or a ``numpy.random.Generator``; integer seeds are expanded into
  named streams with :func:`~slrtrack.utilities.rng_stream`, so each generator draws from its own stream
- Outlier models are given per segment of frames (:class:`OutlierSegment`); segments are generated independently
  and concatenated

"""

import json
import logging
import os
from dataclasses import dataclass
from math import isclose
from typing import List
from typing import Literal
from typing import Optional

import numpy as np
import scipy.linalg
from pydantic import BaseModel
from pydantic import ConfigDict
from pydantic import Field
from pydantic import model_validator

from . import matio
from .exceptions import DimensionError
from .exceptions import InvalidConfig
from .linalg import BasisMatrix
from .linalg import orthonormalize
from .linalg import random_basis
from .linalg import random_skew
from .linalg import rotate_subspace
from .utilities import load_config
from .utilities import parse_config
from .utilities import rng_stream

logger = logging.getLogger(__name__)


def _generator(seed, *names):
    if isinstance(seed, np.random.Generator):
        return seed
    return rng_stream(seed, *names)


class OutlierSegment(BaseModel):
    """
    Outlier model for the frames from ``start`` up to the start of the next segment.

    ``model`` is one of

    - ``"bernoulli"``: every entry is an outlier with probability ``rho``
    - ``"moving_object"``: a block of ``round(s_frac * n)`` consecutive rows moving down and back up,
      ``b0`` being the fraction of a period any row is occupied and ``tau`` the half period
    - ``"none"``: no outliers

    """
    model_config = ConfigDict(extra="forbid")

    start: int = Field(0, ge=0)
    model: Literal["bernoulli", "moving_object", "none"] = "bernoulli"
    rho: float = Field(0.0, ge=0.0, le=1.0)
    s_frac: float = Field(0.05, gt=0.0, le=1.0)
    b0: float = Field(0.3, gt=0.0, le=1.0)
    tau: int = Field(50, ge=1)


class ScenarioConfig(BaseModel):
    """
    Full description of a synthetic experiment.

    Attributes
    ----------
    n, tmax, r : : integers
        Ambient dimension, number of frames and subspace dimension.
    change_times : : list of integers
        Frames at which the subspace changes, strictly ascending in ``(0, tmax)``.
    deltas : : list of numbers
        Rotation magnitude of every change.
    low_rank_model : : ``"bounded"`` or ``"orpca"``
        ``"bounded"``: :math:`l_t = P_{(t)} a_t` with :math:`(a_t)_i \\sim \\text{unif}[-q_i, q_i]`, condition number ``f``.
        ``"orpca"``: :math:`L = U V^\\top` with i.i.d. :math:`N(0, 1/t_{\\max})` entries, :math:`U` rotated at every change.
    outlier_segments : : list of :class:`OutlierSegment`
        Starts strictly ascending; frames before the first start carry no outliers.
    xmin, xmax : : numbers
        Outlier magnitudes are uniform on ``[xmin, xmax]``; use ``[-a, a]`` for the symmetric law.
    noise_var : : number
        Variance of the i.i.d. Gaussian dense noise.
    t_train : : integer
        Length of the initialization segment handed to batch initializers.
    seed : : integer
        Base seed of all generators.

    """
    model_config = ConfigDict(extra="forbid")

    name: str = "scenario"
    n: int = Field(ge=1)
    tmax: int = Field(ge=1)
    r: int = Field(ge=1)
    change_times: List[int] = []
    deltas: List[float] = []
    low_rank_model: Literal["bounded", "orpca"] = "bounded"
    f: float = 50.0
    outlier_segments: List[OutlierSegment] = []
    xmin: float = 10.0
    xmax: float = 20.0
    noise_var: float = Field(0.0, ge=0.0)
    t_train: int = Field(100, ge=1)
    seed: int = Field(0, ge=0)

    @model_validator(mode="after")
    def _check_consistency(self):
        if self.r > self.n:
            raise ValueError(f"r = {self.r} exceeds n = {self.n}")
        if self.xmin > self.xmax:
            raise ValueError(f"xmin = {self.xmin} exceeds xmax = {self.xmax}")
        if self.f < 1:
            raise ValueError(f"condition number f = {self.f} is below 1")
        if len(self.deltas) != len(self.change_times):
            raise ValueError(f"{len(self.change_times)} change times but {len(self.deltas)} rotation magnitudes")
        bounds = [0] + list(self.change_times) + [self.tmax]
        if any(a >= b for a, b in zip(bounds[:-1], bounds[1:])):
            raise ValueError(f"change times {self.change_times} must be strictly ascending in (0, {self.tmax})")
        if any(d < 0 for d in self.deltas):
            raise ValueError("rotation magnitudes must be non-negative")
        starts = [seg.start for seg in self.outlier_segments]
        if any(a >= b for a, b in zip(starts[:-1], starts[1:])) or any(s >= self.tmax for s in starts):
            raise ValueError(f"outlier segment starts {starts} must be strictly ascending below tmax")
        return self

    @property
    def J(self):
        return len(self.change_times)

    def segment_bounds(self):
        """
        ``[(t_0, t_1), (t_1, t_2), ..., (t_J, tmax)]`` with ``t_0 = 0``.

        """
        bounds = [0] + list(self.change_times) + [self.tmax]
        return list(zip(bounds[:-1], bounds[1:]))

    def outlier_bounds(self):
        starts = [seg.start for seg in self.outlier_segments]
        return list(zip(self.outlier_segments, starts, starts[1:] + [self.tmax]))


def load_scenario(path):
    return load_config(ScenarioConfig, path)


def parse_scenario(data):
    return parse_config(ScenarioConfig, data)


class OutlierSupport:
    """
    Outlier supports :math:`\\mathcal T_t`, stored as an ``[n, tmax]`` boolean mask.

    """

    def __init__(self, mask):
        mask = np.array(mask, dtype=bool)
        if mask.ndim != 2:
            raise DimensionError(f"a support mask must be 2-D, got {mask.ndim}-D")
        mask.setflags(write=False)
        self.mask = mask

    @property
    def n(self):
        return self.mask.shape[0]

    @property
    def tmax(self):
        return self.mask.shape[1]

    def support(self, t):
        """
        Sorted row indices of :math:`\\mathcal T_t`.

        """
        return np.flatnonzero(self.mask[:, t])

    def outfrac_col(self):
        """
        :math:`\\max_t |\\mathcal T_t| / n`.

        """
        if self.tmax == 0:
            return 0.0
        return float(np.max(np.sum(self.mask, axis=0)) / self.n)

    def outfrac_row(self, alpha):
        """
        Largest fraction of nonzeros in a row of any ``alpha``-consecutive-column sub-matrix.

        ``alpha`` is capped at ``tmax``.

        """
        if alpha < 1:
            raise InvalidConfig(f"window length must be positive, got {alpha}")
        alpha = min(int(alpha), self.tmax)
        if alpha == 0:
            return 0.0
        counts = np.concatenate([np.zeros((self.n, 1)), np.cumsum(self.mask, axis=1)], axis=1)
        windows = counts[:, alpha:] - counts[:, :-alpha]
        return float(np.max(windows) / alpha)

    def fractions(self, alpha):
        return self.outfrac_col(), self.outfrac_row(alpha)

    @classmethod
    def concatenate(cls, supports):
        return cls(np.hstack([s.mask for s in supports]))

    def __repr__(self):
        return f"OutlierSupport(n={self.n}, tmax={self.tmax}, nnz={int(self.mask.sum())})"


@dataclass
class GroundTruth:
    """
    Materialized scenario :math:`M = L + S + V`.

    ``V_noise`` is stored as ``M - L - S`` of the assembled matrices, so ``M - L - S - V_noise`` vanishes
    exactly in floating point.

    """
    M: np.ndarray
    L: np.ndarray
    S: np.ndarray
    V_noise: np.ndarray
    bases: List[BasisMatrix]
    coeffs: np.ndarray
    support: OutlierSupport
    change_times: List[int]
    config: Optional[ScenarioConfig] = None

    @property
    def n(self):
        return self.M.shape[0]

    @property
    def tmax(self):
        return self.M.shape[1]

    def segment_of(self, t):
        return int(np.searchsorted(self.change_times, t, side="right"))

    def basis_at(self, t):
        """
        :math:`P_{(t)}`, the basis generating frame ``t``.

        """
        return self.bases[self.segment_of(t)]


def gen_fixed_lowrank(n, tmax, r, seed):
    """
    :math:`L = U V^\\top` with i.i.d. :math:`N(0, 1/t_{\\max})` entries in ``U`` (``[n, r]``) and ``V`` (``[tmax, r]``).

    Returns
    -------
    L : : array of shape ``[n, tmax]``
    P : : :class:`BasisMatrix`, orthonormalized ``U``

    """
    if r < 1 or r > min(n, tmax):
        raise DimensionError(f"rank {r} not in [1, {min(n, tmax)}]")
    scale = np.sqrt(1.0 / tmax)
    U = _generator(seed, "lowrank", "U").normal(0.0, scale, size=(n, r))
    V = _generator(seed, "lowrank", "V").normal(0.0, scale, size=(tmax, r))
    return U @ V.T, orthonormalize(U)


def gen_piecewise_subspaces(n, r, J, delta_list, seed):
    """
    Subspaces :math:`P_0, \\dots, P_J` with :math:`P_j = e^{\\delta_j B_j} P_{j-1}`.

    :math:`P_0` is an orthonormalized standard-normal matrix; :math:`B_j = \\tilde B_j - \\tilde B_j^\\top`
    with standard-normal :math:`\\tilde B_j`, each drawn from its own stream.

    """
    if J < 0:
        raise InvalidConfig(f"number of changes must be non-negative, got {J}")
    if len(delta_list) != J:
        raise InvalidConfig(f"{J} changes need {J} rotation magnitudes, got {len(delta_list)}")
    if isinstance(seed, np.random.Generator):
        streams = [seed] * (J + 1)
    else:
        streams = [rng_stream(seed, "subspace", 0)] + [rng_stream(seed, "rotation", j) for j in range(1, J + 1)]
    bases = [random_basis(n, r, streams[0])]
    for j, delta in enumerate(delta_list, start=1):
        B = random_skew(n, streams[j])
        bases.append(rotate_subspace(bases[-1], delta, B))
    return bases


def bounded_halfwidths(r, f):
    """
    :math:`q_i = \\sqrt f - \\sqrt f (i - 1) / (2r)` for :math:`i < r`, :math:`q_r = 1`.

    """
    if f < 1:
        raise InvalidConfig(f"condition number f = {f} is below 1")
    i = np.arange(1, r + 1, dtype=float)
    q = np.sqrt(f) - np.sqrt(f) * (i - 1) / (2 * r)
    q[-1] = 1.0
    return q


def gen_bounded_coeffs(r, tmax, f, seed):
    """
    Coefficients :math:`(a_t)_i \\sim \\text{unif}[-q_i, q_i]`, i.i.d. over time, as an ``[r, tmax]`` array.

    """
    q = bounded_halfwidths(r, f)
    rng = _generator(seed, "coeffs")
    return rng.uniform(-1.0, 1.0, size=(r, tmax)) * q[:, None]


def gen_bernoulli_support(n, tmax, rho_x, seed):
    if not 0.0 <= rho_x <= 1.0:
        raise InvalidConfig(f"outlier probability must lie in [0, 1], got {rho_x}")
    rng = _generator(seed, "bernoulli")
    return OutlierSupport(rng.random((n, tmax)) < rho_x)


def gen_moving_object_support(n, tmax, s, tau, c0):
    """
    Moving-object supports.

    With :math:`m = 1/c_0` blocks of ``s`` rows and :math:`\\beta = \\lceil c_0 \\tau \\rceil`, the object covers
    block ``b`` for :math:`\\beta` frames, moves one block down, and after :math:`\\tau` frames moves back up
    the same way; the pattern repeats every :math:`2\\tau` frames. The output is deterministic.

    Raises
    ------
    InvalidConfig
        If :math:`1/c_0` is not an integer, :math:`s/c_0 > n`, or :math:`\\tau < \\beta`.

    """
    if not 0.0 < c0 <= 1.0:
        raise InvalidConfig(f"c0 must lie in (0, 1], got {c0}")
    m = int(round(1.0 / c0))
    if not isclose(m * c0, 1.0, rel_tol=1e-9):
        raise InvalidConfig(f"1/c0 must be an integer, got 1/{c0} = {1.0 / c0}")
    if s < 1 or s * m > n:
        raise InvalidConfig(f"object of {s} rows moving over {m} blocks does not fit into n = {n}")
    beta = -(-tau // m)
    if tau < beta:
        raise InvalidConfig(f"tau = {tau} is shorter than a block dwell time {beta}")
    mask = np.zeros((n, tmax), dtype=bool)
    for t in range(tmax):
        phase = t % (2 * tau)
        if phase < tau:
            b = min(phase // beta, m - 1)
        else:
            b = m - 1 - min((phase - tau) // beta, m - 1)
        mask[b * s:(b + 1) * s, t] = True
    return OutlierSupport(mask)


def moving_object_geometry(n, s_frac, b0):
    """
    Convert the reported densities ``(s/n, b0)`` into ``(s, c0)`` with :math:`c_0 = 1/\\text{round}(1/b_0)`.

    """
    s = max(1, int(round(s_frac * n)))
    c0 = 1.0 / max(1, int(round(1.0 / b0)))
    return s, c0


def gen_outliers(support, xmin, xmax, seed):
    """
    Outlier matrix with i.i.d. :math:`\\text{unif}[x_{\\min}, x_{\\max}]` entries on the support and zeros elsewhere.

    """
    if xmin > xmax:
        raise InvalidConfig(f"xmin = {xmin} exceeds xmax = {xmax}")
    S = np.zeros(support.mask.shape)
    count = int(support.mask.sum())
    S[support.mask] = _generator(seed, "magnitudes").uniform(xmin, xmax, size=count)
    return S


def gen_missing_mask(n, tmax, p, seed):
    """
    Observed set :math:`\\Omega` as an ``[n, tmax]`` boolean mask, every entry observed with probability ``p``.

    """
    if not 0.0 < p <= 1.0:
        raise InvalidConfig(f"observation probability must lie in (0, 1], got {p}")
    return _generator(seed, "observed").random((n, tmax)) < p


def undersampled_columns(mask, q):
    """
    Indices of the columns of an observation mask with fewer than ``q`` observed entries.

    """
    counts = np.sum(np.asarray(mask, dtype=bool), axis=0)
    return np.flatnonzero(counts < q)


def _segment_support(segment, n, length, rng):
    if segment.model == "none" or length == 0:
        return OutlierSupport(np.zeros((n, length), dtype=bool))
    if segment.model == "bernoulli":
        return gen_bernoulli_support(n, length, segment.rho, rng)
    s, c0 = moving_object_geometry(n, segment.s_frac, segment.b0)
    return gen_moving_object_support(n, length, s, segment.tau, c0)


def _orpca_low_rank(config):
    bounds = config.segment_bounds()
    scale = np.sqrt(1.0 / config.tmax)
    U = rng_stream(config.seed, "lowrank", "U").normal(0.0, scale, size=(config.n, config.r))
    V = rng_stream(config.seed, "lowrank", "V").normal(0.0, scale, size=(config.tmax, config.r))
    L = np.empty((config.n, config.tmax))
    bases = []
    for j, (start, stop) in enumerate(bounds):
        if j > 0:
            B = random_skew(config.n, rng_stream(config.seed, "rotation", j))
            U = scipy.linalg.expm(config.deltas[j - 1] * B) @ U
        bases.append(orthonormalize(U))
        L[:, start:stop] = U @ V[start:stop].T
    coeffs = np.empty((config.r, config.tmax))
    for P, (start, stop) in zip(bases, bounds):
        coeffs[:, start:stop] = P.data.T @ L[:, start:stop]
    return L, bases, coeffs


def _bounded_low_rank(config):
    bases = gen_piecewise_subspaces(config.n, config.r, config.J, config.deltas, config.seed)
    coeffs = gen_bounded_coeffs(config.r, config.tmax, config.f, config.seed)
    L = np.empty((config.n, config.tmax))
    for P, (start, stop) in zip(bases, config.segment_bounds()):
        L[:, start:stop] = P.data @ coeffs[:, start:stop]
    return L, bases, coeffs


def assemble_scenario(config):
    """
    Materialize a :class:`ScenarioConfig` into a :class:`GroundTruth`.

    The output is bitwise reproducible for a fixed configuration.

    """
    if isinstance(config, dict):
        config = parse_scenario(config)
    n, tmax = config.n, config.tmax
    if config.low_rank_model == "orpca":
        L, bases, coeffs = _orpca_low_rank(config)
    else:
        L, bases, coeffs = _bounded_low_rank(config)

    pieces = []
    first_start = config.outlier_segments[0].start if config.outlier_segments else tmax
    pieces.append(OutlierSupport(np.zeros((n, first_start), dtype=bool)))
    for k, (segment, start, stop) in enumerate(config.outlier_bounds()):
        pieces.append(_segment_support(segment, n, stop - start, rng_stream(config.seed, "support", k)))
    support = OutlierSupport.concatenate(pieces)
    S = gen_outliers(support, config.xmin, config.xmax, rng_stream(config.seed, "magnitudes"))

    noise = np.zeros((n, tmax))
    if config.noise_var > 0:
        noise = rng_stream(config.seed, "noise").normal(0.0, np.sqrt(config.noise_var), size=(n, tmax))
    M = L + S + noise
    V_noise = M - L - S

    logger.info(
        "assembled scenario %s: n=%d tmax=%d r=%d J=%d outlier fill %.4f",
        config.name, n, tmax, config.r, config.J, support.mask.mean() if support.mask.size else 0.0,
    )
    return GroundTruth(
        M=M, L=L, S=S, V_noise=V_noise, bases=bases, coeffs=coeffs, support=support,
        change_times=list(config.change_times), config=config,
    )


def save_ground_truth(truth, out_dir):
    """
    Persist a :class:`GroundTruth` as ``SLRM``/``SLRB`` files plus ``manifest.json``.

    """
    os.makedirs(out_dir, exist_ok=True)
    matio.write_matrix(os.path.join(out_dir, "M.slrm"), truth.M)
    matio.write_matrix(os.path.join(out_dir, "L.slrm"), truth.L)
    matio.write_matrix(os.path.join(out_dir, "S.slrm"), truth.S)
    matio.write_matrix(os.path.join(out_dir, "V.slrm"), truth.V_noise)
    matio.write_matrix(os.path.join(out_dir, "coeffs.slrm"), truth.coeffs)
    matio.write_mask(os.path.join(out_dir, "support.slrb"), truth.support.mask)
    for j, P in enumerate(truth.bases):
        matio.write_matrix(os.path.join(out_dir, f"P_{j}.slrm"), P.data)
    manifest = {
        "n": truth.n,
        "tmax": truth.tmax,
        "change_times": truth.change_times,
        "num_bases": len(truth.bases),
        "seed": truth.config.seed if truth.config is not None else None,
        "config": truth.config.model_dump() if truth.config is not None else None,
    }
    with open(os.path.join(out_dir, "manifest.json"), "w") as f:
        json.dump(manifest, f, indent=2)


def load_ground_truth(out_dir):
    with open(os.path.join(out_dir, "manifest.json"), "r") as f:
        manifest = json.load(f)
    config = parse_scenario(manifest["config"]) if manifest.get("config") is not None else None
    return GroundTruth(
        M=matio.read_matrix(os.path.join(out_dir, "M.slrm")),
        L=matio.read_matrix(os.path.join(out_dir, "L.slrm")),
        S=matio.read_matrix(os.path.join(out_dir, "S.slrm")),
        V_noise=matio.read_matrix(os.path.join(out_dir, "V.slrm")),
        bases=[BasisMatrix(matio.read_matrix(os.path.join(out_dir, f"P_{j}.slrm")))
               for j in range(manifest["num_bases"])],
        coeffs=matio.read_matrix(os.path.join(out_dir, "coeffs.slrm")),
        support=OutlierSupport(matio.read_mask(os.path.join(out_dir, "support.slrb"))),
        change_times=list(manifest["change_times"]),
        config=config,
    )
