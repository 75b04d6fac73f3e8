#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Preset scenarios and benchmark suites.

Remarks:

- Desk-scale presets scale the piecewise-constant subspace experiment down to ``n = 200``, ``tmax = 3000``,
  ``r = 10`` so that a ten-trial suite runs in minutes
- Full-scale presets (``n = 1000``, ``tmax = 12000``, ``r = 30``, 100 trials) are for long runs
- Outliers are sparser in the first ``t_train`` frames so that the batch initialization is accurate

"""

from .bench import AlgorithmSpec
from .bench import BenchSuite
from .scenarios import OutlierSegment
from .scenarios import ScenarioConfig

DESK = dict(n=200, tmax=3000, r=10, change_times=[750, 2000], deltas=[0.001, 0.001], t_train=100)
FULL = dict(n=1000, tmax=12000, r=30, change_times=[3000, 8000], deltas=[0.001, 0.001], t_train=100)

DESK_NORST = {"alpha": 120, "init_iters": 10}
FULL_NORST = {"alpha": 300, "K": 8, "init_iters": 10}


def _bernoulli_segments(t_train, rho_train=0.01, rho=0.3):
    return [
        OutlierSegment(start=0, model="bernoulli", rho=rho_train),
        OutlierSegment(start=t_train, model="bernoulli", rho=rho),
    ]


def _moving_object_segments(t_train):
    return [
        OutlierSegment(start=0, model="moving_object", s_frac=0.01, b0=0.01),
        OutlierSegment(start=t_train, model="moving_object", s_frac=0.05, b0=0.3),
    ]


def desk_bernoulli(seed=0, noise_var=0.0):
    return ScenarioConfig(
        name="desk_bernoulli", outlier_segments=_bernoulli_segments(DESK["t_train"]),
        xmin=10.0, xmax=20.0, noise_var=noise_var, seed=seed, **DESK,
    )


def desk_moving_object(seed=0, noise_var=0.0):
    return ScenarioConfig(
        name="desk_moving_object", outlier_segments=_moving_object_segments(DESK["t_train"]),
        xmin=10.0, xmax=20.0, noise_var=noise_var, seed=seed, **DESK,
    )


def full_bernoulli(seed=0):
    return ScenarioConfig(
        name="full_bernoulli", outlier_segments=_bernoulli_segments(FULL["t_train"]),
        xmin=10.0, xmax=20.0, seed=seed, **FULL,
    )


def full_moving_object(seed=0):
    return ScenarioConfig(
        name="full_moving_object", outlier_segments=_moving_object_segments(FULL["t_train"]),
        xmin=10.0, xmax=20.0, seed=seed, **FULL,
    )


def fixed_subspace(seed=0, large=False, t_train=200):
    """
    Fixed subspace with :math:`L = U V^\\top`, i.i.d. :math:`N(0, 1/t_{\\max})` factors and sparse Bernoulli
    outliers of magnitude uniform on ``[-1000, 1000]``.

    """
    dims = dict(n=400, tmax=1000, r=50) if large else dict(n=200, tmax=1000, r=10)
    return ScenarioConfig(
        name="fixed_subspace", low_rank_model="orpca",
        outlier_segments=[OutlierSegment(start=0, model="bernoulli", rho=0.001)],
        xmin=-1000.0, xmax=1000.0, t_train=t_train, seed=seed, **dims,
    )


def _suite(scenarios, norst, trials, base_seed, workers, thresholds):
    algorithms = [
        AlgorithmSpec(name="norst", params=norst),
        AlgorithmSpec(name="norst-offline", params=norst),
        AlgorithmSpec(name="altproj", params={"T_per_stage": 10}),
    ]
    return BenchSuite(
        scenarios=scenarios, algorithms=algorithms, trials=trials, base_seed=base_seed, workers=workers,
        thresholds=thresholds,
    )


def desk_suite(trials=10, base_seed=0, workers=1):
    """
    Online NORST, offline NORST and AltProj on both desk-scale outlier models.

    """
    scenarios = [desk_bernoulli(), desk_moving_object()]
    thresholds = {f"{s.name}/{algo}": 1e-2 for s in scenarios for algo in ("norst", "norst-offline")}
    return _suite(scenarios, DESK_NORST, trials, base_seed, workers, thresholds)


def full_suite(trials=100, base_seed=0, workers=1):
    scenarios = [full_bernoulli(), full_moving_object()]
    return _suite(scenarios, FULL_NORST, trials, base_seed, workers, {})
